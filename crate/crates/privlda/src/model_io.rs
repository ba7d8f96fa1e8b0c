//! Topic model serialization: a CSV matrix (one row per topic, one column
//! per vocabulary word, headers carrying the words) plus a JSON metadata
//! sidecar.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::cgs::{Hyperparams, TopicModel};
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

/// Sidecar metadata describing how a serialized model was produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub mechanism: String,
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub n_iters: usize,
    pub seed: u64,
    pub vocab_size: usize,
    /// Mechanism-specific privacy parameters (flip probability, budgets, ...).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub privacy: Option<serde_json::Value>,
    /// Fully resolved run configuration and input hashes, when produced by
    /// the CLI.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<serde_json::Value>,
}

impl ModelMetadata {
    pub fn new(mechanism: &str, model: &TopicModel, n_iters: usize, seed: u64) -> Self {
        Self {
            mechanism: mechanism.to_string(),
            k: model.n_topics(),
            alpha: model.hyper.alpha,
            beta: model.hyper.beta,
            n_iters,
            seed,
            vocab_size: model.vocab_size(),
            privacy: None,
            run: None,
        }
    }
}

/// Writes the topic-word matrix as CSV with vocabulary-word headers.
pub fn save_model_csv(model: &TopicModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    w.write_record(model.vocab.words())
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    for k in 0..model.n_topics() {
        let row: Vec<String> = model.phi.row(k).iter().map(|x| x.to_string()).collect();
        w.write_record(&row)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a model CSV back; the priors come from the metadata sidecar.
pub fn load_model_csv(path: impl AsRef<Path>, alpha: f64, beta: f64) -> Result<TopicModel> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    let words: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?
        .iter()
        .map(String::from)
        .collect();
    let vocab = Vocabulary::new(words)?;
    let mut rows: Vec<f64> = Vec::new();
    let mut n_rows = 0usize;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse { line: i + 2, msg: e.to_string() })?;
        if record.len() != vocab.len() {
            return Err(Error::Parse {
                line: i + 2,
                msg: format!("expected {} columns, found {}", vocab.len(), record.len()),
            });
        }
        for field in record.iter() {
            rows.push(field.parse::<f64>().map_err(|e| Error::Parse {
                line: i + 2,
                msg: format!("bad probability {field:?}: {e}"),
            })?);
        }
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(Error::Parse {
            line: 2,
            msg: "model has no topic rows".into(),
        });
    }
    let phi = Array2::from_shape_vec((n_rows, vocab.len()), rows)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let hyper = Hyperparams::new(n_rows, alpha, beta)?;
    Ok(TopicModel { phi, hyper, vocab })
}

pub fn save_metadata(meta: &ModelMetadata, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let json = serde_json::to_string_pretty(meta).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_metadata(path: impl AsRef<Path>) -> Result<ModelMetadata> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse { line: 0, msg: e.to_string() })
}
