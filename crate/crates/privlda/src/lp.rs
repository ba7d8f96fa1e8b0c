//! Locally private LDA training.
//!
//! Contributors never share their documents: each document is encoded as a
//! binary presence vector and every bit is randomized before it leaves the
//! client (kept with probability `1-f`, otherwise set to 1 or 0 with
//! probability `f/2` each). The server aggregates the noisy vectors, forms
//! unbiased per-word count estimates, edits the vectors until the column
//! sums match those estimates, and trains on the reconstructed corpus.
//! Everything after the flip is post-processing, so each contributor keeps
//! the flip's guarantee `ln((1-f/2)/(f/2))`.
//!
//! The client and server sides are separate functions joined only by
//! [`PerturbedBatch`], so a deployment can move the boundary onto a network
//! without touching the math.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cgs::{self, Hyperparams, TopicModel};
use crate::corpus::{encode_binary, BinaryDocVector, Corpus, Document, Vocabulary};
use crate::error::{Error, Result};
use crate::seeds;

/// Local privacy of the per-bit flip channel, `ln((1-f/2)/(f/2))` in nats.
/// `f = 0` means no randomization at all and is rejected.
pub fn rr_epsilon(f: f64) -> Result<f64> {
    if !(f > 0.0 && f <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "flip probability must be in (0, 1], got {f} (f = 0 gives no local privacy)"
        )));
    }
    Ok(((1.0 - f / 2.0) / (f / 2.0)).ln())
}

/// Flip probability achieving a target local privacy level: `f = 2/(e^eps + 1)`.
pub fn rr_flip_for_epsilon(epsilon: f64) -> Result<f64> {
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "local privacy level must be nonnegative, got {epsilon}"
        )));
    }
    Ok(2.0 / (epsilon.exp() + 1.0))
}

/// Flip probability together with the local privacy level it implies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlipConfig {
    f: f64,
    epsilon: f64,
}

impl FlipConfig {
    pub fn from_flip_probability(f: f64) -> Result<Self> {
        Ok(Self {
            f,
            epsilon: rr_epsilon(f)?,
        })
    }

    pub fn from_epsilon(epsilon: f64) -> Result<Self> {
        let f = rr_flip_for_epsilon(epsilon)?;
        Ok(Self { f, epsilon })
    }

    pub fn flip_probability(&self) -> f64 {
        self.f
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// Randomizes one presence vector bit by bit: keep with probability `1-f`,
/// else resample the bit fairly.
pub fn perturb_vector<R: Rng + ?Sized>(v: &BinaryDocVector, f: f64, rng: &mut R) -> BinaryDocVector {
    let bits = v
        .bits
        .iter()
        .map(|&bit| {
            let u = rng.random::<f64>();
            if u < 1.0 - f {
                bit
            } else {
                u < 1.0 - f / 2.0
            }
        })
        .collect();
    BinaryDocVector {
        doc_id: v.doc_id,
        bits,
    }
}

/// What crosses the contributor/server boundary: noisy vectors and the
/// (public) flip probability. Nothing derived from the raw documents.
#[derive(Debug, Clone)]
pub struct PerturbedBatch {
    pub vectors: Vec<BinaryDocVector>,
    pub flip_probability: f64,
}

/// Client side: encode every document and randomize it. Each document gets
/// its own derived generator, so perturbation order does not matter.
pub fn client_perturb(corpus: &Corpus, flip: &FlipConfig, seed: u64) -> PerturbedBatch {
    let v = corpus.vocab_size();
    let vectors = corpus
        .documents
        .par_iter()
        .enumerate()
        .map(|(i, doc)| {
            let mut rng = seeds::rng_for_indexed(seed, "perturb", i as u64);
            perturb_vector(&encode_binary(doc, v), flip.f, &mut rng)
        })
        .collect();
    PerturbedBatch {
        vectors,
        flip_probability: flip.f,
    }
}

/// Observed 1-counts per word over a batch of noisy vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyCounts {
    ones: Vec<usize>,
    n_vectors: usize,
    flip_probability: f64,
}

impl NoisyCounts {
    pub fn ones(&self) -> &[usize] {
        &self.ones
    }

    pub fn n_vectors(&self) -> usize {
        self.n_vectors
    }

    pub fn flip_probability(&self) -> f64 {
        self.flip_probability
    }
}

/// Exact column sums over the received vectors.
pub fn aggregate(vectors: &[BinaryDocVector], flip_probability: f64) -> Result<NoisyCounts> {
    let Some(first) = vectors.first() else {
        return Err(Error::InvalidArgument(
            "cannot aggregate an empty batch of vectors".into(),
        ));
    };
    let v = first.bits.len();
    let mut ones = vec![0usize; v];
    for vector in vectors {
        if vector.bits.len() != v {
            return Err(Error::InvalidArgument(format!(
                "vector length mismatch: expected {v}, found {}",
                vector.bits.len()
            )));
        }
        for (t, &bit) in vector.bits.iter().enumerate() {
            if bit {
                ones[t] += 1;
            }
        }
    }
    Ok(NoisyCounts {
        ones,
        n_vectors: vectors.len(),
        flip_probability,
    })
}

/// Unbiased estimate of the original 1-counts, `(2 n_t - f M) / (2 (1-f))`,
/// left unclamped; reconstruction clamps later. Undefined at `f = 1`.
pub fn estimate_true_counts(nc: &NoisyCounts) -> Result<Vec<f64>> {
    let f = nc.flip_probability;
    if f >= 1.0 {
        return Err(Error::InvalidArgument(
            "count estimation needs f < 1; at f = 1 the channel carries no signal".into(),
        ));
    }
    let m = nc.n_vectors as f64;
    Ok(nc
        .ones
        .iter()
        .map(|&n_t| (2.0 * n_t as f64 - f * m) / (2.0 * (1.0 - f)))
        .collect())
}

/// Variance of the count estimator: `(2-f) f M / (4 (1-f)^2)` for `f < 1`.
pub fn estimator_variance(f: f64, n_vectors: usize) -> f64 {
    (2.0 - f) * f * n_vectors as f64 / (4.0 * (1.0 - f) * (1.0 - f))
}

/// The server-side edited vectors plus the corpus they induce (one token per
/// set bit per vector, ascending word order).
#[derive(Debug, Clone)]
pub struct ReconstructedCorpus {
    pub vectors: Vec<BinaryDocVector>,
    pub corpus: Corpus,
}

fn vectors_to_corpus(vectors: &[BinaryDocVector], vocab: &Vocabulary) -> Result<Corpus> {
    let documents = vectors
        .iter()
        .map(|v| Document {
            doc_id: v.doc_id,
            tokens: v
                .bits
                .iter()
                .enumerate()
                .filter_map(|(t, &bit)| bit.then_some(t))
                .collect(),
        })
        .collect();
    Corpus::new(documents, vocab.clone())
}

/// Edits the noisy vectors column by column until every column sum equals
/// the clamped, rounded count estimate: surplus bits are cleared and missing
/// bits are set on vectors chosen uniformly without replacement. Each column
/// uses its own derived generator.
pub fn reconstruct(
    vectors: Vec<BinaryDocVector>,
    nc: &NoisyCounts,
    vocab: &Vocabulary,
    seed: u64,
) -> Result<ReconstructedCorpus> {
    let m = vectors.len();
    if m != nc.n_vectors {
        return Err(Error::InvalidArgument(format!(
            "count summary covers {} vectors but {m} were provided",
            nc.n_vectors
        )));
    }
    let check = aggregate(&vectors, nc.flip_probability)?;
    if check.ones != nc.ones {
        return Err(Error::InvalidArgument(
            "count summary does not match the provided vectors".into(),
        ));
    }
    if vocab.len() != nc.ones.len() {
        return Err(Error::InvalidArgument(format!(
            "vocabulary size {} does not match vector length {}",
            vocab.len(),
            nc.ones.len()
        )));
    }

    let estimates = estimate_true_counts(nc)?;
    let mut vectors = vectors;
    for (t, &estimate) in estimates.iter().enumerate() {
        let target = estimate.round().clamp(0.0, m as f64) as usize;
        let current = nc.ones[t];
        if target == current {
            continue;
        }
        let mut rng = seeds::rng_for_indexed(seed, "reconstruct", t as u64);
        let want_bit = target > current;
        let candidates: Vec<usize> = (0..m).filter(|&i| vectors[i].bits[t] != want_bit).collect();
        let delta = target.abs_diff(current);
        // After clamping the target to [0, M] there are always enough
        // candidate vectors to edit.
        assert!(
            delta <= candidates.len(),
            "column {t}: need {delta} edits but only {} candidates",
            candidates.len()
        );
        for idx in rand::seq::index::sample(&mut rng, candidates.len(), delta) {
            vectors[candidates[idx]].bits[t] = want_bit;
        }
    }
    let corpus = vectors_to_corpus(&vectors, vocab)?;
    Ok(ReconstructedCorpus { vectors, corpus })
}

/// Server side: aggregate, reconstruct, and train on the result.
pub fn server_train(
    batch: &PerturbedBatch,
    vocab: &Vocabulary,
    hyper: &Hyperparams,
    n_iters: usize,
    seed: u64,
) -> Result<(TopicModel, ReconstructedCorpus)> {
    let nc = aggregate(&batch.vectors, batch.flip_probability)?;
    let reconstructed = reconstruct(batch.vectors.clone(), &nc, vocab, seed)?;
    let (model, _) = cgs::train(&reconstructed.corpus, hyper, n_iters, seed, None)?;
    Ok((model, reconstructed))
}

/// Result of a locally private training run.
#[derive(Debug)]
pub struct LpOutcome {
    pub model: TopicModel,
    pub reconstructed: ReconstructedCorpus,
    /// Local privacy each contributor retains, `rr_epsilon(f)`.
    pub local_epsilon: f64,
}

/// Full pipeline: perturb on the client side, then hand only the noisy
/// vectors to the server side. The original corpus is not read past the
/// client step.
pub fn lp_train(
    corpus: &Corpus,
    flip: &FlipConfig,
    hyper: &Hyperparams,
    n_iters: usize,
    seed: u64,
) -> Result<LpOutcome> {
    let batch = client_perturb(corpus, flip, seed);
    let (model, reconstructed) = server_train(&batch, &corpus.vocab, hyper, n_iters, seed)?;
    Ok(LpOutcome {
        model,
        reconstructed,
        local_epsilon: flip.epsilon(),
    })
}

/// Binary re-encoding of a corpus: each word at most once per document.
/// This is the non-private twin of the locally private pipeline, used for
/// like-for-like utility comparisons.
pub fn binary_corpus(corpus: &Corpus) -> Corpus {
    let v = corpus.vocab_size();
    let vectors: Vec<BinaryDocVector> = corpus
        .documents
        .iter()
        .map(|d| encode_binary(d, v))
        .collect();
    vectors_to_corpus(&vectors, &corpus.vocab).expect("bits are within the vocabulary")
}

#[derive(Serialize, Deserialize)]
struct ExchangeHeader {
    m: usize,
    v: usize,
    f: f64,
}

/// Writes the captured client output: a JSON header line `{"m":..,"v":..,"f":..}`
/// followed by one line of `V` characters '0'/'1' per document.
pub fn write_perturbed_vectors(path: impl AsRef<Path>, batch: &PerturbedBatch) -> Result<()> {
    let path = path.as_ref();
    let v = batch.vectors.first().map_or(0, |x| x.bits.len());
    let header = ExchangeHeader {
        m: batch.vectors.len(),
        v,
        f: batch.flip_probability,
    };
    let mut out = serde_json::to_string(&header).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    out.push('\n');
    for vector in &batch.vectors {
        out.extend(vector.bits.iter().map(|&b| if b { '1' } else { '0' }));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a file produced by [`write_perturbed_vectors`]. Document ids are
/// assigned by line order.
pub fn read_perturbed_vectors(path: impl AsRef<Path>) -> Result<PerturbedBatch> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Parse {
            line: 1,
            msg: "missing header line".into(),
        })?
        .map_err(|e| Error::Parse {
            line: 1,
            msg: e.to_string(),
        })?;
    let header: ExchangeHeader =
        serde_json::from_str(&header_line).map_err(|e| Error::Parse {
            line: 1,
            msg: format!("bad header: {e}"),
        })?;
    let mut vectors = Vec::with_capacity(header.m);
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        if line.is_empty() && vectors.len() == header.m {
            continue;
        }
        if line.len() != header.v {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {} bits, found {}", header.v, line.len()),
            });
        }
        let bits: Vec<bool> = line
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse {
                    line: line_no,
                    msg: format!("unexpected character {other:?}"),
                }),
            })
            .collect::<Result<_>>()?;
        vectors.push(BinaryDocVector {
            doc_id: vectors.len(),
            bits,
        });
    }
    if vectors.len() != header.m {
        return Err(Error::Parse {
            line: 1,
            msg: format!("header declares {} vectors but file has {}", header.m, vectors.len()),
        });
    }
    Ok(PerturbedBatch {
        vectors,
        flip_probability: header.f,
    })
}
