//! Run configuration: a flat `key = value` file overridden by CLI flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mechanism {
    Plain,
    MonitoredWord,
    MonitoredDoc,
    Lp,
    Laplace,
}

impl Mechanism {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mechanism::Plain => "plain",
            Mechanism::MonitoredWord => "monitored-word",
            Mechanism::MonitoredDoc => "monitored-doc",
            Mechanism::Lp => "lp",
            Mechanism::Laplace => "laplace",
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mechanism {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plain" => Ok(Mechanism::Plain),
            "monitored-word" => Ok(Mechanism::MonitoredWord),
            "monitored-doc" => Ok(Mechanism::MonitoredDoc),
            "lp" => Ok(Mechanism::Lp),
            "laplace" => Ok(Mechanism::Laplace),
            other => bail!(
                "mechanism: unknown value {other:?} (expected plain, monitored-word, \
                 monitored-doc, lp, or laplace)"
            ),
        }
    }
}

/// Fully resolved configuration for one command invocation.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub top_v: Option<usize>,
    pub n_test: Option<usize>,
    pub topics: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iters: usize,
    pub fold_in_iters: usize,
    pub seed: u64,
    pub mechanism: Mechanism,
    pub f: Option<f64>,
    pub epsilon: Option<f64>,
    pub out: PathBuf,
    /// Sweep points: flip probabilities for `lp`, budgets for `laplace`.
    pub values: Vec<f64>,
    /// Sweep seeds; defaults to the single master seed.
    pub seeds: Vec<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: None,
            test: None,
            vocab: None,
            stopwords: None,
            top_v: None,
            n_test: None,
            topics: 50,
            alpha: 0.1,
            beta: 0.01,
            iters: 300,
            fold_in_iters: 50,
            seed: 0,
            mechanism: Mechanism::Plain,
            f: None,
            epsilon: None,
            out: PathBuf::from("out"),
            values: Vec::new(),
            seeds: Vec::new(),
        }
    }
}

/// Unresolved overrides coming from CLI flags; `None` means "not given".
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub top_v: Option<usize>,
    pub n_test: Option<usize>,
    pub topics: Option<usize>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub iters: Option<usize>,
    pub fold_in_iters: Option<usize>,
    pub seed: Option<u64>,
    pub mechanism: Option<String>,
    pub f: Option<f64>,
    pub epsilon: Option<f64>,
    pub level: Option<String>,
    pub out: Option<PathBuf>,
    pub values: Option<Vec<f64>>,
    pub seeds: Option<Vec<u64>>,
}

fn parse_field<T: FromStr>(key: &str, value: &str) -> anyhow::Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| anyhow::anyhow!("{key}: cannot parse {value:?}: {e}"))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> anyhow::Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_field::<T>(key, s))
        .collect()
}

fn apply_level(mechanism: Mechanism, level: &str) -> anyhow::Result<Mechanism> {
    match (mechanism, level) {
        (Mechanism::MonitoredWord | Mechanism::MonitoredDoc, "word") => Ok(Mechanism::MonitoredWord),
        (Mechanism::MonitoredWord | Mechanism::MonitoredDoc, "doc" | "document") => {
            Ok(Mechanism::MonitoredDoc)
        }
        (other, "word" | "doc" | "document") => {
            log::warn!("level: ignored for mechanism {other}");
            Ok(other)
        }
        (_, bad) => bail!("level: unknown value {bad:?} (expected word or doc)"),
    }
}

impl RunConfig {
    /// Loads the optional config file, then applies CLI overrides on top
    /// (flags win), then validates cross-field invariants.
    pub fn resolve(config_path: Option<&Path>, cli: &Overrides) -> anyhow::Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(path) = config_path {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config file {}", path.display()))?;
            cfg.apply_file(&text)
                .with_context(|| format!("in config file {}", path.display()))?;
        }
        cfg.apply_overrides(cli)?;
        if cfg.seeds.is_empty() {
            cfg.seeds = vec![cfg.seed];
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_file(&mut self, text: &str) -> anyhow::Result<()> {
        let mut level: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected key = value, got {line:?}", i + 1);
            };
            let key = key.trim();
            let value = value.trim();
            match key {
                "train" => self.train = Some(PathBuf::from(value)),
                "test" => self.test = Some(PathBuf::from(value)),
                "vocab" => self.vocab = Some(PathBuf::from(value)),
                "stopwords" => self.stopwords = Some(PathBuf::from(value)),
                "top_v" => self.top_v = Some(parse_field(key, value)?),
                "n_test" => self.n_test = Some(parse_field(key, value)?),
                "topics" => self.topics = parse_field(key, value)?,
                "alpha" => self.alpha = parse_field(key, value)?,
                "beta" => self.beta = parse_field(key, value)?,
                "iters" => self.iters = parse_field(key, value)?,
                "fold_in_iters" => self.fold_in_iters = parse_field(key, value)?,
                "seed" => self.seed = parse_field(key, value)?,
                "mechanism" => self.mechanism = value.parse()?,
                "f" => self.f = Some(parse_field(key, value)?),
                "epsilon" => self.epsilon = Some(parse_field(key, value)?),
                "level" => level = Some(value.to_string()),
                "out" => self.out = PathBuf::from(value),
                "values" => self.values = parse_list(key, value)?,
                "seeds" => self.seeds = parse_list(key, value)?,
                other => bail!("line {}: unknown key {other:?}", i + 1),
            }
        }
        if let Some(level) = level {
            self.mechanism = apply_level(self.mechanism, &level)?;
        }
        Ok(())
    }

    fn apply_overrides(&mut self, cli: &Overrides) -> anyhow::Result<()> {
        macro_rules! take {
            ($field:ident) => {
                if let Some(v) = &cli.$field {
                    self.$field = Some(v.clone());
                }
            };
            ($field:ident, direct) => {
                if let Some(v) = &cli.$field {
                    self.$field = v.clone();
                }
            };
        }
        take!(train);
        take!(test);
        take!(vocab);
        take!(stopwords);
        take!(top_v);
        take!(n_test);
        take!(topics, direct);
        take!(alpha, direct);
        take!(beta, direct);
        take!(iters, direct);
        take!(fold_in_iters, direct);
        take!(seed, direct);
        take!(f);
        take!(epsilon);
        take!(out, direct);
        take!(values, direct);
        take!(seeds, direct);
        if let Some(m) = &cli.mechanism {
            self.mechanism = m.parse()?;
        }
        if let Some(level) = &cli.level {
            self.mechanism = apply_level(self.mechanism, level)?;
        }
        Ok(())
    }

    fn validate(&self) -> anyhow::Result<()> {
        if self.topics == 0 {
            bail!("topics: must be at least 1");
        }
        if !(self.alpha > 0.0) {
            bail!("alpha: must be positive, got {}", self.alpha);
        }
        if !(self.beta > 0.0) {
            bail!("beta: must be positive, got {}", self.beta);
        }
        match self.mechanism {
            Mechanism::Lp => match (self.f, self.epsilon) {
                (Some(_), Some(_)) => bail!("f/epsilon: give exactly one for mechanism lp"),
                (None, None) if self.values.is_empty() => {
                    bail!("f/epsilon: mechanism lp needs one of them (sweeps take values instead)")
                }
                _ => {}
            },
            Mechanism::Laplace => {
                if self.f.is_some() {
                    bail!("f: not a laplace parameter; use epsilon");
                }
                if self.epsilon.is_none() && self.values.is_empty() {
                    bail!(
                        "epsilon: mechanism laplace needs a privacy budget \
                         (sweeps take values instead)"
                    );
                }
            }
            Mechanism::Plain | Mechanism::MonitoredWord | Mechanism::MonitoredDoc => {
                if self.f.is_some() || self.epsilon.is_some() {
                    bail!(
                        "f/epsilon: not accepted for mechanism {}; they belong to lp and laplace",
                        self.mechanism
                    );
                }
            }
        }
        Ok(())
    }

    /// The resolved configuration as a flat, ordered key-value map, for
    /// embedding into artifacts.
    pub fn as_map(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                map.insert(k.to_string(), v);
            }
        };
        put("train", self.train.as_ref().map(|p| p.display().to_string()));
        put("test", self.test.as_ref().map(|p| p.display().to_string()));
        put("vocab", self.vocab.as_ref().map(|p| p.display().to_string()));
        put(
            "stopwords",
            self.stopwords.as_ref().map(|p| p.display().to_string()),
        );
        put("top_v", self.top_v.map(|v| v.to_string()));
        put("n_test", self.n_test.map(|v| v.to_string()));
        put("topics", Some(self.topics.to_string()));
        put("alpha", Some(self.alpha.to_string()));
        put("beta", Some(self.beta.to_string()));
        put("iters", Some(self.iters.to_string()));
        put("fold_in_iters", Some(self.fold_in_iters.to_string()));
        put("seed", Some(self.seed.to_string()));
        put("mechanism", Some(self.mechanism.to_string()));
        put("f", self.f.map(|v| v.to_string()));
        put("epsilon", self.epsilon.map(|v| v.to_string()));
        put("out", Some(self.out.display().to_string()));
        if !self.values.is_empty() {
            put(
                "values",
                Some(self.values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")),
            );
        }
        put(
            "seeds",
            Some(self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",")),
        );
        map
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_experiment_setup() {
        let cfg = RunConfig::resolve(None, &Overrides::default()).unwrap();
        assert_eq!(cfg.topics, 50);
        assert_eq!(cfg.alpha, 0.1);
        assert_eq!(cfg.beta, 0.01);
        assert_eq!(cfg.iters, 300);
        assert_eq!(cfg.mechanism, Mechanism::Plain);
        assert_eq!(cfg.seeds, vec![0]);
    }

    #[test]
    fn file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(
            &path,
            "# comment\ntopics = 10\nseed = 7\nmechanism = lp\nf = 0.5\nvalues = 0.5, 0.1\n",
        )
        .unwrap();
        let cli = Overrides {
            topics: Some(20),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(Some(&path), &cli).unwrap();
        assert_eq!(cfg.topics, 20); // flag wins
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.mechanism, Mechanism::Lp);
        assert_eq!(cfg.values, vec![0.5, 0.1]);
    }

    #[test]
    fn field_level_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "topics = many\n").unwrap();
        let err = RunConfig::resolve(Some(&path), &Overrides::default())
            .unwrap_err()
            .to_string();
        assert!(err.contains("config file"), "{err}");

        std::fs::write(&path, "mystery = 1\n").unwrap();
        let err = format!(
            "{:#}",
            RunConfig::resolve(Some(&path), &Overrides::default()).unwrap_err()
        );
        assert!(err.contains("mystery"), "{err}");
    }

    #[test]
    fn lp_needs_exactly_one_privacy_knob() {
        let both = Overrides {
            mechanism: Some("lp".into()),
            f: Some(0.5),
            epsilon: Some(1.0),
            ..Default::default()
        };
        assert!(RunConfig::resolve(None, &both).is_err());

        let neither = Overrides {
            mechanism: Some("lp".into()),
            ..Default::default()
        };
        assert!(RunConfig::resolve(None, &neither).is_err());

        let one = Overrides {
            mechanism: Some("lp".into()),
            f: Some(0.5),
            ..Default::default()
        };
        assert!(RunConfig::resolve(None, &one).is_ok());
    }

    #[test]
    fn level_flag_rewrites_monitored_mechanism() {
        let cli = Overrides {
            mechanism: Some("monitored-word".into()),
            level: Some("doc".into()),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(None, &cli).unwrap();
        assert_eq!(cfg.mechanism, Mechanism::MonitoredDoc);
    }
}
