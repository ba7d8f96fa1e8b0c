//! Collapsed Gibbs sampling for LDA.
//!
//! One token is resampled at a time from its full conditional; the sufficient
//! statistics live in two count matrices (topic-word and document-topic).
//! An optional observer sees every sampling distribution before the draw is
//! committed, which is how the privacy monitor attaches without perturbing
//! the chain: the observer never consumes randomness.

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::corpus::{Corpus, Vocabulary};
use crate::error::{Error, Result};
use crate::seeds;

/// LDA hyperparameters: topic count and symmetric Dirichlet priors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl Hyperparams {
    pub fn new(k: usize, alpha: f64, beta: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("topic count must be at least 1".into()));
        }
        if !(alpha > 0.0) || !(beta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha and beta must be positive (got alpha={alpha}, beta={beta})"
            )));
        }
        Ok(Self { k, alpha, beta })
    }
}

/// Sufficient statistics of the collapsed sampler plus the current topic
/// assignment of every token.
#[derive(Debug, Clone)]
pub struct CountMatrices {
    /// K x V: occurrences of word t assigned to topic k.
    topic_word: Array2<u32>,
    /// M x K: tokens in document m assigned to topic k.
    doc_topic: Array2<u32>,
    /// Row sums of `topic_word`.
    topic_totals: Array1<u32>,
    /// Row sums of `doc_topic`.
    doc_totals: Array1<u32>,
    /// Per-document topic assignments, aligned with token positions.
    assignments: Vec<Vec<u32>>,
}

impl CountMatrices {
    fn zeros(m: usize, k: usize, v: usize) -> Self {
        Self {
            topic_word: Array2::zeros((k, v)),
            doc_topic: Array2::zeros((m, k)),
            topic_totals: Array1::zeros(k),
            doc_totals: Array1::zeros(m),
            assignments: vec![Vec::new(); m],
        }
    }

    /// Builds count matrices from raw counts (totals recomputed, no
    /// assignments). The counts are taken as-is, i.e. already excluding
    /// whatever token is about to be resampled.
    pub fn from_raw(topic_word: Array2<u32>, doc_topic: Array2<u32>) -> Result<Self> {
        if topic_word.nrows() != doc_topic.ncols() {
            return Err(Error::InvalidArgument(format!(
                "topic dimension mismatch: topic_word has {} rows, doc_topic has {} columns",
                topic_word.nrows(),
                doc_topic.ncols()
            )));
        }
        let topic_totals = topic_word.rows().into_iter().map(|r| r.sum()).collect();
        let doc_totals = doc_topic.rows().into_iter().map(|r| r.sum()).collect();
        let m = doc_topic.nrows();
        Ok(Self {
            topic_word,
            doc_topic,
            topic_totals,
            doc_totals,
            assignments: vec![Vec::new(); m],
        })
    }

    /// As [`CountMatrices::from_raw`], from nested vectors: `topic_word` is
    /// one row per topic, `doc_topic` a single document row.
    pub fn from_nested(topic_word: Vec<Vec<u32>>, doc_topic: Vec<u32>) -> Result<Self> {
        let k = topic_word.len();
        let v = topic_word.first().map_or(0, Vec::len);
        if topic_word.iter().any(|row| row.len() != v) {
            return Err(Error::InvalidArgument(
                "topic_word rows must all have the same length".into(),
            ));
        }
        let flat: Vec<u32> = topic_word.into_iter().flatten().collect();
        let topic_word = Array2::from_shape_vec((k, v), flat)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let m = doc_topic.len();
        let doc_topic = Array2::from_shape_vec((1, m), doc_topic)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Self::from_raw(topic_word, doc_topic)
    }

    pub fn n_topics(&self) -> usize {
        self.topic_word.nrows()
    }

    pub fn vocab_size(&self) -> usize {
        self.topic_word.ncols()
    }

    pub fn n_docs(&self) -> usize {
        self.doc_topic.nrows()
    }

    pub fn topic_word(&self) -> &Array2<u32> {
        &self.topic_word
    }

    pub fn doc_topic(&self) -> &Array2<u32> {
        &self.doc_topic
    }

    pub fn topic_total(&self, k: usize) -> u32 {
        self.topic_totals[k]
    }

    pub fn doc_total(&self, m: usize) -> u32 {
        self.doc_totals[m]
    }

    pub fn assignments(&self) -> &[Vec<u32>] {
        &self.assignments
    }

    /// Removes one (document, word, topic) observation. Decrements are
    /// guarded at zero so that externally perturbed counts (the noisy
    /// baseline) stay consistent: an aggregate is only decremented when its
    /// entry is. On unperturbed counts the guards never fire.
    pub fn remove_token(&mut self, m: usize, t: usize, k: usize) {
        if self.topic_word[[k, t]] > 0 {
            self.topic_word[[k, t]] -= 1;
            self.topic_totals[k] -= 1;
        }
        if self.doc_topic[[m, k]] > 0 {
            self.doc_topic[[m, k]] -= 1;
            self.doc_totals[m] -= 1;
        }
    }

    /// Adds one (document, word, topic) observation.
    pub fn insert_token(&mut self, m: usize, t: usize, k: usize) {
        self.topic_word[[k, t]] += 1;
        self.topic_totals[k] += 1;
        self.doc_topic[[m, k]] += 1;
        self.doc_totals[m] += 1;
    }

    /// Replaces all counts with externally modified matrices, recomputing the
    /// totals. Assignments are left untouched.
    pub fn replace_counts(&mut self, topic_word: Array2<u32>, doc_topic: Array2<u32>) -> Result<()> {
        if topic_word.dim() != self.topic_word.dim() || doc_topic.dim() != self.doc_topic.dim() {
            return Err(Error::InvalidArgument("count matrix dimensions must not change".into()));
        }
        self.topic_totals = topic_word.rows().into_iter().map(|r| r.sum()).collect();
        self.doc_totals = doc_topic.rows().into_iter().map(|r| r.sum()).collect();
        self.topic_word = topic_word;
        self.doc_topic = doc_topic;
        Ok(())
    }

    /// Internal consistency: totals match row sums.
    pub fn validate_internal(&self) -> Result<()> {
        for k in 0..self.n_topics() {
            let s: u32 = self.topic_word.row(k).sum();
            if s != self.topic_totals[k] {
                return Err(Error::InvalidArgument(format!(
                    "topic total desync for topic {k}: {s} vs {}",
                    self.topic_totals[k]
                )));
            }
        }
        for m in 0..self.n_docs() {
            let s: u32 = self.doc_topic.row(m).sum();
            if s != self.doc_totals[m] {
                return Err(Error::InvalidArgument(format!(
                    "document total desync for document {m}: {s} vs {}",
                    self.doc_totals[m]
                )));
            }
        }
        Ok(())
    }

    /// Full consistency against a corpus: internal sums, per-document totals
    /// equal to document lengths, and counts matching the assignments.
    pub fn validate_against(&self, corpus: &Corpus) -> Result<()> {
        self.validate_internal()?;
        let mut topic_word = Array2::<u32>::zeros(self.topic_word.raw_dim());
        let mut doc_topic = Array2::<u32>::zeros(self.doc_topic.raw_dim());
        for (m, doc) in corpus.documents.iter().enumerate() {
            if self.assignments[m].len() != doc.tokens.len() {
                return Err(Error::InvalidArgument(format!(
                    "assignment length mismatch in document {m}"
                )));
            }
            for (&t, &z) in doc.tokens.iter().zip(&self.assignments[m]) {
                topic_word[[z as usize, t]] += 1;
                doc_topic[[m, z as usize]] += 1;
            }
        }
        if topic_word != self.topic_word || doc_topic != self.doc_topic {
            return Err(Error::InvalidArgument(
                "counts do not match token assignments".into(),
            ));
        }
        Ok(())
    }
}

/// The (unnormalized and normalized) distribution a single token's topic is
/// drawn from.
#[derive(Debug, Clone)]
pub struct SamplingDistribution {
    r: Vec<f64>,
    sum_r: f64,
    p: Vec<f64>,
}

impl SamplingDistribution {
    pub fn from_masses(r: Vec<f64>) -> Result<Self> {
        if r.is_empty() || r.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::InvalidArgument(
                "sampling masses must be finite and strictly positive".into(),
            ));
        }
        let sum_r: f64 = r.iter().sum();
        let p = r.iter().map(|&x| x / sum_r).collect();
        Ok(Self { r, sum_r, p })
    }

    pub fn masses(&self) -> &[f64] {
        &self.r
    }

    pub fn total_mass(&self) -> f64 {
        self.sum_r
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }
}

/// Full conditional for the token of word `t` in document `m`, given counts
/// with that token already removed:
/// `r_k = (n_kt + beta)/(n_k + V*beta) * (n_mk + alpha)/(n_m + K*alpha)`.
pub fn full_conditional(
    counts: &CountMatrices,
    m: usize,
    t: usize,
    hyper: &Hyperparams,
) -> SamplingDistribution {
    let v = counts.vocab_size() as f64;
    let k_f = hyper.k as f64;
    let doc_denom = counts.doc_total(m) as f64 + k_f * hyper.alpha;
    let mut r = Vec::with_capacity(hyper.k);
    for k in 0..hyper.k {
        let word_term =
            (counts.topic_word[[k, t]] as f64 + hyper.beta) / (counts.topic_total(k) as f64 + v * hyper.beta);
        let doc_term = (counts.doc_topic[[m, k]] as f64 + hyper.alpha) / doc_denom;
        r.push(word_term * doc_term);
    }
    SamplingDistribution::from_masses(r).expect("positive priors make all masses positive")
}

/// Draws a topic index from the distribution. One uniform variate per call,
/// walked over the unnormalized masses, so the stream is identical whether or
/// not anyone also reads the normalized probabilities.
pub fn sample_topic<R: Rng + ?Sized>(dist: &SamplingDistribution, rng: &mut R) -> usize {
    let threshold = rng.random::<f64>() * dist.sum_r;
    let mut cum = 0.0;
    for (k, &mass) in dist.r.iter().enumerate() {
        cum += mass;
        if threshold < cum {
            return k;
        }
    }
    dist.r.len() - 1
}

/// Identifies one sampling step: which token of which document, and where
/// that token sits in the corpus-wide token order.
#[derive(Debug, Clone, Copy)]
pub struct SampleSite {
    pub doc: usize,
    pub token_in_doc: usize,
    /// Flat index over all token positions, in document order then token order.
    pub token_index: usize,
    /// Word id of the token being resampled.
    pub word: usize,
}

/// Observes every sampling step of a training run. Called after the token's
/// old assignment has been removed from `counts` and before the new draw is
/// committed. Implementations must not consume the training generator.
pub trait SamplingObserver {
    fn observe_sampling(
        &mut self,
        site: &SampleSite,
        counts: &CountMatrices,
        hyper: &Hyperparams,
        dist: &SamplingDistribution,
    ) -> Result<()>;

    /// Called once after each full sweep over the corpus.
    fn end_iteration(&mut self) -> Result<()> {
        Ok(())
    }
}

/// Assigns every token a uniformly random topic and builds the counts.
pub fn init_assignments<R: Rng + ?Sized>(
    corpus: &Corpus,
    hyper: &Hyperparams,
    rng: &mut R,
) -> CountMatrices {
    let mut counts = CountMatrices::zeros(corpus.n_docs(), hyper.k, corpus.vocab_size());
    for (m, doc) in corpus.documents.iter().enumerate() {
        let mut z = Vec::with_capacity(doc.tokens.len());
        for &t in &doc.tokens {
            let k = rng.random_range(0..hyper.k);
            counts.insert_token(m, t, k);
            z.push(k as u32);
        }
        counts.assignments[m] = z;
    }
    counts
}

/// One full sweep: every token is resampled exactly once, documents in index
/// order, tokens in position order.
pub fn run_iteration<R: Rng + ?Sized>(
    corpus: &Corpus,
    counts: &mut CountMatrices,
    hyper: &Hyperparams,
    rng: &mut R,
    mut observer: Option<&mut (dyn SamplingObserver + '_)>,
) -> Result<()> {
    let mut token_index = 0usize;
    for (m, doc) in corpus.documents.iter().enumerate() {
        for (i, &t) in doc.tokens.iter().enumerate() {
            let old = counts.assignments[m][i] as usize;
            counts.remove_token(m, t, old);
            let dist = full_conditional(counts, m, t, hyper);
            if let Some(obs) = observer.as_deref_mut() {
                let site = SampleSite {
                    doc: m,
                    token_in_doc: i,
                    token_index,
                    word: t,
                };
                obs.observe_sampling(&site, counts, hyper, &dist)?;
            }
            let new = sample_topic(&dist, rng);
            counts.insert_token(m, t, new);
            counts.assignments[m][i] = new as u32;
            token_index += 1;
        }
    }
    if let Some(obs) = observer {
        obs.end_iteration()?;
    }
    Ok(())
}

/// Topic-word distributions estimated from a trained chain.
#[derive(Debug, Clone)]
pub struct TopicModel {
    pub phi: Array2<f64>,
    pub hyper: Hyperparams,
    pub vocab: Vocabulary,
}

impl TopicModel {
    pub fn n_topics(&self) -> usize {
        self.phi.nrows()
    }

    pub fn vocab_size(&self) -> usize {
        self.phi.ncols()
    }
}

/// Posterior-mean estimate of the topic-word distributions:
/// `phi[k][t] = (n_kt + beta)/(n_k + V*beta)`.
pub fn estimate_phi(counts: &CountMatrices, hyper: &Hyperparams) -> Array2<f64> {
    let v = counts.vocab_size();
    let denom_base = v as f64 * hyper.beta;
    let mut phi = Array2::zeros((hyper.k, v));
    for k in 0..hyper.k {
        let denom = counts.topic_total(k) as f64 + denom_base;
        for t in 0..v {
            phi[[k, t]] = (counts.topic_word[[k, t]] as f64 + hyper.beta) / denom;
        }
    }
    phi
}

/// Posterior-mean estimate of the document-topic distributions:
/// `theta[m][k] = (n_mk + alpha)/(n_m + K*alpha)`.
pub fn estimate_theta(counts: &CountMatrices, hyper: &Hyperparams) -> Array2<f64> {
    let m_docs = counts.n_docs();
    let mut theta = Array2::zeros((m_docs, hyper.k));
    for m in 0..m_docs {
        let denom = counts.doc_total(m) as f64 + hyper.k as f64 * hyper.alpha;
        for k in 0..hyper.k {
            theta[[m, k]] = (counts.doc_topic[[m, k]] as f64 + hyper.alpha) / denom;
        }
    }
    theta
}

/// Trains an LDA model: random initialization followed by `n_iters` sweeps.
/// The chain's generator is derived from `(seed, "cgs")`; the observer, if
/// any, sees every sampling step but never the generator.
pub fn train(
    corpus: &Corpus,
    hyper: &Hyperparams,
    n_iters: usize,
    seed: u64,
    mut observer: Option<&mut (dyn SamplingObserver + '_)>,
) -> Result<(TopicModel, CountMatrices)> {
    let mut rng = seeds::rng_for(seed, "cgs");
    let mut counts = init_assignments(corpus, hyper, &mut rng);
    for _ in 0..n_iters {
        run_iteration(corpus, &mut counts, hyper, &mut rng, observer.as_deref_mut())?;
    }
    let model = TopicModel {
        phi: estimate_phi(&counts, hyper),
        hyper: *hyper,
        vocab: corpus.vocab.clone(),
    };
    Ok((model, counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::synth;
    use ndarray::array;
    use proptest::prelude::*;

    fn tiny_corpus(docs: Vec<Vec<usize>>, v: usize) -> Corpus {
        let documents = docs
            .into_iter()
            .enumerate()
            .map(|(i, tokens)| Document { doc_id: i, tokens })
            .collect();
        Corpus::new(documents, Vocabulary::synthetic(v)).unwrap()
    }

    #[test]
    fn init_conserves_counts() {
        let corpus = tiny_corpus(vec![vec![0, 1, 2, 0], vec![3, 3]], 4);
        let hyper = Hyperparams::new(3, 0.1, 0.01).unwrap();
        let mut rng = seeds::rng_for(1, "cgs");
        let counts = init_assignments(&corpus, &hyper, &mut rng);
        counts.validate_against(&corpus).unwrap();
        let total: u32 = (0..3).map(|k| counts.topic_total(k)).sum();
        assert_eq!(total as usize, corpus.total_tokens());
    }

    #[test]
    fn init_empty_corpus() {
        let corpus = tiny_corpus(vec![], 2);
        let hyper = Hyperparams::new(2, 0.5, 0.5).unwrap();
        let mut rng = seeds::rng_for(1, "cgs");
        let counts = init_assignments(&corpus, &hyper, &mut rng);
        assert_eq!(counts.topic_total(0) + counts.topic_total(1), 0);
    }

    #[test]
    fn single_token_single_topic() {
        let corpus = tiny_corpus(vec![vec![0]], 1);
        let hyper = Hyperparams::new(1, 0.1, 0.1).unwrap();
        let mut rng = seeds::rng_for(1, "cgs");
        let counts = init_assignments(&corpus, &hyper, &mut rng);
        assert_eq!(counts.assignments()[0], vec![0]);
        assert_eq!(counts.topic_word()[[0, 0]], 1);
    }

    #[test]
    fn full_conditional_uniform_at_zero_counts() {
        let counts = CountMatrices::zeros(1, 4, 3);
        let hyper = Hyperparams::new(4, 0.1, 0.01).unwrap();
        let dist = full_conditional(&counts, 0, 1, &hyper);
        for &p in dist.probabilities() {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn full_conditional_hand_computed() {
        // K=2, V=2, alpha=beta=1, topic_word=[[1,0],[0,0]], doc_topic=[[1,0]],
        // token t=0: r=(4/9, 1/6), p=(8/11, 3/11).
        let counts =
            CountMatrices::from_raw(array![[1u32, 0], [0, 0]], array![[1u32, 0]]).unwrap();
        let hyper = Hyperparams::new(2, 1.0, 1.0).unwrap();
        let dist = full_conditional(&counts, 0, 0, &hyper);
        assert!((dist.masses()[0] - 4.0 / 9.0).abs() < 1e-12);
        assert!((dist.masses()[1] - 1.0 / 6.0).abs() < 1e-12);
        assert!((dist.probabilities()[0] - 8.0 / 11.0).abs() < 1e-12);
        assert!((dist.probabilities()[1] - 3.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn prior_scaling_not_invariant_except_at_zero() {
        let counts =
            CountMatrices::from_raw(array![[1u32, 0], [0, 0]], array![[1u32, 0]]).unwrap();
        let a = full_conditional(&counts, 0, 0, &Hyperparams::new(2, 1.0, 1.0).unwrap());
        let b = full_conditional(&counts, 0, 0, &Hyperparams::new(2, 2.0, 2.0).unwrap());
        assert!((a.probabilities()[0] - b.probabilities()[0]).abs() > 1e-3);

        let zero = CountMatrices::zeros(1, 2, 2);
        let a0 = full_conditional(&zero, 0, 0, &Hyperparams::new(2, 1.0, 1.0).unwrap());
        let b0 = full_conditional(&zero, 0, 0, &Hyperparams::new(2, 2.0, 2.0).unwrap());
        assert!((a0.probabilities()[0] - b0.probabilities()[0]).abs() < 1e-12);
    }

    #[test]
    fn sample_topic_degenerate_mass() {
        let dist = SamplingDistribution::from_masses(vec![1.0, 1e-300, 1e-300]).unwrap();
        let mut rng = seeds::rng_for(3, "test");
        for _ in 0..100 {
            assert_eq!(sample_topic(&dist, &mut rng), 0);
        }
    }

    #[test]
    fn sample_topic_uniform_frequencies() {
        let k = 5;
        let n = 1_000_000usize;
        let dist = SamplingDistribution::from_masses(vec![1.0; k]).unwrap();
        let mut rng = seeds::rng_for(4, "test");
        let mut freq = vec![0usize; k];
        for _ in 0..n {
            freq[sample_topic(&dist, &mut rng)] += 1;
        }
        // 4 sigma binomial window around n/k.
        let p = 1.0 / k as f64;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for &f in &freq {
            assert!((f as f64 - n as f64 * p).abs() < 4.0 * sigma, "freq {freq:?}");
        }
    }

    #[test]
    fn sample_topic_reproducible() {
        let dist = SamplingDistribution::from_masses(vec![0.2, 0.5, 0.3]).unwrap();
        let draw = |seed| {
            let mut rng = seeds::rng_for(seed, "test");
            (0..20).map(|_| sample_topic(&dist, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
    }

    #[test]
    fn iteration_preserves_invariants() {
        let corpus = synth::planted_corpus(&synth::PlantedConfig {
            n_topics: 4,
            vocab_size: 20,
            n_docs: 25,
            doc_len: 20,
            topics_per_doc: 2,
            seed: 5,
        });
        assert_eq!(corpus.total_tokens(), 500);
        let hyper = Hyperparams::new(4, 0.1, 0.05).unwrap();
        let mut rng = seeds::rng_for(6, "cgs");
        let mut counts = init_assignments(&corpus, &hyper, &mut rng);
        for _ in 0..100 {
            run_iteration(&corpus, &mut counts, &hyper, &mut rng, None).unwrap();
            counts.validate_against(&corpus).unwrap();
        }
    }

    struct CountingObserver {
        calls: usize,
    }

    impl SamplingObserver for CountingObserver {
        fn observe_sampling(
            &mut self,
            _site: &SampleSite,
            _counts: &CountMatrices,
            _hyper: &Hyperparams,
            _dist: &SamplingDistribution,
        ) -> Result<()> {
            self.calls += 1;
            Ok(())
        }
    }

    #[test]
    fn observer_called_once_per_token() {
        let corpus = tiny_corpus(vec![vec![0, 1, 1], vec![2, 0]], 3);
        let hyper = Hyperparams::new(2, 0.1, 0.1).unwrap();
        let mut rng = seeds::rng_for(7, "cgs");
        let mut counts = init_assignments(&corpus, &hyper, &mut rng);
        let mut obs = CountingObserver { calls: 0 };
        run_iteration(&corpus, &mut counts, &hyper, &mut rng, Some(&mut obs)).unwrap();
        assert_eq!(obs.calls, corpus.total_tokens());

        let empty = tiny_corpus(vec![vec![]], 3);
        let mut counts = init_assignments(&empty, &hyper, &mut rng);
        let mut obs = CountingObserver { calls: 0 };
        run_iteration(&empty, &mut counts, &hyper, &mut rng, Some(&mut obs)).unwrap();
        assert_eq!(obs.calls, 0);
    }

    #[test]
    fn observer_does_not_disturb_the_chain() {
        let corpus = synth::planted_corpus(&synth::PlantedConfig {
            n_topics: 3,
            vocab_size: 12,
            n_docs: 10,
            doc_len: 8,
            topics_per_doc: 1,
            seed: 11,
        });
        let hyper = Hyperparams::new(3, 0.1, 0.01).unwrap();
        let (_, plain) = train(&corpus, &hyper, 20, 77, None).unwrap();
        let mut obs = CountingObserver { calls: 0 };
        let (_, observed) = train(&corpus, &hyper, 20, 77, Some(&mut obs)).unwrap();
        assert_eq!(plain.assignments(), observed.assignments());
        assert!(obs.calls > 0);
    }

    #[test]
    fn train_zero_iterations_gives_normalized_phi() {
        let corpus = tiny_corpus(vec![vec![0, 1, 2]], 3);
        let hyper = Hyperparams::new(2, 0.1, 0.01).unwrap();
        let (model, _) = train(&corpus, &hyper, 0, 1, None).unwrap();
        for k in 0..2 {
            let s: f64 = model.phi.row(k).sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn planted_two_topic_recovery() {
        let corpus = synth::two_topic_corpus(40, 60, 20, 13);
        let hyper = Hyperparams::new(2, 0.1, 0.01).unwrap();
        let (model, _) = train(&corpus, &hyper, 200, 21, None).unwrap();
        for k in 0..2 {
            let low: f64 = (0..20).map(|t| model.phi[[k, t]]).sum();
            let high: f64 = (20..40).map(|t| model.phi[[k, t]]).sum();
            let dominant = low.max(high);
            assert!(
                dominant >= 0.9,
                "topic {k} spreads over both halves: low={low:.3} high={high:.3}"
            );
        }
    }

    #[test]
    fn estimate_theta_examples() {
        // Empty document: uniform.
        let counts = CountMatrices::from_raw(array![[0u32, 0], [0, 0]], array![[0u32, 0]]).unwrap();
        let hyper = Hyperparams::new(2, 0.5, 0.5).unwrap();
        let theta = estimate_theta(&counts, &hyper);
        assert!((theta[[0, 0]] - 0.5).abs() < 1e-12);

        // Row [3, 0] at alpha=0.5: (3.5/4, 0.5/4).
        let counts = CountMatrices::from_raw(array![[3u32, 0], [0, 0]], array![[3u32, 0]]).unwrap();
        let theta = estimate_theta(&counts, &hyper);
        assert!((theta[[0, 0]] - 3.5 / 4.0).abs() < 1e-12);
        assert!((theta[[0, 1]] - 0.5 / 4.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn full_conditional_positive_and_normalized(
            tw in prop::collection::vec(0u32..40, 6),
            dt in prop::collection::vec(0u32..40, 3),
            t in 0usize..2,
        ) {
            let topic_word = Array2::from_shape_vec((3, 2), tw).unwrap();
            let doc_topic = Array2::from_shape_vec((1, 3), dt).unwrap();
            let counts = CountMatrices::from_raw(topic_word, doc_topic).unwrap();
            let hyper = Hyperparams::new(3, 0.1, 0.01).unwrap();
            let dist = full_conditional(&counts, 0, t, &hyper);
            let sum: f64 = dist.probabilities().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            for &x in dist.masses() {
                prop_assert!(x > 0.0);
            }
        }

        #[test]
        fn theta_rows_normalized(
            dt in prop::collection::vec(0u32..50, 8),
        ) {
            let doc_topic = Array2::from_shape_vec((2, 4), dt).unwrap();
            let counts = CountMatrices::from_raw(Array2::zeros((4, 3)), doc_topic).unwrap();
            let hyper = Hyperparams::new(4, 0.1, 0.01).unwrap();
            let theta = estimate_theta(&counts, &hyper);
            for m in 0..2 {
                let s: f64 = theta.row(m).sum();
                prop_assert!((s - 1.0).abs() < 1e-9);
            }
        }
    }
}
