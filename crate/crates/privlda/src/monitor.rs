//! Privacy accounting for the collapsed Gibbs sampler.
//!
//! Each sampling step draws a topic from a distribution computed on the
//! training corpus; on a neighboring corpus (one word removed, or one
//! document of at most `N_max` words removed) the same step would draw from a
//! slightly different distribution. The worst-case log-ratio between the two,
//! doubled, is the step's privacy parameter. The removed mass can be split
//! across topics in any way — a "topic partition" — and the exact worst case
//! maximizes over all partitions, which is combinatorially large. The
//! monitor instead searches K+1 candidate bounds derived from the partitions
//! that concentrate the whole removed mass on one topic; the exhaustive
//! search ships alongside as [`brute_force_epsilon`] so the reduction can be
//! validated on small instances.
//!
//! Per-step parameters accumulate per token position across iterations
//! (sequential composition); the corpus-level guarantee is the maximum over
//! token positions (parallel composition).

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::cgs::{
    CountMatrices, Hyperparams, SampleSite, SamplingDistribution, SamplingObserver, TopicModel,
};
use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// Which neighboring-dataset relation is being monitored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrivacyLevel {
    /// Neighbor differs by a single word occurrence.
    Word,
    /// Neighbor differs by one document of at most `max_doc_len` words.
    Document { max_doc_len: usize },
}

impl PrivacyLevel {
    /// Document-level monitoring sized for a training corpus.
    pub fn document_for(corpus: &Corpus) -> Result<Self> {
        let n_max = corpus.max_doc_len();
        if n_max == 0 {
            return Err(Error::InvalidArgument(
                "document-level monitoring needs at least one non-empty document".into(),
            ));
        }
        Ok(PrivacyLevel::Document { max_doc_len: n_max })
    }

    /// Token mass removed in the neighboring dataset.
    pub fn removed_mass(&self) -> usize {
        match self {
            PrivacyLevel::Word => 1,
            PrivacyLevel::Document { max_doc_len } => *max_doc_len,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            PrivacyLevel::Word => "word",
            PrivacyLevel::Document { .. } => "document",
        }
    }
}

/// A split of the removed mass across topics; entries sum to the mass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicPartition {
    counts: Vec<usize>,
}

impl TopicPartition {
    pub fn new(counts: Vec<usize>) -> Self {
        Self { counts }
    }

    /// All mass on one topic, zero elsewhere.
    pub fn concentrated(n_topics: usize, topic: usize, mass: usize) -> Self {
        let mut counts = vec![0; n_topics];
        counts[topic] = mass;
        Self { counts }
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Componentwise upper envelope of the neighboring-dataset sampling masses:
/// every topic's smoothed word total is reduced by the full removed mass.
#[derive(Debug, Clone)]
pub struct PseudoDistribution {
    q: Vec<f64>,
    /// Smoothed topic-word denominators `b_k = n_k + V*beta` (before removal).
    b: Vec<f64>,
    removed: usize,
}

impl PseudoDistribution {
    /// Assembles a pseudo distribution from precomputed parts (test and
    /// oracle support; [`pseudo_distribution`] is the production path).
    pub fn from_parts(q: Vec<f64>, b: Vec<f64>, removed: usize) -> Result<Self> {
        if q.len() != b.len() || q.is_empty() {
            return Err(Error::InvalidArgument(
                "pseudo distribution needs matching, non-empty q and b".into(),
            ));
        }
        if q.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::InvalidArgument(
                "pseudo masses must be finite and positive".into(),
            ));
        }
        for (k, &bk) in b.iter().enumerate() {
            if bk - removed as f64 <= 0.0 {
                return Err(Error::DegenerateCorpus {
                    topic: k,
                    smoothed_total: bk,
                    removed,
                });
            }
        }
        Ok(Self { q, b, removed })
    }

    pub fn masses(&self) -> &[f64] {
        &self.q
    }

    pub fn denominators(&self) -> &[f64] {
        &self.b
    }

    pub fn removed_mass(&self) -> usize {
        self.removed
    }
}

/// Computes the pseudo distribution for the token of word `t` in document
/// `m`, against the same token-removed counts as the paired
/// [`full_conditional`](crate::cgs::full_conditional):
/// `q_k = (n_kt + beta)/(n_k + V*beta - N) * (n_mk + alpha)/(n_m + K*alpha)`.
///
/// Fails with [`Error::DegenerateCorpus`] when the removed mass `n_removed`
/// reaches any topic's smoothed word total; the bound is undefined there and
/// the caller must abort or drop to a smaller removal.
pub fn pseudo_distribution(
    counts: &CountMatrices,
    m: usize,
    t: usize,
    hyper: &Hyperparams,
    n_removed: usize,
) -> Result<PseudoDistribution> {
    let v = counts.vocab_size() as f64;
    let doc_denom = counts.doc_total(m) as f64 + hyper.k as f64 * hyper.alpha;
    let mut q = Vec::with_capacity(hyper.k);
    let mut b = Vec::with_capacity(hyper.k);
    for k in 0..hyper.k {
        let b_k = counts.topic_total(k) as f64 + v * hyper.beta;
        if b_k - n_removed as f64 <= 0.0 {
            return Err(Error::DegenerateCorpus {
                topic: k,
                smoothed_total: b_k,
                removed: n_removed,
            });
        }
        let word_term = (counts.topic_word()[[k, t]] as f64 + hyper.beta) / (b_k - n_removed as f64);
        let doc_term = (counts.doc_topic()[[m, k]] as f64 + hyper.alpha) / doc_denom;
        q.push(word_term * doc_term);
        b.push(b_k);
    }
    Ok(PseudoDistribution { q, b, removed: n_removed })
}

/// Per-sampling privacy parameter (in nats) from the K-candidate search.
///
/// Putting the whole removed mass on topic `k` leaves every other mass at
/// `r_j` and lifts `r_k` to `q_k`; that split's exact parameter is
/// `2 max(|ln((S_k/sum r)(r_k/q_k))|, ln(S_k/sum r))` with
/// `S_k = sum_{j!=k} r_j + q_k`. The returned value is the maximum over the
/// K concentrated splits, which also covers the total-mass candidate at the
/// topic with the largest `|r_k - q_k|` (that topic maximizes `S_k`). Mixed
/// splits are not searched; [`brute_force_epsilon`] exists to check that the
/// maximum really is attained on a concentrated split.
///
/// Evaluated through the same arithmetic as [`partition_epsilon`] so the two
/// agree bit for bit on concentrated splits.
pub fn per_sampling_epsilon(dist: &SamplingDistribution, pseudo: &PseudoDistribution) -> f64 {
    let r = dist.masses();
    debug_assert_eq!(r.len(), pseudo.q.len());
    let sum_r = dist.total_mass();
    let n = pseudo.removed as f64;

    let mut best = 0.0f64;
    for (k, &b_k) in pseudo.b.iter().enumerate() {
        let ratio = b_k / (b_k - n);
        let own_shift = ratio.ln();
        let sum_rp = sum_r + r[k] * (ratio - 1.0);
        let log_norm = (sum_rp / sum_r).ln();
        let candidate = (own_shift - log_norm).abs().max(log_norm);
        if candidate > best {
            best = candidate;
        }
    }
    2.0 * best
}

/// Exact privacy parameter for one given partition: both distributions are
/// normalized and the worst absolute log-ratio over topics is doubled.
/// The neighboring masses are `r'_k = r_k * b_k/(b_k - N_k)`.
pub fn partition_epsilon(
    dist: &SamplingDistribution,
    denominators: &[f64],
    partition: &TopicPartition,
) -> Result<f64> {
    let r = dist.masses();
    if denominators.len() != r.len() || partition.counts().len() != r.len() {
        return Err(Error::InvalidArgument(
            "partition, denominators, and distribution must have one entry per topic".into(),
        ));
    }
    let sum_r = dist.total_mass();
    // Per-topic denominator shift ln(r'_k/r_k), then one normalizer for the
    // whole partition. The normalizer accumulates as sum_r plus per-topic
    // deltas; a topic with no removed mass contributes an exact 0.0, which
    // keeps this path bit-compatible with the concentrated-split shortcut in
    // `per_sampling_epsilon`.
    let mut log_shift = Vec::with_capacity(r.len());
    let mut shift_sum = 0.0;
    for k in 0..r.len() {
        let n_k = partition.counts()[k] as f64;
        let shifted = denominators[k] - n_k;
        if shifted <= 0.0 {
            return Err(Error::DegenerateCorpus {
                topic: k,
                smoothed_total: denominators[k],
                removed: partition.counts()[k],
            });
        }
        let ratio = denominators[k] / shifted;
        log_shift.push(ratio.ln());
        shift_sum += r[k] * (ratio - 1.0);
    }
    let log_norm = ((sum_r + shift_sum) / sum_r).ln();
    let worst = log_shift
        .iter()
        .map(|&c| (c - log_norm).abs())
        .fold(0.0f64, f64::max);
    Ok(2.0 * worst)
}

/// Whether the total-mass ratio dominates this partition's per-topic bounds:
/// with `k0` a topic carrying none of the removed mass, checks
/// `ln(b_k0/(b_k0 - N_j)) < 2 ln(sum r'/sum r)` for every other topic `j`.
/// Returns false when no topic is empty of removed mass, and false
/// (vacuously, by strict inequality) when nothing was removed at all.
pub fn sum_ratio_dominates(
    dist: &SamplingDistribution,
    pseudo: &PseudoDistribution,
    partition: &TopicPartition,
) -> Result<bool> {
    let r = dist.masses();
    let b = pseudo.denominators();
    let Some(k0) = partition.counts().iter().position(|&c| c == 0) else {
        return Ok(false);
    };
    let sum_r = dist.total_mass();
    let mut sum_rp = 0.0;
    for k in 0..r.len() {
        let shifted = b[k] - partition.counts()[k] as f64;
        if shifted <= 0.0 {
            return Err(Error::DegenerateCorpus {
                topic: k,
                smoothed_total: b[k],
                removed: partition.counts()[k],
            });
        }
        sum_rp += r[k] * (b[k] / shifted);
    }
    let rhs = 2.0 * (sum_rp / sum_r).ln();
    for (j, &n_j) in partition.counts().iter().enumerate() {
        if j == k0 {
            continue;
        }
        let shifted = b[k0] - n_j as f64;
        if shifted <= 0.0 {
            return Err(Error::DegenerateCorpus {
                topic: k0,
                smoothed_total: b[k0],
                removed: n_j,
            });
        }
        if (b[k0] / shifted).ln() >= rhs {
            return Ok(false);
        }
    }
    Ok(true)
}

fn n_partitions(n: usize, k: usize) -> u128 {
    // C(n + k - 1, k - 1)
    let mut result: u128 = 1;
    let n = n as u128;
    for i in 1..k as u128 {
        result = result.saturating_mul(n + i) / i;
    }
    result
}

const PARTITION_LIMIT: u128 = 1_000_000;

fn for_each_partition(
    n: usize,
    k: usize,
    f: &mut impl FnMut(&[usize]) -> Result<()>,
) -> Result<()> {
    fn rec(
        buf: &mut Vec<usize>,
        remaining: usize,
        slots_left: usize,
        f: &mut impl FnMut(&[usize]) -> Result<()>,
    ) -> Result<()> {
        if slots_left == 1 {
            buf.push(remaining);
            f(buf)?;
            buf.pop();
            return Ok(());
        }
        for x in 0..=remaining {
            buf.push(x);
            rec(buf, remaining - x, slots_left - 1, f)?;
            buf.pop();
        }
        Ok(())
    }
    rec(&mut Vec::with_capacity(k), n, k, f)
}

/// Outcome of the exhaustive partition search.
#[derive(Debug, Clone)]
pub struct BruteForceOutcome {
    pub epsilon: f64,
    pub argmax: TopicPartition,
    pub partitions_checked: u128,
}

/// Exhaustively maximizes [`partition_epsilon`] over every split of
/// `n_removed` across topics. Refuses instances with more than 10^6
/// partitions. This is the oracle the candidate search is validated against;
/// it is unusable at production scale by design.
pub fn brute_force_epsilon(
    counts: &CountMatrices,
    m: usize,
    t: usize,
    hyper: &Hyperparams,
    n_removed: usize,
) -> Result<f64> {
    brute_force_epsilon_detailed(counts, m, t, hyper, n_removed).map(|o| o.epsilon)
}

/// As [`brute_force_epsilon`], also reporting the maximizing partition.
pub fn brute_force_epsilon_detailed(
    counts: &CountMatrices,
    m: usize,
    t: usize,
    hyper: &Hyperparams,
    n_removed: usize,
) -> Result<BruteForceOutcome> {
    let total = n_partitions(n_removed, hyper.k);
    if total > PARTITION_LIMIT {
        return Err(Error::CombinatorialLimit {
            partitions: total,
            limit: PARTITION_LIMIT,
        });
    }
    // Validates b_k > n_removed up front, which covers every partition.
    let pseudo = pseudo_distribution(counts, m, t, hyper, n_removed)?;
    let dist = crate::cgs::full_conditional(counts, m, t, hyper);

    let mut best = f64::NEG_INFINITY;
    let mut argmax = TopicPartition::concentrated(hyper.k, 0, n_removed);
    let mut checked: u128 = 0;
    for_each_partition(n_removed, hyper.k, &mut |split| {
        let partition = TopicPartition::new(split.to_vec());
        let eps = partition_epsilon(&dist, pseudo.denominators(), &partition)?;
        if eps > best {
            best = eps;
            argmax = partition;
        }
        checked += 1;
        Ok(())
    })?;
    Ok(BruteForceOutcome {
        epsilon: best.max(0.0),
        argmax,
        partitions_checked: checked,
    })
}

/// Random small monitoring instance with strictly positive counts: a K x V
/// topic-word matrix with entries in `1..=max_count`, one document row, and a
/// random target word. Used by the oracle CLI verb and the validation suite.
pub fn random_instance(
    k: usize,
    v: usize,
    max_count: u32,
    seed: u64,
) -> (CountMatrices, usize, usize) {
    use rand::Rng;
    let mut rng = crate::seeds::rng_for(seed, "oracle-instance");
    let topic_word = ndarray::Array2::from_shape_fn((k, v), |_| rng.random_range(1..=max_count));
    let doc_topic = ndarray::Array2::from_shape_fn((1, k), |_| rng.random_range(0..=max_count));
    let counts = CountMatrices::from_raw(topic_word, doc_topic).expect("consistent dimensions");
    let t = rng.random_range(0..v);
    (counts, 0, t)
}

/// Per-token accumulated privacy parameters across iterations.
#[derive(Debug, Clone)]
pub struct PrivacyLedger {
    per_token: Vec<f64>,
    iterations_recorded: usize,
    level: PrivacyLevel,
}

impl PrivacyLedger {
    pub fn new(n_token_positions: usize, level: PrivacyLevel) -> Self {
        Self {
            per_token: vec![0.0; n_token_positions],
            iterations_recorded: 0,
            level,
        }
    }

    /// Adds one sampling step's parameter to a token position's running sum.
    pub fn record(&mut self, token_position: usize, epsilon: f64) -> Result<()> {
        if !(epsilon >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "per-sampling epsilon must be nonnegative, got {epsilon}"
            )));
        }
        if token_position >= self.per_token.len() {
            return Err(Error::InvalidArgument(format!(
                "token position {token_position} out of range 0..{}",
                self.per_token.len()
            )));
        }
        self.per_token[token_position] += epsilon;
        Ok(())
    }

    pub fn mark_iteration(&mut self) {
        self.iterations_recorded += 1;
    }

    /// Corpus-level guarantee: the worst accumulated sum across token
    /// positions (disjoint tokens compose in parallel; iterations over the
    /// same token compose sequentially).
    pub fn total(&self) -> f64 {
        if self.per_token.is_empty() {
            log::warn!("privacy ledger is empty; reporting a total of 0");
            return 0.0;
        }
        self.per_token.iter().copied().fold(0.0, f64::max)
    }

    pub fn mean_cumulative(&self) -> f64 {
        if self.per_token.is_empty() {
            return 0.0;
        }
        self.per_token.iter().sum::<f64>() / self.per_token.len() as f64
    }

    pub fn per_token(&self) -> &[f64] {
        &self.per_token
    }

    pub fn iterations_recorded(&self) -> usize {
        self.iterations_recorded
    }

    pub fn level(&self) -> PrivacyLevel {
        self.level
    }
}

/// One ledger report row, snapshotted at the end of an iteration.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LedgerRow {
    pub iteration: usize,
    pub max_cumulative_eps: f64,
    pub mean_cumulative_eps: f64,
}

/// Training observer that measures every sampling step and accumulates the
/// ledger. Purely observational: it never consumes the chain's randomness,
/// so a monitored run reproduces the unmonitored chain bit for bit.
#[derive(Debug, Clone)]
pub struct PrivacyMonitor {
    ledger: PrivacyLedger,
    rows: Vec<LedgerRow>,
}

impl PrivacyMonitor {
    pub fn new(corpus: &Corpus, level: PrivacyLevel) -> Self {
        Self {
            ledger: PrivacyLedger::new(corpus.total_tokens(), level),
            rows: Vec::new(),
        }
    }

    pub fn ledger(&self) -> &PrivacyLedger {
        &self.ledger
    }

    pub fn rows(&self) -> &[LedgerRow] {
        &self.rows
    }

    /// Writes the per-iteration report: `iteration,max_cumulative_eps,mean_cumulative_eps`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        w.write_record(["iteration", "max_cumulative_eps", "mean_cumulative_eps"])
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        for row in &self.rows {
            w.write_record([
                row.iteration.to_string(),
                row.max_cumulative_eps.to_string(),
                row.mean_cumulative_eps.to_string(),
            ])
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn summary(&self) -> LedgerSummary {
        LedgerSummary {
            level: self.ledger.level.label().to_string(),
            n_removed: self.ledger.level.removed_mass(),
            total_eps: self.ledger.total(),
            n_iters: self.ledger.iterations_recorded,
            n_token_positions: self.ledger.per_token.len(),
            accounting: "per token position: sums across iterations, max across positions"
                .to_string(),
        }
    }

    pub fn write_summary_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let json = serde_json::to_string_pretty(&self.summary())
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        writeln!(f, "{json}").map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Final JSON summary of a monitored run.
#[derive(Debug, Clone, Serialize)]
pub struct LedgerSummary {
    pub level: String,
    pub n_removed: usize,
    pub total_eps: f64,
    pub n_iters: usize,
    pub n_token_positions: usize,
    /// How the composition was accounted; "word" in the composition rule is
    /// read as a token position, not a word type.
    pub accounting: String,
}

impl SamplingObserver for PrivacyMonitor {
    fn observe_sampling(
        &mut self,
        site: &SampleSite,
        counts: &CountMatrices,
        hyper: &Hyperparams,
        dist: &SamplingDistribution,
    ) -> Result<()> {
        let pseudo = pseudo_distribution(
            counts,
            site.doc,
            site.word,
            hyper,
            self.ledger.level.removed_mass(),
        )?;
        let eps = per_sampling_epsilon(dist, &pseudo);
        self.ledger.record(site.token_index, eps)
    }

    fn end_iteration(&mut self) -> Result<()> {
        self.ledger.mark_iteration();
        self.rows.push(LedgerRow {
            iteration: self.ledger.iterations_recorded,
            max_cumulative_eps: self.ledger.total(),
            mean_cumulative_eps: self.ledger.mean_cumulative(),
        });
        Ok(())
    }
}

/// A trained model together with its privacy measurement.
#[derive(Debug)]
pub struct MonitoredRun {
    pub model: TopicModel,
    pub counts: CountMatrices,
    pub monitor: PrivacyMonitor,
}

/// Trains with the privacy monitor attached. The chain is identical to
/// [`crate::cgs::train`] with the same seed.
pub fn monitored_train(
    corpus: &Corpus,
    hyper: &Hyperparams,
    n_iters: usize,
    seed: u64,
    level: PrivacyLevel,
) -> Result<MonitoredRun> {
    let mut monitor = PrivacyMonitor::new(corpus, level);
    let (model, counts) = crate::cgs::train(corpus, hyper, n_iters, seed, Some(&mut monitor))?;
    Ok(MonitoredRun {
        model,
        counts,
        monitor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cgs::full_conditional;
    use crate::synth;
    use ndarray::array;

    fn hand_instance() -> (SamplingDistribution, PseudoDistribution) {
        let dist = SamplingDistribution::from_masses(vec![0.4, 0.2]).unwrap();
        let pseudo = PseudoDistribution::from_parts(vec![0.5, 0.25], vec![5.0, 5.0], 1).unwrap();
        (dist, pseudo)
    }

    #[test]
    fn per_sampling_hand_computed() {
        let (dist, pseudo) = hand_instance();
        let eps = per_sampling_epsilon(&dist, &pseudo);
        assert!((eps - 0.3083013596545163).abs() < 1e-12, "eps={eps}");
    }

    #[test]
    fn per_sampling_zero_when_nothing_removed() {
        let dist = SamplingDistribution::from_masses(vec![0.3, 0.7]).unwrap();
        let pseudo = PseudoDistribution::from_parts(vec![0.3, 0.7], vec![9.0, 4.0], 0).unwrap();
        assert_eq!(per_sampling_epsilon(&dist, &pseudo), 0.0);
    }

    #[test]
    fn pseudo_identity_at_zero_removal() {
        let counts =
            CountMatrices::from_raw(array![[3u32, 1], [2, 2]], array![[1u32, 2]]).unwrap();
        let hyper = Hyperparams::new(2, 0.5, 0.25).unwrap();
        let dist = full_conditional(&counts, 0, 1, &hyper);
        let pseudo = pseudo_distribution(&counts, 0, 1, &hyper, 0).unwrap();
        for (r, q) in dist.masses().iter().zip(pseudo.masses()) {
            assert!((r - q).abs() < 1e-15);
        }
    }

    #[test]
    fn pseudo_scales_by_denominator_shift() {
        // b = (10, 10) with V=2, beta=1; removing 4 scales q by 10/6.
        let counts =
            CountMatrices::from_raw(array![[7u32, 1], [4, 4]], array![[2u32, 1]]).unwrap();
        let hyper = Hyperparams::new(2, 0.5, 1.0).unwrap();
        let dist = full_conditional(&counts, 0, 0, &hyper);
        let pseudo = pseudo_distribution(&counts, 0, 0, &hyper, 4).unwrap();
        for (r, q) in dist.masses().iter().zip(pseudo.masses()) {
            assert!((q / r - 10.0 / 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pseudo_dominates_sampling_masses() {
        for seed in 0..1000u64 {
            let (counts, m, t) = random_instance(3, 5, 15, seed);
            let hyper = Hyperparams::new(3, 0.1, 0.01).unwrap();
            let dist = full_conditional(&counts, m, t, &hyper);
            let pseudo = pseudo_distribution(&counts, m, t, &hyper, 1 + (seed % 4) as usize).unwrap();
            for (r, q) in dist.masses().iter().zip(pseudo.masses()) {
                assert!(q >= r);
            }
        }
    }

    #[test]
    fn degenerate_when_removal_reaches_topic_total() {
        let counts = CountMatrices::from_raw(array![[1u32, 0], [5, 5]], array![[1u32, 1]]).unwrap();
        let hyper = Hyperparams::new(2, 0.1, 0.5).unwrap();
        // b_0 = 1 + 2*0.5 = 2; removing 2 is degenerate.
        match pseudo_distribution(&counts, 0, 0, &hyper, 2) {
            Err(Error::DegenerateCorpus { topic: 0, .. }) => {}
            other => panic!("expected degenerate corpus error, got {other:?}"),
        }
    }

    #[test]
    fn brute_force_partition_count() {
        let (counts, m, t) = random_instance(2, 4, 10, 3);
        let hyper = Hyperparams::new(2, 0.1, 0.01).unwrap();
        let out = brute_force_epsilon_detailed(&counts, m, t, &hyper, 1).unwrap();
        assert_eq!(out.partitions_checked, 2);
        let out0 = brute_force_epsilon_detailed(&counts, m, t, &hyper, 0).unwrap();
        assert_eq!(out0.partitions_checked, 1);
        assert_eq!(out0.epsilon, 0.0);
    }

    #[test]
    fn brute_force_refuses_huge_searches() {
        let (counts, m, t) = random_instance(4, 4, 2000, 4);
        let hyper = Hyperparams::new(4, 0.1, 0.01).unwrap();
        match brute_force_epsilon(&counts, m, t, &hyper, 1000) {
            Err(Error::CombinatorialLimit { partitions, .. }) => {
                assert!(partitions > PARTITION_LIMIT);
            }
            other => panic!("expected combinatorial limit error, got {other:?}"),
        }
    }

    #[test]
    fn candidate_search_sound_and_exact_on_concentrated_partitions() {
        let hyper3 = Hyperparams::new(3, 0.1, 0.01).unwrap();
        for seed in 0..60u64 {
            let n = 1 + (seed % 5) as usize;
            let (counts, m, t) = random_instance(3, 6, 20, seed);
            let dist = full_conditional(&counts, m, t, &hyper3);
            let pseudo = pseudo_distribution(&counts, m, t, &hyper3, n).unwrap();
            let fast = per_sampling_epsilon(&dist, &pseudo);
            let exact = brute_force_epsilon(&counts, m, t, &hyper3, n).unwrap();
            assert!(
                fast >= exact,
                "candidate search fell below the exhaustive maximum: {fast} < {exact} (seed {seed})"
            );
            let concentrated_max = (0..3)
                .map(|k| {
                    let p = TopicPartition::concentrated(3, k, n);
                    partition_epsilon(&dist, pseudo.denominators(), &p).unwrap()
                })
                .fold(0.0f64, f64::max);
            let rel = (fast - concentrated_max).abs() / concentrated_max.max(1e-300);
            assert!(rel < 1e-9, "not exact on concentrated partitions: {fast} vs {concentrated_max}");
        }
    }

    #[test]
    fn epsilon_monotone_in_removed_mass() {
        let hyper = Hyperparams::new(4, 0.1, 0.01).unwrap();
        for seed in 0..50u64 {
            let (counts, m, t) = random_instance(4, 8, 20, seed);
            let dist = full_conditional(&counts, m, t, &hyper);
            let mut last = 0.0;
            for n in 1..=5usize {
                let pseudo = pseudo_distribution(&counts, m, t, &hyper, n).unwrap();
                let eps = per_sampling_epsilon(&dist, &pseudo);
                assert!(
                    eps >= last - 1e-12,
                    "epsilon decreased from {last} to {eps} at n={n} (seed {seed})"
                );
                last = eps;
            }
        }
    }

    // Instances with equal smoothed denominators across topics, where the
    // dominance condition is an exact characterization.
    fn equal_denominator_instance(
        masses: Vec<f64>,
        b: f64,
        partition: Vec<usize>,
    ) -> (SamplingDistribution, PseudoDistribution, TopicPartition) {
        let k = masses.len();
        let n: usize = partition.iter().sum();
        let dist = SamplingDistribution::from_masses(masses.clone()).unwrap();
        let q: Vec<f64> = masses.iter().map(|&r| r * b / (b - n as f64)).collect();
        let pseudo = PseudoDistribution::from_parts(q, vec![b; k], n).unwrap();
        (dist, pseudo, TopicPartition::new(partition))
    }

    #[test]
    fn dominance_condition_true_matches_sum_ratio_value() {
        // Large denominators: per-topic shifts are tiny, the sum ratio wins.
        let (dist, pseudo, partition) =
            equal_denominator_instance(vec![0.5, 0.3, 0.2], 400.0, vec![2, 3, 0]);
        assert!(sum_ratio_dominates(&dist, &pseudo, &partition).unwrap());

        let r = dist.masses();
        let sum_r = dist.total_mass();
        let sum_rp: f64 = r
            .iter()
            .zip(partition.counts())
            .map(|(&rk, &nk)| rk * 400.0 / (400.0 - nk as f64))
            .sum();
        let via_sum_ratio = 2.0 * (sum_rp / sum_r).ln();
        let exact = partition_epsilon(&dist, pseudo.denominators(), &partition).unwrap();
        assert!(
            (via_sum_ratio - exact).abs() < 1e-12,
            "sum-ratio value {via_sum_ratio} vs exact {exact}"
        );
    }

    #[test]
    fn dominance_condition_false_matches_per_topic_value() {
        // Tiny mass on a topic whose denominator shrinks a lot: its own
        // ratio dwarfs the sum ratio.
        let (dist, pseudo, partition) =
            equal_denominator_instance(vec![0.01, 0.59, 0.40], 6.0, vec![5, 0, 0]);
        assert!(!sum_ratio_dominates(&dist, &pseudo, &partition).unwrap());

        let r = dist.masses();
        let sum_r = dist.total_mass();
        let sum_rp: f64 = r
            .iter()
            .zip(partition.counts())
            .map(|(&rk, &nk)| rk * 6.0 / (6.0 - nk as f64))
            .sum();
        let log_norm = (sum_rp / sum_r).ln();
        // Worst bound among the topics carrying removed mass.
        let via_topics = 2.0
            * partition
                .counts()
                .iter()
                .filter(|&&nk| nk > 0)
                .map(|&nk| ((6.0 / (6.0 - nk as f64)).ln() - log_norm).abs())
                .fold(0.0f64, f64::max);
        let exact = partition_epsilon(&dist, pseudo.denominators(), &partition).unwrap();
        assert!(
            (via_topics - exact).abs() < 1e-12,
            "per-topic value {via_topics} vs exact {exact}"
        );
        assert!(exact > 2.0 * log_norm);
    }

    #[test]
    fn maximizer_concentrates_on_one_topic() {
        for seed in 100..160u64 {
            let k = 2 + (seed % 3) as usize;
            let n = 1 + (seed % 5) as usize;
            let hyper = Hyperparams::new(k, 0.1, 0.01).unwrap();
            let (counts, m, t) = random_instance(k, 6, 20, seed);
            let out = brute_force_epsilon_detailed(&counts, m, t, &hyper, n).unwrap();
            let dist = full_conditional(&counts, m, t, &hyper);
            let pseudo = pseudo_distribution(&counts, m, t, &hyper, n).unwrap();
            let concentrated_max = (0..k)
                .map(|j| {
                    let p = TopicPartition::concentrated(k, j, n);
                    partition_epsilon(&dist, pseudo.denominators(), &p).unwrap()
                })
                .fold(0.0f64, f64::max);
            let rel = (out.epsilon - concentrated_max).abs() / out.epsilon.max(1e-300);
            assert!(
                rel < 1e-9,
                "global maximum {} not attained on concentrated partitions ({concentrated_max}), seed {seed}",
                out.epsilon
            );
        }
    }

    #[test]
    fn ledger_accumulates_and_totals() {
        let mut ledger = PrivacyLedger::new(2, PrivacyLevel::Word);
        ledger.record(0, 0.1).unwrap();
        ledger.record(0, 0.2).unwrap();
        ledger.record(0, 0.3).unwrap();
        ledger.record(1, 0.5).unwrap();
        assert!((ledger.per_token()[0] - 0.6).abs() < 1e-15);
        assert!((ledger.total() - 0.6).abs() < 1e-15);
        ledger.record(1, 0.0).unwrap();
        assert!((ledger.total() - 0.6).abs() < 1e-15);
        assert!(ledger.record(2, 0.1).is_err());
        assert!(ledger.record(0, -0.1).is_err());
    }

    #[test]
    fn ledger_total_invariant_under_record_order() {
        let entries = [(0usize, 0.3), (1, 0.1), (0, 0.2), (1, 0.4), (0, 0.05)];
        let mut a = PrivacyLedger::new(2, PrivacyLevel::Word);
        for &(pos, eps) in &entries {
            a.record(pos, eps).unwrap();
        }
        let mut b = PrivacyLedger::new(2, PrivacyLevel::Word);
        for &(pos, eps) in entries.iter().rev() {
            b.record(pos, eps).unwrap();
        }
        assert!((a.total() - b.total()).abs() < 1e-12);
    }

    #[test]
    fn empty_ledger_totals_zero() {
        let ledger = PrivacyLedger::new(0, PrivacyLevel::Word);
        assert_eq!(ledger.total(), 0.0);
        let zeros = PrivacyLedger::new(5, PrivacyLevel::Word);
        assert_eq!(zeros.total(), 0.0);
    }

    #[test]
    fn monitored_training_records_every_sampling() {
        let corpus = synth::planted_corpus(&synth::PlantedConfig {
            n_topics: 3,
            vocab_size: 30,
            n_docs: 10,
            doc_len: 5,
            topics_per_doc: 1,
            seed: 8,
        });
        let hyper = Hyperparams::new(3, 0.1, 0.2).unwrap();
        let run = monitored_train(&corpus, &hyper, 7, 1234, PrivacyLevel::Word).unwrap();
        assert_eq!(run.monitor.rows().len(), 7);
        assert_eq!(run.monitor.ledger().iterations_recorded(), 7);
        assert_eq!(run.monitor.ledger().per_token().len(), corpus.total_tokens());
        assert!(run.monitor.ledger().total() > 0.0);
        // Cumulative maxima never decrease.
        for pair in run.monitor.rows().windows(2) {
            assert!(pair[1].max_cumulative_eps >= pair[0].max_cumulative_eps);
        }
    }

    #[test]
    fn document_level_requires_nonempty_documents() {
        let corpus = crate::corpus::Corpus::new(
            vec![crate::corpus::Document { doc_id: 0, tokens: vec![] }],
            crate::corpus::Vocabulary::synthetic(2),
        )
        .unwrap();
        assert!(PrivacyLevel::document_for(&corpus).is_err());
    }
}
