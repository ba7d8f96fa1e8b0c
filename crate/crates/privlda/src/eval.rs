//! Held-out evaluation: perplexity under fold-in inference, and top-word
//! inspection.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cgs::{sample_topic, SamplingDistribution, TopicModel};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::seeds;

/// Perplexity of a model on a test corpus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerplexityReport {
    pub perplexity: f64,
    pub n_test_tokens: usize,
    pub fold_in_iters: usize,
    pub seed: u64,
}

/// Per-document fold-in: with the topic-word distributions frozen, resample
/// each test token's topic from `phi[k][t] * (n_mk + alpha)/(n_m + K*alpha)`
/// for `fold_in_iters` sweeps (after a uniform random initialization),
/// then read the document-topic estimate off the final counts.
///
/// Returns the document's total log-likelihood `sum_t ln(sum_k theta_k phi_kt)`.
fn fold_in_log_likelihood(
    model: &TopicModel,
    tokens: &[usize],
    fold_in_iters: usize,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let k_topics = model.n_topics();
    let alpha = model.hyper.alpha;
    let mut doc_topic = vec![0u32; k_topics];
    let mut z = Vec::with_capacity(tokens.len());
    for _ in tokens {
        let k = rng.random_range(0..k_topics);
        doc_topic[k] += 1;
        z.push(k);
    }
    let denom = (tokens.len() - 1) as f64 + k_topics as f64 * alpha;
    for _ in 0..fold_in_iters {
        for (i, &t) in tokens.iter().enumerate() {
            doc_topic[z[i]] -= 1;
            let masses: Vec<f64> = (0..k_topics)
                .map(|k| model.phi[[k, t]] * (doc_topic[k] as f64 + alpha) / denom)
                .collect();
            let dist = SamplingDistribution::from_masses(masses)
                .expect("positive phi and alpha keep fold-in masses positive");
            let k = sample_topic(&dist, rng);
            doc_topic[k] += 1;
            z[i] = k;
        }
    }
    let theta_denom = tokens.len() as f64 + k_topics as f64 * alpha;
    let theta: Vec<f64> = doc_topic
        .iter()
        .map(|&c| (c as f64 + alpha) / theta_denom)
        .collect();
    tokens
        .iter()
        .map(|&t| {
            let p: f64 = (0..k_topics).map(|k| theta[k] * model.phi[[k, t]]).sum();
            p.ln()
        })
        .sum()
}

/// Held-out perplexity `exp(-sum log p(token) / sum tokens)`. Empty test
/// documents are skipped entirely. Each document's fold-in generator is
/// derived from the global seed and the document's token content, so the
/// result does not depend on document order.
pub fn perplexity(
    model: &TopicModel,
    test: &Corpus,
    fold_in_iters: usize,
    seed: u64,
) -> Result<PerplexityReport> {
    if test.vocab.words() != model.vocab.words() {
        return Err(Error::InvalidArgument(
            "test corpus vocabulary does not match the model vocabulary; \
             restrict the test corpus to the model vocabulary first"
                .into(),
        ));
    }
    let per_doc: Vec<(f64, usize)> = test
        .documents
        .par_iter()
        .filter(|doc| !doc.tokens.is_empty())
        .map(|doc| {
            let doc_seed =
                seeds::content_seed(seed, "foldin", doc.tokens.iter().map(|&t| t as u64));
            let mut rng = ChaCha8Rng::seed_from_u64(doc_seed);
            let ll = fold_in_log_likelihood(model, &doc.tokens, fold_in_iters, &mut rng);
            (ll, doc.tokens.len())
        })
        .collect();
    let n_test_tokens: usize = per_doc.iter().map(|&(_, n)| n).sum();
    if n_test_tokens == 0 {
        return Err(Error::InvalidArgument(
            "test corpus has no tokens; perplexity is undefined".into(),
        ));
    }
    let total_ll: f64 = per_doc.iter().map(|&(ll, _)| ll).sum();
    Ok(PerplexityReport {
        perplexity: (-total_ll / n_test_tokens as f64).exp(),
        n_test_tokens,
        fold_in_iters,
        seed,
    })
}

/// The `n` highest-probability words of one topic, ties broken by word id.
pub fn top_words(model: &TopicModel, topic: usize, n: usize) -> Vec<String> {
    let mut ids: Vec<usize> = (0..model.vocab_size()).collect();
    ids.sort_by(|&a, &b| {
        model.phi[[topic, b]]
            .partial_cmp(&model.phi[[topic, a]])
            .unwrap()
            .then(a.cmp(&b))
    });
    ids.truncate(n);
    ids.into_iter().map(|t| model.vocab.word(t).to_string()).collect()
}
