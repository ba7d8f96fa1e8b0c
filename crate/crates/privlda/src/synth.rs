//! Synthetic corpora with known topic structure, for tests and demos.

use rand::Rng;

use crate::corpus::{Corpus, Document, Vocabulary};
use crate::seeds;

/// Configuration for a planted-topic corpus: the vocabulary is split into
/// disjoint slices, one per topic, and every document mixes a few topics.
#[derive(Debug, Clone, Copy)]
pub struct PlantedConfig {
    pub n_topics: usize,
    pub vocab_size: usize,
    pub n_docs: usize,
    pub doc_len: usize,
    /// How many distinct topics each document draws from (>= 1).
    pub topics_per_doc: usize,
    pub seed: u64,
}

/// Generates a corpus from `cfg`. Topic `k` is uniform over its vocabulary
/// slice; each document mixes `topics_per_doc` randomly chosen topics with
/// equal weight.
pub fn planted_corpus(cfg: &PlantedConfig) -> Corpus {
    assert!(cfg.n_topics >= 1 && cfg.vocab_size >= cfg.n_topics);
    assert!(cfg.topics_per_doc >= 1 && cfg.topics_per_doc <= cfg.n_topics);
    let mut rng = seeds::rng_for(cfg.seed, "synth");
    let slice = cfg.vocab_size / cfg.n_topics;
    let mut documents = Vec::with_capacity(cfg.n_docs);
    for doc_id in 0..cfg.n_docs {
        let chosen = rand::seq::index::sample(&mut rng, cfg.n_topics, cfg.topics_per_doc);
        let chosen: Vec<usize> = chosen.into_iter().collect();
        let mut tokens = Vec::with_capacity(cfg.doc_len);
        for _ in 0..cfg.doc_len {
            let topic = chosen[rng.random_range(0..chosen.len())];
            let lo = topic * slice;
            // Last topic absorbs any remainder of the vocabulary.
            let hi = if topic + 1 == cfg.n_topics { cfg.vocab_size } else { lo + slice };
            tokens.push(rng.random_range(lo..hi));
        }
        documents.push(Document { doc_id, tokens });
    }
    Corpus::new(documents, Vocabulary::synthetic(cfg.vocab_size))
        .expect("generated tokens are in range")
}

/// Two topics over disjoint vocabulary halves; document `i` draws purely from
/// half `i % 2`. `vocab_size` must be even.
pub fn two_topic_corpus(vocab_size: usize, n_docs: usize, doc_len: usize, seed: u64) -> Corpus {
    assert!(vocab_size >= 2 && vocab_size.is_multiple_of(2));
    let mut rng = seeds::rng_for(seed, "synth");
    let half = vocab_size / 2;
    let documents = (0..n_docs)
        .map(|doc_id| {
            let lo = if doc_id % 2 == 0 { 0 } else { half };
            let tokens = (0..doc_len).map(|_| rng.random_range(lo..lo + half)).collect();
            Document { doc_id, tokens }
        })
        .collect();
    Corpus::new(documents, Vocabulary::synthetic(vocab_size)).expect("tokens in range")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planted_dimensions() {
        let corpus = planted_corpus(&PlantedConfig {
            n_topics: 5,
            vocab_size: 23,
            n_docs: 7,
            doc_len: 11,
            topics_per_doc: 2,
            seed: 1,
        });
        assert_eq!(corpus.n_docs(), 7);
        assert_eq!(corpus.total_tokens(), 77);
        assert_eq!(corpus.vocab_size(), 23);
    }

    #[test]
    fn two_topic_halves_are_disjoint() {
        let corpus = two_topic_corpus(10, 6, 20, 2);
        for doc in &corpus.documents {
            let half = if doc.doc_id % 2 == 0 { 0..5 } else { 5..10 };
            assert!(doc.tokens.iter().all(|t| half.contains(t)));
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let a = two_topic_corpus(8, 4, 6, 3);
        let b = two_topic_corpus(8, 4, 6, 3);
        assert_eq!(a.documents, b.documents);
    }
}
