//! Corpus ingestion: UCI bag-of-words parsing, vocabulary pruning,
//! train/test splitting, and binary presence encoding.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::seeds;

/// Dense, stable mapping between word strings and ids in `[0, V)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new(words: Vec<String>) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::InvalidArgument(
                "vocabulary must contain at least one word".into(),
            ));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (id, w) in words.iter().enumerate() {
            if index.insert(w.clone(), id).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "duplicate word in vocabulary: {w:?}"
                )));
            }
        }
        Ok(Self { words, index })
    }

    /// Placeholder names `w0..w{v-1}` for corpora without a word list.
    pub fn synthetic(v: usize) -> Self {
        let words: Vec<String> = (0..v).map(|i| format!("w{i}")).collect();
        Self::new(words).expect("synthetic names are distinct")
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

/// One document: a sequence of word ids (repeats allowed).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: usize,
    pub tokens: Vec<usize>,
}

/// A tokenized corpus over a fixed vocabulary.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub vocab: Vocabulary,
}

impl Corpus {
    pub fn new(documents: Vec<Document>, vocab: Vocabulary) -> Result<Self> {
        let v = vocab.len();
        for doc in &documents {
            if let Some(&t) = doc.tokens.iter().find(|&&t| t >= v) {
                return Err(Error::InvalidArgument(format!(
                    "document {} has token id {t} outside vocabulary of size {v}",
                    doc.doc_id
                )));
            }
        }
        Ok(Self { documents, vocab })
    }

    /// Number of documents (M).
    pub fn n_docs(&self) -> usize {
        self.documents.len()
    }

    /// Vocabulary size (V).
    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    /// Total token count (W).
    pub fn total_tokens(&self) -> usize {
        self.documents.iter().map(|d| d.tokens.len()).sum()
    }

    /// Longest document in tokens (N_max); 0 for an empty corpus.
    pub fn max_doc_len(&self) -> usize {
        self.documents.iter().map(|d| d.tokens.len()).max().unwrap_or(0)
    }
}

/// Presence vector for one document: `bits[t]` iff word `t` occurs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryDocVector {
    pub doc_id: usize,
    pub bits: Vec<bool>,
}

impl BinaryDocVector {
    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Encodes a document as a presence vector; token multiplicity is discarded.
pub fn encode_binary(doc: &Document, v: usize) -> BinaryDocVector {
    let mut bits = vec![false; v];
    for &t in &doc.tokens {
        bits[t] = true;
    }
    BinaryDocVector {
        doc_id: doc.doc_id,
        bits,
    }
}

fn parse_header_line(line: Option<std::io::Result<String>>, line_no: usize, what: &str) -> Result<usize> {
    let line = line
        .ok_or_else(|| Error::Parse {
            line: line_no,
            msg: format!("missing header line ({what})"),
        })?
        .map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
    line.trim().parse::<usize>().map_err(|_| Error::Parse {
        line: line_no,
        msg: format!("expected {what} as a nonnegative integer, got {:?}", line.trim()),
    })
}

/// Loads a UCI bag-of-words file:
/// line 1 = D (documents), line 2 = V (vocabulary size), line 3 = NNZ,
/// then NNZ lines of `docID wordID count` with 1-based ids.
///
/// If `<path>.vocab` exists (one word per line, exactly V lines) it supplies
/// the word strings; otherwise words are named `w0..`.
pub fn load_uci_bag_of_words(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let sidecar = sidecar_vocab_path(path);
    let vocab_path = if sidecar.exists() { Some(sidecar) } else { None };
    load_uci_with_vocab(path, vocab_path.as_deref())
}

fn sidecar_vocab_path(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".vocab");
    std::path::PathBuf::from(os)
}

/// As [`load_uci_bag_of_words`], with an explicit vocabulary file.
pub fn load_uci_with_vocab(path: impl AsRef<Path>, vocab_path: Option<&Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();

    let n_docs = parse_header_line(lines.next(), 1, "document count")?;
    let v_raw = parse_header_line(lines.next(), 2, "vocabulary size")?;
    let nnz = parse_header_line(lines.next(), 3, "nonzero entry count")?;
    if v_raw == 0 {
        return Err(Error::Parse {
            line: 2,
            msg: "vocabulary size must be at least 1".into(),
        });
    }

    let mut tokens: Vec<Vec<usize>> = vec![Vec::new(); n_docs];
    let mut n_triples = 0usize;
    for (i, line) in lines.enumerate() {
        let line_no = i + 4;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let mut next_num = |what: &str| -> Result<usize> {
            fields
                .next()
                .ok_or_else(|| Error::Parse {
                    line: line_no,
                    msg: format!("missing {what}"),
                })?
                .parse::<usize>()
                .map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("malformed {what}"),
                })
        };
        let doc_id = next_num("docID")?;
        let word_id = next_num("wordID")?;
        let count = next_num("count")?;
        if fields.next().is_some() {
            return Err(Error::Parse {
                line: line_no,
                msg: "expected exactly three fields (docID wordID count)".into(),
            });
        }
        if doc_id == 0 || doc_id > n_docs {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("docID {doc_id} out of range 1..={n_docs}"),
            });
        }
        if word_id == 0 || word_id > v_raw {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("wordID {word_id} out of range 1..={v_raw}"),
            });
        }
        tokens[doc_id - 1].extend(std::iter::repeat_n(word_id - 1, count));
        n_triples += 1;
    }
    if n_triples != nnz {
        return Err(Error::Parse {
            line: 3,
            msg: format!("header declares {nnz} entries but file contains {n_triples}"),
        });
    }

    let vocab = match vocab_path {
        Some(vp) => {
            let words = read_lines(vp)?;
            if words.len() != v_raw {
                return Err(Error::InvalidArgument(format!(
                    "vocabulary file {} has {} words but the corpus declares {v_raw}",
                    vp.display(),
                    words.len()
                )));
            }
            Vocabulary::new(words)?
        }
        None => Vocabulary::synthetic(v_raw),
    };

    let documents = tokens
        .into_iter()
        .enumerate()
        .map(|(i, tokens)| Document { doc_id: i, tokens })
        .collect();
    Corpus::new(documents, vocab)
}

/// Writes a corpus in UCI bag-of-words format, plus a `<path>.vocab` sidecar.
/// Token order within a document is not preserved (the format is a bag);
/// reloading yields token-count-identical documents.
pub fn save_uci_bag_of_words(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut triples: Vec<(usize, usize, usize)> = Vec::new();
    for (m, doc) in corpus.documents.iter().enumerate() {
        let mut counts: HashMap<usize, usize> = HashMap::new();
        for &t in &doc.tokens {
            *counts.entry(t).or_insert(0) += 1;
        }
        let mut entries: Vec<_> = counts.into_iter().collect();
        entries.sort_unstable();
        for (t, c) in entries {
            triples.push((m + 1, t + 1, c));
        }
    }

    let mut out = String::new();
    out.push_str(&format!("{}\n{}\n{}\n", corpus.n_docs(), corpus.vocab_size(), triples.len()));
    for (d, w, c) in triples {
        out.push_str(&format!("{d} {w} {c}\n"));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))?;

    let vocab_path = sidecar_vocab_path(path);
    let mut vf = fs::File::create(&vocab_path).map_err(|e| Error::io(&vocab_path, e))?;
    for w in corpus.vocab.words() {
        writeln!(vf, "{w}").map_err(|e| Error::io(&vocab_path, e))?;
    }
    Ok(())
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(file)
        .lines()
        .enumerate()
        .map(|(i, l)| {
            l.map(|s| s.trim().to_string()).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .filter(|l| !matches!(l, Ok(s) if s.is_empty()))
        .collect()
}

/// Loads a stopword file, one word per line.
pub fn load_stopwords(path: impl AsRef<Path>) -> Result<HashSet<String>> {
    Ok(read_lines(path.as_ref())?.into_iter().collect())
}

/// Restricts a corpus to the `top_v` most frequent non-stopword types and
/// re-indexes the vocabulary densely. Frequency ties at the cutoff go to the
/// lexicographically smaller word. Documents that lose all their tokens are
/// kept (empty).
pub fn preprocess(corpus: &Corpus, stopwords: &HashSet<String>, top_v: usize) -> Result<Corpus> {
    if top_v == 0 {
        return Err(Error::InvalidArgument("top_v must be at least 1".into()));
    }
    let mut freq = vec![0usize; corpus.vocab_size()];
    for doc in &corpus.documents {
        for &t in &doc.tokens {
            freq[t] += 1;
        }
    }
    let mut candidates: Vec<usize> = (0..corpus.vocab_size())
        .filter(|&t| freq[t] > 0 && !stopwords.contains(corpus.vocab.word(t)))
        .collect();
    candidates.sort_by(|&a, &b| {
        freq[b]
            .cmp(&freq[a])
            .then_with(|| corpus.vocab.word(a).cmp(corpus.vocab.word(b)))
    });
    if top_v > candidates.len() {
        log::warn!(
            "top_v={top_v} exceeds the {} distinct non-stopword types; keeping all",
            candidates.len()
        );
    }
    candidates.truncate(top_v);
    if candidates.is_empty() {
        return Err(Error::InvalidArgument(
            "pruning removed every word type; nothing left to train on".into(),
        ));
    }

    let words: Vec<String> = candidates.iter().map(|&t| corpus.vocab.word(t).to_string()).collect();
    let vocab = Vocabulary::new(words)?;
    let mut remap: Vec<Option<usize>> = vec![None; corpus.vocab_size()];
    for (new_id, &old_id) in candidates.iter().enumerate() {
        remap[old_id] = Some(new_id);
    }
    let documents = corpus
        .documents
        .iter()
        .map(|doc| Document {
            doc_id: doc.doc_id,
            tokens: doc.tokens.iter().filter_map(|&t| remap[t]).collect(),
        })
        .collect();
    Corpus::new(documents, vocab)
}

/// Maps a corpus onto an existing vocabulary (matching by word string);
/// tokens not present in `vocab` are dropped. Used to carry a training
/// vocabulary over to a held-out split.
pub fn restrict_to_vocabulary(corpus: &Corpus, vocab: &Vocabulary) -> Result<Corpus> {
    let remap: Vec<Option<usize>> = (0..corpus.vocab_size())
        .map(|t| vocab.id(corpus.vocab.word(t)))
        .collect();
    let documents = corpus
        .documents
        .iter()
        .map(|doc| Document {
            doc_id: doc.doc_id,
            tokens: doc.tokens.iter().filter_map(|&t| remap[t]).collect(),
        })
        .collect();
    Corpus::new(documents, vocab.clone())
}

/// Splits a corpus into `(train, test)` with `n_test` documents drawn
/// uniformly without replacement; both halves keep the original document
/// order and share the vocabulary. Deterministic for a given seed.
pub fn split_train_test(corpus: &Corpus, n_test: usize, seed: u64) -> Result<(Corpus, Corpus)> {
    let m = corpus.n_docs();
    if n_test > m {
        return Err(Error::InvalidArgument(format!(
            "n_test={n_test} exceeds document count {m}"
        )));
    }
    let mut rng = seeds::rng_for(seed, "split");
    let chosen = rand::seq::index::sample(&mut rng, m, n_test);
    let mut is_test = vec![false; m];
    for i in chosen {
        is_test[i] = true;
    }
    let mut train = Vec::with_capacity(m - n_test);
    let mut test = Vec::with_capacity(n_test);
    for (i, doc) in corpus.documents.iter().enumerate() {
        if is_test[i] {
            test.push(doc.clone());
        } else {
            train.push(doc.clone());
        }
    }
    Ok((
        Corpus::new(train, corpus.vocab.clone())?,
        Corpus::new(test, corpus.vocab.clone())?,
    ))
}
