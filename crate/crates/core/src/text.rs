//! Corpus encoding: tokenization, vocabulary, TF-IDF, label matrices and
//! supervision masks.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::classify::{LabelMatrix, LabelMode};
use crate::error::{Error, Result};
use crate::matrix::{Mask, Matrix, NonnegMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(Error::InvalidParameter { name: "split", reason: "expected train, val or test" }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub labels: Vec<String>,
    pub split: Split,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    documents: Vec<Document>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for doc in &documents {
            if !seen.insert(doc.id.as_str()) {
                return Err(Error::DuplicateId(doc.id.clone()));
            }
        }
        Ok(Corpus { documents })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn split(&self, split: Split) -> Vec<&Document> {
        self.documents.iter().filter(|d| d.split == split).collect()
    }

    /// Every label used in the corpus, sorted.
    pub fn classes(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.documents.iter().flat_map(|d| d.labels.iter().map(String::as_str)).collect();
        set.into_iter().map(String::from).collect()
    }
}

/// Lowercased alphabetic runs of at least two characters.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphabetic())
        .filter(|t| t.chars().count() >= 2)
        .map(|t| t.chars().flat_map(char::to_lowercase).collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: BTreeMap<String, usize>,
    document_frequency: Vec<usize>,
    /// Number of training documents the frequencies were counted over.
    n_docs: usize,
}

impl Vocabulary {
    /// Builds a vocabulary from terms in index order with their document
    /// frequencies.
    pub fn from_terms(terms: Vec<(String, usize)>, n_docs: usize) -> Result<Self> {
        let mut index = BTreeMap::new();
        let mut document_frequency = Vec::with_capacity(terms.len());
        let mut ordered = Vec::with_capacity(terms.len());
        for (i, (term, df)) in terms.into_iter().enumerate() {
            if df == 0 {
                return Err(Error::InvalidParameter { name: "document_frequency", reason: "must be at least 1" });
            }
            if index.insert(term.clone(), i).is_some() {
                return Err(Error::InvalidParameter { name: "vocabulary", reason: "duplicate term" });
            }
            ordered.push(term);
            document_frequency.push(df);
        }
        Ok(Vocabulary { terms: ordered, index, document_frequency, n_docs })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn document_frequency(&self, idx: usize) -> usize {
        self.document_frequency[idx]
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    /// Smoothed `log((1 + n) / (1 + df)) + 1`.
    pub fn idf(&self, idx: usize) -> f64 {
        let n = self.n_docs as f64;
        libm::log((1.0 + n) / (1.0 + self.document_frequency[idx] as f64)) + 1.0
    }
}

/// Terms of the training split with `df ≥ min_df`, keeping the `max_terms`
/// most frequent (ties alphabetical). The result is in alphabetical order.
pub fn build_vocab(corpus: &Corpus, min_df: usize, max_terms: Option<usize>) -> Result<Vocabulary> {
    let train = corpus.split(Split::Train);
    if train.is_empty() {
        return Err(Error::EmptyTrainingSplit);
    }
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for doc in &train {
        let distinct: BTreeSet<String> = tokenize(&doc.text).collect();
        for term in distinct {
            *df.entry(term).or_default() += 1;
        }
    }
    let mut kept: Vec<(String, usize)> = df.into_iter().filter(|(_, n)| *n >= min_df.max(1)).collect();
    if let Some(limit) = max_terms {
        // BTreeMap order is alphabetical and the sort is stable.
        kept.sort_by_key(|t| core::cmp::Reverse(t.1));
        kept.truncate(limit);
        kept.sort_by(|a, b| a.0.cmp(&b.0));
    }
    Vocabulary::from_terms(kept, train.len())
}

/// `terms × documents` TF-IDF matrix with unit-norm document columns.
pub fn tfidf(docs: &[&Document], vocab: &Vocabulary) -> Result<NonnegMatrix> {
    let mut m = Matrix::zeros(vocab.len(), docs.len());
    for (j, doc) in docs.iter().enumerate() {
        for token in tokenize(&doc.text) {
            if let Some(t) = vocab.index_of(&token) {
                m.set(t, j, m.get(t, j) + 1.0);
            }
        }
        let mut norm_sq = 0.0;
        for t in 0..vocab.len() {
            let v = m.get(t, j) * vocab.idf(t);
            m.set(t, j, v);
            norm_sq += v * v;
        }
        if norm_sq > 0.0 {
            let norm = libm::sqrt(norm_sq);
            for t in 0..vocab.len() {
                m.set(t, j, m.get(t, j) / norm);
            }
        }
    }
    NonnegMatrix::new(m)
}

/// `classes × documents` binary label matrix.
pub fn encode_labels(docs: &[&Document], classes: &[String]) -> Result<LabelMatrix> {
    let index: BTreeMap<&str, usize> = classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let mut m = Matrix::zeros(classes.len(), docs.len());
    for (j, doc) in docs.iter().enumerate() {
        for label in &doc.labels {
            let i = *index.get(label.as_str()).ok_or_else(|| Error::UnknownLabel(label.clone()))?;
            m.set(i, j, 1.0);
        }
    }
    let single = docs.iter().all(|d| d.labels.len() == 1);
    LabelMatrix::new(m, if single { LabelMode::Single } else { LabelMode::Multi })
}

/// Fully observed data mask and a label mask covering a seeded random
/// `round(fraction · n)` of the document columns.
pub fn make_masks(x: &NonnegMatrix, y: &LabelMatrix, labeled_fraction: f64, seed: u64) -> Result<(Mask, Mask)> {
    if !(labeled_fraction > 0.0 && labeled_fraction <= 1.0) {
        return Err(Error::InvalidParameter { name: "labeled_fraction", reason: "must lie in (0, 1]" });
    }
    let n = y.points();
    let count = libm::floor(labeled_fraction * n as f64 + 0.5) as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut labeled = alloc::vec![false; n];
    for &j in order.iter().take(count) {
        labeled[j] = true;
    }
    let w = Mask::ones(x.rows(), x.cols());
    let l = Mask::from_fn(y.classes(), n, |_, j| labeled[j]);
    Ok((w, l))
}

/// The `per_topic` highest-weight terms of each column of `A`, descending,
/// ties alphabetical.
pub fn top_keywords(a: &NonnegMatrix, terms: &[String], per_topic: usize) -> Result<Vec<Vec<String>>> {
    a.check_shape("A", (terms.len(), a.cols()))?;
    if per_topic > terms.len() {
        return Err(Error::InvalidParameter { name: "per_topic", reason: "exceeds vocabulary size" });
    }
    let topics = (0..a.cols())
        .map(|topic| {
            let mut order: Vec<usize> = (0..terms.len()).collect();
            order.sort_by(|&p, &q| a.get(q, topic).total_cmp(&a.get(p, topic)).then_with(|| terms[p].cmp(&terms[q])));
            order.into_iter().take(per_topic).map(|t| terms[t].clone()).collect()
        })
        .collect();
    Ok(topics)
}
