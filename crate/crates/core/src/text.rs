//! Semantic consistency over supplied embeddings, and a word-list tone classifier
//! whose labels feed the categorical metrics.

use std::collections::HashSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};
use crate::run_matrix::{assemble, enumerate_run_pairs, CategoricalRunMatrix, EmbeddingRunSet, LabelScheme, Record, RunPair};
use crate::scalar::{mean, ordered_sum, Scalar};
use crate::stats::DistributionStats;

pub fn cosine_similarity<T: Scalar>(u: &[T], v: &[T]) -> Result<T> {
    if u.len() != v.len() {
        return Err(AuditError::Shape(format!("vectors of dimension {} and {}", u.len(), v.len())));
    }
    let dot = ordered_sum(u.iter().zip(v).map(|(&a, &b)| a * b));
    let nu = ordered_sum(u.iter().map(|&a| a * a)).sqrt();
    let nv = ordered_sum(v.iter().map(|&b| b * b)).sqrt();
    if nu.is_zero() || nv.is_zero() {
        return Err(AuditError::UndefinedSimilarity);
    }
    Ok((dot / (nu * nv)).max(-T::one()).min(T::one()))
}

/// Mean cosine between two runs over documents both runs produced.
pub fn run_pair_similarity<T: Scalar>(e: &EmbeddingRunSet<T>, pair: RunPair) -> Result<T> {
    let sims = (0..e.n_docs())
        .filter_map(|d| Some((e.get(d, pair.run_a)?, e.get(d, pair.run_b)?)))
        .map(|(a, b)| cosine_similarity(a, b))
        .collect::<Result<Vec<T>>>()?;
    if sims.is_empty() {
        return Err(AuditError::EmptyOverlap { run_a: pair.run_a, run_b: pair.run_b });
    }
    Ok(mean(&sims))
}

/// Mean cosine over all run pairs of one document.
pub fn document_level_similarity<T: Scalar>(e: &EmbeddingRunSet<T>, doc: usize) -> Result<T> {
    let present: Vec<&[T]> = (0..e.n_runs()).filter_map(|r| e.get(doc, r)).collect();
    if present.len() < 2 {
        return Err(AuditError::InsufficientRatings { required: 2, got: present.len() });
    }
    let mut sims = Vec::with_capacity(present.len() * (present.len() - 1) / 2);
    for i in 0..present.len() {
        for j in i + 1..present.len() {
            sims.push(cosine_similarity(present[i], present[j])?);
        }
    }
    Ok(mean(&sims))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySummary<T> {
    pub n_docs: usize,
    pub n_runs: usize,
    pub dim: usize,
    pub run_pair_similarity: DistributionStats<T>,
    pub document_level_similarity: DistributionStats<T>,
}

pub fn summarize_similarity<T: Scalar>(e: &EmbeddingRunSet<T>) -> Result<SimilaritySummary<T>> {
    let pairs = enumerate_run_pairs(e.n_runs())?;
    let by_pair = pairs.par_iter().map(|&p| run_pair_similarity(e, p)).collect::<Result<Vec<T>>>()?;
    let by_doc = (0..e.n_docs()).into_par_iter().map(|d| document_level_similarity(e, d)).collect::<Result<Vec<T>>>()?;
    let empty = || AuditError::IncompleteMatrix("no documents".into());
    Ok(SimilaritySummary {
        n_docs: e.n_docs(),
        n_runs: e.n_runs(),
        dim: e.dim(),
        run_pair_similarity: DistributionStats::from_values(&by_pair).ok_or_else(empty)?,
        document_level_similarity: DistributionStats::from_values(&by_doc).ok_or_else(empty)?,
    })
}

/// Lowercase, split on every run of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tone {
    Negative,
    Neutral,
    Positive,
}

impl Tone {
    pub fn as_str(self) -> &'static str {
        match self {
            Tone::Negative => "Negative",
            Tone::Neutral => "Neutral",
            Tone::Positive => "Positive",
        }
    }

    /// Ordinal scheme Negative < Neutral < Positive.
    pub fn scheme() -> LabelScheme {
        LabelScheme::ordinal(&["Negative", "Neutral", "Positive"]).expect("static scheme")
    }
}

/// Disjoint positive and negative word lists, stored lowercase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToneLexicon {
    positive: HashSet<String>,
    negative: HashSet<String>,
}

impl ToneLexicon {
    pub fn new<I, J, S>(positive: I, negative: J) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        J: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        fn norm<S: AsRef<str>>(it: impl IntoIterator<Item = S>) -> HashSet<String> {
            it.into_iter().map(|w| w.as_ref().trim().to_lowercase()).filter(|w| !w.is_empty()).collect()
        }
        let positive = norm(positive);
        let negative = norm(negative);
        if positive.is_empty() || negative.is_empty() {
            return Err(AuditError::InvalidConfig("both word lists must be non-empty".into()));
        }
        if let Some(w) = positive.intersection(&negative).next() {
            return Err(AuditError::InvalidConfig(format!("{w:?} is in both word lists")));
        }
        Ok(Self { positive, negative })
    }

    /// Two UTF-8 files with one word per line.
    pub fn load(positive: &Path, negative: &Path) -> Result<Self> {
        let read = |p: &Path| std::fs::read_to_string(p).map_err(|source| AuditError::Io { path: p.to_path_buf(), source });
        let (pos, neg) = (read(positive)?, read(negative)?);
        Self::new(pos.lines(), neg.lines())
    }

    pub fn is_positive(&self, word: &str) -> bool {
        self.positive.contains(word)
    }

    pub fn is_negative(&self, word: &str) -> bool {
        self.negative.contains(word)
    }
}

/// Strict majority of lexicon hits; equal counts (including none) are neutral.
pub fn lexicon_tone<S: AsRef<str>>(tokens: &[S], lex: &ToneLexicon) -> Tone {
    let pos = tokens.iter().filter(|t| lex.is_positive(t.as_ref())).count();
    let neg = tokens.iter().filter(|t| lex.is_negative(t.as_ref())).count();
    match pos.cmp(&neg) {
        std::cmp::Ordering::Greater => Tone::Positive,
        std::cmp::Ordering::Less => Tone::Negative,
        std::cmp::Ordering::Equal => Tone::Neutral,
    }
}

/// Classifies every `(doc, run, text)` record into a tone label matrix.
pub fn tone_matrix(records: Vec<Record<String>>, lex: &ToneLexicon) -> Result<CategoricalRunMatrix> {
    let scheme = Tone::scheme();
    let typed = records
        .into_iter()
        .map(|r| {
            let tone = lexicon_tone(&tokenize(&r.value), lex);
            Record { line: r.line, doc_id: r.doc_id, run_id: r.run_id, value: scheme.id(tone.as_str()).expect("tone label") }
        })
        .collect();
    let (doc_ids, run_ids, cells) = assemble(typed)?;
    CategoricalRunMatrix::new(doc_ids, run_ids, cells, scheme)
}
