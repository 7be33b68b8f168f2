//! Synthetic runs built by sampling `k` of the observed runs and aggregating them
//! (majority vote for labels, arithmetic mean for values), plus the curves and
//! accuracy analysis computed over those synthetic runs.
//!
//! Each synthetic run draws its own subset of runs, shared by all documents, from
//! the stream `(seed, k, synthetic index)`. Subsets are without replacement inside a
//! synthetic run and independent across synthetic runs and across `k` levels.

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::categorical::{classification_uncertainty, document_wise_agreement, majority_class_strength};
use crate::continuous::summarize_continuous;
use crate::error::{AuditError, Result};
use crate::rng::{stream, AuditRng};
use crate::run_matrix::{CategoricalRunMatrix, ContinuousRunMatrix, LabelId, LabelScheme};
use crate::scalar::{mean, ordered_sum, Scalar};
use crate::stats::DistributionStats;

const TAG_OVERSAMPLE: u64 = 0x6f76_6572;

/// How a synthetic cell combines the sampled runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMode {
    MajorityVote,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationConfig {
    /// Runs per synthetic run.
    pub k: usize,
    #[serde(default = "default_n_synthetic")]
    pub n_synthetic: usize,
    pub seed: u64,
    pub mode: AggregationMode,
}

fn default_n_synthetic() -> usize {
    50
}

impl AggregationConfig {
    pub fn new(k: usize, seed: u64, mode: AggregationMode) -> Self {
        Self { k, n_synthetic: default_n_synthetic(), seed, mode }
    }

    fn validate(&self, n_runs: usize, expected: AggregationMode) -> Result<()> {
        if self.mode != expected {
            return Err(AuditError::InvalidConfig(format!("mode {:?} does not apply here", self.mode)));
        }
        if self.k == 0 || self.k > n_runs {
            return Err(AuditError::InvalidConfig(format!("k = {} must lie in 1..={n_runs}", self.k)));
        }
        if self.n_synthetic == 0 {
            return Err(AuditError::InvalidConfig("n_synthetic must be at least 1".into()));
        }
        Ok(())
    }
}

/// Labels sharing the highest count, in label order.
pub fn tied_modes(labels: &[LabelId]) -> Vec<LabelId> {
    let k = labels.iter().map(|l| l.0 + 1).max().unwrap_or(0);
    let mut counts = vec![0usize; k];
    for l in labels {
        counts[l.0] += 1;
    }
    let top = counts.iter().copied().max().unwrap_or(0);
    (0..k).filter(|&c| top > 0 && counts[c] == top).map(LabelId).collect()
}

/// Majority label. Ties go to the median ordinal code of all the labels, rounded up;
/// nominal schemes fall back to their configured tie-break order.
pub fn majority_vote(labels: &[LabelId], scheme: &LabelScheme) -> Result<LabelId> {
    let modes = tied_modes(labels);
    match modes.len() {
        0 => return Err(AuditError::InsufficientRatings { required: 1, got: 0 }),
        1 => return Ok(modes[0]),
        _ => {}
    }
    if scheme.is_ordinal() {
        let mut codes: Vec<usize> = labels.iter().map(|&l| scheme.ordinal_code(l).expect("ordinal scheme")).collect();
        codes.sort_unstable();
        let n = codes.len();
        let median_up = if n % 2 == 1 { codes[n / 2] } else { (codes[n / 2 - 1] + codes[n / 2]).div_ceil(2) };
        return Ok(scheme.label_for_code(median_up).expect("code within scheme"));
    }
    if let Some(order) = scheme.tie_break_order() {
        if let Some(&l) = order.iter().find(|l| modes.contains(l)) {
            return Ok(l);
        }
    }
    Err(AuditError::UnresolvableTie(modes.iter().map(|&l| scheme.name(l).to_string()).collect()))
}

/// `k` distinct run indices, uniform without replacement, ascending.
pub fn sample_subset(rng: &mut AuditRng, n_runs: usize, k: usize) -> Vec<usize> {
    let mut idx = rand::seq::index::sample(rng, n_runs, k).into_vec();
    idx.sort_unstable();
    idx
}

/// Seeded form of [`sample_subset`].
pub fn sample_run_subset(n_runs: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k == 0 || k > n_runs {
        return Err(AuditError::InvalidConfig(format!("cannot draw {k} of {n_runs} runs")));
    }
    Ok(sample_subset(&mut stream(seed, &[]), n_runs, k))
}

fn synthetic_subsets(n_runs: usize, cfg: &AggregationConfig) -> Vec<Vec<usize>> {
    (0..cfg.n_synthetic)
        .map(|s| sample_subset(&mut stream(cfg.seed, &[cfg.k as u64, s as u64]), n_runs, cfg.k))
        .collect()
}

fn synthetic_run_ids(n: usize) -> Vec<String> {
    (0..n).map(|s| format!("s{}", s + 1)).collect()
}

/// Documents × `n_synthetic` matrix of majority votes over sampled runs.
pub fn build_synthetic_categorical(m: &CategoricalRunMatrix, cfg: &AggregationConfig) -> Result<CategoricalRunMatrix> {
    cfg.validate(m.n_runs(), AggregationMode::MajorityVote)?;
    if !m.is_complete() {
        return Err(AuditError::IncompleteMatrix("synthetic runs need a complete matrix".into()));
    }
    let subsets = synthetic_subsets(m.n_runs(), cfg);
    let columns: Vec<Vec<LabelId>> = subsets
        .par_iter()
        .map(|subset| {
            (0..m.n_docs())
                .map(|d| {
                    let labels: Vec<LabelId> = subset.iter().map(|&r| m.get(d, r).expect("complete")).collect();
                    majority_vote(&labels, m.scheme())
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut cells = Vec::with_capacity(m.n_docs() * cfg.n_synthetic);
    for d in 0..m.n_docs() {
        cells.extend(columns.iter().map(|c| Some(c[d])));
    }
    CategoricalRunMatrix::new(m.doc_ids().to_vec(), synthetic_run_ids(cfg.n_synthetic), cells, m.scheme().clone())
}

/// Documents × `n_synthetic` matrix of means over sampled runs.
pub fn build_synthetic_continuous<T: Scalar>(
    m: &ContinuousRunMatrix<T>,
    cfg: &AggregationConfig,
) -> Result<ContinuousRunMatrix<T>> {
    cfg.validate(m.n_runs(), AggregationMode::Mean)?;
    m.require_complete()?;
    let subsets = synthetic_subsets(m.n_runs(), cfg);
    let kf = T::of_usize(cfg.k);
    let columns: Vec<Vec<T>> = subsets
        .par_iter()
        .map(|subset| {
            (0..m.n_docs())
                .map(|d| ordered_sum(subset.iter().map(|&r| m.get(d, r).expect("complete"))) / kf)
                .collect()
        })
        .collect();
    let mut cells = Vec::with_capacity(m.n_docs() * cfg.n_synthetic);
    for d in 0..m.n_docs() {
        cells.extend(columns.iter().map(|c| Some(c[d])));
    }
    ContinuousRunMatrix::new(m.doc_ids().to_vec(), synthetic_run_ids(cfg.n_synthetic), cells, m.unit())
}

/// Indices of documents on which the runs do not all agree.
pub fn disagreement_docs(m: &CategoricalRunMatrix) -> Vec<usize> {
    (0..m.n_docs())
        .filter(|&d| {
            let labels = m.present_labels(d);
            labels.iter().any(|l| *l != labels[0])
        })
        .collect()
}

/// Document-level consistency of one categorical aggregation level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalCurvePoint {
    pub k: usize,
    pub n_docs: usize,
    pub mean_majority_strength_pct: f64,
    /// Mean entropy over documents that still disagree; `None` when none do.
    pub mean_uncertainty: Option<f64>,
    pub perfect_agreement_pct: f64,
    pub mean_document_wise_agreement_pct: f64,
}

/// Run-level consistency of one continuous aggregation level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousCurvePoint<T> {
    pub k: usize,
    /// `None` where the coefficient is undefined on every synthetic run pair.
    pub icc2: Option<T>,
    pub ccc_mean: Option<T>,
    pub pearson_mean: Option<T>,
    pub spearman_mean: Option<T>,
    pub run_pair_mard_mean: T,
    pub document_wise_mard_mean: T,
    pub documents_identical_pct: T,
}

/// Document-level metrics of a complete matrix, as reported on aggregation curves.
pub fn categorical_point(k: usize, m: &CategoricalRunMatrix) -> Result<CategoricalCurvePoint> {
    let mut strength = Vec::with_capacity(m.n_docs());
    let mut agreement = Vec::with_capacity(m.n_docs());
    let mut uncertainty = Vec::new();
    for d in 0..m.n_docs() {
        let labels = m.present_labels(d);
        let a = document_wise_agreement(&labels)?;
        strength.push(majority_class_strength(&labels)?);
        if a < 100.0 {
            uncertainty.push(classification_uncertainty(&labels)?);
        }
        agreement.push(a);
    }
    if m.n_docs() == 0 {
        return Err(AuditError::IncompleteMatrix("no documents to aggregate".into()));
    }
    let perfect = agreement.iter().filter(|&&a| a == 100.0).count();
    Ok(CategoricalCurvePoint {
        k,
        n_docs: m.n_docs(),
        mean_majority_strength_pct: mean(&strength),
        mean_uncertainty: (!uncertainty.is_empty()).then(|| mean(&uncertainty)),
        perfect_agreement_pct: perfect as f64 * 100.0 / m.n_docs() as f64,
        mean_document_wise_agreement_pct: mean(&agreement),
    })
}

fn check_k_values(k_values: &[usize], n_runs: usize) -> Result<()> {
    if k_values.is_empty() {
        return Err(AuditError::InvalidConfig("empty k range".into()));
    }
    match k_values.iter().find(|&&k| k == 0 || k > n_runs) {
        Some(k) => Err(AuditError::InvalidConfig(format!("k = {k} outside 1..={n_runs}"))),
        None => Ok(()),
    }
}

/// Aggregation curve for labels. With `restrict_disagreement`, only documents on which
/// the observed runs disagree are kept.
pub fn aggregation_curve_categorical(
    m: &CategoricalRunMatrix,
    k_values: &[usize],
    n_synthetic: usize,
    seed: u64,
    restrict_disagreement: bool,
) -> Result<Vec<CategoricalCurvePoint>> {
    check_k_values(k_values, m.n_runs())?;
    let base = if restrict_disagreement { m.select_docs(&disagreement_docs(m)) } else { m.clone() };
    k_values
        .iter()
        .map(|&k| {
            let cfg = AggregationConfig { k, n_synthetic, seed, mode: AggregationMode::MajorityVote };
            categorical_point(k, &build_synthetic_categorical(&base, &cfg)?)
        })
        .collect()
}

/// Aggregation curve for values, averaging sampled runs.
pub fn aggregation_curve_continuous<T: Scalar>(
    m: &ContinuousRunMatrix<T>,
    k_values: &[usize],
    n_synthetic: usize,
    seed: u64,
) -> Result<Vec<ContinuousCurvePoint<T>>> {
    check_k_values(k_values, m.n_runs())?;
    k_values
        .iter()
        .map(|&k| {
            let cfg = AggregationConfig { k, n_synthetic, seed, mode: AggregationMode::Mean };
            let s = summarize_continuous(&build_synthetic_continuous(m, &cfg)?)?;
            Ok(ContinuousCurvePoint {
                k,
                icc2: s.icc2,
                ccc_mean: s.concordance.map(|d| d.mean),
                pearson_mean: s.pearson.map(|d| d.mean),
                spearman_mean: s.spearman.map(|d| d.mean),
                run_pair_mard_mean: s.run_pair_mard_pct.mean,
                document_wise_mard_mean: s.document_wise_mard_pct.mean,
                documents_identical_pct: s.documents_identical_pct,
            })
        })
        .collect()
}

/// Support-weighted mean of per-class F1 scores, classes taken from the truth labels.
pub fn weighted_f1(pred: &[LabelId], truth: &[LabelId]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(AuditError::Shape(format!("{} predictions for {} truth labels", pred.len(), truth.len())));
    }
    if truth.is_empty() {
        return Err(AuditError::InsufficientRatings { required: 1, got: 0 });
    }
    let k = pred.iter().chain(truth).map(|l| l.0 + 1).max().unwrap_or(0);
    let (mut tp, mut fp, mut support) = (vec![0usize; k], vec![0usize; k], vec![0usize; k]);
    for (&p, &t) in pred.iter().zip(truth) {
        support[t.0] += 1;
        if p == t {
            tp[p.0] += 1;
        } else {
            fp[p.0] += 1;
        }
    }
    let mut total = 0.0;
    for c in 0..k {
        if support[c] == 0 {
            continue;
        }
        let predicted = tp[c] + fp[c];
        let precision = if predicted == 0 { 0.0 } else { tp[c] as f64 / predicted as f64 };
        let recall = tp[c] as f64 / support[c] as f64;
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        total += f1 * support[c] as f64;
    }
    Ok(total / truth.len() as f64)
}

/// Balances classes by duplicating minority-class items drawn uniformly with replacement.
/// Returns item indices: every original index once, then the duplicates class by class.
pub fn random_oversample(truth: &[LabelId], seed: u64) -> Result<Vec<usize>> {
    let mut by_class: Vec<Vec<usize>> = Vec::new();
    for (i, l) in truth.iter().enumerate() {
        if by_class.len() <= l.0 {
            by_class.resize_with(l.0 + 1, Vec::new);
        }
        by_class[l.0].push(i);
    }
    let present = by_class.iter().filter(|c| !c.is_empty()).count();
    if present < 2 {
        return Err(AuditError::InvalidConfig(format!("oversampling needs 2 or more classes, found {present}")));
    }
    let target = by_class.iter().map(Vec::len).max().unwrap_or(0);
    let mut rng = stream(seed, &[TAG_OVERSAMPLE]);
    let mut out: Vec<usize> = (0..truth.len()).collect();
    for members in by_class.iter().filter(|c| !c.is_empty()) {
        for _ in members.len()..target {
            out.push(members[rng.random_range(0..members.len())]);
        }
    }
    Ok(out)
}

/// Ground-truth labels keyed by document id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TruthLabels(pub HashMap<String, LabelId>);

impl TruthLabels {
    /// CSV `doc_id,label`, or JSONL with the same keys when the extension is `.jsonl`.
    pub fn load(path: &Path, scheme: &LabelScheme) -> Result<Self> {
        if matches!(path.extension().and_then(|e| e.to_str()), Some("jsonl" | "ndjson")) {
            return Self::load_jsonl(path, scheme);
        }
        let file = std::fs::File::open(path).map_err(|source| AuditError::Io { path: path.to_path_buf(), source })?;
        let mut rdr = csv::Reader::from_reader(std::io::BufReader::new(file));
        let headers = rdr.headers().map_err(|e| AuditError::Parse { line: 1, message: e.to_string() })?.clone();
        let col = |n: &str| {
            headers.iter().position(|h| h.trim() == n).ok_or_else(|| AuditError::Parse {
                line: 1,
                message: format!("truth header must contain `doc_id,label`; missing {n:?}"),
            })
        };
        let (di, li) = (col("doc_id")?, col("label")?);
        let mut map = HashMap::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| AuditError::Parse { line: e.position().map_or(0, |p| p.line()), message: e.to_string() })?;
            let line = rec.position().map_or(0, |p| p.line());
            let (doc, label) = match (rec.get(di), rec.get(li)) {
                (Some(d), Some(l)) => (d.to_string(), l.to_string()),
                _ => return Err(AuditError::Parse { line, message: "malformed row".into() }),
            };
            let id = scheme.id(&label).ok_or(AuditError::SchemaViolation { line, label })?;
            if map.insert(doc.clone(), id).is_some() {
                return Err(AuditError::DuplicateRecord { line, doc_id: doc, run_id: String::new() });
            }
        }
        Ok(Self(map))
    }

    fn load_jsonl(path: &Path, scheme: &LabelScheme) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| AuditError::Io { path: path.to_path_buf(), source })?;
        let mut map = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i as u64 + 1;
            if line.trim().is_empty() {
                continue;
            }
            let v: serde_json::Value =
                serde_json::from_str(line).map_err(|e| AuditError::Parse { line: line_no, message: e.to_string() })?;
            let (Some(doc), Some(label)) =
                (v.get("doc_id").and_then(|x| x.as_str()), v.get("label").and_then(|x| x.as_str()))
            else {
                return Err(AuditError::Parse { line: line_no, message: "record must carry doc_id and label".into() });
            };
            let id = scheme.id(label).ok_or_else(|| AuditError::SchemaViolation { line: line_no, label: label.into() })?;
            if map.insert(doc.to_string(), id).is_some() {
                return Err(AuditError::DuplicateRecord { line: line_no, doc_id: doc.into(), run_id: String::new() });
            }
        }
        Ok(Self(map))
    }
}

/// Weighted-F1 distribution across synthetic runs at one aggregation level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyPoint {
    pub k: usize,
    pub n_docs: usize,
    pub n_balanced: usize,
    pub f1: DistributionStats<f64>,
    pub f1_values: Vec<f64>,
}

/// Weighted F1 of synthetic runs against truth labels for each `k`. Scored documents are
/// those with a truth label (optionally only those where the observed runs disagree);
/// classes are balanced once by random duplication and the same balanced multiset is
/// scored for every synthetic run.
pub fn accuracy_curve(
    m: &CategoricalRunMatrix,
    truth: &TruthLabels,
    k_values: &[usize],
    n_synthetic: usize,
    seed: u64,
    restrict_disagreement: bool,
) -> Result<Vec<AccuracyPoint>> {
    check_k_values(k_values, m.n_runs())?;
    let mut unknown: Vec<String> = truth.0.keys().filter(|d| m.doc_index(d).is_none()).cloned().collect();
    if !unknown.is_empty() {
        unknown.sort();
        return Err(AuditError::Join(unknown));
    }
    let disagreeing = disagreement_docs(m);
    let docs: Vec<usize> = (0..m.n_docs())
        .filter(|d| truth.0.contains_key(&m.doc_ids()[*d]))
        .filter(|d| !restrict_disagreement || disagreeing.binary_search(d).is_ok())
        .collect();
    if docs.is_empty() {
        return Err(AuditError::InvalidConfig("no document carries a truth label".into()));
    }
    let sub = m.select_docs(&docs);
    let truth_labels: Vec<LabelId> = sub.doc_ids().iter().map(|d| truth.0[d]).collect();
    let balanced = random_oversample(&truth_labels, seed)?;
    let balanced_truth: Vec<LabelId> = balanced.iter().map(|&i| truth_labels[i]).collect();
    k_values
        .iter()
        .map(|&k| {
            let cfg = AggregationConfig { k, n_synthetic, seed, mode: AggregationMode::MajorityVote };
            let synth = build_synthetic_categorical(&sub, &cfg)?;
            let values = (0..synth.n_runs())
                .map(|s| {
                    let pred: Vec<LabelId> = balanced.iter().map(|&i| synth.get(i, s).expect("complete")).collect();
                    weighted_f1(&pred, &balanced_truth)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(AccuracyPoint {
                k,
                n_docs: sub.n_docs(),
                n_balanced: balanced.len(),
                f1: DistributionStats::from_values(&values).expect("n_synthetic >= 1"),
                f1_values: values,
            })
        })
        .collect()
}
