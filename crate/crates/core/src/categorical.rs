//! Agreement and uncertainty metrics for categorical run matrices.
//!
//! Run-level metrics compare two runs across documents; document-level metrics
//! compare all runs on one document. Both families average the same
//! per-(document, run pair) agreement indicator, so their means coincide on a
//! complete matrix.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::{majority_vote, tied_modes};
use crate::error::{AuditError, Result};
use crate::run_matrix::{enumerate_run_pairs, CategoricalRunMatrix, LabelId, RunPair};
use crate::stats::DistributionStats;

/// A chance-corrected agreement score. `degenerate` is set when expected agreement is 1
/// and the score was fixed by convention (1 if observed agreement is 1, else 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChanceCorrected {
    pub value: f64,
    pub degenerate: bool,
}

fn chance_corrected(observed: f64, expected: f64) -> ChanceCorrected {
    if expected >= 1.0 {
        ChanceCorrected { value: if observed >= 1.0 { 1.0 } else { 0.0 }, degenerate: true }
    } else {
        ChanceCorrected { value: (observed - expected) / (1.0 - expected), degenerate: false }
    }
}

fn label_counts(n_labels: usize, labels: impl IntoIterator<Item = LabelId>) -> Vec<usize> {
    let mut counts = vec![0usize; n_labels];
    for l in labels {
        counts[l.0] += 1;
    }
    counts
}

/// Fleiss' kappa over documents that all carry the same number (≥ 2) of ratings.
pub fn fleiss_kappa(m: &CategoricalRunMatrix) -> Result<ChanceCorrected> {
    if m.n_runs() < 2 {
        return Err(AuditError::InsufficientRuns(m.n_runs()));
    }
    if m.n_docs() == 0 {
        return Err(AuditError::IncompleteMatrix("no documents".into()));
    }
    let k = m.scheme().len();
    let raters = m.row(0).iter().flatten().count();
    if raters < 2 {
        return Err(AuditError::InsufficientRatings { required: 2, got: raters });
    }
    let mut totals = vec![0usize; k];
    let mut p_sum = 0.0;
    for d in 0..m.n_docs() {
        let counts = label_counts(k, m.row(d).iter().flatten().copied());
        let n: usize = counts.iter().sum();
        if n != raters {
            return Err(AuditError::IncompleteMatrix(format!(
                "document {:?} has {n} ratings, others have {raters}",
                m.doc_ids()[d]
            )));
        }
        let same: usize = counts.iter().map(|&c| c * c).sum::<usize>() - n;
        p_sum += same as f64 / (n * (n - 1)) as f64;
        for (t, c) in totals.iter_mut().zip(&counts) {
            *t += c;
        }
    }
    let observed = p_sum / m.n_docs() as f64;
    let all = (raters * m.n_docs()) as f64;
    let expected: f64 = totals.iter().map(|&t| (t as f64 / all).powi(2)).sum();
    Ok(chance_corrected(observed, expected))
}

/// Krippendorff's alpha, nominal metric, via the coincidence matrix. Missing cells are skipped;
/// documents with fewer than two ratings do not contribute.
pub fn krippendorff_alpha(m: &CategoricalRunMatrix) -> Result<f64> {
    let k = m.scheme().len();
    // o[c][c'] accumulated as coincidences; only totals and the diagonal are needed for nominal data.
    let mut diagonal = vec![0.0f64; k];
    let mut marginals = vec![0.0f64; k];
    let mut pairable_units = 0usize;
    for d in 0..m.n_docs() {
        let counts = label_counts(k, m.row(d).iter().flatten().copied());
        let mu: usize = counts.iter().sum();
        if mu < 2 {
            continue;
        }
        pairable_units += 1;
        let w = 1.0 / (mu - 1) as f64;
        for c in 0..k {
            diagonal[c] += (counts[c] * counts[c].saturating_sub(1)) as f64 * w;
            marginals[c] += counts[c] as f64;
        }
    }
    if pairable_units == 0 {
        return Err(AuditError::UndefinedAlpha);
    }
    let n: f64 = marginals.iter().sum();
    let observed_disagreement = n - diagonal.iter().sum::<f64>();
    let expected_disagreement = n * n - marginals.iter().map(|c| c * c).sum::<f64>();
    if expected_disagreement == 0.0 {
        // One category in the whole reliability data: nothing can disagree.
        return Ok(1.0);
    }
    Ok(1.0 - (n - 1.0) * observed_disagreement / expected_disagreement)
}

fn co_rated(m: &CategoricalRunMatrix, pair: RunPair) -> impl Iterator<Item = (LabelId, LabelId)> + '_ {
    (0..m.n_docs()).filter_map(move |d| Some((m.get(d, pair.run_a)?, m.get(d, pair.run_b)?)))
}

/// Cohen's kappa between two runs over the documents both rated.
pub fn cohen_kappa_pair(m: &CategoricalRunMatrix, pair: RunPair) -> Result<ChanceCorrected> {
    let k = m.scheme().len();
    let mut ca = vec![0usize; k];
    let mut cb = vec![0usize; k];
    let (mut n, mut agree) = (0usize, 0usize);
    for (a, b) in co_rated(m, pair) {
        ca[a.0] += 1;
        cb[b.0] += 1;
        n += 1;
        agree += usize::from(a == b);
    }
    if n == 0 {
        return Err(AuditError::EmptyOverlap { run_a: pair.run_a, run_b: pair.run_b });
    }
    let nf = n as f64;
    let expected: f64 = ca.iter().zip(&cb).map(|(&x, &y)| (x as f64 / nf) * (y as f64 / nf)).sum();
    Ok(chance_corrected(agree as f64 / nf, expected))
}

/// Percentage of co-rated documents on which the two runs agree.
pub fn run_pair_agreement(m: &CategoricalRunMatrix, pair: RunPair) -> Result<f64> {
    let (n, agree) = co_rated(m, pair).fold((0usize, 0usize), |(n, a), (x, y)| (n + 1, a + usize::from(x == y)));
    if n == 0 {
        return Err(AuditError::EmptyOverlap { run_a: pair.run_a, run_b: pair.run_b });
    }
    Ok(agree as f64 * 100.0 / n as f64)
}

fn counts_of(labels: &[LabelId]) -> Vec<usize> {
    let k = labels.iter().map(|l| l.0 + 1).max().unwrap_or(0);
    label_counts(k, labels.iter().copied())
}

/// Percentage of run pairs that agree on one document's label.
pub fn document_wise_agreement(labels: &[LabelId]) -> Result<f64> {
    let n = labels.len();
    if n < 2 {
        return Err(AuditError::InsufficientRatings { required: 2, got: n });
    }
    let agreeing: usize = counts_of(labels).iter().map(|&c| c * c.saturating_sub(1) / 2).sum();
    Ok(agreeing as f64 * 100.0 / (n * (n - 1) / 2) as f64)
}

/// Share of runs assigning the modal label, in percent.
pub fn majority_class_strength(labels: &[LabelId]) -> Result<f64> {
    if labels.is_empty() {
        return Err(AuditError::InsufficientRatings { required: 1, got: 0 });
    }
    let top = counts_of(labels).into_iter().max().unwrap_or(0);
    Ok(top as f64 * 100.0 / labels.len() as f64)
}

/// Base-2 Shannon entropy of the empirical label distribution.
pub fn classification_uncertainty(labels: &[LabelId]) -> Result<f64> {
    let n = labels.len();
    if n < 2 {
        return Err(AuditError::InsufficientRatings { required: 2, got: n });
    }
    let h: f64 = counts_of(labels)
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n as f64;
            -p * p.log2()
        })
        .sum();
    // -0.0 for unanimous documents
    Ok(h.max(0.0))
}

/// Per-document metrics of a complete categorical matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentMetrics {
    pub doc_id: String,
    pub majority_label: Option<String>,
    pub document_wise_agreement_pct: f64,
    pub majority_class_strength_pct: f64,
    pub classification_uncertainty: f64,
    pub perfect_agreement: bool,
}

/// Per-run-pair metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunPairMetrics {
    pub run_a: String,
    pub run_b: String,
    pub cohen_kappa: f64,
    pub kappa_degenerate: bool,
    pub agreement_pct: f64,
}

/// A label paired with a percentage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelShare {
    pub label: String,
    pub pct: f64,
}

/// Full categorical metric battery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementSummary {
    pub n_docs: usize,
    pub n_runs: usize,
    pub n_run_pairs: usize,
    /// Documents removed because a run did not label them.
    pub dropped_doc_ids: Vec<String>,
    pub fleiss_kappa: f64,
    pub fleiss_kappa_degenerate: bool,
    /// Computed over every present cell, including dropped documents.
    pub krippendorff_alpha: f64,
    pub run_pair_kappa: DistributionStats<f64>,
    pub run_pair_kappa_degenerate_pairs: usize,
    pub run_pair_agreement_pct: DistributionStats<f64>,
    pub perfect_agreement_pct: f64,
    pub document_wise_agreement_pct: DistributionStats<f64>,
    pub majority_class_strength_pct: DistributionStats<f64>,
    /// Over documents with any disagreement; `None` when every document is unanimous.
    pub classification_uncertainty: Option<DistributionStats<f64>>,
    pub uncertainty_doc_count: usize,
    pub class_distribution: Vec<LabelShare>,
    /// Documents whose majority tie could not be broken; their weight is split across the tied labels.
    pub class_distribution_split_ties: usize,
    /// Only labels that occur somewhere in the matrix.
    pub class_specific_agreement: Vec<LabelShare>,
    /// Documents counted under more than one label in `class_specific_agreement`.
    pub class_specific_overlap_docs: usize,
}

/// Per-document metrics; every document needs at least two labels.
pub fn document_metrics(m: &CategoricalRunMatrix) -> Result<Vec<DocumentMetrics>> {
    (0..m.n_docs())
        .into_par_iter()
        .map(|d| {
            let labels = m.present_labels(d);
            let agreement = document_wise_agreement(&labels)?;
            let majority = match majority_vote(&labels, m.scheme()) {
                Ok(l) => Some(m.scheme().name(l).to_string()),
                Err(AuditError::UnresolvableTie(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(DocumentMetrics {
                doc_id: m.doc_ids()[d].clone(),
                majority_label: majority,
                document_wise_agreement_pct: agreement,
                majority_class_strength_pct: majority_class_strength(&labels)?,
                classification_uncertainty: classification_uncertainty(&labels)?,
                perfect_agreement: agreement == 100.0,
            })
        })
        .collect()
}

/// Kappa and agreement for every run pair, in lexicographic pair order.
pub fn run_pair_metrics(m: &CategoricalRunMatrix) -> Result<Vec<RunPairMetrics>> {
    let pairs = enumerate_run_pairs(m.n_runs())?;
    pairs
        .par_iter()
        .map(|&p| {
            let kappa = cohen_kappa_pair(m, p)?;
            Ok(RunPairMetrics {
                run_a: m.run_ids()[p.run_a].clone(),
                run_b: m.run_ids()[p.run_b].clone(),
                cohen_kappa: kappa.value,
                kappa_degenerate: kappa.degenerate,
                agreement_pct: run_pair_agreement(m, p)?,
            })
        })
        .collect()
}

/// Computes the full battery. Documents with any missing cell are dropped (and listed)
/// for everything except Krippendorff's alpha.
pub fn summarize_categorical(m: &CategoricalRunMatrix) -> Result<AgreementSummary> {
    let alpha = krippendorff_alpha(m)?;
    let (complete, dropped) = m.drop_incomplete();
    if complete.n_docs() == 0 {
        return Err(AuditError::IncompleteMatrix("no document is rated by every run".into()));
    }
    let fleiss = fleiss_kappa(&complete)?;
    let pairs = run_pair_metrics(&complete)?;
    let docs = document_metrics(&complete)?;
    let collect = |f: &dyn Fn(&DocumentMetrics) -> f64| docs.iter().map(f).collect::<Vec<_>>();

    let perfect = docs.iter().filter(|d| d.perfect_agreement).count();
    let uncertain: Vec<f64> =
        docs.iter().filter(|d| !d.perfect_agreement).map(|d| d.classification_uncertainty).collect();

    let scheme = complete.scheme();
    let k = scheme.len();
    let mut majority_weight = vec![0.0f64; k];
    let mut split_ties = 0usize;
    for d in 0..complete.n_docs() {
        let labels = complete.present_labels(d);
        match majority_vote(&labels, scheme) {
            Ok(l) => majority_weight[l.0] += 1.0,
            Err(AuditError::UnresolvableTie(_)) => {
                split_ties += 1;
                let tied = tied_modes(&labels);
                for l in &tied {
                    majority_weight[l.0] += 1.0 / tied.len() as f64;
                }
            }
            Err(e) => return Err(e),
        }
    }
    let n_docs = complete.n_docs() as f64;
    let class_distribution = scheme
        .ids()
        .map(|l| LabelShare { label: scheme.name(l).to_string(), pct: majority_weight[l.0] / n_docs * 100.0 })
        .collect();

    let mut class_sum = vec![0.0f64; k];
    let mut class_docs = vec![0usize; k];
    let mut overlap = 0usize;
    for (d, metrics) in docs.iter().enumerate() {
        let counts = label_counts(k, complete.present_labels(d));
        let present: Vec<usize> = (0..k).filter(|&c| counts[c] > 0).collect();
        overlap += usize::from(present.len() > 1);
        for c in present {
            class_sum[c] += metrics.document_wise_agreement_pct;
            class_docs[c] += 1;
        }
    }
    let class_specific_agreement = scheme
        .ids()
        .filter(|l| class_docs[l.0] > 0)
        .map(|l| LabelShare { label: scheme.name(l).to_string(), pct: class_sum[l.0] / class_docs[l.0] as f64 })
        .collect();

    let kappas: Vec<f64> = pairs.iter().map(|p| p.cohen_kappa).collect();
    let agreements: Vec<f64> = pairs.iter().map(|p| p.agreement_pct).collect();
    Ok(AgreementSummary {
        n_docs: complete.n_docs(),
        n_runs: complete.n_runs(),
        n_run_pairs: pairs.len(),
        dropped_doc_ids: dropped,
        fleiss_kappa: fleiss.value,
        fleiss_kappa_degenerate: fleiss.degenerate,
        krippendorff_alpha: alpha,
        run_pair_kappa: DistributionStats::from_values(&kappas).expect("at least one run pair"),
        run_pair_kappa_degenerate_pairs: pairs.iter().filter(|p| p.kappa_degenerate).count(),
        run_pair_agreement_pct: DistributionStats::from_values(&agreements).expect("at least one run pair"),
        perfect_agreement_pct: perfect as f64 * 100.0 / n_docs,
        document_wise_agreement_pct: DistributionStats::from_values(&collect(&|d| d.document_wise_agreement_pct))
            .expect("at least one document"),
        majority_class_strength_pct: DistributionStats::from_values(&collect(&|d| d.majority_class_strength_pct))
            .expect("at least one document"),
        uncertainty_doc_count: uncertain.len(),
        classification_uncertainty: DistributionStats::from_values(&uncertain),
        class_distribution,
        class_distribution_split_ties: split_ties,
        class_specific_agreement,
        class_specific_overlap_docs: overlap,
    })
}
