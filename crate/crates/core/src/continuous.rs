//! Consistency metrics for real-valued outputs: ICC(2,1), pairwise concordance,
//! Pearson and Spearman correlation, and mean absolute relative difference (MARD).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};
use crate::run_matrix::{enumerate_run_pairs, ContinuousRunMatrix, RunPair};
use crate::scalar::{mean, ordered_sum, Scalar};
use crate::stats::DistributionStats;

/// ICC(2,1): two-way random effects, absolute agreement, single measurement.
///
/// `(MSR - MSE) / (MSR + (k-1) MSE + k (MSC - MSE) / n)` with documents as rows and runs as columns.
pub fn icc2<T: Scalar>(m: &ContinuousRunMatrix<T>) -> Result<T> {
    m.require_complete()?;
    let (n, k) = (m.n_docs(), m.n_runs());
    if n < 2 || k < 2 {
        return Err(AuditError::UndefinedIcc(format!("need at least 2 documents and 2 runs, got {n} x {k}")));
    }
    let rows: Vec<Vec<T>> = (0..n).map(|d| m.complete_row(d)).collect::<Result<_>>()?;
    let (nf, kf) = (T::of_usize(n), T::of_usize(k));
    let grand = ordered_sum(rows.iter().flatten().copied()) / (nf * kf);
    let row_means: Vec<T> = rows.iter().map(|r| mean(r)).collect();
    let col_means: Vec<T> = (0..k).map(|j| ordered_sum(rows.iter().map(|r| r[j])) / nf).collect();

    let ss_total = ordered_sum(rows.iter().flatten().map(|&x| (x - grand) * (x - grand)));
    let ss_rows = kf * ordered_sum(row_means.iter().map(|&r| (r - grand) * (r - grand)));
    let ss_cols = nf * ordered_sum(col_means.iter().map(|&c| (c - grand) * (c - grand)));
    let ss_error = (ss_total - ss_rows - ss_cols).max(T::zero());

    let one = T::one();
    let msr = ss_rows / (nf - one);
    let msc = ss_cols / (kf - one);
    let mse = ss_error / ((nf - one) * (kf - one));
    let denom = msr + (kf - one) * mse + kf * (msc - mse) / nf;
    if ss_total == T::zero() || denom == T::zero() {
        return Err(AuditError::UndefinedIcc("zero total variance".into()));
    }
    Ok((msr - mse) / denom)
}

fn co_rated_values<T: Scalar>(m: &ContinuousRunMatrix<T>, pair: RunPair) -> (Vec<T>, Vec<T>) {
    (0..m.n_docs()).filter_map(|d| Some((m.get(d, pair.run_a)?, m.get(d, pair.run_b)?))).unzip()
}

fn need_two<T>(x: &[T], y: &[T]) -> Result<()> {
    if x.len() != y.len() {
        return Err(AuditError::Shape(format!("paired samples of length {} and {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(AuditError::UndefinedCorrelation(format!("{} paired observations", x.len())));
    }
    Ok(())
}

/// Biased (n-denominator) means, variances and covariance.
fn moments<T: Scalar>(x: &[T], y: &[T]) -> (T, T, T, T, T) {
    let (mx, my) = (mean(x), mean(y));
    let n = T::of_usize(x.len());
    let sxx = ordered_sum(x.iter().map(|&a| (a - mx) * (a - mx))) / n;
    let syy = ordered_sum(y.iter().map(|&b| (b - my) * (b - my))) / n;
    let sxy = ordered_sum(x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my))) / n;
    (mx, my, sxx, syy, sxy)
}

/// Lin's concordance correlation coefficient with biased moments.
pub fn concordance<T: Scalar>(x: &[T], y: &[T]) -> Result<T> {
    need_two(x, y)?;
    let (mx, my, sxx, syy, sxy) = moments(x, y);
    let denom = sxx + syy + (mx - my) * (mx - my);
    if denom == T::zero() {
        return Err(AuditError::UndefinedCorrelation("both samples constant and equal".into()));
    }
    Ok((sxy + sxy) / denom)
}

/// Pearson product-moment correlation.
pub fn pearson<T: Scalar>(x: &[T], y: &[T]) -> Result<T> {
    need_two(x, y)?;
    let (_, _, sxx, syy, sxy) = moments(x, y);
    if sxx == T::zero() || syy == T::zero() {
        return Err(AuditError::UndefinedCorrelation("constant sample".into()));
    }
    let r = sxy / (sxx * syy).sqrt();
    Ok(r.max(-T::one()).min(T::one()))
}

/// 1-based ranks with ties given their mean rank.
pub fn average_ranks<T: Scalar>(x: &[T]) -> Vec<T> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).expect("ranking NaN"));
    let mut ranks = vec![T::zero(); x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        // positions i..=j share rank (i+1 + j+1)/2
        let r = T::of((i + j) as f64 / 2.0 + 1.0);
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson over average ranks.
pub fn spearman<T: Scalar>(x: &[T], y: &[T]) -> Result<T> {
    need_two(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

pub fn concordance_pair<T: Scalar>(m: &ContinuousRunMatrix<T>, pair: RunPair) -> Result<T> {
    let (x, y) = co_rated_values(m, pair);
    concordance(&x, &y)
}

pub fn pearson_pair<T: Scalar>(m: &ContinuousRunMatrix<T>, pair: RunPair) -> Result<T> {
    let (x, y) = co_rated_values(m, pair);
    pearson(&x, &y)
}

pub fn spearman_pair<T: Scalar>(m: &ContinuousRunMatrix<T>, pair: RunPair) -> Result<T> {
    let (x, y) = co_rated_values(m, pair);
    spearman(&x, &y)
}

/// `|a - b| / ((|a| + |b|) / 2) * 100`, defined as 0 when both are zero. Range [0, 200].
pub fn relative_difference<T: Scalar>(a: T, b: T) -> T {
    if a == b {
        return T::zero();
    }
    let scale = (a.abs() + b.abs()) / T::of(2.0);
    (a - b).abs() / scale * T::hundred()
}

/// Mean relative difference between two runs over co-rated documents.
pub fn run_pair_mard<T: Scalar>(m: &ContinuousRunMatrix<T>, pair: RunPair) -> Result<T> {
    let (x, y) = co_rated_values(m, pair);
    if x.is_empty() {
        return Err(AuditError::EmptyOverlap { run_a: pair.run_a, run_b: pair.run_b });
    }
    let diffs: Vec<T> = x.iter().zip(&y).map(|(&a, &b)| relative_difference(a, b)).collect();
    Ok(mean(&diffs))
}

/// Mean relative difference over all pairs of one document's values.
pub fn document_wise_mard<T: Scalar>(values: &[T]) -> Result<T> {
    if values.len() < 2 {
        return Err(AuditError::InsufficientRatings { required: 2, got: values.len() });
    }
    let mut diffs = Vec::with_capacity(values.len() * (values.len() - 1) / 2);
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            diffs.push(relative_difference(values[i], values[j]));
        }
    }
    Ok(mean(&diffs))
}

/// Percentage of documents whose values are exactly equal across all runs.
pub fn documents_identical_pct<T: Scalar>(m: &ContinuousRunMatrix<T>) -> Result<T> {
    m.require_complete()?;
    if m.n_docs() == 0 {
        return Err(AuditError::IncompleteMatrix("no documents".into()));
    }
    let identical = (0..m.n_docs())
        .filter(|&d| {
            let row = m.row(d);
            row.iter().all(|v| *v == row[0])
        })
        .count();
    Ok(T::of_usize(identical) * T::hundred() / T::of_usize(m.n_docs()))
}

/// Per-pair continuous metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousPairMetrics<T> {
    pub run_a: String,
    pub run_b: String,
    /// `None` when undefined on this pair (constant runs).
    pub concordance: Option<T>,
    pub pearson: Option<T>,
    pub spearman: Option<T>,
    pub mard_pct: T,
}

/// Per-document continuous metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousDocMetrics<T> {
    pub doc_id: String,
    pub mean: T,
    pub identical: bool,
    pub mard_pct: T,
}

/// Full continuous metric battery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousSummary<T> {
    pub n_docs: usize,
    pub n_runs: usize,
    pub n_run_pairs: usize,
    pub unit: String,
    /// `None` when every value in the matrix is equal.
    pub icc2: Option<T>,
    /// Over pairs where the coefficient is defined; `None` if it is defined on none.
    pub concordance: Option<DistributionStats<T>>,
    pub pearson: Option<DistributionStats<T>>,
    pub spearman: Option<DistributionStats<T>>,
    /// Pairs on which Pearson or Spearman is undefined.
    pub undefined_correlation_pairs: usize,
    pub run_pair_mard_pct: DistributionStats<T>,
    pub documents_identical_pct: T,
    pub document_wise_mard_pct: DistributionStats<T>,
}

/// Maps the "undefined" outcomes of a coefficient to `None`, keeping real errors.
pub(crate) fn defined<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(AuditError::UndefinedCorrelation(_) | AuditError::UndefinedIcc(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn pair_metrics<T: Scalar>(m: &ContinuousRunMatrix<T>) -> Result<Vec<ContinuousPairMetrics<T>>> {
    let pairs = enumerate_run_pairs(m.n_runs())?;
    pairs
        .par_iter()
        .map(|&p| {
            let (x, y) = co_rated_values(m, p);
            Ok(ContinuousPairMetrics {
                run_a: m.run_ids()[p.run_a].clone(),
                run_b: m.run_ids()[p.run_b].clone(),
                concordance: defined(concordance(&x, &y))?,
                pearson: defined(pearson(&x, &y))?,
                spearman: defined(spearman(&x, &y))?,
                mard_pct: run_pair_mard(m, p)?,
            })
        })
        .collect()
}

pub fn doc_metrics<T: Scalar>(m: &ContinuousRunMatrix<T>) -> Result<Vec<ContinuousDocMetrics<T>>> {
    (0..m.n_docs())
        .into_par_iter()
        .map(|d| {
            let row = m.complete_row(d)?;
            Ok(ContinuousDocMetrics {
                doc_id: m.doc_ids()[d].clone(),
                mean: mean(&row),
                identical: row.iter().all(|&v| v == row[0]),
                mard_pct: document_wise_mard(&row)?,
            })
        })
        .collect()
}

/// Computes the battery over a complete matrix.
pub fn summarize_continuous<T: Scalar>(m: &ContinuousRunMatrix<T>) -> Result<ContinuousSummary<T>> {
    m.require_complete()?;
    let pairs = pair_metrics(m)?;
    let docs = doc_metrics(m)?;
    let dist = |v: Vec<T>| DistributionStats::from_values(&v).expect("non-empty sample");
    let partial = |f: fn(&ContinuousPairMetrics<T>) -> Option<T>| {
        DistributionStats::from_values(&pairs.iter().filter_map(f).collect::<Vec<_>>())
    };
    Ok(ContinuousSummary {
        n_docs: m.n_docs(),
        n_runs: m.n_runs(),
        n_run_pairs: pairs.len(),
        unit: m.unit().to_string(),
        icc2: defined(icc2(m))?,
        concordance: partial(|p| p.concordance),
        pearson: partial(|p| p.pearson),
        spearman: partial(|p| p.spearman),
        undefined_correlation_pairs: pairs.iter().filter(|p| p.pearson.is_none() || p.spearman.is_none()).count(),
        run_pair_mard_pct: dist(pairs.iter().map(|p| p.mard_pct).collect()),
        documents_identical_pct: documents_identical_pct(m)?,
        document_wise_mard_pct: dist(docs.iter().map(|d| d.mard_pct).collect()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const PAIR: RunPair = RunPair { run_a: 0, run_b: 1 };

    fn mat(rows: &[Vec<f64>]) -> ContinuousRunMatrix<f64> {
        ContinuousRunMatrix::from_rows(rows, "words").unwrap()
    }

    /// Two-way ANOVA with SSE from explicit interaction residuals.
    fn icc_oracle(rows: &[Vec<f64>]) -> f64 {
        let (n, k) = (rows.len() as f64, rows[0].len() as f64);
        let g: f64 = rows.iter().flatten().sum::<f64>() / (n * k);
        let r: Vec<f64> = rows.iter().map(|row| row.iter().sum::<f64>() / k).collect();
        let c: Vec<f64> = (0..rows[0].len()).map(|j| rows.iter().map(|row| row[j]).sum::<f64>() / n).collect();
        let msr = k * r.iter().map(|x| (x - g).powi(2)).sum::<f64>() / (n - 1.0);
        let msc = n * c.iter().map(|x| (x - g).powi(2)).sum::<f64>() / (k - 1.0);
        let mut sse = 0.0;
        for (i, row) in rows.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                sse += (x - r[i] - c[j] + g).powi(2);
            }
        }
        let mse = sse / ((n - 1.0) * (k - 1.0));
        (msr - mse) / (msr + (k - 1.0) * mse + k * (msc - mse) / n)
    }

    #[test]
    fn icc_examples() {
        assert_abs_diff_eq!(icc2(&mat(&[vec![1.0, 2.0], vec![3.0, 4.0]])).unwrap(), 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(icc2(&mat(&[vec![1.0, 1.0], vec![5.0, 5.0], vec![2.0, 2.0]])).unwrap(), 1.0, epsilon = 1e-12);
        let shifted = vec![vec![10.0, 11.0, 13.0], vec![20.0, 21.5, 22.0], vec![5.0, 7.0, 8.0], vec![9.0, 9.0, 12.0]];
        let v = icc2(&mat(&shifted)).unwrap();
        assert_abs_diff_eq!(v, icc_oracle(&shifted), epsilon = 1e-9);
        assert!(v < 1.0);
        assert!(matches!(icc2(&mat(&[vec![3.0, 3.0], vec![3.0, 3.0]])), Err(AuditError::UndefinedIcc(_))));
        assert!(icc2(&mat(&[vec![1.0, 2.0]])).is_err());
    }

    #[test]
    fn icc_rejects_missing_cells() {
        let m = ContinuousRunMatrix::new(
            vec!["a".into(), "b".into()],
            vec!["1".into(), "2".into()],
            vec![Some(1.0), None, Some(2.0), Some(3.0)],
            "",
        )
        .unwrap();
        assert!(matches!(icc2(&m), Err(AuditError::IncompleteMatrix(_))));
    }

    #[test]
    fn icc_is_shift_invariant_globally_but_not_per_run() {
        let rows = vec![vec![10.0, 11.0], vec![20.0, 19.0], vec![5.0, 7.0], vec![9.0, 9.5]];
        let base = icc2(&mat(&rows)).unwrap();
        let all: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v + 100.0).collect()).collect();
        assert_abs_diff_eq!(icc2(&mat(&all)).unwrap(), base, epsilon = 1e-9);
        let per_run: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[0], r[1] + 3.0]).collect();
        assert!(icc2(&mat(&per_run)).unwrap() < base);
    }

    #[test]
    fn concordance_examples() {
        assert_abs_diff_eq!(concordance(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]).unwrap(), 4.0 / 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(concordance(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(concordance(&[-1.0, 0.0, 1.0], &[1.0, 0.0, -1.0]).unwrap(), -1.0, epsilon = 1e-15);
        let x = [1.0, 4.0, 2.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 3.0).collect();
        assert_abs_diff_eq!(pearson(&x, &y).unwrap(), 1.0, epsilon = 1e-12);
        assert!(concordance(&x, &y).unwrap() < 1.0);
        assert!(matches!(concordance(&[2.0, 2.0], &[2.0, 2.0]), Err(AuditError::UndefinedCorrelation(_))));
    }

    #[test]
    fn spearman_examples() {
        assert_abs_diff_eq!(spearman(&[1.0, 2.0, 3.0, 4.0], &[9.0, 7.0, 5.0, 1.0]).unwrap(), -1.0, epsilon = 1e-12);
        // ranks (1.5,1.5,3) vs (1,2.5,2.5): centred (-.5,-.5,1) . (-1,.5,.5) = .75; norms 1.5 each
        assert_abs_diff_eq!(spearman(&[1.0, 1.0, 2.0], &[1.0, 2.0, 2.0]).unwrap(), 0.5, epsilon = 1e-12);
        assert!(matches!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(AuditError::UndefinedCorrelation(_))));
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn relative_difference_examples() {
        assert_abs_diff_eq!(relative_difference(110.0, 90.0), 20.0, epsilon = 1e-12);
        assert_eq!(relative_difference(7.5, 7.5), 0.0);
        assert_eq!(relative_difference(0.0, 0.0), 0.0);
        assert_abs_diff_eq!(relative_difference(1.0, -1.0), 200.0, epsilon = 1e-12);
    }

    #[test]
    fn mard_examples() {
        assert_eq!(run_pair_mard(&mat(&[vec![3.0, 3.0], vec![4.0, 4.0]]), PAIR).unwrap(), 0.0);
        assert_abs_diff_eq!(run_pair_mard(&mat(&[vec![110.0, 90.0], vec![5.0, 5.0]]), PAIR).unwrap(), 10.0, epsilon = 1e-12);
        assert_eq!(run_pair_mard(&mat(&[vec![0.0, 0.0], vec![0.0, 0.0]]), PAIR).unwrap(), 0.0);
        assert_eq!(document_wise_mard(&[100.0, 100.0, 100.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(document_wise_mard(&[110.0, 90.0]).unwrap(), 20.0, epsilon = 1e-12);
        let three = (10.0 / 105.0 * 100.0 + 10.0 / 95.0 * 100.0 + 20.0) / 3.0;
        assert_abs_diff_eq!(document_wise_mard(&[100.0f64, 110.0, 90.0]).unwrap(), three, epsilon = 1e-12);
        assert!((document_wise_mard(&[100.0f64, 110.0, 90.0]).unwrap() - 13.35).abs() < 0.01);
        assert!(document_wise_mard(&[1.0]).is_err());
    }

    #[test]
    fn identical_percentage() {
        let mut rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, i as f64 + 1.0]).collect();
        for r in rows.iter_mut().take(3) {
            r[1] = r[0];
        }
        assert_abs_diff_eq!(documents_identical_pct(&mat(&rows)).unwrap(), 30.0, epsilon = 1e-12);
        assert_eq!(documents_identical_pct(&mat(&[vec![1.0, 1.0]])).unwrap(), 100.0);
        assert_eq!(documents_identical_pct(&mat(&[vec![1.0, 2.0]])).unwrap(), 0.0);
    }

    #[test]
    fn identical_matrix_summary() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 * 1.5 + 1.0; 4]).collect();
        let s = summarize_continuous(&mat(&rows)).unwrap();
        assert_abs_diff_eq!(s.pearson.unwrap().min, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.spearman.unwrap().min, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.concordance.unwrap().min, 1.0, epsilon = 1e-12);
        assert_eq!(s.run_pair_mard_pct.max, 0.0);
        assert_eq!(s.documents_identical_pct, 100.0);
        assert_eq!(s.n_run_pairs, 6);
    }

    #[test]
    fn works_in_single_precision() {
        let m = ContinuousRunMatrix::<f32>::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]], "").unwrap();
        assert!((icc2(&m).unwrap() - 0.8).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn relative_difference_laws(a in -1e6f64..1e6, b in -1e6f64..1e6, c in 1e-3f64..1e3) {
            let d = relative_difference(a, b);
            prop_assert_eq!(d, relative_difference(b, a));
            prop_assert!((0.0..=200.0 + 1e-9).contains(&d));
            prop_assert!((relative_difference(a * c, b * c) - d).abs() < 1e-9 * d.max(1.0));
        }

        #[test]
        fn concordance_bounded_by_pearson(v in prop::collection::vec((-100f64..100.0, -100f64..100.0), 3..20)) {
            let (x, y): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            if let (Ok(c), Ok(r)) = (concordance(&x, &y), pearson(&x, &y)) {
                prop_assert!(c.abs() <= r.abs() + 1e-12);
            }
        }

        #[test]
        fn spearman_monotone_invariance(v in prop::collection::vec((-10f64..10.0, -10f64..10.0), 3..20)) {
            let (x, y): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            if let Ok(s) = spearman(&x, &y) {
                let tx: Vec<f64> = x.iter().map(|v| v.exp()).collect();
                let ty: Vec<f64> = y.iter().map(|v| v * v * v + 2.0 * v).collect();
                prop_assert!((spearman(&tx, &ty).unwrap() - s).abs() < 1e-9);
            }
        }
    }
}
