//! Monte Carlo study of how run-to-run variation in a measured regressor carries
//! into downstream OLS inference.
//!
//! Each iteration draws synthetic length runs from the observed matrix, designates
//! one as ground truth, generates a confounded control `X` and an outcome `y` from
//! it, and re-estimates `y ~ 1 + X + L` with every other synthetic run in place of
//! the true lengths. Every estimate is classified against the truth regression.

pub mod ols;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{AuditError, Result};
use crate::rng::{stream, AuditRng};
use crate::run_matrix::ContinuousRunMatrix;
use crate::scalar::{mean, ordered_sum, Scalar};
use crate::stats::DistributionStats;

pub use ols::{ols_hc1, ols_robust, OlsFit, RegressionResult};

const TAG_ITERATION: u64 = 0;
const TAG_RUN: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    #[serde(default = "defaults::x_effect")]
    pub x_effect: f64,
    #[serde(default = "defaults::length_effect")]
    pub length_effect: f64,
    #[serde(default = "defaults::confounding_rho")]
    pub confounding_rho: f64,
    #[serde(default = "defaults::snr")]
    pub snr: f64,
    #[serde(default = "defaults::n_iterations")]
    pub n_iterations: usize,
    #[serde(default = "defaults::n_synthetic_runs")]
    pub n_synthetic_runs: usize,
    /// Observed values averaged per document in each estimate regression.
    #[serde(default = "defaults::aggregation_level")]
    pub aggregation_level: usize,
    /// Two-sided significance level.
    #[serde(default = "defaults::alpha")]
    pub alpha: f64,
    pub seed: u64,
}

mod defaults {
    pub fn x_effect() -> f64 {
        0.2
    }
    pub fn length_effect() -> f64 {
        0.005
    }
    pub fn confounding_rho() -> f64 {
        0.5
    }
    pub fn snr() -> f64 {
        0.5
    }
    pub fn n_iterations() -> usize {
        500
    }
    pub fn n_synthetic_runs() -> usize {
        101
    }
    pub fn aggregation_level() -> usize {
        1
    }
    pub fn alpha() -> f64 {
        0.05
    }
}

impl SimulationConfig {
    /// Desk-scale defaults: 500 iterations of 101 synthetic runs.
    pub fn desk(seed: u64) -> Self {
        Self {
            x_effect: defaults::x_effect(),
            length_effect: defaults::length_effect(),
            confounding_rho: defaults::confounding_rho(),
            snr: defaults::snr(),
            n_iterations: defaults::n_iterations(),
            n_synthetic_runs: defaults::n_synthetic_runs(),
            aggregation_level: defaults::aggregation_level(),
            alpha: defaults::alpha(),
            seed,
        }
    }

    /// 10,000 iterations of 1,001 synthetic runs.
    pub fn full_scale(seed: u64) -> Self {
        Self { n_iterations: 10_000, n_synthetic_runs: 1_001, ..Self::desk(seed) }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(AuditError::InvalidConfig(m));
        if !self.snr.is_finite() || self.snr <= 0.0 {
            return bad(format!("snr must be positive, got {}", self.snr));
        }
        if self.confounding_rho.is_nan() || self.confounding_rho.abs() >= 1.0 {
            return bad(format!("confounding_rho must lie in (-1, 1), got {}", self.confounding_rho));
        }
        if !self.x_effect.is_finite() || !self.length_effect.is_finite() {
            return bad("effects must be finite".into());
        }
        if self.n_synthetic_runs < 2 {
            return bad(format!("n_synthetic_runs must be at least 2, got {}", self.n_synthetic_runs));
        }
        if self.n_iterations == 0 {
            return bad("n_iterations must be at least 1".into());
        }
        if self.aggregation_level == 0 {
            return bad("aggregation_level must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        Ok(())
    }
}

/// Summary length relative to the length of its source document.
pub fn bloat_scale<T: Scalar>(summary_length: T, source_length: T) -> Result<T> {
    if source_length.is_zero() {
        return Err(AuditError::Division("source length is zero".into()));
    }
    Ok(summary_length / source_length)
}

fn draw_column(rows: &[Vec<f64>], rng: &mut AuditRng) -> Vec<f64> {
    rows.iter().map(|r| r[rng.random_range(0..r.len())]).collect()
}

fn complete_rows(m: &ContinuousRunMatrix<f64>) -> Result<Vec<Vec<f64>>> {
    m.require_complete()?;
    if m.n_docs() == 0 || m.n_runs() == 0 {
        return Err(AuditError::Shape("observed matrix is empty".into()));
    }
    (0..m.n_docs()).map(|d| m.complete_row(d)).collect()
}

/// `n_runs` synthetic runs; each cell is one value drawn uniformly from the document's
/// observed values. Run `r` draws from the stream `(seed, r)`.
pub fn build_synthetic_length_runs(
    m: &ContinuousRunMatrix<f64>,
    n_runs: usize,
    seed: u64,
) -> Result<ContinuousRunMatrix<f64>> {
    if n_runs == 0 {
        return Err(AuditError::InvalidConfig("n_runs must be at least 1".into()));
    }
    let rows = complete_rows(m)?;
    let columns: Vec<Vec<f64>> = (0..n_runs)
        .into_par_iter()
        .map(|r| draw_column(&rows, &mut stream(seed, &[r as u64])))
        .collect();
    let cells = (0..m.n_docs()).flat_map(|d| columns.iter().map(move |c| Some(c[d]))).collect();
    let run_ids = (0..n_runs).map(|r| format!("s{}", r + 1)).collect();
    ContinuousRunMatrix::new(m.doc_ids().to_vec(), run_ids, cells, m.unit())
}

/// `(v - mean) / sd` with the sample (n-1) standard deviation.
pub fn standardize<T: Scalar>(values: &[T]) -> Result<Vec<T>> {
    if values.len() < 2 {
        return Err(AuditError::DegenerateStandardization);
    }
    let mu = mean(values);
    let ss = ordered_sum(values.iter().map(|&v| (v - mu) * (v - mu)));
    let sd = (ss / T::of_usize(values.len() - 1)).sqrt();
    if !sd.is_finite() || sd <= T::zero() {
        return Err(AuditError::DegenerateStandardization);
    }
    Ok(values.iter().map(|&v| (v - mu) / sd).collect())
}

fn confounded_x(l_std: &[f64], rho: f64, rng: &mut AuditRng) -> Result<Vec<f64>> {
    let w = (1.0 - rho * rho).sqrt();
    let raw: Vec<f64> = l_std
        .iter()
        .map(|&l| {
            let z: f64 = StandardNormal.sample(rng);
            rho * l + w * z
        })
        .collect();
    standardize(&raw)
}

/// Standardized `rho * l + sqrt(1 - rho²) * Z`, `Z` i.i.d. standard normal.
pub fn generate_confounded_x(l_std: &[f64], rho: f64, seed: u64) -> Result<Vec<f64>> {
    if rho.is_nan() || rho.abs() > 1.0 {
        return Err(AuditError::InvalidConfig(format!("rho must lie in [-1, 1], got {rho}")));
    }
    confounded_x(l_std, rho, &mut stream(seed, &[]))
}

/// Error standard deviation for standardized regressors: combined signal over SNR.
pub fn error_sigma(cfg: &SimulationConfig) -> f64 {
    (cfg.x_effect.abs() + cfg.length_effect.abs()) / cfg.snr
}

/// Two-sided standard-normal critical value.
pub fn normal_critical_value(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(AuditError::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(n.inverse_cdf(1.0 - alpha / 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceOutcome {
    Correct,
    /// Truth not significant, estimate significant.
    Type1,
    /// Truth significant, estimate not significant.
    Type2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub outcome: InferenceOutcome,
    pub estimate_significant: bool,
    /// Estimated length coefficient has the sign of the truth coefficient.
    pub sign_correct: bool,
}

fn classify_with_critical(truth: &RegressionResult<f64>, est: &RegressionResult<f64>, crit: f64) -> Classification {
    let truth_sig = truth.t_length.abs() > crit;
    let est_sig = est.t_length.abs() > crit;
    let outcome = match (truth_sig, est_sig) {
        (false, true) => InferenceOutcome::Type1,
        (true, false) => InferenceOutcome::Type2,
        _ => InferenceOutcome::Correct,
    };
    let sign = |b: f64| if b > 0.0 { 1 } else if b < 0.0 { -1 } else { 0 };
    Classification {
        outcome,
        estimate_significant: est_sig,
        sign_correct: sign(truth.beta_length) == sign(est.beta_length),
    }
}

/// Significance verdicts use `|t_length|` against the two-sided normal critical value.
pub fn classify_inference(
    truth: &RegressionResult<f64>,
    est: &RegressionResult<f64>,
    alpha: f64,
) -> Result<Classification> {
    Ok(classify_with_critical(truth, est, normal_critical_value(alpha)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferenceRates {
    pub correct_pct: f64,
    pub type1_pct: f64,
    pub type2_pct: f64,
}

/// Estimate significance × sign agreement with the truth, in percent of all estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignTable {
    pub significant_correct_sign_pct: f64,
    pub significant_incorrect_sign_pct: f64,
    pub nonsignificant_correct_sign_pct: f64,
    pub nonsignificant_incorrect_sign_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateVsTruth {
    pub estimated: DistributionStats<f64>,
    pub truth: DistributionStats<f64>,
}

/// Mean estimated length coefficient against the mean truth coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasCheck {
    pub mean_estimate: f64,
    pub mean_truth: f64,
    pub difference: f64,
    /// Standard error of the difference of the two means over iterations.
    pub monte_carlo_se: f64,
    /// Standard error of the per-iteration difference (estimate mean minus truth).
    pub paired_se: f64,
}

/// One estimate regression next to the truth regression of its iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoefPair {
    pub iteration: usize,
    pub run: usize,
    pub truth_beta: f64,
    pub estimate_beta: f64,
    pub truth_t: f64,
    pub estimate_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub n_docs: usize,
    pub n_iterations: usize,
    pub n_synthetic_runs: usize,
    pub n_estimates: usize,
    pub aggregation_level: usize,
    pub error_sigma: f64,
    pub critical_value: f64,
    pub coefficient_distribution: EstimateVsTruth,
    pub t_distribution: EstimateVsTruth,
    pub r_squared: EstimateVsTruth,
    pub inference_rates: InferenceRates,
    pub sign_table: SignTable,
    pub correct_sign_overall_pct: f64,
    pub bias: BiasCheck,
    #[serde(skip)]
    pub pairs: Vec<CoefPair>,
}

struct Iteration {
    truth: RegressionResult<f64>,
    estimates: Vec<(usize, RegressionResult<f64>)>,
}

fn run_iteration(rows: &[Vec<f64>], cfg: &SimulationConfig, sigma: f64, i: usize) -> Result<Iteration> {
    let it = i as u64;
    let mut main = stream(cfg.seed, &[it, TAG_ITERATION]);
    let truth_run = main.random_range(0..cfg.n_synthetic_runs);
    let l_true = standardize(&draw_column(rows, &mut stream(cfg.seed, &[it, TAG_RUN, truth_run as u64])))?;
    let x = confounded_x(&l_true, cfg.confounding_rho, &mut main)?;
    let y: Vec<f64> = x
        .iter()
        .zip(&l_true)
        .map(|(&xv, &lv)| {
            let e: f64 = StandardNormal.sample(&mut main);
            cfg.x_effect * xv + cfg.length_effect * lv + sigma * e
        })
        .collect();
    let truth = ols_robust(&y, &x, &l_true)?;
    let m = cfg.aggregation_level as f64;
    let estimates = (0..cfg.n_synthetic_runs)
        .filter(|&r| r != truth_run)
        .map(|r| {
            let mut rng = stream(cfg.seed, &[it, TAG_RUN, r as u64]);
            let mut l = draw_column(rows, &mut rng);
            if cfg.aggregation_level > 1 {
                for (v, row) in l.iter_mut().zip(rows) {
                    let mut acc = *v;
                    for _ in 1..cfg.aggregation_level {
                        acc += row[rng.random_range(0..row.len())];
                    }
                    *v = acc / m;
                }
            }
            Ok((r, ols_robust(&y, &x, &standardize(&l)?)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Iteration { truth, estimates })
}

fn sample_var(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let mu = mean(v);
    ordered_sum(v.iter().map(|&x| (x - mu) * (x - mu))) / (v.len() - 1) as f64
}

fn stats(v: &[f64]) -> DistributionStats<f64> {
    DistributionStats::from_values(v).expect("non-empty sample")
}

/// Runs the study on a complete documents × runs matrix of (scaled) lengths.
///
/// Iteration `i` draws its truth-run index, `X` and the errors from stream `(seed, i, 0)`
/// and synthetic run `r` from stream `(seed, i, 1, r)`. With aggregation level `m`, an
/// estimate run averages its own draw with `m - 1` further draws from the same stream.
pub fn run_simulation(observed: &ContinuousRunMatrix<f64>, cfg: &SimulationConfig) -> Result<SimulationReport> {
    cfg.validate()?;
    let rows = complete_rows(observed)?;
    if rows.len() <= 3 {
        return Err(AuditError::Shape(format!("{} documents cannot identify three coefficients", rows.len())));
    }
    let sigma = error_sigma(cfg);
    let crit = normal_critical_value(cfg.alpha)?;
    let iterations = (0..cfg.n_iterations)
        .into_par_iter()
        .map(|i| run_iteration(&rows, cfg, sigma, i))
        .collect::<Result<Vec<_>>>()?;

    let n_est = iterations.iter().map(|it| it.estimates.len()).sum::<usize>();
    let mut counts = [0usize; 3];
    let mut signs = [0usize; 4];
    let mut pairs = Vec::with_capacity(n_est);
    let (mut est_r2, mut est_means) = (Vec::with_capacity(n_est), Vec::with_capacity(iterations.len()));
    for (i, it) in iterations.iter().enumerate() {
        for &(r, ref est) in &it.estimates {
            let c = classify_with_critical(&it.truth, est, crit);
            counts[c.outcome as usize] += 1;
            signs[usize::from(!c.estimate_significant) * 2 + usize::from(!c.sign_correct)] += 1;
            est_r2.push(est.r_squared);
            pairs.push(CoefPair {
                iteration: i,
                run: r,
                truth_beta: it.truth.beta_length,
                estimate_beta: est.beta_length,
                truth_t: it.truth.t_length,
                estimate_t: est.t_length,
            });
        }
        est_means.push(mean(&it.estimates.iter().map(|(_, e)| e.beta_length).collect::<Vec<_>>()));
    }
    let pct = |c: usize| c as f64 * 100.0 / n_est as f64;
    let est_beta: Vec<f64> = pairs.iter().map(|p| p.estimate_beta).collect();
    let est_t: Vec<f64> = pairs.iter().map(|p| p.estimate_t).collect();
    let truth_beta: Vec<f64> = iterations.iter().map(|it| it.truth.beta_length).collect();
    let truth_t: Vec<f64> = iterations.iter().map(|it| it.truth.t_length).collect();
    let truth_r2: Vec<f64> = iterations.iter().map(|it| it.truth.r_squared).collect();

    let n_it = iterations.len() as f64;
    let mean_estimate = mean(&est_beta);
    let mean_truth = mean(&truth_beta);
    let diffs: Vec<f64> = est_means.iter().zip(&truth_beta).map(|(e, t)| e - t).collect();
    let bias = BiasCheck {
        mean_estimate,
        mean_truth,
        difference: mean_estimate - mean_truth,
        monte_carlo_se: ((sample_var(&truth_beta) + sample_var(&est_means)) / n_it).sqrt(),
        paired_se: (sample_var(&diffs) / n_it).sqrt(),
    };

    Ok(SimulationReport {
        n_docs: rows.len(),
        n_iterations: cfg.n_iterations,
        n_synthetic_runs: cfg.n_synthetic_runs,
        n_estimates: n_est,
        aggregation_level: cfg.aggregation_level,
        error_sigma: sigma,
        critical_value: crit,
        coefficient_distribution: EstimateVsTruth { estimated: stats(&est_beta), truth: stats(&truth_beta) },
        t_distribution: EstimateVsTruth { estimated: stats(&est_t), truth: stats(&truth_t) },
        r_squared: EstimateVsTruth { estimated: stats(&est_r2), truth: stats(&truth_r2) },
        inference_rates: InferenceRates {
            correct_pct: pct(counts[InferenceOutcome::Correct as usize]),
            type1_pct: pct(counts[InferenceOutcome::Type1 as usize]),
            type2_pct: pct(counts[InferenceOutcome::Type2 as usize]),
        },
        sign_table: SignTable {
            significant_correct_sign_pct: pct(signs[0]),
            significant_incorrect_sign_pct: pct(signs[1]),
            nonsignificant_correct_sign_pct: pct(signs[2]),
            nonsignificant_incorrect_sign_pct: pct(signs[3]),
        },
        correct_sign_overall_pct: pct(signs[0] + signs[2]),
        bias,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn reg(beta: f64, t: f64) -> RegressionResult<f64> {
        RegressionResult { beta_x: 0.2, beta_length: beta, se_x: 0.01, se_length: 0.01, t_x: 20.0, t_length: t, r_squared: 0.2 }
    }

    #[test]
    fn scalar_helpers() {
        assert_eq!(bloat_scale(500.0, 5000.0).unwrap(), 0.1);
        assert_eq!(bloat_scale(3.0, 3.0).unwrap(), 1.0);
        assert_abs_diff_eq!(bloat_scale(750.0, 10000.0).unwrap(), 0.075, epsilon = 1e-15);
        assert!(matches!(bloat_scale(1.0, 0.0), Err(AuditError::Division(_))));
        assert_abs_diff_eq!(error_sigma(&SimulationConfig::desk(0)), 0.41, epsilon = 1e-12);
        assert_abs_diff_eq!(error_sigma(&SimulationConfig { snr: 1.0, ..SimulationConfig::desk(0) }), 0.205, epsilon = 1e-12);
        let zero = SimulationConfig { x_effect: 0.0, length_effect: 0.0, ..SimulationConfig::desk(0) };
        assert_eq!(error_sigma(&zero), 0.0);
        assert_abs_diff_eq!(normal_critical_value(0.05).unwrap(), 1.959964, epsilon = 1e-6);
    }

    #[test]
    fn standardize_cases() {
        let s = standardize(&[-1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(s[1], std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(standardize(&[-1.0, 0.0, 1.0]).unwrap()[2], 1.0, epsilon = 1e-15);
        let s = standardize(&[0.0, 10.0]).unwrap();
        assert_abs_diff_eq!(s[0], -std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(s[1], std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert!(matches!(standardize(&[2.0, 2.0, 2.0]), Err(AuditError::DegenerateStandardization)));
        assert!(standardize(&[1.0f64]).is_err());
    }

    #[test]
    fn classification_cases() {
        let t = reg(0.01, 3.0);
        let c = classify_inference(&t, &t, 0.05).unwrap();
        assert_eq!((c.outcome, c.sign_correct), (InferenceOutcome::Correct, true));
        assert_eq!(classify_inference(&reg(0.01, 0.5), &reg(0.02, 3.0), 0.05).unwrap().outcome, InferenceOutcome::Type1);
        assert_eq!(classify_inference(&reg(0.01, 3.0), &reg(0.002, 0.5), 0.05).unwrap().outcome, InferenceOutcome::Type2);
        let flipped = classify_inference(&reg(0.01, 3.0), &reg(-0.01, -3.0), 0.05).unwrap();
        assert_eq!(flipped.outcome, InferenceOutcome::Correct);
        assert!(flipped.estimate_significant && !flipped.sign_correct);
    }

    #[test]
    fn synthetic_runs_draw_from_observed() {
        let m = ContinuousRunMatrix::from_rows(&[vec![5.0, 5.0, 5.0], vec![1.0, 2.0, 3.0]], "words").unwrap();
        let s = build_synthetic_length_runs(&m, 20, 3).unwrap();
        assert_eq!(s.n_runs(), 20);
        assert!(s.row(0).iter().all(|v| *v == Some(5.0)));
        assert!(s.row(1).iter().all(|v| matches!(v, Some(x) if [1.0, 2.0, 3.0].contains(x))));
        let single = ContinuousRunMatrix::from_rows(&[vec![7.0], vec![9.0]], "words").unwrap();
        let s = build_synthetic_length_runs(&single, 4, 1).unwrap();
        assert!(s.row(1).iter().all(|v| *v == Some(9.0)));
    }

    #[test]
    fn config_validation() {
        assert!(SimulationConfig::desk(1).validate().is_ok());
        assert!(SimulationConfig { snr: 0.0, ..SimulationConfig::desk(1) }.validate().is_err());
        assert!(SimulationConfig { confounding_rho: 1.0, ..SimulationConfig::desk(1) }.validate().is_err());
        assert!(SimulationConfig { n_synthetic_runs: 1, ..SimulationConfig::desk(1) }.validate().is_err());
        assert!(SimulationConfig { aggregation_level: 0, ..SimulationConfig::desk(1) }.validate().is_err());
        let parsed: SimulationConfig = serde_json::from_str(r#"{"seed": 9, "snr": 1.0}"#).unwrap();
        assert_eq!(parsed, SimulationConfig { snr: 1.0, ..SimulationConfig::desk(9) });
    }

    #[test]
    fn small_run_is_consistent_and_reproducible() {
        let rows: Vec<Vec<f64>> = (0..60).map(|d| (0..5).map(|r| 1.0 + d as f64 * 0.1 + r as f64 * 0.01).collect()).collect();
        let m = ContinuousRunMatrix::from_rows(&rows, "ratio").unwrap();
        let cfg = SimulationConfig { n_iterations: 8, n_synthetic_runs: 6, ..SimulationConfig::desk(11) };
        let a = run_simulation(&m, &cfg).unwrap();
        let b = run_simulation(&m, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_estimates, 8 * 5);
        let r = a.inference_rates;
        assert_abs_diff_eq!(r.correct_pct + r.type1_pct + r.type2_pct, 100.0, epsilon = 1e-9);
        let s = a.sign_table;
        let total = s.significant_correct_sign_pct
            + s.significant_incorrect_sign_pct
            + s.nonsignificant_correct_sign_pct
            + s.nonsignificant_incorrect_sign_pct;
        assert_abs_diff_eq!(total, 100.0, epsilon = 1e-9);
    }
}
