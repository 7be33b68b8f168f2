use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use runaudit::simulation::{
    build_synthetic_length_runs, generate_confounded_x, ols_hc1, ols_robust, run_simulation, standardize,
    SimulationConfig,
};
use runaudit::ContinuousMatrix;

fn normal_equations_hc1(y: &[f64], cols: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let (n, p) = (y.len(), cols.len());
    let x = DMatrix::from_fn(n, p, |i, j| cols[j][i]);
    let yv = DVector::from_column_slice(y);
    let xtx_inv = (x.transpose() * &x).try_inverse().expect("full rank");
    let beta = &xtx_inv * x.transpose() * &yv;
    let e = &yv - &x * &beta;
    let meat = x.transpose() * DMatrix::from_diagonal(&e.map(|v| v * v)) * &x;
    let cov = &xtx_inv * meat * &xtx_inv * (n as f64 / (n - p) as f64);
    (beta.iter().copied().collect(), (0..p).map(|j| cov[(j, j)].sqrt()).collect())
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn ols_matches_normal_equation_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100 {
        let n = rng.random_range(8..=200);
        let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let l: Vec<f64> = x.iter().map(|v| 0.4 * v + rng.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.3 * x[i] - 0.7 * l[i] + (1.0 + x[i].abs()) * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let ones = vec![1.0; n];
        let fit = ols_hc1(&y, &[&ones, &x, &l]).unwrap();
        let (beta, se) = normal_equations_hc1(&y, &[ones.clone(), x.clone(), l.clone()]);
        for j in 0..3 {
            assert!(rel_close(fit.coefficients[j], beta[j], 1e-10), "beta {j}: {} vs {}", fit.coefficients[j], beta[j]);
            assert!(rel_close(fit.std_errors[j], se[j], 1e-10), "se {j}: {} vs {}", fit.std_errors[j], se[j]);
        }
        let r = ols_robust(&y, &x, &l).unwrap();
        assert_eq!(r.t_length, r.beta_length / r.se_length);
        assert!((0.0..=1.0).contains(&r.r_squared));
    }
}

#[test]
fn confounded_x_hits_target_correlation() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let raw: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
    let l = standardize(&raw).unwrap();
    let corr = |x: &[f64]| x.iter().zip(&l).map(|(a, b)| a * b).sum::<f64>() / (l.len() - 1) as f64;
    let c = corr(&generate_confounded_x(&l, 0.5, 1).unwrap());
    assert!((0.47..=0.53).contains(&c), "{c}");
    let c0 = corr(&generate_confounded_x(&l, 0.0, 1).unwrap());
    assert!(c0.abs() <= 3.0 / 100.0, "{c0}");
    let c1 = corr(&generate_confounded_x(&l, 0.99, 1).unwrap());
    assert!((c1 - 0.99).abs() <= 0.02, "{c1}");
    let x = generate_confounded_x(&l, 0.5, 1).unwrap();
    assert!(x.iter().sum::<f64>().abs() < 1e-9);
}

#[test]
fn synthetic_marginal_matches_observed_multiset() {
    // one document observed as {1, 2, 2, 3, 3, 3}; 6,000 synthetic draws, chi-square with 2 df
    let m = ContinuousMatrix::from_rows(&[vec![1.0, 2.0, 2.0, 3.0, 3.0, 3.0], vec![0.0; 6]], "x").unwrap();
    let s = build_synthetic_length_runs(&m, 6000, 17).unwrap();
    let mut counts = [0.0f64; 3];
    for v in s.row(0) {
        counts[v.unwrap() as usize - 1] += 1.0;
    }
    let expected = [1000.0, 2000.0, 3000.0];
    let chi2: f64 = counts.iter().zip(expected).map(|(o, e)| (o - e) * (o - e) / e).sum();
    // 0.999 quantile of chi-square(2) is 13.82
    assert!(chi2 < 13.82, "chi2 {chi2}");
}

fn noisy_fixture(n_docs: usize, n_runs: usize, noise: f64, seed: u64) -> ContinuousMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n_docs)
        .map(|_| {
            let base = 500.0 * (0.25 * rng.sample::<f64, _>(StandardNormal)).exp();
            let e = Normal::new(0.0, noise).unwrap();
            (0..n_runs).map(|_| base * (1.0 + e.sample(&mut rng))).collect()
        })
        .collect();
    ContinuousMatrix::from_rows(&rows, "words").unwrap()
}

fn small_cfg(seed: u64) -> SimulationConfig {
    SimulationConfig { n_iterations: 40, n_synthetic_runs: 21, ..SimulationConfig::desk(seed) }
}

#[test]
fn zero_noise_gives_perfect_inference() {
    let m = noisy_fixture(200, 10, 0.0, 4);
    let r = run_simulation(&m, &small_cfg(3)).unwrap();
    assert_eq!(r.inference_rates.correct_pct, 100.0);
    assert_eq!(r.correct_sign_overall_pct, 100.0);
    assert!(r.bias.difference.abs() < 1e-15);
    assert!(r.pairs.iter().all(|p| p.truth_beta == p.estimate_beta));
}

#[test]
fn null_length_effect_bounds_type1() {
    let m = noisy_fixture(300, 20, 0.08, 5);
    let cfg = SimulationConfig { length_effect: 0.0, ..small_cfg(8) };
    let a = run_simulation(&m, &cfg).unwrap();
    assert!(a.inference_rates.type1_pct <= 2.0 * 100.0 * cfg.alpha, "{}", a.inference_rates.type1_pct);
    assert_eq!(a, run_simulation(&m, &cfg).unwrap());
}

#[test]
fn report_is_independent_of_thread_count() {
    let m = noisy_fixture(120, 8, 0.1, 6);
    let cfg = small_cfg(21);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let many = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
    let a = one.install(|| run_simulation(&m, &cfg)).unwrap();
    let b = many.install(|| run_simulation(&m, &cfg)).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        a.pairs.iter().map(|p| p.estimate_beta.to_bits()).collect::<Vec<_>>(),
        b.pairs.iter().map(|p| p.estimate_beta.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn every_estimate_classified_once() {
    let m = noisy_fixture(150, 12, 0.15, 7);
    let r = run_simulation(&m, &small_cfg(1)).unwrap();
    assert_eq!(r.pairs.len(), 40 * 20);
    let i = r.inference_rates;
    assert!((i.correct_pct + i.type1_pct + i.type2_pct - 100.0).abs() < 1e-9);
}

#[test]
fn aggregation_level_one_matches_base_path() {
    let m = noisy_fixture(150, 12, 0.15, 9);
    let base = run_simulation(&m, &small_cfg(2)).unwrap();
    let m1 = run_simulation(&m, &SimulationConfig { aggregation_level: 1, ..small_cfg(2) }).unwrap();
    assert_eq!(base, m1);
    let m3 = run_simulation(&m, &SimulationConfig { aggregation_level: 3, ..small_cfg(2) }).unwrap();
    assert!(m3.inference_rates.correct_pct >= base.inference_rates.correct_pct - 0.5);
}
