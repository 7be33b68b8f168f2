//! Direct-formula reference implementations and random fixtures shared by the
//! integration and acceptance tests. Written from the textbook definitions, with
//! explicit pair enumeration instead of count shortcuts.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type LabelGrid = Vec<Vec<Option<usize>>>;
pub type ValueGrid = Vec<Vec<f64>>;

fn ordered_rating_pairs(row: &[Option<usize>]) -> Vec<(usize, usize)> {
    let r: Vec<usize> = row.iter().flatten().copied().collect();
    let mut out = Vec::new();
    for i in 0..r.len() {
        for j in 0..r.len() {
            if i != j {
                out.push((r[i], r[j]));
            }
        }
    }
    out
}

/// Fleiss: P_i is the share of ordered rater pairs agreeing on item i.
pub fn fleiss(grid: &LabelGrid, k: usize) -> Option<f64> {
    let n_items = grid.len() as f64;
    let mut p_bar = 0.0;
    let mut cells = vec![0.0; k];
    let mut total = 0.0;
    for row in grid {
        let pairs = ordered_rating_pairs(row);
        if pairs.is_empty() {
            return None;
        }
        p_bar += pairs.iter().filter(|(a, b)| a == b).count() as f64 / pairs.len() as f64;
        for l in row.iter().flatten() {
            cells[*l] += 1.0;
            total += 1.0;
        }
    }
    p_bar /= n_items;
    let pe: f64 = cells.iter().map(|c| (c / total) * (c / total)).sum();
    Some(if pe == 1.0 {
        if p_bar == 1.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (p_bar - pe) / (1.0 - pe)
    })
}

/// Krippendorff nominal alpha from an explicit coincidence matrix.
pub fn krippendorff(grid: &LabelGrid, k: usize) -> Option<f64> {
    let mut o = vec![vec![0.0; k]; k];
    let mut any = false;
    for row in grid {
        let m = row.iter().flatten().count();
        if m < 2 {
            continue;
        }
        any = true;
        for (a, b) in ordered_rating_pairs(row) {
            o[a][b] += 1.0 / (m - 1) as f64;
        }
    }
    if !any {
        return None;
    }
    let n_c: Vec<f64> = (0..k).map(|c| o[c].iter().sum()).collect();
    let n: f64 = n_c.iter().sum();
    let mut d_o = 0.0;
    let mut d_e = 0.0;
    for c in 0..k {
        for j in 0..k {
            if c != j {
                d_o += o[c][j];
                d_e += n_c[c] * n_c[j] / (n - 1.0);
            }
        }
    }
    if d_e == 0.0 {
        return Some(1.0);
    }
    Some(1.0 - d_o / d_e)
}

fn co_rated(grid: &LabelGrid, a: usize, b: usize) -> Vec<(usize, usize)> {
    grid.iter().filter_map(|r| Some((r[a]?, r[b]?))).collect()
}

/// Cohen's kappa from the confusion matrix of two runs.
pub fn cohen(grid: &LabelGrid, a: usize, b: usize, k: usize) -> Option<f64> {
    let pairs = co_rated(grid, a, b);
    if pairs.is_empty() {
        return None;
    }
    let mut conf = vec![vec![0.0; k]; k];
    for (x, y) in &pairs {
        conf[*x][*y] += 1.0;
    }
    let n = pairs.len() as f64;
    let po = (0..k).map(|i| conf[i][i]).sum::<f64>() / n;
    let pe: f64 = (0..k)
        .map(|i| {
            let row: f64 = conf[i].iter().sum();
            let col: f64 = (0..k).map(|j| conf[j][i]).sum();
            row * col / (n * n)
        })
        .sum();
    Some(if pe == 1.0 {
        if po == 1.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (po - pe) / (1.0 - pe)
    })
}

pub fn pair_agreement(grid: &LabelGrid, a: usize, b: usize) -> Option<f64> {
    let pairs = co_rated(grid, a, b);
    if pairs.is_empty() {
        return None;
    }
    Some(100.0 * pairs.iter().filter(|(x, y)| x == y).count() as f64 / pairs.len() as f64)
}

pub fn doc_agreement(labels: &[usize]) -> f64 {
    let (mut agree, mut total) = (0usize, 0usize);
    for i in 0..labels.len() {
        for j in i + 1..labels.len() {
            total += 1;
            agree += usize::from(labels[i] == labels[j]);
        }
    }
    100.0 * agree as f64 / total as f64
}

pub fn majority_strength(labels: &[usize]) -> f64 {
    let best = labels.iter().map(|l| labels.iter().filter(|m| *m == l).count()).max().unwrap();
    100.0 * best as f64 / labels.len() as f64
}

pub fn entropy(labels: &[usize]) -> f64 {
    let mut seen: Vec<usize> = labels.to_vec();
    seen.sort();
    seen.dedup();
    let n = labels.len() as f64;
    -seen
        .iter()
        .map(|l| {
            let p = labels.iter().filter(|m| *m == l).count() as f64 / n;
            p * p.ln() / std::f64::consts::LN_2
        })
        .sum::<f64>()
}

/// ICC(2,1) from the two-way ANOVA decomposition with explicit interaction residuals.
pub fn icc(grid: &ValueGrid) -> Option<f64> {
    let n = grid.len();
    let k = grid[0].len();
    if n < 2 || k < 2 {
        return None;
    }
    let g: f64 = grid.iter().flatten().sum::<f64>() / (n * k) as f64;
    let rm: Vec<f64> = grid.iter().map(|r| r.iter().sum::<f64>() / k as f64).collect();
    let cm: Vec<f64> = (0..k).map(|j| grid.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let mut ssr = 0.0;
    let mut ssc = 0.0;
    let mut sse = 0.0;
    let mut sst = 0.0;
    for i in 0..n {
        for j in 0..k {
            let x = grid[i][j];
            ssr += (rm[i] - g).powi(2);
            ssc += (cm[j] - g).powi(2);
            sse += (x - rm[i] - cm[j] + g).powi(2);
            sst += (x - g).powi(2);
        }
    }
    if sst == 0.0 {
        return None;
    }
    let (nf, kf) = (n as f64, k as f64);
    let msr = ssr / (nf - 1.0);
    let msc = ssc / (kf - 1.0);
    let mse = sse / ((nf - 1.0) * (kf - 1.0));
    Some((msr - mse) / (msr + (kf - 1.0) * mse + kf * (msc - mse) / nf))
}

fn avg(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn ccc(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mx, my) = (avg(x), avg(y));
    let vx = avg(&x.iter().map(|a| (a - mx).powi(2)).collect::<Vec<_>>());
    let vy = avg(&y.iter().map(|b| (b - my).powi(2)).collect::<Vec<_>>());
    let cov = avg(&x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect::<Vec<_>>());
    let d = vx + vy + (mx - my).powi(2);
    (d != 0.0).then(|| 2.0 * cov / d)
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mx, my) = (avg(x), avg(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    (sxx != 0.0 && syy != 0.0).then(|| sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Mid-rank by counting: rank = #smaller + (#equal + 1) / 2.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|v| {
            let less = x.iter().filter(|w| *w < v).count() as f64;
            let eq = x.iter().filter(|w| *w == v).count() as f64;
            less + (eq + 1.0) / 2.0
        })
        .collect()
}

pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(&ranks(x), &ranks(y))
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / ((a.abs() + b.abs()) / 2.0) * 100.0
    }
}

pub fn mard_pair(grid: &ValueGrid, a: usize, b: usize) -> f64 {
    avg(&grid.iter().map(|r| rel_diff(r[a], r[b])).collect::<Vec<_>>())
}

pub fn mard_doc(row: &[f64]) -> f64 {
    let mut d = Vec::new();
    for i in 0..row.len() {
        for j in i + 1..row.len() {
            d.push(rel_diff(row[i], row[j]));
        }
    }
    avg(&d)
}

pub fn random_labels(rng: &mut ChaCha8Rng, max_docs: usize, max_runs: usize, max_labels: usize, p_missing: f64) -> (LabelGrid, usize) {
    let docs = rng.random_range(1..=max_docs);
    let runs = rng.random_range(2..=max_runs);
    let k = rng.random_range(2..=max_labels);
    let grid = (0..docs)
        .map(|_| {
            (0..runs)
                .map(|_| (!rng.random_bool(p_missing)).then(|| rng.random_range(0..k)))
                .collect()
        })
        .collect();
    (grid, k)
}

/// Positive values on a coarse grid so ties and identical documents occur.
pub fn random_values(rng: &mut ChaCha8Rng, max_docs: usize, max_runs: usize) -> ValueGrid {
    let docs = rng.random_range(2..=max_docs);
    let runs = rng.random_range(2..=max_runs);
    let coarse = rng.random_bool(0.5);
    (0..docs)
        .map(|_| {
            (0..runs)
                .map(|_| if coarse { rng.random_range(1..=4) as f64 } else { rng.random_range(0.5..50.0) })
                .collect()
        })
        .collect()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

pub fn label_matrix(grid: &LabelGrid, k: usize) -> runaudit::CategoricalRunMatrix {
    let names: Vec<String> = (0..k).map(|l| format!("L{l}")).collect();
    let scheme = runaudit::LabelScheme::nominal(&names).unwrap();
    let docs = (0..grid.len()).map(|d| format!("d{}", d + 1)).collect();
    let runs = (0..grid[0].len()).map(|r| format!("r{}", r + 1)).collect();
    let cells = grid.iter().flatten().map(|c| c.map(runaudit::LabelId)).collect();
    runaudit::CategoricalRunMatrix::new(docs, runs, cells, scheme).unwrap()
}

pub fn value_matrix(grid: &ValueGrid) -> runaudit::ContinuousMatrix {
    runaudit::ContinuousMatrix::from_rows(grid, "x").unwrap()
}

/// Documents with a true ordinal label; every run reports it, or with probability `flip`
/// one of the other labels chosen uniformly.
pub fn noisy_labeler(n_docs: usize, n_runs: usize, flip: f64, seed: u64) -> (runaudit::CategoricalRunMatrix, Vec<usize>) {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scheme = runaudit::LabelScheme::ordinal(&["Negative", "Neutral", "Positive"]).unwrap();
    let truth: Vec<usize> = (0..n_docs).map(|_| rng.random_range(0..3)).collect();
    let mut cells = Vec::with_capacity(n_docs * n_runs);
    for &t in &truth {
        for _ in 0..n_runs {
            let l = if rng.random_bool(flip) { (t + rng.random_range(1..3)) % 3 } else { t };
            cells.push(Some(runaudit::LabelId(l)));
        }
    }
    let docs = (0..n_docs).map(|d| format!("d{}", d + 1)).collect();
    let runs = (0..n_runs).map(|r| format!("r{}", r + 1)).collect();
    (runaudit::CategoricalRunMatrix::new(docs, runs, cells, scheme).unwrap(), truth)
}

/// Per-document level times `1 + noise * z`, `z` i.i.d. standard normal.
pub fn iid_continuous(n_docs: usize, n_runs: usize, noise: f64, seed: u64) -> runaudit::ContinuousMatrix {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: ValueGrid = (0..n_docs)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            let base = 500.0 * (0.25 * z).exp();
            (0..n_runs)
                .map(|_| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    base * (1.0 + noise * e)
                })
                .collect()
        })
        .collect();
    value_matrix(&rows)
}
