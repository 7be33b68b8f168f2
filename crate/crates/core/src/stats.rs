//! Descriptive statistics used for every reported distribution.

use serde::{Deserialize, Serialize};

use crate::scalar::{mean, ordered_sum, Scalar};

/// Summary of a sample: count, mean, median, sample standard deviation, extremes and quartiles.
///
/// Quantiles interpolate linearly between closest ranks; `std` uses the n-1 denominator
/// and is zero for a single observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionStats<T> {
    pub n: usize,
    pub mean: T,
    pub median: T,
    pub std: T,
    pub min: T,
    pub p25: T,
    pub p75: T,
    pub max: T,
}

impl<T: Scalar> DistributionStats<T> {
    /// Returns `None` for an empty sample.
    pub fn from_values(values: &[T]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("statistics over NaN"));
        let m = mean(values);
        let std = if values.len() > 1 {
            let ss = ordered_sum(values.iter().map(|&v| (v - m) * (v - m)));
            (ss / T::of_usize(values.len() - 1)).sqrt()
        } else {
            T::zero()
        };
        Some(Self {
            n: values.len(),
            mean: m,
            median: quantile_sorted(&sorted, 0.5),
            std,
            min: sorted[0],
            p25: quantile_sorted(&sorted, 0.25),
            p75: quantile_sorted(&sorted, 0.75),
            max: sorted[sorted.len() - 1],
        })
    }
}

/// Linear-interpolation quantile of an ascending, non-empty slice.
pub fn quantile_sorted<T: Scalar>(sorted: &[T], q: f64) -> T {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        return sorted[lo];
    }
    let frac = T::of(h - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}
