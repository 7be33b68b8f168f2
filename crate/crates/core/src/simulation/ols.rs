//! Ordinary least squares with HC1 heteroskedasticity-robust standard errors.

use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};
use crate::scalar::{mean, ordered_sum, Scalar};

/// Coefficients, HC1 standard errors and R² of a least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit<T> {
    pub coefficients: Vec<T>,
    pub std_errors: Vec<T>,
    pub r_squared: T,
}

/// Fits `y` on the given regressor columns (include a column of ones for an intercept).
///
/// Covariance is `n/(n-p) (X'X)^-1 X' diag(e²) X (X'X)^-1`. R² is centred and is reported
/// as 0 when `y` is constant.
pub fn ols_hc1<T: Scalar>(y: &[T], columns: &[&[T]]) -> Result<OlsFit<T>> {
    let n = y.len();
    let p = columns.len();
    if p == 0 || columns.iter().any(|c| c.len() != n) {
        return Err(AuditError::Shape(format!("{p} regressors for {n} observations")));
    }
    if n <= p {
        return Err(AuditError::Shape(format!("{n} observations cannot identify {p} coefficients")));
    }
    let mut xtx = vec![vec![T::zero(); p]; p];
    let mut xty = vec![T::zero(); p];
    for a in 0..p {
        for b in a..p {
            let v = ordered_sum(columns[a].iter().zip(columns[b]).map(|(&u, &w)| u * w));
            xtx[a][b] = v;
            xtx[b][a] = v;
        }
        xty[a] = ordered_sum(columns[a].iter().zip(y).map(|(&u, &w)| u * w));
    }
    let bread = invert_spd(&xtx)?;
    let coefficients: Vec<T> = (0..p).map(|a| ordered_sum((0..p).map(|b| bread[a][b] * xty[b]))).collect();

    let residuals: Vec<T> = (0..n)
        .map(|i| y[i] - ordered_sum((0..p).map(|a| columns[a][i] * coefficients[a])))
        .collect();
    let mut meat = vec![vec![T::zero(); p]; p];
    for a in 0..p {
        for b in a..p {
            let v = ordered_sum((0..n).map(|i| residuals[i] * residuals[i] * columns[a][i] * columns[b][i]));
            meat[a][b] = v;
            meat[b][a] = v;
        }
    }
    let scale = T::of_usize(n) / T::of_usize(n - p);
    let std_errors = (0..p)
        .map(|a| {
            // (bread · meat · bread)[a][a]
            let row: Vec<T> = (0..p).map(|c| ordered_sum((0..p).map(|b| bread[a][b] * meat[b][c]))).collect();
            let var = ordered_sum((0..p).map(|c| row[c] * bread[c][a])) * scale;
            var.max(T::zero()).sqrt()
        })
        .collect();

    let y_mean = mean(y);
    let ss_total = ordered_sum(y.iter().map(|&v| (v - y_mean) * (v - y_mean)));
    let ss_resid = ordered_sum(residuals.iter().map(|&e| e * e));
    let r_squared = if ss_total.is_zero() {
        T::zero()
    } else {
        (T::one() - ss_resid / ss_total).max(T::zero()).min(T::one())
    };
    Ok(OlsFit { coefficients, std_errors, r_squared })
}

/// Gauss-Jordan inverse of a symmetric positive-definite matrix. A pivot that falls below
/// `sqrt(eps)` of its original diagonal entry marks an (almost) collinear column.
fn invert_spd<T: Scalar>(m: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
    let p = m.len();
    let tol = T::epsilon().sqrt();
    let mut a: Vec<Vec<T>> = m.to_vec();
    let mut inv: Vec<Vec<T>> = (0..p).map(|i| (0..p).map(|j| if i == j { T::one() } else { T::zero() }).collect()).collect();
    for col in 0..p {
        let pivot = a[col][col];
        if pivot.is_nan() || pivot <= tol * m[col][col] || m[col][col].is_zero() {
            return Err(AuditError::SingularDesign);
        }
        for j in 0..p {
            a[col][j] /= pivot;
            inv[col][j] /= pivot;
        }
        for row in 0..p {
            if row == col {
                continue;
            }
            let f = a[row][col];
            if f.is_zero() {
                continue;
            }
            for j in 0..p {
                let (ac, ic) = (a[col][j], inv[col][j]);
                a[row][j] -= f * ac;
                inv[row][j] -= f * ic;
            }
        }
    }
    Ok(inv)
}

/// Regression of an outcome on an intercept, a control `X` and a length regressor `L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult<T> {
    pub beta_x: T,
    pub beta_length: T,
    pub se_x: T,
    pub se_length: T,
    pub t_x: T,
    pub t_length: T,
    pub r_squared: T,
}

fn t_stat<T: Scalar>(beta: T, se: T) -> T {
    if se > T::zero() {
        beta / se
    } else if beta.is_zero() {
        T::zero()
    } else {
        // exact fit: the coefficient is known without error
        T::infinity() * beta.signum()
    }
}

/// `y ~ 1 + x + length` with HC1 standard errors.
pub fn ols_robust<T: Scalar>(y: &[T], x: &[T], length: &[T]) -> Result<RegressionResult<T>> {
    let ones = vec![T::one(); y.len()];
    let fit = ols_hc1(y, &[&ones, x, length])?;
    let (bx, bl) = (fit.coefficients[1], fit.coefficients[2]);
    let (sx, sl) = (fit.std_errors[1], fit.std_errors[2]);
    Ok(RegressionResult {
        beta_x: bx,
        beta_length: bl,
        se_x: sx,
        se_length: sl,
        t_x: t_stat(bx, sx),
        t_length: t_stat(bl, sl),
        r_squared: fit.r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn noiseless_fit_is_exact() {
        let x = [-1.5, -0.5, 0.0, 0.5, 1.5, 2.0];
        let l = [0.3, -0.2, 0.9, -0.7, 0.1, 0.4];
        let y: Vec<f64> = x.iter().map(|v| 3.0 + 2.0 * v).collect();
        let r = ols_robust(&y, &x, &l).unwrap();
        assert_abs_diff_eq!(r.beta_x, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.beta_length, 0.0, epsilon = 1e-12);
        assert!(r.se_x < 1e-12 && r.se_length < 1e-12);
        assert_abs_diff_eq!(r.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn four_point_hand_instance() {
        // y = (1, 3, 2, 5) on an intercept and x = (0, 1, 2, 3):
        // slope = Sxy/Sxx = 5.5/5 = 1.1, intercept = 2.75 - 1.1 * 1.5 = 1.1
        // residuals (-0.1, 0.8, -1.3, 0.6); (X'X)^-1 = [[0.7, -0.3], [-0.3, 0.2]]
        // meat = [[2.7, 5.1], [5.1, 10.64]]; HC1 scale 4/2
        let ones = [1.0; 4];
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 2.0, 5.0];
        let fit = ols_hc1(&y, &[&ones, &x]).unwrap();
        assert_abs_diff_eq!(fit.coefficients[0], 1.1, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.coefficients[1], 1.1, epsilon = 1e-12);
        let bread: [[f64; 2]; 2] = [[0.7, -0.3], [-0.3, 0.2]];
        let meat = [[2.7, 5.1], [5.1, 10.64]];
        let mut v = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        v[i][j] += bread[i][a] * meat[a][b] * bread[b][j];
                    }
                }
            }
        }
        assert_abs_diff_eq!(fit.std_errors[0], (2.0 * v[0][0]).sqrt(), epsilon = 1e-10);
        assert_abs_diff_eq!(fit.std_errors[1], (2.0 * v[1][1]).sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn duplicate_column_is_singular() {
        let x = [1.0, 2.0, 4.0, 3.0, 0.5];
        let y = [1.0, 0.0, 2.0, 1.0, 3.0];
        assert!(matches!(ols_robust(&y, &x, &x), Err(AuditError::SingularDesign)));
        assert!(ols_robust(&y[..3], &x[..3], &x[..3]).is_err());
    }

    #[test]
    fn single_precision_fit() {
        let x = [0.0f32, 1.0, 2.0, 3.0, 4.0];
        let l = [1.0f32, -1.0, 0.5, 0.0, 2.0];
        let y: Vec<f32> = x.iter().zip(&l).map(|(a, b)| 1.0 + 0.5 * a - 2.0 * b).collect();
        let r = ols_robust(&y, &x, &l).unwrap();
        assert!((r.beta_length + 2.0).abs() < 1e-4);
    }
}
