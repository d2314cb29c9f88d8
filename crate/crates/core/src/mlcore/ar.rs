//! AR(p) on a d-times differenced series (ARIMA without the MA term).

use serde::{Deserialize, Serialize};

use super::MlError;

pub const MAX_DIFFERENCING: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArModel {
    pub p: usize,
    pub d: usize,
    /// φ₁..φ_p, where φ₁ multiplies the most recent value.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub residual_variance: f64,
}

fn difference(series: &[f64]) -> Vec<f64> {
    series.windows(2).map(|w| w[1] - w[0]).collect()
}

fn check_order(p: usize, d: usize) -> Result<(), MlError> {
    if p == 0 {
        return Err(MlError::InvalidConfig("p must be >= 1".into()));
    }
    if d > MAX_DIFFERENCING {
        return Err(MlError::InvalidConfig(format!("d must be <= {MAX_DIFFERENCING}")));
    }
    Ok(())
}

/// Solves the symmetric system `a·x = b` by Gaussian elimination with
/// partial pivoting. `None` when a pivot collapses relative to the scale.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = (0..n).map(|i| a[i][i].abs()).fold(0.0, f64::max);
    for col in 0..n {
        let pivot = (col..n).max_by(|x, y| a[*x][col].abs().total_cmp(&a[*y][col].abs()))?;
        if a[pivot][col].abs() <= 1e-10 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}

/// Least-squares fit of w_t = c + Σ φ_k w_{t−k} on the differenced series.
pub fn fit_ar(series: &[f64], p: usize, d: usize) -> Result<ArModel, MlError> {
    check_order(p, d)?;
    let needed = p + d + 10;
    if series.len() < needed {
        return Err(MlError::SeriesTooShort {
            needed,
            got: series.len(),
        });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(MlError::NonFiniteInput);
    }
    let mut w = series.to_vec();
    for _ in 0..d {
        w = difference(&w);
    }
    let rows = w.len() - p;
    let lags = |t: usize, k: usize| w[t - 1 - k];
    // centre every column so the intercept drops out of the normal equations
    let y_mean = w[p..].iter().sum::<f64>() / rows as f64;
    let lag_mean: Vec<f64> = (0..p)
        .map(|k| (p..w.len()).map(|t| lags(t, k)).sum::<f64>() / rows as f64)
        .collect();
    let mut gram = vec![vec![0.0; p]; p];
    let mut rhs = vec![0.0; p];
    for t in p..w.len() {
        let yc = w[t] - y_mean;
        for i in 0..p {
            let xi = lags(t, i) - lag_mean[i];
            rhs[i] += xi * yc;
            for j in 0..p {
                gram[i][j] += xi * (lags(t, j) - lag_mean[j]);
            }
        }
    }
    let all_constant = (0..p).all(|i| gram[i][i] == 0.0);
    let coefficients = if all_constant {
        // nothing to regress on: the best linear predictor is the mean
        vec![0.0; p]
    } else {
        solve(gram, rhs).ok_or(MlError::SingularDesign)?
    };
    let intercept = y_mean - coefficients.iter().zip(&lag_mean).map(|(c, m)| c * m).sum::<f64>();
    let sse: f64 = (p..w.len())
        .map(|t| {
            let fit = intercept + (0..p).map(|k| coefficients[k] * lags(t, k)).sum::<f64>();
            (w[t] - fit).powi(2)
        })
        .sum();
    let dof = rows.saturating_sub(p + 1).max(1);
    Ok(ArModel {
        p,
        d,
        coefficients,
        intercept,
        residual_variance: sse / dof as f64,
    })
}

impl ArModel {
    /// Forecasts `horizon` steps past the end of `recent` (original scale).
    pub fn forecast(&self, recent: &[f64], horizon: usize) -> Result<Vec<f64>, MlError> {
        let needed = self.p + self.d;
        if recent.len() < needed {
            return Err(MlError::SeriesTooShort {
                needed,
                got: recent.len(),
            });
        }
        if recent.iter().any(|v| !v.is_finite()) {
            return Err(MlError::NonFiniteInput);
        }
        // levels[0] is the series itself, levels[i] its i-th difference
        let mut levels = vec![recent.to_vec()];
        for i in 0..self.d {
            let next = difference(&levels[i]);
            levels.push(next);
        }
        let mut out = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let w = &levels[self.d];
            let mut next = self.intercept;
            for (k, phi) in self.coefficients.iter().enumerate() {
                next += phi * w[w.len() - 1 - k];
            }
            levels[self.d].push(next);
            for i in (0..self.d).rev() {
                let last = *levels[i].last().expect("levels are non-empty");
                let step = *levels[i + 1].last().expect("just pushed");
                levels[i].push(last + step);
            }
            out.push(*levels[0].last().expect("just pushed"));
        }
        Ok(out)
    }
}
