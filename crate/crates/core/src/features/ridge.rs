//! Ridge regression on internally standardized columns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::{cholesky_solve, cross_products};

use super::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub columns: Vec<String>,
    /// Weights on the original column scale.
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    /// Weights on the standardized scale; their magnitudes rank columns.
    pub standardized_weights: Vec<f64>,
}

impl RidgeModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>()
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Vec<f64> {
        (0..x.n_rows()).map(|r| self.predict_row(x.row(r))).collect()
    }
}

/// Centered sufficient statistics of a row block. Any column subset can be
/// solved from them without touching the rows again.
pub(crate) struct Standardized {
    n: usize,
    p: usize,
    means: Vec<f64>,
    y_mean: f64,
    /// Population standard deviation per column; zero for constant columns.
    scales: Vec<f64>,
    cxx: Vec<f64>,
    cxy: Vec<f64>,
}

impl Standardized {
    pub(crate) fn new(x: &FeatureMatrix, y: &[f64], exec: Execution) -> Result<Self> {
        let n = x.n_rows();
        let p = x.n_cols();
        if n == 0 || y.len() != n {
            return Err(Error::TooFewRows(format!("{n} rows, {} targets", y.len())));
        }
        let mut means = vec![0.0; p];
        for r in 0..n {
            for (m, v) in means.iter_mut().zip(x.row(r)) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= n as f64;
        }
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let cp = cross_products(exec, n, p, |r, buf| {
            for ((b, v), m) in buf.iter_mut().zip(x.row(r)).zip(&means) {
                *b = v - m;
            }
            y[r] - y_mean
        });
        let scales = (0..p)
            .map(|j| {
                let s = (cp.xtx[j * p + j] / n as f64).sqrt();
                if s > 1e-12 * (1.0 + means[j].abs()) { s } else { 0.0 }
            })
            .collect();
        Ok(Standardized {
            n,
            p,
            means,
            y_mean,
            scales,
            cxx: cp.xtx,
            cxy: cp.xty,
        })
    }

    /// Standardized weights for `cols`; constant columns get weight zero.
    pub(crate) fn solve(&self, cols: &[usize], lambda: f64) -> Result<Vec<f64>> {
        let active: Vec<usize> = (0..cols.len()).filter(|&i| self.scales[cols[i]] > 0.0).collect();
        let k = active.len();
        let mut a = vec![0.0; k * k];
        let mut b = vec![0.0; k];
        for (ai, &i) in active.iter().enumerate() {
            let ci = cols[i];
            let si = self.scales[ci];
            b[ai] = self.cxy[ci] / si;
            for (aj, &j) in active.iter().enumerate() {
                let cj = cols[j];
                a[ai * k + aj] = self.cxx[ci * self.p + cj] / (si * self.scales[cj]);
            }
            a[ai * k + ai] += lambda;
        }
        let solved = cholesky_solve(&a, k, &b)?;
        let mut w = vec![0.0; cols.len()];
        for (ai, &i) in active.iter().enumerate() {
            w[i] = solved[ai];
        }
        Ok(w)
    }

    /// Maps standardized weights for `cols` back to `(weights, intercept)`.
    pub(crate) fn unscale(&self, cols: &[usize], w_std: &[f64]) -> (Vec<f64>, f64) {
        let weights: Vec<f64> = cols
            .iter()
            .zip(w_std)
            .map(|(&c, &w)| if self.scales[c] > 0.0 { w / self.scales[c] } else { 0.0 })
            .collect();
        let intercept = self.y_mean
            - cols
                .iter()
                .zip(&weights)
                .map(|(&c, w)| w * self.means[c])
                .sum::<f64>();
        (weights, intercept)
    }

    pub(crate) fn n_rows(&self) -> usize {
        self.n
    }
}

/// Fits `y ≈ intercept + X w` minimizing `‖y − Xw‖² + λ‖w_std‖²`, where the
/// penalty applies to weights of the standardized columns and the
/// intercept is unpenalized. Constant columns receive weight zero.
pub fn ridge_fit(x: &FeatureMatrix, y: &[f64], lambda: f64) -> Result<RidgeModel> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParams(format!("lambda must be >= 0, got {lambda}")));
    }
    let stats = Standardized::new(x, y, Execution::default())?;
    let cols: Vec<usize> = (0..x.n_cols()).collect();
    let w_std = stats.solve(&cols, lambda)?;
    let (weights, intercept) = stats.unscale(&cols, &w_std);
    Ok(RidgeModel {
        columns: x.columns.clone(),
        weights,
        intercept,
        lambda,
        standardized_weights: w_std,
    })
}
