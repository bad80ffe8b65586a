//! Recursive feature elimination ranked by standardized ridge weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;

use super::ridge::Standardized;
use super::FeatureMatrix;

/// Share of rows (taken from the end) used to score each elimination step.
const VALIDATION_SHARE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EliminationStep {
    pub dropped: Vec<String>,
    /// Validation MSE of the model fitted just before the drop.
    pub validation_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Surviving columns in their original order.
    pub kept: Vec<String>,
    pub trace: Vec<EliminationStep>,
}

impl SelectionResult {
    pub fn identity(x: &FeatureMatrix) -> Self {
        SelectionResult {
            kept: x.columns.clone(),
            trace: Vec::new(),
        }
    }
}

/// Drops the `step` columns with the smallest |standardized ridge weight|
/// until `k` remain. Ridge is fitted on the chronologically first 80% of
/// rows and scored on the last 20%.
pub fn rfe(x: &FeatureMatrix, y: &[f64], k: usize, step: usize, lambda: f64) -> Result<SelectionResult> {
    let width = x.n_cols();
    if k == 0 || k > width {
        return Err(Error::InvalidK { k, width });
    }
    if step == 0 {
        return Err(Error::InvalidParams("rfe step must be >= 1".into()));
    }
    if k == width {
        return Ok(SelectionResult::identity(x));
    }
    let n = x.n_rows();
    let n_val = (n as f64 * VALIDATION_SHARE).floor() as usize;
    let n_fit = n - n_val;
    if n_val == 0 || n_fit < 2 {
        return Err(Error::TooFewRows(format!("{n} rows cannot be split for validation")));
    }
    let fit = x.slice_rows(0..n_fit);
    let stats = Standardized::new(&fit, &y[..n_fit], Execution::default())?;
    debug_assert_eq!(stats.n_rows(), n_fit);

    let mut remaining: Vec<usize> = (0..width).collect();
    let mut trace = Vec::new();
    while remaining.len() > k {
        let w_std = stats.solve(&remaining, lambda)?;
        let (weights, intercept) = stats.unscale(&remaining, &w_std);
        let mse = (n_fit..n)
            .map(|r| {
                let row = x.row(r);
                let pred = intercept
                    + remaining
                        .iter()
                        .zip(&weights)
                        .map(|(&c, w)| w * row[c])
                        .sum::<f64>();
                (pred - y[r]).powi(2)
            })
            .sum::<f64>()
            / n_val as f64;

        let mut order: Vec<usize> = (0..remaining.len()).collect();
        order.sort_by(|&a, &b| w_std[a].abs().total_cmp(&w_std[b].abs()).then(a.cmp(&b)));
        let n_drop = step.min(remaining.len() - k);
        let mut drop: Vec<usize> = order[..n_drop].to_vec();
        drop.sort_unstable();
        trace.push(EliminationStep {
            dropped: drop.iter().map(|&i| x.columns[remaining[i]].clone()).collect(),
            validation_mse: mse,
        });
        for &i in drop.iter().rev() {
            remaining.remove(i);
        }
    }
    Ok(SelectionResult {
        kept: remaining.iter().map(|&c| x.columns[c].clone()).collect(),
        trace,
    })
}
