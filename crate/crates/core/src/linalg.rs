//! Dense symmetric solves and cross-product accumulation for the
//! least-squares fits.

use crate::error::{Error, Result};
use crate::exec::{map_range, Execution};

/// Relative pivot floor below which a Cholesky factorization is declared singular.
const PIVOT_TOLERANCE: f64 = 1e-12;

/// Rows per partial cross-product. Fixed so the summation order (and hence
/// every bit of the result) does not depend on the thread count.
const CHUNK_ROWS: usize = 2048;

/// Solves `a x = b` for symmetric positive-definite `a` (row-major `n × n`).
pub(crate) fn cholesky_solve(a: &[f64], n: usize, b: &[f64]) -> Result<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max);
    if n > 0 && !(scale > 0.0) {
        return Err(Error::SingularSystem);
    }
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > PIVOT_TOLERANCE * scale) {
            return Err(Error::SingularSystem);
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Ok(x)
}

/// `XᵀX` and `Xᵀy` accumulated over `n_rows` rows produced on demand.
#[derive(Debug, Clone)]
pub(crate) struct CrossProducts {
    pub xtx: Vec<f64>,
    pub xty: Vec<f64>,
}

/// Accumulates cross products of the rows written by `fill(row, buf)`,
/// which returns the row's target value.
pub(crate) fn cross_products<F>(exec: Execution, n_rows: usize, p: usize, fill: F) -> CrossProducts
where
    F: Fn(usize, &mut [f64]) -> f64 + Sync + Send,
{
    let n_chunks = n_rows.div_ceil(CHUNK_ROWS);
    let partials = map_range(exec, n_chunks, |c| {
        let mut xtx = vec![0.0; p * p];
        let mut xty = vec![0.0; p];
        let mut row = vec![0.0; p];
        let lo = c * CHUNK_ROWS;
        let hi = (lo + CHUNK_ROWS).min(n_rows);
        for r in lo..hi {
            let y = fill(r, &mut row);
            for i in 0..p {
                let xi = row[i];
                if xi == 0.0 {
                    continue;
                }
                xty[i] += xi * y;
                let g = &mut xtx[i * p..(i + 1) * p];
                for j in i..p {
                    g[j] += xi * row[j];
                }
            }
        }
        (xtx, xty)
    });
    let mut xtx = vec![0.0; p * p];
    let mut xty = vec![0.0; p];
    for (g, v) in partials {
        for (a, b) in xtx.iter_mut().zip(&g) {
            *a += b;
        }
        for (a, b) in xty.iter_mut().zip(&v) {
            *a += b;
        }
    }
    for i in 0..p {
        for j in 0..i {
            xtx[i * p + j] = xtx[j * p + i];
        }
    }
    CrossProducts { xtx, xty }
}
