//! Ridge-regularized complex least squares on normal equations, with
//! iterative refinement to keep the regularization bias far below the
//! recovery tolerances.

use crate::error::{Error, Result};
use crate::spectral::{stft, StftConfig};
use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use num_complex::Complex64;

/// Default relative ridge weight: `lambda = 1e-6 * trace(A^H A) / P`.
pub const RIDGE_REL_DEFAULT: f64 = 1e-6;

/// Refinement passes applied after the regularized solve. Each pass
/// multiplies the ridge bias by `lambda / (sigma + lambda)`.
pub const REFINE_STEPS: usize = 2;

/// Cholesky factorization of `A^H A + lambda I` for one design matrix,
/// reusable across many right-hand sides.
pub struct RidgeFactor {
    a: DMatrix<Complex64>,
    chol: nalgebra::Cholesky<Complex64, nalgebra::Dyn>,
    lambda: f64,
    /// Rough condition estimate of the Gram matrix from the Cholesky
    /// diagonal, for diagnostics.
    pub condition_estimate: f64,
}

impl RidgeFactor {
    pub fn new(a: DMatrix<Complex64>, ridge_rel: f64) -> Result<Self> {
        let p = a.ncols();
        let mut gram = a.ad_mul(&a);
        let trace: f64 = (0..p).map(|i| gram[(i, i)].re).sum();
        let lambda = if trace > 0.0 {
            ridge_rel * trace / p as f64
        } else {
            ridge_rel
        };
        for i in 0..p {
            gram[(i, i)] += Complex64::new(lambda, 0.0);
        }
        let chol = nalgebra::Cholesky::new(gram)
            .ok_or_else(|| Error::Domain("normal equations are not positive definite".into()))?;
        let diag: Vec<f64> = (0..p).map(|i| chol.l_dirty()[(i, i)].re).collect();
        let max = diag.iter().cloned().fold(0.0, f64::max);
        let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        let condition_estimate = if min > 0.0 { (max / min).powi(2) } else { f64::INFINITY };
        Ok(Self { a, chol, lambda, condition_estimate })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn design(&self) -> &DMatrix<Complex64> {
        &self.a
    }

    /// Solve `min |A x - b|^2 + lambda |x|^2`, then `refine` passes of
    /// iterative refinement against the unregularized residual.
    pub fn solve(&self, b: &DVector<Complex64>, refine: usize) -> DVector<Complex64> {
        let rhs = self.a.ad_mul(b);
        let mut x = self.chol.solve(&rhs);
        for _ in 0..refine {
            let residual = b - &self.a * &x;
            let corr = self.chol.solve(&self.a.ad_mul(&residual));
            x += corr;
        }
        x
    }

    /// Apply `(A^H A + lambda I)^{-1}` to each column.
    pub fn solve_normal(&self, rhs: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        self.chol.solve(rhs)
    }
}

/// Bins whose peak magnitude falls below this fraction of the global
/// observation peak are treated as silent: their regularized solution is
/// pinned to exactly zero instead of fitting FFT round-off junk.
pub const SILENT_REL_THRESHOLD: f64 = 1e-12;

/// Per-frequency observation rows from mic recordings: `rows[f]` is an
/// `M x T` matrix, `None` where every mic is silent at bin `f` relative
/// to the loudest bin anywhere.
pub fn observation_rows(
    signals: &[Vec<f64>],
    cfg: &StftConfig,
) -> Result<(Vec<Option<Array2<Complex64>>>, usize)> {
    if signals.is_empty() {
        return Err(Error::Config("no observation channels".into()));
    }
    let len = signals[0].len();
    if signals.iter().any(|s| s.len() != len) {
        return Err(Error::Dimension("observation channels differ in length".into()));
    }
    let n_frames = cfg.frame_count(len)?;
    let bins = cfg.bins();
    let m = signals.len();
    let specs: Vec<_> = signals
        .iter()
        .map(|signal| stft(signal, cfg))
        .collect::<Result<Vec<_>>>()?;
    let global_peak = specs
        .iter()
        .flat_map(|s| s.data.iter())
        .map(|c| c.norm())
        .fold(0.0, f64::max);
    let floor = global_peak * SILENT_REL_THRESHOLD;
    let mut rows: Vec<Option<Array2<Complex64>>> = vec![None; bins];
    for f in 0..bins {
        let peak = specs
            .iter()
            .flat_map(|s| s.data.row(f).into_iter())
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        if peak <= floor || peak == 0.0 {
            continue;
        }
        let mut row = Array2::zeros((m, n_frames));
        for (j, spec) in specs.iter().enumerate() {
            for t in 0..n_frames {
                row[(j, t)] = spec.data[(f, t)];
            }
        }
        rows[f] = Some(row);
    }
    Ok((rows, n_frames))
}
