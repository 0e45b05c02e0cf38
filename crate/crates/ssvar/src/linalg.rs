//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

/// Cached Cholesky factor of a symmetric positive-definite matrix `M`,
/// used to apply `X ↦ X M⁻¹` to row-stacked right-hand sides.
#[derive(Debug, Clone)]
pub struct SpdSolver {
    chol: Cholesky<f64, Dyn>,
}

impl SpdSolver {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite entry in system matrix".into()));
        }
        Cholesky::new(m)
            .map(|chol| Self { chol })
            .ok_or_else(|| Error::Numeric("Cholesky factorization failed".into()))
    }

    /// `B M⁻¹` for a symmetric `M`, computed as `(M⁻¹ Bᵀ)ᵀ`.
    pub fn right_solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(&b.transpose()).transpose()
    }
}

/// `G + ρI` without mutating `G`.
pub fn add_ridge(g: &DMatrix<f64>, ridge: f64) -> DMatrix<f64> {
    let mut out = g.clone();
    for i in 0..out.nrows() {
        out[(i, i)] += ridge;
    }
    out
}

pub fn is_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}
