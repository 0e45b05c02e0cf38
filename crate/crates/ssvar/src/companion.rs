//! Companion-matrix embedding of a bivariate VAR(m̄) and the spectral
//! quantities used to reason about its stability.
//!
//! With `ξ_t = [y(t), x(t)]ᵀ` and lag matrices `A_k`, the companion matrix is
//!
//! ```text
//! Γ(A) = [ A_1  A_2  …  A_{m̄−1}  A_m̄ ]
//!        [  I    0   …    0       0  ]
//!        [  0    I   …    0       0  ]
//!        [            ⋱              ]
//!        [  0    0   …    I       0  ]
//! ```
//!
//! acting on the stacked state `[ξ_{t−1}; …; ξ_{t−m̄}]`. The coefficient
//! matrix itself keeps the y-lags/x-lags layout; the embedding interleaves the
//! columns into lag-major order so the eigenvalues are those of the VAR.

use nalgebra::{DMatrix, Schur};

use crate::error::{Error, Result};
use crate::model::VarCoefficients;

/// A `2m̄ × 2m̄` matrix in companion layout. Only the top two rows carry
/// coefficients when it comes from [`embed`]; general matrices (such as the
/// shrunk reconstructions inside the spectral prox) are also allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct CompanionMatrix {
    m: DMatrix<f64>,
    m_bar: usize,
}

impl CompanionMatrix {
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || !m.nrows().is_multiple_of(2) || m.nrows() == 0 {
            return Err(Error::Shape(format!("expected 2m̄×2m̄, got {:?}", m.shape())));
        }
        let m_bar = m.nrows() / 2;
        Ok(Self { m, m_bar })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn m_bar(&self) -> usize {
        self.m_bar
    }
}

/// `Γ(A)`.
pub fn embed(a: &VarCoefficients) -> CompanionMatrix {
    let m = a.m_bar();
    let n = 2 * m;
    let mut g = DMatrix::zeros(n, n);
    for k in 1..=m {
        let lag = a.lag_matrix(k);
        g.view_mut((0, 2 * (k - 1)), (2, 2)).copy_from(&lag);
    }
    for i in 0..n.saturating_sub(2) {
        g[(i + 2, i)] = 1.0;
    }
    CompanionMatrix { m: g, m_bar: m }
}

/// `Γ⁻¹(M)`: reads the coefficients from the top two rows of any
/// `2m̄ × 2m̄` matrix.
pub fn extract(m: &CompanionMatrix) -> VarCoefficients {
    let mb = m.m_bar;
    let mut a = DMatrix::zeros(2, 2 * mb);
    for k in 0..mb {
        for r in 0..2 {
            a[(r, k)] = m.m[(r, 2 * k)];
            a[(r, mb + k)] = m.m[(r, 2 * k + 1)];
        }
    }
    VarCoefficients::from_matrix(a).expect("2 x 2m̄ by construction")
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Largest eigenvalue modulus of `Γ(A)`.
pub fn spectral_radius(a: &VarCoefficients) -> Result<f64> {
    let g = embed(a).into_matrix();
    let n = g.nrows();
    let schur = Schur::try_new(g, f64::EPSILON, 1000 * n.max(1))
        .ok_or_else(|| Error::Numeric("eigenvalue iteration did not converge".into()))?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

/// `true` iff every eigenvalue of `Γ(A)` has modulus below `1 − eps`.
pub fn is_stationary(a: &VarCoefficients, eps: f64) -> Result<bool> {
    Ok(spectral_radius(a)? < 1.0 - eps)
}
