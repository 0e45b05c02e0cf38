//! Proximal and projection operators used by the ADMM solvers.

use nalgebra::{DMatrix, DVector};

use crate::companion::{extract, CompanionMatrix};
use crate::error::{Error, Result};
use crate::model::VarCoefficients;

/// Left/right singular vectors and singular values of a square matrix.
#[derive(Debug, Clone)]
pub struct SingularSpectrum {
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

impl SingularSpectrum {
    pub fn of(x: &DMatrix<f64>) -> Result<Self> {
        let n = x.nrows().max(x.ncols());
        let svd = x
            .clone()
            .try_svd(true, true, f64::EPSILON, 200 * n.max(1))
            .ok_or_else(|| Error::Numeric("SVD did not converge".into()))?;
        let (u, v_t) = match (svd.u, svd.v_t) {
            (Some(u), Some(v_t)) => (u, v_t),
            _ => return Err(Error::Numeric("SVD returned no singular vectors".into())),
        };
        Ok(Self {
            u,
            sigma: svd.singular_values,
            v_t,
        })
    }

    /// `U diag(values) Vᵀ`.
    pub fn recompose(&self, values: &[f64]) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (j, s) in values.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * &self.v_t
    }
}

/// Euclidean projection onto `{w : ‖w‖₁ ≤ radius}` by the sort-and-threshold
/// simplex method. Signs are preserved; feasible inputs are returned as is.
pub fn project_l1_ball(v: &[f64], radius: f64) -> Vec<f64> {
    assert!(radius > 0.0, "radius must be positive");
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= radius {
        return v.to_vec();
    }
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, u) in mags.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - radius) / (k + 1) as f64;
        if *u > candidate {
            theta = candidate;
        } else {
            break;
        }
    }
    v.iter()
        .map(|x| x.signum() * (x.abs() - theta).max(0.0))
        .collect()
}

/// `argmin_w t‖w‖∞ + ½‖w − v‖²` via Moreau decomposition:
/// `v − t·P_{‖·‖₁≤1}(v / t)`.
pub fn prox_linf(v: &[f64], t: f64) -> Vec<f64> {
    assert!(t >= 0.0, "prox parameter must be non-negative");
    if t == 0.0 {
        return v.to_vec();
    }
    let scaled: Vec<f64> = v.iter().map(|x| x / t).collect();
    let p = project_l1_ball(&scaled, 1.0);
    v.iter().zip(p).map(|(x, pi)| x - t * pi).collect()
}

/// Spectrum-shrunk reconstruction `U diag(v*) Vᵀ` with
/// `v* = prox_{t‖·‖∞}(σ)`.
pub fn shrink_spectrum(x: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite input to spectral prox".into()));
    }
    if t == 0.0 {
        return Ok(x.clone());
    }
    let spec = SingularSpectrum::of(x)?;
    let shrunk = prox_linf(spec.sigma.as_slice(), t);
    Ok(spec.recompose(&shrunk))
}

/// `Π_t(X) = Γ⁻¹(U diag(v*) Vᵀ)`: the stationarity prox used for the `Z`
/// update. The spectral shrink is exact; reading off the top rows is the
/// approximation that maps back to coefficient space.
pub fn prox_spectral(x: &DMatrix<f64>, t: f64) -> Result<VarCoefficients> {
    assert!(t >= 0.0, "prox parameter must be non-negative");
    let shrunk = shrink_spectrum(x, t)?;
    Ok(extract(&CompanionMatrix::from_matrix(shrunk)?))
}

/// Block soft-threshold: `0` if `‖v‖₂ ≤ t`, else `(1 − t/‖v‖₂) v`.
pub fn group_prox(v: &[f64], t: f64) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= t {
        return vec![0.0; v.len()];
    }
    let scale = 1.0 - t / norm;
    v.iter().map(|x| x * scale).collect()
}

/// Elementwise `sign(v)·max(|v| − t, 0)`.
pub fn soft_threshold(v: &[f64], t: f64) -> Vec<f64> {
    v.iter().map(|&x| soft_threshold_scalar(x, t)).collect()
}

#[inline]
pub fn soft_threshold_scalar(x: f64, t: f64) -> f64 {
    x.signum() * (x.abs() - t).max(0.0)
}
