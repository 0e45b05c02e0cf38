//! Reference methods: least-squares VAR, BIC order selection, fixed-order
//! ("blockwise") Granger causality, and total-variation denoising.

mod tv;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use tv::{total_variation, tv_denoise, tv_objective};

use crate::error::{Error, Result};
use crate::granger::{DirectionalTest, GcReport};
use crate::linalg::{add_ridge, SpdSolver};
use crate::model::{build_lag_design, BivariateSeries, Design, LagDesign, VarCoefficients};

/// Least-squares coefficients and whether a ridge had to be added.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coefficients: VarCoefficients,
    /// `H Hᵀ` was singular and `1e-8·trace` was added to its diagonal.
    pub regularized: bool,
}

/// `X = B G⁻¹` with a ridge fallback for singular `G`.
fn solve_normal(g: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(DMatrix<f64>, bool)> {
    if let Ok(s) = SpdSolver::new(g.clone()) {
        return Ok((s.right_solve(b), false));
    }
    let eps = 1e-8 * g.trace().max(f64::MIN_POSITIVE);
    let s = SpdSolver::new(add_ridge(g, eps))?;
    Ok((s.right_solve(b), true))
}

/// `A = Y Hᵀ (H Hᵀ)⁻¹`.
pub fn ols_var_fit(design: &LagDesign) -> Result<OlsFit> {
    let (a, regularized) = solve_normal(&design.gram(), &design.cross())?;
    Ok(OlsFit {
        coefficients: VarCoefficients::from_matrix(a)?,
        regularized,
    })
}

/// BIC over orders `1..=m_max` on a common estimation sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicScan {
    pub orders_tried: Vec<usize>,
    /// `None` where the residual covariance was singular.
    pub bic_values: Vec<Option<f64>>,
    pub best_order: usize,
}

/// `BIC(m) = T·ln det Σ̂_m + 4m·ln T`, every order fitted on the last
/// `n − m_max` samples so the criteria are comparable. Ties go to the
/// smaller order.
pub fn bic_order(series: &BivariateSeries, m_max: usize) -> Result<BicScan> {
    if m_max == 0 {
        return Err(Error::Parameter("m_max must be at least 1".into()));
    }
    let n = series.n_samples();
    if n <= 2 * m_max + 2 {
        return Err(Error::Length {
            needed: 2 * m_max + 3,
            available: n,
        });
    }
    let full = build_lag_design(series, m_max)?;
    let t = full.t();
    let mut bic_values = Vec::with_capacity(m_max);
    for m in 1..=m_max {
        // rows of the common design restricted to the first m lags of each channel
        let h = DMatrix::from_fn(2 * m, t, |i, c| {
            let (block, lag) = (i / m, i % m);
            full.h()[(block * m_max + lag, c)]
        });
        let d = LagDesign::from_parts(full.y().clone(), h)?;
        let fit = ols_var_fit(&d)?;
        let r = d.residuals(&fit.coefficients);
        let sigma = (&r * r.transpose()) / t as f64;
        let det = sigma.determinant();
        bic_values.push(if det > 0.0 && det.is_finite() {
            Some(t as f64 * det.ln() + (4 * m) as f64 * (t as f64).ln())
        } else {
            None
        });
    }
    let best = bic_values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i + 1, v)))
        .fold(None, |acc: Option<(usize, f64)>, (m, v)| match acc {
            Some((_, bv)) if bv <= v => acc,
            _ => Some((m, v)),
        })
        .ok_or_else(|| Error::Numeric("every order had a singular residual covariance".into()))?;
    Ok(BicScan {
        orders_tried: (1..=m_max).collect(),
        bic_values,
        best_order: best.0,
    })
}

/// Own-lag least squares for one channel: `(residual SS, T)`.
fn own_lag_rss(target: &[f64], lags: &DMatrix<f64>) -> Result<f64> {
    let t = target.len();
    let y = DMatrix::from_row_slice(1, t, target);
    let (a, _) = solve_normal(&(lags * lags.transpose()), &(&y * lags.transpose()))?;
    Ok((y - a * lags).norm_squared())
}

/// Fixed-order least-squares Granger test: `p = 2·order`, `p′ = order`.
pub fn blockwise_gc(series: &BivariateSeries, order: usize, confidence: f64) -> Result<GcReport> {
    if order == 0 {
        return Err(Error::Parameter("order must be at least 1".into()));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Parameter(format!(
            "confidence must lie in (0, 1), got {confidence}"
        )));
    }
    if series.n_samples() <= 2 * order + 1 {
        return Err(Error::Length {
            needed: 2 * order + 2,
            available: series.n_samples(),
        });
    }
    let d = build_lag_design(series, order)?;
    let fit = ols_var_fit(&d)?;
    let (ru_y, ru_x) = d.rss(&fit.coefficients);
    let t = d.t();
    let h_y = d.h().rows(0, order).into_owned();
    let h_x = d.h().rows(order, order).into_owned();
    let rr_y = own_lag_rss(&series.y()[order..], &h_y)?;
    let rr_x = own_lag_rss(&series.x()[order..], &h_x)?;
    Ok(GcReport {
        x_to_y: DirectionalTest::evaluate(rr_y, ru_y, 2 * order, order, t, confidence)?,
        y_to_x: DirectionalTest::evaluate(rr_x, ru_x, 2 * order, order, t, confidence)?,
        confidence,
        t_eff: t,
    })
}
