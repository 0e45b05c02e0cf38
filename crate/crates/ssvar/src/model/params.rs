use serde::{Deserialize, Serialize};

use super::{Orders, VarCoefficients};
use crate::error::{Error, Result};

/// Weight `w_g` attached to each prefix group of the hierarchical penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupWeighting {
    /// `w_g = 1` for every group.
    Uniform,
    /// `w_g = |g|^{1/2}`.
    #[default]
    SqrtSize,
}

/// Penalty weights, augmented-Lagrangian parameters and stopping rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    /// Hierarchical-sparsity weight, unrestricted model.
    pub lambda: f64,
    /// Hierarchical-sparsity weight, restricted model.
    pub lambda_prime: f64,
    /// Stationarity weight, unrestricted model. `None` selects
    /// `ρ3·2(m̄ − 1)`, the smallest weight that clips the shrunk companion
    /// spectrum at 1.
    pub gamma: Option<f64>,
    /// Stationarity weight, restricted model (`None` as for `gamma`).
    pub gamma_prime: Option<f64>,
    /// Wavelet-sparsity weight on the excitation noise. `None` estimates it
    /// from the finest-scale wavelet coefficients of the initial residual.
    pub kappa: Option<f64>,
    /// Data-fidelity weight of the denoising program.
    pub alpha: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub weighting: GroupWeighting,
    /// Relative threshold (times `max |c|`) below which latent mass counts as zero.
    pub zero_tol: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            lambda: 0.05,
            lambda_prime: 0.05,
            gamma: None,
            gamma_prime: None,
            kappa: None,
            alpha: 1.0,
            rho1: 1.0,
            rho2: 1.0,
            rho3: 1.0,
            max_iters: 2000,
            tol: 1e-6,
            weighting: GroupWeighting::SqrtSize,
            zero_tol: 1e-6,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if self.kappa.is_some_and(|k| !(k >= 0.0)) {
            return Err(Error::Parameter(format!("kappa must be ≥ 0, got {:?}", self.kappa)));
        }
        let nonneg = [
            ("lambda", self.lambda),
            ("lambda_prime", self.lambda_prime),
            ("gamma", self.gamma.unwrap_or(0.0)),
            ("gamma_prime", self.gamma_prime.unwrap_or(0.0)),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Parameter(format!("{name} must be finite and ≥ 0, got {v}")));
            }
        }
        let positive = [
            ("alpha", self.alpha),
            ("rho1", self.rho1),
            ("rho2", self.rho2),
            ("rho3", self.rho3),
            ("tol", self.tol),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Parameter(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::Parameter("max_iters must be at least 1".into()));
        }
        if !(self.zero_tol >= 0.0 && self.zero_tol < 1.0) {
            return Err(Error::Parameter("zero_tol must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// `ρ = ρ1 + ρ3`.
    pub fn rho(&self) -> f64 {
        self.rho1 + self.rho3
    }

    /// Stationarity weight actually used for maximum lag `m_bar`.
    pub fn gamma_for(&self, m_bar: usize) -> f64 {
        self.gamma
            .unwrap_or(self.rho3 * 2.0 * m_bar.saturating_sub(1) as f64)
    }

    /// Copy whose unrestricted weights are replaced by the restricted ones.
    pub fn for_restricted(&self) -> Self {
        Self {
            lambda: self.lambda_prime,
            gamma: self.gamma_prime,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// `‖A − Z‖_F`
    pub primal_az: f64,
    /// `‖vec(Aᵀ) − c‖₂`
    pub primal_c: f64,
    /// `‖p − q‖₂`
    pub primal_pq: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Coefficients restricted to the estimated lag support.
    pub coefficients: VarCoefficients,
    /// Final iterate of the stationarity split variable `Z`.
    pub z: VarCoefficients,
    pub orders: Orders,
    /// Residual sums of squares of the y- and x-equations.
    pub rss: (f64, f64),
    /// Observations per equation used for the residuals.
    pub n_obs: usize,
    pub iterations: usize,
    pub residual_history: Vec<IterationRecord>,
    pub converged: bool,
}
