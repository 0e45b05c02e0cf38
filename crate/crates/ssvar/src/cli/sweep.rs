//! Measurement-noise sweep comparing the denoising solver with a
//! TV-denoise-then-fit pipeline.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::output::{Csv, Field};
use crate::baselines::tv_denoise;
use crate::error::{Error, Result};
use crate::model::{build_lag_design, nmse, BivariateSeries, HyperParams};
use crate::simulate::{simulate, SimConfig};
use crate::ss_admm::fit_unrestricted;
use crate::ssd_admm::denoise_series;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Evenly spaced measurement variances from 0 to `max_var` inclusive.
    pub grid_points: usize,
    pub max_var: f64,
    pub seeds: usize,
    /// Seeds used are `seed_offset .. seed_offset + seeds`.
    pub seed_offset: u64,
    /// Weight of the TV denoiser in the baseline pipeline.
    pub tv_weight: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            grid_points: 15,
            max_var: 1.41,
            seeds: 5,
            seed_offset: 0,
            tv_weight: 0.01,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_points == 0 || self.seeds == 0 {
            return Err(Error::Parameter("sweep needs at least one grid point and one seed".into()));
        }
        if !(self.max_var.is_finite() && self.max_var >= 0.0) {
            return Err(Error::Parameter(format!("max_var must be ≥ 0, got {}", self.max_var)));
        }
        if !(self.tv_weight.is_finite() && self.tv_weight >= 0.0) {
            return Err(Error::Parameter(format!("tv_weight must be ≥ 0, got {}", self.tv_weight)));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        if self.grid_points == 1 {
            return vec![0.0];
        }
        let step = self.max_var / (self.grid_points - 1) as f64;
        (0..self.grid_points).map(|i| i as f64 * step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMethod {
    SsdAdmm,
    TvSsAdmm,
}

impl SweepMethod {
    pub const ALL: [SweepMethod; 2] = [SweepMethod::SsdAdmm, SweepMethod::TvSsAdmm];

    pub fn name(self) -> &'static str {
        match self {
            SweepMethod::SsdAdmm => "ssd_admm",
            SweepMethod::TvSsAdmm => "tv_ss_admm",
        }
    }
}

/// Coefficient NMSE against the generating model, one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub noise_var: f64,
    pub seed: u64,
    pub method: SweepMethod,
    pub nmse: f64,
}

/// Mean coefficient NMSE over seeds at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub noise_var: f64,
    pub method: SweepMethod,
    pub nmse: f64,
    pub n_seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub runs: Vec<SweepRun>,
}

impl SweepResult {
    pub fn mean(&self, grid_index: usize, method: SweepMethod) -> f64 {
        self.points
            .iter()
            .filter(|p| p.method == method)
            .nth(grid_index)
            .map_or(f64::NAN, |p| p.nmse)
    }

    pub fn to_csv(&self) -> Csv {
        let mut csv = Csv::new(&["noise_var", "method", "nmse", "n_seeds"]);
        for p in &self.points {
            csv.row(&[Field::F(p.noise_var), Field::S(p.method.name().into()), Field::F(p.nmse), Field::U(p.n_seeds)]);
        }
        csv
    }
}

/// NMSE of one method on one simulated observation.
pub fn sweep_run(sim: &SimConfig, params: &HyperParams, tv_weight: f64, method: SweepMethod) -> Result<f64> {
    let obs = simulate(sim)?;
    let m = sim.m_bar;
    let truth = obs.truth.coefficients.matrix();
    let estimate = match method {
        SweepMethod::SsdAdmm => denoise_series(&obs.noisy, m, params)?.fit.coefficients,
        SweepMethod::TvSsAdmm => {
            let smoothed = BivariateSeries::new(
                tv_denoise(obs.noisy.y(), tv_weight),
                tv_denoise(obs.noisy.x(), tv_weight),
            )?;
            fit_unrestricted(&build_lag_design(&smoothed, m)?, params)?.coefficients
        }
    };
    nmse(estimate.matrix(), truth)
}

/// Runs every (grid point, seed, method) combination in parallel; output
/// order follows the grid, then the method, then the seed.
pub fn run_noise_sweep(sim: &SimConfig, params: &HyperParams, sweep: &SweepConfig) -> Result<SweepResult> {
    sweep.validate()?;
    let grid = sweep.grid();
    let mut units = Vec::new();
    for &var in &grid {
        for method in SweepMethod::ALL {
            for s in 0..sweep.seeds as u64 {
                units.push((var, method, sweep.seed_offset + s));
            }
        }
    }
    let runs = units
        .par_iter()
        .map(|&(noise_var, method, seed)| {
            let cfg = SimConfig { measurement_var: noise_var, seed, ..sim.clone() };
            let nmse = sweep_run(&cfg, params, sweep.tv_weight, method)?;
            Ok(SweepRun { noise_var, seed, method, nmse })
        })
        .collect::<Result<Vec<_>>>()?;
    let points = runs
        .chunks(sweep.seeds)
        .map(|chunk| SweepPoint {
            noise_var: chunk[0].noise_var,
            method: chunk[0].method,
            nmse: chunk.iter().map(|r| r.nmse).sum::<f64>() / chunk.len() as f64,
            n_seeds: chunk.len(),
        })
        .collect();
    Ok(SweepResult { points, runs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Orders;

    #[test]
    fn grid_is_inclusive() {
        let g = SweepConfig::default().grid();
        assert_eq!(g.len(), 15);
        assert_eq!(g[0], 0.0);
        assert!((g[14] - 1.41).abs() < 1e-12);
    }

    #[test]
    fn one_row_per_point_and_method() {
        let sim = SimConfig { orders: Orders::new(2, 1, 0, 2), m_bar: 4, n_samples: 200, terminal_min: 0.3, terminal_max: 0.4, ..Default::default() };
        let params = HyperParams { max_iters: 50, ..Default::default() };
        let sweep = SweepConfig { grid_points: 3, max_var: 0.5, seeds: 2, ..Default::default() };
        let out = run_noise_sweep(&sim, &params, &sweep).unwrap();
        assert_eq!(out.points.len(), 6);
        assert_eq!(out.runs.len(), 12);
        assert_eq!(out.to_csv().as_str().lines().count(), 7);

        // zero-noise TV pipeline with zero weight is the plain fit of the clean series
        let clean = simulate(&SimConfig { measurement_var: 0.0, ..sim.clone() }).unwrap();
        let plain = fit_unrestricted(&build_lag_design(&clean.clean, 4).unwrap(), &params).unwrap();
        let direct = nmse(plain.coefficients.matrix(), clean.truth.coefficients.matrix()).unwrap();
        let via = sweep_run(&SimConfig { measurement_var: 0.0, ..sim }, &params, 0.0, SweepMethod::TvSsAdmm).unwrap();
        assert_eq!(direct, via);
    }
}
