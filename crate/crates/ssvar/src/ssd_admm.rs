//! Non-convex ADMM that fits the VAR while splitting the observation residual
//! into wavelet-sparse excitation `E` and dense measurement noise `ΔY`.
//!
//! The lag matrix is cleaned as `H = Ĥ − ΔH`, where `ΔH` is block-Toeplitz:
//! each channel block `T` (m̄×T) is fixed by its first column and first row,
//!
//! ```text
//! T[i, j] = first_col[i − j]   (j ≤ i)
//! T[i, j] = row_tail[j − i − 1] (j > i)
//! ```
//!
//! with the row tail taken from `ΔY` and the first column from a minimum-norm
//! least-squares solve.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::linalg::{add_ridge, is_finite, SpdSolver};
use crate::log_penalty::{estimate_orders, GroupStructure, LogState};
use crate::model::{
    build_lag_design, BivariateSeries, FitResult, HyperParams, IterationRecord, LagDesign,
    Orders, VarCoefficients,
};
use crate::ss_admm::{a_update_rhs, coupling, update_z, vec_rows, AdmmState};
use crate::wavelet::{dwt_with, wavelet_shrink, WaveletConfig};

/// Multiple of the robust noise scale used for the default `κ/α`, tuned on
/// held-out simulation seeds.
pub const KAPPA_MAD_FACTOR: f64 = 0.25;

/// Consecutive sign changes of the objective increment treated as oscillation.
pub const OSCILLATION_FLIPS: usize = 50;

/// Noise decomposition carried by the denoising solver.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseState {
    /// Excitation noise, 2×T.
    pub e: DMatrix<f64>,
    /// Measurement noise on the targets, 2×T.
    pub dy: DMatrix<f64>,
    /// Measurement noise on the lags, 2m̄×T, block-Toeplitz.
    pub dh: DMatrix<f64>,
    /// `Ĥ − ΔH`.
    pub h_clean: DMatrix<f64>,
    pub y_hat: DMatrix<f64>,
    pub h_hat: DMatrix<f64>,
}

impl DenoiseState {
    /// `E = ΔY = ΔH = 0`, `H = Ĥ`.
    pub fn new(y_hat: DMatrix<f64>, h_hat: DMatrix<f64>) -> Result<Self> {
        LagDesign::from_parts(y_hat.clone(), h_hat.clone())?;
        let (r, t) = y_hat.shape();
        Ok(Self {
            e: DMatrix::zeros(r, t),
            dy: DMatrix::zeros(r, t),
            dh: DMatrix::zeros(h_hat.nrows(), t),
            h_clean: h_hat.clone(),
            y_hat,
            h_hat,
        })
    }

    pub fn m_bar(&self) -> usize {
        self.h_hat.nrows() / 2
    }

    /// `max |Ŷ − A H − E − ΔY|`.
    pub fn decomposition_error(&self, a: &DMatrix<f64>) -> f64 {
        (&self.y_hat - a * &self.h_clean - &self.e - &self.dy).amax()
    }
}

/// Builds the block-Toeplitz lag-noise matrix from its generators.
///
/// `first_col` has length 2m̄ (y block then x block); `row_y` and `row_x` give
/// the first-row entries from column 1 on and must hold at least `t − 1`
/// values. Entry `(0, 0)` of each block comes from `first_col`.
pub fn toeplitz_complete(first_col: &DVector<f64>, row_y: &[f64], row_x: &[f64], t: usize) -> Result<DMatrix<f64>> {
    if !first_col.len().is_multiple_of(2) || first_col.is_empty() {
        return Err(Error::Shape(format!("first column has odd length {}", first_col.len())));
    }
    let need = t.saturating_sub(1);
    if row_y.len() < need || row_x.len() < need {
        return Err(Error::Shape(format!(
            "row tails of length {} and {} are shorter than {need}",
            row_y.len(),
            row_x.len()
        )));
    }
    let m = first_col.len() / 2;
    let mut dh = DMatrix::zeros(2 * m, t);
    for (b, row) in [row_y, row_x].into_iter().enumerate() {
        for i in 0..m {
            for j in 0..t {
                dh[(b * m + i, j)] = if j <= i { first_col[b * m + i - j] } else { row[j - i - 1] };
            }
        }
    }
    Ok(dh)
}

/// Inverse of [`toeplitz_complete`]: the first column and the two first-row
/// tails (length `t − 1`).
pub fn toeplitz_generators(dh: &DMatrix<f64>) -> (DVector<f64>, Vec<f64>, Vec<f64>) {
    let m = dh.nrows() / 2;
    let tail = |r: usize| (1..dh.ncols()).map(|j| dh[(r, j)]).collect::<Vec<_>>();
    (dh.column(0).into_owned(), tail(0), tail(m))
}

/// Whether every channel block satisfies `dh[i, j] = dh[i − 1, j − 1]`.
pub fn is_block_toeplitz(dh: &DMatrix<f64>) -> bool {
    let m = dh.nrows() / 2;
    (0..2).all(|b| {
        (1..m).all(|i| (1..dh.ncols()).all(|j| dh[(b * m + i, j)] == dh[(b * m + i - 1, j - 1)]))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DhColumn {
    pub dh: DVector<f64>,
    /// `A Aᵀ` was singular and a ridge of `1e−8·trace` was added.
    pub regularized: bool,
}

/// Minimum-norm solution of `A Δh = A h − ŷ + e + Δy`, i.e.
/// `Δh = Aᵀ (A Aᵀ)⁻¹ rhs`.
pub fn solve_dh_first_column(
    a: &DMatrix<f64>,
    h_col: &DVector<f64>,
    y_col_hat: &DVector<f64>,
    e_col: &DVector<f64>,
    dy_col: &DVector<f64>,
) -> Result<DhColumn> {
    if a.nrows() != 2 || h_col.len() != a.ncols() || [y_col_hat, e_col, dy_col].iter().any(|v| v.len() != 2) {
        return Err(Error::Shape(format!(
            "A is {:?}, h has {} entries; expected 2×n and n",
            a.shape(),
            h_col.len()
        )));
    }
    let rhs = a * h_col - y_col_hat + e_col + dy_col;
    let rhs = Vector2::new(rhs[0], rhs[1]);
    let gram: Matrix2<f64> = Matrix2::from_fn(|i, j| a.row(i).dot(&a.row(j)));
    let trace = gram.trace();
    let mut regularized = false;
    let w = match solve_2x2(&gram, &rhs, trace) {
        Some(w) => w,
        None => {
            regularized = true;
            let eps = 1e-8 * trace;
            solve_2x2(&(gram + Matrix2::identity() * eps), &rhs, 0.0).unwrap_or_else(Vector2::zeros)
        }
    };
    Ok(DhColumn {
        dh: a.transpose() * DVector::from_column_slice(w.as_slice()),
        regularized,
    })
}

fn solve_2x2(g: &Matrix2<f64>, rhs: &Vector2<f64>, scale: f64) -> Option<Vector2<f64>> {
    let det = g.determinant();
    let floor = 1e-14 * scale * scale;
    if !(det.abs() > floor) || det == 0.0 {
        return None;
    }
    let inv = Matrix2::new(g[(1, 1)], -g[(0, 1)], -g[(1, 0)], g[(0, 0)]) / det;
    Some(inv * rhs)
}

/// `E = W⁻¹(S_{κ/α}(W(Ŷ − A H)))`, row by row.
pub fn update_e(
    y_hat: &DMatrix<f64>,
    a: &DMatrix<f64>,
    h_clean: &DMatrix<f64>,
    kappa: f64,
    alpha: f64,
    wavelet: &WaveletConfig,
) -> Result<DMatrix<f64>> {
    let threshold = if kappa.is_infinite() { f64::INFINITY } else { kappa / alpha };
    wavelet_shrink(&(y_hat - a * h_clean), threshold, wavelet)
}

/// `A = [ρ3(Z − U3) + ρ1·vec⁻¹(c − u1)ᵀ + α(Ŷ − E)Hᵀ][α H Hᵀ + (ρ1+ρ3) I]⁻¹`.
pub fn update_a_noisy(
    y_hat: &DMatrix<f64>,
    e: &DMatrix<f64>,
    h_clean: &DMatrix<f64>,
    state: &AdmmState,
    log: &LogState,
    params: &HyperParams,
) -> Result<VarCoefficients> {
    let gram = h_clean * h_clean.transpose() * params.alpha;
    let solver = SpdSolver::new(add_ridge(&gram, params.rho()))?;
    let cross = (y_hat - e) * h_clean.transpose() * params.alpha;
    let rhs = a_update_rhs(&cross, state, log, params.rho1, params.rho3);
    VarCoefficients::from_matrix(solver.right_solve(&rhs))
}

/// Robust scale `median|d₁| / 0.6745` of the finest detail band, pooled over
/// the rows of `r`.
pub fn mad_noise_scale(r: &DMatrix<f64>, wavelet: &WaveletConfig) -> Result<f64> {
    let mut finest = Vec::new();
    for row in r.row_iter() {
        let signal: Vec<f64> = row.iter().copied().collect();
        let w = dwt_with(&signal, wavelet)?;
        if w.levels == 0 {
            continue;
        }
        let half = w.padded_length() / 2;
        finest.extend(w.coeffs[w.coeffs.len() - half..].iter().map(|v| v.abs()));
    }
    if finest.is_empty() {
        return Ok(0.0);
    }
    finest.sort_by(f64::total_cmp);
    let n = finest.len();
    let median = if n % 2 == 1 { finest[n / 2] } else { 0.5 * (finest[n / 2 - 1] + finest[n / 2]) };
    Ok(median / 0.6745)
}

/// Default `κ = α · KAPPA_MAD_FACTOR · σ̂`, with `σ̂` from [`mad_noise_scale`]
/// of the residual `Ŷ − A₀ Ĥ`.
pub fn default_kappa(residual: &DMatrix<f64>, alpha: f64, wavelet: &WaveletConfig) -> Result<f64> {
    Ok(alpha * KAPPA_MAD_FACTOR * mad_noise_scale(residual, wavelet)?)
}

/// Output of [`fit_denoise`].
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseResult {
    pub fit: FitResult,
    /// Unmasked coefficient iterate that the noise decomposition refers to.
    pub a: DMatrix<f64>,
    /// Largest `|Ŷ − A H − E − ΔY|` seen at the end of any sweep.
    pub max_decomposition_error: f64,
    pub state: DenoiseState,
    /// `κ` actually used.
    pub kappa: f64,
    /// Stopped because the objective kept alternating direction.
    pub oscillated: bool,
    /// Iteration whose state was returned.
    pub returned_iteration: usize,
    /// Some `Δh` column solve needed the ridge fallback.
    pub regularized: bool,
}

impl DenoiseResult {
    /// `Ŷ − ΔY`.
    pub fn denoised_y(&self) -> DMatrix<f64> {
        &self.state.y_hat - &self.state.dy
    }

    /// `A H` with the returned coefficients.
    pub fn fitted(&self) -> DMatrix<f64> {
        self.fit.coefficients.matrix() * &self.state.h_clean
    }

    /// Cleaned series of the original length: the first m̄ samples come from
    /// the first column of the cleaned lag matrix, the rest from `Ŷ − ΔY`.
    pub fn cleaned_series(&self) -> Result<BivariateSeries> {
        let m = self.state.m_bar();
        let y = self.denoised_y();
        let channel = |c: usize| {
            let mut s: Vec<f64> = (0..m).map(|i| self.state.h_clean[(c * m + m - 1 - i, 0)]).collect();
            s.extend(y.row(c).iter());
            s
        };
        BivariateSeries::new(channel(0), channel(1))
    }
}

#[derive(Clone)]
struct Snapshot {
    admm: AdmmState,
    log: LogState,
    noise: DenoiseState,
}

struct Options {
    update_dh: bool,
    track_best: bool,
}

/// Runs the denoising ADMM on observed `Ŷ` (2×T) and `Ĥ` (2m̄×T).
///
/// Each sweep updates `A`, the latent groups, `q`, `c`, `Z`, `E`, `ΔY`, `ΔH`,
/// `H` and the duals, then refreshes `ΔY = Ŷ − A H − E` so the decomposition
/// holds exactly for the stored state. Stops on convergence, after
/// `max_iters`, or once the objective increment has changed sign more than
/// [`OSCILLATION_FLIPS`] times in a row; in the last two cases the state with
/// the lowest augmented-Lagrangian value is returned.
pub fn fit_denoise(y_hat: &DMatrix<f64>, h_hat: &DMatrix<f64>, params: &HyperParams) -> Result<DenoiseResult> {
    fit_denoise_with(y_hat, h_hat, params, &Options { update_dh: true, track_best: true })
}

/// [`fit_denoise`] on the lag design of a series.
pub fn denoise_series(series: &BivariateSeries, m_bar: usize, params: &HyperParams) -> Result<DenoiseResult> {
    let design = build_lag_design(series, m_bar)?;
    fit_denoise(design.y(), design.h(), params)
}

fn fit_denoise_with(
    y_hat: &DMatrix<f64>,
    h_hat: &DMatrix<f64>,
    params: &HyperParams,
    opts: &Options,
) -> Result<DenoiseResult> {
    params.validate()?;
    let mut noise = DenoiseState::new(y_hat.clone(), h_hat.clone())?;
    let m = noise.m_bar();
    let t = y_hat.ncols();
    let wavelet = WaveletConfig::default();

    let a0 = SpdSolver::new(add_ridge(&(h_hat * h_hat.transpose() * params.alpha), params.rho()))?
        .right_solve(&(y_hat * h_hat.transpose() * params.alpha));
    let kappa = match params.kappa {
        Some(k) => k,
        None => default_kappa(&(y_hat - &a0 * h_hat), params.alpha, &wavelet)?,
    };
    let groups = GroupStructure::new(m, params.weighting);
    let mut log = LogState::new(m, vec_rows(&a0));
    let mut admm = AdmmState::new(a0);
    let spectral_t = params.gamma_for(m) / params.rho3;

    let mut history = Vec::new();
    let mut best: Option<(f64, usize, Snapshot)> = None;
    let (mut converged, mut oscillated, mut regularized) = (false, false, false);
    let mut max_decomposition_error = 0.0f64;
    let (mut prev_obj, mut prev_delta, mut flips) = (None::<f64>, 0.0f64, 0usize);

    while admm.iteration < params.max_iters {
        let (e_prev, h_prev) = (noise.e.clone(), noise.h_clean.clone());
        admm.a = update_a_noisy(y_hat, &noise.e, &noise.h_clean, &admm, &log, params)?.into_matrix();
        let vec_a = vec_rows(&admm.a);

        // Latents, q, c and Z come before the noise updates; the duals after.
        let c_prev = log.c.clone();
        let q_prev = log.q.clone();
        let z_prev = admm.z.clone();
        log.update_latents(&groups, params.lambda, params.rho2);
        log.update_q(params.rho2);
        log.update_c(&vec_a, params.rho1);
        admm.z = update_z(&(&admm.a + &admm.u3), spectral_t)?;

        noise.e = update_e(y_hat, &admm.a, &noise.h_clean, kappa, params.alpha, &wavelet)?;
        noise.dy = y_hat - &admm.a * &noise.h_clean - &noise.e;
        if opts.update_dh {
            let col = solve_dh_first_column(
                &admm.a,
                &h_hat.column(0).into_owned(),
                &y_hat.column(0).into_owned(),
                &noise.e.column(0).into_owned(),
                &noise.dy.column(0).into_owned(),
            )?;
            regularized |= col.regularized;
            let row_y: Vec<f64> = noise.dy.row(0).iter().copied().collect();
            let row_x: Vec<f64> = noise.dy.row(1).iter().copied().collect();
            noise.dh = toeplitz_complete(&col.dh, &row_y, &row_x, t)?;
            noise.h_clean = h_hat - &noise.dh;
        }

        log.update_duals(&vec_a);
        admm.u3 += &admm.a - &admm.z;
        noise.dy = y_hat - &admm.a * &noise.h_clean - &noise.e;
        admm.iteration += 1;
        max_decomposition_error = max_decomposition_error.max(noise.decomposition_error(&admm.a));

        let az = (&admm.a - &admm.z).norm();
        let c_res = (&vec_a - &log.c).norm();
        let pq = (&log.p - &log.q).norm();
        let dual = (params.rho3 * (&admm.z - &z_prev).norm())
            .max(params.rho1 * (&log.c - &c_prev).norm())
            .max(params.rho2 * (&log.q - &q_prev).norm());
        let primal = az.max(c_res).max(pq);
        admm.primal_residuals.push(primal);
        admm.dual_residuals.push(dual);
        if !(is_finite(&admm.a) && is_finite(&noise.e) && is_finite(&noise.h_clean)) {
            return Err(Error::Divergence {
                iteration: admm.iteration,
            });
        }

        let objective = augmented_lagrangian(&admm, &log, &noise, &groups, params, kappa, &wavelet)?;
        history.push(IterationRecord {
            primal_az: az,
            primal_c: c_res,
            primal_pq: pq,
            objective,
        });
        if best.as_ref().is_none_or(|(v, _, _)| objective < *v) {
            best = Some((
                objective,
                admm.iteration,
                Snapshot {
                    admm: admm.clone(),
                    log: log.clone(),
                    noise: noise.clone(),
                },
            ));
        }

        if let Some(p) = prev_obj {
            let delta = objective - p;
            if delta * prev_delta < 0.0 {
                flips += 1;
            } else {
                flips = 0;
            }
            prev_delta = delta;
        }
        prev_obj = Some(objective);
        if flips > OSCILLATION_FLIPS {
            oscillated = true;
            break;
        }

        let scale = params.tol * (1.0 + admm.a.norm());
        let noise_moved = (&noise.e - &e_prev).norm().max((&noise.h_clean - &h_prev).norm());
        if primal < scale && dual < scale && noise_moved < params.tol * (1.0 + y_hat.norm()) {
            converged = true;
            break;
        }
    }

    let iterations = admm.iteration;
    let (admm, log, noise, returned_iteration) = match best {
        Some((_, it, snap)) if !converged && opts.track_best => (snap.admm, snap.log, snap.noise, it),
        _ => (admm, log, noise, iterations),
    };
    let orders: Orders = estimate_orders(&log, params.zero_tol);
    let coefficients = VarCoefficients::from_matrix(admm.a.clone())?.truncate_to(orders);
    let z = VarCoefficients::from_matrix(admm.z.clone())?;
    let target = &noise.y_hat - &noise.dy;
    let r = &target - coefficients.matrix() * &noise.h_clean;
    let fit = FitResult {
        coefficients,
        z,
        orders,
        rss: (r.row(0).norm_squared(), r.row(1).norm_squared()),
        n_obs: t,
        iterations,
        residual_history: history,
        converged,
    };
    Ok(DenoiseResult {
        fit,
        a: admm.a,
        max_decomposition_error,
        state: noise,
        kappa,
        oscillated,
        returned_iteration,
        regularized,
    })
}

/// `κ‖W(E)‖₁ + α/2‖Ŷ − AH − E‖² + λΩ + ½‖ΣP − c‖² + ρ1/2‖vec(Aᵀ) − c + u1‖²
/// + ρ3/2‖A − Z + U3‖²`; the stationarity term is left out.
fn augmented_lagrangian(
    admm: &AdmmState,
    log: &LogState,
    noise: &DenoiseState,
    groups: &GroupStructure,
    params: &HyperParams,
    kappa: f64,
    wavelet: &WaveletConfig,
) -> Result<f64> {
    let mut sparsity = 0.0;
    if kappa > 0.0 && kappa.is_finite() {
        for row in noise.e.row_iter() {
            let signal: Vec<f64> = row.iter().copied().collect();
            sparsity += dwt_with(&signal, wavelet)?.coeffs.iter().map(|v| v.abs()).sum::<f64>();
        }
    }
    let fidelity = 0.5 * params.alpha * noise.dy.norm_squared();
    let c_term = 0.5 * params.rho1 * (vec_rows(&admm.a) - &log.c + &log.u1).norm_squared();
    let z_term = 0.5 * params.rho3 * (&admm.a - &admm.z + &admm.u3).norm_squared();
    Ok(kappa * sparsity + fidelity + log.penalty(groups, params.lambda) + coupling(log) + c_term + z_term)
}
