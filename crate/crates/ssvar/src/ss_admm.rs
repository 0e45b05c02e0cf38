//! Convex ADMM for joint coefficient, lag-order and stationarity estimation.
//!
//! Splits the program into an `A` block (closed-form ridge-type solve with a
//! Cholesky factor computed once per fit), the hierarchical-penalty block of
//! [`crate::log_penalty`], and a stationarity copy `Z` updated by the spectral
//! prox of the doubled companion matrix `2Γ(½(A + U3))`.

use nalgebra::{DMatrix, DVector};

use crate::companion::{embed, extract, CompanionMatrix};
use crate::error::{Error, Result};
use crate::linalg::{add_ridge, is_finite, SpdSolver};
use crate::log_penalty::{estimate_orders, GroupStructure, LogState};
use crate::model::{
    Design, FitResult, HyperParams, IterationRecord, LagDesign, Orders, RestrictedDesign,
    VarCoefficients,
};
use crate::prox::shrink_spectrum;

/// Coefficient iterate, stationarity copy and its scaled dual.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub a: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub u3: DMatrix<f64>,
    pub iteration: usize,
    pub primal_residuals: Vec<f64>,
    pub dual_residuals: Vec<f64>,
}

impl AdmmState {
    pub fn new(a0: DMatrix<f64>) -> Self {
        let (r, c) = a0.shape();
        Self {
            z: a0.clone(),
            a: a0,
            u3: DMatrix::zeros(r, c),
            iteration: 0,
            primal_residuals: Vec::new(),
            dual_residuals: Vec::new(),
        }
    }
}

/// `vec(Aᵀ)`.
pub(crate) fn vec_rows(a: &DMatrix<f64>) -> DVector<f64> {
    let n = a.ncols();
    DVector::from_fn(a.nrows() * n, |i, _| a[(i / n, i % n)])
}

/// Inverse of [`vec_rows`] for two rows.
pub(crate) fn unvec_rows(c: &DVector<f64>) -> DMatrix<f64> {
    let n = c.len() / 2;
    DMatrix::from_fn(2, n, |r, j| c[r * n + j])
}

/// Right-hand side `ρ3(Z − U3) + ρ1·vec⁻¹(c − u1)ᵀ + F` of the `A` update,
/// where `F` is the (possibly weighted) data cross moment.
pub(crate) fn a_update_rhs(
    fidelity_cross: &DMatrix<f64>,
    state: &AdmmState,
    log: &LogState,
    rho1: f64,
    rho3: f64,
) -> DMatrix<f64> {
    (&state.z - &state.u3) * rho3 + unvec_rows(&(&log.c - &log.u1)) * rho1 + fidelity_cross
}

/// `A = [ρ3(Z − U3) + ρ1·vec⁻¹(c − u1)ᵀ + Y Hᵀ](H Hᵀ + (ρ1+ρ3) I)⁻¹`, with
/// `solver` holding the factor of `H Hᵀ + (ρ1+ρ3) I` and `cross = Y Hᵀ`.
pub fn update_a(
    cross: &DMatrix<f64>,
    solver: &SpdSolver,
    state: &AdmmState,
    log: &LogState,
    params: &HyperParams,
) -> VarCoefficients {
    let rhs = a_update_rhs(cross, state, log, params.rho1, params.rho3);
    VarCoefficients::from_matrix(solver.right_solve(&rhs)).expect("2 x 2m̄ by construction")
}

/// `Z = Γ⁻¹(shrink(2Γ(½W), t))` with `W = A + U3`.
pub(crate) fn update_z(w: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    if t == 0.0 {
        return Ok(w.clone());
    }
    let coeffs = VarCoefficients::from_matrix(w.clone())?;
    let mut x = embed(&coeffs).into_matrix();
    let n = x.nrows();
    for i in 0..n.saturating_sub(2) {
        x[(i + 2, i)] = 2.0;
    }
    let shrunk = shrink_spectrum(&x, t)?;
    Ok(extract(&CompanionMatrix::from_matrix(shrunk)?).into_matrix())
}

/// Primal and dual residuals of one sweep.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Residuals {
    pub az: f64,
    pub c: f64,
    pub pq: f64,
    pub dual: f64,
}

impl Residuals {
    pub fn primal(&self) -> f64 {
        self.az.max(self.c).max(self.pq)
    }

    pub fn converged(&self, a: &DMatrix<f64>, tol: f64) -> bool {
        let scale = tol * (1.0 + a.norm());
        self.primal() < scale && self.dual < scale
    }
}

/// Penalty and stationarity sweep shared by both solvers: latents, `q`, `c`,
/// `Z`, then the dual updates. Call after the `A` update.
pub(crate) fn split_sweep(
    state: &mut AdmmState,
    log: &mut LogState,
    groups: &GroupStructure,
    params: &HyperParams,
    spectral_t: f64,
) -> Result<Residuals> {
    let (z_prev, c_prev, q_prev) = (state.z.clone(), log.c.clone(), log.q.clone());
    let vec_a = vec_rows(&state.a);
    log.update_latents(groups, params.lambda, params.rho2);
    log.update_q(params.rho2);
    log.update_c(&vec_a, params.rho1);
    state.z = update_z(&(&state.a + &state.u3), spectral_t)?;
    log.update_duals(&vec_a);
    state.u3 += &state.a - &state.z;

    let res = Residuals {
        az: (&state.a - &state.z).norm(),
        c: (&vec_a - &log.c).norm(),
        pq: (&log.p - &log.q).norm(),
        dual: (params.rho3 * (&state.z - &z_prev).norm())
            .max(params.rho1 * (&log.c - &c_prev).norm())
            .max(params.rho2 * (&log.q - &q_prev).norm()),
    };
    state.iteration += 1;
    state.primal_residuals.push(res.primal());
    state.dual_residuals.push(res.dual);
    if !(is_finite(&state.a) && is_finite(&state.z) && log.c.iter().all(|v| v.is_finite())) {
        return Err(Error::Divergence {
            iteration: state.iteration,
        });
    }
    Ok(res)
}

/// `½‖ΣP − c‖²`.
pub(crate) fn coupling(log: &LogState) -> f64 {
    0.5 * (log.latent_sum() - &log.c).norm_squared()
}

fn fit_design<D: Design>(design: &D, params: &HyperParams, restricted: bool) -> Result<FitResult> {
    params.validate()?;
    let m = design.m_bar();
    let cross = design.cross();
    let solver = SpdSolver::new(add_ridge(&design.gram(), params.rho()))?;
    let a0 = solver.right_solve(&cross);
    let groups = GroupStructure::new(m, params.weighting);
    let mut log = LogState::new(m, vec_rows(&a0));
    let mut state = AdmmState::new(a0);
    let spectral_t = params.gamma_for(m) / params.rho3;
    let mut history = Vec::new();
    let mut converged = false;

    while state.iteration < params.max_iters {
        state.a = update_a(&cross, &solver, &state, &log, params).into_matrix();
        let res = split_sweep(&mut state, &mut log, &groups, params, spectral_t)?;
        let current = VarCoefficients::from_matrix(state.a.clone())?;
        let (ry, rx) = design.rss(&current);
        history.push(IterationRecord {
            primal_az: res.az,
            primal_c: res.c,
            primal_pq: res.pq,
            objective: 0.5 * (ry + rx) + log.penalty(&groups, params.lambda) + coupling(&log),
        });
        if res.converged(&state.a, params.tol) {
            converged = true;
            break;
        }
    }

    let mut orders = estimate_orders(&log, params.zero_tol);
    let full = VarCoefficients::from_matrix(state.a.clone())?;
    let mut coefficients = full.truncate_to(orders);
    if restricted {
        orders = Orders::new(orders.yy, 0, 0, orders.xx);
        coefficients = coefficients.without_cross_terms();
    }
    let rss = design.rss(&coefficients);
    Ok(FitResult {
        coefficients,
        z: VarCoefficients::from_matrix(state.z)?,
        orders,
        rss,
        n_obs: design.n_obs(),
        iterations: state.iteration,
        residual_history: history,
        converged,
    })
}

/// Fits the full bivariate model.
///
/// The returned coefficients are the `A` iterate restricted to the estimated
/// lag support, and the residual sums of squares refer to those coefficients.
pub fn fit_unrestricted(design: &LagDesign, params: &HyperParams) -> Result<FitResult> {
    fit_design(design, params, false)
}

/// Fits the model without cross coupling, using `lambda_prime` and
/// `gamma_prime`. Cross blocks are dropped from the result and their orders
/// reported as 0.
pub fn fit_restricted(design: &RestrictedDesign, params: &HyperParams) -> Result<FitResult> {
    fit_design(design, &params.for_restricted(), true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::companion::spectral_norm;
    use crate::model::{build_lag_design, build_restricted_design, BivariateSeries};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn simulate(coeffs: &VarCoefficients, n: usize, sd: f64, seed: u64) -> BivariateSeries {
        let m = coeffs.m_bar();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let burn = 200;
        let (mut y, mut x) = (vec![0.0; n + burn], vec![0.0; n + burn]);
        for t in m..n + burn {
            let (mut vy, mut vx) = (0.0, 0.0);
            for k in 1..=m {
                let a = coeffs.lag_matrix(k);
                vy += a[(0, 0)] * y[t - k] + a[(0, 1)] * x[t - k];
                vx += a[(1, 0)] * y[t - k] + a[(1, 1)] * x[t - k];
            }
            let ey: f64 = StandardNormal.sample(&mut rng);
            let ex: f64 = StandardNormal.sample(&mut rng);
            y[t] = vy + sd * ey;
            x[t] = vx + sd * ex;
        }
        BivariateSeries::new(y[burn..].to_vec(), x[burn..].to_vec()).unwrap()
    }

    fn ols(design: &LagDesign) -> DMatrix<f64> {
        SpdSolver::new(design.gram()).unwrap().right_solve(&design.cross())
    }

    fn random_state(m: usize, rng: &mut ChaCha8Rng) -> (AdmmState, LogState) {
        let mut r = |rows, cols| DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
        let mut st = AdmmState::new(r(2, 2 * m));
        st.z = r(2, 2 * m);
        st.u3 = r(2, 2 * m);
        let mut log = LogState::new(m, vec_rows(&r(2, 2 * m)));
        log.u1 = vec_rows(&r(2, 2 * m));
        (st, log)
    }

    #[test]
    fn vec_rows_matches_coefficient_vectorisation() {
        let a = DMatrix::from_fn(2, 6, |r, c| (10 * r + c) as f64);
        let c = VarCoefficients::from_matrix(a.clone()).unwrap().to_vec_c();
        assert_eq!(vec_rows(&a), c);
        assert_eq!(unvec_rows(&c), a);
    }

    #[test]
    fn a_update_without_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = 3;
        let (st, log) = random_state(m, &mut rng);
        let params = HyperParams { rho1: 0.7, rho3: 1.9, ..Default::default() };
        let zero_cross = DMatrix::zeros(2, 2 * m);
        let solver = SpdSolver::new(add_ridge(&DMatrix::zeros(2 * m, 2 * m), params.rho())).unwrap();
        let a = update_a(&zero_cross, &solver, &st, &log, &params).into_matrix();
        let expected = ((&st.z - &st.u3) * params.rho3 + unvec_rows(&(&log.c - &log.u1)) * params.rho1)
            / params.rho();
        assert!((a - expected).amax() < 1e-14);
    }

    /// Solves the same quadratic through the Kronecker normal equations.
    #[test]
    fn a_update_matches_generic_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = 4;
        let t = 40;
        let h = DMatrix::from_fn(2 * m, t, |_, _| rng.random_range(-1.0..1.0));
        let y = DMatrix::from_fn(2, t, |_, _| rng.random_range(-1.0..1.0));
        let (st, log) = random_state(m, &mut rng);
        let params = HyperParams { rho1: 0.4, rho3: 2.5, ..Default::default() };
        let design = LagDesign::from_parts(y.clone(), h.clone()).unwrap();
        let solver = SpdSolver::new(add_ridge(&design.gram(), params.rho())).unwrap();
        let a = update_a(&design.cross(), &solver, &st, &log, &params).into_matrix();

        // unknowns: vec(Aᵀ), rows of A stacked; each row solves independently
        let n = 2 * m;
        let mut big = DMatrix::zeros(2 * n, 2 * n);
        let mut rhs = DVector::zeros(2 * n);
        let target_c = unvec_rows(&(&log.c - &log.u1));
        let target_z = &st.z - &st.u3;
        for r in 0..2 {
            for i in 0..n {
                for j in 0..n {
                    let g: f64 = (0..t).map(|k| h[(i, k)] * h[(j, k)]).sum();
                    big[(r * n + i, r * n + j)] = g + if i == j { params.rho() } else { 0.0 };
                }
                let yh: f64 = (0..t).map(|k| y[(r, k)] * h[(i, k)]).sum();
                rhs[r * n + i] = yh + params.rho1 * target_c[(r, i)] + params.rho3 * target_z[(r, i)];
            }
        }
        let sol = big.lu().solve(&rhs).unwrap();
        assert!((vec_rows(&a) - sol).amax() < 1e-10);
    }

    #[test]
    fn z_update_respects_clip_level() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = 5;
        let w = DMatrix::from_fn(2, 2 * m, |_, _| rng.random_range(-0.5..0.5));
        assert_eq!(update_z(&w, 0.0).unwrap(), w);
        let z = update_z(&w, 2.0 * (m as f64 - 1.0)).unwrap();
        assert!(spectral_norm(&z) <= 1.0 + 1e-12);
        let big = update_z(&w, 1e6).unwrap();
        assert!(big.amax() < 1e-12);
    }

    #[test]
    fn zero_data_gives_zero_fit() {
        let s = BivariateSeries::new(vec![0.0; 60], vec![0.0; 60]).unwrap();
        let p = HyperParams::default();
        let u = fit_unrestricted(&build_lag_design(&s, 4).unwrap(), &p).unwrap();
        assert_eq!(u.orders, Orders::default());
        assert_eq!(u.rss, (0.0, 0.0));
        assert!(u.coefficients.matrix().amax() == 0.0);
        let r = fit_restricted(&build_restricted_design(&s, 4).unwrap(), &p).unwrap();
        assert_eq!(r.rss, (0.0, 0.0));
        assert!(r.coefficients.matrix().amax() == 0.0);
    }

    #[test]
    fn unpenalised_fit_is_least_squares() {
        let truth = VarCoefficients::from_blocks(&[0.5, -0.2], &[0.3, 0.0], &[0.0, 0.0], &[0.4, 0.1]).unwrap();
        let s = simulate(&truth, 400, 1.0, 11);
        let d = build_lag_design(&s, 3).unwrap();
        let p = HyperParams { lambda: 0.0, gamma: Some(0.0), tol: 1e-10, max_iters: 20000, ..Default::default() };
        let fit = fit_unrestricted(&d, &p).unwrap();
        assert!(fit.converged);
        assert_eq!(fit.orders, Orders::new(3, 3, 3, 3));
        assert!((fit.coefficients.matrix() - ols(&d)).amax() < 1e-6);
    }

    #[test]
    fn large_penalty_kills_everything() {
        let truth = VarCoefficients::from_blocks(&[0.5], &[0.3], &[0.0], &[0.4]).unwrap();
        let s = simulate(&truth, 300, 1.0, 12);
        let d = build_lag_design(&s, 3).unwrap();
        let p = HyperParams { lambda: 1e3, ..Default::default() };
        let fit = fit_unrestricted(&d, &p).unwrap();
        assert_eq!(fit.orders, Orders::default());
        assert_eq!(fit.coefficients.matrix().amax(), 0.0);
    }

    #[test]
    fn recovers_sparse_orders() {
        let truth =
            VarCoefficients::from_blocks(&[0.5, -0.3, 0.0, 0.0], &[0.0; 4], &[0.0; 4], &[0.4, 0.25, 0.0, 0.0]).unwrap();
        let s = simulate(&truth, 500, 0.1f64.sqrt(), 21);
        let d = build_lag_design(&s, 4).unwrap();
        let p = HyperParams { lambda: 0.15, ..Default::default() };
        let fit = fit_unrestricted(&d, &p).unwrap();
        assert_eq!(fit.orders, Orders::new(2, 0, 0, 2));
        let nm = crate::model::nmse(fit.coefficients.matrix(), truth.matrix()).unwrap();
        assert!(nm < 0.05, "nmse {nm}");
    }
}
