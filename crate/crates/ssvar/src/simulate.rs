//! Synthetic data: stable sparse VAR coefficients, wavelet-sparse excitation,
//! Gaussian measurement noise, and ARFIMA long-memory series.

use nalgebra::{DMatrix, Schur};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::companion::{is_stationary, spectral_radius};
use crate::error::{Error, Result};
use crate::model::{BivariateSeries, Block, Orders, VarCoefficients};
use crate::wavelet::{dwt_with, idwt, WaveletCoeffs, WaveletConfig};

/// Burn-in used by [`gen_arfima`].
pub const DEFAULT_BURN_IN: usize = 500;

const MAX_DRAWS: usize = 50;
const MAX_RESCALES: usize = 100;

// Independent random streams derived from one seed.
const STREAM_COEFFS: u64 = 1;
const STREAM_EXCITATION_Y: u64 = 2;
const STREAM_EXCITATION_X: u64 = 3;
const STREAM_MEASUREMENT: u64 = 4;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub orders: Orders,
    /// Maximum lag of the fitted models (coefficients are zero-padded to it).
    pub m_bar: usize,
    pub n_samples: usize,
    /// Variance of the excitation noise.
    pub innovation_var: f64,
    /// Variance of the additive measurement noise.
    pub measurement_var: f64,
    /// Fraction of zero wavelet coefficients in the excitation.
    pub wavelet_sparsity: f64,
    pub arfima_d: f64,
    pub burn_in: usize,
    pub seed: u64,
    /// Required gap between the companion eigen-radius and 1.
    pub spectral_margin: f64,
    /// Magnitude range of the coefficients before each block's last lag.
    pub coef_min: f64,
    pub coef_max: f64,
    /// Magnitude range of the last coefficient of each nonzero block.
    pub terminal_min: f64,
    pub terminal_max: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            orders: Orders::new(17, 21, 20, 18),
            m_bar: 30,
            n_samples: 942,
            innovation_var: 1.0,
            measurement_var: 0.01,
            wavelet_sparsity: 0.7,
            arfima_d: 0.3,
            burn_in: 500,
            seed: 0,
            spectral_margin: 0.02,
            coef_min: 0.03,
            coef_max: 0.07,
            terminal_min: 0.15,
            terminal_max: 0.2,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Parameter(msg.to_string()))
            }
        };
        check(self.n_samples >= 2, "n_samples must be at least 2")?;
        check(self.m_bar >= 1, "m_bar must be at least 1")?;
        check(
            self.orders.max() <= self.m_bar,
            "orders must not exceed m_bar",
        )?;
        check(
            self.innovation_var.is_finite() && self.innovation_var >= 0.0,
            "innovation_var must be >= 0",
        )?;
        check(
            self.measurement_var.is_finite() && self.measurement_var >= 0.0,
            "measurement_var must be >= 0",
        )?;
        check(
            (0.0..=1.0).contains(&self.wavelet_sparsity),
            "wavelet_sparsity must lie in [0, 1]",
        )?;
        check(
            self.arfima_d > -0.5 && self.arfima_d < 0.5,
            "arfima_d must lie in (-0.5, 0.5)",
        )?;
        check(
            self.spectral_margin > 0.0 && self.spectral_margin < 1.0,
            "spectral_margin must lie in (0, 1)",
        )?;
        check(
            self.coef_min >= 0.0 && self.coef_max >= self.coef_min && self.coef_max.is_finite(),
            "need 0 <= coef_min <= coef_max",
        )?;
        check(
            self.terminal_min >= 0.0
                && self.terminal_max >= self.terminal_min
                && self.terminal_max.is_finite(),
            "need 0 <= terminal_min <= terminal_max",
        )?;
        Ok(())
    }
}

/// Magnitude ranges for [`gen_stable_var_in`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagnitudeRange {
    pub interior: (f64, f64),
    pub terminal: (f64, f64),
}

impl MagnitudeRange {
    fn of(config: &SimConfig) -> Self {
        Self {
            interior: (config.coef_min, config.coef_max),
            terminal: (config.terminal_min, config.terminal_max),
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn draw_coefficients(orders: Orders, range: MagnitudeRange, rng: &mut ChaCha8Rng) -> VarCoefficients {
    let mut a = VarCoefficients::zeros(orders.max().max(1));
    for (b, m) in Block::ALL.into_iter().zip(orders.as_array()) {
        for lag in 1..=m {
            let mag = uniform(rng, if lag == m { range.terminal } else { range.interior });
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            a.set(b, lag, sign * mag);
        }
    }
    a
}

fn rescale(a: &VarCoefficients, s: f64) -> VarCoefficients {
    let mut out = a.clone();
    for b in Block::ALL {
        for lag in 1..=a.m_bar() {
            out.set(b, lag, a.get(b, lag) * s.powi(lag as i32));
        }
    }
    out
}

/// Random coefficients with exactly the requested prefix supports and
/// companion eigen-radius at most `1 − spectral_margin`. Signs are random;
/// the last lag of every block is drawn from a larger magnitude range so the
/// order stays identifiable.
///
/// Draws are rejected until one is stable; after 50 rejections the last draw
/// is shrunk geometrically (`A_k ← s^k A_k`, which scales every companion
/// eigenvalue by `s`).
pub fn gen_stable_var(orders: Orders, spectral_margin: f64, seed: u64) -> Result<VarCoefficients> {
    let range = MagnitudeRange::of(&SimConfig::default());
    gen_stable_var_in(orders, spectral_margin, range, seed)
}

/// [`gen_stable_var`] with an explicit magnitude range.
pub fn gen_stable_var_in(
    orders: Orders,
    spectral_margin: f64,
    range: MagnitudeRange,
    seed: u64,
) -> Result<VarCoefficients> {
    if !(spectral_margin > 0.0 && spectral_margin < 1.0) {
        return Err(Error::Parameter(format!(
            "spectral margin must lie in (0, 1), got {spectral_margin}"
        )));
    }
    let target = 1.0 - spectral_margin;
    let mut rng = rng_for(seed, STREAM_COEFFS);
    let mut a = VarCoefficients::zeros(orders.max().max(1));
    for _ in 0..MAX_DRAWS {
        a = draw_coefficients(orders, range, &mut rng);
        if spectral_radius(&a)? <= target {
            return Ok(a);
        }
    }
    for _ in 0..MAX_RESCALES {
        let r = spectral_radius(&a)?;
        if r <= target {
            return Ok(a);
        }
        a = rescale(&a, target / r * (1.0 - 1e-9));
    }
    Err(Error::Generation(
        "could not stabilise coefficients".into(),
    ))
}

/// `ψ_k = Π_{j=1..k} (j − 1 + d) / j`, `k = 0..len`.
pub fn fractional_weights(d: f64, len: usize) -> Vec<f64> {
    let mut psi = Vec::with_capacity(len);
    let mut cur = 1.0;
    for k in 0..len {
        if k > 0 {
            cur *= (k as f64 - 1.0 + d) / k as f64;
        }
        psi.push(cur);
    }
    psi
}

fn check_ar_stable(ar: &[f64]) -> Result<()> {
    if ar.is_empty() {
        return Ok(());
    }
    let p = ar.len();
    let mut c = DMatrix::zeros(p, p);
    for (j, v) in ar.iter().enumerate() {
        c[(0, j)] = *v;
    }
    for i in 1..p {
        c[(i, i - 1)] = 1.0;
    }
    let schur = Schur::try_new(c, f64::EPSILON, 1000 * p)
        .ok_or_else(|| Error::Numeric("AR root computation did not converge".into()))?;
    let radius = schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if radius >= 1.0 {
        return Err(Error::Parameter(format!(
            "AR polynomial is not stable (root modulus {radius:.4})"
        )));
    }
    Ok(())
}

/// ARFIMA(p, d, q) series driven by unit-variance Gaussian innovations:
/// an ARMA recursion followed by the truncated `(1 − B)^{−d}` filter with
/// `K = min(n, 1000)` taps. The first [`DEFAULT_BURN_IN`] samples are
/// discarded.
pub fn gen_arfima(d: f64, ar: &[f64], ma: &[f64], n: usize, seed: u64) -> Result<Vec<f64>> {
    if !(d > -0.5 && d < 0.5) {
        return Err(Error::Parameter(format!("d must lie in (-0.5, 0.5), got {d}")));
    }
    check_ar_stable(ar)?;
    let k = n.min(1000);
    let total = n + DEFAULT_BURN_IN + k;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e: Vec<f64> = (0..total).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut w = vec![0.0; total];
    for t in 0..total {
        let mut v = e[t];
        for (i, a) in ar.iter().enumerate() {
            if t > i {
                v += a * w[t - i - 1];
            }
        }
        for (j, b) in ma.iter().enumerate() {
            if t > j {
                v += b * e[t - j - 1];
            }
        }
        w[t] = v;
    }
    let psi = fractional_weights(d, k + 1);
    let start = k + DEFAULT_BURN_IN;
    Ok((start..total)
        .map(|t| psi.iter().enumerate().map(|(j, p)| p * w[t - j]).sum())
        .collect())
}

/// Planted wavelet coefficients and the signal they synthesise.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseNoise {
    pub signal: Vec<f64>,
    pub planted: WaveletCoeffs,
}

/// Signal of length `n` whose (padded) db4 expansion has
/// `floor((1 − sparsity)·n)` nonzero coefficients at uniformly random
/// positions with `N(0, amplitude²)` values.
pub fn gen_wavelet_sparse(n: usize, sparsity: f64, amplitude: f64, seed: u64) -> Result<SparseNoise> {
    if !(0.0..=1.0).contains(&sparsity) {
        return Err(Error::Parameter(format!("sparsity must lie in [0, 1], got {sparsity}")));
    }
    let config = WaveletConfig::default();
    let mut planted = dwt_with(&vec![0.0; n], &config)?;
    let total = planted.coeffs.len();
    let k = (((1.0 - sparsity) * n as f64).floor() as usize).min(total);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, amplitude.abs()).map_err(|e| Error::Parameter(e.to_string()))?;
    for idx in rand::seq::index::sample(&mut rng, total, k) {
        planted.coeffs[idx] = normal.sample(&mut rng);
    }
    let signal = idwt(&planted)?;
    Ok(SparseNoise { signal, planted })
}

/// Signal-only form of [`gen_wavelet_sparse`].
pub fn gen_wavelet_sparse_noise(n: usize, sparsity: f64, amplitude: f64, seed: u64) -> Result<Vec<f64>> {
    Ok(gen_wavelet_sparse(n, sparsity, amplitude, seed)?.signal)
}

/// Every noise component behind a simulated observation. Matrices are 2×n
/// with the y channel in row 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub coefficients: VarCoefficients,
    pub orders: Orders,
    pub excitation: Vec<Vec<f64>>,
    pub measurement_noise: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub clean: BivariateSeries,
    pub noisy: BivariateSeries,
    pub truth: GroundTruth,
}

/// Runs the VAR recursion driven by wavelet-sparse excitation with variance
/// `innovation_var`, discards the burn-in, then adds Gaussian measurement
/// noise of variance `measurement_var`.
pub fn assemble_observation(coeffs: &VarCoefficients, config: &SimConfig) -> Result<Observation> {
    config.validate()?;
    if !is_stationary(coeffs, 0.0)? {
        return Err(Error::Parameter("generating coefficients are not stable".into()));
    }
    let m = coeffs.m_bar();
    let n = config.n_samples;
    let total = n + config.burn_in;
    let amplitude = if config.wavelet_sparsity < 1.0 {
        (config.innovation_var / (1.0 - config.wavelet_sparsity)).sqrt()
    } else {
        0.0
    };
    // Burn-in plus the first m̄ kept samples, then the regression targets, each
    // sparse in its own wavelet basis so the targets align with the estimator's.
    let head = config.burn_in + m.min(n);
    let excitation = |stream| -> Result<Vec<f64>> {
        let mut rng = rng_for(config.seed, stream);
        let mut out = Vec::with_capacity(total);
        for len in [head, total - head] {
            let seed = rng.random::<u64>();
            if len > 0 {
                out.extend(gen_wavelet_sparse_noise(len, config.wavelet_sparsity, amplitude, seed)?);
            }
        }
        Ok(out)
    };
    let ey = excitation(STREAM_EXCITATION_Y)?;
    let ex = excitation(STREAM_EXCITATION_X)?;

    let lags: Vec<_> = (1..=m).map(|k| coeffs.lag_matrix(k)).collect();
    let (mut y, mut x) = (vec![0.0; total], vec![0.0; total]);
    for t in 0..total {
        let (mut vy, mut vx) = (ey[t], ex[t]);
        for (k, a) in lags.iter().enumerate().take(t) {
            let (py, px) = (y[t - k - 1], x[t - k - 1]);
            vy += a[(0, 0)] * py + a[(0, 1)] * px;
            vx += a[(1, 0)] * py + a[(1, 1)] * px;
        }
        y[t] = vy;
        x[t] = vx;
    }

    let keep = config.burn_in..total;
    let clean = BivariateSeries::new(y[keep.clone()].to_vec(), x[keep.clone()].to_vec())?;
    let sd = config.measurement_var.sqrt();
    let mut rng = rng_for(config.seed, STREAM_MEASUREMENT);
    let mut noise = || -> Vec<f64> {
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sd * z
            })
            .collect()
    };
    let (ny, nx) = if sd > 0.0 { (noise(), noise()) } else { (vec![0.0; n], vec![0.0; n]) };
    let noisy = BivariateSeries::new(
        clean.y().iter().zip(&ny).map(|(a, b)| a + b).collect(),
        clean.x().iter().zip(&nx).map(|(a, b)| a + b).collect(),
    )?;
    Ok(Observation {
        clean,
        noisy,
        truth: GroundTruth {
            coefficients: coeffs.clone(),
            orders: coeffs.support_orders(0.0),
            excitation: vec![ey[keep.clone()].to_vec(), ex[keep].to_vec()],
            measurement_noise: vec![ny, nx],
        },
    })
}

/// Coefficients plus observation for a full configuration.
pub fn simulate(config: &SimConfig) -> Result<Observation> {
    config.validate()?;
    let coeffs = gen_stable_var_in(
        config.orders,
        config.spectral_margin,
        MagnitudeRange::of(config),
        config.seed,
    )?
    .padded_to(config.m_bar)?;
    assemble_observation(&coeffs, config)
}
