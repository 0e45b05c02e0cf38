//! Periodised multilevel Daubechies transform.
//!
//! Signals whose length is not a multiple of `2^J` are zero-padded at the end;
//! the transform is orthogonal on the padded signal and the pad is stripped on
//! inversion.

mod filters;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use filters::scaling_filter;

use crate::error::{Error, Result};
use crate::prox::soft_threshold_scalar;

const MAX_AUTO_LEVELS: usize = 4;

/// Filter order and decomposition depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WaveletConfig {
    /// Daubechies order (number of vanishing moments), 1 through 10.
    pub order: usize,
    /// Decomposition depth; `None` picks `min(4, floor(log2(T / filter_len)))`.
    pub levels: Option<usize>,
}

impl Default for WaveletConfig {
    fn default() -> Self {
        Self {
            order: 4,
            levels: None,
        }
    }
}

impl WaveletConfig {
    pub fn new(order: usize, levels: Option<usize>) -> Result<Self> {
        if scaling_filter(order).is_none() {
            return Err(Error::Parameter(format!(
                "wavelet order must be in 1..=10, got {order}"
            )));
        }
        Ok(Self { order, levels })
    }

    fn filter(&self) -> Result<&'static [f64]> {
        scaling_filter(self.order)
            .ok_or_else(|| Error::Parameter(format!("unsupported wavelet order {}", self.order)))
    }

    /// Depth used for a signal of length `n`.
    pub fn levels_for(&self, n: usize) -> usize {
        if let Some(j) = self.levels {
            return j;
        }
        let len = 2 * self.order;
        if n < 2 * len {
            return if n >= len { 1 } else { 0 };
        }
        let ratio = n / len;
        let log2 = usize::BITS as usize - 1 - ratio.leading_zeros() as usize;
        log2.min(MAX_AUTO_LEVELS)
    }
}

/// Coefficients laid out as `[a_J, d_J, d_{J-1}, …, d_1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletCoeffs {
    pub coeffs: Vec<f64>,
    pub levels: usize,
    pub original_length: usize,
    pub pad_length: usize,
    pub order: usize,
}

impl WaveletCoeffs {
    pub fn padded_length(&self) -> usize {
        self.original_length + self.pad_length
    }

    /// Length of the coarsest approximation band.
    pub fn approx_len(&self) -> usize {
        self.padded_length() >> self.levels
    }

    fn validate(&self) -> Result<()> {
        let n = self.padded_length();
        let block = 1usize
            .checked_shl(self.levels as u32)
            .ok_or_else(|| Error::Shape(format!("{} levels is too deep", self.levels)))?;
        if self.coeffs.len() != n {
            return Err(Error::Shape(format!(
                "expected {n} coefficients, got {}",
                self.coeffs.len()
            )));
        }
        if !n.is_multiple_of(block) {
            return Err(Error::Shape(format!(
                "length {n} is not a multiple of 2^{}",
                self.levels
            )));
        }
        if self.pad_length >= block && self.levels > 0 {
            return Err(Error::Shape(format!(
                "pad {} must be below 2^{}",
                self.pad_length, self.levels
            )));
        }
        if self.levels > 0 && n == 0 {
            return Err(Error::Shape("empty coefficient vector".into()));
        }
        Ok(())
    }
}

fn analysis_step(x: &[f64], h: &[f64], approx: &mut [f64], detail: &mut [f64]) {
    let n = x.len();
    let l = h.len();
    for k in 0..n / 2 {
        let (mut a, mut d) = (0.0, 0.0);
        for j in 0..l {
            let v = x[(2 * k + j) % n];
            a += h[j] * v;
            let g = if j % 2 == 0 { h[l - 1 - j] } else { -h[l - 1 - j] };
            d += g * v;
        }
        approx[k] = a;
        detail[k] = d;
    }
}

fn synthesis_step(approx: &[f64], detail: &[f64], h: &[f64], out: &mut [f64]) {
    let n = 2 * approx.len();
    let l = h.len();
    out.iter_mut().for_each(|v| *v = 0.0);
    for k in 0..n / 2 {
        for j in 0..l {
            let g = if j % 2 == 0 { h[l - 1 - j] } else { -h[l - 1 - j] };
            out[(2 * k + j) % n] += h[j] * approx[k] + g * detail[k];
        }
    }
}

/// Forward transform with an explicit configuration.
pub fn dwt_with(signal: &[f64], config: &WaveletConfig) -> Result<WaveletCoeffs> {
    let h = config.filter()?;
    let n0 = signal.len();
    let levels = config.levels_for(n0);
    let block = 1usize << levels;
    let n = n0.div_ceil(block) * block;
    let mut work = signal.to_vec();
    work.resize(n, 0.0);
    let mut out = vec![0.0; n];
    let mut len = n;
    let mut approx = vec![0.0; n / 2];
    let mut detail = vec![0.0; n / 2];
    for _ in 0..levels {
        let half = len / 2;
        analysis_step(&work[..len], h, &mut approx[..half], &mut detail[..half]);
        out[half..len].copy_from_slice(&detail[..half]);
        work[..half].copy_from_slice(&approx[..half]);
        len = half;
    }
    out[..len].copy_from_slice(&work[..len]);
    Ok(WaveletCoeffs {
        coeffs: out,
        levels,
        original_length: n0,
        pad_length: n - n0,
        order: config.order,
    })
}

/// Inverse transform; the pad is dropped from the output.
pub fn idwt(coeffs: &WaveletCoeffs) -> Result<Vec<f64>> {
    coeffs.validate()?;
    let h = WaveletConfig::new(coeffs.order, Some(coeffs.levels))?.filter()?;
    let n = coeffs.padded_length();
    let mut work = coeffs.coeffs.clone();
    let mut buf = vec![0.0; n];
    let mut len = coeffs.approx_len();
    for _ in 0..coeffs.levels {
        let (a, d) = (&work[..len], &work[len..2 * len]);
        synthesis_step(a, d, h, &mut buf[..2 * len]);
        work[..2 * len].copy_from_slice(&buf[..2 * len]);
        len *= 2;
    }
    work.truncate(coeffs.original_length);
    Ok(work)
}

/// Forward transform with the default db4 configuration.
pub fn dwt(signal: &[f64]) -> WaveletCoeffs {
    dwt_with(signal, &WaveletConfig::default()).expect("default wavelet is valid")
}

/// `W⁻¹(S_t(W(m)))` for a single signal, with the pad region of the
/// reconstruction discarded.
pub fn shrink_signal(signal: &[f64], t: f64, config: &WaveletConfig) -> Result<Vec<f64>> {
    let mut c = dwt_with(signal, config)?;
    for v in c.coeffs.iter_mut() {
        *v = soft_threshold_scalar(*v, t);
    }
    idwt(&c)
}

/// Row-wise wavelet soft-thresholding of a matrix.
pub fn wavelet_shrink(m: &DMatrix<f64>, t: f64, config: &WaveletConfig) -> Result<DMatrix<f64>> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::Parameter(format!("threshold must be >= 0, got {t}")));
    }
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for r in 0..m.nrows() {
        let row: Vec<f64> = m.row(r).iter().copied().collect();
        let s = if t.is_infinite() {
            vec![0.0; row.len()]
        } else {
            shrink_signal(&row, t, config)?
        };
        for (c, v) in s.into_iter().enumerate() {
            out[(r, c)] = v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn random_signal(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn auto_levels() {
        let c = WaveletConfig::default();
        assert_eq!(c.levels_for(942), 4);
        assert_eq!(c.levels_for(64), 3);
        assert_eq!(c.levels_for(16), 1);
        assert_eq!(c.levels_for(5), 0);
        assert_eq!(WaveletConfig::new(2, Some(6)).unwrap().levels_for(10), 6);
        assert!(WaveletConfig::new(11, None).is_err());
    }

    #[test]
    fn constant_signal_has_no_detail() {
        for order in [1, 2, 4, 7, 10] {
            let cfg = WaveletConfig::new(order, Some(3)).unwrap();
            let n = 8 * 2 * order * 2;
            let c = dwt_with(&vec![2.5; n], &cfg).unwrap();
            let a = c.approx_len();
            assert!(c.coeffs[a..].iter().all(|d| d.abs() < 1e-12), "db{order}");
        }
    }

    #[test]
    fn zero_signal_and_zero_coefficients() {
        let c = dwt(&[0.0; 100]);
        assert!(c.coeffs.iter().all(|v| *v == 0.0));
        assert_eq!(idwt(&c).unwrap(), vec![0.0; 100]);
    }

    #[test]
    fn parseval_and_round_trip() {
        for (i, n) in [64usize, 500, 942, 1024, 17, 3].into_iter().enumerate() {
            let x = random_signal(n, i as u64);
            let c = dwt(&x);
            assert_eq!(c.coeffs.len(), c.padded_length());
            assert!(c.pad_length < (1 << c.levels).max(1));
            assert!((norm(&c.coeffs) - norm(&x)).abs() < 1e-10, "n = {n}");
            let back = idwt(&c).unwrap();
            assert_eq!(back.len(), n);
            let err = x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-10, "n = {n}: {err}");
        }
    }

    #[test]
    fn single_atom_round_trip() {
        let x = random_signal(256, 3);
        let template = dwt(&x);
        for idx in [0, 5, 17, 100, 255] {
            let mut c = template.clone();
            c.coeffs.iter_mut().for_each(|v| *v = 0.0);
            c.coeffs[idx] = 1.0;
            let atom = idwt(&c).unwrap();
            assert!((norm(&atom) - 1.0).abs() < 1e-12);
            let again = dwt(&atom);
            for (k, v) in again.coeffs.iter().enumerate() {
                let expected = if k == idx { 1.0 } else { 0.0 };
                assert!((v - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn malformed_coefficients_rejected() {
        let mut c = dwt(&random_signal(64, 1));
        c.coeffs.pop();
        assert!(matches!(idwt(&c), Err(Error::Shape(_))));
        let mut c = dwt(&random_signal(64, 1));
        c.levels = 7;
        assert!(idwt(&c).is_err());
        let mut c = dwt(&random_signal(60, 1));
        c.pad_length += 8;
        c.original_length -= 8;
        assert!(idwt(&c).is_err());
    }

    #[test]
    fn shrink_limits() {
        let m = DMatrix::from_fn(2, 130, |r, c| ((r * 31 + c * 7) % 13) as f64 - 6.0);
        let cfg = WaveletConfig::default();
        let same = wavelet_shrink(&m, 0.0, &cfg).unwrap();
        assert!((same - &m).abs().max() < 1e-10);
        let zero = wavelet_shrink(&m, f64::INFINITY, &cfg).unwrap();
        assert!(zero.iter().all(|v| *v == 0.0));
        let big = wavelet_shrink(&m, 1e6, &cfg).unwrap();
        assert!(big.iter().all(|v| *v == 0.0));
        assert!(wavelet_shrink(&m, -1.0, &cfg).is_err());
    }

    /// Subgradient conditions of `t‖w‖₁ + ½‖w − c‖²` in coefficient space.
    #[test]
    fn shrink_satisfies_coefficient_optimality() {
        let cfg = WaveletConfig::default();
        for (i, n) in [64usize, 1024, 512].into_iter().enumerate() {
            let x = random_signal(n, 10 + i as u64);
            let t = 0.3;
            let e = shrink_signal(&x, t, &cfg).unwrap();
            let (cx, ce) = (dwt(&x).coeffs, dwt(&e).coeffs);
            for (a, b) in cx.iter().zip(&ce) {
                if b.abs() > 1e-12 {
                    assert!((a - b - t * b.signum()).abs() < 1e-8);
                } else {
                    assert!(a.abs() <= t + 1e-8);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn shrink_is_nonexpansive(
            a in proptest::collection::vec(-5.0f64..5.0, 70),
            b in proptest::collection::vec(-5.0f64..5.0, 70),
            t in 0.0f64..3.0,
        ) {
            let cfg = WaveletConfig::default();
            let ma = DMatrix::from_row_slice(1, 70, &a);
            let mb = DMatrix::from_row_slice(1, 70, &b);
            let sa = wavelet_shrink(&ma, t, &cfg).unwrap();
            let sb = wavelet_shrink(&mb, t, &cfg).unwrap();
            prop_assert!((sa - sb).norm() <= (ma - mb).norm() + 1e-10);
        }

        #[test]
        fn round_trip_any_length(x in proptest::collection::vec(-100.0f64..100.0, 1..300), order in 1usize..=10) {
            let cfg = WaveletConfig::new(order, None).unwrap();
            let c = dwt_with(&x, &cfg).unwrap();
            let back = idwt(&c).unwrap();
            for (u, v) in x.iter().zip(&back) {
                prop_assert!((u - v).abs() < 1e-9);
            }
        }
    }
}
