use nalgebra::DMatrix;

use super::{BivariateSeries, VarCoefficients};
use crate::error::{Error, Result};

/// What the ADMM solvers need from a regression design: the Gram matrix
/// `H Hᵀ`, the cross moment `Y Hᵀ`, and per-channel residual sums of squares.
pub trait Design {
    fn m_bar(&self) -> usize;
    /// Effective number of observations per equation.
    fn n_obs(&self) -> usize;
    fn gram(&self) -> DMatrix<f64>;
    fn cross(&self) -> DMatrix<f64>;
    /// Residual sums of squares of the y- and x-equations.
    fn rss(&self, coeffs: &VarCoefficients) -> (f64, f64);
}

/// `Y = A H + E` with `Y` 2×T and `H` 2m̄×T.
#[derive(Debug, Clone, PartialEq)]
pub struct LagDesign {
    y: DMatrix<f64>,
    h: DMatrix<f64>,
    m_bar: usize,
}

fn check_len(series: &BivariateSeries, m_bar: usize) -> Result<()> {
    if m_bar == 0 {
        return Err(Error::Parameter("maximum lag must be at least 1".into()));
    }
    if series.n_samples() <= m_bar {
        return Err(Error::Length {
            needed: m_bar + 1,
            available: series.n_samples(),
        });
    }
    Ok(())
}

/// Fills an `m̄ × T` block with `block[k−1, t] = s[m̄ + t − k]`.
fn lag_block(s: &[f64], m_bar: usize) -> DMatrix<f64> {
    let t = s.len() - m_bar;
    DMatrix::from_fn(m_bar, t, |k, col| s[m_bar + col - k - 1])
}

pub fn build_lag_design(series: &BivariateSeries, m_bar: usize) -> Result<LagDesign> {
    check_len(series, m_bar)?;
    let n = series.n_samples();
    let t = n - m_bar;
    let mut y = DMatrix::zeros(2, t);
    y.row_mut(0).copy_from_slice(&series.y()[m_bar..]);
    y.row_mut(1).copy_from_slice(&series.x()[m_bar..]);
    let mut h = DMatrix::zeros(2 * m_bar, t);
    h.rows_mut(0, m_bar).copy_from(&lag_block(series.y(), m_bar));
    h.rows_mut(m_bar, m_bar).copy_from(&lag_block(series.x(), m_bar));
    Ok(LagDesign { y, h, m_bar })
}

impl LagDesign {
    /// Assembles a design from explicit matrices (used by the denoising solver,
    /// whose lag matrix is no longer a plain shift of the observations).
    pub fn from_parts(y: DMatrix<f64>, h: DMatrix<f64>) -> Result<Self> {
        if y.nrows() != 2 || !h.nrows().is_multiple_of(2) || h.nrows() == 0 || y.ncols() != h.ncols() {
            return Err(Error::Shape(format!(
                "Y is {:?}, H is {:?}; expected 2×T and 2m̄×T",
                y.shape(),
                h.shape()
            )));
        }
        let m_bar = h.nrows() / 2;
        Ok(Self { y, h, m_bar })
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn t(&self) -> usize {
        self.y.ncols()
    }

    pub fn residuals(&self, coeffs: &VarCoefficients) -> DMatrix<f64> {
        &self.y - coeffs.matrix() * &self.h
    }
}

impl Design for LagDesign {
    fn m_bar(&self) -> usize {
        self.m_bar
    }

    fn n_obs(&self) -> usize {
        self.t()
    }

    fn gram(&self) -> DMatrix<f64> {
        &self.h * self.h.transpose()
    }

    fn cross(&self) -> DMatrix<f64> {
        &self.y * self.h.transpose()
    }

    fn rss(&self, coeffs: &VarCoefficients) -> (f64, f64) {
        let r = self.residuals(coeffs);
        (r.row(0).norm_squared(), r.row(1).norm_squared())
    }
}

/// Block-diagonal reshaping of the restricted (no cross-coupling) model:
///
/// ```text
/// Y_r = [ y  0 ]      H_r = [ H_y  0  ]
///       [ 0  x ]            [ 0   H_x ]
/// ```
///
/// with `Y_r` 2×2T′ and `H_r` 2m̄×2T′. Only the two channel rows and the two
/// lag blocks are stored; [`RestrictedDesign::y_dense`] and
/// [`RestrictedDesign::h_dense`] materialise the full matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedDesign {
    y_row: Vec<f64>,
    x_row: Vec<f64>,
    h_y: DMatrix<f64>,
    h_x: DMatrix<f64>,
    m_bar: usize,
}

pub fn build_restricted_design(series: &BivariateSeries, m_bar: usize) -> Result<RestrictedDesign> {
    check_len(series, m_bar)?;
    Ok(RestrictedDesign {
        y_row: series.y()[m_bar..].to_vec(),
        x_row: series.x()[m_bar..].to_vec(),
        h_y: lag_block(series.y(), m_bar),
        h_x: lag_block(series.x(), m_bar),
        m_bar,
    })
}

impl RestrictedDesign {
    pub fn t_prime(&self) -> usize {
        self.y_row.len()
    }

    pub fn y_dense(&self) -> DMatrix<f64> {
        let t = self.t_prime();
        let mut y = DMatrix::zeros(2, 2 * t);
        for j in 0..t {
            y[(0, j)] = self.y_row[j];
            y[(1, t + j)] = self.x_row[j];
        }
        y
    }

    pub fn h_dense(&self) -> DMatrix<f64> {
        let (m, t) = (self.m_bar, self.t_prime());
        let mut h = DMatrix::zeros(2 * m, 2 * t);
        h.view_mut((0, 0), (m, t)).copy_from(&self.h_y);
        h.view_mut((m, t), (m, t)).copy_from(&self.h_x);
        h
    }

    /// `‖Y_r − A H_r‖²_F` evaluated as if the dense block matrices existed,
    /// including the off-diagonal blocks where cross terms meet zero targets.
    pub fn full_residual_ss(&self, coeffs: &VarCoefficients) -> f64 {
        let (ry, rx) = self.rss(coeffs);
        let m = self.m_bar;
        let a = coeffs.matrix();
        let off_y = (a.view((0, m), (1, m)) * &self.h_x).norm_squared();
        let off_x = (a.view((1, 0), (1, m)) * &self.h_y).norm_squared();
        ry + rx + off_y + off_x
    }
}

impl Design for RestrictedDesign {
    fn m_bar(&self) -> usize {
        self.m_bar
    }

    fn n_obs(&self) -> usize {
        self.t_prime()
    }

    fn gram(&self) -> DMatrix<f64> {
        let m = self.m_bar;
        let mut g = DMatrix::zeros(2 * m, 2 * m);
        g.view_mut((0, 0), (m, m))
            .copy_from(&(&self.h_y * self.h_y.transpose()));
        g.view_mut((m, m), (m, m))
            .copy_from(&(&self.h_x * self.h_x.transpose()));
        g
    }

    fn cross(&self) -> DMatrix<f64> {
        let m = self.m_bar;
        let mut c = DMatrix::zeros(2, 2 * m);
        let t = self.t_prime();
        let y = DMatrix::from_row_slice(1, t, &self.y_row);
        let x = DMatrix::from_row_slice(1, t, &self.x_row);
        c.view_mut((0, 0), (1, m))
            .copy_from(&(&y * self.h_y.transpose()));
        c.view_mut((1, m), (1, m))
            .copy_from(&(&x * self.h_x.transpose()));
        c
    }

    /// Residuals of the diagonal blocks only: the y-equation against its own
    /// lags and the x-equation against its own lags.
    fn rss(&self, coeffs: &VarCoefficients) -> (f64, f64) {
        let m = self.m_bar;
        let a = coeffs.matrix();
        let fit_y = a.view((0, 0), (1, m)) * &self.h_y;
        let fit_x = a.view((1, m), (1, m)) * &self.h_x;
        let ry = self
            .y_row
            .iter()
            .zip(fit_y.iter())
            .map(|(o, f)| (o - f).powi(2))
            .sum();
        let rx = self
            .x_row
            .iter()
            .zip(fit_x.iter())
            .map(|(o, f)| (o - f).powi(2))
            .sum();
        (ry, rx)
    }
}
