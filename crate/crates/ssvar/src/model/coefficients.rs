use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-block lag orders `(m1, m2, m3, m4)` for `a_yy, a_yx, a_xy, a_xx`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Orders {
    pub yy: usize,
    pub yx: usize,
    pub xy: usize,
    pub xx: usize,
}

impl Orders {
    pub fn new(yy: usize, yx: usize, xy: usize, xx: usize) -> Self {
        Self { yy, yx, xy, xx }
    }

    pub fn as_array(&self) -> [usize; 4] {
        [self.yy, self.yx, self.xy, self.xx]
    }

    pub fn from_array(o: [usize; 4]) -> Self {
        Self::new(o[0], o[1], o[2], o[3])
    }

    pub fn max(&self) -> usize {
        self.as_array().into_iter().max().unwrap_or(0)
    }
}

/// The `2 × 2m̄` coefficient matrix
///
/// ```text
/// [ a_yy(1..m̄)  a_yx(1..m̄) ]
/// [ a_xy(1..m̄)  a_xx(1..m̄) ]
/// ```
///
/// Row 1 predicts `y(t)`, row 2 predicts `x(t)`; within each row the y-lags
/// come first, then the x-lags, matching the row layout of the lag matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct VarCoefficients {
    a: DMatrix<f64>,
    m_bar: usize,
}

/// Block index into the coefficient matrix, in the order of the vectorisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    YY = 0,
    YX = 1,
    XY = 2,
    XX = 3,
}

impl Block {
    pub const ALL: [Block; 4] = [Block::YY, Block::YX, Block::XY, Block::XX];

    fn row_col(self) -> (usize, usize) {
        match self {
            Block::YY => (0, 0),
            Block::YX => (0, 1),
            Block::XY => (1, 0),
            Block::XX => (1, 1),
        }
    }
}

impl VarCoefficients {
    pub fn zeros(m_bar: usize) -> Self {
        Self {
            a: DMatrix::zeros(2, 2 * m_bar),
            m_bar,
        }
    }

    pub fn from_matrix(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != 2 || !a.ncols().is_multiple_of(2) || a.ncols() == 0 {
            return Err(Error::Shape(format!(
                "coefficient matrix must be 2 x 2m, got {:?}",
                a.shape()
            )));
        }
        let m_bar = a.ncols() / 2;
        Ok(Self { a, m_bar })
    }

    /// Builds coefficients from the four lag blocks, each of length `m̄`.
    pub fn from_blocks(yy: &[f64], yx: &[f64], xy: &[f64], xx: &[f64]) -> Result<Self> {
        let m = yy.len();
        if m == 0 || yx.len() != m || xy.len() != m || xx.len() != m {
            return Err(Error::Shape("all four blocks need the same nonzero length".into()));
        }
        let mut out = Self::zeros(m);
        for (b, vals) in Block::ALL.iter().zip([yy, yx, xy, xx]) {
            out.block_mut(*b).copy_from_slice(vals);
        }
        Ok(out)
    }

    pub fn m_bar(&self) -> usize {
        self.m_bar
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.a
    }

    /// Lag-ordered copy of one block, `[a(1), …, a(m̄)]`.
    pub fn block(&self, b: Block) -> Vec<f64> {
        let (r, c) = b.row_col();
        (0..self.m_bar).map(|k| self.a[(r, c * self.m_bar + k)]).collect()
    }

    fn block_mut(&mut self, b: Block) -> BlockMut<'_> {
        BlockMut { coeffs: self, block: b }
    }

    pub fn get(&self, b: Block, lag: usize) -> f64 {
        let (r, c) = b.row_col();
        self.a[(r, c * self.m_bar + lag - 1)]
    }

    pub fn set(&mut self, b: Block, lag: usize, v: f64) {
        let (r, c) = b.row_col();
        self.a[(r, c * self.m_bar + lag - 1)] = v;
    }

    pub fn a_yy(&self) -> Vec<f64> {
        self.block(Block::YY)
    }

    pub fn a_yx(&self) -> Vec<f64> {
        self.block(Block::YX)
    }

    pub fn a_xy(&self) -> Vec<f64> {
        self.block(Block::XY)
    }

    pub fn a_xx(&self) -> Vec<f64> {
        self.block(Block::XX)
    }

    /// `c = vec(Aᵀ)`: `[a_yy, a_yx, a_xy, a_xx]`, each block lag-ordered.
    pub fn to_vec_c(&self) -> DVector<f64> {
        let n = 2 * self.m_bar;
        DVector::from_fn(2 * n, |i, _| self.a[(i / n, i % n)])
    }

    pub fn from_vec_c(c: &DVector<f64>) -> Result<Self> {
        if !c.len().is_multiple_of(4) || c.is_empty() {
            return Err(Error::Shape(format!("vector length {} is not 4m̄", c.len())));
        }
        let n = c.len() / 2;
        Ok(Self {
            a: DMatrix::from_fn(2, n, |r, j| c[r * n + j]),
            m_bar: n / 2,
        })
    }

    /// The 2×2 matrix `A_k` multiplying `[y(t−k), x(t−k)]ᵀ`.
    pub fn lag_matrix(&self, k: usize) -> Matrix2<f64> {
        let m = self.m_bar;
        Matrix2::new(
            self.a[(0, k - 1)],
            self.a[(0, m + k - 1)],
            self.a[(1, k - 1)],
            self.a[(1, m + k - 1)],
        )
    }

    /// Largest lag with a coefficient above `tol` in magnitude, per block.
    pub fn support_orders(&self, tol: f64) -> Orders {
        let mut o = [0usize; 4];
        for (slot, b) in o.iter_mut().zip(Block::ALL) {
            *slot = self
                .block(b)
                .iter()
                .rposition(|v| v.abs() > tol)
                .map_or(0, |i| i + 1);
        }
        Orders::from_array(o)
    }

    /// Zeroes every coefficient beyond the given per-block order.
    pub fn truncate_to(&self, orders: Orders) -> Self {
        let mut out = self.clone();
        for (b, m) in Block::ALL.into_iter().zip(orders.as_array()) {
            for lag in (m + 1)..=self.m_bar {
                out.set(b, lag, 0.0);
            }
        }
        out
    }

    /// Zero-extends every block to `m_bar` lags.
    pub fn padded_to(&self, m_bar: usize) -> Result<Self> {
        if m_bar < self.m_bar {
            return Err(Error::Shape(format!(
                "cannot shrink {} lags to {m_bar}",
                self.m_bar
            )));
        }
        let mut out = Self::zeros(m_bar);
        for b in Block::ALL {
            for (lag, v) in self.block(b).into_iter().enumerate() {
                out.set(b, lag + 1, v);
            }
        }
        Ok(out)
    }

    /// Drops the cross-coupling blocks `a_yx`, `a_xy`.
    pub fn without_cross_terms(&self) -> Self {
        let mut out = self.clone();
        for lag in 1..=self.m_bar {
            out.set(Block::YX, lag, 0.0);
            out.set(Block::XY, lag, 0.0);
        }
        out
    }
}

struct BlockMut<'a> {
    coeffs: &'a mut VarCoefficients,
    block: Block,
}

impl BlockMut<'_> {
    fn copy_from_slice(&mut self, vals: &[f64]) {
        for (k, v) in vals.iter().enumerate() {
            self.coeffs.set(self.block, k + 1, *v);
        }
    }
}

impl Serialize for VarCoefficients {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            m_bar: usize,
            a_yy: Vec<f64>,
            a_yx: Vec<f64>,
            a_xy: Vec<f64>,
            a_xx: Vec<f64>,
        }
        Repr {
            m_bar: self.m_bar,
            a_yy: self.a_yy(),
            a_yx: self.a_yx(),
            a_xy: self.a_xy(),
            a_xx: self.a_xx(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for VarCoefficients {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            a_yy: Vec<f64>,
            a_yx: Vec<f64>,
            a_xy: Vec<f64>,
            a_xx: Vec<f64>,
        }
        let r = Repr::deserialize(d)?;
        VarCoefficients::from_blocks(&r.a_yy, &r.a_yx, &r.a_xy, &r.a_xx)
            .map_err(serde::de::Error::custom)
    }
}
