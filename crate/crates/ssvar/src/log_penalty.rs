//! Latent-overlapping-group penalty over nested lag prefixes.
//!
//! The penalty `Ω(c) = min Σ_g λ w_g ‖l_g‖₂` over decompositions
//! `c = Σ_g l_g` with `supp(l_g) ⊆ g` is handled by sharing ADMM: one latent
//! column of `P` per group, a consensus mean `p`, an auxiliary average `q`
//! and a scaled dual `u2`. The coupling `½‖Σ_g l_g − c‖²` ties the latents to
//! the coefficient copy `c`, which in turn is split from `vec(Aᵀ)` with dual
//! `u1`.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::model::{GroupWeighting, Orders};
use crate::prox::group_prox;

/// The `4m̄` prefix groups `{1}, {1,2}, …, {1..m̄}` of each coefficient block,
/// indexed `g = b·m̄ + (k − 1)` for block `b` and prefix length `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStructure {
    m_bar: usize,
    weights: Vec<f64>,
}

impl GroupStructure {
    pub fn new(m_bar: usize, weighting: GroupWeighting) -> Self {
        let weights = (0..4 * m_bar)
            .map(|g| match weighting {
                GroupWeighting::Uniform => 1.0,
                GroupWeighting::SqrtSize => ((g % m_bar + 1) as f64).sqrt(),
            })
            .collect();
        Self { m_bar, weights }
    }

    pub fn m_bar(&self) -> usize {
        self.m_bar
    }

    pub fn n_groups(&self) -> usize {
        4 * self.m_bar
    }

    /// Coordinates of group `g` in `c`.
    pub fn group(&self, g: usize) -> Range<usize> {
        let start = (g / self.m_bar) * self.m_bar;
        start..start + g % self.m_bar + 1
    }

    pub fn weight(&self, g: usize) -> f64 {
        self.weights[g]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Sharing-ADMM variables of the penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct LogState {
    /// `4m̄ × |G|`; column `g` is supported on group `g`.
    pub p_mat: DMatrix<f64>,
    /// Mean of the latent columns.
    pub p: DVector<f64>,
    pub q: DVector<f64>,
    pub u2: DVector<f64>,
    /// Coefficient copy, split from `vec(Aᵀ)`.
    pub c: DVector<f64>,
    pub u1: DVector<f64>,
}

impl LogState {
    pub fn new(m_bar: usize, c0: DVector<f64>) -> Self {
        let n = 4 * m_bar;
        assert_eq!(c0.len(), n, "coefficient vector length");
        Self {
            p_mat: DMatrix::zeros(n, n),
            p: DVector::zeros(n),
            q: DVector::zeros(n),
            u2: DVector::zeros(n),
            c: c0,
            u1: DVector::zeros(n),
        }
    }

    /// Latent updates `P_g ← prox_{λw_g/ρ2}(P_g + q − u2 − p)|_g`, then the
    /// consensus mean `p`.
    pub fn update_latents(&mut self, groups: &GroupStructure, lambda: f64, rho2: f64) {
        let n_groups = groups.n_groups();
        let shift = &self.q - &self.u2 - &self.p;
        let mut mean = DVector::zeros(self.p.len());
        for g in 0..n_groups {
            let range = groups.group(g);
            let v: Vec<f64> = range
                .clone()
                .map(|i| self.p_mat[(i, g)] + shift[i])
                .collect();
            let out = group_prox(&v, lambda * groups.weight(g) / rho2);
            for (i, val) in range.zip(out) {
                self.p_mat[(i, g)] = val;
                mean[i] += val;
            }
        }
        self.p = mean / n_groups as f64;
    }

    /// `q = (c + ρ2(u2 + p)) / (ρ2 + N)`.
    pub fn update_q(&mut self, rho2: f64) {
        let n = self.p_mat.ncols() as f64;
        self.q = (&self.c + (&self.u2 + &self.p) * rho2) / (rho2 + n);
    }

    /// `c = (N q + ρ1(vec(Aᵀ) + u1)) / (1 + ρ1)`.
    pub fn update_c(&mut self, vec_a: &DVector<f64>, rho1: f64) {
        let n = self.p_mat.ncols() as f64;
        self.c = (&self.q * n + (vec_a + &self.u1) * rho1) / (1.0 + rho1);
    }

    pub fn update_duals(&mut self, vec_a: &DVector<f64>) {
        self.u1 += vec_a - &self.c;
        self.u2 += &self.p - &self.q;
    }

    /// `Σ_g P_g`: the latent reconstruction of the coefficient vector.
    pub fn latent_sum(&self) -> DVector<f64> {
        DVector::from_fn(self.p_mat.nrows(), |i, _| self.p_mat.row(i).sum())
    }

    /// `Σ_g |P[i, g]|` per coordinate.
    pub fn latent_magnitude(&self) -> DVector<f64> {
        DVector::from_fn(self.p_mat.nrows(), |i, _| {
            self.p_mat.row(i).iter().map(|v| v.abs()).sum()
        })
    }

    /// `Σ_g λ w_g ‖P_g‖₂`.
    pub fn penalty(&self, groups: &GroupStructure, lambda: f64) -> f64 {
        (0..groups.n_groups())
            .map(|g| {
                let r = groups.group(g);
                let norm = self.p_mat.view((r.start, g), (r.len(), 1)).norm();
                lambda * groups.weight(g) * norm
            })
            .sum()
    }
}

/// Per block, the largest lag whose aggregate latent magnitude exceeds
/// `zero_tol · max|c|`. Prefix groups make the support a prefix, so this is
/// also the support size.
pub fn estimate_orders(state: &LogState, zero_tol: f64) -> Orders {
    let m_bar = state.p_mat.nrows() / 4;
    let scale = state.c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let threshold = zero_tol * scale;
    let mag = state.latent_magnitude();
    let mut orders = [0usize; 4];
    for (b, order) in orders.iter_mut().enumerate() {
        *order = (0..m_bar)
            .rev()
            .find(|&k| mag[b * m_bar + k] > threshold)
            .map_or(0, |k| k + 1);
    }
    Orders::from_array(orders)
}
