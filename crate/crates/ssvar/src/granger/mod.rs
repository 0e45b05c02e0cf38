//! Granger-causality F tests from restricted/unrestricted fits, and
//! sliding-window traces.

pub mod fdist;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{bic_order, blockwise_gc};
use crate::error::{Error, Result};
use crate::model::{
    build_lag_design, build_restricted_design, BivariateSeries, FitResult, HyperParams,
    VarCoefficients,
};
use crate::ss_admm::{fit_restricted, fit_unrestricted};
use crate::ssd_admm::denoise_series;

pub use fdist::{f_cdf, f_quantile};

/// Per-channel residual sums of squares of `Y − A H`.
pub fn rss(y: &DMatrix<f64>, a: &VarCoefficients, h: &DMatrix<f64>) -> Result<(f64, f64)> {
    if y.nrows() != 2 || h.nrows() != a.matrix().ncols() || y.ncols() != h.ncols() {
        return Err(Error::Shape(format!(
            "Y {:?}, A {:?}, H {:?} are inconsistent",
            y.shape(),
            a.matrix().shape(),
            h.shape()
        )));
    }
    let r = y - a.matrix() * h;
    Ok((r.row(0).norm_squared(), r.row(1).norm_squared()))
}

/// `[(RSS_res − RSS_unr)/(p − p′)] / [RSS_unr/(T − p)]`.
pub fn gc_statistic(
    rss_restricted: f64,
    rss_unrestricted: f64,
    p: usize,
    p_prime: usize,
    t_eff: usize,
) -> Result<f64> {
    if p <= p_prime {
        return Err(Error::Parameter(format!(
            "need p > p′ for the F test, got p = {p}, p′ = {p_prime}"
        )));
    }
    if t_eff <= p {
        return Err(Error::Parameter(format!(
            "need T > p for the F test, got T = {t_eff}, p = {p}"
        )));
    }
    if !(rss_unrestricted > 0.0) {
        return Err(Error::Numeric(format!(
            "unrestricted RSS must be positive, got {rss_unrestricted}"
        )));
    }
    let num = (rss_restricted - rss_unrestricted) / (p - p_prime) as f64;
    let den = rss_unrestricted / (t_eff - p) as f64;
    Ok(num / den)
}

/// Upper quantile of `F(df_num, df_den)` at `confidence`.
pub fn f_critical(df_num: u64, df_den: u64, confidence: f64) -> Result<f64> {
    if df_num == 0 || df_den == 0 {
        return Err(Error::Parameter("degrees of freedom must be >= 1".into()));
    }
    f_quantile(confidence, df_num as f64, df_den as f64)
}

/// Parameter counts `(y-equation, x-equation)`: `m_self + m_cross` for the
/// unrestricted model, `m_self` for the restricted one.
pub fn count_parameters(fit: &FitResult, restricted: bool) -> (usize, usize) {
    let o = fit.orders;
    if restricted {
        (o.yy, o.xx)
    } else {
        (o.yy + o.yx, o.xx + o.xy)
    }
}

/// One direction of the test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionalTest {
    /// `None` when the test is undefined (`p ≤ p′`, `T ≤ p`, or zero RSS).
    pub f: Option<f64>,
    pub p: usize,
    pub p_prime: usize,
    pub df_num: usize,
    pub df_den: usize,
    pub critical_value: Option<f64>,
    pub significant: bool,
    /// Set when the restricted model fits better than the unrestricted one.
    pub anomaly: bool,
    pub note: Option<String>,
}

impl DirectionalTest {
    /// Evaluates one direction from residual sums and parameter counts.
    pub fn evaluate(
        rss_restricted: f64,
        rss_unrestricted: f64,
        p: usize,
        p_prime: usize,
        t_eff: usize,
        confidence: f64,
    ) -> Result<Self> {
        let mut out = Self {
            f: None,
            p,
            p_prime,
            df_num: p.saturating_sub(p_prime),
            df_den: t_eff.saturating_sub(p),
            critical_value: None,
            significant: false,
            anomaly: false,
            note: None,
        };
        match gc_statistic(rss_restricted, rss_unrestricted, p, p_prime, t_eff) {
            Ok(f) => {
                let crit = f_critical(out.df_num as u64, out.df_den as u64, confidence)?;
                out.f = Some(f);
                out.critical_value = Some(crit);
                out.significant = f > crit;
                out.anomaly = f < 0.0;
            }
            Err(e) => out.note = Some(e.to_string()),
        }
        Ok(out)
    }

    pub fn is_valid(&self) -> bool {
        self.f.is_some()
    }
}

/// Both directions of the bivariate test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcReport {
    /// Does x help predict y (tested on the y-equation)?
    pub x_to_y: DirectionalTest,
    /// Does y help predict x (tested on the x-equation)?
    pub y_to_x: DirectionalTest,
    pub confidence: f64,
    /// Observations per equation used in the denominators.
    pub t_eff: usize,
}

impl GcReport {
    pub fn f_x_to_y(&self) -> Option<f64> {
        self.x_to_y.f
    }

    pub fn f_y_to_x(&self) -> Option<f64> {
        self.y_to_x.f
    }

    pub fn significant_x_to_y(&self) -> bool {
        self.x_to_y.significant
    }

    pub fn significant_y_to_x(&self) -> bool {
        self.y_to_x.significant
    }
}

fn check_confidence(confidence: f64) -> Result<()> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Parameter(format!(
            "confidence must lie in (0, 1), got {confidence}"
        )));
    }
    Ok(())
}

/// F tests from an unrestricted and a restricted fit of the same window.
pub fn gc_from_fits(
    unrestricted: &FitResult,
    restricted: &FitResult,
    confidence: f64,
) -> Result<GcReport> {
    check_confidence(confidence)?;
    let t_eff = unrestricted.n_obs;
    let (p_y, p_x) = count_parameters(unrestricted, false);
    let (pp_y, pp_x) = count_parameters(restricted, true);
    Ok(GcReport {
        x_to_y: DirectionalTest::evaluate(
            restricted.rss.0,
            unrestricted.rss.0,
            p_y,
            pp_y,
            t_eff,
            confidence,
        )?,
        y_to_x: DirectionalTest::evaluate(
            restricted.rss.1,
            unrestricted.rss.1,
            p_x,
            pp_x,
            t_eff,
            confidence,
        )?,
        confidence,
        t_eff,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GcMethod {
    /// Sparse, stationarity-regularized fits of the observed series.
    SsAdmm,
    /// Denoise first, then fit the cleaned series.
    SsdAdmm,
    /// Fixed-order least squares with the BIC-selected order.
    Blockwise,
}

impl std::str::FromStr for GcMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ss" | "ss_admm" => Ok(Self::SsAdmm),
            "ssd" | "ssd_admm" => Ok(Self::SsdAdmm),
            "blockwise" => Ok(Self::Blockwise),
            other => Err(Error::Parse(format!("unknown GC method `{other}`"))),
        }
    }
}

/// Fits both models of one window with the chosen method and tests them.
pub fn gc_window(
    series: &BivariateSeries,
    method: GcMethod,
    m_bar: usize,
    params: &HyperParams,
    confidence: f64,
) -> Result<GcReport> {
    check_confidence(confidence)?;
    match method {
        GcMethod::Blockwise => {
            let order = bic_order(series, m_bar)?.best_order;
            blockwise_gc(series, order, confidence)
        }
        GcMethod::SsAdmm => fit_pair(series, m_bar, params, confidence),
        GcMethod::SsdAdmm => {
            let cleaned = denoise_series(series, m_bar, params)?.cleaned_series()?;
            fit_pair(&cleaned, m_bar, params, confidence)
        }
    }
}

fn fit_pair(
    series: &BivariateSeries,
    m_bar: usize,
    params: &HyperParams,
    confidence: f64,
) -> Result<GcReport> {
    let unrestricted = build_lag_design(series, m_bar)?;
    let restricted = build_restricted_design(series, m_bar)?;
    let (u, r) = rayon::join(
        || fit_unrestricted(&unrestricted, params),
        || fit_restricted(&restricted, params),
    );
    gc_from_fits(&u?, &r?, confidence)
}

/// Sliding-window GC reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcTrace {
    pub window_starts: Vec<usize>,
    pub reports: Vec<GcReport>,
    pub window_length: usize,
    pub stride: usize,
}

/// Runs [`gc_window`] on every window `[s, s + window)` with `s` a multiple of
/// `stride`. Windows are processed in parallel; results keep window order.
pub fn gc_trace(
    series: &BivariateSeries,
    method: GcMethod,
    window: usize,
    stride: usize,
    m_bar: usize,
    params: &HyperParams,
    confidence: f64,
) -> Result<GcTrace> {
    check_confidence(confidence)?;
    if stride == 0 {
        return Err(Error::Parameter("stride must be at least 1".into()));
    }
    if m_bar == 0 {
        return Err(Error::Parameter("maximum lag must be at least 1".into()));
    }
    if window < 4 * m_bar {
        return Err(Error::Parameter(format!(
            "window of {window} samples is shorter than 4m̄ = {}",
            4 * m_bar
        )));
    }
    if window > series.n_samples() {
        return Err(Error::Length {
            needed: window,
            available: series.n_samples(),
        });
    }
    let window_starts: Vec<usize> = (0..=series.n_samples() - window).step_by(stride).collect();
    let reports = window_starts
        .par_iter()
        .map(|&s| gc_window(&series.window(s, window)?, method, m_bar, params, confidence))
        .collect::<Result<Vec<_>>>()?;
    Ok(GcTrace {
        window_starts,
        reports,
        window_length: window,
        stride,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Orders;

    #[test]
    fn statistic_examples() {
        assert_eq!(gc_statistic(3.0, 3.0, 4, 2, 100).unwrap(), 0.0);
        // p − p′ = T − p = 10 and RSS_res = 2 RSS_unr → exactly 1
        assert_eq!(gc_statistic(8.0, 4.0, 20, 10, 30).unwrap(), 1.0);
        assert!(gc_statistic(1.0, 1.0, 2, 2, 100).is_err());
        assert!(gc_statistic(1.0, 1.0, 5, 2, 5).is_err());
        assert!(gc_statistic(1.0, 0.0, 5, 2, 50).is_err());
    }

    #[test]
    fn statistic_is_scale_invariant() {
        let a = gc_statistic(5.3, 4.1, 7, 3, 200).unwrap();
        let b = gc_statistic(5.3e4, 4.1e4, 7, 3, 200).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn rss_examples() {
        let y = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 0.0, -1.0, 2.0]);
        let h = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 1.0, 2.0, 2.0, 2.0]);
        let zero = VarCoefficients::zeros(1);
        assert_eq!(rss(&y, &zero, &h).unwrap(), (14.0, 5.0));
        let a = VarCoefficients::from_blocks(&[1.0], &[0.0], &[0.0], &[0.5]).unwrap();
        let h2 = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 0.0, -2.0, 4.0]);
        assert_eq!(rss(&y, &a, &h2).unwrap(), (0.0, 0.0));
        assert!(rss(&y, &VarCoefficients::zeros(2), &h).is_err());
    }

    fn fake_fit(orders: Orders) -> FitResult {
        FitResult {
            coefficients: VarCoefficients::zeros(3),
            z: VarCoefficients::zeros(3),
            orders,
            rss: (1.0, 1.0),
            n_obs: 100,
            iterations: 1,
            residual_history: vec![],
            converged: true,
        }
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(count_parameters(&fake_fit(Orders::new(2, 3, 1, 4)), false), (5, 5));
        assert_eq!(count_parameters(&fake_fit(Orders::new(2, 0, 0, 1)), true), (2, 1));
        assert_eq!(count_parameters(&fake_fit(Orders::new(3, 3, 3, 3)), false), (6, 6));
    }

    #[test]
    fn degenerate_direction_is_flagged_not_clamped() {
        let u = fake_fit(Orders::new(2, 0, 1, 2));
        let r = fake_fit(Orders::new(2, 0, 0, 2));
        let rep = gc_from_fits(&u, &r, 0.95).unwrap();
        assert!(!rep.x_to_y.is_valid());
        assert!(!rep.x_to_y.significant);
        assert!(rep.x_to_y.note.is_some());
        assert!(rep.y_to_x.is_valid());
        assert!(gc_from_fits(&u, &r, 1.5).is_err());
    }

    #[test]
    fn trace_argument_checks() {
        let s = BivariateSeries::new(vec![0.1; 200], vec![0.2; 200]).unwrap();
        let p = HyperParams::default();
        assert!(gc_trace(&s, GcMethod::SsAdmm, 100, 0, 5, &p, 0.95).is_err());
        assert!(gc_trace(&s, GcMethod::SsAdmm, 19, 10, 5, &p, 0.95).is_err());
        assert!(gc_trace(&s, GcMethod::SsAdmm, 300, 10, 5, &p, 0.95).is_err());
        assert!(gc_trace(&s, GcMethod::SsAdmm, 100, 10, 5, &p, 1.0).is_err());
    }

    #[test]
    fn method_names() {
        assert_eq!("ss".parse::<GcMethod>().unwrap(), GcMethod::SsAdmm);
        assert_eq!("ssd_admm".parse::<GcMethod>().unwrap(), GcMethod::SsdAdmm);
        assert_eq!("blockwise".parse::<GcMethod>().unwrap(), GcMethod::Blockwise);
        assert!("x".parse::<GcMethod>().is_err());
    }
}
