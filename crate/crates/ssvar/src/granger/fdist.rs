//! F-distribution CDF and quantiles through the regularized incomplete beta
//! function.

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Tail of Stirling's series, `ln Γ(x) − [(x − ½) ln x − x + ½ ln 2π]`.
fn stirling_correction(x: f64) -> f64 {
    let x2 = x * x;
    (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * x2)) / x2) / x2) / x
}

/// `ln B(a, b)`, stable when one argument is huge.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    if b < 10.0 {
        return ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    }
    // ln Γ(b) − ln Γ(a + b) by differencing Stirling's expansion
    let diff = -a * b.ln() - (a + b - 0.5) * (a / b).ln_1p() + a + stirling_correction(b)
        - stirling_correction(a + b);
    ln_gamma(a) + diff
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            return Ok(h);
        }
    }
    Err(Error::Numeric(format!(
        "incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})"
    )))
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn inc_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::Parameter(format!("beta parameters must be > 0, got {a}, {b}")));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    if x >= 1.0 {
        return Ok(1.0);
    }
    let ln_front = a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(ln_front.exp() * beta_cf(a, b, x)? / a)
    } else {
        Ok(1.0 - ln_front.exp() * beta_cf(b, a, 1.0 - x)? / b)
    }
}

fn check_df(d1: f64, d2: f64) -> Result<()> {
    if !(d1 >= 1.0 && d2 >= 1.0 && d1.is_finite() && d2.is_finite()) {
        return Err(Error::Parameter(format!(
            "degrees of freedom must be >= 1, got ({d1}, {d2})"
        )));
    }
    Ok(())
}

/// `P(F ≤ f)` for `F ~ F(d1, d2)`.
pub fn f_cdf(f: f64, d1: f64, d2: f64) -> Result<f64> {
    check_df(d1, d2)?;
    if f <= 0.0 {
        return Ok(0.0);
    }
    if f.is_infinite() {
        return Ok(1.0);
    }
    // x = d1 f / (d1 f + d2), formed without cancellation
    let x = 1.0 / (1.0 + d2 / (d1 * f));
    inc_beta(d1 / 2.0, d2 / 2.0, x)
}

/// Density of `F(d1, d2)`.
pub fn f_pdf(f: f64, d1: f64, d2: f64) -> Result<f64> {
    check_df(d1, d2)?;
    if f <= 0.0 {
        return Ok(if d1 < 2.0 {
            f64::INFINITY
        } else if d1 == 2.0 {
            1.0
        } else {
            0.0
        });
    }
    let (a, b) = (d1 / 2.0, d2 / 2.0);
    let ln = a * (d1 / d2).ln() + (a - 1.0) * f.ln() - (a + b) * (d1 * f / d2).ln_1p() - ln_beta(a, b);
    Ok(ln.exp())
}

/// Quantile of `F(d1, d2)` at probability `p`: bracketing, bisection, then a
/// few Newton steps.
pub fn f_quantile(p: f64, d1: f64, d2: f64) -> Result<f64> {
    check_df(d1, d2)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Parameter(format!("probability must lie in (0, 1), got {p}")));
    }
    let mut hi = 1.0;
    let mut doublings = 0;
    while f_cdf(hi, d1, d2)? < p {
        hi *= 2.0;
        doublings += 1;
        if doublings > 2000 {
            return Err(Error::Numeric("could not bracket the F quantile".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f_cdf(mid, d1, d2)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-10 * hi.max(1e-300) {
            break;
        }
    }
    let mut q = 0.5 * (lo + hi);
    for _ in 0..4 {
        let dens = f_pdf(q, d1, d2)?;
        if !(dens.is_finite() && dens > 0.0) {
            break;
        }
        let step = (f_cdf(q, d1, d2)? - p) / dens;
        let next = q - step;
        if !(next > lo && next < hi) {
            break;
        }
        q = next;
        if step.abs() <= 1e-15 * q {
            break;
        }
    }
    if !q.is_finite() {
        return Err(Error::Numeric("F quantile inversion failed".into()));
    }
    Ok(q)
}
