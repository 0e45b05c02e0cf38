//! Data types shared by every solver: the raw two-channel series, the lag
//! designs built from it, coefficient matrices and fit results.

mod coefficients;
mod design;
mod params;
mod series;

pub use coefficients::{Block, Orders, VarCoefficients};
pub use design::{
    build_lag_design, build_restricted_design, Design, LagDesign, RestrictedDesign,
};
pub use params::{FitResult, GroupWeighting, HyperParams, IterationRecord};
pub use series::BivariateSeries;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Normalised mean squared error `‖estimate − truth‖²_F / ‖truth‖²_F`.
pub fn nmse(estimate: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<f64> {
    if estimate.shape() != truth.shape() {
        return Err(Error::Shape(format!(
            "nmse: estimate is {:?}, truth is {:?}",
            estimate.shape(),
            truth.shape()
        )));
    }
    let denom = truth.norm_squared();
    if denom == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((estimate - truth).norm_squared() / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nmse_examples() {
        let t = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.5, 3.0]);
        assert_eq!(nmse(&t, &t).unwrap(), 0.0);
        assert_eq!(nmse(&DMatrix::zeros(2, 2), &t).unwrap(), 1.0);
        assert!((nmse(&(&t * 2.0), &t).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn nmse_errors() {
        let z = DMatrix::<f64>::zeros(2, 2);
        assert!(matches!(nmse(&z, &z), Err(Error::ZeroNorm)));
        assert!(matches!(
            nmse(&DMatrix::zeros(2, 3), &DMatrix::from_element(2, 2, 1.0)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn nmse_scale_covariant() {
        let e = DMatrix::from_row_slice(2, 3, &[0.1, 0.4, -1.0, 2.0, 0.3, 0.0]);
        let t = DMatrix::from_row_slice(2, 3, &[0.2, 0.5, -0.7, 1.0, 0.1, 0.9]);
        let base = nmse(&e, &t).unwrap();
        for s in [-3.0, 0.01, 7.5] {
            let scaled = nmse(&(&e * s), &(&t * s)).unwrap();
            assert!((scaled - base).abs() < 1e-12);
        }
    }
}
