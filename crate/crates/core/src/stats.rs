//! Ordinary least squares on one regressor.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Result of fitting `y = slope * x + intercept`.
#[derive(Debug, Clone, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `y_i - (slope * x_i + intercept)`, in input order.
    pub residuals: Vec<f64>,
    pub rss: f64,
}

impl LineFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }

    pub fn max_abs_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0_f64, |m, r| m.max(r.abs()))
    }
}

/// Fits a line through `(x, y)` pairs by centered least squares.
///
/// Needs at least two points with distinct `x`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            what: "regression ordinates",
            expected: xs.len(),
            found: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::InsufficientData {
            what: "line fit",
            needed: 2,
            found: xs.len(),
        });
    }
    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;

    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - x_mean;
        let dy = y - y_mean;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateDesign);
    }

    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let residuals: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| y - (slope * x + intercept))
        .collect();
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let r_squared = if syy > 0.0 {
        (1.0 - rss / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };

    Ok(LineFit {
        slope,
        intercept,
        r_squared,
        residuals,
        rss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_points_interpolate_exactly() {
        let fit = fit_line(&[1.0, 3.0], &[2.0, 6.0]).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-15);
        assert!(fit.intercept.abs() < 1e-15);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn equal_abscissae_are_degenerate() {
        assert_eq!(
            fit_line(&[1.0, 1.0, 1.0], &[0.0, 1.0, 2.0]),
            Err(Error::DegenerateDesign)
        );
    }

    #[test]
    fn single_point_rejected() {
        assert!(matches!(
            fit_line(&[1.0], &[1.0]),
            Err(Error::InsufficientData { .. })
        ));
    }
}
