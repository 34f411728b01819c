//! Ordinary least squares for straight lines, and the dimension estimate
//! type shared by the ID and RDD estimators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; zero with only two points.
    pub slope_stderr: f64,
    pub residual_max: f64,
    pub points: usize,
}

/// Fits `y = intercept + slope·x` with equal weights.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() {
        return Err(Error::arg("ys", "x and y lengths differ"));
    }
    let n = xs.len();
    if n < 2 {
        return Err(Error::DegenerateFit(format!("{n} point(s)")));
    }
    let nf = n as f64;
    let x_mean = xs.iter().sum::<f64>() / nf;
    let y_mean = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean) * (x - x_mean)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateFit("all abscissae equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - x_mean) * (y - y_mean)).sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let mut ssr = 0.0;
    let mut residual_max: f64 = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let r = y - (intercept + slope * x);
        ssr += r * r;
        residual_max = residual_max.max(r.abs());
    }
    let slope_stderr = if n > 2 {
        (ssr / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LineFit {
        slope,
        intercept,
        slope_stderr,
        residual_max,
        points: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    RatioFit,
    SlopeFit,
    RddFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderEstimate {
    pub k: usize,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Scaled slope before clamping at zero.
    pub raw_value: f64,
    pub intercept: f64,
    pub residual_max: f64,
    pub points_used: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_order: Vec<OrderEstimate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

/// A dimension in `[0, ∞)` with its regression standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub value: f64,
    pub stderr: f64,
    pub method: FitMethod,
    pub window: String,
    pub diagnostics: FitDiagnostics,
}

impl DimensionEstimate {
    /// Builds an estimate whose value is `scale × slope`.
    pub(crate) fn from_line(fit: &LineFit, scale: f64, method: FitMethod, window: String) -> Self {
        let raw = scale * fit.slope;
        Self {
            value: raw.max(0.0),
            stderr: scale * fit.slope_stderr,
            method,
            window,
            diagnostics: FitDiagnostics {
                raw_value: raw,
                intercept: fit.intercept,
                residual_max: fit.residual_max,
                points_used: fit.points,
                ..Default::default()
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let xs = [4.0, 6.0, 8.0, 10.0];
        let ys: Vec<f64> = xs.iter().map(|b| 0.5 * b + 2.0).collect();
        let fit = fit_line(&xs, &ys).unwrap();
        assert_eq!(fit.slope, 0.5);
        assert_eq!(fit.intercept, 2.0);
        assert_eq!(fit.slope_stderr, 0.0);
    }

    #[test]
    fn noisy_line_stderr_positive() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let ys = [0.1, 0.9, 2.2, 2.8, 4.1];
        let fit = fit_line(&xs, &ys).unwrap();
        assert!((fit.slope - 0.99).abs() < 1e-12);
        assert!(fit.slope_stderr > 0.0);
        assert!(fit.residual_max > 0.0);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(fit_line(&[1.0], &[1.0]), Err(Error::DegenerateFit(_))));
        assert!(matches!(
            fit_line(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(Error::DegenerateFit(_))
        ));
        assert!(fit_line(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn negative_slope_clamps_value() {
        let fit = fit_line(&[0.0, 1.0, 2.0], &[0.0, -0.01, -0.02]).unwrap();
        let est = DimensionEstimate::from_line(&fit, 1.0, FitMethod::SlopeFit, String::new());
        assert_eq!(est.value, 0.0);
        assert!(est.diagnostics.raw_value < 0.0);
    }
}
