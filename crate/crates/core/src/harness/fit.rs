//! Least-squares power laws on log-log axes.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// `y ≈ e^intercept · x^exponent`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Two-sided 95% confidence interval of the exponent (Student t).
    pub exponent_ci95: (f64, f64),
    pub points: usize,
}

/// Fits `log y = intercept + exponent · log x` by ordinary least squares.
///
/// Needs at least three points with positive `x` and `y`. A constant `y`
/// gives exponent 0 and R² = 1.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<PowerLawFit> {
    if xs.len() != ys.len() {
        return Err(Error::DegenerateFit(format!(
            "{} abscissae for {} values",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(Error::DegenerateFit(format!("{} points, need at least 3", xs.len())));
    }
    if let Some(y) = ys.iter().find(|y| !(y.is_finite() && **y > 0.0)) {
        return Err(Error::DegenerateFit(format!("value {y} is not positive")));
    }
    if let Some(x) = xs.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(Error::DegenerateFit(format!("abscissa {x} is not positive")));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all abscissae coincide".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let sse: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - exponent * x).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { (1.0 - sse / syy).max(0.0) };
    let dof = n - 2.0;
    let se = (sse / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::DegenerateFit(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(PowerLawFit {
        exponent,
        intercept,
        r_squared,
        exponent_ci95: (exponent - t * se, exponent + t * se),
        points: xs.len(),
    })
}
