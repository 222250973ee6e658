//! Numerical checks of the quantitative estimates. Every check returns an
//! [`EstimateReport`] with the measured sides, fitted constants or slopes, the
//! tolerance used and a pass flag.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::grid::{Field, RadialGrid};

mod dynamics;
mod estimates;
mod potentials;
pub mod scenario;

pub use dynamics::*;
pub use estimates::*;
pub use potentials::*;

/// Least-squares line with a 95% confidence half-width on the slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    pub slope: f64,
    pub intercept: f64,
    pub slope_half_width: f64,
    pub samples: usize,
    pub r_squared: f64,
}

pub fn regress(x: &[f64], y: &[f64]) -> Result<Regression> {
    if x.len() != y.len() {
        return Err(Error::Mismatch("regression inputs differ in length".into()));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("regression needs two points, got {n}")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientData("regression abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_half_width = if n > 2 {
        let quantile = StudentsT::new(0.0, 1.0, nf - 2.0)
            .map(|d| d.inverse_cdf(0.975))
            .unwrap_or(f64::INFINITY);
        quantile * (sse / (nf - 2.0) / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(Regression {
        slope,
        intercept,
        slope_half_width,
        samples: n,
        r_squared,
    })
}

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub check: String,
    pub parameters: BTreeMap<String, f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub regression: Option<Regression>,
    pub fitted_constant: Option<f64>,
    /// Named scalar measurements (margins, errors, ratios).
    pub measured: BTreeMap<String, f64>,
    pub tolerance: f64,
    pub pass: bool,
    pub notes: Vec<String>,
}

impl EstimateReport {
    pub fn new(check: &str, tolerance: f64) -> Self {
        Self {
            check: check.to_string(),
            parameters: BTreeMap::new(),
            lhs: Vec::new(),
            rhs: Vec::new(),
            regression: None,
            fitted_constant: None,
            measured: BTreeMap::new(),
            tolerance,
            pass: false,
            notes: Vec::new(),
        }
    }

    pub fn param(mut self, key: &str, value: f64) -> Self {
        self.parameters.insert(key.to_string(), value);
        self
    }

    pub fn with_grid(self, grid: &RadialGrid) -> Self {
        let p = *grid.params();
        self.param("dim", p.dim() as f64)
            .param("m", p.m())
            .param("gamma", p.gamma())
            .param("r_max", grid.r_max())
            .param("cells", grid.len() as f64)
    }

    pub fn measure(&mut self, key: &str, value: f64) {
        self.measured.insert(key.to_string(), value);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    /// `LHS / RHS` pairwise, with `0/0 = 0`.
    pub fn ratios(&self) -> Vec<f64> {
        self.lhs.iter().zip(&self.rhs).map(|(l, r)| ratio(*l, *r)).collect()
    }
}

pub(crate) fn ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else {
        lhs / rhs
    }
}

/// Whether two fitted constants (typically from a resolution pair) agree within `factor`.
pub fn refinement_stable(coarse: &EstimateReport, fine: &EstimateReport, factor: f64) -> Option<f64> {
    let (a, b) = (coarse.fitted_constant?, fine.fitted_constant?);
    if a == 0.0 && b == 0.0 {
        return Some(1.0);
    }
    let r = (a / b).max(b / a);
    (r.is_finite() && r < factor).then_some(r)
}

/// Mass `int_{B_R} |u| rho dx`, with the cell straddling `R` counted partially.
pub(crate) fn ball_l1(field: &Field, radius: f64) -> f64 {
    field
        .grid()
        .ball_masses(radius)
        .iter()
        .map(|&(i, m)| field.values()[i].abs() * m)
        .sum()
}

/// `int_{B_R} |u|^p rho dx`.
pub(crate) fn ball_lp(field: &Field, radius: f64, p: f64) -> f64 {
    field
        .grid()
        .ball_masses(radius)
        .iter()
        .map(|&(i, m)| field.values()[i].abs().powf(p) * m)
        .sum()
}

/// Sup of `|u|` over the cells meeting `B_R`.
pub(crate) fn ball_sup(field: &Field, radius: f64) -> f64 {
    field
        .grid()
        .ball_masses(radius)
        .iter()
        .fold(0.0, |a, &(i, _)| a.max(field.values()[i].abs()))
}

/// Trapezoidal time integral of samples `(t_k, f_k)`.
pub(crate) fn trapezoid(samples: &[(f64, f64)]) -> f64 {
    samples.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn regression_recovers_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let r = regress(&x, &y).unwrap();
        assert_relative_eq!(r.slope, -0.5, epsilon = 1e-14);
        assert_relative_eq!(r.intercept, 2.0, epsilon = 1e-13);
        assert!(r.slope_half_width < 1e-12);
        assert!(regress(&[1.0], &[1.0]).is_err());
        assert!(regress(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn regression_half_width_matches_t_quantile() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [0.0, 1.1, 1.9, 3.0];
        let r = regress(&x, &y).unwrap();
        // sse and the 97.5% quantile of t with 2 degrees of freedom (4.302653)
        let sse: f64 = x.iter().zip(&y).map(|(a, b)| (b - r.intercept - r.slope * a).powi(2)).sum();
        assert_relative_eq!(r.slope_half_width, 4.302653 * (sse / 2.0 / 5.0).sqrt(), max_relative = 1e-6);
    }

    #[test]
    fn stability_ratio() {
        let mut a = EstimateReport::new("x", 0.0);
        let mut b = EstimateReport::new("x", 0.0);
        a.fitted_constant = Some(1.0);
        b.fitted_constant = Some(1.5);
        assert_relative_eq!(refinement_stable(&a, &b, 2.0).unwrap(), 1.5);
        b.fitted_constant = Some(3.0);
        assert!(refinement_stable(&a, &b, 2.0).is_none());
    }

    #[test]
    fn trapezoid_is_exact_for_lines() {
        assert_relative_eq!(trapezoid(&[(0.0, 1.0), (1.0, 2.0), (3.0, 4.0)]), 1.5 + 6.0);
    }
}
