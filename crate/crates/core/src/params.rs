//! Problem parameters and the scaling exponents derived from them.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma as gamma_fn;

use crate::error::{Error, Result};

/// The problem data `(N, m, gamma, c_under, c_over)`.
///
/// The weight is assumed to satisfy
/// `c_under (1 + r)^(-gamma) <= rho(r) <= c_over r^(-gamma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct Params {
    dim: usize,
    m: f64,
    gamma: f64,
    c_under: f64,
    c_over: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    dim: usize,
    m: f64,
    gamma: f64,
    #[serde(default = "default_c_under")]
    c_under: f64,
    #[serde(default = "default_c_over")]
    c_over: f64,
}

fn default_c_under() -> f64 {
    0.25
}

fn default_c_over() -> f64 {
    2.0
}

impl TryFrom<RawParams> for Params {
    type Error = Error;
    fn try_from(raw: RawParams) -> Result<Self> {
        Params::with_envelope(raw.dim, raw.m, raw.gamma, raw.c_under, raw.c_over)
    }
}

impl From<Params> for RawParams {
    fn from(p: Params) -> Self {
        RawParams {
            dim: p.dim,
            m: p.m,
            gamma: p.gamma,
            c_under: p.c_under,
            c_over: p.c_over,
        }
    }
}

impl Params {
    /// Parameters with the default envelope constants `(0.25, 2)`.
    pub fn new(dim: usize, m: f64, gamma: f64) -> Result<Self> {
        Self::with_envelope(dim, m, gamma, default_c_under(), default_c_over())
    }

    pub fn with_envelope(dim: usize, m: f64, gamma: f64, c_under: f64, c_over: f64) -> Result<Self> {
        if dim < 3 {
            return Err(Error::InvalidParams(format!("dimension must be >= 3, got {dim}")));
        }
        if !(m.is_finite() && m > 1.0) {
            return Err(Error::InvalidParams(format!("exponent m must be > 1, got {m}")));
        }
        if !(gamma.is_finite() && (0.0..2.0).contains(&gamma)) {
            return Err(Error::InvalidParams(format!("gamma must lie in [0, 2), got {gamma}")));
        }
        if !(c_under > 0.0 && c_under < c_over && c_over.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "envelope constants must satisfy 0 < c_under < c_over, got ({c_under}, {c_over})"
            )));
        }
        Ok(Self { dim, m, gamma, c_under, c_over })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn c_under(&self) -> f64 {
        self.c_under
    }

    pub fn c_over(&self) -> f64 {
        self.c_over
    }

    /// `N - gamma`, the homogeneity of the weighted volume.
    pub fn weighted_dim(&self) -> f64 {
        self.dim as f64 - self.gamma
    }

    /// Spatial growth exponent `(2 - gamma)/(m - 1)` of the blow-up profiles.
    pub fn growth_exponent(&self) -> f64 {
        (2.0 - self.gamma) / (self.m - 1.0)
    }

    /// Exponent `(N - gamma) + (2 - gamma)/(m - 1)` of the Morrey-type norm.
    pub fn morrey_exponent(&self) -> f64 {
        self.weighted_dim() + self.growth_exponent()
    }

    /// Surface area of the unit sphere in `R^N`.
    pub fn sphere_area(&self) -> f64 {
        sphere_area(self.dim)
    }

    /// Volume of the unit ball in `R^N`.
    pub fn ball_volume(&self) -> f64 {
        unit_ball_volume(self.dim)
    }

    /// Critical exponent `2* = 2 (N - gamma)/(N - 2)` of the weighted Sobolev inequality.
    pub fn sobolev_exponent(&self) -> f64 {
        2.0 * self.weighted_dim() / (self.dim as f64 - 2.0)
    }

    pub fn scaling(&self) -> ScalingConstants {
        scaling_constants(self)
    }
}

/// Scale-invariance exponents `lambda` and `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingConstants {
    pub lambda: f64,
    pub theta: f64,
}

impl ScalingConstants {
    /// `lambda (m - 1) + theta lambda`, identically one.
    pub fn relation(&self, m: f64) -> f64 {
        self.lambda * (m - 1.0) + self.theta * self.lambda
    }
}

pub fn scaling_constants(params: &Params) -> ScalingConstants {
    let nw = params.weighted_dim();
    let lambda = nw / (nw * (params.m - 1.0) + 2.0 - params.gamma);
    let theta = (2.0 - params.gamma) / nw;
    ScalingConstants { lambda, theta }
}

/// `omega_{N-1} = 2 pi^{N/2} / Gamma(N/2)`.
pub fn sphere_area(dim: usize) -> f64 {
    let half = dim as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(half) / gamma_fn(half)
}

/// `alpha(N) = omega_{N-1} / N`.
pub fn unit_ball_volume(dim: usize) -> f64 {
    sphere_area(dim) / dim as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn scaling_classical_case() {
        let s = Params::new(3, 2.0, 0.0).unwrap().scaling();
        assert_relative_eq!(s.lambda, 0.6, epsilon = 1e-15);
        assert_relative_eq!(s.theta, 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn scaling_weighted_case() {
        let s = Params::new(4, 2.0, 1.0).unwrap().scaling();
        assert_relative_eq!(s.lambda, 0.75, epsilon = 1e-15);
        assert_relative_eq!(s.theta, 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn sphere_constants() {
        assert_relative_eq!(sphere_area(3), 4.0 * PI, epsilon = 1e-13);
        assert_relative_eq!(unit_ball_volume(3), 4.0 * PI / 3.0, epsilon = 1e-13);
        assert_relative_eq!(sphere_area(4), 2.0 * PI * PI, epsilon = 1e-13);
        assert_relative_eq!(unit_ball_volume(5), 8.0 * PI * PI / 15.0, epsilon = 1e-13);
    }

    #[test]
    fn rejects_invalid() {
        assert!(Params::new(2, 2.0, 0.0).is_err());
        assert!(Params::new(3, 1.0, 0.0).is_err());
        assert!(Params::new(3, 2.0, 2.0).is_err());
        assert!(Params::new(3, 2.0, -0.1).is_err());
        assert!(Params::with_envelope(3, 2.0, 0.5, 1.0, 1.0).is_err());
        assert!(Params::with_envelope(3, 2.0, 0.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn serde_validates() {
        let ok: Params = serde_json::from_str(r#"{"dim":3,"m":2.0,"gamma":1.0}"#).unwrap();
        assert_eq!(ok.dim(), 3);
        let bad: std::result::Result<Params, _> =
            serde_json::from_str(r#"{"dim":3,"m":0.5,"gamma":1.0}"#);
        assert!(bad.is_err());
    }

    proptest! {
        #[test]
        fn scaling_relation_holds(dim in 3usize..9, m in 1.0001f64..6.0, gamma in 0.0f64..1.999) {
            let p = Params::new(dim, m, gamma).unwrap();
            let s = p.scaling();
            prop_assert!((s.relation(m) - 1.0).abs() < 1e-14);
            prop_assert!(s.lambda > 0.0 && s.theta > 0.0);
        }
    }
}
