//! Radial weight models `rho(r)` and their envelope certificates.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{sphere_area, Params};
use crate::quadrature;

/// Radial density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightModel {
    /// `rho(r) = r^(-gamma)`.
    PurePower { gamma: f64 },
    /// `rho(r) = r^(-gamma) (1 + a sin(b ln r))`, with the multiplier frozen below `floor_radius`.
    PerturbedPower {
        gamma: f64,
        amplitude: f64,
        frequency: f64,
        floor_radius: f64,
    },
    /// Piecewise-constant table: `values[k]` on `[radii[k], radii[k+1])`,
    /// extended by the nearest sample outside the table. `gamma` is the
    /// decay exponent the table is meant to model.
    Tabulated {
        gamma: f64,
        radii: Vec<f64>,
        values: Vec<f64>,
    },
}

/// Outcome of [`verify_envelope`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCertificate {
    pub pass: bool,
    /// `min rho(r) (1 + r)^gamma / c_under`; must be at least one.
    pub lower_margin: f64,
    /// `max rho(r) r^gamma / c_over`; must be at most one.
    pub upper_margin: f64,
    pub worst_lower_radius: f64,
    pub worst_upper_radius: f64,
}

impl WeightModel {
    pub fn pure_power(gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(Self::PurePower { gamma })
    }

    /// Perturbed power weight with the oscillation frozen below `1e-6 * r_max`.
    pub fn perturbed(gamma: f64, amplitude: f64, frequency: f64, r_max: f64) -> Result<Self> {
        check_gamma(gamma)?;
        if !(amplitude.abs() < 1.0) {
            return Err(Error::InvalidWeight(format!("amplitude must lie in (-1, 1), got {amplitude}")));
        }
        if !(frequency > 0.0 && frequency.is_finite()) {
            return Err(Error::InvalidWeight(format!("frequency must be positive, got {frequency}")));
        }
        if !(r_max > 0.0) {
            return Err(Error::InvalidWeight("r_max must be positive".into()));
        }
        Ok(Self::PerturbedPower {
            gamma,
            amplitude,
            frequency,
            floor_radius: 1e-6 * r_max,
        })
    }

    pub fn tabulated(gamma: f64, radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_gamma(gamma)?;
        if radii.is_empty() || radii.len() != values.len() {
            return Err(Error::InvalidWeight("table needs matching, non-empty columns".into()));
        }
        if radii.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidWeight("table radii must be strictly increasing".into()));
        }
        if radii[0] < 0.0 {
            return Err(Error::InvalidWeight("table radii must be nonnegative".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidWeight("table values must be positive and finite".into()));
        }
        Ok(Self::Tabulated { gamma, radii, values })
    }

    /// Reads a two-column `radius,value` CSV (header optional).
    pub fn tabulated_from_csv<R: Read>(gamma: f64, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut radii = Vec::new();
        let mut values = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::InvalidWeight(format!("csv line {}: {e}", line + 1)))?;
            if rec.len() != 2 {
                return Err(Error::InvalidWeight(format!(
                    "csv line {}: expected 2 columns, got {}",
                    line + 1,
                    rec.len()
                )));
            }
            let parsed = (rec[0].parse::<f64>(), rec[1].parse::<f64>());
            match parsed {
                (Ok(r), Ok(v)) => {
                    radii.push(r);
                    values.push(v);
                }
                _ if line == 0 => continue, // header
                _ => {
                    return Err(Error::InvalidWeight(format!("csv line {}: unparsable number", line + 1)))
                }
            }
        }
        Self::tabulated(gamma, radii, values)
    }

    pub fn gamma(&self) -> f64 {
        match self {
            Self::PurePower { gamma } | Self::PerturbedPower { gamma, .. } | Self::Tabulated { gamma, .. } => {
                *gamma
            }
        }
    }

    /// `rho(r) r^gamma`, bounded and positive for every variant.
    pub fn multiplier(&self, r: f64) -> f64 {
        match self {
            Self::PurePower { .. } => 1.0,
            Self::PerturbedPower {
                amplitude,
                frequency,
                floor_radius,
                ..
            } => 1.0 + amplitude * (frequency * r.max(*floor_radius).ln()).sin(),
            Self::Tabulated { gamma, radii, values } => {
                let k = radii.partition_point(|&x| x <= r).saturating_sub(1);
                values[k] * r.powf(*gamma)
            }
        }
    }

    pub fn eval(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::InvalidArgument(format!("negative radius {r}")));
        }
        if let Self::Tabulated { radii, values, .. } = self {
            let k = radii.partition_point(|&x| x <= r).saturating_sub(1);
            return Ok(values[k]);
        }
        let gamma = self.gamma();
        if r == 0.0 {
            if gamma > 0.0 {
                return Err(Error::WeightSingularity { gamma });
            }
            return Ok(self.multiplier(0.0));
        }
        Ok(r.powf(-gamma) * self.multiplier(r))
    }

    /// `omega_{N-1} int_a^b f(s) rho(s) s^{N-1} ds`.
    ///
    /// The singular factor is absorbed by `tau = s^{N - gamma}`, so the integrand in
    /// `tau` is `f(s) rho(s) s^gamma`, bounded near the origin.
    pub fn shell_integral(&self, dim: usize, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        if !(b > a) {
            return 0.0;
        }
        let nw = dim as f64 - self.gamma();
        let omega = sphere_area(dim);
        let piece = |lo: f64, hi: f64| -> f64 {
            let (t0, t1) = (lo.powf(nw), hi.powf(nw));
            quadrature::integrate(t0, t1, 16, |tau| {
                let s = tau.powf(1.0 / nw);
                f(s) * self.multiplier(s)
            })
        };
        let total: f64 = self.breakpoints(a, b).windows(2).map(|w| piece(w[0], w[1])).sum();
        omega * total / nw
    }

    /// Subdivision of `[a, b]` on which the multiplier is smooth and slowly varying.
    fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        let mut pts = vec![a];
        match self {
            Self::PurePower { .. } => {}
            Self::PerturbedPower {
                frequency,
                floor_radius,
                ..
            } => {
                let mut lo = a;
                if lo < *floor_radius && b > *floor_radius {
                    pts.push(*floor_radius);
                    lo = *floor_radius;
                }
                if lo >= *floor_radius {
                    let span = (b / lo).ln();
                    let pieces = (frequency * span).max(span / 1.5f64.ln()).ceil().max(1.0) as usize;
                    let ratio = (b / lo).powf(1.0 / pieces as f64);
                    let mut x = lo;
                    for _ in 1..pieces {
                        x *= ratio;
                        pts.push(x);
                    }
                }
            }
            Self::Tabulated { radii, .. } => {
                pts.extend(radii.iter().copied().filter(|&r| r > a && r < b));
            }
        }
        pts.push(b);
        pts
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma.is_finite() && (0.0..2.0).contains(&gamma)) {
        return Err(Error::InvalidWeight(format!("gamma must lie in [0, 2), got {gamma}")));
    }
    Ok(())
}

/// Weighted measure of the shell `a <= |x| <= b`.
pub fn cell_mass(model: &WeightModel, a: f64, b: f64, params: &Params) -> f64 {
    let dim = params.dim();
    if let WeightModel::PurePower { gamma } = model {
        let nw = dim as f64 - gamma;
        return sphere_area(dim) * (b.powf(nw) - a.powf(nw)) / nw;
    }
    model.shell_integral(dim, a, b, |_| 1.0)
}

/// Checks `c_under (1 + r)^(-gamma) <= rho(r) <= c_over r^(-gamma)` on the sample radii.
pub fn verify_envelope(
    model: &WeightModel,
    c_under: f64,
    c_over: f64,
    radii: &[f64],
) -> Result<EnvelopeCertificate> {
    if radii.is_empty() {
        return Err(Error::InvalidArgument("empty sample set".into()));
    }
    let gamma = model.gamma();
    let mut lower = (f64::INFINITY, f64::NAN);
    let mut upper = (f64::NEG_INFINITY, f64::NAN);
    for &r in radii {
        if !(r > 0.0) {
            return Err(Error::InvalidArgument(format!("sample radius {r} is not positive")));
        }
        let rho = model.eval(r)?;
        let lo = rho * (1.0 + r).powf(gamma) / c_under;
        let hi = rho * r.powf(gamma) / c_over;
        if lo < lower.0 {
            lower = (lo, r);
        }
        if hi > upper.0 {
            upper = (hi, r);
        }
    }
    Ok(EnvelopeCertificate {
        pass: lower.0 >= 1.0 && upper.0 <= 1.0,
        lower_margin: lower.0,
        upper_margin: upper.0,
        worst_lower_radius: lower.1,
        worst_upper_radius: upper.1,
    })
}

/// Logarithmically spaced radii on `[lo, hi]`.
pub fn log_samples(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let count = count.max(2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn p3(gamma: f64) -> Params {
        Params::new(3, 2.0, gamma).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_relative_eq!(WeightModel::pure_power(1.0).unwrap().eval(2.0).unwrap(), 0.5);
        assert_eq!(WeightModel::pure_power(0.0).unwrap().eval(7.0).unwrap(), 1.0);
        let w = WeightModel::perturbed(1.0, 0.5, 1.0, 10.0).unwrap();
        assert_relative_eq!(w.eval(1.0).unwrap(), 1.0);
    }

    #[test]
    fn eval_at_origin() {
        assert!(matches!(
            WeightModel::pure_power(1.0).unwrap().eval(0.0),
            Err(Error::WeightSingularity { .. })
        ));
        assert_eq!(WeightModel::pure_power(0.0).unwrap().eval(0.0).unwrap(), 1.0);
    }

    #[test]
    fn cell_mass_examples() {
        let w1 = WeightModel::pure_power(1.0).unwrap();
        assert_relative_eq!(cell_mass(&w1, 0.0, 1.0, &p3(1.0)), 2.0 * PI, max_relative = 1e-14);
        let w0 = WeightModel::pure_power(0.0).unwrap();
        assert_relative_eq!(cell_mass(&w0, 0.0, 1.0, &p3(0.0)), 4.0 * PI / 3.0, epsilon = 1e-14);
        let flat = WeightModel::perturbed(1.0, 0.0, 3.0, 1.0).unwrap();
        for (a, b) in [(0.0, 1e-3), (0.0, 1.0), (0.3, 0.7), (2.0, 9.0)] {
            assert_relative_eq!(
                cell_mass(&flat, a, b, &p3(1.0)),
                cell_mass(&w1, a, b, &p3(1.0)),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn quadrature_handles_strong_singularity() {
        let w = WeightModel::PerturbedPower {
            gamma: 1.9,
            amplitude: 0.0,
            frequency: 1.0,
            floor_radius: 1e-9,
        };
        let p = Params::new(3, 2.0, 1.9).unwrap();
        let exact = 4.0 * PI * 0.05f64.powf(1.1) / 1.1;
        assert_relative_eq!(cell_mass(&w, 0.0, 0.05, &p), exact, max_relative = 1e-13);
    }

    #[test]
    fn tabulated_is_piecewise_constant() {
        let w = WeightModel::tabulated(0.0, vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 4.0]).unwrap();
        assert_eq!(w.eval(0.5).unwrap(), 1.0);
        assert_eq!(w.eval(1.0).unwrap(), 2.0);
        assert_eq!(w.eval(50.0).unwrap(), 4.0);
        let p = p3(0.0);
        let m = cell_mass(&w, 0.5, 1.5, &p);
        let exact = 4.0 * PI * ((1.0 - 0.125) / 3.0 + 2.0 * (3.375 - 1.0) / 3.0);
        assert_relative_eq!(m, exact, max_relative = 1e-13);
    }

    #[test]
    fn tabulated_csv() {
        let csv = "radius,value\n0.0,1.0\n1.0,0.5\n";
        let w = WeightModel::tabulated_from_csv(0.0, csv.as_bytes()).unwrap();
        assert_eq!(w.eval(3.0).unwrap(), 0.5);
        assert!(WeightModel::tabulated_from_csv(0.0, "0,1\n0,2\n".as_bytes()).is_err());
        assert!(WeightModel::tabulated_from_csv(0.0, "0,1\n1,x\n".as_bytes()).is_err());
    }

    #[test]
    fn envelope_examples() {
        let w = WeightModel::pure_power(1.0).unwrap();
        let radii = log_samples(0.01, 100.0, 400);
        assert!(verify_envelope(&w, 0.5, 1.0, &radii).unwrap().pass);
        let cert = verify_envelope(&w, 0.25, 0.5, &radii).unwrap();
        assert!(!cert.pass);
        assert_relative_eq!(cert.upper_margin, 2.0, epsilon = 1e-12);
        let pw = WeightModel::perturbed(1.0, 0.5, 1.0, 100.0).unwrap();
        assert!(verify_envelope(&pw, 0.25, 1.5, &radii).unwrap().pass);
        assert!(verify_envelope(&w, 0.5, 1.0, &[]).is_err());
    }

    proptest! {
        #[test]
        fn mass_is_additive(gamma in 0.0f64..1.99, a in 0.0f64..2.0, d1 in 0.01f64..2.0, d2 in 0.01f64..2.0,
                            amp in -0.9f64..0.9, freq in 0.1f64..5.0) {
            let p = Params::new(3, 2.0, gamma).unwrap();
            let w = WeightModel::perturbed(gamma, amp, freq, 10.0).unwrap();
            let (b, c) = (a + d1, a + d1 + d2);
            let lhs = cell_mass(&w, a, b, &p) + cell_mass(&w, b, c, &p);
            let rhs = cell_mass(&w, a, c, &p);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs);
        }

        #[test]
        fn pure_power_mass_scales(gamma in 0.0f64..1.99, a in 0.0f64..3.0, d in 0.01f64..3.0, s in 0.1f64..10.0) {
            let p = Params::new(4, 1.5, gamma).unwrap();
            let w = WeightModel::pure_power(gamma).unwrap();
            let base = cell_mass(&w, a, a + d, &p);
            let scaled = cell_mass(&w, s * a, s * (a + d), &p);
            prop_assert!((scaled - s.powf(4.0 - gamma) * base).abs() <= 1e-12 * scaled);
        }

        #[test]
        fn pure_power_envelope_far_field(gamma in 0.0f64..1.99, lo in 1.0f64..50.0) {
            let w = WeightModel::pure_power(gamma).unwrap();
            let radii = log_samples(lo, lo * 100.0, 50);
            let cert = verify_envelope(&w, 2f64.powf(-gamma) * (1.0 - 1e-9), 1.0 + 1e-12, &radii).unwrap();
            prop_assert!(cert.pass);
        }
    }
}
