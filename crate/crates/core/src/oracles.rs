//! Closed-form rate-distortion references and the mixture sandwich bounds
//! `p·R_fc(D) ≤ R(D) ≤ H(p) + p·R_fc(D)`.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rd::{RDCurve, RdPoint};

/// `max(0, ½ log2(variance / D))`.
pub fn gaussian_rd(variance: f64, d: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::arg("D", format!("distortion must be positive, got {d}")));
    }
    if !(variance > 0.0) {
        return Err(Error::arg("variance", "variance must be positive"));
    }
    Ok((0.5 * (variance / d).log2()).max(0.0))
}

/// Binary entropy in bits, with `0 log 0 = 0`. Inputs are clamped to `[0, 1]`.
pub fn binary_entropy(p: f64) -> f64 {
    let p = p.clamp(0.0, 1.0);
    let term = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    term(p) + term(1.0 - p)
}

/// Bernoulli(`p`) source under Hamming distortion: `H(p) - H(D)` below
/// `min(p, 1-p)`, zero above.
pub fn binary_hamming_rd(p: f64, d: f64) -> f64 {
    if d >= p.min(1.0 - p) {
        0.0
    } else {
        binary_entropy(p) - binary_entropy(d.max(0.0))
    }
}

/// Shannon lower bound of the unit-width uniform density,
/// `½ log2(1 / (2πe D))`, and zero at or beyond `D = 1/(2πe)`.
pub fn uniform_slb(d: f64) -> f64 {
    uniform_slb_width(1.0, d)
}

/// Shannon lower bound of a uniform density of the given width.
pub fn uniform_slb_width(width: f64, d: f64) -> f64 {
    if !(d > 0.0) {
        return 0.0;
    }
    (0.5 * (width * width / (2.0 * PI * E * d)).log2()).max(0.0)
}

/// Anything that can report a rate (bits/symbol) at a distortion.
pub trait RateCurve {
    /// Closed distortion interval on which [`rate`](RateCurve::rate) is valid.
    fn validity(&self) -> (f64, f64);
    fn rate(&self, d: f64) -> Result<f64>;
}

impl RateCurve for RDCurve {
    fn validity(&self) -> (f64, f64) {
        let mut positive = self.points.iter().map(|p| p.d).filter(|&d| d > 0.0);
        let lo = positive.next().unwrap_or(f64::NAN);
        let hi = self.points.last().map(|p| p.d).unwrap_or(f64::NAN);
        (lo, hi)
    }

    fn rate(&self, d: f64) -> Result<f64> {
        let (lo, hi) = self.validity();
        if !(d >= lo && d <= hi) {
            return Err(Error::arg(
                "D",
                format!("{d} outside the sampled range [{lo}, {hi}]"),
            ));
        }
        self.rate_at(d).ok_or_else(|| Error::arg("curve", "empty curve"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    /// `params = [variance]`.
    GaussianRd,
    /// `params = [p]`; Bernoulli source, Hamming distortion.
    BinaryHammingRd,
    /// `params = [width]`.
    UniformSlb,
    /// `params = [p, width]`; `p` times the uniform SLB.
    MixtureLower,
    /// `params = [p, width]`; `H(p)` plus the lower bound.
    MixtureUpper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCurve {
    pub kind: OracleKind,
    pub params: Vec<f64>,
}

impl OracleCurve {
    pub fn gaussian(variance: f64) -> Self {
        Self {
            kind: OracleKind::GaussianRd,
            params: vec![variance],
        }
    }

    pub fn binary_hamming(p: f64) -> Self {
        Self {
            kind: OracleKind::BinaryHammingRd,
            params: vec![p],
        }
    }

    pub fn uniform_slb(width: f64) -> Self {
        Self {
            kind: OracleKind::UniformSlb,
            params: vec![width],
        }
    }

    pub fn mixture_lower(p: f64, width: f64) -> Self {
        Self {
            kind: OracleKind::MixtureLower,
            params: vec![p, width],
        }
    }

    pub fn mixture_upper(p: f64, width: f64) -> Self {
        Self {
            kind: OracleKind::MixtureUpper,
            params: vec![p, width],
        }
    }

    fn param(&self, i: usize) -> Result<f64> {
        self.params
            .get(i)
            .copied()
            .ok_or_else(|| Error::arg("params", format!("{:?} needs {} parameter(s)", self.kind, i + 1)))
    }

    /// Samples the curve on `d_values` in the RDCurve layout with the
    /// solver columns zeroed.
    pub fn to_rd_curve(&self, d_values: &[f64]) -> Result<RDCurve> {
        let points = d_values
            .iter()
            .map(|&d| {
                Ok(RdPoint {
                    s: 0.0,
                    d,
                    r_bits: self.rate(d)?,
                    iterations: 0,
                    gap: 0.0,
                    converged: true,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RDCurve::from_points(points, 1, 0, f64::INFINITY))
    }
}

impl RateCurve for OracleCurve {
    fn validity(&self) -> (f64, f64) {
        match self.kind {
            OracleKind::BinaryHammingRd => (0.0, f64::INFINITY),
            _ => (f64::MIN_POSITIVE, f64::INFINITY),
        }
    }

    fn rate(&self, d: f64) -> Result<f64> {
        let (lo, hi) = self.validity();
        if !(d >= lo && d <= hi) {
            return Err(Error::arg(
                "D",
                format!("{d} outside the validity range of {:?}", self.kind),
            ));
        }
        Ok(match self.kind {
            OracleKind::GaussianRd => gaussian_rd(self.param(0)?, d)?,
            OracleKind::BinaryHammingRd => binary_hamming_rd(self.param(0)?, d),
            OracleKind::UniformSlb => uniform_slb_width(self.param(0)?, d),
            OracleKind::MixtureLower | OracleKind::MixtureUpper => {
                let r_fc = OracleCurve::uniform_slb(self.param(1)?);
                let (lower, upper) = mixture_bounds(self.param(0)?, &r_fc, d)?;
                if self.kind == OracleKind::MixtureLower {
                    lower
                } else {
                    upper
                }
            }
        })
    }
}

/// `(p·R_fc(D), H(p) + p·R_fc(D))`.
pub fn mixture_bounds<C: RateCurve + ?Sized>(p: f64, r_fc: &C, d: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::arg("p", format!("{p} is not a probability")));
    }
    let lower = p * r_fc.rate(d)?;
    Ok((lower, binary_entropy(p) + lower))
}

/// Split of the acceptance tolerance for containment checks, in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceBudget {
    pub total_bits: f64,
    pub discretization_share: f64,
    pub finite_m_share: f64,
    pub solver_share: f64,
}

impl Default for ToleranceBudget {
    fn default() -> Self {
        Self {
            total_bits: 0.1,
            discretization_share: 0.5,
            finite_m_share: 0.3,
            solver_share: 0.2,
        }
    }
}

impl ToleranceBudget {
    pub fn discretization_bits(&self) -> f64 {
        self.total_bits * self.discretization_share
    }

    pub fn finite_m_bits(&self) -> f64 {
        self.total_bits * self.finite_m_share
    }

    /// Largest certified solver gap a usable curve point may carry.
    pub fn solver_bits(&self) -> f64 {
        self.total_bits * self.solver_share
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_values() {
        assert_eq!(gaussian_rd(1.0, 1.0).unwrap(), 0.0);
        assert_eq!(gaussian_rd(1.0, 0.25).unwrap(), 1.0);
        assert_eq!(gaussian_rd(2.0, 0.5).unwrap(), 1.0);
        assert_eq!(gaussian_rd(1.0, 4.0).unwrap(), 0.0);
        assert!(gaussian_rd(1.0, 0.0).is_err());
        assert!(gaussian_rd(1.0, -1.0).is_err());
    }

    #[test]
    fn binary_entropy_values() {
        assert_eq!(binary_entropy(0.5), 1.0);
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        assert!((binary_entropy(0.2) - 0.7219).abs() < 1e-4);
        assert!((binary_entropy(0.2) - binary_entropy(0.8)).abs() < 1e-15);
    }

    #[test]
    fn hamming_values() {
        assert!((binary_hamming_rd(0.5, 0.1) - 0.531).abs() < 1e-3);
        assert_eq!(binary_hamming_rd(0.5, 0.5), 0.0);
        assert_eq!(binary_hamming_rd(0.2, 0.0), binary_entropy(0.2));
    }

    #[test]
    fn slb_values() {
        let edge = 1.0 / (2.0 * PI * E);
        assert!(uniform_slb(edge).abs() < 1e-12);
        assert!((uniform_slb(edge / 4.0) - 1.0).abs() < 1e-12);
        assert_eq!(uniform_slb(0.5), 0.0);
        assert_eq!(uniform_slb(0.0), 0.0);
    }

    #[test]
    fn mixture_bound_edges() {
        let slb = OracleCurve::uniform_slb(1.0);
        for d in [1e-5, 1e-4, 1e-3] {
            assert_eq!(mixture_bounds(0.0, &slb, d).unwrap(), (0.0, 0.0));
            let (lo, hi) = mixture_bounds(1.0, &slb, d).unwrap();
            assert_eq!(lo, uniform_slb(d));
            assert_eq!(hi, uniform_slb(d));
            let (lo, hi) = mixture_bounds(0.2, &slb, d).unwrap();
            assert!((hi - lo - 0.7219).abs() < 1e-4);
        }
        assert!(mixture_bounds(1.5, &slb, 1e-3).is_err());
        assert!(mixture_bounds(0.5, &slb, 0.0).is_err());
    }

    #[test]
    fn oracle_curves_export_with_zeroed_solver_columns() {
        let c = OracleCurve::gaussian(1.0)
            .to_rd_curve(&[0.25, 1.0, 0.01])
            .unwrap();
        assert_eq!(c.points[0].d, 0.01);
        assert!(c
            .points
            .iter()
            .all(|p| p.s == 0.0 && p.iterations == 0 && p.gap == 0.0));
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("\n0,0.25,1,0,0,1,0\n"), "{text}");
    }

    #[test]
    fn budget_split() {
        let b = ToleranceBudget::default();
        assert!((b.solver_bits() - 0.02).abs() < 1e-15);
        assert!((b.discretization_bits() + b.finite_m_bits() + b.solver_bits() - 0.1).abs() < 1e-15);
    }
}
