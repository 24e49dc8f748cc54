//! Parametric demand curves, the feasible decision box and staffing costs.

mod assumptions;
mod fit;

pub use assumptions::{check_assumption1a, AssumptionReport};
pub use fit::{fit_least_squares, FitResult};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::queue_sim::Policy;

/// Arrival rate as a function of price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DemandCurve {
    /// `a - b p`
    Linear { a: f64, b: f64 },
    /// `c - a p²`
    Quadratic { c: f64, a: f64 },
    /// `exp(a - b p)`
    Exponential { a: f64, b: f64 },
    /// `m0 · exp(a - b p) / (1 + exp(a - b p))`
    Logit { m0: f64, a: f64, b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemandFamily {
    Linear,
    Quadratic,
    Exponential,
    Logit,
}

impl DemandFamily {
    pub fn n_params(self) -> usize {
        match self {
            DemandFamily::Logit => 3,
            _ => 2,
        }
    }
}

fn logistic(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

impl DemandCurve {
    pub fn family(&self) -> DemandFamily {
        match self {
            DemandCurve::Linear { .. } => DemandFamily::Linear,
            DemandCurve::Quadratic { .. } => DemandFamily::Quadratic,
            DemandCurve::Exponential { .. } => DemandFamily::Exponential,
            DemandCurve::Logit { .. } => DemandFamily::Logit,
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            DemandCurve::Linear { a, b } => vec![a, b],
            DemandCurve::Quadratic { c, a } => vec![c, a],
            DemandCurve::Exponential { a, b } => vec![a, b],
            DemandCurve::Logit { m0, a, b } => vec![m0, a, b],
        }
    }

    pub fn rate(&self, p: f64) -> f64 {
        match *self {
            DemandCurve::Linear { a, b } => a - b * p,
            DemandCurve::Quadratic { c, a } => c - a * p * p,
            DemandCurve::Exponential { a, b } => (a - b * p).exp(),
            DemandCurve::Logit { m0, a, b } => m0 * logistic(a - b * p),
        }
    }

    pub fn d1(&self, p: f64) -> f64 {
        match *self {
            DemandCurve::Linear { b, .. } => -b,
            DemandCurve::Quadratic { a, .. } => -2.0 * a * p,
            DemandCurve::Exponential { a, b } => -b * (a - b * p).exp(),
            DemandCurve::Logit { m0, a, b } => {
                let s = logistic(a - b * p);
                -b * m0 * s * (1.0 - s)
            }
        }
    }

    pub fn d2(&self, p: f64) -> f64 {
        match *self {
            DemandCurve::Linear { .. } => 0.0,
            DemandCurve::Quadratic { a, .. } => -2.0 * a,
            DemandCurve::Exponential { a, b } => b * b * (a - b * p).exp(),
            DemandCurve::Logit { m0, a, b } => {
                let s = logistic(a - b * p);
                b * b * m0 * s * (1.0 - s) * (1.0 - 2.0 * s)
            }
        }
    }

    /// The same family with every rate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> DemandCurve {
        match *self {
            DemandCurve::Linear { a, b } => DemandCurve::Linear { a: a * factor, b: b * factor },
            DemandCurve::Quadratic { c, a } => DemandCurve::Quadratic { c: c * factor, a: a * factor },
            DemandCurve::Exponential { a, b } => DemandCurve::Exponential { a: a + factor.ln(), b },
            DemandCurve::Logit { m0, a, b } => DemandCurve::Logit { m0: m0 * factor, a, b },
        }
    }

    /// Sup-norm distance to `other` on a uniform grid over `[lo, hi]`.
    pub fn sup_distance(&self, other: &DemandCurve, lo: f64, hi: f64, grid: usize) -> f64 {
        let n = grid.max(2);
        (0..n)
            .map(|i| {
                let p = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                (self.rate(p) - other.rate(p)).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// A demand curve validated on a price interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandModel {
    pub curve: DemandCurve,
    pub p_lo: f64,
    pub p_hi: f64,
}

impl DemandModel {
    /// Checks `λ > 0` and `λ' <= 0` on a 1001-point grid over the interval.
    pub fn new(curve: DemandCurve, p_lo: f64, p_hi: f64) -> Result<Self> {
        if !(p_lo < p_hi) {
            return Err(Error::InvalidDemand(format!("empty price interval [{p_lo}, {p_hi}]")));
        }
        for i in 0..=1000 {
            let p = p_lo + (p_hi - p_lo) * i as f64 / 1000.0;
            let r = curve.rate(p);
            if !(r > 0.0) {
                return Err(Error::InvalidDemand(format!("rate {r} is not positive at p={p}")));
            }
            let d = curve.d1(p);
            if d > 0.0 {
                return Err(Error::InvalidDemand(format!("rate increases at p={p} (slope {d})")));
            }
        }
        Ok(Self { curve, p_lo, p_hi })
    }

    fn check(&self, p: f64) -> Result<()> {
        if p < self.p_lo || p > self.p_hi || p.is_nan() {
            return Err(Error::PriceOutOfRange { price: p, lo: self.p_lo, hi: self.p_hi });
        }
        Ok(())
    }

    pub fn eval(&self, p: f64) -> Result<f64> {
        self.check(p)?;
        Ok(self.curve.rate(p))
    }

    pub fn eval_d1(&self, p: f64) -> Result<f64> {
        self.check(p)?;
        Ok(self.curve.d1(p))
    }

    pub fn eval_d2(&self, p: f64) -> Result<f64> {
        self.check(p)?;
        Ok(self.curve.d2(p))
    }
}

/// The rectangle `[mu_lo, mu_hi] × [p_lo, p_hi]` of admissible decisions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibleBox {
    pub mu_lo: f64,
    pub mu_hi: f64,
    pub p_lo: f64,
    pub p_hi: f64,
}

impl FeasibleBox {
    pub fn new(mu_lo: f64, mu_hi: f64, p_lo: f64, p_hi: f64) -> Result<Self> {
        let b = Self { mu_lo, mu_hi, p_lo, p_hi };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu_lo < self.mu_hi) || !(self.mu_lo > 0.0) {
            return Err(Error::InvalidBox(format!(
                "need 0 < mu_lo < mu_hi, got [{}, {}]",
                self.mu_lo, self.mu_hi
            )));
        }
        if !(self.p_lo < self.p_hi) {
            return Err(Error::InvalidBox(format!(
                "need p_lo < p_hi, got [{}, {}]",
                self.p_lo, self.p_hi
            )));
        }
        Ok(())
    }

    /// Uniform stability: the largest rate in the box stays below the smallest capacity.
    pub fn is_stable_for(&self, curve: &DemandCurve) -> bool {
        curve.rate(self.p_lo) < self.mu_lo
    }

    pub fn require_stable(&self, curve: &DemandCurve) -> Result<()> {
        let lam = curve.rate(self.p_lo);
        if lam < self.mu_lo {
            Ok(())
        } else {
            Err(Error::InvalidBox(format!(
                "not uniformly stable: lambda(p_lo)={lam} >= mu_lo={}",
                self.mu_lo
            )))
        }
    }

    pub fn contains(&self, x: Policy) -> bool {
        x.mu >= self.mu_lo && x.mu <= self.mu_hi && x.p >= self.p_lo && x.p <= self.p_hi
    }

    /// Euclidean projection onto the box (coordinatewise clamp).
    pub fn project(&self, x: Policy) -> Policy {
        Policy { mu: x.mu.clamp(self.mu_lo, self.mu_hi), p: x.p.clamp(self.p_lo, self.p_hi) }
    }

    pub fn midpoint(&self) -> Policy {
        Policy { mu: 0.5 * (self.mu_lo + self.mu_hi), p: 0.5 * (self.p_lo + self.p_hi) }
    }

    pub fn demand_model(&self, curve: DemandCurve) -> Result<DemandModel> {
        DemandModel::new(curve, self.p_lo, self.p_hi)
    }
}

/// Cost rate of maintaining service capacity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum StaffingCost {
    /// `c0 · μ`
    Linear { c0: f64 },
}

impl StaffingCost {
    pub fn linear(c0: f64) -> Result<Self> {
        if !(c0 >= 0.0) {
            return Err(Error::InvalidDemand(format!("staffing cost slope must be >= 0, got {c0}")));
        }
        Ok(StaffingCost::Linear { c0 })
    }

    pub fn value(&self, mu: f64) -> f64 {
        match *self {
            StaffingCost::Linear { c0 } => c0 * mu,
        }
    }

    pub fn d1(&self, _mu: f64) -> f64 {
        match *self {
            StaffingCost::Linear { c0 } => c0,
        }
    }

    pub fn d2(&self, _mu: f64) -> f64 {
        match *self {
            StaffingCost::Linear { .. } => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const BASE: DemandCurve = DemandCurve::Logit { m0: 10.0, a: 4.1, b: 1.0 };

    #[test]
    fn logit_midpoint_and_known_value() {
        let m = DemandModel::new(BASE, 3.5, 7.0).unwrap();
        assert_relative_eq!(m.eval(4.1).unwrap(), 5.0, max_relative = 1e-15);
        // 10 e^{0.31} / (1 + e^{0.31}) computed independently with mpmath at 30 digits
        assert_relative_eq!(m.eval(3.79).unwrap(), 5.768852611320463, max_relative = 1e-12);
    }

    #[test]
    fn linear_values() {
        let m = DemandModel::new(DemandCurve::Linear { a: 5.0, b: 2.0 }, 0.0, 2.4).unwrap();
        assert_eq!(m.eval(2.0).unwrap(), 1.0);
        assert_eq!(m.eval_d1(2.0).unwrap(), -2.0);
        assert_eq!(m.eval_d2(2.0).unwrap(), 0.0);
    }

    #[test]
    fn out_of_range_price_rejected() {
        let m = DemandModel::new(BASE, 3.5, 7.0).unwrap();
        assert!(matches!(m.eval(8.0), Err(Error::PriceOutOfRange { .. })));
        assert!(m.eval_d1(3.0).is_err());
        assert!(m.eval_d2(f64::NAN).is_err());
    }

    #[test]
    fn construction_rejects_nonpositive_rate() {
        assert!(DemandModel::new(DemandCurve::Linear { a: 5.0, b: 2.0 }, 0.0, 3.0).is_err());
        assert!(DemandModel::new(DemandCurve::Quadratic { c: 4.0, a: -1.0 }, 0.5, 1.0).is_err());
    }

    #[test]
    fn scaled_multiplies_rates() {
        let curves = [
            BASE,
            DemandCurve::Linear { a: 5.0, b: 0.5 },
            DemandCurve::Quadratic { c: 10.0, a: 0.3 },
            DemandCurve::Exponential { a: 2.0, b: 0.5 },
        ];
        for c in curves {
            let s = c.scaled(0.95);
            for p in [2.0, 2.5, 3.0] {
                assert_relative_eq!(s.rate(p), 0.95 * c.rate(p), max_relative = 1e-13);
            }
            assert_eq!(s.family(), c.family());
        }
    }

    #[test]
    fn box_projection_and_stability() {
        let b = FeasibleBox::new(6.5, 10.0, 3.5, 7.0).unwrap();
        assert!(b.is_stable_for(&BASE));
        let x = b.project(Policy { mu: 12.0, p: 3.0 });
        assert_eq!(x, Policy { mu: 10.0, p: 3.5 });
        assert!(FeasibleBox::new(7.0, 6.0, 1.0, 2.0).is_err());
        let tight = FeasibleBox::new(6.0, 10.0, 3.5, 7.0).unwrap();
        assert!(tight.require_stable(&BASE).is_err());
    }

    fn curve_strategy() -> impl Strategy<Value = (DemandCurve, f64, f64)> {
        prop_oneof![
            (4.0..6.0f64, 0.1..1.0f64).prop_map(|(a, b)| (DemandCurve::Linear { a, b }, 1.0, 3.0)),
            (8.0..12.0f64, 0.1..0.5f64).prop_map(|(c, a)| (DemandCurve::Quadratic { c, a }, 1.0, 3.0)),
            (1.0..3.0f64, 0.2..0.9f64).prop_map(|(a, b)| (DemandCurve::Exponential { a, b }, 1.0, 3.0)),
            (5.0..15.0f64, 2.0..5.0f64, 0.5..1.5f64)
                .prop_map(|(m0, a, b)| (DemandCurve::Logit { m0, a, b }, 3.5, 7.0)),
        ]
    }

    proptest! {
        #[test]
        fn derivatives_match_central_differences((curve, lo, hi) in curve_strategy(), t in 0.0..1.0f64) {
            let p = lo + (hi - lo) * t;
            let h = 1e-5;
            let fd1 = (curve.rate(p + h) - curve.rate(p - h)) / (2.0 * h);
            let d1 = curve.d1(p);
            prop_assert!((d1 - fd1).abs() <= 1e-6 * (1.0 + d1.abs()), "d1 {} vs {}", d1, fd1);
            let fd2 = (curve.d1(p + h) - curve.d1(p - h)) / (2.0 * h);
            let d2 = curve.d2(p);
            prop_assert!((d2 - fd2).abs() <= 1e-6 * (1.0 + d2.abs()), "d2 {} vs {}", d2, fd2);
        }

        #[test]
        fn rates_non_increasing((curve, lo, hi) in curve_strategy(), t in 0.0..1.0f64, dt in 0.0..0.5f64) {
            let p = lo + (hi - lo) * t * 0.5;
            let q = p + (hi - lo) * dt;
            prop_assert!(curve.rate(q) <= curve.rate(p));
        }
    }
}
