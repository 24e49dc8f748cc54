//! Grid verification of the two sufficient inequalities on `λ'` that make the
//! PK objective convex on the feasible box.
//!
//! With `C = (1 + scv)/2` and `g(μ) = μ/(μ-λ) - p(μ-λ)/(h0 C)`:
//!
//! * slope bound: `-λ' > max( sqrt(max(0, -λ''(μ̄-λ)) / 2), p λ''/2 )`
//! * Hessian bound: `λ' > max_μ ( 2 g(μ) λ'' λ / λ' - 4 λ (μ-λ)/(h0 C) )`
//!
//! Slack is left side minus right side; the check holds when both minimum
//! slacks over the grid are strictly positive.

use serde::{Deserialize, Serialize};

use super::{DemandCurve, FeasibleBox};
use crate::queue_sim::Policy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub holds: bool,
    /// `λ(p_lo) < mu_lo`.
    pub stable: bool,
    pub slope_min_slack: f64,
    pub slope_worst_price: f64,
    pub hessian_min_slack: f64,
    pub hessian_worst_point: Policy,
    pub grid: usize,
}

impl AssumptionReport {
    pub fn min_slack(&self) -> f64 {
        self.slope_min_slack.min(self.hessian_min_slack)
    }
}

fn slope_slack(curve: &DemandCurve, mu_hi: f64, p: f64) -> f64 {
    let lam = curve.rate(p);
    let d1 = curve.d1(p);
    let d2 = curve.d2(p);
    let root = (0.0f64.max(-d2 * (mu_hi - lam)) / 2.0).sqrt();
    -d1 - root.max(p * d2 / 2.0)
}

fn hessian_slack(curve: &DemandCurve, h0c: f64, mu: f64, p: f64) -> f64 {
    let lam = curve.rate(p);
    let d1 = curve.d1(p);
    let d2 = curve.d2(p);
    if d1 == 0.0 {
        return f64::NEG_INFINITY;
    }
    let gap = mu - lam;
    let g = mu / gap - p * gap / h0c;
    d1 - (2.0 * g * d2 * lam / d1 - 4.0 * lam * gap / h0c)
}

/// Evaluates both inequalities on a `grid × grid` lattice over the box.
pub fn check_assumption1a(
    curve: &DemandCurve,
    bx: &FeasibleBox,
    h0: f64,
    scv: f64,
    grid: usize,
) -> AssumptionReport {
    let n = grid.max(2);
    let h0c = h0 * (1.0 + scv) / 2.0;
    let at = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (n - 1) as f64;

    let mut slope_min = f64::INFINITY;
    let mut slope_worst = bx.p_lo;
    let mut hess_min = f64::INFINITY;
    let mut hess_worst = Policy { mu: bx.mu_lo, p: bx.p_lo };
    for i in 0..n {
        let p = at(bx.p_lo, bx.p_hi, i);
        let s = slope_slack(curve, bx.mu_hi, p);
        if s < slope_min {
            slope_min = s;
            slope_worst = p;
        }
        for j in 0..n {
            let mu = at(bx.mu_lo, bx.mu_hi, j);
            let h = hessian_slack(curve, h0c, mu, p);
            if h < hess_min {
                hess_min = h;
                hess_worst = Policy { mu, p };
            }
        }
    }
    let stable = bx.is_stable_for(curve);
    AssumptionReport {
        holds: stable && slope_min > 0.0 && hess_min > 0.0,
        stable,
        slope_min_slack: slope_min,
        slope_worst_price: slope_worst,
        hessian_min_slack: hess_min,
        hessian_worst_point: hess_worst,
        grid: n,
    }
}
