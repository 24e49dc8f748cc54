//! Steady-state objective, its derivatives, and full-information optimizers.
//!
//! The expected long-run cost rate of a policy `x = (μ, p)` is
//! `f(μ, p) = h0 E[W∞] + c(μ) - p λ(p)`, and the profit is `-f`. For Poisson
//! arrivals `E[W∞]` is the Pollaczek–Khinchine mean workload; for renewal
//! arrivals with exponential service it comes from the GI/M/1 root.

mod gim1;
mod optimize;

pub use gim1::{gim1_steady_state, Gim1Solution};
pub use optimize::{
    convexity_report, convexity_report_at, minimize_on_box, projected_gradient, solve_optimal,
    solve_optimal_with, BoxMinimum, ConvexityReport, OptimalSolution, SolverOptions,
};

use serde::{Deserialize, Serialize};

use crate::demand::{DemandCurve, DemandModel, StaffingCost};
use crate::error::{Error, Result};
use crate::queue_sim::Policy;
use crate::stochastic::UnitDist;

fn require_stable(lambda: f64, mu: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda < mu) {
        return Err(Error::Unstable { lambda, mu });
    }
    Ok(())
}

/// Mean stationary M/G/1 workload `ρ/(1-ρ) · (1 + scv)/2` in work units.
pub fn pk_mean_workload(lambda: f64, mu: f64, scv: f64) -> Result<f64> {
    require_stable(lambda, mu)?;
    let rho = lambda / mu;
    Ok(rho / (1.0 - rho) * (1.0 + scv) / 2.0)
}

/// Mixed partial `∂²/∂λ∂μ` of the holding cost `h0 C λ/(μ-λ)`, i.e. `-h0 C (μ+λ)/(μ-λ)³`.
pub fn pk_cross_partial(lambda: f64, mu: f64, h0c: f64) -> Result<f64> {
    require_stable(lambda, mu)?;
    Ok(-h0c * (mu + lambda) / (mu - lambda).powi(3))
}

/// Which stationary workload quantity the holding cost charges under renewal arrivals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HoldingMeasure {
    /// Mean workload found by an arriving customer, `σ/(1-σ)`.
    #[default]
    ArrivingWait,
    /// Time-average workload, `ρ/(1-σ)`.
    TimeAverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum QueueModel {
    /// Poisson arrivals, general service with squared coefficient of variation `scv`.
    Pk { scv: f64 },
    /// Renewal arrivals with unit-mean gap law `interarrival`, exponential service.
    GiM1 {
        interarrival: UnitDist,
        #[serde(default)]
        measure: HoldingMeasure,
    },
}

/// A twice-differentiable function on the decision plane.
///
/// The default derivatives are central finite differences of `value`.
pub trait SmoothObjective: Sync {
    fn value(&self, x: Policy) -> Result<f64>;

    fn grad(&self, x: Policy) -> Result<[f64; 2]> {
        let hm = 1e-6 * x.mu.abs().max(1.0);
        let hp = 1e-6 * x.p.abs().max(1.0);
        let dm = (self.value(Policy::new(x.mu + hm, x.p))? - self.value(Policy::new(x.mu - hm, x.p))?) / (2.0 * hm);
        let dp = (self.value(Policy::new(x.mu, x.p + hp))? - self.value(Policy::new(x.mu, x.p - hp))?) / (2.0 * hp);
        Ok([dm, dp])
    }

    fn hessian(&self, x: Policy) -> Result<[[f64; 2]; 2]> {
        let hm = 1e-4 * x.mu.abs().max(1.0);
        let hp = 1e-4 * x.p.abs().max(1.0);
        let f = |m: f64, p: f64| self.value(Policy::new(x.mu + m, x.p + p));
        let f0 = f(0.0, 0.0)?;
        let mm = (f(hm, 0.0)? - 2.0 * f0 + f(-hm, 0.0)?) / (hm * hm);
        let pp = (f(0.0, hp)? - 2.0 * f0 + f(0.0, -hp)?) / (hp * hp);
        let mp = (f(hm, hp)? - f(hm, -hp)? - f(-hm, hp)? + f(-hm, -hp)?) / (4.0 * hm * hp);
        Ok([[mm, mp], [mp, pp]])
    }
}

/// Full-information cost model: demand, staffing cost, holding cost rate and queue law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub demand: DemandCurve,
    pub cost: StaffingCost,
    pub h0: f64,
    pub queue: QueueModel,
}

impl Objective {
    pub fn pk(demand: DemandCurve, cost: StaffingCost, h0: f64, scv: f64) -> Self {
        Self { demand, cost, h0, queue: QueueModel::Pk { scv } }
    }

    pub fn gim1(demand: DemandCurve, cost: StaffingCost, h0: f64, interarrival: UnitDist, measure: HoldingMeasure) -> Self {
        Self { demand, cost, h0, queue: QueueModel::GiM1 { interarrival, measure } }
    }

    pub fn with_demand(&self, demand: DemandCurve) -> Self {
        Self { demand, ..*self }
    }

    pub fn with_h0(&self, h0: f64) -> Self {
        Self { h0, ..*self }
    }

    pub fn rho(&self, x: Policy) -> f64 {
        self.demand.rate(x.p) / x.mu
    }

    /// Stationary mean workload charged by the holding cost.
    pub fn mean_workload(&self, x: Policy) -> Result<f64> {
        let lam = self.demand.rate(x.p);
        match self.queue {
            QueueModel::Pk { scv } => pk_mean_workload(lam, x.mu, scv),
            QueueModel::GiM1 { interarrival, measure } => {
                let s = gim1_steady_state(&interarrival, lam, x.mu)?;
                Ok(match measure {
                    HoldingMeasure::ArrivingWait => s.arriving_workload,
                    HoldingMeasure::TimeAverage => s.time_average_workload,
                })
            }
        }
    }

    pub fn profit(&self, x: Policy) -> Result<f64> {
        Ok(-self.value(x)?)
    }
}

impl SmoothObjective for Objective {
    fn value(&self, x: Policy) -> Result<f64> {
        let lam = self.demand.rate(x.p);
        Ok(self.h0 * self.mean_workload(x)? + self.cost.value(x.mu) - x.p * lam)
    }

    fn grad(&self, x: Policy) -> Result<[f64; 2]> {
        let QueueModel::Pk { scv } = self.queue else {
            return fd_grad(self, x);
        };
        let (mu, p) = (x.mu, x.p);
        let lam = self.demand.rate(p);
        require_stable(lam, mu)?;
        let d1 = self.demand.d1(p);
        let hc = self.h0 * (1.0 + scv) / 2.0;
        let gap = mu - lam;
        let g_lam = hc * mu / (gap * gap);
        let g_mu = -hc * lam / (gap * gap);
        Ok([g_mu + self.cost.d1(mu), g_lam * d1 - lam - p * d1])
    }

    fn hessian(&self, x: Policy) -> Result<[[f64; 2]; 2]> {
        let QueueModel::Pk { scv } = self.queue else {
            return fd_hessian(self, x);
        };
        let (mu, p) = (x.mu, x.p);
        let lam = self.demand.rate(p);
        require_stable(lam, mu)?;
        let d1 = self.demand.d1(p);
        let d2 = self.demand.d2(p);
        let hc = self.h0 * (1.0 + scv) / 2.0;
        let gap = mu - lam;
        let g3 = gap * gap * gap;
        let g_lam = hc * mu / (gap * gap);
        let g_lamlam = 2.0 * hc * mu / g3;
        let g_mumu = 2.0 * hc * lam / g3;
        let g_lammu = pk_cross_partial(lam, mu, hc)?;
        let mm = g_mumu + self.cost.d2(mu);
        let mp = g_lammu * d1;
        let pp = g_lamlam * d1 * d1 + g_lam * d2 - 2.0 * d1 - p * d2;
        Ok([[mm, mp], [mp, pp]])
    }
}

/// Value-only view of an objective, so the trait's finite-difference defaults apply.
struct Values<'a>(&'a Objective);

impl SmoothObjective for Values<'_> {
    fn value(&self, x: Policy) -> Result<f64> {
        self.0.value(x)
    }
}

fn fd_grad(obj: &Objective, x: Policy) -> Result<[f64; 2]> {
    Values(obj).grad(x)
}

fn fd_hessian(obj: &Objective, x: Policy) -> Result<[[f64; 2]; 2]> {
    Values(obj).hessian(x)
}

/// `½ xᵀ A x - bᵀ x + c` with symmetric `A`; a known-answer objective for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    pub a: [[f64; 2]; 2],
    pub b: [f64; 2],
    pub c: f64,
}

impl SmoothObjective for Quadratic {
    fn value(&self, x: Policy) -> Result<f64> {
        let v = [x.mu, x.p];
        let av = [self.a[0][0] * v[0] + self.a[0][1] * v[1], self.a[1][0] * v[0] + self.a[1][1] * v[1]];
        Ok(0.5 * (v[0] * av[0] + v[1] * av[1]) - self.b[0] * v[0] - self.b[1] * v[1] + self.c)
    }

    fn grad(&self, x: Policy) -> Result<[f64; 2]> {
        Ok([
            self.a[0][0] * x.mu + self.a[0][1] * x.p - self.b[0],
            self.a[1][0] * x.mu + self.a[1][1] * x.p - self.b[1],
        ])
    }

    fn hessian(&self, _x: Policy) -> Result<[[f64; 2]; 2]> {
        Ok(self.a)
    }
}

fn model_objective(demand: &DemandModel, cost: &StaffingCost, h0: f64, scv: f64, x: Policy) -> Result<Objective> {
    demand.eval(x.p)?;
    Ok(Objective::pk(demand.curve, *cost, h0, scv))
}

/// `h0 · E[W] + c(μ) - p λ(p)` under the PK workload, with the price checked against the model's interval.
pub fn objective_f(policy: Policy, demand: &DemandModel, cost: &StaffingCost, h0: f64, scv: f64) -> Result<f64> {
    model_objective(demand, cost, h0, scv, policy)?.value(policy)
}

/// `(∂f/∂μ, ∂f/∂p)` in closed form.
pub fn grad_f(policy: Policy, demand: &DemandModel, cost: &StaffingCost, h0: f64, scv: f64) -> Result<[f64; 2]> {
    model_objective(demand, cost, h0, scv, policy)?.grad(policy)
}

/// Closed-form Hessian, ordered `(μ, p)`.
pub fn hessian_f(policy: Policy, demand: &DemandModel, cost: &StaffingCost, h0: f64, scv: f64) -> Result<[[f64; 2]; 2]> {
    model_objective(demand, cost, h0, scv, policy)?.hessian(policy)
}
