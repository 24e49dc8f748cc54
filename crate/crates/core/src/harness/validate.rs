use serde::{Deserialize, Serialize};

use crate::analytic::pk_mean_workload;
use crate::error::Result;
use crate::queue_sim::{simulate_cycle, ArrivalProcess, CycleTrace, Policy};
use crate::stochastic::{Purpose, RngStream, UnitDist};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn streams(seed: u64, index: u64) -> (RngStream, RngStream) {
    (RngStream::for_purpose(seed, index, Purpose::Validation), RngStream::for_purpose(seed, index, Purpose::Service))
}

fn conservation_gap(trace: &CycleTrace) -> f64 {
    let lhs = trace.w0() + trace.total_work() - trace.w_end();
    (lhs - trace.policy().mu * trace.busy_time()).abs() / (trace.w0() + trace.total_work()).max(1.0)
}

/// Simulator self-checks: M/M/1 time averages against the PK formula at
/// `ρ ∈ {0.5, 0.7, 0.9}` over `horizon`, plus work conservation, nonnegativity
/// and censoring dominance on a batch of short random traces.
pub fn validate_simulator(seed: u64, horizon: f64) -> Result<Vec<OracleCheck>> {
    let mut checks = Vec::new();
    let mut worst_gap: f64 = 0.0;
    for (i, rho) in [0.5, 0.7, 0.9].into_iter().enumerate() {
        let (mut a, mut s) = streams(seed, i as u64);
        let trace = simulate_cycle(0.0, Policy::new(1.0, 0.0), horizon, &ArrivalProcess::poisson(rho), &UnitDist::Exponential, &mut a, &mut s)?;
        worst_gap = worst_gap.max(conservation_gap(&trace));
        let avg = trace.workload_integral(0.0, horizon)? / horizon;
        let pk = pk_mean_workload(rho, 1.0, 1.0)?;
        let err = (avg - pk).abs() / pk;
        checks.push(OracleCheck {
            name: format!("pk-match rho={rho}"),
            pass: err <= 0.02,
            detail: format!("time-average {avg:.5}, PK {pk:.5}, relative error {:.3}%", 100.0 * err),
        });
    }
    let mut negative = 0;
    let mut dominance = 0;
    for r in 0..200u64 {
        let (mut a, mut s) = streams(seed, 100 + r);
        let mu = 0.5 + (r % 7) as f64 * 0.5;
        let service = [UnitDist::Exponential, UnitDist::Erlang { k: 2 }, UnitDist::Deterministic][r as usize % 3];
        let trace = simulate_cycle((r % 4) as f64, Policy::new(mu, 1.0), 50.0, &ArrivalProcess::poisson(0.9 * mu), &service, &mut a, &mut s)?;
        worst_gap = worst_gap.max(conservation_gap(&trace));
        for b in trace.breakpoints() {
            negative += usize::from(b.w < 0.0);
            dominance += usize::from(trace.observed_workload(b.t) > trace.workload_at(b.t));
        }
    }
    checks.push(OracleCheck {
        name: "work-conservation".into(),
        pass: worst_gap <= 1e-9,
        detail: format!("worst relative gap {worst_gap:.2e} over 203 traces"),
    });
    checks.push(OracleCheck { name: "nonnegativity".into(), pass: negative == 0, detail: format!("{negative} negative breakpoints") });
    checks.push(OracleCheck {
        name: "censoring-dominance".into(),
        pass: dominance == 0,
        detail: format!("{dominance} points with observed above true workload"),
    });
    Ok(checks)
}
