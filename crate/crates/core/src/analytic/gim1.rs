use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stochastic::UnitDist;

/// Stationary quantities of a GI/M/1 queue with exponential unit-mean workloads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gim1Solution {
    /// Root of `σ = Ã(μ(1-σ))` in `[0, 1)`.
    pub sigma: f64,
    /// Mean time an arriving customer waits before service, `σ/(μ(1-σ))`.
    pub mean_wait: f64,
    /// Mean workload seen by an arrival, `σ/(1-σ)` work units.
    pub arriving_workload: f64,
    /// Time-average workload, `ρ/(1-σ)` work units.
    pub time_average_workload: f64,
}

/// Solves the GI/M/1 root equation by bisection.
///
/// `Ã(s) = E[exp(-s U/λ)]` is the Laplace transform of the scaled
/// inter-arrival time. Bisection runs until the bracket cannot shrink
/// further in double precision.
pub fn gim1_steady_state(interarrival: &UnitDist, lambda: f64, mu: f64) -> Result<Gim1Solution> {
    interarrival.validate()?;
    if !(lambda >= 0.0 && lambda < mu) {
        return Err(Error::Unstable { lambda, mu });
    }
    if lambda == 0.0 {
        return Ok(Gim1Solution { sigma: 0.0, mean_wait: 0.0, arriving_workload: 0.0, time_average_workload: 0.0 });
    }
    let g = |s: f64| interarrival.laplace(mu * (1.0 - s) / lambda) - s;
    // g(0) > 0; g < 0 just below 1 because g'(1) = μ/λ - 1 > 0 and g(1) = 0
    let mut lo = 0.0;
    let mut hi = None;
    for j in 1..=60 {
        let h = 1.0 - 0.5f64.powi(j);
        if g(h) < 0.0 {
            hi = Some(h);
            break;
        }
        lo = h;
    }
    let Some(mut hi) = hi else {
        return Err(Error::Unstable { lambda, mu });
    };
    if g(lo) <= 0.0 {
        hi = lo;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let sigma = 0.5 * (lo + hi);
    let rho = lambda / mu;
    Ok(Gim1Solution {
        sigma,
        mean_wait: sigma / (mu * (1.0 - sigma)),
        arriving_workload: sigma / (1.0 - sigma),
        time_average_workload: rho / (1.0 - sigma),
    })
}
