//! The online learning loop: paired perturbed cycles, trimmed performance
//! estimates from the observable workload, a finite-difference gradient and a
//! projected step.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::SystemModel;
use crate::demand::{FeasibleBox, StaffingCost};
use crate::error::{Error, Result};
use crate::harness::{cycle_cost, CostLedger};
use crate::queue_sim::{simulate_cycle, ArrivalProcess, CycleTrace, Policy};
use crate::stochastic::{Purpose, RngStream};

/// Step size, cycle length and perturbation sequences plus the trim fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperSchedule {
    pub c_eta: f64,
    /// Step-size decay exponent.
    pub a: f64,
    pub c_t: f64,
    /// Cycle-length growth exponent.
    pub b: f64,
    pub c_delta: f64,
    /// Perturbation decay exponent.
    pub c: f64,
    pub delta_cap: f64,
    pub alpha: f64,
    pub iterations: usize,
}

impl Default for HyperSchedule {
    fn default() -> Self {
        Self::experiment_defaults()
    }
}

impl HyperSchedule {
    /// `η_k = 4/k`, `T_k = 200 k^{1/3}`, `δ_k = min(0.1, 0.5 k^{-1/3})`, `α = 0.1`, 1000 iterations.
    pub fn experiment_defaults() -> Self {
        Self {
            c_eta: 4.0,
            a: 1.0,
            c_t: 200.0,
            b: 1.0 / 3.0,
            c_delta: 0.5,
            c: 1.0 / 3.0,
            delta_cap: 0.1,
            alpha: 0.1,
            iterations: 1000,
        }
    }

    pub fn eta(&self, k: usize) -> f64 {
        self.c_eta * (k as f64).powf(-self.a)
    }

    pub fn cycle_length(&self, k: usize) -> f64 {
        self.c_t * (k as f64).powf(self.b)
    }

    pub fn delta(&self, k: usize) -> f64 {
        self.delta_cap.min(self.c_delta * (k as f64).powf(-self.c))
    }

    /// `2 Σ_k T_k`.
    pub fn total_time(&self) -> f64 {
        (1..=self.iterations).map(|k| 2.0 * self.cycle_length(k)).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: String| Err(Error::Config { key: format!("schedule.{key}"), message });
        if !(self.c_eta >= 0.0) {
            return bad("c_eta", format!("must be >= 0, got {}", self.c_eta));
        }
        if !(self.c_t > 0.0) {
            return bad("c_t", format!("must be > 0, got {}", self.c_t));
        }
        if !(self.c_delta > 0.0) {
            return bad("c_delta", format!("must be > 0, got {}", self.c_delta));
        }
        if !(self.delta_cap > 0.0) {
            return bad("delta_cap", format!("must be > 0, got {}", self.delta_cap));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return bad("alpha", format!("must lie in (0, 0.5), got {}", self.alpha));
        }
        for (key, v) in [("a", self.a), ("b", self.b), ("c", self.c)] {
            if !v.is_finite() {
                return bad(key, format!("must be finite, got {v}"));
            }
        }
        if self.iterations == 0 {
            return bad("iterations", "must be at least 1".into());
        }
        Ok(())
    }
}

/// `(2, 0)` or `(0, 2)` with equal probability.
pub fn draw_direction(rng: &mut RngStream) -> [f64; 2] {
    if rng.coin() {
        [2.0, 0.0]
    } else {
        [0.0, 2.0]
    }
}

/// Trimmed estimate of the cost rate from one cycle:
/// `-p N/T + h0/((1-2α)T) ∫_{αT}^{(1-α)T} Ŵ dt + c(μ)`.
pub fn estimate_performance(trace: &CycleTrace, alpha: f64, h0: f64, cost: &StaffingCost) -> Result<f64> {
    if !(0.0..0.5).contains(&alpha) {
        return Err(Error::Config { key: "alpha".into(), message: format!("must lie in [0, 0.5), got {alpha}") });
    }
    let t = trace.duration();
    let x = trace.policy();
    let seen = trace.observed_workload_integral(alpha * t, (1.0 - alpha) * t)?;
    Ok(-x.p * trace.n_arrivals() as f64 / t + h0 * seen / ((1.0 - 2.0 * alpha) * t) + cost.value(x.mu))
}

/// `Z (f₊ - f₋) / δ`.
pub fn fd_gradient(fhat_minus: f64, fhat_plus: f64, z: [f64; 2], delta: f64) -> [f64; 2] {
    let d = (fhat_plus - fhat_minus) / delta;
    [z[0] * d, z[1] * d]
}

/// `Π_B(x̄ - η H)`.
pub fn sgd_update(xbar: Policy, h: [f64; 2], eta: f64, bx: &FeasibleBox) -> Policy {
    bx.project(Policy::new(xbar.mu - eta * h[0], xbar.p - eta * h[1]))
}

/// The pair of applied policies around `x̄` and the effective half-difference along `Z`.
///
/// When clamping changes a perturbed policy the half-difference is taken from
/// the applied coordinates, otherwise it is `δ`.
pub fn perturbed_pair(xbar: Policy, z: [f64; 2], delta: f64, bx: &FeasibleBox) -> (Policy, Policy, f64) {
    let raw_minus = Policy::new(xbar.mu - delta * z[0] / 2.0, xbar.p - delta * z[1] / 2.0);
    let raw_plus = Policy::new(xbar.mu + delta * z[0] / 2.0, xbar.p + delta * z[1] / 2.0);
    let minus = bx.project(raw_minus);
    let plus = bx.project(raw_plus);
    let delta_eff = if minus == raw_minus && plus == raw_plus {
        delta
    } else if z[0] != 0.0 {
        (plus.mu - minus.mu) / 2.0
    } else {
        (plus.p - minus.p) / 2.0
    };
    (minus, plus, delta_eff)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub xbar: Policy,
    pub z: [f64; 2],
    pub x_minus: Policy,
    pub x_plus: Policy,
    pub delta: f64,
    pub delta_eff: f64,
    pub fhat_minus: f64,
    pub fhat_plus: f64,
    pub h: [f64; 2],
    /// Set when clamping left no applied difference and `H` was forced to zero.
    pub degenerate: bool,
    pub eta: f64,
    pub w_handoff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleSummary {
    pub k: usize,
    /// Global cycle index `2k - 1` or `2k`.
    pub l: usize,
    pub policy: Policy,
    pub duration: f64,
    pub n_arrivals: usize,
    pub w0: f64,
    pub w_end: f64,
    /// Untrimmed `∫_0^T W dt`.
    pub workload_integral: f64,
    /// `∫_{αT}^{(1-α)T} Ŵ dt`.
    pub observed_integral: f64,
    pub fhat: f64,
    /// Realized cycle cost `h0 ∫W + c(μ)T - pN`.
    pub cost: f64,
}

/// How every random stream of a run is derived from its seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedManifest {
    pub seed: u64,
    pub generator: String,
    pub streams: Vec<String>,
}

impl SeedManifest {
    pub fn for_run(seed: u64) -> Self {
        Self {
            seed,
            generator: "ChaCha8, stream id = (index << 4) | purpose".into(),
            streams: vec![
                "cycle l arrivals: index l, purpose 0".into(),
                "cycle l workloads: index l, purpose 1".into(),
                "iteration k direction: index k, purpose 2".into(),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub records: Vec<IterationRecord>,
    pub cycles: Vec<CycleSummary>,
    pub final_policy: Policy,
    pub manifest: SeedManifest,
}

impl CostLedger for RunResult {
    fn segments(&self) -> Vec<(f64, f64)> {
        self.cycles.iter().map(|c| (c.duration, c.cost)).collect()
    }
}

impl RunResult {
    pub fn write_cycles_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "k,l,mu,p,T_k,N_l,workload_integral,observed_integral,fhat,cost")?;
        for c in &self.cycles {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                c.k, c.l, c.policy.mu, c.policy.p, c.duration, c.n_arrivals, c.workload_integral, c.observed_integral, c.fhat, c.cost
            )?;
        }
        Ok(())
    }

    pub fn write_iterations_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "k,xbar_mu,xbar_p,Z,H_mu,H_p")?;
        for r in &self.records {
            let z = if r.z[0] != 0.0 { "(2,0)" } else { "(0,2)" };
            writeln!(out, "{},{},{},\"{}\",{},{}", r.k, r.xbar.mu, r.xbar.p, z, r.h[0], r.h[1])?;
        }
        Ok(())
    }

    /// `x̄_k` for `k = 1..=L+1` (the last entry is the final policy).
    pub fn trajectory(&self) -> Vec<Policy> {
        self.records.iter().map(|r| r.xbar).chain(std::iter::once(self.final_policy)).collect()
    }
}

fn run_cycle(
    model: &SystemModel,
    x: Policy,
    duration: f64,
    w0: f64,
    l: usize,
    seed: u64,
) -> Result<CycleTrace> {
    let process = ArrivalProcess { kind: model.arrivals, rate: model.demand.rate(x.p) };
    let mut arr = RngStream::for_purpose(seed, l as u64, Purpose::Arrivals);
    let mut svc = RngStream::for_purpose(seed, l as u64, Purpose::Service);
    simulate_cycle(w0, x, duration, &process, &model.service, &mut arr, &mut svc)
}

/// Runs the learning loop for `schedule.iterations` iterations from `init`, with initial workload `w0`.
pub fn run_liquar(model: &SystemModel, schedule: &HyperSchedule, init: Policy, w0: f64, seed: u64) -> Result<RunResult> {
    schedule.validate()?;
    model.validate()?;
    let bx = model.bounds;
    if !bx.contains(init) {
        return Err(Error::Config { key: "initial".into(), message: format!("{init:?} lies outside the feasible box") });
    }
    let mut xbar = init;
    let mut w = w0;
    let mut records = Vec::with_capacity(schedule.iterations);
    let mut cycles = Vec::with_capacity(2 * schedule.iterations);
    for k in 1..=schedule.iterations {
        let mut dir_rng = RngStream::for_purpose(seed, k as u64, Purpose::Direction);
        let z = draw_direction(&mut dir_rng);
        let delta = schedule.delta(k);
        let t_k = schedule.cycle_length(k);
        let (x_minus, x_plus, delta_eff) = perturbed_pair(xbar, z, delta, &bx);
        let mut fhat = [0.0; 2];
        for (i, x) in [x_minus, x_plus].into_iter().enumerate() {
            let l = 2 * k - 1 + i;
            let trace = run_cycle(model, x, t_k, w, l, seed)?;
            let observed = trace.observed_workload_integral(schedule.alpha * t_k, (1.0 - schedule.alpha) * t_k)?;
            fhat[i] = estimate_performance(&trace, schedule.alpha, model.h0, &model.cost)?;
            cycles.push(CycleSummary {
                k,
                l,
                policy: x,
                duration: t_k,
                n_arrivals: trace.n_arrivals(),
                w0: trace.w0(),
                w_end: trace.w_end(),
                workload_integral: trace.workload_integral(0.0, t_k)?,
                observed_integral: observed,
                fhat: fhat[i],
                cost: cycle_cost(&trace, model.h0, &model.cost)?,
            });
            w = trace.w_end();
        }
        let degenerate = delta_eff <= 0.0;
        let h = if degenerate { [0.0, 0.0] } else { fd_gradient(fhat[0], fhat[1], z, delta_eff) };
        let eta = schedule.eta(k);
        records.push(IterationRecord {
            k,
            xbar,
            z,
            x_minus,
            x_plus,
            delta,
            delta_eff,
            fhat_minus: fhat[0],
            fhat_plus: fhat[1],
            h,
            degenerate,
            eta,
            w_handoff: w,
        });
        xbar = sgd_update(xbar, h, eta, &bx);
    }
    Ok(RunResult { records, cycles, final_policy: xbar, manifest: SeedManifest::for_run(seed) })
}
