//! Parametric predict-then-optimize baseline and the demand-misspecification study.
//!
//! The baseline explores `m` evenly spaced prices for a fraction `θ` of the
//! horizon, fits a demand family to the observed arrival rates, and then
//! operates at the steady-state optimum of the fitted model for the rest of
//! the horizon. The workload carries over between all phases.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::analytic::{minimize_on_box, Objective, SmoothObjective, SolverOptions};
use crate::config::SystemModel;
use crate::demand::{fit_least_squares, DemandCurve, DemandFamily, FeasibleBox, FitResult};
use crate::error::{Error, Result};
use crate::harness::{cycle_cost, CostLedger};
use crate::queue_sim::{simulate_cycle, ArrivalProcess, Policy};
use crate::stochastic::{Purpose, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PtoParams {
    pub family: DemandFamily,
    /// Exploration ratio `θ ∈ (0, 1)`.
    pub theta: f64,
    /// Number of exploration prices.
    pub m: usize,
    pub total_time: f64,
    /// Capacity while exploring; the box midpoint when `None`.
    pub explore_mu: Option<f64>,
    /// Replace observed rates with the true `λ(p_j)`.
    pub noise_free: bool,
    /// The optimization phase is recorded in this many equal segments.
    pub opt_segments: usize,
}

impl PtoParams {
    pub fn new(family: DemandFamily, theta: f64, m: usize, total_time: f64) -> Self {
        Self { family, theta, m, total_time, explore_mu: None, noise_free: false, opt_segments: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Prediction,
    Optimization,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PtoSegment {
    pub phase: Phase,
    pub t_start: f64,
    pub t_end: f64,
    pub mu: f64,
    pub p: f64,
    pub n_arrivals: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PtoResult {
    pub params: PtoParams,
    pub seed: u64,
    pub prices: Vec<f64>,
    pub counts: Vec<usize>,
    pub rates: Vec<f64>,
    pub fit: FitResult,
    /// Optimum of the fitted model.
    pub policy: Policy,
    pub fitted_value: f64,
    pub segments: Vec<PtoSegment>,
}

impl CostLedger for PtoResult {
    fn segments(&self) -> Vec<(f64, f64)> {
        self.segments.iter().map(|s| (s.t_end - s.t_start, s.cost)).collect()
    }
}

impl PtoResult {
    pub fn phase_cost(&self, phase: Phase) -> f64 {
        self.segments.iter().filter(|s| s.phase == phase).map(|s| s.cost).sum()
    }

    pub fn total_cost(&self) -> f64 {
        self.segments.iter().map(|s| s.cost).sum()
    }

    pub fn prediction_time(&self) -> f64 {
        self.segments.iter().filter(|s| s.phase == Phase::Prediction).map(|s| s.t_end - s.t_start).sum()
    }

    /// Columns `phase,t_start,t_end,mu,p,cost`.
    pub fn write_ledger_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "phase,t_start,t_end,mu,p,cost")?;
        for s in &self.segments {
            let phase = match s.phase {
                Phase::Prediction => "prediction",
                Phase::Optimization => "optimization",
            };
            writeln!(out, "{phase},{},{},{},{},{}", s.t_start, s.t_end, s.mu, s.p, s.cost)?;
        }
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "theta": self.params.theta,
            "m": self.params.m,
            "family": self.params.family,
            "seed": self.seed,
            "fitted": self.fit.curve,
            "fit_residual": self.fit.residual,
            "fit_converged": self.fit.converged,
            "policy": self.policy,
            "fitted_value": self.fitted_value,
            "prediction_cost": self.phase_cost(Phase::Prediction),
            "optimization_cost": self.phase_cost(Phase::Optimization),
            "total_cost": self.total_cost(),
        })
    }
}

/// Evenly spaced prices over `[lo, hi]`, endpoints included.
pub fn exploration_prices(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    match m {
        0 => vec![],
        1 => vec![0.5 * (lo + hi)],
        _ => (0..m).map(|j| lo + (hi - lo) * j as f64 / (m - 1) as f64).collect(),
    }
}

/// Optimum of `obj` on `bx`, treating unstable policies as infeasible rather than rejecting the box.
fn fitted_optimum(obj: &Objective, bx: &FeasibleBox) -> Result<(Policy, f64)> {
    let m = minimize_on_box(obj, bx, &SolverOptions::default());
    if !m.value.is_finite() {
        return Err(Error::Fit(format!("fitted model {:?} has no stable policy in the box", obj.demand)));
    }
    Ok((m.x, m.value))
}

pub fn run_ppto(model: &SystemModel, params: &PtoParams, seed: u64) -> Result<PtoResult> {
    model.validate()?;
    if !(params.theta > 0.0 && params.theta < 1.0) {
        return Err(Error::Config { key: "pto.theta".into(), message: format!("must lie in (0, 1), got {}", params.theta) });
    }
    if params.m < params.family.n_params() {
        return Err(Error::Config {
            key: "pto.m".into(),
            message: format!("{:?} needs at least {} prices", params.family, params.family.n_params()),
        });
    }
    if !(params.total_time > 0.0) {
        return Err(Error::Config { key: "pto.total_time".into(), message: "must be positive".into() });
    }
    let bx = model.bounds;
    let mu_explore = params.explore_mu.unwrap_or_else(|| bx.midpoint().mu);
    let prices = exploration_prices(bx.p_lo, bx.p_hi, params.m);
    let tau = params.theta * params.total_time / params.m as f64;
    let mut segments = Vec::with_capacity(params.m + params.opt_segments);
    let mut counts = Vec::with_capacity(params.m);
    let mut w = 0.0;
    let mut t = 0.0;
    let mut index = 1u64;
    let mut run = |x: Policy, duration: f64, w: &mut f64, t: &mut f64, phase: Phase| -> Result<usize> {
        let process = ArrivalProcess { kind: model.arrivals, rate: model.demand.rate(x.p) };
        let mut arr = RngStream::for_purpose(seed, index, Purpose::Arrivals);
        let mut svc = RngStream::for_purpose(seed, index, Purpose::Service);
        index += 1;
        let trace = simulate_cycle(*w, x, duration, &process, &model.service, &mut arr, &mut svc)?;
        let cost = cycle_cost(&trace, model.h0, &model.cost)?;
        segments.push(PtoSegment {
            phase,
            t_start: *t,
            t_end: *t + duration,
            mu: x.mu,
            p: x.p,
            n_arrivals: trace.n_arrivals(),
            cost,
        });
        *w = trace.w_end();
        *t += duration;
        Ok(trace.n_arrivals())
    };
    for &p in &prices {
        counts.push(run(Policy::new(mu_explore, p), tau, &mut w, &mut t, Phase::Prediction)?);
    }
    let rates: Vec<f64> = if params.noise_free {
        prices.iter().map(|&p| model.demand.rate(p)).collect()
    } else {
        counts.iter().map(|&n| n as f64 / tau).collect()
    };
    let samples: Vec<(f64, f64)> = prices.iter().copied().zip(rates.iter().copied()).collect();
    let fit = fit_least_squares(params.family, &samples, None)
        .map_err(|e| Error::Fit(format!("theta={} seed={seed} rates={rates:?}: {e}", params.theta)))?;
    let fitted = model.objective().with_demand(fit.curve);
    let (policy, fitted_value) = fitted_optimum(&fitted, &bx)?;
    let rest = params.total_time - t;
    let n_seg = params.opt_segments.max(1);
    for _ in 0..n_seg {
        run(policy, rest / n_seg as f64, &mut w, &mut t, Phase::Optimization)?;
    }
    Ok(PtoResult { params: *params, seed, prices, counts, rates, fit, policy, fitted_value, segments })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub h0: f64,
    pub rho_star: f64,
    pub x_star: Policy,
    /// Optimum under the deflated demand `(1 - ε) λ`.
    pub x_hat: Policy,
    pub profit_star: f64,
    /// True profit at `x_hat`; `-∞` when `x_hat` is unstable under the true demand.
    pub profit_hat: f64,
    pub relative_loss: f64,
    /// `|Ŵ - W| / W` of the mean workload at `x_hat`, predicted versus true.
    pub workload_error: f64,
    pub stable: bool,
}

/// Profit loss from optimizing against demand deflated by `epsilon`, for each holding cost.
///
/// Optima are searched on `search` with unstable policies treated as infeasible.
pub fn sensitivity_misspecification(obj: &Objective, search: &FeasibleBox, epsilon: f64, h0_list: &[f64]) -> Result<Vec<SensitivityRow>> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::Config { key: "epsilon".into(), message: format!("must lie in [0, 1), got {epsilon}") });
    }
    let deflated: DemandCurve = obj.demand.scaled(1.0 - epsilon);
    h0_list
        .iter()
        .map(|&h0| {
            let truth = obj.with_h0(h0);
            let wrong = truth.with_demand(deflated);
            let (x_star, f_star) = fitted_optimum(&truth, search)?;
            let (x_hat, _) = fitted_optimum(&wrong, search)?;
            let stable = truth.demand.rate(x_hat.p) < x_hat.mu;
            let (profit_hat, workload_error) = if stable {
                let w_true = truth.mean_workload(x_hat)?;
                let w_pred = wrong.mean_workload(x_hat)?;
                (-truth.value(x_hat)?, (w_pred - w_true).abs() / w_true)
            } else {
                (f64::NEG_INFINITY, f64::INFINITY)
            };
            let profit_star = -f_star;
            Ok(SensitivityRow {
                h0,
                rho_star: truth.rho(x_star),
                x_star,
                x_hat,
                profit_star,
                profit_hat,
                relative_loss: (profit_star - profit_hat) / profit_star,
                workload_error,
                stable,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::HoldingMeasure;
    use crate::demand::StaffingCost;
    use crate::queue_sim::ArrivalKind;
    use crate::stochastic::UnitDist;

    const BASE: DemandCurve = DemandCurve::Logit { m0: 10.0, a: 4.1, b: 1.0 };

    fn model(h0: f64) -> SystemModel {
        SystemModel {
            demand: BASE,
            cost: StaffingCost::Linear { c0: 1.0 },
            h0,
            service: UnitDist::Exponential,
            arrivals: ArrivalKind::Poisson,
            bounds: FeasibleBox::new(6.23, 10.0, 3.6, 7.0).unwrap(),
            holding_measure: HoldingMeasure::ArrivingWait,
        }
    }

    #[test]
    fn uniform_inclusive_grid() {
        assert_eq!(exploration_prices(3.6, 7.0, 3), vec![3.6, 5.3, 7.0]);
        assert_eq!(exploration_prices(1.0, 2.0, 1), vec![1.5]);
    }

    #[test]
    fn noise_free_recovers_true_optimum() {
        let m = model(1.0);
        let mut params = PtoParams::new(DemandFamily::Logit, 0.15, 4, 2000.0);
        params.noise_free = true;
        params.opt_segments = 5;
        let r = run_ppto(&m, &params, 3).unwrap();
        let truth = minimize_on_box(&m.objective(), &m.bounds, &SolverOptions::default());
        assert!(r.policy.distance(&truth.x) < 1e-6, "{:?} vs {:?}", r.policy, truth.x);
        assert_eq!(r.segments.len(), 9);
    }

    #[test]
    fn ledger_identity_and_timing() {
        let m = model(1.0);
        let params = PtoParams { opt_segments: 7, ..PtoParams::new(DemandFamily::Logit, 0.15, 3, 3000.0) };
        let r = run_ppto(&m, &params, 11).unwrap();
        let total = r.phase_cost(Phase::Prediction) + r.phase_cost(Phase::Optimization);
        assert_eq!(total, r.total_cost());
        assert!((r.prediction_time() - 450.0).abs() < 1e-9);
        let end = r.segments.last().unwrap().t_end;
        assert!((end - 3000.0).abs() < 1e-9);
        for w in r.segments.windows(2) {
            assert_eq!(w[0].t_end, w[1].t_start);
        }
        let mut buf = Vec::new();
        r.write_ledger_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 3 + 7);
    }

    #[test]
    fn rejects_bad_parameters() {
        let m = model(1.0);
        assert!(run_ppto(&m, &PtoParams::new(DemandFamily::Logit, 0.0, 3, 100.0), 1).is_err());
        assert!(run_ppto(&m, &PtoParams::new(DemandFamily::Logit, 0.1, 2, 100.0), 1).is_err());
    }

    #[test]
    fn no_misspecification_no_loss() {
        let obj = model(1.0).objective();
        let search = FeasibleBox::new(2.0, 15.0, 2.0, 8.0).unwrap();
        for row in sensitivity_misspecification(&obj, &search, 0.0, &[1.0, 0.1]).unwrap() {
            assert!(row.relative_loss.abs() < 1e-10, "{row:?}");
        }
    }

    #[test]
    fn light_traffic_loss_is_small() {
        let obj = model(1.0).objective();
        let search = FeasibleBox::new(2.0, 15.0, 2.0, 8.0).unwrap();
        let row = sensitivity_misspecification(&obj, &search, 0.05, &[1.0]).unwrap()[0];
        assert!(row.stable);
        assert!(row.relative_loss > 0.0 && row.relative_loss < 0.02, "{row:?}");
        assert!((row.relative_loss - 0.00527).abs() < 2e-4, "{row:?}");
    }
}
