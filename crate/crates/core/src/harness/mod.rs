//! Regret measurement and replication, with the named experiment presets.

mod presets;
mod svg;
mod validate;

pub use presets::{preset, preset_names, Preset};
pub use svg::{regret_svg, trajectory_svg};
pub use validate::{validate_simulator, OracleCheck};

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{solve_optimal, OptimalSolution};
use crate::config::ExperimentConfig;
use crate::demand::StaffingCost;
use crate::error::{Error, Result};
use crate::liquar::{run_liquar, RunResult};
use crate::pto::{run_ppto, PtoParams};
use crate::queue_sim::{CycleTrace, Policy};
use crate::stochastic::replication_seed;

/// Realized cost of a cycle, `h0 ∫_0^T W dt + c(μ) T - p N`.
pub fn cycle_cost(trace: &CycleTrace, h0: f64, cost: &StaffingCost) -> Result<f64> {
    let t = trace.duration();
    let x = trace.policy();
    Ok(h0 * trace.workload_integral(0.0, t)? + cost.value(x.mu) * t - x.p * trace.n_arrivals() as f64)
}

/// A sequence of operating segments, each with its length and realized cost.
pub trait CostLedger {
    fn segments(&self) -> Vec<(f64, f64)>;
}

impl CostLedger for Vec<(f64, f64)> {
    fn segments(&self) -> Vec<(f64, f64)> {
        self.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub f_star: f64,
    /// Cumulative time at the end of each segment.
    pub time: Vec<f64>,
    /// Cumulative `Σ (cost_l - T_l f*)`.
    pub regret: Vec<f64>,
    /// `R(t) / (P* t)` with `P* = -f*`.
    pub relative: Vec<f64>,
    pub segment_costs: Vec<f64>,
}

impl RegretReport {
    pub fn final_regret(&self) -> f64 {
        self.regret.last().copied().unwrap_or(0.0)
    }

    pub fn final_relative(&self) -> f64 {
        self.relative.last().copied().unwrap_or(0.0)
    }

    pub fn final_time(&self) -> f64 {
        self.time.last().copied().unwrap_or(0.0)
    }

    /// Linear interpolation of the cumulative regret, with `R(0) = 0`.
    pub fn regret_at(&self, t: f64) -> f64 {
        interpolate(&self.time, &self.regret, t)
    }
}

fn interpolate(ts: &[f64], ys: &[f64], t: f64) -> f64 {
    if ts.is_empty() {
        return 0.0;
    }
    let i = ts.partition_point(|&s| s < t);
    if i == 0 {
        return ys[0] * (t / ts[0]).clamp(0.0, 1.0);
    }
    if i >= ts.len() {
        return ys[ts.len() - 1];
    }
    let (t0, t1) = (ts[i - 1], ts[i]);
    let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 1.0 };
    ys[i - 1] + w * (ys[i] - ys[i - 1])
}

/// Cumulative regret of a cost ledger against the optimal cost rate `f_star`.
pub fn regret_curve(ledger: &dyn CostLedger, f_star: f64) -> RegretReport {
    let segs = ledger.segments();
    let mut time = Vec::with_capacity(segs.len());
    let mut regret = Vec::with_capacity(segs.len());
    let mut relative = Vec::with_capacity(segs.len());
    let (mut t, mut r) = (0.0, 0.0);
    for &(d, c) in &segs {
        t += d;
        r += c - d * f_star;
        time.push(t);
        regret.push(r);
        relative.push(r / (-f_star * t));
    }
    RegretReport { f_star, time, regret, relative, segment_costs: segs.iter().map(|s| s.1).collect() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    /// Grid points used in the regression.
    pub points: usize,
    /// Grid points dropped because the regret was not positive nearby.
    pub excluded: usize,
}

const FIT_GRID: usize = 200;

/// Least-squares line of `log R` against `log t` over the last `fit_fraction` of log-time.
///
/// The curve is resampled on a log-uniform grid (interpolating linearly in
/// log-log coordinates) so every stretch of log-time carries equal weight.
pub fn loglog_slope(time: &[f64], regret: &[f64], fit_fraction: f64) -> Result<LogLogFit> {
    if time.len() != regret.len() || time.len() < 2 {
        return Err(Error::Fit("log-log fit needs at least two points".into()));
    }
    if !(fit_fraction > 0.0 && fit_fraction <= 1.0) {
        return Err(Error::Fit(format!("fit fraction must lie in (0, 1], got {fit_fraction}")));
    }
    let t_first = time[0];
    let t_hi = time[time.len() - 1];
    if !(t_first > 0.0 && t_hi > t_first) {
        return Err(Error::Fit("time axis must be positive and increasing".into()));
    }
    let (l0, l1) = (t_first.ln(), t_hi.ln());
    let lo = l0 + (1.0 - fit_fraction) * (l1 - l0);
    let mut xs = Vec::with_capacity(FIT_GRID);
    let mut ys = Vec::with_capacity(FIT_GRID);
    let mut excluded = 0;
    for g in 0..FIT_GRID {
        let lt = lo + (l1 - lo) * g as f64 / (FIT_GRID - 1) as f64;
        let t = lt.exp().clamp(t_first, t_hi);
        let i = time.partition_point(|&s| s < t).min(time.len() - 1);
        let value = if time[i] == t || i == 0 {
            (regret[i] > 0.0).then(|| regret[i].ln())
        } else {
            let (ra, rb) = (regret[i - 1], regret[i]);
            (ra > 0.0 && rb > 0.0).then(|| {
                let w = (lt - time[i - 1].ln()) / (time[i].ln() - time[i - 1].ln());
                ra.ln() + w * (rb.ln() - ra.ln())
            })
        };
        match value {
            Some(v) => {
                xs.push(lt);
                ys.push(v);
            }
            None => excluded += 1,
        }
    }
    if xs.len() < 2 {
        return Err(Error::Fit(format!("only {} positive points in the fit range", xs.len())));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(LogLogFit { slope, intercept: my - slope * mx, t_lo: lo.exp(), t_hi, points: xs.len(), excluded })
}

/// One replicated run: its regret curve and, when meaningful, its final decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub seed: u64,
    pub report: RegretReport,
    pub final_policy: Option<Policy>,
    pub trajectory: Vec<Policy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateReport {
    pub name: String,
    pub runs: usize,
    pub seeds: Vec<u64>,
    pub optimum: OptimalSolution,
    pub time: Vec<f64>,
    pub mean_regret: Vec<f64>,
    /// Pointwise 10% quantile.
    pub band_lo: Vec<f64>,
    /// Pointwise 90% quantile.
    pub band_hi: Vec<f64>,
    pub mean_relative: Vec<f64>,
    pub fit: Option<LogLogFit>,
    pub final_regret: Vec<f64>,
    pub final_relative: Vec<f64>,
    pub final_distance: Vec<f64>,
    pub median_final_distance: Option<f64>,
    pub median_final_relative: f64,
    /// Pointwise average of `x̄_k` across runs.
    pub mean_trajectory: Vec<Policy>,
}

/// Type-7 sample quantile of unsorted data.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let i = h.floor() as usize;
    let j = (i + 1).min(v.len() - 1);
    v[i] + (h - i as f64) * (v[j] - v[i])
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Pointwise mean and 10–90% band of the runs' regret on the time grid of the first run.
pub fn aggregate(name: &str, optimum: OptimalSolution, outcomes: &[RunOutcome]) -> ReplicateReport {
    let horizon = outcomes.iter().map(|o| o.report.final_time()).fold(f64::INFINITY, f64::min);
    let time: Vec<f64> = outcomes
        .first()
        .map(|o| o.report.time.iter().copied().filter(|&t| t <= horizon * (1.0 + 1e-12)).collect())
        .unwrap_or_default();
    let n = outcomes.len() as f64;
    let mut mean_regret = Vec::with_capacity(time.len());
    let mut band_lo = Vec::with_capacity(time.len());
    let mut band_hi = Vec::with_capacity(time.len());
    let mut column = vec![0.0; outcomes.len()];
    for &t in &time {
        for (c, o) in column.iter_mut().zip(outcomes) {
            *c = o.report.regret_at(t);
        }
        mean_regret.push(column.iter().sum::<f64>() / n);
        band_lo.push(quantile(&column, 0.1));
        band_hi.push(quantile(&column, 0.9));
    }
    let mean_relative = time.iter().zip(&mean_regret).map(|(t, r)| r / (optimum.profit * t)).collect();
    let fit = loglog_slope(&time, &mean_regret, 0.8).ok();
    let final_distance: Vec<f64> =
        outcomes.iter().filter_map(|o| o.final_policy.map(|x| x.distance(&optimum.policy))).collect();
    let final_relative: Vec<f64> = outcomes.iter().map(|o| o.report.final_relative()).collect();
    let steps = outcomes.iter().map(|o| o.trajectory.len()).min().unwrap_or(0);
    let mean_trajectory = (0..steps)
        .map(|k| {
            let (m, p) = outcomes.iter().fold((0.0, 0.0), |(m, p), o| (m + o.trajectory[k].mu, p + o.trajectory[k].p));
            Policy::new(m / n, p / n)
        })
        .collect();
    ReplicateReport {
        name: name.into(),
        runs: outcomes.len(),
        seeds: outcomes.iter().map(|o| o.seed).collect(),
        optimum,
        time,
        mean_regret,
        band_lo,
        band_hi,
        mean_relative,
        fit,
        final_regret: outcomes.iter().map(|o| o.report.final_regret()).collect(),
        median_final_relative: median(&final_relative),
        final_relative,
        median_final_distance: (!final_distance.is_empty()).then(|| median(&final_distance)),
        final_distance,
        mean_trajectory,
    }
}

/// Runs `run(seed)` for `n_runs` derived seeds on at most `jobs` threads, in seed order.
pub fn replicate_with<F>(n_runs: usize, seed0: u64, jobs: usize, run: F) -> Result<Vec<RunOutcome>>
where
    F: Fn(u64) -> Result<RunOutcome> + Sync,
{
    let seeds: Vec<u64> = (0..n_runs as u64).map(|r| replication_seed(seed0, r)).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Unsupported(format!("thread pool: {e}")))?;
    let results: Vec<Result<RunOutcome>> = pool.install(|| seeds.par_iter().map(|&s| run(s)).collect());
    results
        .into_iter()
        .zip(&seeds)
        .map(|(r, &seed)| r.map_err(|e| Error::Replication { seed, source: Box::new(e) }))
        .collect()
}

pub fn liquar_outcome(run: &RunResult, f_star: f64) -> RunOutcome {
    RunOutcome {
        seed: run.manifest.seed,
        report: regret_curve(run, f_star),
        final_policy: Some(run.final_policy),
        trajectory: run.trajectory(),
    }
}

/// Replicates LiQUAR on `cfg` and aggregates regret against the full-information optimum.
pub fn replicate(cfg: &ExperimentConfig, n_runs: usize, seed0: u64, jobs: usize) -> Result<ReplicateReport> {
    cfg.validate()?;
    let optimum = solve_optimal(&cfg.model.objective(), &cfg.model.bounds)?;
    let outcomes = replicate_with(n_runs, seed0, jobs, |seed| {
        let run = run_liquar(&cfg.model, &cfg.schedule, cfg.initial, cfg.w0, seed)?;
        Ok(liquar_outcome(&run, optimum.f))
    })?;
    Ok(aggregate(&cfg.name, optimum, &outcomes))
}

/// Replicates the predict-then-optimize baseline of `cfg` at exploration ratio `theta`,
/// over the same total time as the LiQUAR schedule.
pub fn replicate_pto(cfg: &ExperimentConfig, theta: f64, n_runs: usize, seed0: u64, jobs: usize) -> Result<ReplicateReport> {
    cfg.validate()?;
    let settings = cfg.pto.as_ref().ok_or_else(|| Error::Config { key: "pto".into(), message: "section missing".into() })?;
    let optimum = solve_optimal(&cfg.model.objective(), &cfg.model.bounds)?;
    let params = PtoParams {
        explore_mu: settings.explore_mu,
        ..PtoParams::new(settings.family, theta, settings.m, cfg.schedule.total_time())
    };
    let outcomes = replicate_with(n_runs, seed0, jobs, |seed| {
        let r = run_ppto(&cfg.model, &params, seed)?;
        Ok(RunOutcome { seed, report: regret_curve(&r, optimum.f), final_policy: Some(r.policy), trajectory: vec![] })
    })?;
    Ok(aggregate(&format!("{} pPTO theta={theta}", cfg.name), optimum, &outcomes))
}

impl ReplicateReport {
    /// Columns `time,mean_regret,band_lo,band_hi`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "time,mean_regret,band_lo,band_hi")?;
        for i in 0..self.time.len() {
            writeln!(out, "{},{},{},{}", self.time[i], self.mean_regret[i], self.band_lo[i], self.band_hi[i])?;
        }
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "name": self.name,
            "runs": self.runs,
            "seeds": self.seeds,
            "optimum": self.optimum,
            "slope": self.fit.map(|f| f.slope),
            "intercept": self.fit.map(|f| f.intercept),
            "fit": self.fit,
            "final_mean_regret": self.mean_regret.last(),
            "final_relative_regret": self.mean_relative.last(),
            "median_final_relative_regret": self.median_final_relative,
            "median_final_distance": self.median_final_distance,
        })
    }
}
