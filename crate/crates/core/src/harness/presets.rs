use serde::{Deserialize, Serialize};

use crate::analytic::HoldingMeasure;
use crate::config::{ExperimentConfig, OutputOptions, PtoSettings, SystemModel};
use crate::demand::{DemandCurve, DemandFamily, FeasibleBox, StaffingCost};
use crate::error::{Error, Result};
use crate::liquar::HyperSchedule;
use crate::queue_sim::{ArrivalKind, Policy};
use crate::stochastic::UnitDist;

/// A named experiment: one or more configurations and a default replication count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub description: String,
    pub configs: Vec<ExperimentConfig>,
}

const NAMES: &[&str] = &[
    "base-6.1",
    "base-6.1-desk",
    "step-sweep-6.2.1",
    "step-sweep-6.2.1-desk",
    "cycle-sweep-6.2.2",
    "cycle-sweep-6.2.2-desk",
    "pto-6.3-light",
    "pto-6.3-light-desk",
    "pto-6.3-heavy",
    "pto-6.3-heavy-desk",
    "e2m1-6.4",
    "e2m1-6.4-desk",
    "robustness-C",
    "robustness-C-desk",
];

pub fn preset_names() -> &'static [&'static str] {
    NAMES
}

const BASE_DEMAND: DemandCurve = DemandCurve::Logit { m0: 10.0, a: 4.1, b: 1.0 };
const THETAS: [f64; 5] = [0.003, 0.009, 0.015, 0.06, 0.15];

fn wide_box() -> FeasibleBox {
    FeasibleBox { mu_lo: 6.5, mu_hi: 10.0, p_lo: 3.5, p_hi: 7.0 }
}

/// Low enough in capacity for the heavy-traffic optimum, still uniformly stable.
fn heavy_box() -> FeasibleBox {
    FeasibleBox { mu_lo: 6.23, mu_hi: 10.0, p_lo: 3.6, p_hi: 7.0 }
}

fn model(h0: f64, service: UnitDist, arrivals: ArrivalKind, bounds: FeasibleBox) -> SystemModel {
    SystemModel {
        demand: BASE_DEMAND,
        cost: StaffingCost::Linear { c0: 1.0 },
        h0,
        service,
        arrivals,
        bounds,
        holding_measure: HoldingMeasure::ArrivingWait,
    }
}

fn config(name: String, model: SystemModel, schedule: HyperSchedule, initial: Policy, replications: usize) -> ExperimentConfig {
    ExperimentConfig { name, model, schedule, initial, w0: 0.0, replications, pto: None, output: OutputOptions::default() }
}

fn full_schedule() -> HyperSchedule {
    HyperSchedule::experiment_defaults()
}

fn desk_schedule() -> HyperSchedule {
    HyperSchedule { c_t: 50.0, iterations: 300, ..HyperSchedule::experiment_defaults() }
}

fn base(desk: bool) -> Vec<ExperimentConfig> {
    let (s, reps, name) = if desk { (desk_schedule(), 10, "base-6.1-desk") } else { (full_schedule(), 100, "base-6.1") };
    let m = model(1.0, UnitDist::Exponential, ArrivalKind::Poisson, wide_box());
    vec![config(name.into(), m, s, Policy::new(10.0, 5.0), reps)]
}

fn step_sweep(desk: bool) -> Vec<ExperimentConfig> {
    let (s, reps) = if desk { (desk_schedule(), 10) } else { (full_schedule(), 100) };
    [0.6, 1.0, 1.2]
        .into_iter()
        .map(|c| {
            let sched = HyperSchedule { c_eta: 4.0 * c, c_delta: 0.5 * c, ..s };
            let m = model(1.0, UnitDist::Exponential, ArrivalKind::Poisson, wide_box());
            config(format!("step-sweep c={c}"), m, sched, Policy::new(10.0, 5.0), reps)
        })
        .collect()
}

/// `L_T = ⌈L_ref (T_ref / T)^{3/4}⌉`, keeping total time comparable across cycle-length constants.
pub(crate) fn sweep_iterations(l_ref: usize, t_ref: f64, t: f64) -> usize {
    (l_ref as f64 * (t_ref / t).powf(0.75)).ceil() as usize
}

fn cycle_sweep(desk: bool) -> Vec<ExperimentConfig> {
    let (cts, t_ref, l_ref, reps): (&[f64], f64, usize, usize) =
        if desk { (&[10.0, 50.0, 90.0], 50.0, 300, 10) } else { (&[40.0, 200.0, 360.0], 200.0, 1000, 100) };
    cts.iter()
        .map(|&ct| {
            let sched = HyperSchedule { c_t: ct, iterations: sweep_iterations(l_ref, t_ref, ct), ..full_schedule() };
            let m = model(1.0, UnitDist::Exponential, ArrivalKind::Poisson, wide_box());
            config(format!("cycle-sweep T={ct}"), m, sched, Policy::new(10.0, 5.0), reps)
        })
        .collect()
}

fn pto(h0: f64, desk: bool) -> Vec<ExperimentConfig> {
    let (s, reps) = if desk { (desk_schedule(), 10) } else { (full_schedule(), 1000) };
    let label = if h0 >= 0.5 { "light" } else { "heavy" };
    let mut c = config(
        format!("pto-6.3-{label}{}", if desk { "-desk" } else { "" }),
        model(h0, UnitDist::Exponential, ArrivalKind::Poisson, heavy_box()),
        s,
        Policy::new(10.0, 7.0),
        reps,
    );
    c.pto = Some(PtoSettings { family: DemandFamily::Logit, thetas: THETAS.to_vec(), m: 3, explore_mu: None });
    vec![c]
}

fn e2m1(desk: bool) -> Vec<ExperimentConfig> {
    let (s, reps, name) = if desk { (desk_schedule(), 10, "e2m1-6.4-desk") } else { (full_schedule(), 100, "e2m1-6.4") };
    let arrivals = ArrivalKind::Renewal { interarrival: UnitDist::Erlang { k: 2 } };
    let m = model(1.0, UnitDist::Exponential, arrivals, wide_box());
    vec![config(name.into(), m, s, Policy::new(10.0, 5.0), reps)]
}

fn robustness(desk: bool) -> Result<Vec<ExperimentConfig>> {
    let (s, reps) = if desk { (desk_schedule(), 10) } else { (full_schedule(), 100) };
    let services = [(0.5, UnitDist::Erlang { k: 2 }), (1.0, UnitDist::Exponential), (5.0, UnitDist::hyperexp_from_scv(5.0)?)];
    let mut out = Vec::with_capacity(9);
    for h0 in [0.001, 0.02, 1.0] {
        for (scv, service) in services {
            let m = model(h0, service, ArrivalKind::Poisson, heavy_box());
            out.push(config(format!("robustness h0={h0} scv={scv}"), m, s, Policy::new(10.0, 5.0), reps));
        }
    }
    Ok(out)
}

/// Looks up a named experiment.
pub fn preset(name: &str) -> Result<Preset> {
    let (description, configs) = match name {
        "base-6.1" => ("base logit example on the non-convex box", base(false)),
        "base-6.1-desk" => ("base logit example, shortened cycles and horizon", base(true)),
        "step-sweep-6.2.1" => ("step and perturbation scale c in {0.6, 1, 1.2}", step_sweep(false)),
        "step-sweep-6.2.1-desk" => ("step-scale sweep at desk scale", step_sweep(true)),
        "cycle-sweep-6.2.2" => ("cycle-length constant in {40, 200, 360}", cycle_sweep(false)),
        "cycle-sweep-6.2.2-desk" => ("cycle-length sweep at desk scale", cycle_sweep(true)),
        "pto-6.3-light" => ("LiQUAR against predict-then-optimize, h0 = 1", pto(1.0, false)),
        "pto-6.3-light-desk" => ("light-traffic comparison at desk scale", pto(1.0, true)),
        "pto-6.3-heavy" => ("LiQUAR against predict-then-optimize, h0 = 0.001", pto(0.001, false)),
        "pto-6.3-heavy-desk" => ("heavy-traffic comparison at desk scale", pto(0.001, true)),
        "e2m1-6.4" => ("Erlang-2 renewal arrivals, exponential service", e2m1(false)),
        "e2m1-6.4-desk" => ("Erlang-2 arrivals at desk scale", e2m1(true)),
        "robustness-C" => ("h0 in {0.001, 0.02, 1} by service SCV in {0.5, 1, 5}", robustness(false)?),
        "robustness-C-desk" => ("robustness grid at desk scale", robustness(true)?),
        _ => {
            return Err(Error::UnknownPreset { name: name.into(), available: NAMES.join(", ") });
        }
    };
    Ok(Preset { name: name.into(), description: description.into(), configs })
}
