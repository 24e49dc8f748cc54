//! Experiment configuration, stored as TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analytic::{HoldingMeasure, Objective};
use crate::demand::{DemandCurve, DemandFamily, DemandModel, FeasibleBox, StaffingCost};
use crate::error::{Error, Result};
use crate::liquar::HyperSchedule;
use crate::queue_sim::{ArrivalKind, Policy};
use crate::stochastic::UnitDist;

fn config_err(key: &str, message: impl std::fmt::Display) -> Error {
    Error::Config { key: key.into(), message: message.to_string() }
}

/// The physical system: demand, costs, stochastic primitives and decision box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemModel {
    pub demand: DemandCurve,
    pub cost: StaffingCost,
    pub h0: f64,
    pub service: UnitDist,
    pub arrivals: ArrivalKind,
    #[serde(rename = "box")]
    pub bounds: FeasibleBox,
    /// Holding-cost convention for renewal arrivals.
    #[serde(default)]
    pub holding_measure: HoldingMeasure,
}

impl SystemModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.h0 > 0.0) {
            return Err(config_err("model.h0", format!("must be > 0, got {}", self.h0)));
        }
        self.service.validate().map_err(|e| config_err("model.service", e))?;
        if let ArrivalKind::Renewal { interarrival } = self.arrivals {
            interarrival.validate().map_err(|e| config_err("model.arrivals.interarrival", e))?;
            if self.service != UnitDist::Exponential {
                return Err(config_err("model.service", "renewal arrivals are supported with exponential service only"));
            }
        }
        let StaffingCost::Linear { c0 } = self.cost;
        if !(c0 >= 0.0) {
            return Err(config_err("model.cost.c0", format!("must be >= 0, got {c0}")));
        }
        self.bounds.validate().map_err(|e| config_err("model.box", e))?;
        self.bounds.require_stable(&self.demand).map_err(|e| config_err("model.box", e))?;
        DemandModel::new(self.demand, self.bounds.p_lo, self.bounds.p_hi).map_err(|e| config_err("model.demand", e))?;
        Ok(())
    }

    /// Steady-state cost model matching the configured arrival and service laws.
    pub fn objective(&self) -> Objective {
        match self.arrivals {
            ArrivalKind::Poisson => Objective::pk(self.demand, self.cost, self.h0, self.service.scv()),
            ArrivalKind::Renewal { interarrival } => {
                Objective::gim1(self.demand, self.cost, self.h0, interarrival, self.holding_measure)
            }
        }
    }

    pub fn with_demand(&self, demand: DemandCurve) -> Self {
        Self { demand, ..*self }
    }

    pub fn with_h0(&self, h0: f64) -> Self {
        Self { h0, ..*self }
    }
}

/// Settings of the predict-then-optimize baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PtoSettings {
    pub family: DemandFamily,
    /// Exploration ratios to compare.
    pub thetas: Vec<f64>,
    /// Number of exploration prices.
    pub m: usize,
    /// Capacity used while exploring; the box midpoint when absent.
    #[serde(default)]
    pub explore_mu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputOptions {
    #[serde(default)]
    pub dir: Option<String>,
    #[serde(default)]
    pub svg: bool,
}

fn default_replications() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub model: SystemModel,
    pub schedule: HyperSchedule,
    pub initial: Policy,
    #[serde(default)]
    pub w0: f64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub pto: Option<PtoSettings>,
    #[serde(default)]
    pub output: OutputOptions,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.schedule.validate()?;
        if !self.model.bounds.contains(self.initial) {
            return Err(config_err("initial", format!("{:?} lies outside the feasible box", self.initial)));
        }
        if !(self.w0 >= 0.0) {
            return Err(config_err("w0", format!("must be >= 0, got {}", self.w0)));
        }
        if self.replications == 0 {
            return Err(config_err("replications", "must be at least 1"));
        }
        if let Some(pto) = &self.pto {
            if pto.thetas.is_empty() || pto.thetas.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
                return Err(config_err("pto.thetas", "need at least one ratio, each in (0, 1)"));
            }
            if pto.m < pto.family.n_params() {
                return Err(config_err("pto.m", format!("{:?} needs m >= {}", pto.family, pto.family.n_params())));
            }
            if let Some(mu) = pto.explore_mu {
                if !(mu >= self.model.bounds.mu_lo && mu <= self.model.bounds.mu_hi) {
                    return Err(config_err("pto.explore_mu", format!("{mu} outside the capacity range")));
                }
            }
        }
        Ok(())
    }

    /// Parses and validates a TOML document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let key = e.span().map(|s| locate_key(text, s.start)).unwrap_or_else(|| "<document>".into());
            config_err(&key, e.message())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err("<document>", e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        Self::from_toml_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }
}

/// Best-effort dotted key path (`table.key`) for an error at byte `offset`.
fn locate_key(text: &str, offset: usize) -> String {
    let mut table = String::new();
    let mut key = String::new();
    let mut pos = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if trimmed.starts_with('[') {
            table = trimmed.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            key.clear();
        } else if let Some((k, _)) = trimmed.split_once('=') {
            key = k.trim().to_string();
        }
        pos += line.len();
        if pos > offset {
            break;
        }
    }
    match (table.is_empty(), key.is_empty()) {
        (true, true) => "<document>".into(),
        (true, false) => key,
        (false, true) => table,
        (false, false) => format!("{table}.{key}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn base_config() -> ExperimentConfig {
        ExperimentConfig {
            name: "test".into(),
            model: SystemModel {
                demand: DemandCurve::Logit { m0: 10.0, a: 4.1, b: 1.0 },
                cost: StaffingCost::Linear { c0: 1.0 },
                h0: 1.0,
                service: UnitDist::Exponential,
                arrivals: ArrivalKind::Poisson,
                bounds: FeasibleBox::new(6.5, 10.0, 3.5, 7.0).unwrap(),
                holding_measure: HoldingMeasure::ArrivingWait,
            },
            schedule: HyperSchedule::experiment_defaults(),
            initial: Policy::new(10.0, 5.0),
            w0: 0.0,
            replications: 10,
            pto: Some(PtoSettings { family: DemandFamily::Logit, thetas: vec![0.003, 0.15], m: 3, explore_mu: None }),
            output: OutputOptions::default(),
        }
    }

    #[test]
    fn round_trip() {
        let cfg = base_config();
        let text = cfg.to_toml_string().unwrap();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml_string().unwrap(), text);
    }

    #[test]
    fn errors_name_keys() {
        let cfg = base_config();
        let text = cfg.to_toml_string().unwrap();
        let broken = text.replace("alpha = 0.1", "alpha = 0.7");
        match ExperimentConfig::from_toml_str(&broken) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "schedule.alpha"),
            other => panic!("{other:?}"),
        }
        let typo = text.replace("c_eta = 4.0", "c_etta = 4.0");
        match ExperimentConfig::from_toml_str(&typo) {
            Err(Error::Config { key, message }) => assert!(key.starts_with("schedule"), "{key}: {message}"),
            other => panic!("{other:?}"),
        }
        let unstable = text.replace("mu_lo = 6.5", "mu_lo = 5.0");
        match ExperimentConfig::from_toml_str(&unstable) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "model.box"),
            other => panic!("{other:?}"),
        }
        let outside = text.replace("mu = 10.0", "mu = 11.0");
        match ExperimentConfig::from_toml_str(&outside) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "initial"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn objective_matches_arrival_law() {
        let mut m = base_config().model;
        assert_eq!(m.objective().queue, crate::analytic::QueueModel::Pk { scv: 1.0 });
        m.arrivals = ArrivalKind::Renewal { interarrival: UnitDist::Erlang { k: 2 } };
        assert!(matches!(m.objective().queue, crate::analytic::QueueModel::GiM1 { .. }));
        m.service = UnitDist::Erlang { k: 2 };
        assert!(m.validate().is_err());
    }
}
