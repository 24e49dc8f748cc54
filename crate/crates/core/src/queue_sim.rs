//! Exact event-driven simulation of the single-server workload process.
//!
//! Within a cycle the control `(μ, p)` is constant, so the workload is
//! piecewise linear: it jumps by `V` at each arrival and drains at slope `-μ`
//! until it hits zero. A trace stores one [`Piece`] per arrival (plus the
//! initial level), which is enough to evaluate the path and its integrals in
//! closed form.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stochastic::{RngStream, UnitDist};

/// A decision: service rate `mu` (work units per time) and price `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub mu: f64,
    pub p: f64,
}

impl Policy {
    pub fn new(mu: f64, p: f64) -> Self {
        Self { mu, p }
    }

    pub fn distance(&self, other: &Policy) -> f64 {
        ((self.mu - other.mu).powi(2) + (self.p - other.p).powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArrivalKind {
    Poisson,
    /// Inter-arrival gaps `U / λ` with `U` drawn from the unit-mean law.
    Renewal { interarrival: UnitDist },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrivalProcess {
    pub kind: ArrivalKind,
    pub rate: f64,
}

impl ArrivalProcess {
    pub fn poisson(rate: f64) -> Self {
        Self { kind: ArrivalKind::Poisson, rate }
    }

    pub fn renewal(interarrival: UnitDist, rate: f64) -> Self {
        Self { kind: ArrivalKind::Renewal { interarrival }, rate }
    }
}

/// Time of the next arrival, measured from the start of the current cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrivalClock {
    kind: ArrivalKind,
    rate: f64,
    next: f64,
}

impl ArrivalClock {
    pub fn start(process: &ArrivalProcess, rng: &mut RngStream) -> Self {
        let mut clock = Self { kind: process.kind, rate: process.rate, next: 0.0 };
        clock.next = clock.gap(rng);
        clock
    }

    fn gap(&self, rng: &mut RngStream) -> f64 {
        if self.rate <= 0.0 {
            return f64::INFINITY;
        }
        let unit = match self.kind {
            ArrivalKind::Poisson => rng.exp1(),
            ArrivalKind::Renewal { interarrival } => interarrival.sample(rng),
        };
        unit / self.rate
    }

    pub fn next_arrival(&self) -> f64 {
        self.next
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Returns the pending arrival time and schedules the one after it.
    fn pop(&mut self, rng: &mut RngStream) -> f64 {
        let t = self.next;
        self.next = t + self.gap(rng);
        t
    }

    /// Control change at a cycle boundary: the residual inter-arrival time is
    /// discarded and a fresh gap at `new_rate` starts at the new cycle's
    /// origin. For Poisson arrivals this is distributionally a no-op.
    pub fn renewal_boundary_reset(&mut self, new_rate: f64, rng: &mut RngStream) {
        self.rate = new_rate;
        self.next = self.gap(rng);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arrival {
    pub time: f64,
    pub work: f64,
}

/// Path segment starting at `start` with workload `level` (after any jump).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub start: f64,
    pub level: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathEvent {
    Start,
    PreArrival,
    Arrival,
    Empty,
    End,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Breakpoint {
    pub t: f64,
    pub w: f64,
    pub event: PathEvent,
}

/// Complete record of one operating cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleTrace {
    policy: Policy,
    duration: f64,
    w0: f64,
    arrivals: Vec<Arrival>,
    pieces: Vec<Piece>,
    w_end: f64,
}

/// Antiderivative of `max(level - mu u, 0)` from 0 to `u`.
fn drained_area(level: f64, mu: f64, u: f64) -> f64 {
    let z = u.min(level / mu).max(0.0);
    level * z - 0.5 * mu * z * z
}

impl CycleTrace {
    /// Builds the exact path from a list of arrivals (sorted by time, inside `[0, duration]`).
    pub fn from_arrivals(w0: f64, policy: Policy, duration: f64, arrivals: Vec<Arrival>) -> Result<Self> {
        if !(duration > 0.0) || !(policy.mu > 0.0) || !(w0 >= 0.0) {
            return Err(Error::Unsupported(format!(
                "cycle needs duration > 0, mu > 0, w0 >= 0 (got {duration}, {}, {w0})",
                policy.mu
            )));
        }
        let mut pieces = Vec::with_capacity(arrivals.len() + 1);
        pieces.push(Piece { start: 0.0, level: w0 });
        let mu = policy.mu;
        let mut prev = 0.0;
        for a in &arrivals {
            if a.time < prev || a.time > duration || !(a.work >= 0.0) {
                return Err(Error::Unsupported(format!("arrival {a:?} out of order or out of range")));
            }
            let last = pieces[pieces.len() - 1];
            let before = (last.level - mu * (a.time - last.start)).max(0.0);
            pieces.push(Piece { start: a.time, level: before + a.work });
            prev = a.time;
        }
        let last = pieces[pieces.len() - 1];
        let w_end = (last.level - mu * (duration - last.start)).max(0.0);
        Ok(Self { policy, duration, w0, arrivals, pieces, w_end })
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn w0(&self) -> f64 {
        self.w0
    }

    pub fn w_end(&self) -> f64 {
        self.w_end
    }

    pub fn arrivals(&self) -> &[Arrival] {
        &self.arrivals
    }

    pub fn n_arrivals(&self) -> usize {
        self.arrivals.len()
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn total_work(&self) -> f64 {
        self.arrivals.iter().map(|a| a.work).sum()
    }

    fn piece_end(&self, i: usize) -> f64 {
        self.pieces.get(i + 1).map_or(self.duration, |p| p.start)
    }

    /// Time the server spends working during the cycle.
    pub fn busy_time(&self) -> f64 {
        let mu = self.policy.mu;
        (0..self.pieces.len())
            .map(|i| {
                let pc = self.pieces[i];
                (pc.level / mu).min(self.piece_end(i) - pc.start)
            })
            .sum()
    }

    /// Right-continuous workload `W(t)`.
    pub fn workload_at(&self, t: f64) -> f64 {
        let idx = self.pieces.partition_point(|pc| pc.start <= t).max(1) - 1;
        let pc = self.pieces[idx];
        (pc.level - self.policy.mu * (t - pc.start)).max(0.0)
    }

    fn check_interval(&self, t0: f64, t1: f64) -> Result<()> {
        if !(0.0 <= t0 && t0 <= t1 && t1 <= self.duration) {
            return Err(Error::IntervalOutOfRange { t0, t1, duration: self.duration });
        }
        Ok(())
    }

    fn integrate(&self, t0: f64, t1: f64, keep: impl Fn(&Piece) -> bool) -> f64 {
        let mu = self.policy.mu;
        let first = self.pieces.partition_point(|pc| pc.start <= t0).max(1) - 1;
        let mut total = 0.0;
        for i in first..self.pieces.len() {
            let pc = self.pieces[i];
            if pc.start >= t1 {
                break;
            }
            if !keep(&pc) {
                continue;
            }
            let lo = t0.max(pc.start);
            let hi = t1.min(self.piece_end(i));
            if hi > lo {
                total += drained_area(pc.level, mu, hi - pc.start) - drained_area(pc.level, mu, lo - pc.start);
            }
        }
        total
    }

    /// Exact `∫_{t0}^{t1} W(t) dt`.
    pub fn workload_integral(&self, t0: f64, t1: f64) -> Result<f64> {
        self.check_interval(t0, t1)?;
        Ok(self.integrate(t0, t1, |_| true))
    }

    /// Workload reconstructible from service completions by the end of the cycle:
    /// `W(t)` if `W(t) <= μ (T - t)`, else 0.
    pub fn observed_workload(&self, t: f64) -> f64 {
        let w = self.workload_at(t);
        if w <= self.policy.mu * (self.duration - t) {
            w
        } else {
            0.0
        }
    }

    /// Exact integral of [`observed_workload`](Self::observed_workload).
    ///
    /// On a draining stretch `W` and the bound `μ(T - t)` fall at the same
    /// slope, so a piece is either entirely visible (`level <= μ(T - start)`)
    /// or entirely censored; idle stretches contribute nothing either way.
    pub fn observed_workload_integral(&self, t0: f64, t1: f64) -> Result<f64> {
        self.check_interval(t0, t1)?;
        let mu = self.policy.mu;
        let horizon = self.duration;
        Ok(self.integrate(t0, t1, |pc| pc.level <= mu * (horizon - pc.start)))
    }

    /// Vertices of the path, with both sides of every jump.
    pub fn breakpoints(&self) -> Vec<Breakpoint> {
        let mu = self.policy.mu;
        let mut out = Vec::with_capacity(3 * self.pieces.len() + 1);
        for (i, pc) in self.pieces.iter().enumerate() {
            if i == 0 {
                out.push(Breakpoint { t: 0.0, w: pc.level, event: PathEvent::Start });
            } else {
                let prev = self.pieces[i - 1];
                let before = (prev.level - mu * (pc.start - prev.start)).max(0.0);
                out.push(Breakpoint { t: pc.start, w: before, event: PathEvent::PreArrival });
                out.push(Breakpoint { t: pc.start, w: pc.level, event: PathEvent::Arrival });
            }
            let empty_at = pc.start + pc.level / mu;
            if pc.level > 0.0 && empty_at < self.piece_end(i) {
                out.push(Breakpoint { t: empty_at, w: 0.0, event: PathEvent::Empty });
            }
        }
        out.push(Breakpoint { t: self.duration, w: self.w_end, event: PathEvent::End });
        out
    }

    /// Debug dump with columns `t,W,event`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,W,event")?;
        for bp in self.breakpoints() {
            let ev = match bp.event {
                PathEvent::Start => "start",
                PathEvent::PreArrival => "pre_arrival",
                PathEvent::Arrival => "arrival",
                PathEvent::Empty => "empty",
                PathEvent::End => "end",
            };
            writeln!(out, "{},{},{}", bp.t, bp.w, ev)?;
        }
        Ok(())
    }
}

/// Simulates one cycle of length `duration` under a fixed policy, starting from workload `w0`.
///
/// Arrival epochs come from `arrival_rng` and individual workloads from
/// `service_rng`, so the two sources can be held fixed independently.
pub fn simulate_cycle(
    w0: f64,
    policy: Policy,
    duration: f64,
    process: &ArrivalProcess,
    service: &UnitDist,
    arrival_rng: &mut RngStream,
    service_rng: &mut RngStream,
) -> Result<CycleTrace> {
    let mut clock = ArrivalClock::start(process, arrival_rng);
    simulate_with_clock(w0, policy, duration, &mut clock, service, arrival_rng, service_rng)
}

/// Like [`simulate_cycle`] but continues an existing arrival clock; on return
/// the clock holds the first arrival past `duration`, relative to this cycle's origin.
pub fn simulate_with_clock(
    w0: f64,
    policy: Policy,
    duration: f64,
    clock: &mut ArrivalClock,
    service: &UnitDist,
    arrival_rng: &mut RngStream,
    service_rng: &mut RngStream,
) -> Result<CycleTrace> {
    if !(duration > 0.0) {
        return Err(Error::Unsupported(format!("cycle duration must be positive, got {duration}")));
    }
    let expected = (clock.rate().max(0.0) * duration) as usize;
    let mut arrivals = Vec::with_capacity(expected + expected / 8 + 8);
    while clock.next_arrival() <= duration {
        let time = clock.pop(arrival_rng);
        let work = service.sample(service_rng);
        arrivals.push(Arrival { time, work });
    }
    CycleTrace::from_arrivals(w0, policy, duration, arrivals)
}
