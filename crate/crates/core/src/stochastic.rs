//! Unit-mean random variables and seeded, splittable random streams.
//!
//! Every simulation draw goes through an [`RngStream`]. A stream is keyed by
//! a 64-bit seed and a 64-bit stream id; ChaCha's native stream parameter
//! gives independent sequences for distinct ids under the same seed.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A nonnegative random variable with mean exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum UnitDist {
    Exponential,
    /// Sum of `k` exponentials with rate `k`.
    Erlang { k: u32 },
    /// Two-phase hyperexponential: rate `r1` with probability `p1`, else `r2`.
    HyperExp2 { p1: f64, r1: f64, r2: f64 },
    Deterministic,
}

impl UnitDist {
    pub fn erlang(k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidDistribution("Erlang order must be positive".into()));
        }
        Ok(UnitDist::Erlang { k })
    }

    /// Hyperexponential with the given phase parameters; rejects anything whose mean is not 1.
    pub fn hyperexp2(p1: f64, r1: f64, r2: f64) -> Result<Self> {
        let d = UnitDist::HyperExp2 { p1, r1, r2 };
        d.validate()?;
        Ok(d)
    }

    /// Two-moment fit with balanced means (`p1/r1 = p2/r2 = 1/2`).
    pub fn hyperexp_from_scv(target_scv: f64) -> Result<Self> {
        if !target_scv.is_finite() || target_scv < 1.0 {
            return Err(Error::InvalidDistribution(format!(
                "a two-phase hyperexponential needs SCV >= 1, got {target_scv}"
            )));
        }
        let p1 = 0.5 * (1.0 + ((target_scv - 1.0) / (target_scv + 1.0)).sqrt());
        let p2 = 1.0 - p1;
        Ok(UnitDist::HyperExp2 { p1, r1: 2.0 * p1, r2: 2.0 * p2 })
    }

    /// Distribution with the requested SCV from the three supported families.
    ///
    /// `0` is deterministic, `1/k` is Erlang-k, and anything `>= 1` is a
    /// balanced hyperexponential (exactly exponential at 1).
    pub fn from_scv(scv: f64) -> Result<Self> {
        if scv == 0.0 {
            return Ok(UnitDist::Deterministic);
        }
        if scv == 1.0 {
            return Ok(UnitDist::Exponential);
        }
        if scv > 1.0 {
            return Self::hyperexp_from_scv(scv);
        }
        let k = (1.0 / scv).round();
        if scv > 0.0 && (1.0 / k - scv).abs() < 1e-12 {
            return Self::erlang(k as u32);
        }
        Err(Error::InvalidDistribution(format!("no supported family with SCV {scv}")))
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            UnitDist::Erlang { k: 0 } => {
                Err(Error::InvalidDistribution("Erlang order must be positive".into()))
            }
            UnitDist::HyperExp2 { p1, r1, r2 } => {
                if !(0.0..=1.0).contains(&p1) || !(r1 > 0.0) || !(r2 > 0.0) {
                    return Err(Error::InvalidDistribution(format!(
                        "hyperexponential needs p1 in [0,1] and positive rates, got ({p1}, {r1}, {r2})"
                    )));
                }
                let mean = p1 / r1 + (1.0 - p1) / r2;
                if (mean - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidDistribution(format!(
                        "hyperexponential mean must be 1, got {mean}"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            UnitDist::HyperExp2 { p1, r1, r2 } => p1 / r1 + (1.0 - p1) / r2,
            _ => 1.0,
        }
    }

    /// Squared coefficient of variation, Var/Mean².
    pub fn scv(&self) -> f64 {
        match *self {
            UnitDist::Exponential => 1.0,
            UnitDist::Erlang { k } => 1.0 / f64::from(k),
            UnitDist::Deterministic => 0.0,
            UnitDist::HyperExp2 { p1, r1, r2 } => {
                let m = self.mean();
                let m2 = 2.0 * p1 / (r1 * r1) + 2.0 * (1.0 - p1) / (r2 * r2);
                m2 / (m * m) - 1.0
            }
        }
    }

    /// Laplace–Stieltjes transform `E[exp(-s X)]` for `s >= 0`.
    pub fn laplace(&self, s: f64) -> f64 {
        match *self {
            UnitDist::Exponential => 1.0 / (1.0 + s),
            UnitDist::Erlang { k } => {
                let kf = f64::from(k);
                (kf / (kf + s)).powi(k as i32)
            }
            UnitDist::Deterministic => (-s).exp(),
            UnitDist::HyperExp2 { p1, r1, r2 } => p1 * r1 / (r1 + s) + (1.0 - p1) * r2 / (r2 + s),
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match *self {
            UnitDist::Exponential => rng.exp1(),
            UnitDist::Erlang { k } => {
                let mut acc = 0.0;
                for _ in 0..k {
                    acc += rng.exp1();
                }
                acc / f64::from(k)
            }
            UnitDist::Deterministic => 1.0,
            UnitDist::HyperExp2 { p1, r1, r2 } => {
                let rate = if rng.uniform() < p1 { r1 } else { r2 };
                rng.exp1() / rate
            }
        }
    }
}

/// What a stream is used for inside one cycle or iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Arrivals = 0,
    Service = 1,
    Direction = 2,
    Validation = 3,
}

/// Stream id for a `(cycle-or-iteration index, purpose)` pair.
pub fn stream_id(index: u64, purpose: Purpose) -> u64 {
    (index << 4) | purpose as u64
}

/// Run seed for replication `rep` of an experiment seeded with `seed0`.
pub fn replication_seed(seed0: u64, rep: u64) -> u64 {
    splitmix64(seed0 ^ splitmix64(rep.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A reproducible random stream identified by `(seed, stream)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn for_purpose(seed: u64, index: u64, purpose: Purpose) -> Self {
        Self::new(seed, stream_id(index, purpose))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Unit-rate exponential by inversion.
    pub fn exp1(&mut self) -> f64 {
        // 1 - U lies in (0, 1], so the log is finite.
        -(1.0 - self.uniform()).ln()
    }

    pub fn coin(&mut self) -> bool {
        self.rng.random::<bool>()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
