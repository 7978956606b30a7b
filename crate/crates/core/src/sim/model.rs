use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Model, RegimeTag};

/// What happens to mutation offspring that land outside the simulated window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPolicy {
    /// Discard and count them in `boundary_leak`.
    #[default]
    Absorb,
    /// Abort the run with [`Error::BoundaryViolation`].
    Strict,
}

pub const DEFAULT_POPULATION_CAP: u64 = 50_000_000;
pub const DEFAULT_LEAP_BOUND: f64 = 0.1;

/// Per-site event rates in the form the simulators consume.
#[derive(Debug, Clone)]
pub struct StochasticModel {
    pub(crate) i_min: i64,
    pub(crate) birth: Vec<f64>,
    pub(crate) death: Vec<f64>,
    pub(crate) offsets: Vec<i64>,
    pub(crate) weights: Vec<f64>,
    cumulative: Vec<f64>,
    pub(crate) mu: f64,
    pub(crate) regime: RegimeTag,
    pub(crate) birth_dominates: bool,
    pub(crate) ln_k: f64,
    pub policy: BoundaryPolicy,
    pub cap: u64,
    /// Tau-leap guard: largest allowed `rate * dt` for any channel.
    pub leap_bound: f64,
    pub event_log: bool,
}

impl StochasticModel {
    pub fn new(model: &Model<f64>) -> Self {
        let rates = model.rates();
        let (offsets, weights): (Vec<i64>, Vec<f64>) =
            model.kernel().offsets().filter(|(_, w)| *w > 0.0).unzip();
        let cumulative = weights
            .iter()
            .scan(0.0, |acc, &w| {
                *acc += w;
                Some(*acc)
            })
            .collect();
        StochasticModel {
            i_min: model.grid().i_min(),
            birth: rates.birth.clone(),
            death: rates.death.clone(),
            mu: weights.iter().sum(),
            offsets,
            weights,
            cumulative,
            regime: model.regime().tag,
            birth_dominates: model.regime().birth_dominates,
            ln_k: model.grid().ln_k(),
            policy: BoundaryPolicy::Absorb,
            cap: DEFAULT_POPULATION_CAP,
            leap_bound: DEFAULT_LEAP_BOUND,
            event_log: false,
        }
    }

    pub fn with_policy(mut self, policy: BoundaryPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.cap = cap;
        self
    }

    pub fn with_leap_bound(mut self, bound: f64) -> Self {
        self.leap_bound = bound;
        self
    }

    pub fn with_event_log(mut self, on: bool) -> Self {
        self.event_log = on;
        self
    }

    pub fn len(&self) -> usize {
        self.birth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.birth.is_empty()
    }

    pub fn i_min(&self) -> i64 {
        self.i_min
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn regime(&self) -> RegimeTag {
        self.regime
    }

    pub fn ln_k(&self) -> f64 {
        self.ln_k
    }

    /// Composite per-individual event rate at slot `idx`.
    pub(crate) fn composite(&self, idx: usize) -> f64 {
        self.birth[idx] + self.death[idx] + self.mu
    }

    /// Draws a mutation offset with probability `w_l / mu`.
    pub(crate) fn draw_offset<R: Rng>(&self, rng: &mut R) -> i64 {
        self.offset_at(rng.random::<f64>())
    }

    /// Offset whose cumulative weight interval contains `u * mu`, `u` in `[0, 1)`.
    pub(crate) fn offset_at(&self, u: f64) -> i64 {
        let target = u * self.mu;
        let k = self.cumulative.partition_point(|&c| c <= target);
        self.offsets[k.min(self.offsets.len() - 1)]
    }

    /// Storage slot of the site `offset` away from slot `idx`, if inside the window.
    pub(crate) fn target(&self, idx: usize, offset: i64) -> Option<usize> {
        let t = idx as i64 + offset;
        (t >= 0 && (t as usize) < self.len()).then_some(t as usize)
    }
}

/// Checks that observation times are finite, strictly increasing and inside `[t0, t_end]`.
pub(crate) fn check_observations(times: &[f64], t0: f64, t_end: f64) -> Result<()> {
    if !t_end.is_finite() || t_end < t0 {
        return Err(Error::param(
            "t_end",
            format!("must be finite and >= {t0}, got {t_end}"),
        ));
    }
    let ordered = times.windows(2).all(|w| w[0] < w[1]);
    let inside = times
        .iter()
        .all(|t| t.is_finite() && *t >= t0 && *t <= t_end);
    if ordered && inside {
        Ok(())
    } else {
        Err(Error::param(
            "observation_times",
            "must be strictly increasing and lie in [t0, t_end]",
        ))
    }
}
