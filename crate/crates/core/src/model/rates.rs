use serde::{Deserialize, Serialize};

use super::grid::TraitGrid;
use super::profile::Profile;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Continuous birth/death rate functions with their declared uniform bounds.
///
/// Evaluations are clamped to `[0, birth_bound]` and `[0, death_bound]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateProfiles {
    pub birth: Profile,
    pub death: Profile,
    /// Constant mutation rate `p`.
    pub mutation: f64,
    pub birth_bound: f64,
    pub death_bound: f64,
}

impl RateProfiles {
    pub fn constant(b: f64, d: f64, p: f64) -> Self {
        RateProfiles {
            birth: Profile::constant(b),
            death: Profile::constant(d),
            mutation: p,
            birth_bound: b.max(0.0),
            death_bound: d.max(0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        // p = 0 is accepted as the uncoupled limit; the assumption report flags it.
        if !(self.mutation >= 0.0) || !self.mutation.is_finite() {
            return Err(Error::param("mutation", "p must be nonnegative and finite"));
        }
        if !(self.birth_bound >= 0.0) || !(self.death_bound >= 0.0) {
            return Err(Error::param(
                "rate bounds",
                "bbar and dbar must be nonnegative",
            ));
        }
        self.birth
            .validate()
            .map_err(|r| Error::param("birth", r))?;
        self.death.validate().map_err(|r| Error::param("death", r))
    }

    pub fn birth(&self, x: f64) -> f64 {
        self.birth.eval(x).clamp(0.0, self.birth_bound)
    }

    pub fn death(&self, x: f64) -> f64 {
        self.death.eval(x).clamp(0.0, self.death_bound)
    }

    /// `b(x) - d(x)`
    pub fn net(&self, x: f64) -> f64 {
        self.birth(x) - self.death(x)
    }

    /// Samples the clamped rates on every node of `grid`.
    pub fn tabulate<T: Real>(&self, grid: &TraitGrid<T>) -> RateTables<T> {
        let nodes = grid.nodes();
        RateTables {
            birth: nodes
                .iter()
                .map(|x| T::lit(self.birth(x.as_f64())))
                .collect(),
            death: nodes
                .iter()
                .map(|x| T::lit(self.death(x.as_f64())))
                .collect(),
            p: T::lit(self.mutation),
            birth_bound: T::lit(self.birth_bound),
            death_bound: T::lit(self.death_bound),
            unclamped_birth: nodes
                .iter()
                .map(|x| T::lit(self.birth.eval(x.as_f64())))
                .collect(),
            unclamped_death: nodes
                .iter()
                .map(|x| T::lit(self.death.eval(x.as_f64())))
                .collect(),
        }
    }
}

/// Per-site rates on a trait window, in storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTables<T> {
    pub birth: Vec<T>,
    pub death: Vec<T>,
    pub p: T,
    pub birth_bound: T,
    pub death_bound: T,
    /// Raw profile values before clamping, kept for the bounds check.
    pub unclamped_birth: Vec<T>,
    pub unclamped_death: Vec<T>,
}

impl<T: Real> RateTables<T> {
    /// Tables from explicit per-site values (no clamping, raw = given).
    pub fn from_values(birth: Vec<T>, death: Vec<T>, p: T, birth_bound: T, death_bound: T) -> Self {
        RateTables {
            unclamped_birth: birth.clone(),
            unclamped_death: death.clone(),
            birth,
            death,
            p,
            birth_bound,
            death_bound,
        }
    }

    pub fn len(&self) -> usize {
        self.birth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.birth.is_empty()
    }

    pub fn net(&self, idx: usize) -> T {
        self.birth[idx] - self.death[idx]
    }

    /// Whether the raw profiles already respected `0 <= b <= bbar`, `0 <= d <= dbar`.
    pub fn within_bounds(&self) -> bool {
        let ok = |v: &[T], bound: T| v.iter().all(|&r| r >= T::zero() && r <= bound);
        ok(&self.unclamped_birth, self.birth_bound) && ok(&self.unclamped_death, self.death_bound)
    }
}
