use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// How the trait mesh `delta_K` is derived from `ln K`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum MeshRule {
    /// `delta_K = (ln K)^-2`
    #[default]
    Default,
    /// `delta_K = (ln K)^-exponent`, exponent > 1 keeps `h_K -> 0`.
    Power {
        exponent: f64,
    },
    Fixed {
        delta: f64,
    },
}

/// The discretized trait lattice `{ i * delta_K : i_min <= i <= i_max }`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraitGrid<T> {
    ln_k: T,
    delta: T,
    h: T,
    i_min: i64,
    i_max: i64,
}

impl<T: Real> TraitGrid<T> {
    /// Builds the lattice for scaling parameter `K = exp(ln_k)` over `[x_min, x_max]`.
    pub fn build(ln_k: T, rule: MeshRule, x_min: T, x_max: T) -> Result<Self> {
        if !(ln_k >= T::LN_2()) || !ln_k.is_finite() {
            return Err(Error::param(
                "ln_k",
                format!("K must be >= 2, got ln K = {ln_k}"),
            ));
        }
        if !x_min.is_finite() || !x_max.is_finite() || !(x_min < x_max) {
            return Err(Error::EmptyWindow {
                x_min: x_min.as_f64(),
                x_max: x_max.as_f64(),
            });
        }
        let delta = match rule {
            MeshRule::Default => ln_k.powi(-2),
            MeshRule::Power { exponent } => ln_k.powf(T::lit(-exponent)),
            MeshRule::Fixed { delta } => T::lit(delta),
        };
        let bound = ln_k.recip();
        if !(delta > T::zero()) || delta >= bound {
            return Err(Error::MeshCondition {
                delta: delta.as_f64(),
                bound: bound.as_f64(),
            });
        }
        // Snap node indices that sit on the window edge up to rounding.
        let slack = T::lit(1e-9);
        let i_min = (x_min / delta - slack).ceil();
        let i_max = (x_max / delta + slack).floor();
        let i_min = i_min.to_i64().ok_or(Error::EmptyWindow {
            x_min: x_min.as_f64(),
            x_max: x_max.as_f64(),
        })?;
        let i_max = i_max.to_i64().ok_or(Error::EmptyWindow {
            x_min: x_min.as_f64(),
            x_max: x_max.as_f64(),
        })?;
        if i_min > 0 || i_max < 0 || i_min > i_max {
            return Err(Error::EmptyWindow {
                x_min: x_min.as_f64(),
                x_max: x_max.as_f64(),
            });
        }
        Ok(TraitGrid {
            ln_k,
            delta,
            h: delta * ln_k,
            i_min,
            i_max,
        })
    }

    /// Same as [`TraitGrid::build`] with `K` given directly.
    pub fn from_k(k: T, rule: MeshRule, x_min: T, x_max: T) -> Result<Self> {
        if !(k >= T::lit(2.0)) {
            return Err(Error::param("K", format!("K must be >= 2, got {k}")));
        }
        Self::build(k.ln(), rule, x_min, x_max)
    }

    pub fn ln_k(&self) -> T {
        self.ln_k
    }

    /// `K` itself; infinite when `ln K` is beyond the scalar's exponent range.
    pub fn k(&self) -> T {
        self.ln_k.exp()
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn h(&self) -> T {
        self.h
    }

    pub fn i_min(&self) -> i64 {
        self.i_min
    }

    pub fn i_max(&self) -> i64 {
        self.i_max
    }

    pub fn len(&self) -> usize {
        (self.i_max - self.i_min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Trait value of lattice index `i`.
    pub fn x(&self, i: i64) -> T {
        T::of_i64(i) * self.delta
    }

    /// Trait value of storage slot `idx` (0-based from `i_min`).
    pub fn x_at(&self, idx: usize) -> T {
        self.x(self.site(idx))
    }

    pub fn site(&self, idx: usize) -> i64 {
        self.i_min + idx as i64
    }

    pub fn slot(&self, i: i64) -> Option<usize> {
        (self.i_min..=self.i_max)
            .contains(&i)
            .then(|| (i - self.i_min) as usize)
    }

    /// Trait values of every node, in storage order.
    pub fn nodes(&self) -> Vec<T> {
        (self.i_min..=self.i_max).map(|i| self.x(i)).collect()
    }

    /// Storage slots whose nodes lie in `[a, b]`.
    pub fn slots_in(&self, a: T, b: T) -> std::ops::Range<usize> {
        let slack = T::lit(1e-9);
        let lo = ((a / self.delta - slack).ceil().to_i64().unwrap_or(i64::MIN)).max(self.i_min);
        let hi = ((b / self.delta + slack)
            .floor()
            .to_i64()
            .unwrap_or(i64::MAX))
        .min(self.i_max);
        if lo > hi {
            return 0..0;
        }
        (lo - self.i_min) as usize..(hi - self.i_min + 1) as usize
    }

    /// Largest `eps` with `delta_K >= K^-eps`, i.e. `-ln(delta)/ln K`; the left half of
    /// the mesh condition asks this to vanish as `K` grows.
    pub fn mesh_exponent(&self) -> T {
        -self.delta.ln() / self.ln_k
    }
}
