use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meanfield::ExponentField;
use crate::model::TraitGrid;
use crate::sim::Trajectory;

/// A sitewise exponent: finite, or the marker for an empty subpopulation.
///
/// There is deliberately no conversion to `f64`; callers must decide what an
/// extinct site means for their metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Exponent {
    Finite(f64),
    Extinct,
}

impl Exponent {
    pub fn finite(self) -> Option<f64> {
        match self {
            Exponent::Finite(v) => Some(v),
            Exponent::Extinct => None,
        }
    }

    pub fn is_extinct(self) -> bool {
        matches!(self, Exponent::Extinct)
    }

    /// `ln(n) / ln K`, extinct for `n = 0`.
    pub fn of_count(n: u64, ln_k: f64) -> Self {
        if n == 0 {
            Exponent::Extinct
        } else {
            Exponent::Finite((n as f64).ln() / ln_k)
        }
    }
}

/// `beta_i(t) = ln N_i(t ln K) / ln K` for one replicate, on rescaled times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticExponentField {
    pub seed: u64,
    pub ln_k: f64,
    pub i_min: i64,
    /// Rescaled times.
    pub times: Vec<f64>,
    pub values: Vec<Vec<Exponent>>,
}

/// Applies the logarithmic transform to a trajectory observed at plain times
/// `t ln K` for the rescaled `times`. No resampling: a trajectory observed on
/// any other grid is an error.
pub fn hopf_cole(traj: &Trajectory, ln_k: f64, times: &[f64]) -> Result<StochasticExponentField> {
    if !(ln_k > 0.0) || !ln_k.is_finite() {
        return Err(Error::param(
            "ln_k",
            format!("must be positive, got {ln_k}"),
        ));
    }
    if traj.snapshots.len() != times.len() {
        return Err(Error::GridMismatch(format!(
            "trajectory has {} observations, expected {}",
            traj.snapshots.len(),
            times.len()
        )));
    }
    for (snap, &t) in traj.snapshots.iter().zip(times) {
        let plain = t * ln_k;
        if (snap.time - plain).abs() > 1e-9 * plain.abs().max(1.0) {
            return Err(Error::GridMismatch(format!(
                "observation at {} does not match rescaled time {t} (plain {plain})",
                snap.time
            )));
        }
    }
    Ok(StochasticExponentField {
        seed: traj.seed,
        ln_k,
        i_min: traj.i_min,
        times: times.to_vec(),
        values: traj
            .snapshots
            .iter()
            .map(|s| {
                s.counts
                    .iter()
                    .map(|&n| Exponent::of_count(n, ln_k))
                    .collect()
            })
            .collect(),
    })
}

/// Piecewise-linear interpolation in the trait variable of sitewise exponents.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolatedField {
    pub delta: f64,
    pub i_min: i64,
    pub times: Vec<f64>,
    pub values: Vec<Vec<Exponent>>,
}

pub fn interpolate(
    field: &StochasticExponentField,
    grid: &TraitGrid<f64>,
) -> Result<InterpolatedField> {
    if field.i_min != grid.i_min() || field.values.iter().any(|row| row.len() != grid.len()) {
        return Err(Error::GridMismatch(format!(
            "field starts at site {} with {} sites, grid starts at {} with {}",
            field.i_min,
            field.values.first().map_or(0, Vec::len),
            grid.i_min(),
            grid.len()
        )));
    }
    Ok(InterpolatedField {
        delta: grid.delta(),
        i_min: grid.i_min(),
        times: field.times.clone(),
        values: field.values.clone(),
    })
}

impl InterpolatedField {
    /// Interpolation of a deterministic exponent field (all values finite).
    pub fn from_exponent(field: &ExponentField<f64>, grid: &TraitGrid<f64>) -> Self {
        InterpolatedField {
            delta: grid.delta(),
            i_min: grid.i_min(),
            times: field.times.clone(),
            values: field
                .values
                .iter()
                .map(|row| row.iter().map(|&v| Exponent::Finite(v)).collect())
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x_at(&self, slot: usize) -> f64 {
        (self.i_min + slot as i64) as f64 * self.delta
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x_at(0), self.x_at(self.len().saturating_sub(1)))
    }

    /// Value at `x` for output index `k`: exact at nodes, affine between two
    /// finite nodes, extinct inside a segment with an extinct endpoint.
    /// `None` outside the lattice window.
    pub fn eval(&self, k: usize, x: f64) -> Option<Exponent> {
        let row = &self.values[k];
        let pos = x / self.delta - self.i_min as f64;
        let last = (row.len() - 1) as f64;
        if !(pos >= -1e-9 && pos <= last + 1e-9) {
            return None;
        }
        let pos = pos.clamp(0.0, last);
        let nearest = pos.round();
        if (pos - nearest).abs() <= 1e-9 {
            return Some(row[nearest as usize]);
        }
        let j = (pos.floor() as usize).min(row.len() - 1);
        let frac = pos - j as f64;
        match (row[j], row[j + 1]) {
            (Exponent::Finite(a), Exponent::Finite(b)) => {
                Some(Exponent::Finite(a * (1.0 - frac) + b * frac))
            }
            _ => Some(Exponent::Extinct),
        }
    }

    /// Slots of the segment endpoints covering `[a, b]`.
    fn covering(&self, a: f64, b: f64) -> std::ops::RangeInclusive<usize> {
        let last = self.len() - 1;
        let lo = (a / self.delta - self.i_min as f64 + 1e-9).floor().max(0.0) as usize;
        let hi = (b / self.delta - self.i_min as f64 - 1e-9).ceil().max(0.0) as usize;
        lo.min(last)..=hi.min(last)
    }

    /// Whether the interpolated field is `-inf` on all of `[a, b]`: every node in
    /// `[a, b]` is extinct, or, when `[a, b]` sits strictly inside one segment,
    /// one of its endpoints is.
    pub fn extinct_on(&self, k: usize, a: f64, b: f64) -> bool {
        let row = &self.values[k];
        let mut inside = self.covering(a, b).filter(|&j| {
            let x = self.x_at(j);
            x >= a - 1e-9 * self.delta && x <= b + 1e-9 * self.delta
        });
        match inside.next() {
            Some(first) => row[first].is_extinct() && inside.all(|j| row[j].is_extinct()),
            None => self.covering(a, b).any(|j| row[j].is_extinct()),
        }
    }
}

/// Number of interior sample points per lattice segment in
/// [`sup_distance_on_compact`].
pub const SEGMENT_SAMPLES: usize = 4;

/// `sup_{x in [a, b]} |f(t_k, x) - g(x)|`, sampled at lattice nodes, the ends of
/// `[a, b]` and [`SEGMENT_SAMPLES`] interior points per segment.
///
/// Any segment with an extinct endpoint that meets `[a, b]` makes the distance
/// `+inf` (unless `g` is `-inf` at both ends of that piece too).
pub fn sup_distance_on_compact(
    f: &InterpolatedField,
    k: usize,
    g: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
) -> Result<f64> {
    let (lo, hi) = f.domain();
    if !(a <= b) || a < lo - 1e-9 || b > hi + 1e-9 {
        return Err(Error::param(
            "compact",
            format!("[{a}, {b}] is not inside the field window [{lo}, {hi}]"),
        ));
    }
    let row = &f.values[k];
    let slots: Vec<usize> = f.covering(a, b).collect();
    let mut sup: f64 = 0.0;
    let mut probe = |x: f64, fx: Exponent| -> bool {
        let gx = g(x);
        match fx {
            Exponent::Finite(v) => {
                sup = sup.max((v - gx).abs());
                true
            }
            Exponent::Extinct => gx == f64::NEG_INFINITY,
        }
    };
    if slots.len() == 1 {
        let ok = probe(a, row[slots[0]]) && probe(b, row[slots[0]]);
        return Ok(if ok { sup } else { f64::INFINITY });
    }
    for w in slots.windows(2) {
        let (j, x0, x1) = (w[0], f.x_at(w[0]), f.x_at(w[1]));
        let (s, e) = (x0.max(a), x1.min(b));
        if s > e {
            continue;
        }
        if row[j].is_extinct() || row[j + 1].is_extinct() {
            if g(s) != f64::NEG_INFINITY || g(e) != f64::NEG_INFINITY {
                return Ok(f64::INFINITY);
            }
            continue;
        }
        for m in 0..=SEGMENT_SAMPLES + 1 {
            let x = s + (e - s) * m as f64 / (SEGMENT_SAMPLES + 1) as f64;
            let fx = f.eval(k, x).unwrap_or(Exponent::Extinct);
            if !probe(x, fx) {
                return Ok(f64::INFINITY);
            }
        }
    }
    Ok(sup)
}
