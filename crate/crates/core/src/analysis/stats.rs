use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::meanfield::MeanField;
use crate::sim::{Estimate, Reducer, Trajectory};

/// Empirical proportion with a Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub confidence: f64,
}

impl Proportion {
    /// Whether the whole interval lies at or below `p`.
    pub fn below(&self, p: f64) -> bool {
        self.upper <= p
    }

    /// Whether the whole interval lies at or above `p`.
    pub fn above(&self, p: f64) -> bool {
        self.lower >= p
    }
}

pub fn wilson(successes: u64, trials: u64, confidence: f64) -> Result<Proportion> {
    if trials == 0 {
        return Err(Error::param("trials", "need at least one trial"));
    }
    if successes > trials {
        return Err(Error::param(
            "successes",
            format!("{successes} exceeds {trials} trials"),
        ));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::param(
            "confidence",
            format!("must lie in (0, 1), got {confidence}"),
        ));
    }
    let z = Normal::standard().inverse_cdf(0.5 + confidence / 2.0);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    Ok(Proportion {
        successes,
        trials,
        estimate: p,
        lower: (centre - half).max(0.0).min(p),
        upper: (centre + half).min(1.0).max(p),
        confidence,
    })
}

/// Streaming sums of the relative deviation `d = N / n - 1` per
/// (observation, slot) over a slot range, plus the per-replicate supremum of `|d|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationSums {
    pub observations: usize,
    pub slots: std::ops::Range<usize>,
    pub n: u64,
    /// `[sum d^2, sum d^4]` at `obs * slots.len() + (slot - slots.start)`.
    pub powers: Vec<[f64; 2]>,
    /// `(replicate, sup |d|)` in replicate order.
    pub sup: Vec<(u64, f64)>,
    /// First (observation, slot) with `n = 0` but `N > 0`.
    pub inconsistent: Option<(usize, usize)>,
}

/// Reducer over a fixed mean field.
pub struct Deviation<'a> {
    pub mean: &'a MeanField<f64>,
    pub slots: std::ops::Range<usize>,
}

impl Reducer for Deviation<'_> {
    type Acc = DeviationSums;

    fn empty(&self) -> DeviationSums {
        DeviationSums {
            observations: self.mean.times.len(),
            slots: self.slots.clone(),
            n: 0,
            powers: vec![[0.0; 2]; self.mean.times.len() * self.slots.len()],
            sup: Vec::new(),
            inconsistent: None,
        }
    }

    fn observe(&self, acc: &mut DeviationSums, replicate: u64, traj: &Trajectory) {
        assert_eq!(
            traj.snapshots.len(),
            acc.observations,
            "observation count mismatch"
        );
        acc.n += 1;
        let width = self.slots.len();
        let mut sup: f64 = 0.0;
        for (o, snap) in traj.snapshots.iter().enumerate() {
            for slot in self.slots.clone() {
                let big = snap.counts[slot] as f64;
                let small = self.mean.values[o][slot];
                let d = if small > 0.0 {
                    big / small - 1.0
                } else if big == 0.0 {
                    0.0
                } else {
                    acc.inconsistent.get_or_insert((o, slot));
                    continue;
                };
                let p = &mut acc.powers[o * width + slot - self.slots.start];
                p[0] += d * d;
                p[1] += d * d * d * d;
                sup = sup.max(d.abs());
            }
        }
        acc.sup.push((replicate, sup));
    }

    fn merge(&self, mut left: DeviationSums, right: DeviationSums) -> DeviationSums {
        left.n += right.n;
        for (a, b) in left.powers.iter_mut().zip(&right.powers) {
            a[0] += b[0];
            a[1] += b[1];
        }
        left.sup.extend(right.sup);
        left.inconsistent = left.inconsistent.or(right.inconsistent);
        left
    }
}

/// Estimates of `E[(N / n - 1)^2]` per (observation, slot).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationStats {
    pub times: Vec<f64>,
    pub slots: std::ops::Range<usize>,
    pub replicates: u64,
    /// Indexed `[obs][slot - slots.start]`.
    pub second: Vec<Vec<Estimate>>,
    pub sup: Vec<f64>,
}

impl DeviationStats {
    pub fn from_sums(sums: &DeviationSums, times: &[f64]) -> Result<Self> {
        if let Some((o, slot)) = sums.inconsistent {
            return Err(Error::Inconsistent(format!(
                "mean is zero but the population is not at observation {o}, slot {slot}"
            )));
        }
        if sums.n == 0 {
            return Err(Error::param("replicates", "no successful replicate"));
        }
        let n = sums.n as f64;
        let width = sums.slots.len();
        let second = (0..sums.observations)
            .map(|o| {
                (0..width)
                    .map(|s| {
                        let [s2, s4] = sums.powers[o * width + s];
                        let m2 = s2 / n;
                        let var = (s4 / n - m2 * m2).max(0.0);
                        Estimate {
                            value: m2,
                            se: (var / n).sqrt(),
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(DeviationStats {
            times: times.to_vec(),
            slots: sums.slots.clone(),
            replicates: sums.n,
            second,
            sup: sums.sup.iter().map(|&(_, s)| s).collect(),
        })
    }

    /// Largest estimated second moment and where it occurs.
    pub fn max_second(&self) -> (Estimate, usize, usize) {
        let mut best = (
            Estimate {
                value: f64::NEG_INFINITY,
                se: 0.0,
            },
            0,
            0,
        );
        for (o, row) in self.second.iter().enumerate() {
            for (s, e) in row.iter().enumerate() {
                if e.value > best.0.value {
                    best = (*e, o, self.slots.start + s);
                }
            }
        }
        best
    }

    /// Replicates whose `sup |N / n - 1|` exceeds `eta`.
    pub fn exceedances(&self, eta: f64) -> u64 {
        self.sup.iter().filter(|&&s| s > eta).count() as u64
    }
}

/// Per-(time, slot) deviation statistics of trajectories against a mean field
/// observed on the same times.
pub fn deviation_stats<'a>(
    trajectories: impl IntoIterator<Item = &'a Trajectory>,
    mean: &MeanField<f64>,
    slots: std::ops::Range<usize>,
) -> Result<DeviationStats> {
    let reducer = Deviation { mean, slots };
    let mut acc = reducer.empty();
    for (r, traj) in trajectories.into_iter().enumerate() {
        let times = traj.times();
        if times.len() != mean.times.len()
            || times
                .iter()
                .zip(&mean.times)
                .any(|(a, b)| (a - b).abs() > 1e-9 * b.abs().max(1.0))
        {
            return Err(Error::GridMismatch(
                "trajectory and mean field observe different times".into(),
            ));
        }
        reducer.observe(&mut acc, r as u64, traj);
    }
    DeviationStats::from_sums(&acc, &mean.times)
}
