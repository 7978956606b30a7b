use serde::{Deserialize, Serialize};

use super::solution::HjSolution;
use crate::error::{Error, Result};
use crate::model::quadrature::adaptive_simpson;
use crate::model::Hamiltonian;
use crate::scalar::Real;

/// A value of the cut-off limit: finite, extinct (`-inf`), or left unclassified
/// inside the band around `{u = 0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum CutoffValue {
    Value(f64),
    Extinct,
    Undecided,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutoffSolution {
    pub band_tol: f64,
    pub xs: Vec<f64>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<CutoffValue>>,
}

pub fn cutoff_value(u: f64, band_tol: f64) -> CutoffValue {
    if u > band_tol {
        CutoffValue::Value(u)
    } else if u < -band_tol {
        CutoffValue::Extinct
    } else {
        CutoffValue::Undecided
    }
}

/// `u` where `u > band_tol`, extinct where `u < -band_tol`, undecided in between.
///
/// With `band_tol = 0` only exact zeros are undecided.
pub fn apply_cutoff<T: Real>(u: &HjSolution<T>, band_tol: f64) -> CutoffSolution {
    CutoffSolution {
        band_tol,
        xs: u.xs.iter().map(|x| x.as_f64()).collect(),
        times: u.times.iter().map(|t| t.as_f64()).collect(),
        values: u
            .values
            .iter()
            .map(|row| {
                row.iter()
                    .map(|v| cutoff_value(v.as_f64(), band_tol))
                    .collect()
            })
            .collect(),
    }
}

/// Maximal intervals where `u(t, .) > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalSet {
    pub t: f64,
    pub intervals: Vec<(f64, f64)>,
}

impl SurvivalSet {
    pub fn contains(&self, a: f64, b: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| lo <= a && b <= hi)
    }
}

/// Positive intervals at time `t`, endpoints located by linear interpolation
/// between the sign-changing nodes (window edges when positive up to the edge).
pub fn survival_set<T: Real>(u: &HjSolution<T>, t: T) -> Result<SurvivalSet> {
    let row: Vec<f64> = u.row_at_time(t)?.iter().map(|v| v.as_f64()).collect();
    let xs: Vec<f64> = u.xs.iter().map(|x| x.as_f64()).collect();
    let root = |j: usize| {
        let (u0, u1) = (row[j], row[j + 1]);
        xs[j] + (xs[j + 1] - xs[j]) * u0 / (u0 - u1)
    };
    let mut intervals = Vec::new();
    let mut start: Option<f64> = None;
    for j in 0..row.len() {
        let pos = row[j] > 0.0;
        match (pos, start) {
            (true, None) => start = Some(if j == 0 { xs[0] } else { root(j - 1) }),
            (false, Some(a)) => {
                intervals.push((a, root(j - 1)));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(a) = start {
        intervals.push((a, xs[xs.len() - 1]));
    }
    Ok(SurvivalSet {
        t: t.as_f64(),
        intervals,
    })
}

/// Classification of a compact `[a, b]` at one time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompactClass {
    Survival,
    Extinction,
}

/// Survival when `u > band_tol` on all of `[a, b]`, extinction when `u < -band_tol`;
/// anything touching the band is an error.
pub fn classify_compact<T: Real>(
    u: &HjSolution<T>,
    t: T,
    a: f64,
    b: f64,
    band_tol: f64,
) -> Result<CompactClass> {
    let row: Vec<f64> = u.row_at_time(t)?.iter().map(|v| v.as_f64()).collect();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut seen = false;
    for (j, x) in u.xs.iter().enumerate() {
        let x = x.as_f64();
        if x >= a - 1e-12 && x <= b + 1e-12 {
            lo = lo.min(row[j]);
            hi = hi.max(row[j]);
            seen = true;
        }
    }
    if !seen {
        return Err(Error::param(
            "compact",
            format!("[{a}, {b}] contains no mesh node"),
        ));
    }
    if lo > band_tol {
        Ok(CompactClass::Survival)
    } else if hi < -band_tol {
        Ok(CompactClass::Extinction)
    } else {
        Err(Error::UndecidedCompact { a, b })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    /// `max_j |u(t, x_{j+1}) - u(t, x_j)| / dx` per output time.
    pub spatial: Vec<f64>,
    pub l_t: f64,
    /// `max_j |u(t_{k+1}, x_j) - u(t_k, x_j)| / (t_{k+1} - t_k)` per output interval.
    pub temporal: Vec<f64>,
    pub time_l: f64,
    /// `bbar + dbar + 2 p ∫ G(y) e^{L_T |y|} dy`, when a Hamiltonian is supplied.
    pub time_bound: Option<f64>,
}

pub fn lipschitz_report<T: Real>(
    u: &HjSolution<T>,
    hamiltonian: Option<&Hamiltonian>,
) -> LipschitzReport {
    let dx = u.dx.as_f64();
    let spatial: Vec<f64> = u
        .values
        .iter()
        .map(|row| {
            row.windows(2)
                .map(|w| (w[1] - w[0]).as_f64().abs() / dx)
                .fold(0.0, f64::max)
        })
        .collect();
    let temporal: Vec<f64> = (1..u.times.len())
        .map(|k| {
            let dt = (u.times[k] - u.times[k - 1]).as_f64();
            u.values[k]
                .iter()
                .zip(&u.values[k - 1])
                .map(|(a, b)| (*a - *b).as_f64().abs() / dt)
                .fold(0.0, f64::max)
        })
        .collect();
    let l_t = spatial.iter().copied().fold(0.0, f64::max);
    let time_bound = hamiltonian.map(|h| {
        let rates = h.rates();
        let l = l_t;
        let f = |y: f64| 2.0 * h.kernel().density(y) * (l * y).exp();
        let mut reach = 10.0;
        while f(reach) > 1e-18 && reach < 1e4 {
            reach *= 2.0;
        }
        let integral = adaptive_simpson(&f, 0.0, reach, 1e-10, 64);
        rates.birth_bound + rates.death_bound + 2.0 * h.p() * integral
    });
    LipschitzReport {
        time_l: temporal.iter().copied().fold(0.0, f64::max),
        spatial,
        l_t,
        temporal,
        time_bound,
    }
}
