use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Hamiltonian, Profile};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// The discrete exponent system run on the solver mesh with `ln K = sharpness / dx`.
    NonlocalExponential,
    /// Lax-Friedrichs finite differences on `H(x, u_x)`.
    LocalUpwind,
}

/// An initial-value problem `u_t = H(x, u_x)`, `u(0, .) = u0` on `[x_min, x_max]`.
#[derive(Debug, Clone)]
pub struct HjProblem {
    pub hamiltonian: Hamiltonian,
    pub u0: Profile,
    pub x_min: f64,
    pub x_max: f64,
    /// Output times, strictly increasing, starting at or after 0.
    pub times: Vec<f64>,
}

impl HjProblem {
    pub fn new(
        hamiltonian: Hamiltonian,
        u0: Profile,
        x_min: f64,
        x_max: f64,
        times: Vec<f64>,
    ) -> Result<Self> {
        if !(x_min < x_max) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::EmptyWindow { x_min, x_max });
        }
        if times.is_empty()
            || times[0] < 0.0
            || times.windows(2).any(|w| w[0] >= w[1])
            || times.iter().any(|t| !t.is_finite())
        {
            return Err(Error::param(
                "times",
                "need finite, strictly increasing output times >= 0",
            ));
        }
        u0.validate().map_err(|r| Error::param("u0", r))?;
        Ok(HjProblem {
            hamiltonian,
            u0,
            x_min,
            x_max,
            times,
        })
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("nonempty output times")
    }

    /// Same problem on `[a - pad, b + pad]`.
    pub fn padded(&self, a: f64, b: f64, pad: f64) -> Self {
        HjProblem {
            x_min: a - pad,
            x_max: b + pad,
            ..self.clone()
        }
    }

    /// Mesh nodes `j dx` inside the window.
    pub(crate) fn nodes<T: Real>(&self, dx: T) -> Result<(i64, Vec<T>)> {
        if !(dx > T::zero()) {
            return Err(Error::param("dx", "mesh step must be positive"));
        }
        let slack = T::lit(1e-9);
        let lo = (T::lit(self.x_min) / dx - slack)
            .ceil()
            .to_i64()
            .unwrap_or(i64::MIN);
        let hi = (T::lit(self.x_max) / dx + slack)
            .floor()
            .to_i64()
            .unwrap_or(i64::MIN);
        if hi - lo < 2 {
            return Err(Error::param(
                "dx",
                "mesh needs at least three nodes in the window",
            ));
        }
        Ok((lo, (lo..=hi).map(|j| T::of_i64(j) * dx).collect()))
    }
}

/// Width of padding that keeps boundary effects off a compact until `t_end`: the
/// characteristic speed `p M_G'(L + 1)` times `t_end`, doubled, plus a kernel
/// reach of eight length scales (at least one unit).
pub fn pad_width(hamiltonian: &Hamiltonian, lipschitz: f64, t_end: f64) -> Result<f64> {
    let speed = hamiltonian.p() * hamiltonian.mgf_slope(lipschitz + 1.0)?;
    Ok(2.0 * speed * t_end + 1.0)
}

/// A mesh solution at the problem's output times.
#[derive(Debug, Clone, PartialEq)]
pub struct HjSolution<T> {
    pub scheme: Scheme,
    pub dx: T,
    /// Largest time step taken (explicit scheme) or accepted (ODE integrator).
    pub dt: T,
    pub steps: usize,
    /// Lattice index of the first node.
    pub j_min: i64,
    pub xs: Vec<T>,
    pub times: Vec<T>,
    pub values: Vec<Vec<T>>,
}

impl<T: Real> HjSolution<T> {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Index of output time `t` (exact match up to 1e-9).
    pub fn time_index(&self, t: T) -> Option<usize> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= T::lit(1e-9))
    }

    /// Piecewise-linear value at `x` for output index `k`; clamps outside the mesh.
    pub fn value_at(&self, k: usize, x: T) -> T {
        let row = &self.values[k];
        let pos = (x - self.xs[0]) / self.dx;
        if pos <= T::zero() {
            return row[0];
        }
        let j = pos.floor().to_usize().unwrap_or(usize::MAX);
        if j + 1 >= row.len() {
            return row[row.len() - 1];
        }
        let frac = pos - T::of_usize(j);
        row[j] * (T::one() - frac) + row[j + 1] * frac
    }

    /// Values at output index `k` and time `t` interpolated linearly between outputs.
    pub fn row_at_time(&self, t: T) -> Result<Vec<T>> {
        if let Some(k) = self.time_index(t) {
            return Ok(self.values[k].clone());
        }
        let k = self
            .times
            .iter()
            .position(|&s| s > t)
            .ok_or_else(|| Error::param("t", format!("{t} is beyond the solved horizon")))?;
        if k == 0 {
            return Err(Error::param(
                "t",
                format!("{t} precedes the first output time"),
            ));
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let f = (t - t0) / (t1 - t0);
        Ok(self.values[k - 1]
            .iter()
            .zip(&self.values[k])
            .map(|(&a, &b)| a * (T::one() - f) + b * f)
            .collect())
    }

    /// Sup distance to `other` over nodes of `self` in `[a, b]` (interpolating
    /// `other`), maximized over output times.
    pub fn sup_distance(&self, other: &HjSolution<T>, window: Option<(T, T)>) -> T {
        let mut sup = T::zero();
        for k in 0..self.times.len() {
            for (j, &x) in self.xs.iter().enumerate() {
                if let Some((a, b)) = window {
                    if x < a - T::lit(1e-12) || x > b + T::lit(1e-12) {
                        continue;
                    }
                }
                sup = sup.max((self.values[k][j] - other.value_at(k, x)).abs());
            }
        }
        sup
    }

    /// CSV rows `t,x,u` ready for plotting.
    pub fn csv_rows(&self, out: &mut String) {
        use std::fmt::Write;
        for (k, t) in self.times.iter().enumerate() {
            for (x, u) in self.xs.iter().zip(&self.values[k]) {
                let _ = writeln!(out, "{t},{x},{u}");
            }
        }
    }
}
