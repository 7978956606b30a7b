use super::ode::{integrate, OdeStats, OdeSystem, Tolerances};
use crate::error::{Error, Result};
use crate::model::{Model, TraitGrid};
use crate::scalar::Real;
use crate::sim::InitialMode;

/// `out_i = sum_l w_l x_{i-l}` over the window (sites outside count as zero).
pub(crate) fn convolve<T: Real>(model: &Model<T>, x: &[T], out: &mut [T]) {
    let w = model.kernel().weights();
    let r = model.kernel().radius();
    let n = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        let lo = i.saturating_sub(r);
        let hi = (i + r).min(n - 1);
        let mut acc = T::zero();
        for (j, &xj) in x.iter().enumerate().take(hi + 1).skip(lo) {
            acc += w[i + r - j] * xj;
        }
        *o = acc;
    }
}

/// Kernel mass each site sends outside the window.
fn outgoing_mass<T: Real>(model: &Model<T>) -> Vec<T> {
    let n = model.len() as i64;
    (0..n)
        .map(|i| {
            model
                .kernel()
                .offsets()
                .filter(|(l, _)| i + l < 0 || i + l >= n)
                .map(|(_, w)| w)
                .sum()
        })
        .collect()
}

/// The mean system `n_i' = (b_i - d_i) n_i + sum_l w_l n_{i-l}` with one extra
/// component accumulating the mass mutated out of the window.
pub struct MeanSystem<'a, T> {
    model: &'a Model<T>,
    outgoing: Vec<T>,
}

impl<'a, T: Real> MeanSystem<'a, T> {
    pub fn new(model: &'a Model<T>) -> Self {
        MeanSystem {
            model,
            outgoing: outgoing_mass(model),
        }
    }
}

impl<T: Real> OdeSystem<T> for MeanSystem<'_, T> {
    fn rhs(&self, _t: T, y: &[T], dy: &mut [T]) -> Result<()> {
        let n = self.model.len();
        let x = &y[..n];
        convolve(self.model, x, &mut dy[..n]);
        let rates = self.model.rates();
        let mut out = T::zero();
        for i in 0..n {
            dy[i] += rates.net(i) * x[i];
            out += self.outgoing[i] * x[i];
        }
        dy[n] = out;
        Ok(())
    }
}

/// Expected subpopulation sizes at output times.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanField<T> {
    pub times: Vec<T>,
    pub values: Vec<Vec<T>>,
    /// Cumulative expected number of offspring mutated out of the window.
    pub leak: Vec<T>,
    pub stats: OdeStats,
}

impl<T: Real> MeanField<T> {
    pub fn total(&self, k: usize) -> T {
        self.values[k].iter().copied().sum()
    }
}

/// Integrates the mean system from `n0` (at time 0) to each of `times`.
pub fn integrate_mean<T: Real>(
    model: &Model<T>,
    n0: &[T],
    times: &[T],
    tol: &Tolerances<T>,
) -> Result<MeanField<T>> {
    if n0.len() != model.len() {
        return Err(Error::param("n0", "length differs from the model window"));
    }
    if n0.iter().any(|v| !(*v >= T::zero()) || !v.is_finite()) {
        return Err(Error::param(
            "n0",
            "initial means must be finite and nonnegative",
        ));
    }
    let mut y0 = n0.to_vec();
    y0.push(T::zero());
    let system = MeanSystem::new(model);
    let (states, stats) = integrate(&system, T::zero(), &y0, times, tol, true)?;
    let n = model.len();
    Ok(MeanField {
        times: times.to_vec(),
        leak: states.iter().map(|s| s[n]).collect(),
        values: states
            .into_iter()
            .map(|mut s| {
                s.truncate(n);
                s
            })
            .collect(),
        stats,
    })
}

/// Right-hand side of the exponent system at `u`:
/// `b_i - d_i + sum_l w_l exp(ln K (u_{i-l} - u_i))`.
///
/// When the spread of `u` fits the floating-point exponent range the sum is a
/// convolution of `exp(ln K (u - c))` for a common shift `c`; otherwise every
/// site is shifted by the largest difference in its own stencil.
pub fn exponent_rhs<T: Real>(model: &Model<T>, u: &[T], out: &mut [T]) -> Result<()> {
    let n = u.len();
    let ln_k = model.grid().ln_k();
    let rates = model.rates();
    let (lo, hi) = u
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let limit = T::max_exp_arg() * T::lit(0.85);
    let half_spread = ln_k * (hi - lo) * T::lit(0.5);
    if half_spread.is_finite() && half_spread < limit {
        let c = (hi + lo) * T::lit(0.5);
        let e: Vec<T> = u.iter().map(|&v| (ln_k * (v - c)).exp()).collect();
        convolve(model, &e, out);
        for i in 0..n {
            out[i] = rates.net(i) + out[i] / e[i];
        }
    } else {
        let w = model.kernel().weights();
        let r = model.kernel().radius();
        for i in 0..n {
            let (a, b) = (i.saturating_sub(r), (i + r).min(n - 1));
            let shift = (a..=b).map(|j| u[j] - u[i]).fold(T::neg_infinity(), T::max);
            let mut acc = T::zero();
            for j in a..=b {
                acc += w[i + r - j] * (ln_k * (u[j] - u[i] - shift)).exp();
            }
            if ln_k * shift > T::max_exp_arg() {
                return Err(Error::ExponentOverflow { site: i });
            }
            out[i] = rates.net(i) + acc * (ln_k * shift).exp();
        }
    }
    if let Some(i) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::ExponentOverflow { site: i });
    }
    Ok(())
}

/// Hopf-Cole exponents `u_i(t) = ln n_i(t ln K) / ln K` in rescaled time.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentField<T> {
    pub ln_k: T,
    pub times: Vec<T>,
    pub values: Vec<Vec<T>>,
    pub stats: OdeStats,
}

/// Integrates the exponent system in rescaled time from `u0`.
pub fn integrate_exponent<T: Real>(
    model: &Model<T>,
    u0: &[T],
    times: &[T],
    tol: &Tolerances<T>,
) -> Result<ExponentField<T>> {
    if u0.len() != model.len() {
        return Err(Error::param("u0", "length differs from the model window"));
    }
    if u0.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("u0", "initial exponents must be finite"));
    }
    let system = |_t: T, y: &[T], dy: &mut [T]| exponent_rhs(model, y, dy);
    let (values, stats) = integrate(&system, T::zero(), u0, times, tol, false)?;
    Ok(ExponentField {
        ln_k: model.grid().ln_k(),
        times: times.to_vec(),
        values,
        stats,
    })
}

/// Largest window handled by [`integrate_second_moments`].
pub const MOMENT_BUDGET: usize = 300;

/// First and second moments `m_i = E[N_i]`, `s_ij = E[N_i N_j]` at output times.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTrajectory<T> {
    pub times: Vec<T>,
    pub sites: usize,
    pub mean: Vec<Vec<T>>,
    /// Row-major `sites x sites`.
    pub second: Vec<Vec<T>>,
    pub tol: Tolerances<T>,
}

impl<T: Real> MomentTrajectory<T> {
    pub fn s(&self, k: usize, i: usize, j: usize) -> T {
        self.second[k][i * self.sites + j]
    }

    pub fn variance(&self, k: usize, i: usize) -> T {
        let m = self.mean[k][i];
        self.s(k, i, i) - m * m
    }

    pub fn covariance(&self, k: usize, i: usize, j: usize) -> T {
        self.s(k, i, j) - self.mean[k][i] * self.mean[k][j]
    }

    /// `Y_i = Var(N_i) / m_i`; `None` where the mean vanishes.
    pub fn normalized_variance(&self, k: usize, i: usize) -> Option<T> {
        let m = self.mean[k][i];
        (m > T::zero()).then(|| self.variance(k, i) / m)
    }

    /// `E[((N_i - m_i) / m_i)^2] = Var(N_i) / m_i^2`.
    pub fn relative_second_moment(&self, k: usize, i: usize) -> Option<T> {
        let m = self.mean[k][i];
        (m > T::zero()).then(|| self.variance(k, i) / (m * m))
    }

    /// Integration error allowance for `Y_i` at `(k, i)`, used as bound-check slack.
    pub(crate) fn y_slack_f64(&self, k: usize, i: usize) -> f64 {
        let m = self.mean[k][i];
        (T::lit(10.0) * (self.tol.rtol * self.s(k, i, i).abs() + self.tol.atol) / m).as_f64()
    }
}

/// Second moments of the initial state implied by `mode`.
pub fn initial_second_moments<T: Real>(m0: &[T], mode: InitialMode) -> Vec<T> {
    let n = m0.len();
    let mut s = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            s[i * n + j] = m0[i] * m0[j];
        }
        if mode == InitialMode::Poisson {
            s[i * n + i] += m0[i];
        }
    }
    s
}

/// Integrates `m' = A m` and `S' = A S + S A^T + diag((b_i + d_i) m_i + (w * m)_i)`
/// where `A = diag(b - d) + W` and `W` is the truncated mutation convolution.
pub fn integrate_second_moments<T: Real>(
    model: &Model<T>,
    m0: &[T],
    mode: InitialMode,
    times: &[T],
    tol: &Tolerances<T>,
) -> Result<MomentTrajectory<T>> {
    let n = model.len();
    if n > MOMENT_BUDGET {
        return Err(Error::MomentBudget {
            sites: n,
            budget: MOMENT_BUDGET,
        });
    }
    if m0.len() != n || m0.iter().any(|v| !(*v >= T::zero())) {
        return Err(Error::param("m0", "need one nonnegative mean per site"));
    }
    let rates = model.rates();
    let system = |_t: T, y: &[T], dy: &mut [T]| -> Result<()> {
        let (m, s) = y.split_at(n);
        let (dm, ds) = dy.split_at_mut(n);
        convolve(model, m, dm);
        let arrivals = dm.to_vec();
        for i in 0..n {
            dm[i] += rates.net(i) * m[i];
        }
        // B = A S, one column at a time.
        let mut column = vec![T::zero(); n];
        let mut conv = vec![T::zero(); n];
        let mut b = vec![T::zero(); n * n];
        for j in 0..n {
            for i in 0..n {
                column[i] = s[i * n + j];
            }
            convolve(model, &column, &mut conv);
            for i in 0..n {
                b[i * n + j] = rates.net(i) * column[i] + conv[i];
            }
        }
        for i in 0..n {
            for j in 0..n {
                ds[i * n + j] = b[i * n + j] + b[j * n + i];
            }
            ds[i * n + i] += (rates.birth[i] + rates.death[i]) * m[i] + arrivals[i];
        }
        Ok(())
    };
    let mut y0 = m0.to_vec();
    y0.extend(initial_second_moments(m0, mode));
    let (states, _) = integrate(&system, T::zero(), &y0, times, tol, false)?;
    let (mean, second) = states
        .into_iter()
        .map(|mut y| {
            let s = y.split_off(n);
            (y, s)
        })
        .unzip();
    Ok(MomentTrajectory {
        times: times.to_vec(),
        sites: n,
        mean,
        second,
        tol: *tol,
    })
}

/// `sum_i exp(-C_A |i h_K|) |v_i|` over the window.
pub fn weighted_l1_norm<T: Real>(values: &[T], grid: &TraitGrid<T>, c_a: T) -> T {
    values
        .iter()
        .enumerate()
        .map(|(idx, v)| (-c_a * (T::of_i64(grid.site(idx)) * grid.h()).abs()).exp() * v.abs())
        .sum()
}
