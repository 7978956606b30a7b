//! Adaptive Dormand-Prince 5(4) integration with dense stopping at output times.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances<T> {
    pub rtol: T,
    pub atol: T,
    pub max_steps: usize,
}

impl<T: Real> Tolerances<T> {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Tolerances {
            rtol: T::lit(rtol),
            atol: T::lit(atol),
            max_steps: 5_000_000,
        }
    }

    /// Means and exponents: `rtol = 1e-8`, `atol = 1e-12`.
    pub fn mean_default() -> Self {
        Self::new(1e-8, 1e-12)
    }

    /// Second moments: `rtol = 1e-6`, `atol = 1e-10`.
    pub fn moment_default() -> Self {
        Self::new(1e-6, 1e-10)
    }
}

impl<T: Real> Default for Tolerances<T> {
    fn default() -> Self {
        Self::mean_default()
    }
}

/// A first-order system `y' = f(t, y)`.
pub trait OdeSystem<T> {
    fn rhs(&self, t: T, y: &[T], dy: &mut [T]) -> Result<()>;
}

impl<T, F> OdeSystem<T> for F
where
    F: Fn(T, &[T], &mut [T]) -> Result<()>,
{
    fn rhs(&self, t: T, y: &[T], dy: &mut [T]) -> Result<()> {
        self(t, y, dy)
    }
}

/// Step statistics of one integration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub positivity_rejections: usize,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates from `(t0, y0)` and returns the state at each of `outputs`
/// (nondecreasing, all `>= t0`).
///
/// With `positive` set, a step producing a component below `-atol` is rejected
/// and retried with half the step; components in `[-atol, 0)` are set to zero.
pub fn integrate<T: Real, S: OdeSystem<T> + ?Sized>(
    system: &S,
    t0: T,
    y0: &[T],
    outputs: &[T],
    tol: &Tolerances<T>,
    positive: bool,
) -> Result<(Vec<Vec<T>>, OdeStats)> {
    if outputs.windows(2).any(|w| w[1] < w[0]) || outputs.first().is_some_and(|&t| t < t0) {
        return Err(Error::param(
            "output_times",
            "must be nondecreasing and start at or after t0",
        ));
    }
    let n = y0.len();
    let lit = T::lit;
    let mut stats = OdeStats::default();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k: Vec<Vec<T>> = vec![vec![T::zero(); n]; 7];
    let mut stage = vec![T::zero(); n];
    let mut y_new = vec![T::zero(); n];
    system.rhs(t, &y, &mut k[0])?;

    let t_last = outputs.last().copied().unwrap_or(t0);
    let span = (t_last - t0).abs().max(T::one());
    let mut h = initial_step(&y, &k[0], tol, span);
    let min_step = T::epsilon() * lit(64.0);
    let mut out = Vec::with_capacity(outputs.len());
    let mut next = 0;
    let mut steps = 0usize;

    while next < outputs.len() {
        while next < outputs.len() && outputs[next] <= t {
            out.push(y.clone());
            next += 1;
        }
        if next == outputs.len() {
            break;
        }
        let target = outputs[next];
        let remaining = target - t;
        let hit = h >= remaining;
        let step = if hit { remaining } else { h };
        if step < min_step * t.abs().max(T::one()) && !hit {
            return Err(Error::StepUnderflow {
                t: t.as_f64(),
                h: step.as_f64(),
            });
        }
        steps += 1;
        if steps > tol.max_steps {
            return Err(Error::TooManySteps(tol.max_steps));
        }

        for s in 1..7 {
            for j in 0..n {
                let mut acc = T::zero();
                for (q, kq) in k.iter().enumerate().take(s) {
                    let a = A[s][q];
                    if a != 0.0 {
                        acc += lit(a) * kq[j];
                    }
                }
                stage[j] = y[j] + step * acc;
            }
            if s < 6 {
                system.rhs(t + lit(C[s]) * step, &stage, &mut k[s])?;
            } else {
                // The last row of A holds the fifth-order weights, so this stage is
                // the candidate solution and its slope is reused next step.
                y_new.copy_from_slice(&stage);
                system.rhs(t + step, &y_new, &mut k[s])?;
            }
        }
        let mut err = T::zero();
        for j in 0..n {
            let mut e = T::zero();
            for (q, kq) in k.iter().enumerate() {
                if E[q] != 0.0 {
                    e += lit(E[q]) * kq[j];
                }
            }
            e *= step;
            let scale = tol.atol + tol.rtol * y[j].abs().max(y_new[j].abs());
            let r = e / scale;
            err += r * r;
        }
        let err = (err / T::of_usize(n.max(1))).sqrt();
        if !err.is_finite() {
            stats.rejected += 1;
            h = step * lit(0.25);
            continue;
        }

        let negative = positive && y_new.iter().any(|&v| v < -tol.atol);
        if err <= T::one() && !negative {
            if positive {
                for v in y_new.iter_mut() {
                    if *v < T::zero() {
                        *v = T::zero();
                    }
                }
            }
            t = if hit { target } else { t + step };
            std::mem::swap(&mut y, &mut y_new);
            let last = k.pop().expect("seven stages");
            k.insert(0, last);
            if positive {
                // Clipping changed the state, so the FSAL derivative is stale.
                system.rhs(t, &y, &mut k[0])?;
            }
            stats.accepted += 1;
            let factor = if err == T::zero() {
                lit(5.0)
            } else {
                (lit(0.9) * err.powf(lit(-0.2))).min(lit(5.0)).max(lit(0.2))
            };
            h = step * factor;
        } else {
            if negative {
                stats.positivity_rejections += 1;
                h = step * lit(0.5);
            } else {
                stats.rejected += 1;
                h = step * (lit(0.9) * err.powf(lit(-0.2))).max(lit(0.1));
            }
        }
    }
    Ok((out, stats))
}

fn initial_step<T: Real>(y: &[T], dy: &[T], tol: &Tolerances<T>, span: T) -> T {
    let mut d0 = T::zero();
    let mut d1 = T::zero();
    for (v, dv) in y.iter().zip(dy) {
        let s = tol.atol + tol.rtol * v.abs();
        d0 += (*v / s) * (*v / s);
        d1 += (*dv / s) * (*dv / s);
    }
    let n = T::of_usize(y.len().max(1));
    let d0 = (d0 / n).sqrt();
    let d1 = (d1 / n).sqrt();
    let h = if d0 < T::lit(1e-5) || d1 < T::lit(1e-5) {
        T::lit(1e-6) * span
    } else {
        T::lit(0.01) * d0 / d1
    };
    h.min(span).max(T::epsilon() * T::lit(1e3) * span)
}
