use super::solution::{HjProblem, HjSolution, Scheme};
use crate::error::{Error, Result};
use crate::meanfield::{integrate, Tolerances};
use crate::model::{discretize_kernel, MeshRule, TraitGrid};
use crate::scalar::Real;

/// Default ratio `h = dx ln K` of the nonlocal scheme.
pub const DEFAULT_SHARPNESS: f64 = 0.25;

/// Solves `problem` on mesh step `dx`.
///
/// For [`Scheme::LocalUpwind`], `dt` fixes the time step and a step above the
/// monotonicity bound `dx / (2 p M_G'(L + 1))` is an error; with `dt = None`
/// the step follows that bound (with a 0.9 safety factor), re-evaluated each step.
/// The nonlocal scheme uses adaptive Runge-Kutta steps and ignores `dt`.
pub fn solve_hj<T: Real>(
    problem: &HjProblem,
    dx: T,
    dt: Option<T>,
    scheme: Scheme,
) -> Result<HjSolution<T>> {
    match scheme {
        Scheme::LocalUpwind => lax_friedrichs(problem, dx, dt, None),
        Scheme::NonlocalExponential => nonlocal(problem, dx, T::lit(DEFAULT_SHARPNESS)),
    }
}

/// Lax-Friedrichs with a fixed step and a fixed viscosity `theta`, so that runs
/// from different initial data apply the same monotone operator.
///
/// Fails when `dt > dx / (2 theta)` or when the Hamiltonian slope
/// `p M_G'(L + 1)` at the current Lipschitz estimate `L` exceeds `theta`.
pub fn solve_lax_friedrichs<T: Real>(
    problem: &HjProblem,
    dx: T,
    dt: T,
    theta: T,
) -> Result<HjSolution<T>> {
    if !(theta > T::zero()) || !theta.is_finite() {
        return Err(Error::param(
            "theta",
            "viscosity must be positive and finite",
        ));
    }
    lax_friedrichs(problem, dx, Some(dt), Some(theta))
}

fn lax_friedrichs<T: Real>(
    problem: &HjProblem,
    dx: T,
    dt_fixed: Option<T>,
    theta_fixed: Option<T>,
) -> Result<HjSolution<T>> {
    let h = &problem.hamiltonian;
    let (j_min, xs) = problem.nodes(dx)?;
    let n = xs.len();
    let net: Vec<T> = xs.iter().map(|&x| h.net(x)).collect();
    let p = T::lit(h.p());
    let mut u: Vec<T> = xs
        .iter()
        .map(|x| T::lit(problem.u0.eval(x.as_f64())))
        .collect();
    let times: Vec<T> = problem.times.iter().map(|&t| T::lit(t)).collect();
    let mut values = Vec::with_capacity(times.len());
    let mut slopes = vec![T::zero(); n + 1];
    let mut next = vec![T::zero(); n];
    let mut t = T::zero();
    let mut steps = 0usize;
    let mut dt_max = T::zero();
    let half = T::lit(0.5);

    for &target in &times {
        loop {
            if t >= target - T::epsilon() * target.abs().max(T::one()) * T::lit(8.0) {
                break;
            }
            // slopes[j] = (u_j - u_{j-1}) / dx with linearly extrapolated ghosts.
            for j in 1..n {
                slopes[j] = (u[j] - u[j - 1]) / dx;
            }
            slopes[0] = slopes[1];
            slopes[n] = slopes[n - 1];
            let lip = slopes.iter().fold(T::zero(), |m, q| m.max(q.abs()));
            let slope = p * h.mgf_slope(lip + T::one())?;
            let theta = match theta_fixed {
                Some(theta) if slope > theta => {
                    return Err(Error::param(
                        "theta",
                        format!("viscosity {theta} is below the Hamiltonian slope {slope}"),
                    ))
                }
                Some(theta) => theta,
                None => slope,
            };
            let bound = if theta > T::zero() {
                dx / (T::lit(2.0) * theta)
            } else {
                T::infinity()
            };
            let dt = match dt_fixed {
                Some(dt) if dt > bound => {
                    return Err(Error::Cfl {
                        dt: dt.as_f64(),
                        suggested: (bound * T::lit(0.9)).as_f64(),
                    })
                }
                Some(dt) => dt,
                None if bound.is_finite() => bound * T::lit(0.9),
                None => target - t,
            };
            let step = dt.min(target - t);
            for j in 0..n {
                let (qm, qp) = (slopes[j], slopes[j + 1]);
                let m = h.mgf((qm + qp) * half)?;
                next[j] = u[j] + step * (net[j] + p * m + theta * half * (qp - qm));
            }
            std::mem::swap(&mut u, &mut next);
            t = if step == target - t { target } else { t + step };
            dt_max = dt_max.max(step);
            steps += 1;
        }
        values.push(u.clone());
    }
    Ok(HjSolution {
        scheme: Scheme::LocalUpwind,
        dx,
        dt: dt_max,
        steps,
        j_min,
        xs,
        times,
        values,
    })
}

fn nonlocal<T: Real>(problem: &HjProblem, dx: T, sharpness: T) -> Result<HjSolution<T>> {
    let h = &problem.hamiltonian;
    let (j_min, xs) = problem.nodes(dx)?;
    let n = xs.len();
    let ln_k = sharpness / dx;
    // The kernel only depends on h = sharpness; the grid window is irrelevant here.
    let grid = TraitGrid::build(ln_k, MeshRule::Fixed { delta: dx.as_f64() }, -dx, dx)?;
    let kernel = discretize_kernel(h.kernel(), &grid, T::lit(h.p()), T::lit(1e-13))?;
    let r = kernel.radius();
    let w = kernel.weights().to_vec();
    let net: Vec<T> = xs.iter().map(|&x| h.net(x)).collect();
    let u0: Vec<T> = xs
        .iter()
        .map(|x| T::lit(problem.u0.eval(x.as_f64())))
        .collect();

    let rhs = |_t: T, u: &[T], du: &mut [T]| -> Result<()> {
        let left = u[1] - u[0];
        let right = u[n - 1] - u[n - 2];
        let at = |k: i64| -> T {
            if k < 0 {
                u[0] + T::of_i64(k) * left
            } else if k as usize >= n {
                u[n - 1] + T::of_i64(k - n as i64 + 1) * right
            } else {
                u[k as usize]
            }
        };
        for j in 0..n {
            let mut acc = T::zero();
            for (k, &wl) in w.iter().enumerate() {
                let l = k as i64 - r as i64;
                acc += wl * (ln_k * (at(j as i64 + l) - u[j])).exp();
            }
            if !acc.is_finite() {
                return Err(Error::Saturation {
                    q: ((u[(j + 1).min(n - 1)] - u[j]) / dx).as_f64(),
                    exponent: f64::INFINITY,
                });
            }
            du[j] = net[j] + acc;
        }
        Ok(())
    };
    let times: Vec<T> = problem.times.iter().map(|&t| T::lit(t)).collect();
    let tol = Tolerances {
        rtol: T::lit(1e-10).max(T::epsilon() * T::lit(100.0)),
        atol: T::lit(1e-10).max(T::epsilon() * T::lit(100.0)),
        max_steps: 10_000_000,
    };
    let (values, stats) = integrate(&rhs, T::zero(), &u0, &times, &tol, false)?;
    let span = times.last().copied().unwrap_or(T::zero());
    Ok(HjSolution {
        scheme: Scheme::NonlocalExponential,
        dx,
        dt: span / T::of_usize(stats.accepted.max(1)),
        steps: stats.accepted,
        j_min,
        xs,
        times,
        values,
    })
}
