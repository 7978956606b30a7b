//! Mutation kernels and their discretization on the trait lattice.

use serde::{Deserialize, Serialize};
use statrs::function::{erf::erfc, gamma};

use super::grid::TraitGrid;
use super::quadrature::adaptive_simpson;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// A symmetric mutation density `G` on the real line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    /// Centered normal density with standard deviation `sigma`.
    Gaussian { sigma: f64 },
    /// `G(y) ∝ exp(-(|y|/scale)^shape)`. Super-exponential tails need `shape > 1`;
    /// `shape = 2` is a Gaussian with `sigma = scale / sqrt(2)`.
    GeneralizedGaussian { scale: f64, shape: f64 },
    /// `G(y) = exp(-|y|/scale) / (2 scale)`. Only exponential tails: refused by
    /// [`discretize_kernel`].
    Laplace { scale: f64 },
}

impl KernelSpec {
    pub fn name(&self) -> String {
        match self {
            KernelSpec::Gaussian { sigma } => format!("gaussian(sigma={sigma})"),
            KernelSpec::GeneralizedGaussian { scale, shape } => {
                format!("generalized_gaussian(scale={scale}, shape={shape})")
            }
            KernelSpec::Laplace { scale } => format!("laplace(scale={scale})"),
        }
    }

    fn check_params(&self) -> Result<()> {
        let ok = match *self {
            KernelSpec::Gaussian { sigma } => sigma > 0.0 && sigma.is_finite(),
            KernelSpec::GeneralizedGaussian { scale, shape } => {
                scale > 0.0 && shape > 0.0 && scale.is_finite() && shape.is_finite()
            }
            KernelSpec::Laplace { scale } => scale > 0.0 && scale.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param(
                "kernel",
                format!("bad parameters for {}", self.name()),
            ))
        }
    }

    /// True when every exponential moment is finite, with an analytic tail bound.
    pub fn has_superexponential_tail(&self) -> bool {
        match *self {
            KernelSpec::Gaussian { .. } => true,
            KernelSpec::GeneralizedGaussian { shape, .. } => shape > 1.0,
            KernelSpec::Laplace { .. } => false,
        }
    }

    pub fn density(&self, y: f64) -> f64 {
        match *self {
            KernelSpec::Gaussian { sigma } => {
                let z = y / sigma;
                (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
            }
            KernelSpec::GeneralizedGaussian { scale, shape } => {
                let norm = shape / (2.0 * scale * gamma::gamma(1.0 / shape));
                norm * (-(y.abs() / scale).powf(shape)).exp()
            }
            KernelSpec::Laplace { scale } => (-y.abs() / scale).exp() / (2.0 * scale),
        }
    }

    /// `P(|Y| > r)` in closed form.
    pub fn tail_mass(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 1.0;
        }
        match *self {
            KernelSpec::Gaussian { sigma } => erfc(r / (sigma * std::f64::consts::SQRT_2)),
            KernelSpec::GeneralizedGaussian { scale, shape } => {
                gamma::gamma_ur(1.0 / shape, (r / scale).powf(shape))
            }
            KernelSpec::Laplace { scale } => (-r / scale).exp(),
        }
    }

    /// Total variation of `G`: `2 G(0)` for these unimodal densities. First-order
    /// Riemann sums of `G` with step `h` are within `tv * h` of the integral.
    pub fn total_variation(&self) -> f64 {
        2.0 * self.density(0.0)
    }

    /// `ln M_G(q)` in closed form when the kernel has one.
    pub fn log_mgf_closed_form(&self, q: f64) -> Option<f64> {
        match *self {
            KernelSpec::Gaussian { sigma } => Some(0.5 * q * q * sigma * sigma),
            KernelSpec::GeneralizedGaussian { scale, shape } if shape == 2.0 => {
                let sigma = scale / std::f64::consts::SQRT_2;
                Some(0.5 * q * q * sigma * sigma)
            }
            _ => None,
        }
    }

    /// `d/dq M_G(q)` in closed form when available.
    pub fn mgf_derivative_closed_form(&self, q: f64) -> Option<f64> {
        let sigma = match *self {
            KernelSpec::Gaussian { sigma } => sigma,
            KernelSpec::GeneralizedGaussian { scale, shape } if shape == 2.0 => {
                scale / std::f64::consts::SQRT_2
            }
            _ => return None,
        };
        Some(q * sigma * sigma * (0.5 * q * q * sigma * sigma).exp())
    }

    /// `∫ y^power G(y) e^{q y} dy` by adaptive quadrature on a window around the
    /// integrand's peak; `power` is 0 (moment generating function) or 1 (its derivative).
    pub fn mgf_quadrature(&self, q: f64, power: i32, tol: f64) -> f64 {
        let log_f = |y: f64| self.density(y).ln() + q * y;
        // Peak of ln G(y) + q y.
        let peak = match *self {
            KernelSpec::Gaussian { sigma } => q * sigma * sigma,
            KernelSpec::GeneralizedGaussian { scale, shape } if shape > 1.0 => {
                q.signum() * scale * (q.abs() * scale / shape).powf(1.0 / (shape - 1.0))
            }
            _ => 0.0,
        };
        let top = log_f(peak);
        let mut reach = self.scale_length();
        while log_f(peak - reach) > top - 50.0 || log_f(peak + reach) > top - 50.0 {
            reach *= 1.5;
            if reach > 1e6 {
                break;
            }
        }
        let (lo, hi) = (peak - reach, peak + reach);
        let f = |y: f64| y.powi(power) * (log_f(y)).exp();
        let scale = top.exp() * self.scale_length() * (1.0 + peak.abs()).powi(power);
        adaptive_simpson(&f, lo, hi, tol * scale, 64)
    }

    fn scale_length(&self) -> f64 {
        match *self {
            KernelSpec::Gaussian { sigma } => sigma,
            KernelSpec::GeneralizedGaussian { scale, .. } | KernelSpec::Laplace { scale } => scale,
        }
    }
}

/// Truncated per-offset mutation rates `w_l = p h_K G(l h_K)`, `|l| <= radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteKernel<T> {
    weights: Vec<T>,
    radius: usize,
    tail_mass: T,
    total_rate: T,
    riemann_tol: T,
    p: T,
}

impl<T: Real> DiscreteKernel<T> {
    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Weights indexed by `l + radius`.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weight(&self, offset: i64) -> T {
        let r = self.radius as i64;
        if offset < -r || offset > r {
            T::zero()
        } else {
            self.weights[(offset + r) as usize]
        }
    }

    /// Offsets paired with their weights, from `-radius` to `radius`.
    pub fn offsets(&self) -> impl Iterator<Item = (i64, T)> + '_ {
        let r = self.radius as i64;
        self.weights
            .iter()
            .enumerate()
            .map(move |(k, &w)| (k as i64 - r, w))
    }

    /// Kernel mass discarded by the truncation (unscaled by `p`).
    pub fn tail_mass(&self) -> T {
        self.tail_mass
    }

    /// `mu = sum_l w_l`, the per-individual mutation event rate.
    pub fn total_rate(&self) -> T {
        self.total_rate
    }

    /// Declared bound on `|mu - p|`.
    pub fn riemann_tol(&self) -> T {
        self.riemann_tol
    }

    /// The Riemann defect `mu - p`.
    pub fn riemann_defect(&self) -> T {
        self.total_rate - self.p
    }

    pub fn p(&self) -> T {
        self.p
    }

    /// `sum_l w_l e^{c |l h|}`: the weighted kernel mass used by weighted-norm bounds.
    pub fn exponential_mass(&self, c: T, h: T) -> T {
        self.offsets()
            .map(|(l, w)| w * (c * (T::of_i64(l) * h).abs()).exp())
            .sum()
    }
}

/// Discretizes `spec` on `grid` for mutation rate `p`.
///
/// The radius is the smallest `L` whose Riemann cells `[(l - 1/2) h, (l + 1/2) h]`,
/// `|l| <= L`, leave at most `tail_tol` of kernel mass outside, evaluated with the
/// analytic tail.
pub fn discretize_kernel<T: Real>(
    spec: &KernelSpec,
    grid: &TraitGrid<T>,
    p: T,
    tail_tol: T,
) -> Result<DiscreteKernel<T>> {
    spec.check_params()?;
    if !spec.has_superexponential_tail() {
        return Err(Error::UnboundedKernelTail(spec.name()));
    }
    if !(p >= T::zero()) {
        return Err(Error::param(
            "p",
            format!("mutation rate must be nonnegative, got {p}"),
        ));
    }
    if !(tail_tol > T::zero()) {
        return Err(Error::param("tail_tol", "must be positive"));
    }
    let h = grid.h().as_f64();
    let tol = tail_tol.as_f64();
    let radius = truncation_radius(spec, h, tol);
    let weights: Vec<T> = (-(radius as i64)..=radius as i64)
        .map(|l| p * T::lit(h * spec.density(l as f64 * h)))
        .collect();
    let total_rate = weights.iter().copied().sum();
    let tail = spec.tail_mass((radius as f64 + 0.5) * h);
    let riemann_tol = p * T::lit(spec.total_variation() * h + tail);
    Ok(DiscreteKernel {
        weights,
        radius,
        tail_mass: T::lit(tail),
        total_rate,
        riemann_tol,
        p,
    })
}

fn truncation_radius(spec: &KernelSpec, h: f64, tol: f64) -> usize {
    let fits = |l: usize| spec.tail_mass((l as f64 + 0.5) * h) <= tol;
    if fits(0) {
        return 0;
    }
    let mut hi = 1usize;
    while !fits(hi) {
        hi *= 2;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if fits(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}
