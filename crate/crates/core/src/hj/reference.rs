use serde::{Deserialize, Serialize};

use super::schemes::solve_hj;
use super::solution::{HjProblem, HjSolution, Scheme};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementOptions {
    /// Coarsest mesh step; each level halves it.
    pub dx0: f64,
    /// Stop once successive levels differ by less than this in sup norm.
    pub ref_tol: f64,
    pub min_levels: usize,
    pub max_levels: usize,
    /// Restrict the refinement and cross-scheme distances to `[a, b]`.
    pub compare_on: Option<(f64, f64)>,
}

impl Default for RefinementOptions {
    fn default() -> Self {
        RefinementOptions {
            dx0: 0.04,
            ref_tol: 5e-3,
            min_levels: 3,
            max_levels: 9,
            compare_on: None,
        }
    }
}

/// A refinement ladder of one scheme.
#[derive(Debug, Clone)]
pub struct Refinement {
    pub scheme: Scheme,
    pub finest: HjSolution<f64>,
    pub dxs: Vec<f64>,
    /// Sup distance between consecutive levels.
    pub diffs: Vec<f64>,
}

impl Refinement {
    /// `diff_k / diff_{k+1}`: about 2 for a first-order scheme in its asymptotic range.
    pub fn ratios(&self) -> Vec<f64> {
        self.diffs.windows(2).map(|w| w[0] / w[1]).collect()
    }

    pub fn error_estimate(&self) -> f64 {
        *self.diffs.last().expect("at least two levels")
    }
}

/// Runs `scheme` on `dx0, dx0/2, ...` until consecutive levels agree within `ref_tol`.
pub fn refine(problem: &HjProblem, scheme: Scheme, opts: &RefinementOptions) -> Result<Refinement> {
    let mut dx = opts.dx0;
    let mut prev = solve_hj::<f64>(problem, dx, None, scheme)?;
    let mut dxs = vec![dx];
    let mut diffs = Vec::new();
    for level in 1..opts.max_levels.max(2) {
        dx *= 0.5;
        let next = solve_hj::<f64>(problem, dx, None, scheme)?;
        let d = prev.sup_distance(&next, opts.compare_on);
        diffs.push(d);
        dxs.push(dx);
        prev = next;
        if level + 1 >= opts.min_levels && d < opts.ref_tol {
            return Ok(Refinement {
                scheme,
                finest: prev,
                dxs,
                diffs,
            });
        }
    }
    Err(Error::RefinementStalled {
        tolerance: opts.ref_tol,
        last: *diffs.last().unwrap_or(&f64::NAN),
    })
}

/// Reference solution from two cross-validated schemes.
#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub reference: Refinement,
    pub other: Refinement,
    /// Sup distance between the two finest solutions.
    pub cross_distance: f64,
    pub ref_tol: f64,
}

impl ReferenceSolution {
    pub fn solution(&self) -> &HjSolution<f64> {
        &self.reference.finest
    }

    pub fn error_estimate(&self) -> f64 {
        self.reference.error_estimate()
    }

    /// Default width of the undecided band around `{u = 0}`.
    pub fn default_band_tol(&self) -> f64 {
        2.0 * self.error_estimate().max(self.cross_distance)
    }
}

/// Refines both schemes (concurrently) and requires their finest solutions to agree
/// within `2 ref_tol`. The reference is the one on the finer mesh; on a tie, the one
/// with the smaller last refinement difference.
pub fn solve_reference(problem: &HjProblem, opts: &RefinementOptions) -> Result<ReferenceSolution> {
    let (a, b) = rayon::join(
        || refine(problem, Scheme::NonlocalExponential, opts),
        || refine(problem, Scheme::LocalUpwind, opts),
    );
    let (a, b) = (a?, b?);
    let (reference, other) = if a.finest.dx < b.finest.dx
        || (a.finest.dx == b.finest.dx && a.error_estimate() <= b.error_estimate())
    {
        (a, b)
    } else {
        (b, a)
    };
    let cross_distance = other
        .finest
        .sup_distance(&reference.finest, opts.compare_on);
    if cross_distance > 2.0 * opts.ref_tol {
        return Err(Error::SchemeDisagreement {
            distance: cross_distance,
            tolerance: 2.0 * opts.ref_tol,
        });
    }
    Ok(ReferenceSolution {
        reference,
        other,
        cross_distance,
        ref_tol: opts.ref_tol,
    })
}
