//! Numerical viscosity solutions of `u_t = b(x) - d(x) + p M_G(u_x)`, the cut-off
//! limit and survival-set geometry.

mod cutoff;
mod reference;
mod schemes;
mod solution;

pub use cutoff::{
    apply_cutoff, classify_compact, cutoff_value, lipschitz_report, survival_set, CompactClass,
    CutoffSolution, CutoffValue, LipschitzReport, SurvivalSet,
};
pub use reference::{refine, solve_reference, ReferenceSolution, Refinement, RefinementOptions};
pub use schemes::{solve_hj, solve_lax_friedrichs, DEFAULT_SHARPNESS};
pub use solution::{pad_width, HjProblem, HjSolution, Scheme};
