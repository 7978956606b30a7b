use thiserror::Error;

/// Errors raised by model construction, simulation and the numerical solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("mesh condition violated: delta_K = {delta} must lie in (0, 1/ln K = {bound})")]
    MeshCondition { delta: f64, bound: f64 },

    #[error("trait window [{x_min}, {x_max}] is empty or does not contain trait 0")]
    EmptyWindow { x_min: f64, x_max: f64 },

    #[error("kernel `{0}` has no declared super-exponential tail bound")]
    UnboundedKernelTail(String),

    #[error("exponential moment saturates at gradient {q}: exponent {exponent} exceeds the representable range")]
    Saturation { q: f64, exponent: f64 },

    #[error("population cap {cap} exceeded at time {time}")]
    PopulationCap { cap: u64, time: f64 },

    #[error("mutation offspring left the window at site {site} under the strict boundary policy (time {time})")]
    BoundaryViolation { site: i64, time: f64 },

    #[error("tau-leap channel mean {mean} exceeds the leap bound {bound}; reduce dt_leap")]
    LeapBound { mean: f64, bound: f64 },

    #[error("step size underflow at t = {t} (h = {h}); the system looks stiff, retry with the implicit fallback flag")]
    StepUnderflow { t: f64, h: f64 },

    #[error("integrator exceeded {0} steps")]
    TooManySteps(usize),

    #[error(
        "exponent overflow at site {site}: the window is too small or the Lipschitz bound blew up"
    )]
    ExponentOverflow { site: usize },

    #[error(
        "second-moment window has {sites} sites, above the budget of {budget}; reduce the window"
    )]
    MomentBudget { sites: usize, budget: usize },

    #[error("CFL violation: dt = {dt} exceeds the monotone bound; use dt <= {suggested}")]
    Cfl { dt: f64, suggested: f64 },

    #[error("schemes disagree: sup distance {distance} above tolerance {tolerance}")]
    SchemeDisagreement { distance: f64, tolerance: f64 },

    #[error("mesh refinement did not reach tolerance {tolerance} (last difference {last})")]
    RefinementStalled { tolerance: f64, last: f64 },

    #[error("observation grid mismatch: {0}")]
    GridMismatch(String),

    #[error("compact [{a}, {b}] intersects the undecided band around {{u = 0}}")]
    UndecidedCompact { a: f64, b: f64 },

    #[error("data inconsistency: {0}")]
    Inconsistent(String),

    #[error("model regime mismatch: {0}")]
    Regime(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for the numerical diagnostics (step control, CFL, caps, overflow).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Saturation { .. }
                | Error::PopulationCap { .. }
                | Error::LeapBound { .. }
                | Error::StepUnderflow { .. }
                | Error::TooManySteps(_)
                | Error::ExponentOverflow { .. }
                | Error::MomentBudget { .. }
                | Error::Cfl { .. }
                | Error::SchemeDisagreement { .. }
                | Error::RefinementStalled { .. }
        )
    }
}
