use serde::{Deserialize, Serialize};

use super::regime::{classify_regime, RegimeTag};
use super::Model;
use crate::scalar::Real;

/// One assumption check with the constant it measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub id: String,
    pub passed: bool,
    pub measured: Option<f64>,
    pub detail: String,
}

/// Constants fitted from the initial exponent profile on the window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialConstants {
    /// `max_i |u0_{i+1} - u0_i| / delta_K`
    pub lipschitz: f64,
    /// Decay envelope `u0 <= A_2 - A_1 |x|`.
    pub a1: f64,
    pub a2: f64,
    /// Growth envelope `u0 <= B + A |x|`.
    pub growth_a: f64,
    pub growth_b: f64,
    /// `C_A = 2A + 1`
    pub c_a: f64,
    /// `a = min_i u0_i`
    pub floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub regime: RegimeTag,
    pub alpha: f64,
    pub constants: InitialConstants,
    pub checks: Vec<AssumptionCheck>,
    /// `-ln(delta_K)/ln K`; the default mesh rule is a convention, flagged here.
    pub mesh_exponent: f64,
    pub default_mesh_rule: bool,
}

impl AssumptionReport {
    pub fn check(&self, id: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.id == id)
    }

    /// Identifiers required for a configuration declared to be in `regime`.
    pub fn required_for(regime: RegimeTag) -> &'static [&'static str] {
        const A: [&str; 4] = ["A-1", "A-2", "A-3", "A-5"];
        match regime {
            RegimeTag::Subcritical => &["A-1", "A-2", "A-3", "A-5", "B-1", "B-4"],
            RegimeTag::Supercritical => &["A-1", "A-2", "A-3", "A-5", "C-1", "C-2", "C-3"],
            RegimeTag::Mixed => &A,
        }
    }

    /// True when every assumption required by the declared regime passed.
    pub fn required_ok(&self, declared: RegimeTag) -> bool {
        Self::required_for(declared)
            .iter()
            .all(|id| self.check(id).is_some_and(|c| c.passed))
    }

    pub fn failures(&self, declared: RegimeTag) -> Vec<&AssumptionCheck> {
        Self::required_for(declared)
            .iter()
            .filter_map(|id| self.check(id))
            .filter(|c| !c.passed)
            .collect()
    }

    /// One JSON object per check, newline separated, preceded by a summary line.
    pub fn to_json_lines(&self) -> String {
        let summary = serde_json::json!({
            "record": "summary",
            "regime": self.regime,
            "alpha": self.alpha,
            "constants": self.constants,
            "mesh_exponent": self.mesh_exponent,
            "default_mesh_rule": self.default_mesh_rule,
        });
        let mut out = summary.to_string();
        out.push('\n');
        for c in &self.checks {
            let mut v = serde_json::to_value(c).expect("plain data serializes");
            v["record"] = "check".into();
            out.push_str(&v.to_string());
            out.push('\n');
        }
        out
    }
}

/// Fits the initial-data constants from exponent samples `u0` (one per site).
pub fn fit_initial_constants<T: Real>(xs: &[T], u0: &[T], delta: T) -> InitialConstants {
    assert_eq!(xs.len(), u0.len(), "one initial exponent per site");
    let xs: Vec<f64> = xs.iter().map(|x| x.as_f64()).collect();
    let u: Vec<f64> = u0.iter().map(|v| v.as_f64()).collect();
    let delta = delta.as_f64();

    let lipschitz = u
        .windows(2)
        .map(|w| (w[1] - w[0]).abs() / delta)
        .fold(0.0, f64::max);

    let a2 = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let a1 = xs
        .iter()
        .zip(&u)
        .filter(|(x, _)| x.abs() > 0.0)
        .map(|(x, v)| (a2 - v) / x.abs())
        .fold(f64::INFINITY, f64::min);
    let a1 = if a1.is_finite() { a1 } else { 0.0 };

    let at_zero = xs
        .iter()
        .zip(&u)
        .min_by(|a, b| a.0.abs().total_cmp(&b.0.abs()))
        .map(|(_, v)| *v)
        .unwrap_or(0.0);
    let growth_b = at_zero.max(0.0);
    let growth_a = xs
        .iter()
        .zip(&u)
        .filter(|(x, _)| x.abs() > 0.0)
        .map(|(x, v)| (v - growth_b) / x.abs())
        .fold(0.0, f64::max);

    InitialConstants {
        lipschitz,
        a1,
        a2,
        growth_a,
        growth_b,
        c_a: 2.0 * growth_a + 1.0,
        floor: u.iter().copied().fold(f64::INFINITY, f64::min),
    }
}

/// Checks the standing assumptions of `model` with initial exponents `u0`
/// (`n_i(0) = K^{u0_i}`). Report only; callers decide what to refuse.
pub fn verify_assumptions<T: Real>(model: &Model<T>, u0: &[T]) -> AssumptionReport {
    let grid = model.grid();
    let constants = fit_initial_constants(&grid.nodes(), u0, grid.delta());
    let regime = classify_regime(model.rates());
    let rates = model.rates();
    let mut checks = Vec::new();
    let mut push = |id: &str, passed: bool, measured: Option<f64>, detail: String| {
        checks.push(AssumptionCheck {
            id: id.to_string(),
            passed,
            measured,
            detail,
        });
    };

    push(
        "A-1",
        rates.within_bounds() && rates.p > T::zero(),
        Some(rates.p.as_f64()),
        format!(
            "0 <= b <= {}, 0 <= d <= {}, constant p > 0",
            rates.birth_bound, rates.death_bound
        ),
    );
    let kernel = model.kernel_spec();
    push(
        "A-2",
        kernel.has_superexponential_tail(),
        Some(model.kernel().tail_mass().as_f64()),
        format!("kernel {} (measured: discarded tail mass)", kernel.name()),
    );
    push(
        "A-3",
        constants.lipschitz.is_finite(),
        Some(constants.lipschitz),
        "discrete Lipschitz constant of u0".into(),
    );
    let delta = grid.delta().as_f64();
    let bound = 1.0 / grid.ln_k().as_f64();
    push(
        "A-5",
        delta > 0.0 && delta < bound,
        Some(delta),
        format!("delta_K in (0, 1/ln K = {bound})"),
    );
    push(
        "B-1",
        constants.a1 > 0.0 && constants.a2.is_finite(),
        Some(constants.a1),
        format!("u0 <= {} - {} |x|", constants.a2, constants.a1),
    );
    push(
        "B-4",
        regime.alpha <= T::zero(),
        Some(regime.alpha.as_f64()),
        "alpha = max(b - d) + p <= 0".into(),
    );
    push(
        "C-1",
        constants.growth_a.is_finite() && constants.growth_b.is_finite(),
        Some(constants.growth_a),
        format!(
            "u0 <= {} + {} |x|, C_A = {}",
            constants.growth_b, constants.growth_a, constants.c_a
        ),
    );
    push(
        "C-2",
        constants.floor > 0.0,
        Some(constants.floor),
        "n_i(0) >= K^a with a = min u0".into(),
    );
    let supercritical = (0..rates.len()).all(|i| rates.birth[i] >= rates.death[i]);
    push("C-3", supercritical, None, "b >= d at every site".into());

    AssumptionReport {
        regime: regime.tag,
        alpha: regime.alpha.as_f64(),
        constants,
        checks,
        mesh_exponent: grid.mesh_exponent().as_f64(),
        default_mesh_rule: matches!(model.spec().mesh, super::MeshRule::Default),
    }
}
