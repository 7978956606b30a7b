use serde::{Deserialize, Serialize};

use super::systems::MomentTrajectory;
use crate::error::{Error, Result};
use crate::model::{Model, RegimeTag};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// `Y_i(t) <= exp((alpha + eps_K) t) sup_j Y_j(0) + C_B t`
    Subcritical,
    /// `E[S_i(t)^2] <= sup_j E[S_j(0)^2] + C_B t / K^a`
    Supercritical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub t: f64,
    pub site: i64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    /// Integration error allowance on `lhs`.
    pub slack: f64,
}

/// Outcome of a variance-bound check, with every constant computed from the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub alpha: f64,
    /// Riemann defect `sum_l w_l - p`.
    pub eps_k: f64,
    /// Supremum of `b_i + d_i + (w * m)_i / m_i` over the window and output times.
    pub c_b: f64,
    pub initial_sup: f64,
    /// `K^a` for the supercritical form, 1 otherwise.
    pub scale: f64,
    pub entries: Vec<BoundEntry>,
    pub min_margin: f64,
    /// Every margin is at least `-slack`.
    pub holds: bool,
}

impl BoundReport {
    fn assemble(
        kind: BoundKind,
        alpha: f64,
        eps_k: f64,
        c_b: f64,
        initial_sup: f64,
        scale: f64,
        entries: Vec<BoundEntry>,
    ) -> Self {
        let min_margin = entries
            .iter()
            .map(|e| e.margin)
            .fold(f64::INFINITY, f64::min);
        let holds = entries.iter().all(|e| e.margin >= -e.slack);
        BoundReport {
            kind,
            alpha,
            eps_k,
            c_b,
            initial_sup,
            scale,
            entries,
            min_margin,
            holds,
        }
    }

    /// One JSON object per `(t, site)` entry, after a summary line.
    pub fn to_json_lines(&self) -> String {
        let mut out = serde_json::json!({
            "record": "summary",
            "kind": self.kind,
            "alpha": self.alpha,
            "eps_k": self.eps_k,
            "c_b": self.c_b,
            "initial_sup": self.initial_sup,
            "scale": self.scale,
            "min_margin": self.min_margin,
            "holds": self.holds,
        })
        .to_string();
        out.push('\n');
        for e in &self.entries {
            let mut v = serde_json::to_value(e).expect("plain data serializes");
            v["record"] = "entry".into();
            out.push_str(&v.to_string());
            out.push('\n');
        }
        out
    }
}

/// `C_B`: sup over sites with positive mean and output times of the normalized bracket.
fn bracket_sup<T: Real>(model: &Model<T>, moments: &MomentTrajectory<T>) -> f64 {
    let rates = model.rates();
    let n = moments.sites;
    let mut conv = vec![T::zero(); n];
    let mut sup = 0.0f64;
    for m in &moments.mean {
        super::systems::convolve(model, m, &mut conv);
        for i in 0..n {
            if m[i] > T::zero() {
                let v = rates.birth[i] + rates.death[i] + conv[i] / m[i];
                sup = sup.max(v.as_f64());
            }
        }
    }
    sup
}

fn check_shape<T: Real>(model: &Model<T>, moments: &MomentTrajectory<T>) -> Result<()> {
    if moments.sites != model.len() {
        return Err(Error::param("moments", "window differs from the model"));
    }
    if moments.times.first().is_none_or(|t| *t != T::zero()) {
        return Err(Error::param("moments", "the first output time must be 0"));
    }
    Ok(())
}

/// Checks `Y_i(t) <= exp((alpha + eps_K) t) sup_j Y_j(0) + C_B t` at every output
/// time and site (simulation time).
pub fn check_variance_bound_subcritical<T: Real>(
    model: &Model<T>,
    moments: &MomentTrajectory<T>,
) -> Result<BoundReport> {
    check_shape(model, moments)?;
    let regime = model.regime();
    if regime.tag != RegimeTag::Subcritical {
        return Err(Error::Regime(format!(
            "subcritical bound needs alpha <= 0, got {}",
            regime.alpha
        )));
    }
    let alpha = regime.alpha.as_f64();
    let eps_k = model.kernel().riemann_defect().as_f64();
    let c_b = bracket_sup(model, moments);
    let initial_sup = (0..moments.sites)
        .filter_map(|i| moments.normalized_variance(0, i))
        .map(|y| y.as_f64())
        .fold(0.0, f64::max);
    let mut entries = Vec::new();
    for (k, t) in moments.times.iter().enumerate() {
        let t = t.as_f64();
        let rhs = ((alpha + eps_k) * t).exp() * initial_sup + c_b * t;
        for i in 0..moments.sites {
            if let Some(y) = moments.normalized_variance(k, i) {
                let lhs = y.as_f64();
                entries.push(BoundEntry {
                    t,
                    site: model.grid().site(i),
                    lhs,
                    rhs,
                    margin: rhs - lhs,
                    slack: moments.y_slack_f64(k, i),
                });
            }
        }
    }
    Ok(BoundReport::assemble(
        BoundKind::Subcritical,
        alpha,
        eps_k,
        c_b,
        initial_sup,
        1.0,
        entries,
    ))
}

/// Checks `E[S_i(t)^2] <= sup_j E[S_j(0)^2] + C_B t / K^a` (simulation time).
pub fn check_variance_bound_supercritical<T: Real>(
    model: &Model<T>,
    moments: &MomentTrajectory<T>,
    a: f64,
) -> Result<BoundReport> {
    check_shape(model, moments)?;
    let regime = model.regime();
    if !regime.birth_dominates {
        return Err(Error::Regime(
            "supercritical bound needs b >= d at every site".into(),
        ));
    }
    let ln_k = model.grid().ln_k().as_f64();
    let scale = (a * ln_k).exp();
    let floor = T::lit(scale);
    if moments.mean[0]
        .iter()
        .any(|&m| m < floor * T::lit(1.0 - 1e-12))
    {
        return Err(Error::param(
            "moments",
            "initial means must be at least K^a",
        ));
    }
    let eps_k = model.kernel().riemann_defect().as_f64();
    let c_b = bracket_sup(model, moments);
    let initial_sup = (0..moments.sites)
        .filter_map(|i| moments.relative_second_moment(0, i))
        .map(|v| v.as_f64())
        .fold(0.0, f64::max);
    let mut entries = Vec::new();
    for (k, t) in moments.times.iter().enumerate() {
        let t = t.as_f64();
        let rhs = initial_sup + c_b * t / scale;
        for i in 0..moments.sites {
            if let Some(v) = moments.relative_second_moment(k, i) {
                let m = moments.mean[k][i].as_f64();
                entries.push(BoundEntry {
                    t,
                    site: model.grid().site(i),
                    lhs: v.as_f64(),
                    rhs,
                    margin: rhs - v.as_f64(),
                    slack: moments.y_slack_f64(k, i) / m,
                });
            }
        }
    }
    Ok(BoundReport::assemble(
        BoundKind::Supercritical,
        regime.alpha.as_f64(),
        eps_k,
        c_b,
        initial_sup,
        scale,
        entries,
    ))
}

/// `max_i E[S_i(t_k)^2]` at output index `k`.
pub fn max_relative_second_moment<T: Real>(moments: &MomentTrajectory<T>, k: usize) -> f64 {
    (0..moments.sites)
        .filter_map(|i| moments.relative_second_moment(k, i))
        .map(|v| v.as_f64())
        .fold(0.0, f64::max)
}

/// Ratios `v_j / v_{j+1}` along a ladder; a decaying sequence has ratios above one.
pub fn ladder_decay(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| w[0] / w[1]).collect()
}
