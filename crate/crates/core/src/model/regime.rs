use serde::{Deserialize, Serialize};

use super::rates::RateTables;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeTag {
    Subcritical,
    Supercritical,
    Mixed,
}

/// Branching regime of a rate table; `alpha = max_i (b_i - d_i) + p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regime<T> {
    pub tag: RegimeTag,
    pub alpha: T,
    /// `b_i >= d_i` at every site. This can hold under a `Subcritical` tag
    /// when `alpha = 0`, e.g. critical sites without mutation.
    pub birth_dominates: bool,
}

pub fn classify_regime<T: Real>(rates: &RateTables<T>) -> Regime<T> {
    let sup_net = (0..rates.len())
        .map(|i| rates.net(i))
        .fold(T::neg_infinity(), T::max);
    let alpha = sup_net + rates.p;
    let birth_dominates = (0..rates.len()).all(|i| rates.birth[i] >= rates.death[i]);
    let tag = if alpha <= T::zero() {
        RegimeTag::Subcritical
    } else if birth_dominates {
        RegimeTag::Supercritical
    } else {
        RegimeTag::Mixed
    };
    Regime {
        tag,
        alpha,
        birth_dominates,
    }
}
