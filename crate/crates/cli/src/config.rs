use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use hjlab::hj::RefinementOptions;
use hjlab::model::{KernelSpec, MeshRule, ModelSpec, Profile, RateProfiles, RegimeTag};
use hjlab::sim::{BoundaryPolicy, InitialMode, WindowedEngine};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// A complete experiment description, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    /// Declared regime; assumptions are checked against it. Defaults to the
    /// regime computed from the rates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<RegimeTag>,
    pub initial: InitialSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supercritical: Option<SupercriticalSection>,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hj: Option<HjSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// Exactly one of `ln_k` and `k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ln_k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default)]
    pub mesh: MeshRule,
    pub x_min: f64,
    pub x_max: f64,
    pub rates: RateProfiles,
    pub kernel: KernelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    /// Initial exponent: `n_i(0) = K^{u0(x_i)}`.
    pub u0: Profile,
    #[serde(default)]
    pub mode: InitialMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupercriticalSection {
    /// Initial sizes `ceil(K^a)` at every site; simulations use the windowed process.
    pub a: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_a: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Exact,
    TauLeap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Rescaled horizon; simulations run to `t_end * ln K`.
    pub t_end: f64,
    /// Rescaled observation times; defaults to `[t_end]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub observations: Vec<f64>,
    pub replicates: u64,
    pub base_seed: u64,
    #[serde(default)]
    pub policy: BoundaryPolicy,
    #[serde(default)]
    pub method: Method,
    /// Plain-time leap length for `method = "tau_leap"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_leap: Option<f64>,
    #[serde(default)]
    pub engine: WindowedEngine,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<u64>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            t_end: 1.0,
            observations: Vec::new(),
            replicates: 100,
            base_seed: 1,
            policy: BoundaryPolicy::Absorb,
            method: Method::Exact,
            dt_leap: None,
            engine: WindowedEngine::Gillespie,
            cap: None,
        }
    }
}

impl RunSection {
    pub fn observation_times(&self) -> Vec<f64> {
        if self.observations.is_empty() {
            vec![self.t_end]
        } else {
            self.observations.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HjSection {
    /// Solver window; defaults to the model window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_max: Option<f64>,
    pub times: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare_on: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dx0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ref_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_levels: Option<usize>,
}

impl HjSection {
    pub fn refinement(&self) -> RefinementOptions {
        let d = RefinementOptions::default();
        RefinementOptions {
            dx0: self.dx0.unwrap_or(d.dx0),
            ref_tol: self.ref_tol.unwrap_or(d.ref_tol),
            max_levels: self.max_levels.unwrap_or(d.max_levels),
            compare_on: self.compare_on,
            ..d
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompareKind {
    /// Cut-off exponent against the viscosity solution (subcritical).
    Cutoff,
    /// Relative deviation from the mean (windowed supercritical).
    Deviation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    pub kind: CompareKind,
    /// Defaults to the model's `ln K`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ln_ks: Vec<f64>,
    pub eta: f64,
    /// Cutoff: rescaled observation time (must be an `hj.times` entry).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub survival: Vec<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extinction: Vec<(f64, f64)>,
    /// Deviation: half-width `D` of `[-D, D]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    /// Deviation: number of observation times in `(0, run.t_end]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observations: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// Sup error of the exponent system against the HJ reference.
    Ladder,
    Cutoff,
    Deviation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub kind: SweepKind,
    pub ln_ks: Vec<f64>,
    /// Ladder: compact and rescaled time of the sup error.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compact: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Also write every trajectory (long CSV) from `simulate`.
    #[serde(default)]
    pub trajectories: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: default_dir(),
            trajectories: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        match (self.model.ln_k, self.model.k) {
            (Some(_), Some(_)) => bail!("model: give either `ln_k` or `k`, not both"),
            (None, None) => bail!("model: one of `ln_k` or `k` is required"),
            (None, Some(k)) if !(k >= 2.0) || !k.is_finite() => {
                bail!("model.k must be a finite number >= 2, got {k}")
            }
            _ => {}
        }
        if !(self.run.t_end >= 0.0) || !self.run.t_end.is_finite() {
            bail!("run.t_end must be finite and nonnegative");
        }
        if let Some(t) = self
            .run
            .observations
            .iter()
            .find(|t| !(**t >= 0.0 && **t <= self.run.t_end))
        {
            bail!(
                "run.observations: {t} lies outside [0, t_end = {}]",
                self.run.t_end
            );
        }
        if self.run.observations.windows(2).any(|w| w[1] <= w[0]) {
            bail!("run.observations must be strictly increasing");
        }
        if self.run.method == Method::TauLeap && self.run.dt_leap.is_none() {
            bail!("run.dt_leap is required for method = \"tau_leap\"");
        }
        Ok(())
    }

    pub fn ln_k(&self) -> f64 {
        self.model
            .ln_k
            .unwrap_or_else(|| self.model.k.expect("validated").ln())
    }

    pub fn spec(&self) -> ModelSpec {
        ModelSpec {
            ln_k: self.ln_k(),
            mesh: self.model.mesh,
            x_min: self.model.x_min,
            x_max: self.model.x_max,
            rates: self.model.rates.clone(),
            kernel: self.model.kernel.clone(),
            tail_tol: self.model.tail_tol.unwrap_or(1e-12),
        }
    }

    /// Canonical JSON: keys sorted, numbers in shortest round-trip form.
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes to JSON");
        serde_json::to_string(&value).expect("JSON value serializes")
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[model]
ln_k = 3.0
x_min = -0.5
x_max = 0.5
kernel = { kind = "gaussian", sigma = 1.0 }
[model.rates]
birth = { kind = "constant", value = 0.2 }
death = { kind = "constant", value = 1.0 }
mutation = 0.3
birth_bound = 1.0
death_bound = 1.0
[initial]
u0 = { kind = "constant", value = 1.0 }
"#;

    #[test]
    fn minimal_config_round_trips() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash(), again.hash());
        assert_eq!(cfg.spec().ln_k, 3.0);
    }

    #[test]
    fn k_or_ln_k() {
        let both = MINIMAL.replace("ln_k = 3.0", "ln_k = 3.0\nk = 20.0");
        assert!(ExperimentConfig::from_toml(&both).is_err());
        let k = MINIMAL.replace("ln_k = 3.0", "k = 20.0");
        let cfg = ExperimentConfig::from_toml(&k).unwrap();
        assert!((cfg.ln_k() - 20f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_toml(&format!("{MINIMAL}\n[bogus]\nx = 1\n")).is_err());
    }
}
