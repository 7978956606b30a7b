//! Static model data: trait lattice, rates, mutation kernel, Hamiltonian and regime.

mod assumptions;
mod grid;
mod hamiltonian;
mod kernel;
mod profile;
pub mod quadrature;
mod rates;
mod regime;

use serde::{Deserialize, Serialize};

pub use assumptions::{
    fit_initial_constants, verify_assumptions, AssumptionCheck, AssumptionReport, InitialConstants,
};
pub use grid::{MeshRule, TraitGrid};
pub use hamiltonian::{Hamiltonian, MGF_QUADRATURE_TOL};
pub use kernel::{discretize_kernel, DiscreteKernel, KernelSpec};
pub use profile::Profile;
pub use rates::{RateProfiles, RateTables};
pub use regime::{classify_regime, Regime, RegimeTag};

use crate::error::Result;
use crate::scalar::Real;

fn default_tail_tol() -> f64 {
    1e-12
}

/// Serializable description of a model on a finite trait window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// `ln K`; `K` itself overflows for the larger ladders.
    pub ln_k: f64,
    #[serde(default)]
    pub mesh: MeshRule,
    pub x_min: f64,
    pub x_max: f64,
    pub rates: RateProfiles,
    pub kernel: KernelSpec,
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
}

impl ModelSpec {
    pub fn with_ln_k(&self, ln_k: f64) -> Self {
        ModelSpec {
            ln_k,
            ..self.clone()
        }
    }

    pub fn with_window(&self, x_min: f64, x_max: f64) -> Self {
        ModelSpec {
            x_min,
            x_max,
            ..self.clone()
        }
    }

    pub fn build<T: Real>(&self) -> Result<Model<T>> {
        Model::build(self)
    }
}

/// A built model: grid, tabulated rates and discretized kernel. Immutable.
#[derive(Debug, Clone)]
pub struct Model<T> {
    spec: ModelSpec,
    grid: TraitGrid<T>,
    rates: RateTables<T>,
    kernel: DiscreteKernel<T>,
}

impl<T: Real> Model<T> {
    pub fn build(spec: &ModelSpec) -> Result<Self> {
        spec.rates.validate()?;
        let grid = TraitGrid::build(
            T::lit(spec.ln_k),
            spec.mesh,
            T::lit(spec.x_min),
            T::lit(spec.x_max),
        )?;
        let rates = spec.rates.tabulate(&grid);
        let kernel = discretize_kernel(
            &spec.kernel,
            &grid,
            T::lit(spec.rates.mutation),
            T::lit(spec.tail_tol),
        )?;
        Ok(Model {
            spec: spec.clone(),
            grid,
            rates,
            kernel,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn grid(&self) -> &TraitGrid<T> {
        &self.grid
    }

    pub fn rates(&self) -> &RateTables<T> {
        &self.rates
    }

    pub fn kernel(&self) -> &DiscreteKernel<T> {
        &self.kernel
    }

    pub fn kernel_spec(&self) -> &KernelSpec {
        &self.spec.kernel
    }

    pub fn regime(&self) -> Regime<T> {
        classify_regime(&self.rates)
    }

    pub fn hamiltonian(&self) -> Result<Hamiltonian> {
        Hamiltonian::new(self.spec.rates.clone(), self.spec.kernel.clone())
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// `mu = sum_l w_l`.
    pub fn mu(&self) -> T {
        self.kernel.total_rate()
    }

    /// Samples a profile on every node.
    pub fn sample(&self, profile: &Profile) -> Vec<T> {
        self.grid
            .nodes()
            .iter()
            .map(|x| T::lit(profile.eval(x.as_f64())))
            .collect()
    }
}
