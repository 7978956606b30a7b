#![allow(dead_code)]

pub mod invariants;

use hjlab::model::{KernelSpec, MeshRule, ModelSpec, Profile, RateProfiles};
use hjlab::sim::rng::derive_seed;
use hjlab::sim::{
    run_ensemble, sample_initial, simulate_exact, Ensemble, InitialMode, MomentSums, Moments,
    StochasticModel,
};

pub fn spec(ln_k: f64, x_min: f64, x_max: f64, rates: RateProfiles) -> ModelSpec {
    ModelSpec {
        ln_k,
        mesh: MeshRule::Default,
        x_min,
        x_max,
        rates,
        kernel: KernelSpec::Gaussian { sigma: 1.0 },
        tail_tol: 1e-12,
    }
}

pub fn constant_spec(ln_k: f64, x_min: f64, x_max: f64, b: f64, d: f64, p: f64) -> ModelSpec {
    spec(ln_k, x_min, x_max, RateProfiles::constant(b, d, p))
}

/// Birth bump on uniform death: `alpha = 0.5 - 1 + 0.3 = -0.2`.
pub fn demo_rates() -> RateProfiles {
    RateProfiles {
        birth: Profile::GaussianBump {
            base: 0.3,
            amplitude: 0.2,
            center: 0.0,
            width: 0.5,
        },
        death: Profile::constant(1.0),
        mutation: 0.3,
        birth_bound: 1.0,
        death_bound: 1.0,
    }
}

pub fn demo_spec(ln_k: f64, x_min: f64, x_max: f64) -> ModelSpec {
    spec(ln_k, x_min, x_max, demo_rates())
}

pub fn demo_u0() -> Profile {
    Profile::SmoothTent {
        peak: 1.0,
        slope: 1.0,
        width: 0.5,
    }
}

/// The demo rates at `ln K = 3` (`delta = 1/9`) on `2 * half + 1` sites.
pub fn small_demo(half: i64) -> ModelSpec {
    let edge = half as f64 / 9.0;
    demo_spec(3.0, -edge, edge)
}

/// Exact-simulation ensemble summarized by per-site moments, each replicate
/// starting from its own draw of `initial`.
pub fn exact_moments(
    model: &StochasticModel,
    means: &[f64],
    mode: InitialMode,
    times: &[f64],
    replicates: u64,
    base_seed: u64,
) -> Ensemble<MomentSums> {
    let t_end = *times.last().unwrap();
    let reducer = Moments {
        observations: times.len(),
        sites: means.len(),
        cross: false,
    };
    run_ensemble(
        replicates,
        base_seed,
        |_, seed| {
            let s0 = sample_initial(means, mode, derive_seed(seed, &[0]))?;
            simulate_exact(model, &s0, t_end, times, derive_seed(seed, &[1]))
        },
        &reducer,
    )
    .unwrap()
}

pub fn gaussian_density(y: f64, sigma: f64) -> f64 {
    (-(y * y) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Law at time `t` of a two-site branching chain with per-individual birth `b`,
/// death `d` and mutation weights `w[l + 1]` for offsets `l = -1, 0, 1` (mutants
/// landing elsewhere leave the window), truncated to total population `<= cap`.
///
/// Computed by uniformization of the truncated generator, independently of the
/// simulator. Returns `p[n0][n1]`; mass escaping the cap is dropped.
pub fn two_site_law(
    b: f64,
    d: f64,
    w: [f64; 3],
    start: (usize, usize),
    cap: usize,
    t: f64,
) -> Vec<Vec<f64>> {
    let idx = |n0: usize, n1: usize| n0 * (cap + 1) + n1;
    let states = (cap + 1) * (cap + 1);
    // Transitions out of (n0, n1): (target or None for "beyond cap", rate).
    let transitions = |n0: usize, n1: usize| -> Vec<(Option<(usize, usize)>, f64)> {
        let up = |a: usize, c: usize| (a + c <= cap).then_some((a, c));
        let (f0, f1) = (n0 as f64, n1 as f64);
        let mut v = Vec::new();
        // Births and self-mutations add one at the source site.
        v.push((up(n0 + 1, n1), f0 * (b + w[1]) + f1 * w[0]));
        v.push((up(n0, n1 + 1), f1 * (b + w[1]) + f0 * w[2]));
        if n0 > 0 {
            v.push((Some((n0 - 1, n1)), f0 * d));
        }
        if n1 > 0 {
            v.push((Some((n0, n1 - 1)), f1 * d));
        }
        v
    };
    let mut lambda: f64 = 0.0;
    for n0 in 0..=cap {
        for n1 in 0..=cap - n0 {
            lambda = lambda.max(transitions(n0, n1).iter().map(|(_, r)| r).sum());
        }
    }
    let mut p = vec![0.0; states];
    p[idx(start.0, start.1)] = 1.0;
    let mut acc = vec![0.0; states];
    let lt = lambda * t;
    let mut weight = (-lt).exp();
    let mut k = 0u32;
    let mut cumulative = 0.0;
    while cumulative < 1.0 - 1e-15 && k < 10_000 {
        for (a, &v) in acc.iter_mut().zip(&p) {
            *a += weight * v;
        }
        cumulative += weight;
        let mut next = vec![0.0; states];
        for n0 in 0..=cap {
            for n1 in 0..=cap - n0 {
                let mass = p[idx(n0, n1)];
                if mass == 0.0 {
                    continue;
                }
                let mut out = 0.0;
                for (target, rate) in transitions(n0, n1) {
                    out += rate;
                    if let Some((a, c)) = target {
                        next[idx(a, c)] += mass * rate / lambda;
                    }
                }
                next[idx(n0, n1)] += mass * (1.0 - out / lambda);
            }
        }
        p = next;
        k += 1;
        weight *= lt / k as f64;
    }
    (0..=cap)
        .map(|n0| (0..=cap).map(|n1| acc[idx(n0, n1)]).collect())
        .collect()
}
