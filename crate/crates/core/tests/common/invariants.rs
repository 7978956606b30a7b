//! Property suites shared by the `properties` and `acceptance` targets. Each
//! suite drives a proptest runner from a fixed RNG, so a failure reproduces.

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestError, TestRng, TestRunner};

use hjlab::analysis::{Deviation, Exponent, InterpolatedField};
use hjlab::meanfield::{integrate_exponent, integrate_mean, Tolerances};
use hjlab::model::{Profile, RateProfiles};
use hjlab::sim::rng::derive_seed;
use hjlab::sim::{
    run_ensemble, sample_initial, simulate_exact, Collect, InitialMode, Moments, StochasticModel,
};
use hjlab::Model;

use super::spec;

pub type Suite = (&'static str, fn() -> Result<(), String>);

pub const SUITES: &[Suite] = &[
    (
        "subcritical mass monotonicity",
        subcritical_mass_monotonicity,
    ),
    ("supercritical floor", supercritical_floor),
    ("exponent/mean dual route", dual_route),
    ("interpolation max principle", interpolation_max_principle),
    ("determinism across worker counts", determinism),
];

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn report<T: std::fmt::Debug>(r: Result<(), TestError<T>>) -> Result<(), String> {
    r.map_err(|e| e.to_string())
}

/// Bump birth profile with the given base and amplitude.
fn bump(base: f64, amplitude: f64, center: f64, width: f64) -> Profile {
    Profile::GaussianBump {
        base,
        amplitude,
        center,
        width,
    }
}

fn rates(birth: Profile, death: f64, p: f64) -> RateProfiles {
    RateProfiles {
        birth,
        death: Profile::constant(death),
        mutation: p,
        birth_bound: 2.0,
        death_bound: death,
    }
}

const TIMES: [f64; 5] = [0.0, 0.25, 0.5, 1.0, 2.0];

pub fn subcritical_mass_monotonicity() -> Result<(), String> {
    let strategy = (
        0.0..0.5f64,
        0.0..0.3f64,
        -0.5..0.5f64,
        0.2..1.0f64,
        0.05..0.4f64,
        0.0..0.5f64,
        proptest::collection::vec(0.0..1.0f64, 19),
    );
    report(
        runner(48).run(&strategy, |(base, amp, center, width, p, margin, u0)| {
            let death = base + amp + p + margin;
            let model: Model = spec(
                3.0,
                -1.0,
                1.0,
                rates(bump(base, amp, center, width), death, p),
            )
            .build()
            .unwrap();
            prop_assert!(model.regime().alpha <= 0.0);
            let rate = model.regime().alpha + model.kernel().riemann_defect();
            let n0: Vec<f64> = u0.iter().map(|u| (3.0 * u).exp()).collect();
            let m = integrate_mean(&model, &n0, &TIMES, &Tolerances::mean_default()).unwrap();
            for a in 0..TIMES.len() {
                for b in a + 1..TIMES.len() {
                    let bound = m.total(a) * (rate * (TIMES[b] - TIMES[a])).exp();
                    prop_assert!(
                        m.total(b) <= bound * (1.0 + 1e-7),
                        "total {} at t = {} exceeds {} from t = {}",
                        m.total(b),
                        TIMES[b],
                        bound,
                        TIMES[a]
                    );
                }
            }
            Ok(())
        }),
    )
}

pub fn supercritical_floor() -> Result<(), String> {
    let strategy = (
        0.1..1.5f64,
        0.0..0.3f64,
        0.05..0.5f64,
        proptest::collection::vec(1.0..1000.0f64, 19),
    );
    report(runner(48).run(&strategy, |(death, extra, p, n0)| {
        let model: Model = spec(
            3.0,
            -1.0,
            1.0,
            rates(bump(death, extra, 0.0, 0.5), death, p),
        )
        .build()
        .unwrap();
        let m = integrate_mean(&model, &n0, &TIMES, &Tolerances::mean_default()).unwrap();
        let floor = n0.iter().copied().fold(f64::INFINITY, f64::min);
        for (k, row) in m.values.iter().enumerate() {
            let low = row.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert!(
                low >= floor * (1.0 - 1e-9),
                "min {low} below initial min {floor} at t = {}",
                TIMES[k]
            );
            for (i, (&v, &v0)) in row.iter().zip(&n0).enumerate() {
                prop_assert!(
                    v >= v0 * (1.0 - 1e-9),
                    "site {i} decreased from {v0} to {v}"
                );
            }
        }
        Ok(())
    }))
}

pub fn dual_route() -> Result<(), String> {
    let strategy = (
        2.0..6.0f64,
        0.0..0.6f64,
        0.5..1.5f64,
        0.05..0.5f64,
        0.0..1.5f64,
        0.0..1.5f64,
    );
    let tight = Tolerances::new(1e-12, 1e-14);
    report(
        runner(24).run(&strategy, |(ln_k, amp, death, p, peak, slope)| {
            let model: Model = spec(ln_k, -0.5, 0.5, rates(bump(0.3, amp, 0.1, 0.4), death, p))
                .build()
                .unwrap();
            let u0 = model.sample(&Profile::SmoothTent {
                peak,
                slope,
                width: 0.3,
            });
            let n0: Vec<f64> = u0.iter().map(|u| (ln_k * u).exp()).collect();
            let rescaled = [0.25, 0.5, 1.0];
            let plain: Vec<f64> = rescaled.iter().map(|t| t * ln_k).collect();
            let u = integrate_exponent(&model, &u0, &rescaled, &tight).unwrap();
            let m = integrate_mean(&model, &n0, &plain, &tight).unwrap();
            for k in 0..rescaled.len() {
                for (i, (&ue, &n)) in u.values[k].iter().zip(&m.values[k]).enumerate() {
                    let um = n.ln() / ln_k;
                    prop_assert!(
                        (ue - um).abs() <= 1e-8 * ue.abs().max(1.0),
                        "site {i}, t = {}: exponent route {ue}, mean route {um}",
                        rescaled[k]
                    );
                }
            }
            Ok(())
        }),
    )
}

pub fn interpolation_max_principle() -> Result<(), String> {
    let node =
        prop_oneof![4 => (-3.0..3.0f64).prop_map(Exponent::Finite), 1 => Just(Exponent::Extinct)];
    let strategy = (
        proptest::collection::vec(node, 2..40),
        0.01..0.5f64,
        -20i64..20,
        proptest::collection::vec(0.0..1.0f64, 16),
    );
    report(
        runner(256).run(&strategy, |(values, delta, i_min, probes)| {
            let f = InterpolatedField {
                delta,
                i_min,
                times: vec![0.0],
                values: vec![values.clone()],
            };
            for (j, &v) in values.iter().enumerate() {
                prop_assert_eq!(f.eval(0, f.x_at(j)), Some(v));
            }
            let (lo, hi) = f.domain();
            for s in probes {
                let x = lo + s * (hi - lo);
                let pos = ((x / delta) - i_min as f64).clamp(0.0, (values.len() - 1) as f64);
                let j = (pos.floor() as usize).min(values.len() - 2);
                let got = f.eval(0, x).unwrap();
                match (values[j], values[j + 1]) {
                    (Exponent::Finite(a), Exponent::Finite(b)) => {
                        let v = got.finite().unwrap();
                        prop_assert!(
                            v >= a.min(b) - 1e-12 && v <= a.max(b) + 1e-12,
                            "{v} outside [{a}, {b}]"
                        );
                    }
                    _ => {
                        let at_node = (pos - pos.round()).abs() < 1e-9;
                        prop_assert!(
                            got.is_extinct() || at_node,
                            "segment with an extinct end evaluated to {got:?}"
                        );
                    }
                }
            }
            Ok(())
        }),
    )
}

pub fn determinism() -> Result<(), String> {
    let strategy = (
        0.1..0.6f64,
        0.1..0.6f64,
        0.05..0.3f64,
        1u64..200,
        any::<u64>(),
        1usize..5,
    );
    report(
        runner(12).run(&strategy, |(b, d, p, replicates, seed, threads)| {
            let model: Model = super::constant_spec(3.0, -0.4, 0.4, b, d, p)
                .build()
                .unwrap();
            let sm = StochasticModel::new(&model);
            let means = vec![6.0; model.len()];
            let times = [0.5, 1.0];
            let job = |_: u64, s: u64| {
                let s0 = sample_initial(&means, InitialMode::Poisson, derive_seed(s, &[0]))?;
                simulate_exact(&sm, &s0, 1.0, &times, derive_seed(s, &[1]))
            };
            let mean = integrate_mean(&model, &means, &times, &Tolerances::mean_default()).unwrap();
            let run = |n: usize| {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .unwrap();
                pool.install(|| {
                    let moments = Moments {
                        observations: 2,
                        sites: model.len(),
                        cross: true,
                    };
                    let deviation = Deviation {
                        mean: &mean,
                        slots: 0..model.len(),
                    };
                    (
                        run_ensemble(replicates, seed, job, &Collect)
                            .unwrap()
                            .summary,
                        run_ensemble(replicates, seed, job, &moments)
                            .unwrap()
                            .summary,
                        run_ensemble(replicates, seed, job, &deviation)
                            .unwrap()
                            .summary,
                    )
                })
            };
            let one = run(1);
            let many = run(threads);
            prop_assert_eq!(&one.0, &many.0);
            prop_assert_eq!(&one.1, &many.1);
            prop_assert_eq!(&one.2, &many.2);
            let again = run(threads);
            prop_assert_eq!(&one.0, &again.0);
            prop_assert_eq!(one.0.len() as u64, replicates);
            Ok(())
        }),
    )
}
