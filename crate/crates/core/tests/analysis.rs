mod common;

use hjlab::analysis::{
    cutoff_experiment, deviation_experiment, deviation_stats, hopf_cole, interpolate,
    sup_distance_on_compact, wilson, CutoffSetup, DeviationSetup, Exponent, InterpolatedField,
};
use hjlab::hj::{solve_hj, CompactClass, HjProblem, HjSolution, Scheme};
use hjlab::meanfield::{integrate_mean, integrate_second_moments, Tolerances};
use hjlab::model::{Hamiltonian, KernelSpec, MeshRule, Profile, RateProfiles, TraitGrid};
use hjlab::sim::rng::derive_seed;
use hjlab::sim::{
    run_ensemble, sample_initial, simulate_exact, Collect, InitialMode, Snapshot, StochasticModel,
    Trajectory, WindowedEngine,
};
use hjlab::{Error, Model};
use proptest::prelude::*;

use common::{constant_spec, demo_u0, small_demo};

fn trajectory(i_min: i64, observations: &[(f64, Vec<u64>)]) -> Trajectory {
    Trajectory {
        seed: 0,
        i_min,
        t_end: observations.last().map_or(0.0, |o| o.0),
        snapshots: observations
            .iter()
            .map(|(t, c)| Snapshot {
                time: *t,
                counts: c.clone(),
            })
            .collect(),
        boundary_leak: 0,
        events: 0,
        extinct_at: None,
        clip_count: 0,
        event_log: None,
    }
}

#[test]
fn hopf_cole_examples() {
    let n = 5f64.exp().round() as u64;
    let traj = trajectory(-1, &[(0.0, vec![n, 0, 1]), (10.0, vec![1, 1, 0])]);
    let field = hopf_cole(&traj, 10.0, &[0.0, 1.0]).unwrap();
    let beta = field.values[0][0].finite().unwrap();
    assert!((beta - 0.5).abs() < 1e-3, "{beta}");
    assert_eq!(field.values[0][1], Exponent::Extinct);
    assert_eq!(field.values[0][2], Exponent::Finite(0.0));
    assert_eq!(field.i_min, -1);

    assert!(matches!(
        hopf_cole(&traj, 10.0, &[0.0]),
        Err(Error::GridMismatch(_))
    ));
    assert!(matches!(
        hopf_cole(&traj, 10.0, &[0.0, 2.0]),
        Err(Error::GridMismatch(_))
    ));
}

proptest! {
    #[test]
    fn rounding_stays_inside_the_envelope(ln_k in 1.0..10.0f64, us in proptest::collection::vec(0.0..1.5f64, 1..8)) {
        let means: Vec<f64> = us.iter().map(|u| (u * ln_k).exp()).collect();
        let counts: Vec<u64> = means.iter().map(|m| m.round() as u64).collect();
        let traj = trajectory(0, &[(ln_k, counts)]);
        let field = hopf_cole(&traj, ln_k, &[1.0]).unwrap();
        let floor = means.iter().cloned().fold(f64::INFINITY, f64::min);
        let envelope = 2f64.ln() / (ln_k * floor);
        for (v, u) in field.values[0].iter().zip(&us) {
            let beta = v.finite().unwrap();
            prop_assert!((beta - u).abs() <= envelope + 1e-12, "beta {beta}, u {u}, envelope {envelope}");
        }
    }
}

/// A three-node field on `x = 0, 0.5, 1`.
fn three_nodes(values: [Exponent; 3]) -> InterpolatedField {
    InterpolatedField {
        delta: 0.5,
        i_min: 0,
        times: vec![0.0],
        values: vec![values.to_vec()],
    }
}

#[test]
fn interpolation_examples() {
    let f = three_nodes([
        Exponent::Finite(0.2),
        Exponent::Finite(0.4),
        Exponent::Extinct,
    ]);
    assert_eq!(f.domain(), (0.0, 1.0));
    assert!((f.eval(0, 0.25).unwrap().finite().unwrap() - 0.3).abs() < 1e-15);
    assert_eq!(f.eval(0, 0.5), Some(Exponent::Finite(0.4)));
    assert_eq!(f.eval(0, 0.75), Some(Exponent::Extinct));
    assert_eq!(f.eval(0, 1.5), None);
    assert!(f.extinct_on(0, 0.9, 1.0));
    assert!(!f.extinct_on(0, 0.4, 1.0));
    assert!(f.extinct_on(0, 0.6, 0.9));
    assert!(!f.extinct_on(0, 0.1, 0.4));

    let flat = three_nodes([Exponent::Finite(0.7); 3]);
    for x in [0.0, 0.1, 0.33, 0.5, 0.99] {
        assert_eq!(flat.eval(0, x), Some(Exponent::Finite(0.7)));
    }
}

#[test]
fn interpolation_requires_the_matching_grid() {
    let grid = TraitGrid::<f64>::build(3.0, MeshRule::Default, 0.0, 2.0 / 9.0).unwrap();
    assert_eq!(grid.len(), 3);
    let traj = trajectory(0, &[(0.0, vec![5, 0, 2])]);
    let field = hopf_cole(&traj, 3.0, &[0.0]).unwrap();
    let f = interpolate(&field, &grid).unwrap();
    assert_eq!(f.values, field.values);
    assert!((f.delta - 1.0 / 9.0).abs() < 1e-15);

    let wider = TraitGrid::<f64>::build(3.0, MeshRule::Default, 0.0, 3.0 / 9.0).unwrap();
    assert!(matches!(
        interpolate(&field, &wider),
        Err(Error::GridMismatch(_))
    ));
    let shifted = trajectory(1, &[(0.0, vec![5, 0, 2])]);
    let field = hopf_cole(&shifted, 3.0, &[0.0]).unwrap();
    assert!(matches!(
        interpolate(&field, &grid),
        Err(Error::GridMismatch(_))
    ));
}

#[test]
fn sup_distance_examples() {
    let g = |x: f64| 0.2 + 0.4 * x;
    let f = three_nodes([
        Exponent::Finite(0.2),
        Exponent::Finite(0.4),
        Exponent::Finite(0.6),
    ]);
    assert!(sup_distance_on_compact(&f, 0, g, 0.0, 1.0).unwrap() < 1e-15);
    let d = sup_distance_on_compact(&f, 0, |x| g(x) + 0.1, 0.1, 0.9).unwrap();
    assert!((d - 0.1).abs() < 1e-12, "{d}");

    let holed = three_nodes([
        Exponent::Finite(0.2),
        Exponent::Finite(0.4),
        Exponent::Extinct,
    ]);
    assert_eq!(
        sup_distance_on_compact(&holed, 0, g, 0.6, 1.0).unwrap(),
        f64::INFINITY
    );
    assert!(sup_distance_on_compact(&holed, 0, g, 0.0, 0.5).unwrap() < 1e-15);
    assert!(sup_distance_on_compact(&f, 0, g, -0.5, 0.5).is_err());
}

fn single_site(b: f64, d: f64) -> Model {
    let model: Model = constant_spec(6.0, 0.0, 0.01, b, d, 0.0).build().unwrap();
    assert_eq!(model.len(), 1);
    model
}

#[test]
fn deviation_of_the_mean_itself_is_zero() {
    let model = single_site(1.0, 1.0);
    let times = [0.0, 1.0, 2.0];
    let mean = integrate_mean(&model, &[40.0], &times, &Tolerances::mean_default()).unwrap();
    let traj = trajectory(0, &times.map(|t| (t, vec![40])));
    let stats = deviation_stats([&traj, &traj], &mean, 0..1).unwrap();
    assert_eq!(stats.replicates, 2);
    for row in &stats.second {
        assert_eq!(row[0].value, 0.0);
        assert_eq!(row[0].se, 0.0);
    }
    assert_eq!(stats.exceedances(1e-12), 0);
}

fn collect(
    model: &StochasticModel,
    means: &[f64],
    times: &[f64],
    replicates: u64,
    seed: u64,
) -> Vec<Trajectory> {
    let t_end = *times.last().unwrap();
    let ens = run_ensemble(
        replicates,
        seed,
        |_, s| {
            let s0 = sample_initial(means, InitialMode::Poisson, derive_seed(s, &[0]))?;
            simulate_exact(model, &s0, t_end, times, derive_seed(s, &[1]))
        },
        &Collect,
    )
    .unwrap();
    assert!(ens.failures.is_empty());
    ens.summary.into_iter().map(|(_, t)| t).collect()
}

#[test]
fn pure_death_from_poisson_has_unit_normalized_variance() {
    let model = single_site(0.0, 1.0);
    let n0 = 50.0;
    let times = [0.0, 0.5, 1.0];
    let mean = integrate_mean(&model, &[n0], &times, &Tolerances::mean_default()).unwrap();
    let trajs = collect(&StochasticModel::new(&model), &[n0], &times, 4000, 77);
    let stats = deviation_stats(&trajs, &mean, 0..1).unwrap();
    for (k, &t) in times.iter().enumerate() {
        // A thinned Poisson law stays Poisson, so E[(N/n - 1)^2] = 1/n.
        let exact = 1.0 / (n0 * (-t).exp());
        let e = stats.second[k][0];
        assert!(
            (e.value - exact).abs() <= 3.0 * e.se,
            "t = {t}: {} +- {} vs {exact}",
            e.value,
            e.se
        );
    }
}

#[test]
fn deviations_match_the_moment_system() {
    let model: Model = small_demo(2).build().unwrap();
    assert_eq!(model.len(), 5);
    let means: Vec<f64> = model
        .sample(&demo_u0())
        .iter()
        .map(|u| (3.0 * u).exp())
        .collect();
    let times = [0.0, 1.0, 2.0];
    let tol = Tolerances::new(1e-10, 1e-12);
    let mean = integrate_mean(&model, &means, &times, &tol).unwrap();
    let mom = integrate_second_moments(&model, &means, InitialMode::Poisson, &times, &tol).unwrap();
    let trajs = collect(&StochasticModel::new(&model), &means, &times, 4000, 2024);
    let stats = deviation_stats(&trajs, &mean, 0..5).unwrap();
    for k in 0..times.len() {
        for i in 0..5 {
            let oracle = mom.relative_second_moment(k, i).unwrap();
            let e = stats.second[k][i];
            assert!(
                (e.value - oracle).abs() <= 3.5 * e.se,
                "t = {}, site {i}: {} +- {} vs {oracle}",
                times[k],
                e.value,
                e.se
            );
        }
    }
}

#[test]
fn deviation_stats_reject_inconsistent_input() {
    let model: Model = constant_spec(3.0, 0.0, 1.0 / 9.0, 1.0, 1.0, 0.0)
        .build()
        .unwrap();
    assert_eq!(model.len(), 2);
    let mean = integrate_mean(
        &model,
        &[0.0, 5.0],
        &[0.0, 1.0],
        &Tolerances::mean_default(),
    )
    .unwrap();
    let alive = trajectory(0, &[(0.0, vec![1, 5]), (1.0, vec![1, 5])]);
    assert!(matches!(
        deviation_stats([&alive], &mean, 0..2),
        Err(Error::Inconsistent(_))
    ));
    let late = trajectory(0, &[(0.0, vec![0, 5]), (2.0, vec![0, 5])]);
    assert!(matches!(
        deviation_stats([&late], &mean, 0..2),
        Err(Error::GridMismatch(_))
    ));
}

#[test]
fn wilson_examples() {
    let half = wilson(50, 100, 0.95).unwrap();
    assert!(
        (half.lower - 0.4038).abs() < 1e-4 && (half.upper - 0.5962).abs() < 1e-4,
        "{half:?}"
    );
    let all = wilson(100, 100, 0.95).unwrap();
    assert_eq!(all.upper, 1.0);
    assert!((all.lower - 0.9630).abs() < 1e-4, "{all:?}");
    assert!(all.above(0.95) && !all.below(0.99));
    assert!(wilson(1, 2, 1.0).is_err());
}

/// Constant rates with `H(0) = b - d + p = -0.25`, on `[-1, 1]`.
fn decaying_spec() -> hjlab::model::ModelSpec {
    constant_spec(5.0, -1.0, 1.0, 0.5, 1.0, 0.25)
}

/// Reference solution for a constant initial exponent under [`decaying_spec`].
fn flat_reference(u0: f64, times: &[f64]) -> HjSolution<f64> {
    let h = Hamiltonian::new(
        RateProfiles::constant(0.5, 1.0, 0.25),
        KernelSpec::Gaussian { sigma: 1.0 },
    )
    .unwrap();
    let pr = HjProblem::new(h, Profile::constant(u0), -1.0, 1.0, times.to_vec()).unwrap();
    solve_hj::<f64>(&pr, 0.05, None, Scheme::LocalUpwind).unwrap()
}

fn cutoff_setup(u0: f64, t: f64) -> CutoffSetup {
    CutoffSetup {
        spec: decaying_spec(),
        u0: Profile::constant(u0),
        initial: InitialMode::Poisson,
        ln_ks: vec![5.0],
        t,
        eta: 0.2,
        survival: vec![],
        extinction: vec![],
        replicates: 50,
        base_seed: 11,
    }
}

#[test]
fn survival_compact_stays_close_to_the_reference() {
    let mut setup = cutoff_setup(1.0, 1.0);
    setup.survival = vec![(-0.3, 0.3)];
    let reference = flat_reference(1.0, &[1.0]);
    let report = cutoff_experiment(&setup, &reference, 0.02).unwrap();
    let entry = report.entry(5.0, CompactClass::Survival).next().unwrap();
    assert_eq!(entry.probability.successes, 0);
    assert_eq!(entry.probability.trials, 50);
    assert!(entry.median_distance.unwrap() < 0.1, "{entry:?}");
    assert_eq!(report.rows.len(), 50);
    assert!(report.failures.is_empty());

    // Same seed, same report.
    assert_eq!(cutoff_experiment(&setup, &reference, 0.02).unwrap(), report);
}

#[test]
fn extinction_becomes_likely_as_k_grows() {
    let mut setup = cutoff_setup(0.5, 6.0);
    setup.extinction = vec![(-0.5, 0.5)];
    setup.ln_ks = vec![3.0, 5.0, 7.0];
    setup.replicates = 200;
    let reference = flat_reference(0.5, &[6.0]);
    assert!((reference.value_at(0, 0.0) + 1.0).abs() < 1e-9);
    let report = cutoff_experiment(&setup, &reference, 0.02).unwrap();
    let last = report.entry(7.0, CompactClass::Extinction).next().unwrap();
    assert!(last.probability.estimate >= 0.85, "{last:?}");
    assert_eq!(report.trends.len(), 1);
    assert!(report.trends[0].holds, "{:?}", report.entries);
}

#[test]
fn cutoff_experiment_guards_its_inputs() {
    let reference = flat_reference(0.5, &[2.0, 3.0]);
    let mut setup = cutoff_setup(0.5, 2.0);
    setup.extinction = vec![(-0.5, 0.5)];
    // u vanishes identically at t = 2.
    assert!(matches!(
        cutoff_experiment(&setup, &reference, 0.02),
        Err(Error::UndecidedCompact { .. })
    ));
    setup.t = 3.0;
    setup.replicates = 0;
    assert!(matches!(
        cutoff_experiment(&setup, &reference, 0.02),
        Err(Error::InvalidParameter { .. })
    ));
    setup.replicates = 10;
    setup.t = 2.5;
    assert!(cutoff_experiment(&setup, &reference, 0.02).is_err());

    setup.t = 3.0;
    setup.spec = constant_spec(5.0, -1.0, 1.0, 1.0, 1.0, 0.25);
    assert!(matches!(
        cutoff_experiment(&setup, &reference, 0.02),
        Err(Error::Regime(_))
    ));
}

fn critical_setup(t_end: f64) -> DeviationSetup {
    DeviationSetup {
        spec: constant_spec(6.0, 0.0, 0.01, 1.0, 1.0, 0.0),
        a: 0.5,
        ln_ks: vec![6.0],
        half_width: 0.0,
        t_end,
        observations: 5,
        eta: 0.5,
        replicates: 2000,
        base_seed: 3,
        engine: WindowedEngine::Gillespie,
    }
}

#[test]
fn deviation_experiment_at_time_zero_sees_nothing() {
    let report = deviation_experiment(&critical_setup(0.0)).unwrap();
    assert_eq!(report.second_moments.len(), 1);
    assert_eq!(report.second_moments[0].max.value, 0.0);
    assert_eq!(report.entries[0].probability.successes, 0);
}

#[test]
fn critical_site_deviation_grows_linearly() {
    let (t_end, ln_k) = (0.5, 6.0f64);
    let report = deviation_experiment(&critical_setup(t_end)).unwrap();
    let n0 = (0.5 * ln_k).exp().ceil();
    // Var N(t) = (b + d) n0 t for a critical birth-death process.
    let exact = 2.0 * t_end * ln_k / n0;
    let m = &report.second_moments[0];
    assert!((m.t - t_end).abs() < 1e-12);
    assert!(
        (m.max.value - exact).abs() <= 3.0 * m.max.se,
        "{} +- {} vs {exact}",
        m.max.value,
        m.max.se
    );
}

#[test]
fn deviation_experiment_refuses_decaying_models() {
    let mut setup = critical_setup(0.5);
    setup.spec = constant_spec(6.0, 0.0, 0.01, 0.5, 1.0, 0.0);
    assert!(matches!(
        deviation_experiment(&setup),
        Err(Error::Regime(_))
    ));
    setup.spec = constant_spec(6.0, 0.0, 0.01, 1.0, 1.0, 0.0);
    setup.a = 1.5;
    assert!(deviation_experiment(&setup).is_err());
}
