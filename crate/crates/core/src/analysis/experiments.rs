use serde::{Deserialize, Serialize};

use super::field::{hopf_cole, interpolate, sup_distance_on_compact};
use super::stats::{wilson, Deviation, DeviationStats, Proportion};
use crate::error::{Error, Result};
use crate::hj::{classify_compact, survival_set, CompactClass, HjSolution};
use crate::meanfield::{integrate_mean, Tolerances};
use crate::model::{ModelSpec, Profile, RegimeTag};
use crate::sim::{
    rng::derive_seed, run_ensemble, sample_initial, simulate_exact,
    simulate_windowed_supercritical, Estimate, InitialMode, PopulationState, Reducer,
    ReplicateFailure, StochasticModel, Trajectory, WindowedEngine,
};

/// Confidence level of every reported interval.
pub const CONFIDENCE: f64 = 0.95;

/// Outcome of one replicate on one compact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub ln_k: f64,
    pub replicate: u64,
    pub t: f64,
    pub a: f64,
    pub b: f64,
    pub class: CompactClass,
    /// Sup distance to the reference (survival compacts; `+inf` if extinct somewhere).
    pub sup_distance: Option<f64>,
    pub extinct: bool,
}

/// Aggregate over replicates for one (K, t, compact).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactEntry {
    pub ln_k: f64,
    pub t: f64,
    pub a: f64,
    pub b: f64,
    pub class: CompactClass,
    /// `P(sup distance > eta)` on survival compacts, `P(extinct on [a, b])` on
    /// extinction compacts.
    pub probability: Proportion,
    pub median_distance: Option<f64>,
}

/// Largest `E[(N/n - 1)^2]` over the observed (t, x) cells at one K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondMomentEntry {
    pub ln_k: f64,
    pub max: Estimate,
    pub t: f64,
    pub x: f64,
}

/// `C / (eta^2 delta_K K^{a/2})` with `C` the smallest constant dominating the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub c: f64,
    pub values: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendFlag {
    pub description: String,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub experiment: String,
    pub eta: f64,
    pub replicates: u64,
    pub entries: Vec<CompactEntry>,
    pub second_moments: Vec<SecondMomentEntry>,
    pub envelope: Option<Envelope>,
    pub trends: Vec<TrendFlag>,
    pub rows: Vec<ReplicateRow>,
    pub failures: Vec<(f64, ReplicateFailure)>,
}

impl ConvergenceReport {
    pub fn entry(&self, ln_k: f64, class: CompactClass) -> impl Iterator<Item = &CompactEntry> {
        self.entries
            .iter()
            .filter(move |e| e.ln_k == ln_k && e.class == class)
    }

    /// Summary lines: one object per entry, second moment, envelope and trend.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        let mut push = |kind: &str, v: serde_json::Value| {
            let mut obj = serde_json::json!({ "record": kind, "experiment": self.experiment });
            if let (Some(o), serde_json::Value::Object(m)) = (obj.as_object_mut(), v) {
                o.extend(m);
            }
            out.push_str(&obj.to_string());
            out.push('\n');
        };
        for e in &self.entries {
            push("compact", serde_json::to_value(e).expect("serializable"));
        }
        for m in &self.second_moments {
            push(
                "second_moment",
                serde_json::to_value(m).expect("serializable"),
            );
        }
        if let Some(env) = &self.envelope {
            push("envelope", serde_json::to_value(env).expect("serializable"));
        }
        for t in &self.trends {
            push("trend", serde_json::to_value(t).expect("serializable"));
        }
        for (ln_k, f) in &self.failures {
            push(
                "failure",
                serde_json::json!({ "ln_k": ln_k, "replicate": f.replicate, "seed": f.seed, "error": f.error }),
            );
        }
        out
    }

    /// Per-replicate CSV: `ln_k,replicate,t,a,b,class,sup_distance,extinct`.
    pub fn rows_csv(&self) -> String {
        let mut out = String::from("ln_k,replicate,t,a,b,class,sup_distance,extinct\n");
        for r in &self.rows {
            let class = match r.class {
                CompactClass::Survival => "survival",
                CompactClass::Extinction => "extinction",
            };
            let d = r.sup_distance.map_or(String::new(), |d| d.to_string());
            out.push_str(&format!(
                "{},{},{},{},{},{class},{d},{}\n",
                r.ln_k, r.replicate, r.t, r.a, r.b, r.extinct
            ));
        }
        out
    }
}

/// Setup of the convergence experiment for the cut-off exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffSetup {
    pub spec: ModelSpec,
    pub u0: Profile,
    pub initial: InitialMode,
    pub ln_ks: Vec<f64>,
    /// Rescaled observation time.
    pub t: f64,
    pub eta: f64,
    pub survival: Vec<(f64, f64)>,
    pub extinction: Vec<(f64, f64)>,
    pub replicates: u64,
    pub base_seed: u64,
}

/// Maps trajectories to rows; keeps them in replicate order.
struct Rows<F>(F);

impl<F> Reducer for Rows<F>
where
    F: Fn(u64, &Trajectory) -> Result<Vec<ReplicateRow>> + Sync,
{
    type Acc = Result<Vec<ReplicateRow>>;

    fn empty(&self) -> Self::Acc {
        Ok(Vec::new())
    }

    fn observe(&self, acc: &mut Self::Acc, replicate: u64, traj: &Trajectory) {
        if let Ok(rows) = acc {
            match (self.0)(replicate, traj) {
                Ok(r) => rows.extend(r),
                Err(e) => *acc = Err(e),
            }
        }
    }

    fn merge(&self, left: Self::Acc, right: Self::Acc) -> Self::Acc {
        let mut left = left?;
        left.extend(right?);
        Ok(left)
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}

/// Empirical check that `ln N / ln K`, cut off at zero, approaches the viscosity
/// solution on survival compacts and that extinction compacts empty out.
///
/// Every compact is first validated against `reference` at time `t`: survival
/// compacts must lie inside the survival set with `u > band_tol`, extinction
/// compacts must have `u < -band_tol`.
pub fn cutoff_experiment(
    setup: &CutoffSetup,
    reference: &HjSolution<f64>,
    band_tol: f64,
) -> Result<ConvergenceReport> {
    if setup.replicates == 0 {
        return Err(Error::param("replicates", "need at least one replicate"));
    }
    if !(setup.t > 0.0) || !(setup.eta > 0.0) {
        return Err(Error::param("t, eta", "both must be positive"));
    }
    let k_ref = reference.time_index(setup.t).ok_or_else(|| {
        Error::param(
            "t",
            format!("{} is not an output time of the reference", setup.t),
        )
    })?;
    let survival = survival_set(reference, setup.t)?;
    for &(a, b) in &setup.survival {
        if classify_compact(reference, setup.t, a, b, band_tol)? != CompactClass::Survival
            || !survival.contains(a, b)
        {
            return Err(Error::UndecidedCompact { a, b });
        }
    }
    for &(a, b) in &setup.extinction {
        if classify_compact(reference, setup.t, a, b, band_tol)? != CompactClass::Extinction {
            return Err(Error::UndecidedCompact { a, b });
        }
    }

    let mut report = ConvergenceReport {
        experiment: "cutoff_convergence".into(),
        eta: setup.eta,
        replicates: setup.replicates,
        entries: Vec::new(),
        second_moments: Vec::new(),
        envelope: None,
        trends: Vec::new(),
        rows: Vec::new(),
        failures: Vec::new(),
    };
    let g = |x: f64| reference.value_at(k_ref, x);

    for (level, &ln_k) in setup.ln_ks.iter().enumerate() {
        let model = setup.spec.with_ln_k(ln_k).build::<f64>()?;
        if model.regime().tag != RegimeTag::Subcritical {
            return Err(Error::Regime(format!(
                "needs alpha <= 0, got {:?}",
                model.regime().tag
            )));
        }
        let grid = model.grid().clone();
        let (lo, hi) = (grid.x_at(0), grid.x_at(grid.len() - 1));
        if let Some(&(a, b)) = setup
            .survival
            .iter()
            .chain(&setup.extinction)
            .find(|(a, b)| *a < lo || *b > hi)
        {
            return Err(Error::param(
                "compact",
                format!("[{a}, {b}] leaves the model window [{lo}, {hi}]"),
            ));
        }
        let sm = StochasticModel::new(&model);
        let means: Vec<f64> = model
            .sample(&setup.u0)
            .iter()
            .map(|u| (u * ln_k).exp())
            .collect();
        let t_plain = setup.t * ln_k;
        let job = |_r: u64, seed: u64| -> Result<Trajectory> {
            let state0 = sample_initial(&means, setup.initial, derive_seed(seed, &[0]))?;
            simulate_exact(&sm, &state0, t_plain, &[t_plain], derive_seed(seed, &[1]))
        };
        let rows = Rows(|replicate: u64, traj: &Trajectory| {
            let field = interpolate(&hopf_cole(traj, ln_k, &[setup.t])?, &grid)?;
            let mut out = Vec::new();
            for &(a, b) in &setup.survival {
                let d = sup_distance_on_compact(&field, 0, g, a, b)?;
                let extinct = field.extinct_on(0, a, b);
                out.push(ReplicateRow {
                    ln_k,
                    replicate,
                    t: setup.t,
                    a,
                    b,
                    class: CompactClass::Survival,
                    sup_distance: Some(d),
                    extinct,
                });
            }
            for &(a, b) in &setup.extinction {
                let extinct = field.extinct_on(0, a, b);
                out.push(ReplicateRow {
                    ln_k,
                    replicate,
                    t: setup.t,
                    a,
                    b,
                    class: CompactClass::Extinction,
                    sup_distance: None,
                    extinct,
                });
            }
            Ok(out)
        });
        let seed = derive_seed(setup.base_seed, &[level as u64]);
        let ens = run_ensemble(setup.replicates, seed, job, &rows)?;
        let rows = ens.summary?;
        report
            .failures
            .extend(ens.failures.into_iter().map(|f| (ln_k, f)));

        for (class, compacts) in [
            (CompactClass::Survival, &setup.survival),
            (CompactClass::Extinction, &setup.extinction),
        ] {
            for &(a, b) in compacts {
                let mine: Vec<&ReplicateRow> = rows
                    .iter()
                    .filter(|r| r.class == class && r.a == a && r.b == b)
                    .collect();
                if mine.is_empty() {
                    return Err(Error::param(
                        "replicates",
                        format!("every replicate failed at ln K = {ln_k}"),
                    ));
                }
                let hits = match class {
                    CompactClass::Survival => mine
                        .iter()
                        .filter(|r| r.sup_distance.is_some_and(|d| d > setup.eta))
                        .count(),
                    CompactClass::Extinction => mine.iter().filter(|r| r.extinct).count(),
                };
                report.entries.push(CompactEntry {
                    ln_k,
                    t: setup.t,
                    a,
                    b,
                    class,
                    probability: wilson(hits as u64, mine.len() as u64, CONFIDENCE)?,
                    median_distance: median(mine.iter().filter_map(|r| r.sup_distance).collect()),
                });
            }
        }
        report.rows.extend(rows);
    }

    if setup.ln_ks.len() > 1 {
        for (class, compacts, word) in [
            (CompactClass::Survival, &setup.survival, "non-increasing"),
            (
                CompactClass::Extinction,
                &setup.extinction,
                "non-decreasing",
            ),
        ] {
            for &(a, b) in compacts {
                let ps: Vec<f64> = setup
                    .ln_ks
                    .iter()
                    .filter_map(|&k| {
                        report
                            .entries
                            .iter()
                            .find(|e| e.ln_k == k && e.class == class && e.a == a && e.b == b)
                    })
                    .map(|e| e.probability.estimate)
                    .collect();
                let holds = ps.windows(2).all(|w| match class {
                    CompactClass::Survival => w[1] <= w[0],
                    CompactClass::Extinction => w[1] >= w[0],
                });
                let what = if class == CompactClass::Survival {
                    "P(sup distance > eta)"
                } else {
                    "P(extinct)"
                };
                report.trends.push(TrendFlag {
                    description: format!("{what} on [{a}, {b}] {word} in K"),
                    holds,
                });
            }
        }
    }
    Ok(report)
}

/// Setup of the relative-deviation experiment on a windowed supercritical model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationSetup {
    pub spec: ModelSpec,
    /// Initial sizes are `ceil(K^a)` at every site.
    pub a: f64,
    pub ln_ks: Vec<f64>,
    /// Half-width `D` of the compact `[-D, D]`.
    pub half_width: f64,
    /// Rescaled horizon `T`.
    pub t_end: f64,
    /// Number of equally spaced observation times in `(0, T]`; time 0 is always observed.
    pub observations: usize,
    pub eta: f64,
    pub replicates: u64,
    pub base_seed: u64,
    #[serde(default)]
    pub engine: WindowedEngine,
}

/// Estimates `P(sup_{[0,T] x [-D,D]} |N/n - 1| > eta)` and `E[(N/n - 1)^2]` per K
/// and overlays `C / (eta^2 delta_K K^{a/2})` with a fitted `C`.
pub fn deviation_experiment(setup: &DeviationSetup) -> Result<ConvergenceReport> {
    if setup.replicates == 0 {
        return Err(Error::param("replicates", "need at least one replicate"));
    }
    if !(setup.a > 0.0 && setup.a < 1.0) {
        return Err(Error::param(
            "a",
            format!("must lie in (0, 1), got {}", setup.a),
        ));
    }
    if !(setup.t_end >= 0.0) || !(setup.eta > 0.0) || !(setup.half_width >= 0.0) {
        return Err(Error::param(
            "T, eta, D",
            "T and D must be nonnegative, eta positive",
        ));
    }
    let steps = if setup.t_end > 0.0 {
        setup.observations.max(1)
    } else {
        0
    };
    let rescaled: Vec<f64> = (0..=steps)
        .map(|k| setup.t_end * k as f64 / steps.max(1) as f64)
        .collect();

    let mut report = ConvergenceReport {
        experiment: "relative_deviation".into(),
        eta: setup.eta,
        replicates: setup.replicates,
        entries: Vec::new(),
        second_moments: Vec::new(),
        envelope: None,
        trends: Vec::new(),
        rows: Vec::new(),
        failures: Vec::new(),
    };
    let (d_lo, d_hi) = (-setup.half_width, setup.half_width);
    let mut c_fit: f64 = 0.0;
    let mut scale = Vec::new();

    for (level, &ln_k) in setup.ln_ks.iter().enumerate() {
        let model = setup.spec.with_ln_k(ln_k).build::<f64>()?;
        if !model.regime().birth_dominates {
            return Err(Error::Regime(format!(
                "needs b >= d everywhere, got {:?}",
                model.regime().tag
            )));
        }
        let grid = model.grid().clone();
        if d_lo < grid.x_at(0) || d_hi > grid.x_at(grid.len() - 1) {
            return Err(Error::param(
                "D",
                "the compact [-D, D] leaves the model window",
            ));
        }
        let slots = grid.slots_in(d_lo, d_hi);
        if slots.is_empty() {
            return Err(Error::param(
                "D",
                "the compact [-D, D] holds no lattice site",
            ));
        }
        let floor = (setup.a * ln_k).exp();
        let n0 = floor.ceil();
        let plain: Vec<f64> = rescaled.iter().map(|t| t * ln_k).collect();
        let mean = integrate_mean(
            &model,
            &vec![n0; model.len()],
            &plain,
            &Tolerances::mean_default(),
        )?;
        let state0 = PopulationState::new(vec![n0 as u64; model.len()]);
        let sm = StochasticModel::new(&model);
        let t_plain = *plain.last().expect("time 0 is always observed");
        let job = |_r: u64, seed: u64| {
            simulate_windowed_supercritical(
                &sm,
                &state0,
                floor,
                t_plain,
                &plain,
                seed,
                setup.engine,
            )
        };
        let reducer = Deviation {
            mean: &mean,
            slots: slots.clone(),
        };
        let ens = run_ensemble(
            setup.replicates,
            derive_seed(setup.base_seed, &[level as u64]),
            job,
            &reducer,
        )?;
        report
            .failures
            .extend(ens.failures.into_iter().map(|f| (ln_k, f)));
        let stats = DeviationStats::from_sums(&ens.summary, &rescaled)?;

        let p = wilson(stats.exceedances(setup.eta), stats.replicates, CONFIDENCE)?;
        let (max, o, slot) = stats.max_second();
        report.second_moments.push(SecondMomentEntry {
            ln_k,
            max,
            t: rescaled[o],
            x: grid.x_at(slot),
        });
        report.entries.push(CompactEntry {
            ln_k,
            t: setup.t_end,
            a: d_lo,
            b: d_hi,
            class: CompactClass::Survival,
            probability: p,
            median_distance: median(stats.sup.clone()),
        });
        for &(r, s) in ens.summary.sup.iter() {
            report.rows.push(ReplicateRow {
                ln_k,
                replicate: r,
                t: setup.t_end,
                a: d_lo,
                b: d_hi,
                class: CompactClass::Survival,
                sup_distance: Some(s),
                extinct: false,
            });
        }
        let s = setup.eta * setup.eta * grid.delta() * (0.5 * setup.a * ln_k).exp();
        c_fit = c_fit.max(p.estimate * s);
        scale.push((ln_k, s));
    }

    report.envelope = Some(Envelope {
        c: c_fit,
        values: scale.iter().map(|&(k, s)| (k, c_fit / s)).collect(),
    });
    let ps: Vec<f64> = report
        .entries
        .iter()
        .map(|e| e.probability.estimate)
        .collect();
    report.trends.push(TrendFlag {
        description: "P(sup |N/n - 1| > eta) non-increasing in K".into(),
        holds: ps.windows(2).all(|w| w[1] <= w[0]),
    });
    let ms: Vec<f64> = report.second_moments.iter().map(|m| m.max.value).collect();
    report.trends.push(TrendFlag {
        description: "max E[(N/n - 1)^2] decreasing in K".into(),
        holds: ms.windows(2).all(|w| w[1] < w[0]),
    });
    Ok(report)
}
