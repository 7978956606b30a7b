use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context};
use hjlab::analysis::{
    cutoff_experiment, deviation_experiment, ConvergenceReport, CutoffSetup, DeviationSetup,
};
use hjlab::hj::{
    apply_cutoff, lipschitz_report, solve_reference, survival_set, CutoffValue, HjProblem,
    ReferenceSolution,
};
use hjlab::meanfield::{
    check_variance_bound_subcritical, check_variance_bound_supercritical, integrate_exponent,
    integrate_mean, integrate_second_moments, Tolerances, MOMENT_BUDGET,
};
use hjlab::model::{verify_assumptions, AssumptionReport, Model, RegimeTag};
use hjlab::sim::{
    rng::derive_seed, run_ensemble, sample_initial, simulate_exact, simulate_tau_leap,
    simulate_windowed_supercritical, Collect, InitialMode, Moments, PopulationState, Reducer,
    StochasticModel, Trajectory,
};
use rayon::prelude::*;

use crate::config::{CompareKind, ExperimentConfig, Method, SweepKind};
use crate::output::{read_provenance, Outputs, Provenance};

/// Required assumptions failed for the declared regime.
#[derive(Debug)]
pub struct AssumptionFailure(pub String);

impl std::fmt::Display for AssumptionFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "assumption check failed: {}", self.0)
    }
}

impl std::error::Error for AssumptionFailure {}

pub struct Ctx {
    pub cfg: ExperimentConfig,
    pub hash: String,
    pub dir: PathBuf,
    pub force: bool,
    pub verify: bool,
}

impl Ctx {
    pub fn new(cfg: ExperimentConfig, dir: Option<PathBuf>, force: bool, verify: bool) -> Self {
        let hash = cfg.hash();
        let dir = dir.unwrap_or_else(|| cfg.output.dir.clone());
        Ctx {
            cfg,
            hash,
            dir,
            force,
            verify,
        }
    }

    /// Output set for `command`, starting with the effective configuration.
    fn outputs(&self, command: &str) -> anyhow::Result<Outputs> {
        let provenance = Provenance {
            command: command.into(),
            config_hash: self.hash.clone(),
            seed: self.cfg.run.base_seed,
        };
        let mut out = Outputs::new(self.dir.clone(), provenance, self.verify);
        let text = format!("{}{}", out.provenance.csv_comment(), self.cfg.to_toml());
        out.put(&format!("{command}.config.toml"), &text)?;
        Ok(out)
    }

    fn model(&self) -> anyhow::Result<Model<f64>> {
        Ok(self.cfg.spec().build::<f64>()?)
    }

    fn declared(&self, model: &Model<f64>) -> RegimeTag {
        self.cfg.regime.unwrap_or(model.regime().tag)
    }

    /// Initial means: `ceil(K^a)` in the supercritical setting, `K^{u0}` otherwise.
    fn initial_means(&self, model: &Model<f64>) -> Vec<f64> {
        let ln_k = model.grid().ln_k();
        match &self.cfg.supercritical {
            Some(s) => vec![(s.a * ln_k).exp().ceil(); model.len()],
            None => model
                .sample(&self.cfg.initial.u0)
                .iter()
                .map(|u| (u * ln_k).exp())
                .collect(),
        }
    }

    fn initial_mode(&self) -> InitialMode {
        if self.cfg.supercritical.is_some() {
            InitialMode::Deterministic
        } else {
            self.cfg.initial.mode
        }
    }

    fn report(&self, model: &Model<f64>) -> AssumptionReport {
        verify_assumptions(model, &model.sample(&self.cfg.initial.u0))
    }

    /// Runs the assumption check; unless `--force`, failure aborts.
    fn precheck(&self) -> anyhow::Result<Model<f64>> {
        let model = match self.model() {
            Ok(m) => m,
            Err(e) if self.force => {
                return Err(e.context("model cannot be built even with --force"))
            }
            Err(e) => return Err(e),
        };
        let declared = self.declared(&model);
        let report = self.report(&model);
        if !report.required_ok(declared) && !self.force {
            let ids: Vec<&str> = report
                .failures(declared)
                .iter()
                .map(|c| c.id.as_str())
                .collect();
            return Err(AssumptionFailure(format!(
                "{} failed for a {declared:?} configuration; run `check` for details or pass --force",
                ids.join(", ")
            ))
            .into());
        }
        Ok(model)
    }
}

pub fn check(ctx: &Ctx) -> anyhow::Result<Vec<PathBuf>> {
    let model = ctx.model()?;
    let declared = ctx.declared(&model);
    let report = ctx.report(&model);
    let mut body = report.to_json_lines();
    let ok = report.required_ok(declared);
    let _ = writeln!(
        body,
        "{}",
        serde_json::json!({ "record": "verdict", "declared": declared, "passed": ok })
    );
    print!("{body}");
    let mut out = ctx.outputs("check")?;
    out.jsonl("check.jsonl", &body)?;
    let files = out.finish()?;
    if !ok {
        let ids: Vec<&str> = report
            .failures(declared)
            .iter()
            .map(|c| c.id.as_str())
            .collect();
        return Err(AssumptionFailure(format!(
            "{} failed for a {declared:?} configuration",
            ids.join(", ")
        ))
        .into());
    }
    Ok(files)
}

struct Pair<A, B>(A, Option<B>);

impl<A: Reducer, B: Reducer> Reducer for Pair<A, B> {
    type Acc = (A::Acc, Option<B::Acc>);

    fn empty(&self) -> Self::Acc {
        (self.0.empty(), self.1.as_ref().map(|b| b.empty()))
    }

    fn observe(&self, acc: &mut Self::Acc, replicate: u64, traj: &Trajectory) {
        self.0.observe(&mut acc.0, replicate, traj);
        if let (Some(b), Some(acc)) = (self.1.as_ref(), acc.1.as_mut()) {
            b.observe(acc, replicate, traj);
        }
    }

    fn merge(&self, left: Self::Acc, right: Self::Acc) -> Self::Acc {
        let second = match (self.1.as_ref(), left.1, right.1) {
            (Some(b), Some(l), Some(r)) => Some(b.merge(l, r)),
            _ => None,
        };
        (self.0.merge(left.0, right.0), second)
    }
}

pub fn simulate(ctx: &Ctx) -> anyhow::Result<Vec<PathBuf>> {
    let model = ctx.precheck()?;
    let cfg = &ctx.cfg;
    let ln_k = model.grid().ln_k();
    let rescaled = cfg.run.observation_times();
    let plain: Vec<f64> = rescaled.iter().map(|t| t * ln_k).collect();
    let t_end = cfg.run.t_end * ln_k;
    let mut sm = StochasticModel::new(&model).with_policy(cfg.run.policy);
    if let Some(cap) = cfg.run.cap {
        sm = sm.with_cap(cap);
    }
    let means = ctx.initial_means(&model);
    let mode = ctx.initial_mode();
    let job = |_r: u64, seed: u64| -> hjlab::Result<Trajectory> {
        if let Some(s) = &cfg.supercritical {
            let state0 = PopulationState::new(means.iter().map(|&m| m as u64).collect());
            return simulate_windowed_supercritical(
                &sm,
                &state0,
                (s.a * ln_k).exp(),
                t_end,
                &plain,
                seed,
                cfg.run.engine,
            );
        }
        let state0 = sample_initial(&means, mode, derive_seed(seed, &[0]))?;
        match cfg.run.method {
            Method::Exact => simulate_exact(&sm, &state0, t_end, &plain, derive_seed(seed, &[1])),
            Method::TauLeap => {
                let dt = cfg.run.dt_leap.expect("validated");
                simulate_tau_leap(&sm, &state0, t_end, dt, &plain, derive_seed(seed, &[1]))
            }
        }
    };
    let reducer = Pair(
        Moments {
            observations: plain.len(),
            sites: model.len(),
            cross: false,
        },
        cfg.output.trajectories.then_some(Collect),
    );
    let ens = run_ensemble(cfg.run.replicates, cfg.run.base_seed, job, &reducer)?;
    let (moments, trajectories) = ens.summary;

    let mut out = ctx.outputs("simulate")?;
    let grid = model.grid();
    let mut body = String::new();
    if moments.n > 0 {
        for (o, (&t, &tp)) in rescaled.iter().zip(&plain).enumerate() {
            for slot in 0..model.len() {
                let m = moments.mean(o, slot);
                let v = moments.variance(o, slot);
                let _ = writeln!(
                    body,
                    "{t},{tp},{},{},{},{},{},{}",
                    grid.site(slot),
                    grid.x_at(slot),
                    m.value,
                    m.se,
                    v.value,
                    v.se
                );
            }
        }
    }
    out.csv(
        "moments.csv",
        "t,plain_time,site,x,mean,mean_se,variance,variance_se",
        &body,
    )?;
    if let Some(trajs) = trajectories {
        let mut body = String::new();
        for (r, traj) in &trajs {
            traj.csv_rows(*r, &mut body);
        }
        out.csv("trajectories.csv", "replicate,plain_time,site,count", &body)?;
    }
    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "{}",
        serde_json::json!({
            "record": "summary",
            "replicates": cfg.run.replicates,
            "succeeded": moments.n,
            "events": moments.events,
            "boundary_leak": moments.boundary_leak,
        })
    );
    for f in &ens.failures {
        let _ = writeln!(
            summary,
            "{}",
            serde_json::json!({ "record": "failure", "failure": f })
        );
    }
    out.jsonl("simulate.jsonl", &summary)?;
    let files = out.finish()?;
    if let Some(f) = ens.failures.first() {
        let kind = if f.numerical {
            "numerical diagnostic"
        } else {
            "error"
        };
        return Err(NumericalFailure(format!(
            "{} of {} replicates failed; first ({kind}) replicate {} seed {}: {}",
            ens.failures.len(),
            cfg.run.replicates,
            f.replicate,
            f.seed,
            f.error
        ))
        .into());
    }
    Ok(files)
}

/// Replicates or solvers stopped on a numerical diagnostic.
#[derive(Debug)]
pub struct NumericalFailure(pub String);

impl std::fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NumericalFailure {}

pub fn mean(ctx: &Ctx) -> anyhow::Result<Vec<PathBuf>> {
    let model = ctx.precheck()?;
    let cfg = &ctx.cfg;
    let ln_k = model.grid().ln_k();
    let rescaled = cfg.run.observation_times();
    let plain: Vec<f64> = rescaled.iter().map(|t| t * ln_k).collect();
    let means = ctx.initial_means(&model);
    let tol = Tolerances::mean_default();
    let mf = integrate_mean(&model, &means, &plain, &tol)?;
    let u0: Vec<f64> = means.iter().map(|m| m.ln() / ln_k).collect();
    let ef = integrate_exponent(&model, &u0, &rescaled, &tol)?;
    let moments = if model.len() <= MOMENT_BUDGET {
        Some(integrate_second_moments(
            &model,
            &means,
            ctx.initial_mode(),
            &plain,
            &Tolerances::moment_default(),
        )?)
    } else {
        None
    };

    let mut out = ctx.outputs("mean")?;
    let grid = model.grid();
    let mut body = String::new();
    for (k, &t) in rescaled.iter().enumerate() {
        for slot in 0..model.len() {
            let var = moments
                .as_ref()
                .map_or(String::new(), |m| m.variance(k, slot).to_string());
            let _ = writeln!(
                body,
                "{t},{},{},{},{},{},{var}",
                plain[k],
                grid.site(slot),
                grid.x_at(slot),
                mf.values[k][slot],
                ef.values[k][slot]
            );
        }
    }
    out.csv("mean.csv", "t,plain_time,site,x,mean,u,variance", &body)?;
    if let Some(m) = &moments {
        let report = match (&cfg.supercritical, model.regime().tag) {
            (Some(s), RegimeTag::Supercritical) => {
                Some(check_variance_bound_supercritical(&model, m, s.a)?)
            }
            (None, RegimeTag::Subcritical) => Some(check_variance_bound_subcritical(&model, m)?),
            _ => None,
        };
        if let Some(r) = report {
            out.jsonl("bounds.jsonl", &r.to_json_lines())?;
        }
    }
    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "{}",
        serde_json::json!({
            "record": "summary",
            "sites": model.len(),
            "ln_k": ln_k,
            "leak": mf.leak,
            "mean_steps": mf.stats.accepted,
            "exponent_steps": ef.stats.accepted,
            "moments": moments.is_some(),
        })
    );
    out.jsonl("mean.jsonl", &summary)?;
    out.finish()
}

fn reference(ctx: &Ctx, model: &Model<f64>) -> anyhow::Result<ReferenceSolution> {
    let hj = ctx
        .cfg
        .hj
        .as_ref()
        .ok_or_else(|| anyhow!("this command needs an [hj] section"))?;
    let problem = HjProblem::new(
        model.hamiltonian()?,
        ctx.cfg.initial.u0.clone(),
        hj.x_min.unwrap_or(ctx.cfg.model.x_min),
        hj.x_max.unwrap_or(ctx.cfg.model.x_max),
        hj.times.clone(),
    )?;
    Ok(solve_reference(&problem, &hj.refinement())?)
}

pub fn hj(ctx: &Ctx) -> anyhow::Result<Vec<PathBuf>> {
    let model = ctx.precheck()?;
    let reference = reference(ctx, &model)?;
    let sol = reference.solution();
    let band = reference.default_band_tol();
    let cut = apply_cutoff(sol, band);

    let mut out = ctx.outputs("hj")?;
    let mut body = String::new();
    for (k, t) in sol.times.iter().enumerate() {
        for (j, x) in sol.xs.iter().enumerate() {
            let beta = match cut.values[k][j] {
                CutoffValue::Value(v) => v.to_string(),
                CutoffValue::Extinct => "-inf".into(),
                CutoffValue::Undecided => String::new(),
            };
            let _ = writeln!(body, "{t},{x},{},{beta}", sol.values[k][j]);
        }
    }
    out.csv("hj.csv", "t,x,u,beta", &body)?;

    let mut lines = String::new();
    let _ = writeln!(
        lines,
        "{}",
        serde_json::json!({
            "record": "reference",
            "scheme": format!("{:?}", reference.reference.scheme),
            "dx": sol.dx,
            "dxs": reference.reference.dxs,
            "diffs": reference.reference.diffs,
            "ratios": reference.reference.ratios(),
            "other_scheme": format!("{:?}", reference.other.scheme),
            "other_diffs": reference.other.diffs,
            "cross_distance": reference.cross_distance,
            "ref_tol": reference.ref_tol,
            "band_tol": band,
        })
    );
    for &t in &sol.times {
        let _ = writeln!(
            lines,
            "{}",
            serde_json::json!({ "record": "survival_set", "set": survival_set(sol, t)? })
        );
    }
    let lip = lipschitz_report(sol, Some(&model.hamiltonian()?));
    let _ = writeln!(
        lines,
        "{}",
        serde_json::json!({ "record": "lipschitz", "report": lip })
    );
    out.jsonl("hj.jsonl", &lines)?;
    out.finish()
}

fn compare_report(
    ctx: &Ctx,
    model: &Model<f64>,
    ln_ks: Vec<f64>,
    base_seed: u64,
) -> anyhow::Result<ConvergenceReport> {
    let cfg = &ctx.cfg;
    let c = cfg
        .compare
        .as_ref()
        .ok_or_else(|| anyhow!("this command needs a [compare] section"))?;
    match c.kind {
        CompareKind::Cutoff => {
            let t =
                c.t.ok_or_else(|| anyhow!("compare.t is required for kind = \"cutoff\""))?;
            let reference = reference(ctx, model)?;
            let setup = CutoffSetup {
                spec: cfg.spec(),
                u0: cfg.initial.u0.clone(),
                initial: cfg.initial.mode,
                ln_ks,
                t,
                eta: c.eta,
                survival: c.survival.clone(),
                extinction: c.extinction.clone(),
                replicates: cfg.run.replicates,
                base_seed,
            };
            Ok(cutoff_experiment(
                &setup,
                reference.solution(),
                reference.default_band_tol(),
            )?)
        }
        CompareKind::Deviation => {
            let s = cfg
                .supercritical
                .as_ref()
                .ok_or_else(|| anyhow!("kind = \"deviation\" needs a [supercritical] section"))?;
            let setup = DeviationSetup {
                spec: cfg.spec(),
                a: s.a,
                ln_ks,
                half_width: c.half_width.ok_or_else(|| {
                    anyhow!("compare.half_width is required for kind = \"deviation\"")
                })?,
                t_end: cfg.run.t_end,
                observations: c.observations.unwrap_or(10),
                eta: c.eta,
                replicates: cfg.run.replicates,
                base_seed,
                engine: cfg.run.engine,
            };
            Ok(deviation_experiment(&setup)?)
        }
    }
}

pub fn compare(ctx: &Ctx) -> anyhow::Result<Vec<PathBuf>> {
    let model = ctx.precheck()?;
    let c = ctx
        .cfg
        .compare
        .as_ref()
        .ok_or_else(|| anyhow!("this command needs a [compare] section"))?;
    let ln_ks = if c.ln_ks.is_empty() {
        vec![ctx.cfg.ln_k()]
    } else {
        c.ln_ks.clone()
    };
    let report = compare_report(ctx, &model, ln_ks, ctx.cfg.run.base_seed)?;
    let mut out = ctx.outputs("compare")?;
    out.jsonl("compare.jsonl", &report.to_json_lines())?;
    let rows = report.rows_csv();
    let (columns, body) = rows.split_once('\n').expect("header line");
    out.csv("compare_rows.csv", columns, body)?;
    out.finish()
}

fn cell_name(kind: SweepKind, ln_k: f64) -> String {
    let kind = match kind {
        SweepKind::Ladder => "ladder",
        SweepKind::Cutoff => "cutoff",
        SweepKind::Deviation => "deviation",
    };
    format!("sweep/{kind}_lnk_{ln_k}.jsonl")
}

/// Result lines of one sweep cell (without provenance).
fn run_cell(
    ctx: &Ctx,
    index: usize,
    ln_k: f64,
    reference: Option<&ReferenceSolution>,
) -> anyhow::Result<String> {
    let sweep = ctx.cfg.sweep.as_ref().expect("checked by caller");
    match sweep.kind {
        SweepKind::Ladder => {
            let reference = reference.expect("ladder needs a reference");
            let t = sweep
                .t
                .ok_or_else(|| anyhow!("sweep.t is required for kind = \"ladder\""))?;
            let (a, b) = sweep
                .compact
                .ok_or_else(|| anyhow!("sweep.compact is required for kind = \"ladder\""))?;
            let sol = reference.solution();
            let k = sol
                .time_index(t)
                .ok_or_else(|| anyhow!("sweep.t = {t} is not one of hj.times"))?;
            let model = ctx.cfg.spec().with_ln_k(ln_k).build::<f64>()?;
            let u0 = model.sample(&ctx.cfg.initial.u0);
            let field = integrate_exponent(&model, &u0, &[t], &Tolerances::mean_default())?;
            let grid = model.grid();
            let sup = grid
                .slots_in(a, b)
                .map(|idx| (field.values[0][idx] - sol.value_at(k, grid.x_at(idx))).abs())
                .fold(0.0, f64::max);
            Ok(format!(
                "{}\n",
                serde_json::json!({
                    "record": "cell",
                    "kind": "ladder",
                    "ln_k": ln_k,
                    "t": t,
                    "a": a,
                    "b": b,
                    "sites": model.len(),
                    "sup_error": sup,
                    "steps": field.stats.accepted,
                })
            ))
        }
        SweepKind::Cutoff | SweepKind::Deviation => {
            let model = ctx.cfg.spec().with_ln_k(ln_k).build::<f64>()?;
            let seed = derive_seed(ctx.cfg.run.base_seed, &[index as u64]);
            Ok(compare_report(ctx, &model, vec![ln_k], seed)?.to_json_lines())
        }
    }
}

pub fn sweep(ctx: &Ctx) -> anyhow::Result<Vec<PathBuf>> {
    ctx.precheck()?;
    let sweep = ctx
        .cfg
        .sweep
        .as_ref()
        .ok_or_else(|| anyhow!("this command needs a [sweep] section"))?;
    if sweep.ln_ks.is_empty() {
        bail!("sweep.ln_ks is empty");
    }
    if matches!(sweep.kind, SweepKind::Cutoff | SweepKind::Deviation) && ctx.cfg.compare.is_none() {
        bail!(
            "sweep kind {:?} reads its parameters from [compare]",
            sweep.kind
        );
    }
    let needs_reference = sweep.kind == SweepKind::Ladder;
    let pending: Vec<(usize, f64)> = sweep
        .ln_ks
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, k)| {
            ctx.verify
                || read_provenance(&ctx.dir.join(cell_name(sweep.kind, k))).is_none_or(|p| {
                    p.get("config").and_then(|c| c.as_str()) != Some(ctx.hash.as_str())
                })
        })
        .collect();
    let reference = if needs_reference && !pending.is_empty() {
        let model = ctx.model()?;
        Some(reference(ctx, &model)?)
    } else {
        None
    };

    let results: Vec<anyhow::Result<(f64, String)>> = pending
        .par_iter()
        .map(|&(i, k)| run_cell(ctx, i, k, reference.as_ref()).map(|body| (k, body)))
        .collect();
    let mut out = ctx.outputs("sweep")?;
    for r in results {
        let (k, body) = r?;
        out.jsonl(&cell_name(sweep.kind, k), &body)?;
    }

    let mut table = String::new();
    let columns;
    let mut previous: Option<f64> = None;
    let mut lines_of = Vec::new();
    for &k in &sweep.ln_ks {
        let path = ctx.dir.join(cell_name(sweep.kind, k));
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))?;
        lines_of.push((k, text));
    }
    match sweep.kind {
        SweepKind::Ladder => {
            columns = "ln_k,sup_error,decreased";
            for (k, text) in &lines_of {
                let cell = find_record(text, "cell")
                    .ok_or_else(|| anyhow!("cell ln K = {k} has no result"))?;
                let e = cell["sup_error"].as_f64().unwrap_or(f64::NAN);
                let dec = previous.map_or(String::new(), |p| (e < p).to_string());
                let _ = writeln!(table, "{k},{e},{dec}");
                previous = Some(e);
            }
        }
        SweepKind::Cutoff => {
            columns = "ln_k,a,b,class,probability,lower,upper,median_distance";
            for (k, text) in &lines_of {
                for v in records(text, "compact") {
                    let p = &v["probability"];
                    let _ = writeln!(
                        table,
                        "{k},{},{},{},{},{},{},{}",
                        v["a"],
                        v["b"],
                        v["class"].as_str().unwrap_or(""),
                        p["estimate"],
                        p["lower"],
                        p["upper"],
                        v["median_distance"]
                    );
                }
            }
        }
        SweepKind::Deviation => {
            columns = "ln_k,probability,lower,upper,max_second_moment,se";
            for (k, text) in &lines_of {
                let c = find_record(text, "compact")
                    .ok_or_else(|| anyhow!("cell ln K = {k} has no result"))?;
                let m = find_record(text, "second_moment")
                    .ok_or_else(|| anyhow!("cell ln K = {k} has no result"))?;
                let p = &c["probability"];
                let _ = writeln!(
                    table,
                    "{k},{},{},{},{},{}",
                    p["estimate"], p["lower"], p["upper"], m["max"]["value"], m["max"]["se"]
                );
            }
        }
    }
    out.csv("sweep.csv", columns, &table)?;
    out.finish()
}

fn records<'a>(text: &'a str, kind: &'a str) -> impl Iterator<Item = serde_json::Value> + 'a {
    text.lines()
        .filter_map(|l| serde_json::from_str::<serde_json::Value>(l).ok())
        .filter(move |v| v.get("record").and_then(|r| r.as_str()) == Some(kind))
}

fn find_record(text: &str, kind: &str) -> Option<serde_json::Value> {
    records(text, kind).next()
}
