//! Experiment planning (validation) and execution.

use std::fmt;
use std::path::PathBuf;
use std::time::Instant;

use oqs::bath::{BathKind, BathSpec};
use oqs::corrme::{propagate_with, InvariantPolicy, MasterEqSetup, Trajectory};
use oqs::dephasing_exact::{DephasingRun, Preparation};
use oqs::fcs::{CountingRun, DriveParams, FcsOptions, TraceFrame, MIN_N_MAX};
use oqs::probe::{self, Param, ProbeModel, Scheme, VARIANTS};
use oqs::qcore::concurrence;
use oqs::spinspin_exact::{
    bloch_curve, evolve_bloch_sampled, two_qubit_curve, CentralParams, Chain, Enumeration, SpinEnvConfig, TwoQubitPath,
};
use oqs::{BlochVector, CMat, C64};
use rayon::prelude::*;

use crate::config::{Experiment, ExperimentConfig, Params, Resolved, ValidationError};
use crate::output::{persist, Column, ResultTable, RunInfo, RunOutput};

#[derive(Debug)]
pub enum RunError {
    Validation(ValidationError),
    /// A solver failed while running; `context` names the module.
    Numeric { context: &'static str, message: String },
    Io(String),
}

impl RunError {
    /// 2 for anything wrong with the request, 3 for failures of the
    /// computation itself.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 2,
            Self::Numeric { .. } | Self::Io(_) => 3,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Validation(e) => write!(f, "invalid configuration:\n{e}"),
            Self::Numeric { context, message } => write!(f, "{context}: {message}"),
            Self::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ValidationError> for RunError {
    fn from(e: ValidationError) -> Self {
        Self::Validation(e)
    }
}

// Solver errors raised at run time. Parameter-type errors should have been
// caught while planning, but if one surfaces it is still the request's fault.
fn solver(context: &'static str) -> impl Fn(oqs::Error) -> RunError {
    move |e| match e {
        oqs::Error::Numeric(_) | oqs::Error::Propagation { .. } | oqs::Error::Capacity(_) => {
            RunError::Numeric { context, message: e.to_string() }
        }
        _ => RunError::Validation(ValidationError(vec![format!("{context}: {e}")])),
    }
}

#[derive(Clone, Copy, Debug)]
struct TimeGrid {
    t_end: f64,
    points: usize,
}

impl TimeGrid {
    fn times(&self) -> Vec<f64> {
        let n = self.points - 1;
        (0..self.points).map(|k| if k == n { self.t_end } else { self.t_end * k as f64 / n as f64 }).collect()
    }
}

fn time_grid(p: &mut Params, t_end: f64, points: usize) -> TimeGrid {
    let t_end = p.f64("t_end", t_end);
    let points = p.usize("t_points", points);
    if !(t_end > 0.0 && t_end.is_finite()) {
        p.error("t_end", format!("must be finite and > 0, got {t_end}"));
    }
    if points < 2 {
        p.error("t_points", format!("empty grid: need at least 2 points, got {points}"));
    }
    TimeGrid { t_end, points: points.max(2) }
}

// Output every `stride`-th state of a dt-grid trajectory.
fn stride(p: &mut Params, grid: TimeGrid, dt: f64) -> usize {
    if !(dt > 0.0 && dt.is_finite()) {
        p.error("dt", format!("must be finite and > 0, got {dt}"));
        return 1;
    }
    let spacing = grid.t_end / (grid.points - 1) as f64;
    let k = (spacing / dt).round();
    if k < 1.0 || (k * dt - spacing).abs() > 1e-9 * spacing {
        p.error("dt", format!("output spacing t_end/(t_points-1) = {spacing} must be a multiple of dt = {dt}"));
        return 1;
    }
    k as usize
}

fn policy(p: &mut Params) -> InvariantPolicy {
    p.choice("invariants", InvariantPolicy::Strict, &[("strict", InvariantPolicy::Strict), ("report", InvariantPolicy::Report)])
}

fn bath(p: &mut Params, kind: BathKind, g: f64, s: f64, omega_c: f64, beta: f64) -> Option<BathSpec> {
    let g = p.f64("coupling", g);
    let s = p.f64("s", s);
    let omega_c = p.f64("omega_c", omega_c);
    let beta = p.f64("beta", beta);
    checked(p, "coupling/s/omega_c/beta", BathSpec::new(kind, g, s, omega_c, beta))
}

fn checked<T>(p: &mut Params, keys: &str, r: oqs::Result<T>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(e) => {
            p.error(keys, e);
            None
        }
    }
}

enum Job {
    Bloch { env: SpinEnvConfig, central: CentralParams, grid: TimeGrid, sampled: Option<(usize, u64)> },
    Concurrence { env: SpinEnvConfig, central: CentralParams, grid: TimeGrid },
    Dephasing { setup: MasterEqSetup, exact: DephasingRun<BathSpec>, grid: TimeGrid, dt: f64, stride: usize, policy: InvariantPolicy },
    Corrme { setup: MasterEqSetup, grid: TimeGrid, dt: f64, stride: usize, policy: InvariantPolicy, ramps: Vec<f64>, second: bool },
    Probe { bases: Vec<ProbeModel>, x: Param, values: Vec<f64>, t_grid: Vec<f64> },
    Fcs { params: DriveParams, options: FcsOptions, delta_t: Vec<f64>, n_max: usize },
}

/// A validated experiment, ready to run.
pub struct Plan {
    pub resolved: Resolved,
    pub output: PathBuf,
    job: Job,
}

impl Plan {
    pub fn experiment(&self) -> Experiment {
        self.resolved.experiment
    }
}

/// Validate a configuration and resolve every default. All problems are
/// reported together.
pub fn plan(cfg: &ExperimentConfig) -> Result<Plan, ValidationError> {
    let mut p = Params::new(cfg);
    let job = match cfg.experiment {
        Experiment::SpinspinBloch | Experiment::SpinspinConcurrence => plan_spin(&mut p, cfg.experiment),
        Experiment::DephasingJx => plan_dephasing(&mut p),
        Experiment::CorrmeJx | Experiment::CorrmeJx2 => plan_corrme(&mut p, cfg.experiment == Experiment::CorrmeJx2),
        Experiment::ProbeSweep => plan_probe(&mut p),
        Experiment::FcsWorkdist => plan_fcs(&mut p),
    };
    let output = p.string("output");
    if cfg.entries.get("output").is_some_and(|e| e.value.is_empty()) {
        p.error("output", "path is empty");
    }
    let resolved = p.finish()?;
    let job = job.ok_or_else(|| ValidationError(vec!["internal: plan incomplete without a reported error".into()]))?;
    Ok(Plan { resolved, output: PathBuf::from(output), job })
}

fn plan_spin(p: &mut Params, e: Experiment) -> Option<Job> {
    let n = p.usize("n", 50);
    let g = p.f64("g", 0.01);
    let eps0 = p.f64("eps0", 4.0);
    let eps = p.f64("eps", 2.0);
    let delta0 = p.f64("delta0", 1.0);
    let kappa = if e == Experiment::SpinspinConcurrence { p.f64("kappa", 0.0) } else { 0.0 };
    let eps_env = p.f64("eps_env", 1.0);
    let alpha = p.f64("alpha", 0.0);
    let chain = p.choice("chain", Chain::Periodic, &[("periodic", Chain::Periodic), ("open", Chain::Open)]);
    let beta = p.f64("beta", 1.0);
    let grid = time_grid(p, 10.0, 501);
    let sampled = if e == Experiment::SpinspinBloch {
        let sampled = p.choice("mode", false, &[("exact", false), ("sampled", true)]);
        let samples = p.usize("samples", 20000);
        let seed = p.u64("seed", 0);
        if sampled && samples < 2 {
            p.error("samples", "need at least 2");
        }
        sampled.then_some((samples, seed))
    } else {
        None
    };
    let env = checked(p, "n/g/eps_env/alpha/beta", SpinEnvConfig::identical(n, g, eps_env, alpha, beta))?.with_chain(chain);
    if let Err(err) = env.validate() {
        p.error("chain", err);
        return None;
    }
    Some(if e == Experiment::SpinspinConcurrence {
        Job::Concurrence { env, central: CentralParams::two_qubit(eps0, eps, delta0, kappa), grid }
    } else {
        Job::Bloch { env, central: CentralParams::single(eps0, eps, delta0), grid, sampled }
    })
}

fn plan_dephasing(p: &mut Params) -> Option<Job> {
    let n = p.usize("n", 10);
    let eps0 = p.f64("eps0", 4.0);
    let eps = p.f64("eps", 4.0);
    let bath = bath(p, BathKind::Bosonic, 0.05, 1.0, 5.0, 1.0);
    let dt = p.f64("dt", oqs::corrme::DEFAULT_DT);
    let grid = time_grid(p, 3.0, 301);
    let stride = stride(p, grid, dt);
    let policy = policy(p);
    let bath = bath?;
    let prep = checked(p, "n", Preparation::rotation_y(n))?;
    let exact = checked(p, "n/eps0/eps", DephasingRun::with_prep_bias(n, eps0, eps, bath, prep))?;
    let setup = checked(p, "n/eps0/eps", MasterEqSetup::new(n, eps0, eps, 0.0, 0.0, bath))?;
    Some(Job::Dephasing { setup, exact, grid, dt, stride, policy })
}

fn plan_corrme(p: &mut Params, second: bool) -> Option<Job> {
    let n = p.usize("n", 2);
    let eps0 = p.f64("eps0", 4.0);
    let eps = p.f64("eps", 2.5);
    let delta0 = p.f64("delta0", 0.5);
    let delta = p.f64("delta", 0.5);
    let kind = p.choice("bath_kind", BathKind::Bosonic, &[("bosonic", BathKind::Bosonic), ("spin", BathKind::Spin)]);
    let bath = bath(p, kind, 0.05, 1.0, 5.0, 1.0);
    let dt = p.f64("dt", oqs::corrme::DEFAULT_DT);
    let grid = time_grid(p, 5.0, 501);
    let stride = stride(p, grid, dt);
    let policy = policy(p);
    let ramps = p.f64_list("t_eps", &[]);
    if ramps.iter().any(|&r| !(r >= 0.0 && r.is_finite())) {
        p.error("t_eps", "ramp times must be finite and >= 0 (0 is a sudden quench)");
    }
    let setup = checked(p, "n/eps0/eps/delta0/delta", MasterEqSetup::new(n, eps0, eps, delta0, delta, bath?))?;
    Some(Job::Corrme { setup, grid, dt, stride, policy, ramps, second })
}

fn plan_probe(p: &mut Params) -> Option<Job> {
    let x = p.choice(
        "param",
        Param::OmegaC,
        &[("omega_c", Param::OmegaC), ("coupling", Param::Coupling), ("temperature", Param::Temperature)],
    );
    let start = p.f64("sweep_start", 1.0);
    let end = p.f64("sweep_end", 10.0);
    let points = p.usize("sweep_points", 19);
    let omega0 = p.f64("omega0", 1.0);
    let g = p.f64("coupling", 0.01);
    let s_values = p.f64_list("s", &[0.5]);
    let omega_c = p.f64("omega_c", 5.0);
    let beta = p.f64("beta", f64::INFINITY);
    let horizon = p.f64("horizon", probe::DEFAULT_HORIZON);
    let time_points = p.usize("time_points", probe::DEFAULT_GRID_POINTS);
    if points == 0 {
        p.error("sweep_points", "empty grid");
    }
    if !(start.is_finite() && end.is_finite()) {
        p.error("sweep_start/sweep_end", "must be finite");
    }
    if s_values.is_empty() {
        p.error("s", "need at least one Ohmicity");
    }
    let t_grid = checked(p, "horizon/time_points", probe::time_grid(horizon, time_points));
    let values: Vec<f64> = match points {
        0 => Vec::new(),
        1 => vec![start],
        n => (0..n).map(|k| if k == n - 1 { end } else { start + (end - start) * k as f64 / (n - 1) as f64 }).collect(),
    };
    let mut bases = Vec::new();
    for &s in &s_values {
        let Some(b) = checked(p, "coupling/s/omega_c/beta", BathSpec::new(BathKind::Bosonic, g, s, omega_c, beta)) else {
            continue;
        };
        let Some(m) = checked(p, "omega0", ProbeModel::single_qubit(omega0, b, false)) else { continue };
        for &v in &values {
            checked(p, "sweep_start/sweep_end", m.with_param(x, v));
        }
        bases.push(m);
    }
    (bases.len() == s_values.len() && !values.is_empty()).then_some(())?;
    Some(Job::Probe { bases, x, values, t_grid: t_grid? })
}

fn plan_fcs(p: &mut Params) -> Option<Job> {
    let eps = p.f64("eps", 5.0);
    let omega_l = p.f64("omega_l", 0.0);
    let delta = p.f64("delta", 0.01);
    let bath = bath(p, BathKind::Bosonic, 0.1, 1.0, 5.0, 1.0);
    let delta_t = p.f64_list("delta_t", &[0.1, 0.5, 1.0, 5.0]);
    let n_max = p.usize("n_max", oqs::fcs::DEFAULT_N_MAX);
    let dt = p.f64("dt", oqs::fcs::DEFAULT_DT);
    let frame = p.choice(
        "trace_frame",
        TraceFrame::Rwa,
        &[("rwa", TraceFrame::Rwa), ("detuned", TraceFrame::Detuned), ("bath_only", TraceFrame::BathOnly)],
    );
    if delta_t.is_empty() {
        p.error("delta_t", "empty grid");
    }
    if delta_t.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
        p.error("delta_t", "times must be finite and >= 0");
    }
    if delta == 0.0 {
        p.error("delta", "times are given as Δ·t, so Δ must be nonzero");
    }
    if n_max < MIN_N_MAX {
        p.error("n_max", format!("must be at least {MIN_N_MAX}"));
    }
    let options = FcsOptions { dt, trace_frame: frame, ..Default::default() };
    checked(p, "dt", options.validate());
    let params = checked(p, "eps/omega_l/delta", DriveParams::new(eps, omega_l, delta, bath?))?;
    checked(p, "eps/omega_l/delta/s", CountingRun::new(&params, None, options))?;
    Some(Job::Fcs { params, options, delta_t, n_max })
}

fn bloch_matrix(b: &BlochVector) -> CMat {
    let h = 0.5;
    CMat::from_row_slice(
        2,
        2,
        &[
            C64::new(h * (1.0 + b.pz), 0.0),
            C64::new(h * b.px, -h * b.py),
            C64::new(h * b.px, h * b.py),
            C64::new(h * (1.0 - b.pz), 0.0),
        ],
    )
}

fn every(traj: &Trajectory, stride: usize) -> impl Iterator<Item = usize> + '_ {
    (0..traj.states.len()).step_by(stride)
}

fn pick(v: &[f64], traj: &Trajectory, stride: usize) -> Vec<f64> {
    every(traj, stride).map(|k| v[k]).collect()
}

fn label(correlated: bool) -> &'static str {
    if correlated {
        "wc"
    } else {
        "woc"
    }
}

fn fmt_value(x: f64) -> String {
    format!("{x}")
}

/// Run a validated plan. Every density matrix a solver emits is audited.
pub fn execute(plan: &Plan) -> Result<RunOutput, RunError> {
    let start = Instant::now();
    let mut info = RunInfo::default();
    let table = match &plan.job {
        Job::Bloch { env, central, grid, sampled } => {
            let times = grid.times();
            let mut cols = vec![Column::new("t", times.clone())];
            let mut errs = Vec::new();
            for corr in [false, true] {
                let (px, se): (Vec<f64>, Vec<f64>) = match sampled {
                    None => {
                        let curve = bloch_curve(env, central, corr, &times, Enumeration::Auto).map_err(solver("spinspin_exact"))?;
                        curve.iter().for_each(|b| info.audit.record(&bloch_matrix(b)));
                        (curve.iter().map(|b| b.px).collect(), Vec::new())
                    }
                    Some((samples, seed)) => {
                        let pts = times
                            .par_iter()
                            .map(|&t| evolve_bloch_sampled(env, central, corr, t, *samples, *seed))
                            .collect::<oqs::Result<Vec<_>>>()
                            .map_err(solver("spinspin_exact"))?;
                        pts.iter().for_each(|b| info.audit.record(&bloch_matrix(&b.mean)));
                        (pts.iter().map(|b| b.mean.px).collect(), pts.iter().map(|b| b.std_error[0]).collect())
                    }
                };
                cols.push(Column::new(format!("px_{}", label(corr)), px));
                errs.push((corr, se));
            }
            if let Some((samples, seed)) = sampled {
                for (corr, se) in errs {
                    cols.push(Column::new(format!("px_{}_stderr", label(corr)), se));
                }
                info.notes.push(format!("Monte Carlo over environment configurations: {samples} samples, seed {seed}"));
            }
            ResultTable { columns: cols }
        }
        Job::Concurrence { env, central, grid } => {
            let times = grid.times();
            let mut cols = vec![Column::new("t", times.clone())];
            for corr in [false, true] {
                let states = two_qubit_curve(env, central, corr, &times, Enumeration::Auto, TwoQubitPath::Auto)
                    .map_err(solver("spinspin_exact"))?;
                states.iter().for_each(|r| info.audit.record(r.matrix()));
                let c = states.iter().map(concurrence).collect::<oqs::Result<Vec<_>>>().map_err(solver("qcore"))?;
                cols.push(Column::new(format!("c_{}", label(corr)), c));
            }
            ResultTable { columns: cols }
        }
        Job::Dephasing { setup, exact, grid, dt, stride, policy } => {
            let mut me = Vec::new();
            for corr in [true, false] {
                let traj = propagate_with(&setup.clone().with_corr(corr), grid.t_end, *dt, *policy).map_err(solver("corrme"))?;
                info.audit.merge(&traj.audit);
                me.push(pick(&traj.jx(), &traj, *stride));
            }
            let times = grid.times();
            let mut cols = vec![Column::new("t", times.clone())];
            for corr in [true, false] {
                let states = times
                    .par_iter()
                    .map(|&t| exact.state(t, corr))
                    .collect::<oqs::Result<Vec<_>>>()
                    .map_err(solver("dephasing_exact"))?;
                states.iter().for_each(|r| info.audit.record(r.matrix()));
                let jx = times.iter().map(|&t| exact.jx(t, corr)).collect::<oqs::Result<Vec<_>>>().map_err(solver("dephasing_exact"))?;
                cols.push(Column::new(format!("jx_exact_{}", if corr { "corr" } else { "uncorr" }), jx));
            }
            cols.push(Column::new("jx_me_corr", me.remove(0)));
            cols.push(Column::new("jx_me_uncorr", me.remove(0)));
            ResultTable { columns: cols }
        }
        Job::Corrme { setup, grid, dt, stride, policy, ramps, second } => {
            let name = if *second { "jx2" } else { "jx" };
            let mut cols = vec![Column::new("t", grid.times())];
            let runs: Vec<(String, MasterEqSetup)> = if ramps.is_empty() {
                vec![(format!("{name}_corr"), setup.clone().with_corr(true)), (format!("{name}_nocorr"), setup.clone().with_corr(false))]
            } else {
                ramps
                    .iter()
                    .map(|&te| {
                        let s = setup.clone().with_corr(true);
                        (format!("{name}_t_eps={}", fmt_value(te)), if te > 0.0 { s.with_ramp(te) } else { s })
                    })
                    .collect()
            };
            for (col, s) in runs {
                let traj = propagate_with(&s, grid.t_end, *dt, *policy).map_err(solver("corrme"))?;
                info.audit.merge(&traj.audit);
                let series = if *second { traj.jx2() } else { traj.jx() };
                cols.push(Column::new(col, pick(&series, &traj, *stride)));
            }
            if *policy == InvariantPolicy::Report && !info.audit.passes() {
                info.notes.push("invariants=report: some propagated states violate the density-matrix invariants".into());
            }
            ResultTable { columns: cols }
        }
        Job::Probe { bases, x, values, t_grid } => {
            let mut cols = vec![Column::new("value", values.clone())];
            for base in bases {
                let rows = probe::sweep(base, *x, values, t_grid).map_err(solver("probe"))?;
                let suffix = if bases.len() > 1 { format!("_s={}", fmt_value(base.bath.s)) } else { String::new() };
                for (i, &(scheme, corr)) in VARIANTS.iter().enumerate() {
                    let tag = format!("{}_{}{suffix}", if scheme == Scheme::SingleQubit { "1q" } else { "2q" }, label(corr));
                    let mut qfi = Vec::new();
                    let mut cfi = Vec::new();
                    let mut t_opt = Vec::new();
                    let mut conv = Vec::new();
                    for row in &rows {
                        let pt = row.points[i];
                        let m = ProbeModel { scheme, correlated: corr, ..base.with_param(*x, row.value).map_err(solver("probe"))? };
                        let angle = probe::optimal_angle(&m, *x, pt.t_opt).map_err(solver("probe"))?;
                        let c = if pt.t_opt > 0.0 { probe::cfi(&m, *x, pt.t_opt, angle.varphi).map_err(solver("probe"))? } else { 0.0 };
                        info.audit.record(probe::probe_state(&m, pt.t_opt).map_err(solver("probe"))?.matrix());
                        qfi.push(pt.qfi_max);
                        cfi.push(c);
                        t_opt.push(pt.t_opt);
                        conv.push(if pt.converged { 1.0 } else { 0.0 });
                    }
                    let unconverged = conv.iter().filter(|&&c| c == 0.0).count();
                    if unconverged > 0 {
                        info.notes.push(format!("{tag}: {unconverged} of {} points not converged in the time window", rows.len()));
                    }
                    cols.push(Column::new(format!("qfi_{tag}"), qfi));
                    cols.push(Column::new(format!("cfi_{tag}"), cfi));
                    cols.push(Column::new(format!("t_opt_{tag}"), t_opt));
                    cols.push(Column::integer(format!("converged_{tag}"), conv));
                }
            }
            ResultTable { columns: cols }
        }
        Job::Fcs { params, options, delta_t, n_max } => {
            let run = CountingRun::new(params, None, *options).map_err(solver("fcs"))?;
            let mut cols = Vec::new();
            for &dt in delta_t {
                let t = dt / params.delta_drive.abs();
                let w = run.work_distribution(t, *n_max).map_err(solver("fcs"))?;
                info.audit.merge(&w.audit);
                if cols.is_empty() {
                    cols.push(Column::integer("n", w.n_values.iter().map(|&n| n as f64).collect()));
                    cols.push(Column::new("work", w.n_values.iter().map(|&n| n as f64 * w.quantum).collect()));
                }
                if w.clamped > 0 || !w.within_leakage_tolerance() {
                    info.notes.push(format!(
                        "delta_t={}: {} negative probabilities clamped (most negative {:e}), imaginary leakage {:e}",
                        fmt_value(dt),
                        w.clamped,
                        w.min_raw,
                        w.leakage
                    ));
                }
                cols.push(Column::new(format!("p_delta_t={}", fmt_value(dt)), w.probs));
            }
            info.notes.push(format!("trace frame: {:?}", options.trace_frame));
            ResultTable { columns: cols }
        }
    };
    table.check().map_err(|e| RunError::Numeric { context: "output", message: e })?;
    Ok(RunOutput { resolved: plan.resolved.clone(), table, info, seconds: start.elapsed().as_secs_f64() })
}

/// Parse, validate and run a configuration text.
pub fn run_text(text: &str) -> Result<RunOutput, RunError> {
    let cfg = ExperimentConfig::parse(text)?;
    execute(&plan(&cfg)?)
}

/// Run and write CSV plus sidecars to the configured output path.
pub fn run_and_persist(plan: &Plan) -> Result<RunOutput, RunError> {
    let out = execute(plan)?;
    persist(&out, &plan.output).map_err(|e| RunError::Io(format!("{}: {e}", plan.output.display())))?;
    Ok(out)
}

