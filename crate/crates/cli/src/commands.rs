use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;

use scalecalc_core::control::{
    control_system_residual, delay_problem_for, el_reduction_check, pontryagin_residual_classical,
    pontryagin_residual_scale, ControlError, ControlTriple, REDUCTION_TOLERANCE,
};
use scalecalc_core::delay::{
    classical_el_residual, coherence_check, scale_el_residual, solve_extremal_with, ScaleMode, SolverOptions,
    Trajectory, VariationalError,
};
use scalecalc_core::problem::ProblemFile;
use scalecalc_core::sampled::SampledFunction;
use scalecalc_core::scale::{
    barrow_residual, holder_estimate, leibniz_residual, scale_derivative, EpsilonSchedule, ScaleDerivative,
};
use scalecalc_core::zoo::{classical_derivative, parse_function, sample_on_grid, FunctionSpec};

use crate::report::{complex_metrics, Field, Input, Provenance, Report, ScheduleEcho, Status};

/// Default tolerances, one per check; `--tol` overrides the one a
/// subcommand compares against.
pub mod defaults {
    /// `derive`: multiple of `ε₀ + h` allowed between `□f` and `f′`.
    pub const DERIVE_FACTOR: f64 = 5.0;
    pub const LEIBNIZ: f64 = 1e-6;
    pub const BARROW: f64 = 1e-6;
    pub const HOLDER: f64 = 0.05;
    pub const RESIDUAL: f64 = 1e-4;
    pub const COHERENCE: f64 = 1e-10;
    pub const PONTRYAGIN: f64 = 1e-9;
    pub const IDENTITY: f64 = 1e-12;
    pub const GRID_STEP: f64 = 1e-3;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Unreadable or invalid input; exit code 2.
    #[error("{0}")]
    Input(String),
    /// A computation that could not complete (e.g. a non-converging solve);
    /// exit code 1.
    #[error("{0}")]
    Failed(String),
}

fn input(context: &str, e: impl Display) -> CliError {
    CliError::Input(format!("{context}: {e}"))
}

fn variational(e: VariationalError) -> CliError {
    match e {
        VariationalError::NonConvergence { .. } | VariationalError::SingularHessian => CliError::Failed(e.to_string()),
        other => CliError::Input(other.to_string()),
    }
}

fn control(e: ControlError) -> CliError {
    match e {
        ControlError::Variational(v) => variational(v),
        other => CliError::Input(other.to_string()),
    }
}

/// Grid and schedule flags shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    pub h: Option<f64>,
    pub eps0: Option<f64>,
    pub ratio: Option<f64>,
    pub levels: Option<usize>,
    pub tol: Option<f64>,
}

/// Collects inputs and the config echo while a command runs.
struct Context {
    subcommand: &'static str,
    inputs: Vec<Input>,
    config: BTreeMap<String, String>,
}

impl Context {
    fn new(subcommand: &'static str) -> Self {
        Context { subcommand, inputs: Vec::new(), config: BTreeMap::new() }
    }

    fn set(&mut self, key: &str, value: impl std::fmt::Debug) {
        self.config.insert(key.to_string(), format!("{value:?}"));
    }

    fn read(&mut self, name: &str, path: &Path) -> Result<String, CliError> {
        let bytes = std::fs::read(path).map_err(|e| input(&format!("{name} {}", path.display()), e))?;
        self.inputs.push(Input::new(name, &bytes));
        String::from_utf8(bytes).map_err(|e| input(name, e))
    }

    fn literal(&mut self, name: &str, text: &str) {
        self.inputs.push(Input::new(name, text.as_bytes()));
        self.config.insert(name.to_string(), text.to_string());
    }

    fn echo_schedule(&mut self, s: &EpsilonSchedule) {
        self.set("h", s.grid_step());
        self.set("eps0", s.eps0());
        self.set("ratio", s.ratio());
        self.set("levels", s.levels());
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        mut self,
        tolerance: f64,
        measured: f64,
        pass: bool,
        schedule: Option<&EpsilonSchedule>,
        metrics: BTreeMap<String, f64>,
        notes: BTreeMap<String, String>,
        fields: Vec<Field>,
    ) -> Report {
        self.set("tol", tolerance);
        Report {
            subcommand: self.subcommand.to_string(),
            status: Status::from_bool(pass),
            tolerance,
            measured,
            provenance: Provenance {
                tool: format!("scalecalc {}", env!("CARGO_PKG_VERSION")),
                inputs: self.inputs,
                config: self.config,
            },
            schedule: schedule.map(ScheduleEcho::from),
            metrics,
            notes,
            fields,
        }
    }
}

fn schedule_for(h: f64, st: &Settings) -> Result<EpsilonSchedule, CliError> {
    let eps0 = st.eps0.unwrap_or(16.0 * h);
    EpsilonSchedule::new(eps0, st.ratio.unwrap_or(0.5), st.levels.unwrap_or(5), h).map_err(|e| input("--eps0/--ratio/--levels", e))
}

fn function(ctx: &mut Context, name: &str, text: &str) -> Result<FunctionSpec, CliError> {
    ctx.literal(name, text);
    parse_function(text).map_err(|e| input(name, e))
}

fn sample(spec: &FunctionSpec, from: f64, to: f64, h: f64) -> Result<SampledFunction, CliError> {
    sample_on_grid(spec, from, to, h).map_err(|e| input("--from/--to/--h", e))
}

/// `t,re_0,im_0,...` plus `converged,order,fit_residual` per node.
fn derivative_csv(d: &ScaleDerivative) -> String {
    let mut out = String::new();
    for (i, line) in d.values.to_csv().lines().enumerate() {
        out.push_str(line);
        if i == 0 {
            out.push_str(",converged,order,fit_residual");
        } else {
            let p = &d.points[i - 1];
            let order = p.estimated_order.map_or_else(|| "nan".to_string(), |o| format!("{o:.6e}"));
            out.push_str(&format!(",{},{},{:.6e}", u8::from(p.converged), order, p.fit_residual));
        }
        out.push('\n');
    }
    out
}

pub fn derive(spec: &str, from: f64, to: f64, st: &Settings) -> Result<Report, CliError> {
    let mut ctx = Context::new("derive");
    let f = function(&mut ctx, "spec", spec)?;
    let h = st.h.unwrap_or(defaults::GRID_STEP);
    let s = schedule_for(h, st)?;
    ctx.echo_schedule(&s);
    ctx.set("from", from);
    ctx.set("to", to);
    let samples = sample(&f, from, to, h)?;
    let d = scale_derivative(&samples, &s).map_err(|e| input("--from/--to", e))?;

    let mut metrics = BTreeMap::new();
    let mut notes = BTreeMap::new();
    metrics.insert("converged_fraction".into(), d.converged_fraction());
    let tolerance = st.tol.unwrap_or(defaults::DERIVE_FACTOR * (s.eps0() + h));
    let classical = classical_derivative(&f.band_limited(h));
    let measured = if classical.is_differentiable() && !f.is_rough() {
        let (mut real, mut imag) = (0.0f64, 0.0f64);
        for i in 0..d.values.len() {
            let v = d.values.point(i)[0];
            real = real.max((v.re - classical.spec.eval(d.values.time(i))).abs());
            imag = imag.max(v.im.abs());
        }
        metrics.insert("sup_error_real".into(), real);
        metrics.insert("sup_imag".into(), imag);
        real.max(imag)
    } else {
        notes.insert("comparison".into(), "no classical derivative at grid scale; nothing compared".into());
        0.0
    };
    let (sup, l2) = scalecalc_core::numerics::norms(d.values.values().iter(), h);
    let mut field = Field::sampled("scale_derivative", &d.values, sup, l2);
    field.converged_fraction = Some(d.converged_fraction());
    field.csv = derivative_csv(&d);
    Ok(ctx.finish(tolerance, measured, measured <= tolerance, Some(&s), metrics, notes, vec![field]))
}

#[allow(clippy::too_many_arguments)]
pub fn rules(
    f: &str,
    g: &str,
    alpha: Option<f64>,
    beta: Option<f64>,
    from: f64,
    to: f64,
    t1: Option<f64>,
    t2: Option<f64>,
    st: &Settings,
) -> Result<Report, CliError> {
    let mut ctx = Context::new("rules");
    let fs = function(&mut ctx, "f", f)?;
    let gs = function(&mut ctx, "g", g)?;
    let h = st.h.unwrap_or(defaults::GRID_STEP);
    let s = schedule_for(h, st)?;
    ctx.echo_schedule(&s);
    let alpha = alpha.or(fs.holder_exponent()).unwrap_or(1.0);
    let beta = beta.or(gs.holder_exponent()).unwrap_or(1.0);
    let (t1, t2) = (t1.unwrap_or(from + s.eps0()), t2.unwrap_or(to - s.eps0()));
    for (k, v) in [("from", from), ("to", to), ("alpha", alpha), ("beta", beta), ("t1", t1), ("t2", t2)] {
        ctx.set(k, v);
    }
    let (fv, gv) = (sample(&fs, from, to, h)?, sample(&gs, from, to, h)?);
    let leibniz = leibniz_residual(&fv, &gv, alpha, beta, &s).map_err(|e| input("f/g", e))?;
    let barrow = barrow_residual(&fv, t1, t2, &s).map_err(|e| input("--t1/--t2", e))?;

    let mut metrics = BTreeMap::new();
    metrics.insert("leibniz.sup".into(), leibniz.sup);
    metrics.insert("leibniz.l2".into(), leibniz.l2);
    metrics.insert("leibniz.holder_sum".into(), leibniz.holder_sum);
    metrics.insert("leibniz.fallback_points".into(), leibniz.fallback_points as f64);
    metrics.insert("barrow.residual".into(), barrow.residual);
    metrics.insert("barrow.proxy_decreasing".into(), f64::from(u8::from(barrow.proxy_decreasing)));
    for (j, e) in barrow.level_errors.iter().enumerate() {
        metrics.insert(format!("barrow.level_error_{j}"), *e);
    }
    complex_metrics(&mut metrics, "barrow.integral", &barrow.integral);
    complex_metrics(&mut metrics, "barrow.increment", &barrow.increment);
    let mut notes = BTreeMap::new();
    if !leibniz.holder_condition_met {
        notes.insert("leibniz".into(), "alpha + beta <= 1: the rule is not expected to hold".into());
    }
    let tol_l = st.tol.unwrap_or(defaults::LEIBNIZ);
    let tol_b = st.tol.unwrap_or(defaults::BARROW);
    let pass = leibniz.sup <= tol_l && barrow.residual <= tol_b;
    let measured = leibniz.sup.max(barrow.residual);
    let field = Field::sampled("leibniz_residual", &leibniz.residual, leibniz.sup, leibniz.l2);
    Ok(ctx.finish(tol_l.max(tol_b), measured, pass, Some(&s), metrics, notes, vec![field]))
}

pub fn holder(spec: &str, from: f64, to: f64, expect: Option<f64>, st: &Settings) -> Result<Report, CliError> {
    let mut ctx = Context::new("holder");
    let f = function(&mut ctx, "spec", spec)?;
    let h = st.h.unwrap_or(defaults::GRID_STEP);
    for (k, v) in [("h", h), ("from", from), ("to", to)] {
        ctx.set(k, v);
    }
    ctx.set("expect", expect);
    let samples = sample(&f, from, to, h)?;
    let est = holder_estimate(&samples).map_err(|e| input("spec", e))?;
    let mut metrics = BTreeMap::new();
    metrics.insert("alpha".into(), est.alpha);
    metrics.insert("raw_slope".into(), est.raw_slope);
    metrics.insert("r_squared".into(), est.r_squared);
    for (s, v) in est.scales.iter().zip(&est.increments) {
        metrics.insert(format!("increment_at_{s:e}"), *v);
    }
    let tolerance = st.tol.unwrap_or(defaults::HOLDER);
    let measured = expect.map_or(0.0, |e| (est.alpha - e).abs());
    let mut notes = BTreeMap::new();
    if expect.is_none() {
        notes.insert("comparison".into(), "no --expect given; nothing compared".into());
    }
    if let Some(a) = f.holder_exponent() {
        metrics.insert("nominal_alpha".into(), a);
    }
    Ok(ctx.finish(tolerance, measured, measured <= tolerance, None, metrics, notes, Vec::new()))
}

struct Loaded {
    file: ProblemFile,
    h: f64,
}

fn load_problem(ctx: &mut Context, path: &Path, st: &Settings) -> Result<Loaded, CliError> {
    let text = ctx.read("problem", path)?;
    let file = ProblemFile::parse(&text).map_err(|e| input(&path.display().to_string(), e))?;
    let h = file.step(st.h).map_err(|e| input(&path.display().to_string(), e))?;
    ctx.set("h", h);
    Ok(Loaded { file, h })
}

fn schedule_of(ctx: &mut Context, l: &Loaded, st: &Settings) -> Result<EpsilonSchedule, CliError> {
    let s = l.file.schedule(l.h, st.eps0, st.ratio, st.levels).map_err(|e| input("problem", e))?;
    ctx.echo_schedule(&s);
    Ok(s)
}

fn trajectory(ctx: &mut Context, name: &str, path: &Path) -> Result<SampledFunction, CliError> {
    let text = ctx.read(name, path)?;
    SampledFunction::from_csv(&text).map_err(|e| input(&format!("{name} {}", path.display()), e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Classical,
    Scale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Assembly {
    Embedding,
    LeastAction,
}

pub fn residual(problem: &Path, traj: &Path, mode: Mode, assembly: Assembly, st: &Settings) -> Result<Report, CliError> {
    let mut ctx = Context::new("residual");
    let l = load_problem(&mut ctx, problem, st)?;
    let p = l.file.delay_problem(l.h).map_err(|e| input("problem", e))?;
    let q = Trajectory::new(trajectory(&mut ctx, "trajectory", traj)?);
    ctx.set("mode", mode);
    let (report, schedule) = match mode {
        Mode::Classical => (classical_el_residual(&p, &q).map_err(variational)?, None),
        Mode::Scale => {
            let s = schedule_of(&mut ctx, &l, st)?;
            ctx.set("assembly", assembly);
            let m = match assembly {
                Assembly::Embedding => ScaleMode::Embedding,
                Assembly::LeastAction => ScaleMode::LeastAction,
            };
            (scale_el_residual(&p, &q, &s, m).map_err(variational)?, Some(s))
        }
    };
    let tolerance = st.tol.unwrap_or(defaults::RESIDUAL);
    let mut metrics = BTreeMap::new();
    metrics.insert("sup".into(), report.sup);
    metrics.insert("l2".into(), report.l2);
    let fields = Field::residual_pair("euler_lagrange", &report).to_vec();
    Ok(ctx.finish(tolerance, report.sup, report.sup <= tolerance, schedule.as_ref(), metrics, BTreeMap::new(), fields))
}

pub fn solve(problem: &Path, guard: f64, st: &Settings) -> Result<Report, CliError> {
    let mut ctx = Context::new("solve");
    let l = load_problem(&mut ctx, problem, st)?;
    let p = l.file.delay_problem(l.h).map_err(|e| input("problem", e))?;
    ctx.set("guard", guard);
    let opts = SolverOptions { history_guard: guard, ..SolverOptions::default() };
    let r = solve_extremal_with(&p, &opts, None).map_err(variational)?;
    let el = classical_el_residual(&p, &r.trajectory).map_err(variational)?;
    let tolerance = st.tol.unwrap_or(defaults::RESIDUAL);
    let mut metrics = BTreeMap::new();
    metrics.insert("iterations".into(), r.iterations as f64);
    metrics.insert("gradient_norm".into(), r.gradient_norm);
    metrics.insert("action".into(), r.action);
    metrics.insert("classical_el_sup".into(), el.sup);
    let q = r.trajectory.samples();
    let (sup, l2) = scalecalc_core::numerics::norms(q.values().iter(), q.step());
    let mut fields = vec![Field::sampled("trajectory", q, sup, l2)];
    fields.extend(Field::residual_pair("euler_lagrange", &el));
    Ok(ctx.finish(tolerance, el.sup, el.sup <= tolerance, None, metrics, BTreeMap::new(), fields))
}

pub fn coherence(problem: &Path, traj: Option<&Path>, st: &Settings) -> Result<Report, CliError> {
    let mut ctx = Context::new("coherence");
    let l = load_problem(&mut ctx, problem, st)?;
    let p = l.file.delay_problem(l.h).map_err(|e| input("problem", e))?;
    let s = schedule_of(&mut ctx, &l, st)?;
    let mut notes = BTreeMap::new();
    let q = match traj {
        Some(path) => Trajectory::new(trajectory(&mut ctx, "trajectory", path)?),
        None => {
            notes.insert("trajectory".into(), "solved extremal of the problem".into());
            solve_extremal_with(&p, &SolverOptions::default(), None).map_err(variational)?.trajectory
        }
    };
    let c = coherence_check(&p, &q, &s).map_err(variational)?;
    let tolerance = st.tol.unwrap_or(defaults::COHERENCE);
    let mut metrics = BTreeMap::new();
    metrics.insert("max_discrepancy".into(), c.difference);
    metrics.insert("embedding_sup".into(), c.embedding.sup);
    metrics.insert("least_action_sup".into(), c.least_action.sup);
    let mut fields = Field::residual_pair("embedding", &c.embedding).to_vec();
    fields.extend(Field::residual_pair("least_action", &c.least_action));
    Ok(ctx.finish(tolerance, c.difference, c.difference <= tolerance, Some(&s), metrics, notes, fields))
}

pub struct TriplePaths<'a> {
    pub q: Option<&'a Path>,
    pub u: Option<&'a Path>,
    pub p: Option<&'a Path>,
}

pub fn control_cmd(problem: &Path, paths: TriplePaths, mode: Mode, reduction: bool, st: &Settings) -> Result<Report, CliError> {
    let mut ctx = Context::new("control");
    let l = load_problem(&mut ctx, problem, st)?;
    let cp = l.file.control_problem(l.h).map_err(|e| input("problem", e))?;
    ctx.set("mode", mode);
    ctx.set("reduction", reduction);
    let schedule = match mode {
        Mode::Classical => None,
        Mode::Scale => Some(schedule_of(&mut ctx, &l, st)?),
    };
    let mut metrics = BTreeMap::new();
    let mut notes = BTreeMap::new();

    if reduction {
        let q = match paths.q {
            Some(path) => Trajectory::new(trajectory(&mut ctx, "q", path)?),
            None => {
                notes.insert("trajectory".into(), "solved extremal of the reduced variational problem".into());
                let dp = delay_problem_for(&cp).map_err(control)?;
                solve_extremal_with(&dp, &SolverOptions::default(), None).map_err(variational)?.trajectory
            }
        };
        let r = el_reduction_check(&cp, &q, schedule.as_ref()).map_err(control)?;
        let tolerance = st.tol.unwrap_or(REDUCTION_TOLERANCE);
        metrics.insert("difference".into(), r.difference);
        metrics.insert("costate_sup".into(), r.costate.sup);
        metrics.insert("euler_lagrange_sup".into(), r.euler_lagrange.sup);
        let mut fields = Field::residual_pair("costate", &r.costate).to_vec();
        fields.extend(Field::residual_pair("euler_lagrange", &r.euler_lagrange));
        return Ok(ctx.finish(tolerance, r.difference, r.difference <= tolerance, schedule.as_ref(), metrics, notes, fields));
    }

    let missing = |flag: &str| CliError::Input(format!("{flag}: required unless --reduction is given"));
    let q = trajectory(&mut ctx, "q", paths.q.ok_or_else(|| missing("--q"))?)?;
    let u = trajectory(&mut ctx, "u", paths.u.ok_or_else(|| missing("--u"))?)?;
    let p = trajectory(&mut ctx, "p", paths.p.ok_or_else(|| missing("--p"))?)?;
    let triple = ControlTriple::new(q, u, p).map_err(|e| input("--q/--u/--p", e))?;
    let report = match &schedule {
        None => pontryagin_residual_classical(&cp, &triple),
        Some(s) => pontryagin_residual_scale(&cp, &triple, s),
    }
    .map_err(control)?;
    let tolerance = st.tol.unwrap_or(defaults::PONTRYAGIN);
    let mut pass = report.sup <= tolerance;
    if let Some(s) = &schedule {
        let system = control_system_residual(&cp, &triple, s).map_err(control)?;
        let identity = identity_gap(&report.state, &system);
        metrics.insert("identity_difference".into(), identity);
        pass &= identity <= defaults::IDENTITY;
    }
    for (name, r) in [("state", &report.state), ("costate", &report.costate), ("stationary", &report.stationary)] {
        metrics.insert(format!("{name}_sup"), r.sup);
    }
    let mut fields = Vec::new();
    for (name, r) in [("state", &report.state), ("costate", &report.costate), ("stationary", &report.stationary)] {
        fields.extend(Field::residual_pair(name, r));
    }
    Ok(ctx.finish(tolerance, report.sup, pass, schedule.as_ref(), metrics, notes, fields))
}

/// Largest pointwise gap between two residual fields on the same nodes.
fn identity_gap(a: &scalecalc_core::delay::ResidualReport, b: &scalecalc_core::delay::ResidualReport) -> f64 {
    let mut d = 0.0f64;
    for (x, y) in a.regimes.iter().zip(&b.regimes) {
        match (&x.residual, &y.residual) {
            (Some(x), Some(y)) if x.len() == y.len() => {
                for (v, w) in x.values().iter().zip(y.values()) {
                    d = d.max((v - w).norm());
                }
            }
            (None, None) => {}
            _ => return f64::INFINITY,
        }
    }
    d
}
