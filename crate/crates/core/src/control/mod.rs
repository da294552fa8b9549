//! Optimal control with a constant delay: minimize
//! `∫ L(t, q, q(t−τ), u, u(t−τ)) dt` subject to `q̇ = φ(t, q, q(t−τ), u, u(t−τ))`.
//!
//! With `H = L + p·φ`, candidate triples `(q, u, p)` are checked against the
//! state equation `q̇ = H_p`, the costate equation `ṗ = −H_q − H_qτ(t+τ)` and
//! the stationarity condition `H_u + H_uτ(t+τ) = 0`; advanced terms appear
//! only on `[t₁, t₂−τ]`. In scale mode `q̇, ṗ` become `□q, □p`.

use crate::delay::{
    scale_el_residual, classical_el_residual, DelayProblem, RegimeResidual, ResidualReport, ScaleMode, Trajectory,
    VariationalError,
};
use crate::expr::{Dims, Expr, ExprError, Var, VarClass};
use crate::fields::{common_range, Combination, Fields};
use crate::sampled::{steps_between, GridError, SampledFunction};
use crate::scale::{scale_derivative, CalculusError, EpsilonSchedule};
use crate::zoo::FunctionSpec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ControlError {
    #[error("invalid control problem: {0}")]
    Problem(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Calculus(#[from] CalculusError),
    #[error(transparent)]
    Variational(#[from] VariationalError),
}

const ALLOWED: [VarClass; 5] = [VarClass::T, VarClass::Q, VarClass::QTau, VarClass::U, VarClass::UTau];

#[derive(Debug, Clone, PartialEq)]
pub struct ControlProblem {
    pub lagrangian: Expr,
    pub phi: Vec<Expr>,
    pub tau: f64,
    pub t1: f64,
    pub t2: f64,
    pub history: Vec<FunctionSpec>,
    pub q2: Vec<f64>,
    pub control_dim: usize,
    pub step: f64,
}

impl ControlProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        lagrangian: Expr,
        phi: Vec<Expr>,
        tau: f64,
        t1: f64,
        t2: f64,
        history: Vec<FunctionSpec>,
        q2: Vec<f64>,
        control_dim: usize,
        step: f64,
    ) -> Result<Self, ControlError> {
        let p = ControlProblem { lagrangian, phi, tau, t1, t2, history, q2, control_dim, step };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<(), ControlError> {
        let bad = |m: String| Err(ControlError::Problem(m));
        if !(self.tau > 0.0 && self.t1 < self.t2 && self.tau < self.t2 - self.t1) {
            return bad(format!("need 0 < tau < t2 - t1, got tau = {}, [{}, {}]", self.tau, self.t1, self.t2));
        }
        let d = self.dim();
        if d == 0 || self.q2.len() != d || self.phi.len() != d {
            return bad(format!(
                "history, q2 and phi must all have d components (got {}, {}, {})",
                d,
                self.q2.len(),
                self.phi.len()
            ));
        }
        let dims = Dims::new(d, self.control_dim);
        for e in std::iter::once(&self.lagrangian).chain(&self.phi) {
            for v in e.variables() {
                if !ALLOWED.contains(&v.class) {
                    return bad(format!("{} may not appear in L or phi", v.class.name()));
                }
            }
            e.check_dims(dims)?;
        }
        if steps_between(0.0, self.tau, self.step).is_err() || steps_between(self.t1, self.t2, self.step).is_err() {
            return bad(format!("tau and t2 - t1 must be multiples of h = {}", self.step));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.history.len()
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.dim(), self.control_dim)
    }

    pub fn tau_steps(&self) -> usize {
        steps_between(0.0, self.tau, self.step).expect("validated")
    }

    pub fn junction(&self) -> f64 {
        self.t2 - self.tau
    }

    pub fn regimes(&self) -> [(f64, f64); 2] {
        [(self.t1, self.junction()), (self.junction(), self.t2)]
    }

    /// True when `φ = u` componentwise (requires `m = d`).
    pub fn is_identity_dynamics(&self) -> bool {
        self.control_dim == self.dim()
            && self.phi.iter().enumerate().all(|(i, e)| *e == Expr::var(VarClass::U, i))
    }
}

/// `H = L + Σᵢ p[i]·φ[i]`, constant-folded.
pub fn build_hamiltonian(p: &ControlProblem) -> Expr {
    let coupling = p
        .phi
        .iter()
        .enumerate()
        .map(|(i, f)| Expr::var(VarClass::P, i) * f.clone())
        .reduce(|a, b| a + b)
        .expect("at least one component");
    (p.lagrangian.clone() + coupling).fold_constants()
}

/// `(q, u, p)` sampled on one common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlTriple {
    pub q: SampledFunction,
    pub u: SampledFunction,
    pub p: SampledFunction,
}

impl ControlTriple {
    pub fn new(q: SampledFunction, u: SampledFunction, p: SampledFunction) -> Result<Self, ControlError> {
        for other in [&u, &p] {
            let same_start = (other.start() - q.start()).abs() <= 1e-9 * q.step();
            if !same_start || other.len() != q.len() || (other.step() - q.step()).abs() > 1e-12 * q.step() {
                return Err(ControlError::Grid(GridError::Mismatch));
            }
        }
        Ok(ControlTriple { q, u, p })
    }

    /// Samples after `t₂` are never read by the residual checkers.
    fn up_to(&self, t2: f64) -> ControlTriple {
        ControlTriple { q: self.q.up_to(t2), u: self.u.up_to(t2), p: self.p.up_to(t2) }
    }
}

/// State, costate and stationarity residuals, each over both regimes.
#[derive(Debug, Clone, PartialEq)]
pub struct PontryaginReport {
    pub state: ResidualReport,
    pub costate: ResidualReport,
    pub stationary: ResidualReport,
    pub sup: f64,
}

struct Partials {
    h_p: Vec<Expr>,
    h_q: Vec<Expr>,
    h_qtau: Vec<Expr>,
    h_u: Vec<Expr>,
    h_utau: Vec<Expr>,
}

impl Partials {
    fn of(h: &Expr, d: usize, m: usize) -> Self {
        let pd = |class, n| (0..n).map(|i| h.partial_derivative(Var::new(class, i))).collect();
        Partials {
            h_p: pd(VarClass::P, d),
            h_q: pd(VarClass::Q, d),
            h_qtau: pd(VarClass::QTau, d),
            h_u: pd(VarClass::U, m),
            h_utau: pd(VarClass::UTau, m),
        }
    }
}

/// A time derivative of `q` or `p` with its position on the triple grid.
struct Derivative<'a> {
    values: &'a SampledFunction,
    flags: Option<&'a [bool]>,
}

fn check_triple(p: &ControlProblem, t: &ControlTriple) -> Result<(), ControlError> {
    if t.q.dim() != p.dim() || t.p.dim() != p.dim() || t.u.dim() != p.control_dim {
        return Err(ControlError::Dimension(format!(
            "triple has dims (q {}, u {}, p {}), problem (d {}, m {})",
            t.q.dim(),
            t.u.dim(),
            t.p.dim(),
            p.dim(),
            p.control_dim
        )));
    }
    if (t.q.step() - p.step).abs() > 1e-9 * p.step || t.q.grid_offset(p.t1).is_none() {
        return Err(ControlError::Grid(GridError::Mismatch));
    }
    Ok(())
}

fn triple_fields<'a>(p: &ControlProblem, t: &'a ControlTriple) -> Result<Fields<'a>, ControlError> {
    let mut f = Fields::new(t.q.start(), t.q.step(), p.tau_steps());
    f.bind(VarClass::Q, &t.q, None)?;
    f.bind(VarClass::QTau, &t.q, None)?;
    f.bind(VarClass::U, &t.u, None)?;
    f.bind(VarClass::UTau, &t.u, None)?;
    f.bind(VarClass::P, &t.p, None)?;
    Ok(f)
}

/// `sign·D(t) + Σ parts(t)` on one regime, where `D` is an optional
/// derivative series. A regime without three evaluable nodes comes back
/// empty.
#[allow(clippy::too_many_arguments)]
fn regime_field(
    p: &ControlProblem,
    fields: &Fields,
    decl: (f64, f64),
    derivative: Option<&Derivative>,
    sign: f64,
    parts: &[Combination],
    margin: f64,
    with_flags: bool,
) -> Result<RegimeResidual, ControlError> {
    let Some((mut lo, mut hi)) = common_range(parts, fields) else {
        return Ok(RegimeResidual::empty(decl));
    };
    lo = lo.max(fields.node(decl.0));
    hi = hi.min(fields.node(decl.1));
    let d_lo = derivative.map(|d| fields.node(d.values.start()));
    if let (Some(d), Some(d_lo)) = (derivative, d_lo) {
        lo = lo.max(d_lo);
        hi = hi.min(d_lo + d.values.len() as i64 - 1);
    }
    if hi - lo < 2 {
        return Ok(RegimeResidual::empty(decl));
    }
    let (mut values, mut flags) = Combination::sample(parts, fields, lo, hi)?;
    if let (Some(d), Some(d_lo)) = (derivative, d_lo) {
        let dim = values.dim();
        for n in lo..=hi {
            let (i, j) = ((n - lo) as usize, (n - d_lo) as usize);
            for c in 0..dim {
                values.point_mut(i)[c] += d.values.point(j)[c] * sign;
            }
            if let Some(f) = d.flags {
                flags[i] &= f[j];
            }
        }
    }
    Ok(RegimeResidual::build(
        decl,
        values,
        with_flags.then_some(flags),
        &[p.t1, p.junction()],
        p.tau,
        margin,
    ))
}

fn negated(exprs: &[Expr]) -> Vec<Combination> {
    exprs.iter().map(|e| Combination::single(-e.clone())).collect()
}

fn with_advanced(now: &[Expr], adv: &[Expr], k: i64, advanced: bool) -> Vec<Combination> {
    now.iter()
        .zip(adv)
        .map(|(a, b)| {
            let c = Combination::single(a.clone());
            if advanced {
                c.with(b.clone(), k)
            } else {
                c
            }
        })
        .collect()
}

enum Mode<'a> {
    Classical,
    Scale(&'a EpsilonSchedule),
}

fn residuals(p: &ControlProblem, t: &ControlTriple, mode: Mode) -> Result<PontryaginReport, ControlError> {
    check_triple(p, t)?;
    let t = &t.up_to(p.t2);
    let h = build_hamiltonian(p);
    let d = Partials::of(&h, p.dim(), p.control_dim);
    let fields = triple_fields(p, t)?;
    let k = p.tau_steps() as i64;

    let (dq, dp, dq_flags, dp_flags, margin);
    match mode {
        Mode::Classical => {
            dq = crate::delay::central_derivative(&t.q);
            dp = crate::delay::central_derivative(&t.p);
            dq_flags = None;
            dp_flags = None;
            margin = 2.0 * p.step;
        }
        Mode::Scale(s) => {
            let a = scale_derivative(&t.q, s)?;
            let b = scale_derivative(&t.p, s)?;
            dq_flags = Some(a.points.iter().map(|x| x.converged).collect::<Vec<_>>());
            dp_flags = Some(b.points.iter().map(|x| x.converged).collect::<Vec<_>>());
            dq = a.values;
            dp = b.values;
            margin = s.eps0() + p.step;
        }
    }
    let scale = dq_flags.is_some();
    let qd = Derivative { values: &dq, flags: dq_flags.as_deref() };
    let pd = Derivative { values: &dp, flags: dp_flags.as_deref() };

    let mut state = Vec::new();
    let mut costate = Vec::new();
    let mut stationary = Vec::new();
    for (r, &decl) in p.regimes().iter().enumerate() {
        let advanced = r == 0;
        state.push(regime_field(p, &fields, decl, Some(&qd), 1.0, &negated(&d.h_p), margin, scale)?);
        let co = with_advanced(&d.h_q, &d.h_qtau, k, advanced);
        costate.push(regime_field(p, &fields, decl, Some(&pd), 1.0, &co, margin, scale)?);
        let st = with_advanced(&d.h_u, &d.h_utau, k, advanced);
        stationary.push(regime_field(p, &fields, decl, None, 1.0, &st, margin, scale)?);
    }
    let pack = |v: Vec<RegimeResidual>| -> ResidualReport {
        let [a, b]: [RegimeResidual; 2] = v.try_into().expect("two regimes");
        ResidualReport::new([a, b])
    };
    let (state, costate, stationary) = (pack(state), pack(costate), pack(stationary));
    let sup = state.sup.max(costate.sup).max(stationary.sup);
    Ok(PontryaginReport { state, costate, stationary, sup })
}

/// Classical Pontryagin residuals with central-difference `q̇, ṗ`.
pub fn pontryagin_residual_classical(p: &ControlProblem, t: &ControlTriple) -> Result<PontryaginReport, ControlError> {
    residuals(p, t, Mode::Classical)
}

/// Scale Pontryagin residuals with `□q, □p`; `p` may be complex.
pub fn pontryagin_residual_scale(
    p: &ControlProblem,
    t: &ControlTriple,
    s: &EpsilonSchedule,
) -> Result<PontryaginReport, ControlError> {
    residuals(p, t, Mode::Scale(s))
}

/// `□q − φ` on both regimes, the embedded control system itself.
pub fn control_system_residual(p: &ControlProblem, t: &ControlTriple, s: &EpsilonSchedule) -> Result<ResidualReport, ControlError> {
    check_triple(p, t)?;
    let t = &t.up_to(p.t2);
    let fields = triple_fields(p, t)?;
    let a = scale_derivative(&t.q, s)?;
    let flags: Vec<bool> = a.points.iter().map(|x| x.converged).collect();
    let qd = Derivative { values: &a.values, flags: Some(&flags) };
    let mut out = Vec::new();
    for &decl in &p.regimes() {
        out.push(regime_field(p, &fields, decl, Some(&qd), 1.0, &negated(&p.phi), s.eps0() + p.step, true)?);
    }
    let [x, y]: [RegimeResidual; 2] = out.try_into().expect("two regimes");
    Ok(ResidualReport::new([x, y]))
}

/// The variational problem with `u → q̇`, `u(t−τ) → q̇(t−τ)`.
pub fn delay_problem_for(p: &ControlProblem) -> Result<DelayProblem, ControlError> {
    if !p.is_identity_dynamics() {
        return Err(ControlError::Dimension("the reduction needs phi = u with m = d".into()));
    }
    let l = p.lagrangian.rename_classes(&|c| match c {
        VarClass::U => VarClass::QDot,
        VarClass::UTau => VarClass::QDotTau,
        other => other,
    });
    Ok(DelayProblem::new(l, p.tau, p.t1, p.t2, p.history.clone(), p.q2.clone(), p.step)?)
}

/// Comparison of the costate equation built from `p = L_u + L_uτ(t+τ)` with
/// the Euler-Lagrange residual of the reduced variational problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionReport {
    /// `□p − L_q − L_qτ(t+τ)` with the momentum `p` above (the negative of
    /// the Pontryagin costate residual, since the multiplier is `−p`).
    pub costate: ResidualReport,
    pub euler_lagrange: ResidualReport,
    pub difference: f64,
    pub pass: bool,
}

pub const REDUCTION_TOLERANCE: f64 = 1e-8;

/// `schedule = None` runs the classical variant (`u = q̇` by central
/// differences), otherwise `u = □q`.
pub fn el_reduction_check(
    p: &ControlProblem,
    q: &Trajectory,
    schedule: Option<&EpsilonSchedule>,
) -> Result<ReductionReport, ControlError> {
    let dp = delay_problem_for(p)?;
    let qs = &q.samples().up_to(p.t2);
    if qs.dim() != p.dim() {
        return Err(ControlError::Dimension(format!("trajectory has {} components, problem {}", qs.dim(), p.dim())));
    }
    let u = match schedule {
        None => crate::delay::central_derivative(qs),
        Some(s) => scale_derivative(qs, s)?.values,
    };
    let d = Partials::of(&p.lagrangian, p.dim(), p.control_dim);
    let k = p.tau_steps() as i64;

    let mut costate = Vec::new();
    for (r, &decl) in p.regimes().iter().enumerate() {
        // multiplier −(L_u + L_uτ(t+τ)) on the nodes where it is defined
        let mut f = Fields::new(qs.start(), qs.step(), p.tau_steps());
        f.bind(VarClass::Q, qs, None)?;
        f.bind(VarClass::QTau, qs, None)?;
        f.bind(VarClass::U, &u, None)?;
        f.bind(VarClass::UTau, &u, None)?;
        let parts: Vec<Combination> = with_advanced(&d.h_u, &d.h_utau, k, r == 0);
        let (mut lo, mut hi) = common_range(&parts, &f)
            .ok_or_else(|| ControlError::InsufficientSamples("momentum has no evaluable nodes".into()))?;
        lo = lo.max(0);
        hi = hi.min(qs.len() as i64 - 1);
        if schedule.is_none() {
            // classical: the derivative of the momentum is taken on the regime only
            lo = lo.max(f.node(decl.0));
            hi = hi.min(f.node(decl.1));
        }
        if hi - lo < 2 {
            return Err(ControlError::InsufficientSamples("momentum has fewer than 3 nodes".into()));
        }
        let (momentum, _) = Combination::sample(&parts, &f, lo, hi)?;
        let multiplier = momentum.map(|z| -z);
        let slice = |s: &SampledFunction| s.slice((lo - f.node(s.start())) as usize, (hi - f.node(s.start())) as usize);
        let (qw, uw) = (slice(qs), slice(&u));
        let triple = ControlTriple::new(qw, uw, multiplier)?;
        let report = match schedule {
            None => residuals(p, &triple, Mode::Classical)?,
            Some(s) => residuals(p, &triple, Mode::Scale(s))?,
        };
        let mut reg = report.costate.regimes[r].clone();
        if let Some(res) = reg.residual.as_mut() {
            *res = res.map(|z| -z);
        }
        costate.push(reg);
    }
    let [a, b]: [RegimeResidual; 2] = costate.try_into().expect("two regimes");
    let costate = ResidualReport::new([a, b]);
    let euler_lagrange = match schedule {
        None => classical_el_residual(&dp, q)?,
        Some(s) => scale_el_residual(&dp, q, s, ScaleMode::LeastAction)?,
    };
    let mut difference: f64 = 0.0;
    for (x, y) in costate.regimes.iter().zip(&euler_lagrange.regimes) {
        let (Some(a), Some(b)) = (&x.residual, &y.residual) else { continue };
        for i in 0..a.len() {
            if !x.in_norm[i] {
                continue;
            }
            if let Some(w) = b.at(a.time(i)) {
                for (s, t) in a.point(i).iter().zip(w) {
                    difference = difference.max((s - t).norm());
                }
            }
        }
    }
    Ok(ReductionReport { costate, euler_lagrange, difference, pass: difference <= REDUCTION_TOLERANCE })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay::solve_extremal_direct;
    use crate::expr::parse_expression;
    use num_complex::Complex64;
    use proptest::prelude::*;

    const H: f64 = 1.0 / 200.0;

    fn parse(s: &str) -> Expr {
        parse_expression(s, Dims::new(1, 1)).unwrap()
    }

    fn delayed_control(l: &str, phi: &str, q2: f64) -> ControlProblem {
        ControlProblem::new(parse(l), vec![parse(phi)], 0.5, 0.0, 2.0, vec![FunctionSpec::constant(0.0)], vec![q2], 1, H)
            .unwrap()
    }

    fn sampled(f: impl Fn(f64) -> f64) -> SampledFunction {
        SampledFunction::from_real_fn(-0.5, 2.0, H, f).unwrap()
    }

    /// Extremal of `∫ ½u²` with `q̇ = u(t−τ)`, `q = 0` before `t₁ = 0`,
    /// `q(2) = 1`, `u = 0` on the history: `p ≡ −2/3`, `u = 2/3` on
    /// `[0, 3/2]`, `q = (2/3)(t − 1/2)` after `t = 1/2`.
    fn hand_extremal(bump: f64) -> ControlTriple {
        let c = 2.0 / 3.0;
        let q = sampled(|t| if t <= 0.5 { 0.0 } else { c * (t - 0.5) });
        let u = sampled(|t| if (0.0..=1.5).contains(&t) { c + bump } else { 0.0 });
        let p = sampled(|_| -c);
        ControlTriple::new(q, u, p).unwrap()
    }

    #[test]
    fn hamiltonian_structure() {
        let p = delayed_control("0.5*u[0]^2", "u[0]", 1.0);
        assert_eq!(build_hamiltonian(&p), parse("0.5*u[0]^2 + p[0]*u[0]"));
    }

    #[test]
    fn hand_extremal_satisfies_both_residual_forms() {
        let p = delayed_control("0.5*u[0]^2", "utau[0]", 1.0);
        let t = hand_extremal(0.0);
        let r = pontryagin_residual_classical(&p, &t).unwrap();
        assert!(r.sup <= 1e-9, "{r:?}");
        let s = EpsilonSchedule::default_for_step(H);
        let r = pontryagin_residual_scale(&p, &t, &s).unwrap();
        assert!(r.sup <= 1e-9, "{}", r.sup);
        assert!(!r.state.has_empty_regime() && !r.costate.has_empty_regime());
    }

    #[test]
    fn perturbed_control_breaks_stationarity() {
        let p = delayed_control("0.5*u[0]^2", "utau[0]", 1.0);
        let r = pontryagin_residual_classical(&p, &hand_extremal(0.1)).unwrap();
        assert!((r.stationary.sup - 0.1).abs() <= 1e-12, "{}", r.stationary.sup);
        assert!(r.state.sup >= 0.09);
    }

    #[test]
    fn embedded_system_is_the_state_equation() {
        let p = delayed_control("0.5*u[0]^2 + q[0]^2", "sin(q[0]) + utau[0]*t", 1.0);
        let q = sampled(|t| (2.0 * t).sin());
        let u = sampled(|t| (3.0 * t).cos());
        let c = sampled(|t| t * t);
        let t = ControlTriple::new(q, u, c).unwrap();
        let s = EpsilonSchedule::default_for_step(H);
        let a = pontryagin_residual_scale(&p, &t, &s).unwrap().state;
        let b = control_system_residual(&p, &t, &s).unwrap();
        for (x, y) in a.regimes.iter().zip(&b.regimes) {
            let (x, y) = (x.residual.as_ref().unwrap(), y.residual.as_ref().unwrap());
            assert_eq!(x.len(), y.len());
            for (v, w) in x.values().iter().zip(y.values()) {
                assert!((v - w).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn complex_costate_is_accepted() {
        let p = delayed_control("0.5*u[0]^2", "utau[0]", 1.0);
        let mut t = hand_extremal(0.0);
        t.p = t.p.map(|z| z + Complex64::new(0.0, 0.25));
        let s = EpsilonSchedule::default_for_step(H);
        let r = pontryagin_residual_scale(&p, &t, &s).unwrap();
        // ∂H/∂u = u + p(t+τ) picks up the imaginary part
        assert!((r.stationary.sup - 0.25).abs() <= 1e-12);
        assert!(r.costate.sup <= 1e-9);
    }

    fn oscillator() -> (ControlProblem, Trajectory) {
        let p = ControlProblem::new(
            parse("0.5*u[0]^2 - 0.5*qtau[0]^2"),
            vec![parse("u[0]")],
            0.5,
            0.0,
            2.0,
            vec![FunctionSpec::constant(1.0)],
            vec![0.0],
            1,
            H,
        )
        .unwrap();
        let q = solve_extremal_direct(&delay_problem_for(&p).unwrap()).unwrap().trajectory;
        (p, q)
    }

    #[test]
    fn reduction_reproduces_euler_lagrange() {
        let (p, q) = oscillator();
        let r = el_reduction_check(&p, &q, None).unwrap();
        assert!(r.pass, "{}", r.difference);
        assert!(!r.costate.has_empty_regime() && !r.euler_lagrange.has_empty_regime());
        // same nodes, opposite sign convention would give twice the residual
        for (x, y) in r.costate.regimes.iter().zip(&r.euler_lagrange.regimes) {
            assert_eq!(x.effective, y.effective);
            assert!((x.sup - y.sup).abs() <= 1e-12);
        }
        assert!(r.euler_lagrange.sup <= 1e-4);
        let s = EpsilonSchedule::default_for_step(H);
        let r = el_reduction_check(&p, &q, Some(&s)).unwrap();
        assert!(r.pass, "{}", r.difference);
        assert!(!r.costate.has_empty_regime());
        assert!(r.costate.sup > 0.0);
    }

    #[test]
    fn reduction_requires_identity_dynamics() {
        let p = delayed_control("0.5*u[0]^2", "utau[0]", 1.0);
        let q = Trajectory::from_real_fn(-0.5, 2.0, H, |t| t).unwrap();
        assert!(matches!(el_reduction_check(&p, &q, None), Err(ControlError::Dimension(_))));
    }

    #[test]
    fn validation() {
        let bad = ControlProblem::new(parse("qdot[0]"), vec![parse("u[0]")], 0.5, 0.0, 2.0, vec![FunctionSpec::constant(0.0)], vec![0.0], 1, H);
        assert!(matches!(bad, Err(ControlError::Problem(_))));
        let bad = ControlProblem::new(parse("u[0]"), vec![], 0.5, 0.0, 2.0, vec![FunctionSpec::constant(0.0)], vec![0.0], 1, H);
        assert!(matches!(bad, Err(ControlError::Problem(_))));
        let p = delayed_control("0.5*u[0]^2", "utau[0]", 1.0);
        let t = hand_extremal(0.0);
        let wrong = ControlTriple::new(t.q.clone(), t.u.clone(), t.q.combine(&t.q, Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)).unwrap()).unwrap();
        assert!(pontryagin_residual_classical(&p, &wrong).is_ok());
        let two = SampledFunction::from_fn(-0.5, 2.0, H, 2, |_, v| v.fill(Complex64::new(0.0, 0.0))).unwrap();
        let t2 = ControlTriple::new(t.q.clone(), two, t.p.clone()).unwrap();
        assert!(matches!(pontryagin_residual_classical(&p, &t2), Err(ControlError::Dimension(_))));
    }

    proptest! {
        /// `H` is affine in `L`: `H[L₁ + L₂] = H[L₁] + L₂`.
        #[test]
        fn hamiltonian_affine_in_lagrangian(
            q in -2.0f64..2.0, qt in -2.0f64..2.0, u in -2.0f64..2.0, ut in -2.0f64..2.0,
            pv in -2.0f64..2.0, t in 0.0f64..2.0,
        ) {
            let (l1, l2) = ("0.5*u[0]^2 + q[0]*utau[0]", "sin(qtau[0]) - t*u[0]^3");
            let phi = "q[0]*u[0] + exp(-utau[0])";
            let h = |l: &str| build_hamiltonian(&delayed_control(l, phi, 0.0));
            let both = h(&format!("{l1} + {l2}"));
            let b = {
                let mut b = crate::expr::Binding::new().with_time(t);
                for (c, v) in [(VarClass::Q, q), (VarClass::QTau, qt), (VarClass::U, u), (VarClass::UTau, ut), (VarClass::P, pv)] {
                    b.set(c, &[Complex64::new(v, 0.0)]);
                }
                b
            };
            let lhs = both.evaluate(&b).unwrap();
            let rhs = h(l1).evaluate(&b).unwrap() + parse(l2).evaluate(&b).unwrap();
            prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + lhs.norm()));
        }
    }
}
