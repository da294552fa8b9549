use num_complex::Complex64;

use crate::expr::{Binding, Var, VarClass};
use crate::fields::Fields;
use crate::numerics::trapezoid;
use crate::sampled::SampledFunction;
use crate::scale::{scale_derivative, EpsilonSchedule};

use super::classical::{action_unchecked, central_derivative, check_grid, classical_fields};
use super::{DelayProblem, Partials, Trajectory, VariationalError};

/// Step of the central difference in `ε`.
pub const FD_STEP: f64 = 1e-5;
/// Allowed gap between the difference quotient and the analytic form.
pub const AGREEMENT_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub enum VariationMode {
    /// Classical action with central-difference `q̇`.
    Classical,
    /// Scale action `∫ L(t, q, □q, q(t−τ), □q(t−τ)) dt`.
    Scale(EpsilonSchedule),
}

/// Directional derivative `d/dε I[q + εh]` at `ε = 0`, two ways.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstVariation {
    pub finite_difference: Complex64,
    /// `∫ L_q·h + L_q̇·ḣ + L_qτ·h(t−τ) + L_q̇τ·ḣ(t−τ)` (with `□h` in scale mode).
    pub analytic: Complex64,
    pub disagreement: f64,
    pub agrees: bool,
    /// Integration interval actually used.
    pub interval: (f64, f64),
}

/// Smooth compactly supported bump `a·exp(1 − 1/(1 − x²))`, `x = (t − c)/r`,
/// in component `component` of a `dim`-vector, sampled like `like`.
pub fn bump(like: &Trajectory, center: f64, radius: f64, amplitude: f64, component: usize) -> Trajectory {
    let s = like.samples();
    let dim = s.dim();
    let values = (0..s.len())
        .flat_map(|i| {
            let x = (s.time(i) - center) / radius;
            let v = if x.abs() < 1.0 { amplitude * (1.0 - 1.0 / (1.0 - x * x)).exp() } else { 0.0 };
            (0..dim).map(move |c| Complex64::new(if c == component { v } else { 0.0 }, 0.0))
        })
        .collect();
    Trajectory::new(SampledFunction::new_unchecked(s.start(), s.step(), dim, values))
}

fn check_variation(p: &DelayProblem, q: &SampledFunction, h: &SampledFunction) -> Result<(), VariationalError> {
    if h.start() != q.start() || h.len() != q.len() || h.dim() != q.dim() || h.step() != q.step() {
        return Err(VariationalError::InvalidVariation("variation must be sampled on the trajectory grid".into()));
    }
    let a = h.index_of(p.t1 - p.tau).map_err(|e| VariationalError::InvalidVariation(e.to_string()))?;
    let b = h.index_of(p.t1).map_err(|e| VariationalError::InvalidVariation(e.to_string()))?;
    let e = h.index_of(p.t2).map_err(|e| VariationalError::InvalidVariation(e.to_string()))?;
    for i in (a..=b).chain([e]) {
        if h.point(i).iter().any(|v| v.norm() > 1e-14) {
            return Err(VariationalError::InvalidVariation(format!("variation is nonzero at t = {}", h.time(i))));
        }
    }
    Ok(())
}

/// `∫ Σ_c (L_q h + L_q̇ ḣ + L_qτ h_τ + L_q̇τ ḣ_τ)` over the nodes `lo..=hi`.
fn analytic_integral(d: &Partials, qf: &Fields, hf: &Fields, lo: i64, hi: i64) -> Result<Vec<Complex64>, VariationalError> {
    let (mut bq, mut bh) = (Binding::new(), Binding::new());
    let mut values = Vec::with_capacity((hi - lo + 1) as usize);
    for n in lo..=hi {
        if !qf.fill_all(&mut bq, n) || !hf.fill_all(&mut bh, n) {
            return Err(VariationalError::InsufficientSamples(format!("no data at t = {}", qf.time(n))));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for c in 0..d.q.len() {
            let pairs = [
                (&d.q[c], VarClass::Q),
                (&d.qdot[c], VarClass::QDot),
                (&d.qtau[c], VarClass::QTau),
                (&d.qdottau[c], VarClass::QDotTau),
            ];
            for (partial, class) in pairs {
                if partial.is_zero() {
                    continue;
                }
                let hv = bh.get(Var::new(class, c)).expect("bound");
                acc += partial.evaluate(&bq)? * hv;
            }
        }
        values.push(acc);
    }
    Ok(values)
}

fn scale_fields<'a>(p: &DelayProblem, q: &'a SampledFunction, dq: &'a SampledFunction) -> Result<Fields<'a>, VariationalError> {
    let mut f = Fields::new(q.start(), q.step(), p.tau_steps());
    f.bind(VarClass::Q, q, None)?;
    f.bind(VarClass::QTau, q, None)?;
    f.bind(VarClass::QDot, dq, None)?;
    f.bind(VarClass::QDotTau, dq, None)?;
    Ok(f)
}

/// Scale action over the nodes of `[t₁, t₂]` where `□q(t)` and `□q(t−τ)`
/// exist.
fn scale_action(p: &DelayProblem, q: &SampledFunction, s: &EpsilonSchedule) -> Result<(Complex64, (i64, i64)), VariationalError> {
    let dq = scale_derivative(q, s)?.values;
    let f = scale_fields(p, q, &dq)?;
    let (lo, hi) = scale_range(p, &f, q, &dq);
    if hi - lo < 1 {
        return Err(VariationalError::InsufficientSamples("scale action needs □q on part of [t1, t2]".into()));
    }
    let mut b = Binding::new();
    let mut values = Vec::with_capacity((hi - lo + 1) as usize);
    for n in lo..=hi {
        f.fill_all(&mut b, n);
        values.push(p.lagrangian.evaluate(&b)?);
    }
    Ok((trapezoid(&values, q.step()), (lo, hi)))
}

fn scale_range(p: &DelayProblem, f: &Fields, q: &SampledFunction, dq: &SampledFunction) -> (i64, i64) {
    let dq_lo = f.node(dq.start());
    let dq_hi = dq_lo + dq.len() as i64 - 1;
    let k = f.tau_steps();
    let lo = f.node(p.t1).max(dq_lo + k).max(k);
    let hi = f.node(p.t2).min(dq_hi).min(q.len() as i64 - 1);
    (lo, hi)
}

/// First variation of the action at `q` in the direction `h_var`.
pub fn first_variation(
    p: &DelayProblem,
    q: &Trajectory,
    h_var: &Trajectory,
    mode: &VariationMode,
) -> Result<FirstVariation, VariationalError> {
    let (q, h_var) = (q.up_to(p.t2), h_var.up_to(p.t2));
    let qs = q.samples();
    let hs = h_var.samples();
    check_grid(p, qs)?;
    check_variation(p, qs, hs)?;
    let one = Complex64::new(1.0, 0.0);
    let plus = qs.combine(hs, one, Complex64::new(FD_STEP, 0.0))?;
    let minus = qs.combine(hs, one, Complex64::new(-FD_STEP, 0.0))?;
    let d = p.partials();

    let (finite_difference, analytic, interval) = match mode {
        VariationMode::Classical => {
            let ip = action_unchecked(p, &plus)?;
            let im = action_unchecked(p, &minus)?;
            let fd = Complex64::new((ip - im) / (2.0 * FD_STEP), 0.0);
            let dq = central_derivative(qs);
            let dh = central_derivative(hs);
            let qf = classical_fields(p, qs, &dq)?;
            let hf = classical_fields(p, hs, &dh)?;
            let (lo, hi) = (qf.node(p.t1), qf.node(p.t2));
            let values = analytic_integral(&d, &qf, &hf, lo, hi)?;
            (fd, trapezoid(&values, qs.step()), (lo, hi))
        }
        VariationMode::Scale(s) => {
            let (ip, range) = scale_action(p, &plus, s)?;
            let (im, _) = scale_action(p, &minus, s)?;
            let fd = (ip - im) / (2.0 * FD_STEP);
            let dq = scale_derivative(qs, s)?.values;
            let dh = scale_derivative(hs, s)?.values;
            let qf = scale_fields(p, qs, &dq)?;
            let hf = scale_fields(p, hs, &dh)?;
            let values = analytic_integral(&d, &qf, &hf, range.0, range.1)?;
            (fd, trapezoid(&values, qs.step()), range)
        }
    };
    let disagreement = (finite_difference - analytic).norm();
    let t = |n: i64| qs.start() + n as f64 * qs.step();
    Ok(FirstVariation {
        finite_difference,
        analytic,
        disagreement,
        agrees: disagreement <= AGREEMENT_TOLERANCE,
        interval: (t(interval.0), t(interval.1)),
    })
}
