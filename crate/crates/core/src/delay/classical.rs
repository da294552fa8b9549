use num_complex::Complex64;

use crate::expr::{Binding, VarClass};
use crate::fields::{common_range, Combination, Fields};
use crate::numerics::{central_difference, trapezoid};
use crate::sampled::SampledFunction;

use super::{DelayProblem, RegimeResidual, ResidualReport, Trajectory, VariationalError};

/// Componentwise central differences, one-sided at both ends.
pub(crate) fn central_derivative(s: &SampledFunction) -> SampledFunction {
    let dim = s.dim();
    let cols: Vec<Vec<Complex64>> = (0..dim).map(|c| central_difference(&s.component(c), s.step())).collect();
    let values = (0..s.len()).flat_map(|i| cols.iter().map(move |col| col[i])).collect();
    SampledFunction::new_unchecked(s.start(), s.step(), dim, values)
}

/// Fields for the classical evaluation operator `[q]_τ`.
pub(crate) fn classical_fields<'a>(p: &DelayProblem, q: &'a SampledFunction, dq: &'a SampledFunction) -> Result<Fields<'a>, VariationalError> {
    let mut f = Fields::new(q.start(), q.step(), p.tau_steps());
    f.bind(VarClass::Q, q, None)?;
    f.bind(VarClass::QTau, q, None)?;
    f.bind(VarClass::QDot, dq, None)?;
    f.bind(VarClass::QDotTau, dq, None)?;
    Ok(f)
}

pub(crate) fn check_grid(p: &DelayProblem, q: &SampledFunction) -> Result<(), VariationalError> {
    if (q.step() - p.step).abs() > 1e-9 * p.step || q.grid_offset(p.t1).is_none() {
        return Err(VariationalError::Grid(crate::sampled::GridError::Mismatch));
    }
    if q.dim() != p.dim() {
        return Err(VariationalError::Problem(format!("trajectory has {} components, problem {}", q.dim(), p.dim())));
    }
    Ok(())
}

/// Trapezoid rule for `∫_{t₁}^{t₂} L[q]_τ dt` with `q̇` from central
/// differences over the whole trajectory.
pub fn action_value(p: &DelayProblem, q: &Trajectory) -> Result<f64, VariationalError> {
    q.check_admissible(p)?;
    action_unchecked(p, q.samples())
}

pub(crate) fn action_unchecked(p: &DelayProblem, q: &SampledFunction) -> Result<f64, VariationalError> {
    let dq = central_derivative(q);
    let fields = classical_fields(p, q, &dq)?;
    let integrand = Combination::single(p.lagrangian.clone());
    let (lo, hi) = (fields.node(p.t1), fields.node(p.t2));
    let (a, b) = integrand.range(&fields).unwrap_or((i64::MAX, i64::MIN));
    if a > lo || b < hi {
        return Err(VariationalError::InsufficientSamples("action integrand needs q on [t1 - tau, t2]".into()));
    }
    let mut binding = Binding::new();
    let values = (lo..=hi)
        .map(|n| integrand.eval(&fields, n, &mut binding))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(trapezoid(&values, q.step()).re)
}

/// The bracket `L_q̇(t) + L_q̇τ(t+τ)` and right side `L_q(t) + L_qτ(t+τ)` of
/// one regime, per component; the second regime drops the advanced terms.
pub(crate) fn el_parts(p: &DelayProblem, regime: usize) -> (Vec<Combination>, Vec<Combination>) {
    let d = p.partials();
    let k = p.tau_steps() as i64;
    let advanced = regime == 0;
    let bracket = (0..p.dim())
        .map(|c| {
            let base = Combination::single(d.qdot[c].clone());
            if advanced {
                base.with(d.qdottau[c].clone(), k)
            } else {
                base
            }
        })
        .collect();
    let right = (0..p.dim())
        .map(|c| {
            let base = Combination::single(d.q[c].clone());
            if advanced {
                base.with(d.qtau[c].clone(), k)
            } else {
                base
            }
        })
        .collect();
    (bracket, right)
}

/// Node range of a declared regime intersected with data availability.
pub(crate) fn regime_range(fields: &Fields, declared: (f64, f64), parts: &[&[Combination]]) -> Option<(i64, i64)> {
    let mut lo = fields.node(declared.0);
    let mut hi = fields.node(declared.1);
    for p in parts {
        let (a, b) = common_range(p, fields)?;
        lo = lo.max(a);
        hi = hi.min(b);
    }
    (hi >= lo).then_some((lo, hi))
}

/// Classical Euler-Lagrange residual on both regimes, with `q̇` and the
/// outer `d/dt` taken by central differences (one-sided at the ends of each
/// evaluated interval; those nodes are excluded from the norms).
pub fn classical_el_residual(p: &DelayProblem, q: &Trajectory) -> Result<ResidualReport, VariationalError> {
    let q = q.up_to(p.t2);
    let qs = q.samples();
    check_grid(p, qs)?;
    let dq = central_derivative(qs);
    let fields = classical_fields(p, qs, &dq)?;
    let declared = p.regimes();
    let mut regimes = Vec::with_capacity(2);
    for (r, &decl) in declared.iter().enumerate() {
        let (bracket, right) = el_parts(p, r);
        let range = regime_range(&fields, decl, &[&bracket, &right]).filter(|(lo, hi)| hi - lo >= 2);
        let Some((lo, hi)) = range else {
            return Err(VariationalError::InsufficientSamples(format!(
                "regime [{}, {}] has fewer than 3 evaluable nodes",
                decl.0, decl.1
            )));
        };
        let (pb, _) = Combination::sample(&bracket, &fields, lo, hi)?;
        let (rhs, _) = Combination::sample(&right, &fields, lo, hi)?;
        let dp = central_derivative(&pb);
        let residual = dp.combine(&rhs, Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0))?;
        regimes.push(RegimeResidual::build(decl, residual, None, &[p.t1, p.junction()], p.tau, 2.0 * p.step));
    }
    let [a, b]: [RegimeResidual; 2] = regimes.try_into().expect("two regimes");
    Ok(ResidualReport::new([a, b]))
}
