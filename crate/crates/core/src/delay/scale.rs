use num_complex::Complex64;

use crate::expr::{Binding, Expr, VarClass};
use crate::sampled::SampledFunction;
use crate::scale::{scale_derivative, EpsilonSchedule};

use super::classical::check_grid;
use super::embed::{embed_operator_family, OperatorFamily};
use super::{DelayProblem, RegimeResidual, ResidualReport, Trajectory, VariationalError};

/// How the scale Euler-Lagrange residual is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleMode {
    /// Embed the classical Euler-Lagrange operator family.
    Embedding,
    /// Assemble the least-action equation directly from the partials.
    LeastAction,
}

/// Scale Euler-Lagrange residual on both regimes. Nodes within `2ε₀ + h` of
/// `t₁` or `t₂−τ` (or of their `±τ` shifts) are reported but kept out of
/// the norms.
pub fn scale_el_residual(
    p: &DelayProblem,
    q: &Trajectory,
    schedule: &EpsilonSchedule,
    mode: ScaleMode,
) -> Result<ResidualReport, VariationalError> {
    let q = &q.up_to(p.t2);
    check_grid(p, q.samples())?;
    let margin = 2.0 * schedule.eps0() + p.step;
    let mut regimes = Vec::with_capacity(2);
    for (r, &decl) in p.regimes().iter().enumerate() {
        let (values, flags) = match mode {
            ScaleMode::Embedding => {
                let op = embed_operator_family(OperatorFamily::euler_lagrange(p, r))?;
                let v = op.apply(q, schedule)?;
                (v.values, v.converged)
            }
            ScaleMode::LeastAction => least_action(p, q.samples(), schedule, r)?,
        };
        regimes.push(restrict_regime(decl, values, flags, p, margin)?);
    }
    let [a, b]: [RegimeResidual; 2] = regimes.try_into().expect("two regimes");
    Ok(ResidualReport::new([a, b]))
}

fn restrict_regime(
    decl: (f64, f64),
    values: SampledFunction,
    flags: Vec<bool>,
    p: &DelayProblem,
    margin: f64,
) -> Result<RegimeResidual, VariationalError> {
    let first = values.grid_offset(decl.0).expect("aligned").max(0);
    let last = values.grid_offset(decl.1).expect("aligned").min(values.len() as i64 - 1);
    if last - first < 2 {
        return Err(VariationalError::InsufficientSamples(format!(
            "regime [{}, {}] has fewer than 3 evaluable nodes",
            decl.0, decl.1
        )));
    }
    let (lo, hi) = (first as usize, last as usize);
    Ok(RegimeResidual::build(
        decl,
        values.slice(lo, hi),
        Some(flags[lo..=hi].to_vec()),
        &[p.t1, p.junction()],
        p.tau,
        margin,
    ))
}

/// Index bookkeeping for `[q]^□_τ` on the trajectory grid.
struct Tuple<'a> {
    q: &'a SampledFunction,
    dq: &'a SampledFunction,
    dq_flags: Vec<bool>,
    /// position of `dq`'s first node on the `q` grid
    dq_offset: i64,
    k: i64,
}

impl Tuple<'_> {
    /// Binds the classes used by `e` at node `n` of the `q` grid; `None` when
    /// a needed sample is missing. The flag is the conjunction of the
    /// extraction flags of the bound `□q` values.
    fn bind(&self, e: &Expr, n: i64, b: &mut Binding) -> Option<bool> {
        let mut ok = true;
        b.set_time(self.q.time(0) + n as f64 * self.q.step());
        for class in [VarClass::Q, VarClass::QDot, VarClass::QTau, VarClass::QDotTau] {
            if !e.uses_class(class) {
                continue;
            }
            let (series, offset, node) = match class {
                VarClass::Q => (self.q, 0, n),
                VarClass::QTau => (self.q, 0, n - self.k),
                VarClass::QDot => (self.dq, self.dq_offset, n),
                _ => (self.dq, self.dq_offset, n - self.k),
            };
            let i = node - offset;
            if i < 0 || i >= series.len() as i64 {
                return None;
            }
            if matches!(class, VarClass::QDot | VarClass::QDotTau) {
                ok &= self.dq_flags[i as usize];
            }
            b.set(class, series.point(i as usize));
        }
        Some(ok)
    }
}

/// `□/□t [L_□q(t) + L_□qτ(t+τ)] − [L_q(t) + L_qτ(t+τ)]` (advanced terms only
/// in regime 0), evaluated wherever the data allow.
fn least_action(
    p: &DelayProblem,
    q: &SampledFunction,
    schedule: &EpsilonSchedule,
    regime: usize,
) -> Result<(SampledFunction, Vec<bool>), VariationalError> {
    let d = p.partials();
    let dim = p.dim();
    let k = p.tau_steps() as i64;
    let advanced = regime == 0;
    let dq = scale_derivative(q, schedule)?;
    let tuple = Tuple {
        q,
        dq: &dq.values,
        dq_flags: dq.points.iter().map(|x| x.converged).collect(),
        dq_offset: schedule.max_steps() as i64,
        k,
    };
    let mut b = Binding::new();
    let n_nodes = q.len() as i64;

    // A(s) on the longest run of nodes where it is defined
    let mut a_values: Vec<(i64, Vec<Complex64>, bool)> = Vec::new();
    for n in 0..n_nodes {
        let mut comp = Vec::with_capacity(dim);
        let mut ok = true;
        let mut defined = true;
        for c in 0..dim {
            let Some(f1) = tuple.bind(&d.qdot[c], n, &mut b) else {
                defined = false;
                break;
            };
            let mut v = d.qdot[c].evaluate(&b)?;
            ok &= f1;
            if advanced {
                let Some(f2) = tuple.bind(&d.qdottau[c], n + k, &mut b) else {
                    defined = false;
                    break;
                };
                v += d.qdottau[c].evaluate(&b)?;
                ok &= f2;
            }
            comp.push(v);
        }
        if defined {
            a_values.push((n, comp, ok));
        }
    }
    let Some(&(a_lo, _, _)) = a_values.first() else {
        return Err(VariationalError::InsufficientSamples("momentum bracket has no evaluable nodes".into()));
    };
    let a_len = a_values.len();
    let bracket = SampledFunction::new_unchecked(
        q.time(a_lo as usize),
        q.step(),
        dim,
        a_values.iter().flat_map(|(_, v, _)| v.iter().copied()).collect(),
    );
    let d_bracket = scale_derivative(&bracket, schedule)?;
    let shrink = schedule.max_steps() as i64;

    let mut values = Vec::new();
    let mut flags = Vec::new();
    let mut first = None;
    for j in 0..d_bracket.values.len() {
        let n = a_lo + shrink + j as i64;
        let mut row = Vec::with_capacity(dim);
        let mut ok = d_bracket.points[j].converged && a_values[(j as i64 + shrink) as usize].2;
        let mut defined = true;
        for c in 0..dim {
            let Some(f1) = tuple.bind(&d.q[c], n, &mut b) else {
                defined = false;
                break;
            };
            let mut rhs = d.q[c].evaluate(&b)?;
            ok &= f1;
            if advanced {
                let Some(f2) = tuple.bind(&d.qtau[c], n + k, &mut b) else {
                    defined = false;
                    break;
                };
                rhs += d.qtau[c].evaluate(&b)?;
                ok &= f2;
            }
            row.push(d_bracket.values.point(j)[c] - rhs);
        }
        if defined {
            first.get_or_insert(n);
            values.extend(row);
            flags.push(ok);
        } else if first.is_some() {
            break;
        }
    }
    debug_assert!(a_len >= flags.len());
    let Some(first) = first else {
        return Err(VariationalError::InsufficientSamples("least-action residual has no evaluable nodes".into()));
    };
    Ok((SampledFunction::new_unchecked(q.time(first as usize), q.step(), dim, values), flags))
}

/// Side-by-side comparison of the two assembly paths.
#[derive(Debug, Clone)]
pub struct CoherenceReport {
    pub embedding: ResidualReport,
    pub least_action: ResidualReport,
    /// Sup over both regimes and all common nodes of the pointwise difference.
    pub difference: f64,
    pub pass: bool,
}

pub const COHERENCE_TOLERANCE: f64 = 1e-10;

pub fn coherence_check(p: &DelayProblem, q: &Trajectory, schedule: &EpsilonSchedule) -> Result<CoherenceReport, VariationalError> {
    let embedding = scale_el_residual(p, q, schedule, ScaleMode::Embedding)?;
    let least_action = scale_el_residual(p, q, schedule, ScaleMode::LeastAction)?;
    let mut difference: f64 = 0.0;
    for (x, y) in embedding.regimes.iter().zip(&least_action.regimes) {
        let (Some(a), Some(b)) = (&x.residual, &y.residual) else { continue };
        for i in 0..a.len() {
            if let Some(w) = b.at(a.time(i)) {
                for (u, v) in a.point(i).iter().zip(w) {
                    difference = difference.max((u - v).norm());
                }
            }
        }
    }
    Ok(CoherenceReport { embedding, least_action, difference, pass: difference <= COHERENCE_TOLERANCE })
}
