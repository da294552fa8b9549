//! Operator families `O = Σᵢ Fᵢ · (dⁱ/dtⁱ ∘ Gᵢ)` and their non-differentiable
//! embedding, which replaces each `dⁱ/dtⁱ` by the i-fold scale derivative
//! and the evaluation operator `[q]_τ` by `[q]^□_τ = (t, q, □q, q(t−τ), □q(t−τ))`.

use num_complex::Complex64;

use crate::expr::{Expr, VarClass};
use crate::fields::{Combination, Fields};
use crate::sampled::{steps_between, SampledFunction};
use crate::scale::{scale_derivative, scale_derivative_k, EpsilonSchedule, ScaleDerivative};

use super::{DelayProblem, Trajectory, VariationalError};

/// Whether a coefficient term is evaluated at `t` or at the advanced time `t+τ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shift {
    Now,
    Advanced,
}

/// Sum of expressions in the evaluation-operator variables.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Coefficient {
    pub terms: Vec<(Expr, Shift)>,
}

impl Coefficient {
    pub fn zero() -> Self {
        Coefficient::default()
    }

    pub fn one() -> Self {
        Coefficient::of(Expr::constant(1.0))
    }

    pub fn of(e: Expr) -> Self {
        Coefficient { terms: vec![(e, Shift::Now)] }
    }

    pub fn with(mut self, e: Expr, shift: Shift) -> Self {
        self.terms.push((e, shift));
        self
    }

    fn combination(&self, tau_steps: i64) -> Combination {
        self.terms.iter().fold(Combination::new(), |c, (e, s)| {
            c.with(e.clone(), if *s == Shift::Advanced { tau_steps } else { 0 })
        })
    }
}

/// The `i`-th term of a family: one `(Fᵢ, Gᵢ)` pair per output component.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyTerm {
    pub f: Vec<Coefficient>,
    pub g: Vec<Coefficient>,
}

/// `O^{k,τ}_{f,g}`; `terms[i]` carries the derivative of order `i` (the
/// zeroth derivative is the identity).
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorFamily {
    pub terms: Vec<FamilyTerm>,
    /// Order `k` of the evaluation operator: `[q]^k_τ` holds derivatives up to `k`.
    pub order: usize,
    pub tau: f64,
}

impl OperatorFamily {
    /// The family whose value is the left-minus-right side of the
    /// Euler-Lagrange equation of `regime` (0: with advanced terms).
    pub fn euler_lagrange(p: &DelayProblem, regime: usize) -> OperatorFamily {
        let d = p.partials();
        let advanced = regime == 0;
        let dim = p.dim();
        let f0 = (0..dim)
            .map(|c| {
                let base = Coefficient::of(-d.q[c].clone());
                if advanced {
                    base.with(-d.qtau[c].clone(), Shift::Advanced)
                } else {
                    base
                }
            })
            .collect();
        let g1 = (0..dim)
            .map(|c| {
                let base = Coefficient::of(d.qdot[c].clone());
                if advanced {
                    base.with(d.qdottau[c].clone(), Shift::Advanced)
                } else {
                    base
                }
            })
            .collect();
        OperatorFamily {
            terms: vec![
                FamilyTerm { f: f0, g: vec![Coefficient::one(); dim] },
                FamilyTerm { f: vec![Coefficient::one(); dim], g: g1 },
            ],
            order: 1,
            tau: p.tau,
        }
    }

    pub fn dim(&self) -> usize {
        self.terms.first().map_or(0, |t| t.f.len())
    }
}

/// Evaluator produced by [`embed_operator_family`].
#[derive(Debug, Clone)]
pub struct EmbeddedOperator {
    family: OperatorFamily,
}

/// Values of an embedded operator on its effective interval.
#[derive(Debug, Clone)]
pub struct EmbeddedValues {
    pub values: SampledFunction,
    pub converged: Vec<bool>,
}

pub fn embed_operator_family(family: OperatorFamily) -> Result<EmbeddedOperator, VariationalError> {
    if family.order != 1 {
        return Err(VariationalError::UnsupportedOrder(family.order));
    }
    if family.terms.is_empty() {
        return Err(VariationalError::Problem("operator family has no terms".into()));
    }
    let dim = family.dim();
    for t in &family.terms {
        if t.f.len() != dim || t.g.len() != dim {
            return Err(VariationalError::Problem("f and g must have one entry per component".into()));
        }
    }
    if !(family.tau > 0.0) {
        return Err(VariationalError::Problem(format!("tau must be positive, got {}", family.tau)));
    }
    Ok(EmbeddedOperator { family })
}

/// Node range intersection helper; `None` when empty.
fn intersect(a: (i64, i64), b: (i64, i64)) -> Option<(i64, i64)> {
    let r = (a.0.max(b.0), a.1.min(b.1));
    (r.1 >= r.0).then_some(r)
}

impl EmbeddedOperator {
    pub fn family(&self) -> &OperatorFamily {
        &self.family
    }

    /// Applies the embedded operator to `q` on the largest interval where
    /// every ingredient is available.
    pub fn apply(&self, q: &Trajectory, schedule: &EpsilonSchedule) -> Result<EmbeddedValues, VariationalError> {
        let qs = q.samples();
        let tau_steps = steps_between(0.0, self.family.tau, qs.step())? as i64;
        let dq: ScaleDerivative = scale_derivative(qs, schedule)?;
        let dq_flags = dq.points.iter().map(|p| p.converged).collect::<Vec<_>>();
        let mut fields = Fields::new(qs.start(), qs.step(), tau_steps as usize);
        fields.bind(VarClass::Q, qs, None)?;
        fields.bind(VarClass::QTau, qs, None)?;
        fields.bind(VarClass::QDot, &dq.values, Some(&dq_flags))?;
        fields.bind(VarClass::QDotTau, &dq.values, Some(&dq_flags))?;
        let grid = (0, qs.len() as i64 - 1);
        let empty = || VariationalError::InsufficientSamples("embedded operator has no evaluable nodes".into());
        let range_of = |parts: &[Combination]| -> Result<(i64, i64), VariationalError> {
            let r = crate::fields::common_range(parts, &fields).ok_or_else(empty)?;
            intersect(r, grid).ok_or_else(empty)
        };

        // □ⁱGᵢ and Fᵢ for every term, each with its own node range
        let mut pieces = Vec::with_capacity(self.family.terms.len());
        let mut out_range = grid;
        for (i, term) in self.family.terms.iter().enumerate() {
            let f: Vec<Combination> = term.f.iter().map(|c| c.combination(tau_steps)).collect();
            let g: Vec<Combination> = term.g.iter().map(|c| c.combination(tau_steps)).collect();
            let fr = range_of(&f)?;
            let gr = range_of(&g)?;
            let (fv, ff) = Combination::sample(&f, &fields, fr.0, fr.1)?;
            let (gv, gf) = Combination::sample(&g, &fields, gr.0, gr.1)?;
            let (dg, dflags, dlo) = if i == 0 {
                (gv, gf, gr.0)
            } else {
                let d = scale_derivative_k(&gv, i, schedule)?;
                let shrink = (i * schedule.max_steps()) as usize;
                let flags = d.points.iter().enumerate().map(|(j, p)| p.converged && gf[j + shrink]).collect();
                (d.values, flags, gr.0 + shrink as i64)
            };
            let dr = (dlo, dlo + dg.len() as i64 - 1);
            out_range = intersect(out_range, fr).and_then(|r| intersect(r, dr)).ok_or_else(empty)?;
            pieces.push((fv, ff, fr.0, dg, dflags, dlo));
        }

        let dim = self.family.dim();
        let (lo, hi) = out_range;
        let mut values = Vec::with_capacity(((hi - lo + 1) as usize) * dim);
        let mut converged = Vec::with_capacity((hi - lo + 1) as usize);
        for n in lo..=hi {
            let mut ok = true;
            let start = values.len();
            values.resize(start + dim, Complex64::new(0.0, 0.0));
            for (fv, ff, flo, dg, dflags, dlo) in &pieces {
                let (a, b) = ((n - flo) as usize, (n - dlo) as usize);
                for c in 0..dim {
                    values[start + c] += fv.point(a)[c] * dg.point(b)[c];
                }
                ok &= ff[a] && dflags[b];
            }
            converged.push(ok);
        }
        Ok(EmbeddedValues { values: SampledFunction::new_unchecked(fields.time(lo), qs.step(), dim, values), converged })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expression, Dims};
    use crate::zoo::FunctionSpec;

    fn e(s: &str) -> Expr {
        parse_expression(s, Dims::state_only(1)).unwrap()
    }

    fn family(terms: Vec<(Coefficient, Coefficient)>) -> OperatorFamily {
        OperatorFamily {
            terms: terms.into_iter().map(|(f, g)| FamilyTerm { f: vec![f], g: vec![g] }).collect(),
            order: 1,
            tau: 0.1,
        }
    }

    #[test]
    fn identity_and_single_derivative() {
        let h = 1e-3;
        let s = EpsilonSchedule::default_for_step(h);
        let q = Trajectory::from_real_fn(0.0, 1.0, h, |t| (2.0 * t).sin()).unwrap();

        let id = embed_operator_family(family(vec![(Coefficient::one(), Coefficient::of(e("q[0]")))])).unwrap();
        let v = id.apply(&q, &s).unwrap();
        assert_eq!(v.values, *q.samples());

        let d = embed_operator_family(family(vec![
            (Coefficient::zero(), Coefficient::of(e("q[0]"))),
            (Coefficient::one(), Coefficient::of(e("q[0]"))),
        ]))
        .unwrap();
        let v = d.apply(&q, &s).unwrap();
        let direct = scale_derivative(q.samples(), &s).unwrap();
        assert_eq!(v.values, direct.values);
    }

    #[test]
    fn euler_lagrange_family_on_a_line() {
        let h = 1e-3;
        let p = DelayProblem::new(
            e("0.5*qdot[0]^2"),
            0.5,
            0.0,
            2.0,
            vec![FunctionSpec::Poly(vec![0.0, 1.0])],
            vec![2.0],
            h,
        )
        .unwrap();
        let q = Trajectory::from_real_fn(-0.6, 2.1, h, |t| t).unwrap();
        let s = EpsilonSchedule::default_for_step(h);
        for r in 0..2 {
            let op = embed_operator_family(OperatorFamily::euler_lagrange(&p, r)).unwrap();
            let v = op.apply(&q, &s).unwrap();
            assert!(v.values.values().iter().all(|x| x.norm() <= 1e-8));
            assert!(v.converged.iter().all(|&c| c));
        }
    }

    #[test]
    fn malformed_families() {
        let mut f = family(vec![(Coefficient::one(), Coefficient::one())]);
        f.order = 2;
        assert!(matches!(embed_operator_family(f), Err(VariationalError::UnsupportedOrder(2))));
        let bad = OperatorFamily {
            terms: vec![FamilyTerm { f: vec![Coefficient::one()], g: vec![] }],
            order: 1,
            tau: 0.1,
        };
        assert!(embed_operator_family(bad).is_err());
    }
}
