//! Variational problems with a constant time delay.
//!
//! The action is `I[q] = ∫_{t₁}^{t₂} L(t, q, q̇, q(t−τ), q̇(t−τ)) dt` with
//! `q = δ` on `[t₁−τ, t₁]` and `q(t₂) = q₂`. Its Euler-Lagrange equations
//! have two regimes: on `[t₁, t₂−τ]` the delayed partials enter through the
//! advanced argument `t+τ`, on `[t₂−τ, t₂]` they do not.

mod classical;
mod embed;
mod scale;
mod solve;
mod variation;

use num_complex::Complex64;

use crate::expr::{Dims, Expr, ExprError, Var, VarClass};
use crate::numerics::norms;
use crate::sampled::{steps_between, GridError, SampledFunction};
use crate::scale::CalculusError;
use crate::zoo::{sample_vector_on_grid, FunctionError, FunctionSpec};

pub use classical::{action_value, classical_el_residual};
pub(crate) use classical::central_derivative;
pub use embed::{embed_operator_family, Coefficient, EmbeddedOperator, EmbeddedValues, FamilyTerm, OperatorFamily, Shift};
pub use scale::{coherence_check, scale_el_residual, CoherenceReport, ScaleMode};
pub use solve::{solve_extremal_direct, solve_extremal_with, SolveReport, SolverOptions};
pub use variation::{bump, first_variation, FirstVariation, VariationMode};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VariationalError {
    #[error("invalid problem: {0}")]
    Problem(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Calculus(#[from] CalculusError),
    #[error(transparent)]
    Function(#[from] FunctionError),
    #[error("inadmissible trajectory: {0}")]
    Inadmissible(String),
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error("inadmissible variation: {0}")]
    InvalidVariation(String),
    #[error("Newton iteration did not converge after {iterations} steps (gradient norm {gradient_norm:e})")]
    NonConvergence { iterations: usize, gradient_norm: f64 },
    #[error("singular Hessian in the transcription solver")]
    SingularHessian,
    #[error("operator families of order {0} are not supported (only 1)")]
    UnsupportedOrder(usize),
}

/// Which variable classes a Lagrangian may use.
const LAGRANGIAN_CLASSES: [VarClass; 5] = [VarClass::T, VarClass::Q, VarClass::QDot, VarClass::QTau, VarClass::QDotTau];

/// Problem data. `step` is the working grid; `τ` and `t₂ − t₁` must be
/// integer multiples of it.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayProblem {
    pub lagrangian: Expr,
    pub tau: f64,
    pub t1: f64,
    pub t2: f64,
    pub history: Vec<FunctionSpec>,
    pub q2: Vec<f64>,
    pub step: f64,
}

/// First partials of `L` with respect to the four argument slots, one
/// expression per state component.
#[derive(Debug, Clone, PartialEq)]
pub struct Partials {
    pub q: Vec<Expr>,
    pub qdot: Vec<Expr>,
    pub qtau: Vec<Expr>,
    pub qdottau: Vec<Expr>,
}

impl Partials {
    pub fn of(l: &Expr, dim: usize) -> Partials {
        let d = |class| (0..dim).map(|i| l.partial_derivative(Var::new(class, i))).collect();
        Partials { q: d(VarClass::Q), qdot: d(VarClass::QDot), qtau: d(VarClass::QTau), qdottau: d(VarClass::QDotTau) }
    }
}

impl DelayProblem {
    pub fn new(
        lagrangian: Expr,
        tau: f64,
        t1: f64,
        t2: f64,
        history: Vec<FunctionSpec>,
        q2: Vec<f64>,
        step: f64,
    ) -> Result<Self, VariationalError> {
        let p = DelayProblem { lagrangian, tau, t1, t2, history, q2, step };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<(), VariationalError> {
        let bad = |m: String| Err(VariationalError::Problem(m));
        if !(self.tau > 0.0) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if !(self.t1 < self.t2) {
            return bad(format!("need t1 < t2, got {} and {}", self.t1, self.t2));
        }
        if !(self.tau < self.t2 - self.t1) {
            return bad(format!("need tau < t2 - t1, got tau = {}", self.tau));
        }
        if self.history.is_empty() {
            return bad("history must have at least one component".into());
        }
        if self.q2.len() != self.dim() {
            return bad(format!("q2 has {} components, history has {}", self.q2.len(), self.dim()));
        }
        for v in self.lagrangian.variables() {
            if !LAGRANGIAN_CLASSES.contains(&v.class) {
                return bad(format!("lagrangian may not use {}", v.class.name()));
            }
        }
        self.lagrangian.check_dims(Dims::state_only(self.dim()))?;
        steps_between(0.0, self.tau, self.step).map_err(|_| {
            VariationalError::Problem(format!("tau = {} is not a multiple of h = {}", self.tau, self.step))
        })?;
        steps_between(self.t1, self.t2, self.step).map_err(|_| {
            VariationalError::Problem(format!("t2 - t1 is not a multiple of h = {}", self.step))
        })?;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.history.len()
    }

    pub fn tau_steps(&self) -> usize {
        steps_between(0.0, self.tau, self.step).expect("validated")
    }

    pub fn partials(&self) -> Partials {
        Partials::of(&self.lagrangian, self.dim())
    }

    /// The junction `t₂ − τ` between the two regimes.
    pub fn junction(&self) -> f64 {
        self.t2 - self.tau
    }

    /// Declared regime intervals `[t₁, t₂−τ]` and `[t₂−τ, t₂]`.
    pub fn regimes(&self) -> [(f64, f64); 2] {
        [(self.t1, self.junction()), (self.junction(), self.t2)]
    }

    /// History sampled on `[a, t₁]`.
    pub fn sample_history(&self, a: f64) -> Result<SampledFunction, VariationalError> {
        Ok(sample_vector_on_grid(&self.history, a, self.t1, self.step)?)
    }

    pub fn history_at(&self, t: f64) -> Vec<f64> {
        self.history.iter().map(|s| s.eval(t)).collect()
    }
}

/// A sampled path `q`, real `d`-vector valued, covering at least part of
/// `[t₁−τ, t₂]`; extra guard samples on either side are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: SampledFunction,
}

impl Trajectory {
    pub fn new(samples: SampledFunction) -> Self {
        Trajectory { samples }
    }

    pub fn from_fn(a: f64, b: f64, h: f64, dim: usize, f: impl FnMut(f64, &mut [Complex64])) -> Result<Self, GridError> {
        Ok(Trajectory { samples: SampledFunction::from_fn(a, b, h, dim, f)? })
    }

    pub fn from_real_fn(a: f64, b: f64, h: f64, f: impl Fn(f64) -> f64) -> Result<Self, GridError> {
        Ok(Trajectory { samples: SampledFunction::from_real_fn(a, b, h, f)? })
    }

    pub fn samples(&self) -> &SampledFunction {
        &self.samples
    }

    pub fn into_samples(self) -> SampledFunction {
        self.samples
    }

    /// Samples after `t₂` are never read by the residual checkers.
    pub(crate) fn up_to(&self, t2: f64) -> Trajectory {
        Trajectory::new(self.samples.up_to(t2))
    }

    pub fn dim(&self) -> usize {
        self.samples.dim()
    }

    /// Checks history agreement on `[t₁−τ, t₁]` and the endpoint value.
    pub fn check_admissible(&self, p: &DelayProblem) -> Result<(), VariationalError> {
        let q = &self.samples;
        if q.dim() != p.dim() {
            return Err(VariationalError::Inadmissible(format!("dimension {} != {}", q.dim(), p.dim())));
        }
        let a = q.index_of(p.t1 - p.tau).map_err(|e| VariationalError::Inadmissible(e.to_string()))?;
        let b = q.index_of(p.t1).map_err(|e| VariationalError::Inadmissible(e.to_string()))?;
        for i in a..=b {
            let expected = p.history_at(q.time(i));
            for (v, e) in q.point(i).iter().zip(&expected) {
                if (v.re - e).abs() > 1e-12 * e.abs().max(1.0) || v.im != 0.0 {
                    return Err(VariationalError::Inadmissible(format!(
                        "q({}) = {} differs from the history value {}",
                        q.time(i),
                        v,
                        e
                    )));
                }
            }
        }
        let end = q.index_of(p.t2).map_err(|e| VariationalError::Inadmissible(e.to_string()))?;
        for (v, e) in q.point(end).iter().zip(&p.q2) {
            if (v.re - e).abs() > 1e-12 * e.abs().max(1.0) || v.im != 0.0 {
                return Err(VariationalError::Inadmissible(format!("q(t2) = {v} differs from q2 = {e}")));
            }
        }
        Ok(())
    }
}

/// Left-minus-right side of one regime of the Euler-Lagrange system.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeResidual {
    pub declared: (f64, f64),
    /// Sub-interval where the residual could be evaluated, if any.
    pub effective: Option<(f64, f64)>,
    pub residual: Option<SampledFunction>,
    /// Nodes counted in the norms: interior of the effective interval and
    /// away from the kinks a solution may have at `t₁` and `t₂−τ`.
    pub in_norm: Vec<bool>,
    /// Per-node extraction flags (scale mode only).
    pub converged: Option<Vec<bool>>,
    pub sup: f64,
    pub l2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub regimes: [RegimeResidual; 2],
    pub sup: f64,
    pub l2: f64,
}

impl ResidualReport {
    pub(crate) fn new(regimes: [RegimeResidual; 2]) -> Self {
        let sup = regimes[0].sup.max(regimes[1].sup);
        let l2 = (regimes[0].l2.powi(2) + regimes[1].l2.powi(2)).sqrt();
        ResidualReport { regimes, sup, l2 }
    }

    /// True when some regime could not be evaluated at all.
    pub fn has_empty_regime(&self) -> bool {
        self.regimes.iter().any(|r| r.residual.is_none())
    }
}

impl RegimeResidual {
    pub(crate) fn empty(declared: (f64, f64)) -> Self {
        RegimeResidual {
            declared,
            effective: None,
            residual: None,
            in_norm: Vec::new(),
            converged: None,
            sup: 0.0,
            l2: 0.0,
        }
    }

    /// Builds the regime report; `margin` is the half-width excluded around
    /// each breakpoint (and its `±τ` shifts).
    pub(crate) fn build(
        declared: (f64, f64),
        residual: SampledFunction,
        converged: Option<Vec<bool>>,
        breakpoints: &[f64],
        tau: f64,
        margin: f64,
    ) -> Self {
        let n = residual.len();
        if n == 0 {
            return RegimeResidual::empty(declared);
        }
        let tol = 1e-9 * residual.step();
        let in_norm: Vec<bool> = (0..n)
            .map(|i| {
                let t = residual.time(i);
                let interior = i != 0 && i != n - 1;
                let clear = breakpoints
                    .iter()
                    .all(|b| [t, t + tau, t - tau].iter().all(|s| (s - b).abs() > margin + tol));
                interior && clear
            })
            .collect();
        let dim = residual.dim();
        let (sup, l2) = norms(
            (0..n).filter(|&i| in_norm[i]).flat_map(|i| residual.point(i)[..dim].iter()),
            residual.step(),
        );
        RegimeResidual {
            declared,
            effective: Some((residual.start(), residual.end())),
            residual: Some(residual),
            in_norm,
            converged,
            sup,
            l2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;

    fn lag(s: &str) -> Expr {
        parse_expression(s, Dims::state_only(1)).unwrap()
    }

    #[test]
    fn problem_validation() {
        let h = vec![FunctionSpec::constant(0.0)];
        let ok = DelayProblem::new(lag("0.5*qdot[0]^2"), 0.5, 0.0, 2.0, h.clone(), vec![0.0], 0.01);
        assert!(ok.is_ok());
        assert_eq!(ok.unwrap().tau_steps(), 50);
        assert!(DelayProblem::new(lag("qdot[0]"), 2.0, 0.0, 2.0, h.clone(), vec![0.0], 0.01).is_err());
        assert!(DelayProblem::new(lag("qdot[0]"), 0.505, 0.0, 2.0, h.clone(), vec![0.0], 0.01).is_err());
        assert!(DelayProblem::new(lag("qdot[0]"), 0.5, 0.0, 2.0, h.clone(), vec![0.0, 1.0], 0.01).is_err());
        let u = parse_expression("u[0]", Dims::new(1, 1)).unwrap();
        assert!(DelayProblem::new(u, 0.5, 0.0, 2.0, h.clone(), vec![0.0], 0.01).is_err());
        let q1 = parse_expression("q[1]", Dims::state_only(2)).unwrap();
        assert!(DelayProblem::new(q1, 0.5, 0.0, 2.0, h, vec![0.0], 0.01).is_err());
    }

    #[test]
    fn admissibility() {
        let p = DelayProblem::new(
            lag("qdot[0]^2"),
            0.5,
            0.0,
            1.0,
            vec![FunctionSpec::Poly(vec![0.0, 1.0])],
            vec![1.0],
            0.01,
        )
        .unwrap();
        let q = Trajectory::from_real_fn(-0.5, 1.0, 0.01, |t| t).unwrap();
        assert!(q.check_admissible(&p).is_ok());
        let bad = Trajectory::from_real_fn(-0.5, 1.0, 0.01, |t| t + 1e-6).unwrap();
        assert!(matches!(bad.check_admissible(&p), Err(VariationalError::Inadmissible(_))));
        let short = Trajectory::from_real_fn(-0.2, 1.0, 0.01, |t| t).unwrap();
        assert!(short.check_admissible(&p).is_err());
    }
}
