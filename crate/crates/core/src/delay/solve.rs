//! Direct transcription of the delayed action.
//!
//! On each cell `[t_j, t_{j+1}]` of `[t₁, t₂]` the integrand is taken at the
//! midpoint with `q ≈ (q_j + q_{j+1})/2` and `q̇ ≈ (q_{j+1} − q_j)/h`, and the
//! same for the delayed pair `j − K, j + 1 − K`. The discrete action is a
//! function of the interior nodes only (history and endpoint are fixed);
//! its stationary point is found by damped Newton with exact first and
//! second partials. Midpoint differences avoid the odd/even decoupling a
//! central-difference transcription has.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::expr::{Binding, Expr, Var, VarClass};
use crate::sampled::SampledFunction;

use super::{DelayProblem, Trajectory, VariationalError};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Stop when the sup norm of the discrete gradient is at most this.
    pub tolerance: f64,
    /// Extra history samples before `t₁−τ` in the returned trajectory.
    pub history_guard: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { max_iterations: 50, tolerance: 1e-10, history_guard: 0.0 }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub trajectory: Trajectory,
    /// Newton steps taken (0 if the initial guess was already stationary).
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Value of the discrete (midpoint) action.
    pub action: f64,
}

const SLOT_CLASSES: [VarClass; 4] = [VarClass::Q, VarClass::QDot, VarClass::QTau, VarClass::QDotTau];

struct Transcription {
    dim: usize,
    k: usize,
    m: usize,
    h: f64,
    t0: f64,
    lagrangian: Expr,
    first: Vec<Expr>,
    second: Vec<Vec<Expr>>,
}

impl Transcription {
    fn new(p: &DelayProblem) -> Self {
        let dim = p.dim();
        let slots: Vec<Var> = SLOT_CLASSES.iter().flat_map(|&c| (0..dim).map(move |i| Var::new(c, i))).collect();
        let first: Vec<Expr> = slots.iter().map(|&v| p.lagrangian.partial_derivative(v)).collect();
        let second = first.iter().map(|f| slots.iter().map(|&v| f.partial_derivative(v)).collect()).collect();
        let k = p.tau_steps();
        let m = crate::sampled::steps_between(p.t1, p.t2, p.step).expect("validated");
        Transcription { dim, k, m, h: p.step, t0: p.t1 - p.tau, lagrangian: p.lagrangian.clone(), first, second }
    }

    fn unknowns(&self) -> usize {
        (self.m - 1) * self.dim
    }

    /// Unknown index of node `j`, component `c`, if that node is free.
    fn unknown(&self, j: usize, c: usize) -> Option<usize> {
        (j > self.k && j < self.k + self.m).then(|| (j - self.k - 1) * self.dim + c)
    }

    /// For slot `s` (class-major) on cell `j`: the two nodes and weights.
    fn stencil(&self, s: usize, j: usize) -> [(usize, f64); 2] {
        let (class, _) = (s / self.dim, s % self.dim);
        let base = if class >= 2 { j - self.k } else { j };
        if class % 2 == 0 {
            [(base, 0.5), (base + 1, 0.5)]
        } else {
            [(base, -1.0 / self.h), (base + 1, 1.0 / self.h)]
        }
    }

    fn bind(&self, x: &[Vec<f64>], j: usize, b: &mut Binding) {
        b.set_time(self.t0 + (j as f64 + 0.5) * self.h);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.dim];
        for (ci, &class) in SLOT_CLASSES.iter().enumerate() {
            for c in 0..self.dim {
                let [(a, wa), (bn, wb)] = self.stencil(ci * self.dim + c, j);
                buf[c] = Complex64::new(wa * x[a][c] + wb * x[bn][c], 0.0);
            }
            b.set(class, &buf);
        }
    }

    fn cells(&self) -> std::ops::Range<usize> {
        self.k..self.k + self.m
    }

    fn action(&self, x: &[Vec<f64>]) -> Result<f64, VariationalError> {
        let mut b = Binding::new();
        let mut values = Vec::with_capacity(self.m);
        for j in self.cells() {
            self.bind(x, j, &mut b);
            values.push(self.lagrangian.evaluate(&b)?.re);
        }
        Ok(self.h * crate::numerics::pairwise_sum(&values))
    }

    fn gradient(&self, x: &[Vec<f64>]) -> Result<DVector<f64>, VariationalError> {
        let mut g = DVector::zeros(self.unknowns());
        let mut b = Binding::new();
        for j in self.cells() {
            self.bind(x, j, &mut b);
            for (s, e) in self.first.iter().enumerate() {
                if e.is_zero() {
                    continue;
                }
                let v = e.evaluate(&b)?.re * self.h;
                for (node, w) in self.stencil(s, j) {
                    if let Some(u) = self.unknown(node, s % self.dim) {
                        g[u] += v * w;
                    }
                }
            }
        }
        Ok(g)
    }

    fn hessian(&self, x: &[Vec<f64>]) -> Result<DMatrix<f64>, VariationalError> {
        let n = self.unknowns();
        let mut hm = DMatrix::zeros(n, n);
        let mut b = Binding::new();
        for j in self.cells() {
            self.bind(x, j, &mut b);
            for (s1, row) in self.second.iter().enumerate() {
                for (s2, e) in row.iter().enumerate() {
                    if e.is_zero() {
                        continue;
                    }
                    let v = e.evaluate(&b)?.re * self.h;
                    for (n1, w1) in self.stencil(s1, j) {
                        let Some(u1) = self.unknown(n1, s1 % self.dim) else { continue };
                        for (n2, w2) in self.stencil(s2, j) {
                            if let Some(u2) = self.unknown(n2, s2 % self.dim) {
                                hm[(u1, u2)] += v * w1 * w2;
                            }
                        }
                    }
                }
            }
        }
        Ok(hm)
    }

    fn apply(&self, x: &mut [Vec<f64>], delta: &DVector<f64>, alpha: f64) {
        for j in self.k + 1..self.k + self.m {
            for c in 0..self.dim {
                x[j][c] -= alpha * delta[self.unknown(j, c).expect("free node")];
            }
        }
    }
}

pub fn solve_extremal_direct(p: &DelayProblem) -> Result<SolveReport, VariationalError> {
    solve_extremal_with(p, &SolverOptions::default(), None)
}

/// Solves from `initial` (sampled on at least `[t₁−τ, t₂]`) or, by default,
/// from the straight line joining `δ(t₁)` and `q₂`.
pub fn solve_extremal_with(
    p: &DelayProblem,
    options: &SolverOptions,
    initial: Option<&Trajectory>,
) -> Result<SolveReport, VariationalError> {
    let tr = Transcription::new(p);
    let nodes = tr.k + tr.m + 1;
    let mut x: Vec<Vec<f64>> = (0..=tr.k).map(|j| p.history_at(tr.t0 + j as f64 * tr.h)).collect();
    let start = x[tr.k].clone();
    for j in tr.k + 1..nodes {
        let t = tr.t0 + j as f64 * tr.h;
        let row = match initial {
            Some(q) => {
                let v = q.samples().at(t).ok_or_else(|| {
                    VariationalError::InsufficientSamples(format!("initial guess has no sample at t = {t}"))
                })?;
                v.iter().map(|z| z.re).collect()
            }
            None => {
                let s = (j - tr.k) as f64 / tr.m as f64;
                start.iter().zip(&p.q2).map(|(a, b)| a + s * (b - a)).collect()
            }
        };
        x.push(row);
    }
    x[nodes - 1] = p.q2.clone();

    let mut g = tr.gradient(&x)?;
    let mut iterations = 0;
    while g.amax() > options.tolerance {
        if iterations == options.max_iterations {
            return Err(VariationalError::NonConvergence { iterations, gradient_norm: g.amax() });
        }
        let hm = tr.hessian(&x)?;
        let delta = hm.lu().solve(&g).ok_or(VariationalError::SingularHessian)?;
        if !delta.iter().all(|v| v.is_finite()) {
            return Err(VariationalError::SingularHessian);
        }
        let norm0 = g.norm();
        let mut alpha = 1.0;
        loop {
            let mut trial = x.clone();
            tr.apply(&mut trial, &delta, alpha);
            let gt = tr.gradient(&trial)?;
            if gt.norm() < norm0 || alpha < 1e-6 {
                x = trial;
                g = gt;
                break;
            }
            alpha *= 0.5;
        }
        iterations += 1;
    }

    let action = tr.action(&x)?;
    let guard = crate::sampled::steps_between(0.0, options.history_guard, p.step)
        .map_err(|_| VariationalError::Problem("history guard must be a multiple of h".into()))?;
    let mut values = Vec::with_capacity((guard + nodes) * tr.dim);
    for j in 0..guard {
        let t = tr.t0 - (guard - j) as f64 * tr.h;
        values.extend(p.history_at(t).into_iter().map(|v| Complex64::new(v, 0.0)));
    }
    for row in &x {
        values.extend(row.iter().map(|&v| Complex64::new(v, 0.0)));
    }
    let samples = SampledFunction::new(tr.t0 - guard as f64 * tr.h, tr.h, tr.dim, values)?;
    Ok(SolveReport { trajectory: Trajectory::new(samples), iterations, gradient_norm: g.amax(), action })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay::classical_el_residual;
    use crate::expr::{parse_expression, Dims};
    use crate::zoo::FunctionSpec;

    fn lag(s: &str) -> Expr {
        parse_expression(s, Dims::state_only(1)).unwrap()
    }

    #[test]
    fn straight_line() {
        let p = DelayProblem::new(lag("0.5*qdot[0]^2"), 0.5, 0.0, 1.0, vec![FunctionSpec::Poly(vec![0.0, 1.0])], vec![1.0], 0.01)
            .unwrap();
        let r = solve_extremal_direct(&p).unwrap();
        let q = r.trajectory.samples();
        for i in 0..q.len() {
            assert!((q.point(i)[0].re - q.time(i)).abs() <= 1e-9);
        }
        assert!(r.gradient_norm <= 1e-10);
    }

    #[test]
    fn delayed_oscillator_converges_in_one_step() {
        let p = DelayProblem::new(
            lag("0.5*qdot[0]^2 - 0.5*qtau[0]^2"),
            0.5,
            0.0,
            2.0,
            vec![FunctionSpec::constant(1.0)],
            vec![0.0],
            1.0 / 200.0,
        )
        .unwrap();
        let r = solve_extremal_direct(&p).unwrap();
        assert_eq!(r.iterations, 1);
        let wild = Trajectory::from_real_fn(-0.5, 2.0, 1.0 / 200.0, |t| (7.0 * t).sin() * 3.0).unwrap();
        let r2 = solve_extremal_with(&p, &SolverOptions::default(), Some(&wild)).unwrap();
        assert_eq!(r2.iterations, 1);
        let res = classical_el_residual(&p, &r.trajectory).unwrap();
        assert!(res.sup <= 1e-4, "{}", res.sup);
    }

    #[test]
    fn non_convergence_is_reported() {
        let p = DelayProblem::new(lag("exp(qdot[0])*qdot[0]^2 + q[0]^4"), 0.5, 0.0, 2.0, vec![FunctionSpec::constant(1.0)], vec![3.0], 0.02)
            .unwrap();
        let opts = SolverOptions { max_iterations: 1, ..SolverOptions::default() };
        assert!(matches!(solve_extremal_with(&p, &opts, None), Err(VariationalError::NonConvergence { iterations: 1, .. })));
    }

    #[test]
    fn singular_hessian() {
        let p = DelayProblem::new(lag("q[0]"), 0.5, 0.0, 2.0, vec![FunctionSpec::constant(1.0)], vec![3.0], 0.02).unwrap();
        assert!(matches!(solve_extremal_direct(&p), Err(VariationalError::SingularHessian)));
    }
}
