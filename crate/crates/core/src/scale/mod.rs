//! ε-quantum differences, the complex ε-scale derivative and its ε → 0
//! extraction.
//!
//! For a grid-aligned ε the left and right differences are
//! `Δ⁻f(t) = (f(t) − f(t−ε))/ε` and `Δ⁺f(t) = (f(t+ε) − f(t))/ε`, and the
//! ε-scale derivative is `½[(Δ⁺f + Δ⁻f) − i(Δ⁺f − Δ⁻f)]`, applied to the
//! real and imaginary parts separately for complex `f`. The scale
//! derivative proper is the limit of that family as ε → 0, recovered here
//! by Richardson extrapolation over an [`EpsilonSchedule`].

mod extract;
mod holder;
mod rules;

use num_complex::Complex64;

use crate::sampled::{steps_between, GridError, SampledFunction};

pub use extract::{extract_limit, extract_with, ExtractionOptions, ExtractionReport};
pub use holder::{holder_estimate, HolderEstimate};
pub use rules::{barrow_residual, leibniz_residual, BarrowReport, LeibnizReport};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CalculusError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("invalid ε-schedule: {0}")]
    Schedule(String),
    #[error("ε = {eps} is not a positive integer multiple of the grid step {h}")]
    Misaligned { eps: f64, h: f64 },
    #[error("stencil t{sign}ε for t = {t}, ε = {eps} leaves the sampled range")]
    Stencil { t: f64, eps: f64, sign: char },
    #[error("domain of {len} nodes is too small to shrink by {shrink} nodes on each side")]
    DomainTooSmall { len: usize, shrink: usize },
    #[error("extraction needs at least 3 levels, got {0}")]
    TooFewLevels(usize),
    #[error("need at least {needed} dyadic scales, the grid allows {available}")]
    InsufficientScales { needed: usize, available: usize },
    #[error("constant input: Hölder exponent undefined")]
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Geometric sequence `ε_j = ε₀ rʲ`, each an integer multiple of the grid step.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonSchedule {
    eps0: f64,
    ratio: f64,
    step: f64,
    level_steps: Vec<usize>,
}

impl EpsilonSchedule {
    pub fn new(eps0: f64, ratio: f64, levels: usize, step: f64) -> Result<Self, CalculusError> {
        if !(eps0 > 0.0 && eps0.is_finite()) {
            return Err(CalculusError::Schedule(format!("ε₀ must be positive, got {eps0}")));
        }
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(CalculusError::Schedule(format!("ratio must lie in (0,1), got {ratio}")));
        }
        if levels < 3 {
            return Err(CalculusError::Schedule(format!("need at least 3 levels, got {levels}")));
        }
        let mut level_steps = Vec::with_capacity(levels);
        for j in 0..levels {
            let eps = eps0 * ratio.powi(j as i32);
            let n = steps_between(0.0, eps, step).map_err(|_| CalculusError::Misaligned { eps, h: step })?;
            if n == 0 {
                return Err(CalculusError::Misaligned { eps, h: step });
            }
            level_steps.push(n);
        }
        Ok(EpsilonSchedule { eps0, ratio, step, level_steps })
    }

    /// ε₀ = 16h, r = 1/2, five levels: the finest level is one grid step.
    pub fn default_for_step(step: f64) -> Self {
        EpsilonSchedule::new(16.0 * step, 0.5, 5, step).expect("default schedule is grid aligned")
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn levels(&self) -> usize {
        self.level_steps.len()
    }

    pub fn grid_step(&self) -> f64 {
        self.step
    }

    pub fn eps(&self, level: usize) -> f64 {
        self.level_steps[level] as f64 * self.step
    }

    pub fn epsilons(&self) -> Vec<f64> {
        (0..self.levels()).map(|j| self.eps(j)).collect()
    }

    pub fn level_steps(&self) -> &[usize] {
        &self.level_steps
    }

    /// Largest ε in grid steps: the margin lost on each side.
    pub fn max_steps(&self) -> usize {
        self.level_steps[0]
    }

    fn check_grid(&self, f: &SampledFunction) -> Result<(), CalculusError> {
        if (f.step() - self.step).abs() > 1e-9 * self.step {
            return Err(CalculusError::Misaligned { eps: self.eps0, h: f.step() });
        }
        Ok(())
    }
}

fn eps_steps(f: &SampledFunction, eps: f64) -> Result<usize, CalculusError> {
    match steps_between(0.0, eps, f.step()) {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(CalculusError::Misaligned { eps, h: f.step() }),
    }
}

/// One-sided ε-difference at a grid node `t`.
pub fn delta_sided(f: &SampledFunction, eps: f64, t: f64, side: Side) -> Result<Vec<Complex64>, CalculusError> {
    let k = eps_steps(f, eps)?;
    let i = f.index_of(t)?;
    let (lo, hi) = match side {
        Side::Right => {
            if i + k >= f.len() {
                return Err(CalculusError::Stencil { t, eps, sign: '+' });
            }
            (i, i + k)
        }
        Side::Left => {
            if i < k {
                return Err(CalculusError::Stencil { t, eps, sign: '-' });
            }
            (i - k, i)
        }
    };
    let width = k as f64 * f.step();
    Ok(f.point(hi).iter().zip(f.point(lo)).map(|(b, a)| (b - a) / width).collect())
}

/// Real-valued ε-scale derivative from the two one-sided differences.
fn scale_combination(plus: f64, minus: f64) -> Complex64 {
    Complex64::new(0.5 * (plus + minus), -0.5 * (plus - minus))
}

fn scale_derivative_steps(f: &SampledFunction, k: usize) -> Result<SampledFunction, CalculusError> {
    let n = f.len();
    if n <= 2 * k {
        return Err(CalculusError::DomainTooSmall { len: n, shrink: k });
    }
    let width = k as f64 * f.step();
    let dim = f.dim();
    let mut values = Vec::with_capacity((n - 2 * k) * dim);
    for i in k..n - k {
        let (left, mid, right) = (f.point(i - k), f.point(i), f.point(i + k));
        for c in 0..dim {
            let re = scale_combination((right[c].re - mid[c].re) / width, (mid[c].re - left[c].re) / width);
            let im = scale_combination((right[c].im - mid[c].im) / width, (mid[c].im - left[c].im) / width);
            values.push(re + Complex64::i() * im);
        }
    }
    Ok(SampledFunction::new_unchecked(f.time(k), f.step(), dim, values))
}

/// ε-scale derivative on the shrunken domain `[a+ε, b−ε]`.
pub fn scale_derivative_eps(f: &SampledFunction, eps: f64) -> Result<SampledFunction, CalculusError> {
    let k = eps_steps(f, eps)?;
    scale_derivative_steps(f, k)
}

/// Per-node summary of the extraction, worst case over components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointDiagnostics {
    pub converged: bool,
    pub estimated_order: Option<f64>,
    pub fit_residual: f64,
}

/// Extracted scale derivative together with per-node diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleDerivative {
    pub values: SampledFunction,
    pub points: Vec<PointDiagnostics>,
}

impl ScaleDerivative {
    pub fn converged(&self, i: usize) -> bool {
        self.points[i].converged
    }

    pub fn converged_fraction(&self) -> f64 {
        let n = self.points.iter().filter(|p| p.converged).count();
        n as f64 / self.points.len().max(1) as f64
    }

    pub fn all_converged(&self) -> bool {
        self.points.iter().all(|p| p.converged)
    }
}

/// ε-derivatives at every schedule level, each on its own domain.
pub fn scale_derivative_levels(f: &SampledFunction, schedule: &EpsilonSchedule) -> Result<Vec<SampledFunction>, CalculusError> {
    schedule.check_grid(f)?;
    schedule.level_steps().iter().map(|&k| scale_derivative_steps(f, k)).collect()
}

/// Scale derivative `⟨□_ε f⟩`: pointwise extraction over the schedule. The
/// output domain is shrunk by ε₀ on each side.
pub fn scale_derivative(f: &SampledFunction, schedule: &EpsilonSchedule) -> Result<ScaleDerivative, CalculusError> {
    scale_derivative_with(f, schedule, &ExtractionOptions::default())
}

pub fn scale_derivative_with(
    f: &SampledFunction,
    schedule: &EpsilonSchedule,
    options: &ExtractionOptions,
) -> Result<ScaleDerivative, CalculusError> {
    let levels = scale_derivative_levels(f, schedule)?;
    let kmax = schedule.max_steps();
    let n_out = f.len() - 2 * kmax;
    let dim = f.dim();
    let mut values = Vec::with_capacity(n_out * dim);
    let mut points = Vec::with_capacity(n_out);
    let mut raw = vec![Complex64::new(0.0, 0.0); schedule.levels()];
    let extractor = extract::Extractor::new(schedule, options);
    for i in 0..n_out {
        let mut diag = PointDiagnostics { converged: true, estimated_order: None, fit_residual: 0.0 };
        for c in 0..dim {
            for (j, (level, &k)) in levels.iter().zip(schedule.level_steps()).enumerate() {
                raw[j] = level.point(i + kmax - k)[c];
            }
            let report = extractor.extract(&raw)?;
            values.push(report.value);
            diag.converged &= report.converged;
            diag.fit_residual = diag.fit_residual.max(report.fit_residual);
            diag.estimated_order = match (diag.estimated_order, report.estimated_order) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            };
        }
        points.push(diag);
    }
    let values = SampledFunction::new_unchecked(f.time(kmax), f.step(), dim, values);
    Ok(ScaleDerivative { values, points })
}

/// k-fold scale derivative; the domain shrinks by k·ε₀ per side and a node
/// counts as converged only if every pass converged there.
pub fn scale_derivative_k(f: &SampledFunction, k: usize, schedule: &EpsilonSchedule) -> Result<ScaleDerivative, CalculusError> {
    assert!(k >= 1, "derivative order must be positive");
    let needed = 2 * k * schedule.max_steps();
    if f.len() <= needed {
        return Err(CalculusError::DomainTooSmall { len: f.len(), shrink: k * schedule.max_steps() });
    }
    let mut current = scale_derivative(f, schedule)?;
    for _ in 1..k {
        let next = scale_derivative(&current.values, schedule)?;
        let shift = schedule.max_steps();
        let points = next
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| PointDiagnostics { converged: p.converged && current.points[i + shift].converged, ..*p })
            .collect();
        current = ScaleDerivative { values: next.values, points };
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(h: f64) -> SampledFunction {
        SampledFunction::from_real_fn(0.0, 2.0, h, |t| t * t).unwrap()
    }

    fn close(a: Complex64, re: f64, im: f64, tol: f64) -> bool {
        (a.re - re).abs() <= tol && (a.im - im).abs() <= tol
    }

    #[test]
    fn sided_differences_of_square() {
        let f = square(0.1);
        let p = delta_sided(&f, 0.1, 1.0, Side::Right).unwrap()[0];
        let m = delta_sided(&f, 0.1, 1.0, Side::Left).unwrap()[0];
        assert!(close(p, 2.1, 0.0, 1e-12));
        assert!(close(m, 1.9, 0.0, 1e-12));
        let c = SampledFunction::from_real_fn(0.0, 1.0, 0.1, |_| 3.0).unwrap();
        assert_eq!(delta_sided(&c, 0.2, 0.5, Side::Right).unwrap()[0], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn sided_difference_errors() {
        let f = square(0.1);
        assert!(matches!(delta_sided(&f, 0.15, 1.0, Side::Right), Err(CalculusError::Misaligned { .. })));
        assert!(matches!(delta_sided(&f, 0.1, 1.05, Side::Right), Err(CalculusError::Grid(GridError::OffGrid { .. }))));
        assert!(matches!(delta_sided(&f, 0.2, 0.1, Side::Left), Err(CalculusError::Stencil { .. })));
        assert!(matches!(delta_sided(&f, 0.2, 1.9, Side::Right), Err(CalculusError::Stencil { .. })));
    }

    #[test]
    fn eps_scale_derivative_examples() {
        let f = square(0.1);
        let d = scale_derivative_eps(&f, 0.1).unwrap();
        assert!(close(d.at(1.0).unwrap()[0], 2.0, -0.1, 1e-12));
        assert!((d.start() - 0.1).abs() < 1e-15 && (d.end() - 1.9).abs() < 1e-12);

        let g = SampledFunction::from_real_fn(0.0, 1.0, 0.1, |t| (t - 0.5f64).abs()).unwrap();
        let d = scale_derivative_eps(&g, 0.1).unwrap();
        assert!(close(d.at(0.5).unwrap()[0], 0.0, -1.0, 1e-12));

        let s = SampledFunction::from_real_fn(-1.0, 1.0, 0.1, f64::sin).unwrap();
        let d = scale_derivative_eps(&s, 0.1).unwrap();
        let v = d.at(0.0).unwrap()[0];
        assert!((v.re - 0.1f64.sin() / 0.1).abs() < 1e-12 && v.im.abs() < 1e-15);

        let tiny = SampledFunction::from_real_fn(0.0, 0.1, 0.1, |t| t).unwrap();
        assert!(matches!(scale_derivative_eps(&tiny, 0.1), Err(CalculusError::DomainTooSmall { .. })));
    }

    #[test]
    fn complex_input_uses_real_and_imaginary_parts() {
        let h = 0.05;
        let f = SampledFunction::from_fn(0.0, 1.0, h, 1, |t, out| out[0] = Complex64::new(t * t, t.sin())).unwrap();
        let re = SampledFunction::from_real_fn(0.0, 1.0, h, |t| t * t).unwrap();
        let im = SampledFunction::from_real_fn(0.0, 1.0, h, f64::sin).unwrap();
        let d = scale_derivative_eps(&f, 0.1).unwrap();
        let dr = scale_derivative_eps(&re, 0.1).unwrap();
        let di = scale_derivative_eps(&im, 0.1).unwrap();
        for i in 0..d.len() {
            let expected = dr.point(i)[0] + Complex64::i() * di.point(i)[0];
            assert!((d.point(i)[0] - expected).norm() < 1e-14);
        }
    }

    #[test]
    fn schedule_validation() {
        let s = EpsilonSchedule::default_for_step(1e-3);
        assert_eq!(s.level_steps(), &[16, 8, 4, 2, 1]);
        assert!((s.eps(4) - 1e-3).abs() < 1e-18);
        assert!(EpsilonSchedule::new(16e-3, 0.5, 6, 1e-3).is_err());
        assert!(EpsilonSchedule::new(0.01, 0.5, 2, 1e-3).is_err());
        assert!(EpsilonSchedule::new(0.01, 1.5, 3, 1e-3).is_err());
        assert!(EpsilonSchedule::new(0.0105, 0.5, 3, 1e-3).is_err());
    }

    #[test]
    fn scale_derivative_of_square_is_exact_after_extraction() {
        let h = 1e-3;
        let f = square(h);
        let sched = EpsilonSchedule::default_for_step(h);
        let d = scale_derivative(&f, &sched).unwrap();
        assert!(d.all_converged());
        assert!((d.values.start() - 16.0 * h).abs() < 1e-15);
        for i in 0..d.values.len() {
            let t = d.values.time(i);
            assert!(close(d.values.point(i)[0], 2.0 * t, 0.0, 1e-8), "t={t}");
        }
        let c = SampledFunction::from_real_fn(0.0, 1.0, h, |_| -4.0).unwrap();
        let d = scale_derivative(&c, &sched).unwrap();
        assert!(d.all_converged());
        assert!(d.values.values().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn higher_order_scale_derivatives() {
        let h = 1e-3;
        let sched = EpsilonSchedule::default_for_step(h);
        let f = square(h);
        let once = scale_derivative(&f, &sched).unwrap();
        let k1 = scale_derivative_k(&f, 1, &sched).unwrap();
        assert_eq!(once.values, k1.values);

        let k2 = scale_derivative_k(&f, 2, &sched).unwrap();
        assert!(k2.values.values().iter().all(|v| (v - Complex64::new(2.0, 0.0)).norm() <= 1e-6));

        let cube = SampledFunction::from_real_fn(0.0, 1.0, h, |t| t.powi(3)).unwrap();
        let k2 = scale_derivative_k(&cube, 2, &sched).unwrap();
        for i in 0..k2.values.len() {
            let t = k2.values.time(i);
            // classical second derivative of t³
            assert!((k2.values.point(i)[0] - Complex64::new(6.0 * t, 0.0)).norm() <= 1e-5);
        }
        let short = SampledFunction::from_real_fn(0.0, 0.06, h, |t| t).unwrap();
        assert!(matches!(scale_derivative_k(&short, 2, &sched), Err(CalculusError::DomainTooSmall { .. })));
    }

    #[test]
    fn eps_level_derivative_is_linear() {
        let h = 1e-3;
        let f = SampledFunction::from_real_fn(0.0, 1.0, h, |t| (3.0 * t).sin()).unwrap();
        let g = SampledFunction::from_real_fn(0.0, 1.0, h, |t| t.powi(4) - t).unwrap();
        let (a, b) = (Complex64::new(2.0, 0.0), Complex64::new(-0.5, 0.0));
        let lhs = scale_derivative_eps(&f.combine(&g, a, b).unwrap(), 0.004).unwrap();
        let df = scale_derivative_eps(&f, 0.004).unwrap();
        let dg = scale_derivative_eps(&g, 0.004).unwrap();
        let rhs = df.combine(&dg, a, b).unwrap();
        for (x, y) in lhs.values().iter().zip(rhs.values()) {
            assert!((x - y).norm() <= 1e-10);
        }
    }

    #[test]
    fn sided_differences_are_derivatives_of_mean_functions() {
        // f^σ_ε(t) = (σ/ε)∫_t^{t+σε} f; its classical derivative is Δ^σ f(t).
        let eps = 0.05;
        let f = |t: f64| (2.0 * t).sin() + t * t;
        let quad = |a: f64, b: f64| {
            // Simpson on 2000 panels, exact to ~1e-14 here
            let n = 2000;
            let w = (b - a) / n as f64;
            let mut s = f(a) + f(b);
            for i in 1..n {
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * w);
            }
            s * w / 3.0
        };
        let mean = |t: f64, sigma: f64| sigma / eps * quad(t, t + sigma * eps);
        let grid = SampledFunction::from_real_fn(0.0, 1.0, 0.01, f).unwrap();
        for &t in &[0.3, 0.5, 0.7] {
            for (sigma, side) in [(1.0, Side::Right), (-1.0, Side::Left)] {
                let dt = 1e-4;
                let classical = (mean(t + dt, sigma) - mean(t - dt, sigma)) / (2.0 * dt);
                let delta = delta_sided(&grid, eps, t, side).unwrap()[0].re;
                assert!((classical - delta).abs() <= 1e-6, "σ={sigma} t={t}: {classical} vs {delta}");
            }
        }
    }
}
