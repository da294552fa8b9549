use num_complex::Complex64;

use crate::numerics::{norms, trapezoid};
use crate::sampled::{GridError, SampledFunction};

use super::{scale_derivative, scale_derivative_levels, CalculusError, EpsilonSchedule};

/// Pointwise defect of the product rule `□(f·g) − □f·g − f·□g`.
#[derive(Debug, Clone)]
pub struct LeibnizReport {
    pub residual: SampledFunction,
    pub sup: f64,
    pub l2: f64,
    /// `α + β` as supplied by the caller; the rule is only expected to hold
    /// when this exceeds one.
    pub holder_sum: f64,
    pub holder_condition_met: bool,
    /// Nodes where one of the three derivatives did not converge and the
    /// finest-level values were used for all three instead.
    pub fallback_points: usize,
}

/// Product-rule residual for `f, g` sampled on the same grid. For
/// vector-valued inputs the product is the (bilinear) dot product.
pub fn leibniz_residual(
    f: &SampledFunction,
    g: &SampledFunction,
    alpha: f64,
    beta: f64,
    schedule: &EpsilonSchedule,
) -> Result<LeibnizReport, CalculusError> {
    if !f.aligned_with(g) || f.len() != g.len() || f.dim() != g.dim() {
        return Err(GridError::Mismatch.into());
    }
    let dim = f.dim();
    let products: Vec<Complex64> = (0..f.len())
        .map(|i| f.point(i).iter().zip(g.point(i)).map(|(a, b)| a * b).sum())
        .collect();
    let fg = SampledFunction::new_unchecked(f.start(), f.step(), 1, products);

    let df = scale_derivative(f, schedule)?;
    let dg = scale_derivative(g, schedule)?;
    let dfg = scale_derivative(&fg, schedule)?;
    let finest = schedule.levels() - 1;
    let raw = |s: &SampledFunction| -> Result<SampledFunction, CalculusError> {
        Ok(scale_derivative_levels(s, schedule)?.swap_remove(finest))
    };
    let (rf, rg, rfg) = (raw(f)?, raw(g)?, raw(&fg)?);
    // offset of the output domain inside the finest-level domain
    let shift = schedule.max_steps() - schedule.level_steps()[finest];

    let kmax = schedule.max_steps();
    let n = df.values.len();
    let mut values = Vec::with_capacity(n);
    let mut fallback_points = 0;
    for i in 0..n {
        let (a, b, ab) = if df.converged(i) && dg.converged(i) && dfg.converged(i) {
            (df.values.point(i), dg.values.point(i), dfg.values.point(i)[0])
        } else {
            fallback_points += 1;
            (rf.point(i + shift), rg.point(i + shift), rfg.point(i + shift)[0])
        };
        let (fi, gi) = (f.point(i + kmax), g.point(i + kmax));
        let rule: Complex64 = (0..dim).map(|c| a[c] * gi[c] + fi[c] * b[c]).sum();
        values.push(ab - rule);
    }
    let residual = SampledFunction::new_unchecked(df.values.start(), f.step(), 1, values);
    let (sup, l2) = norms(residual.values(), f.step());
    Ok(LeibnizReport {
        residual,
        sup,
        l2,
        holder_sum: alpha + beta,
        holder_condition_met: alpha + beta > 1.0,
        fallback_points,
    })
}

/// Defect of `∫_{t₁}^{t₂} □f = f(t₂) − f(t₁)`, with the same integral at
/// each fixed ε as a proxy for the trend of the ε-level error.
#[derive(Debug, Clone)]
pub struct BarrowReport {
    pub integral: Vec<Complex64>,
    pub increment: Vec<Complex64>,
    pub residual: f64,
    pub epsilons: Vec<f64>,
    pub level_errors: Vec<f64>,
    /// The ε-level errors do not grow as ε decreases.
    pub proxy_decreasing: bool,
}

fn integrate(s: &SampledFunction, t1: f64, t2: f64) -> Result<Vec<Complex64>, CalculusError> {
    let r = s.restrict(t1, t2)?;
    Ok((0..r.dim()).map(|c| trapezoid(&r.component(c), r.step())).collect())
}

fn distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// Barrow residual on `[t₁, t₂]`; `f` must be sampled at least `ε₀` beyond
/// both ends.
pub fn barrow_residual(f: &SampledFunction, t1: f64, t2: f64, schedule: &EpsilonSchedule) -> Result<BarrowReport, CalculusError> {
    let d = scale_derivative(f, schedule)?;
    let integral = integrate(&d.values, t1, t2)?;
    let (a, b) = (f.index_of(t1)?, f.index_of(t2)?);
    let increment: Vec<Complex64> = f.point(b).iter().zip(f.point(a)).map(|(x, y)| x - y).collect();
    let residual = distance(&integral, &increment);

    let levels = scale_derivative_levels(f, schedule)?;
    let level_errors = levels
        .iter()
        .map(|l| integrate(l, t1, t2).map(|i| distance(&i, &increment)))
        .collect::<Result<Vec<_>, _>>()?;
    let slack = 1e-12 * increment.iter().fold(1.0f64, |m, v| m.max(v.norm()));
    let proxy_decreasing = level_errors.windows(2).all(|w| w[1] <= w[0] + slack);
    Ok(BarrowReport {
        integral,
        increment,
        residual,
        epsilons: schedule.epsilons(),
        level_errors,
        proxy_decreasing,
    })
}
