//! Order-independent summation, quadrature and grid differences.

use num_complex::Complex64;

const PAIRWISE_BLOCK: usize = 8;

/// Pairwise (cascade) summation. The split points depend only on the
/// length, so the result is reproducible bit for bit.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_BLOCK {
        return values.iter().fold(0.0, |acc, v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn pairwise_sum_complex(values: &[Complex64]) -> Complex64 {
    if values.len() <= PAIRWISE_BLOCK {
        return values.iter().fold(Complex64::new(0.0, 0.0), |acc, v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_sum_complex(&values[..mid]) + pairwise_sum_complex(&values[mid..])
}

/// Composite trapezoid rule on a uniform grid.
pub fn trapezoid(values: &[Complex64], step: f64) -> Complex64 {
    match values.len() {
        0 | 1 => Complex64::new(0.0, 0.0),
        n => {
            let interior = pairwise_sum_complex(&values[1..n - 1]);
            (interior + (values[0] + values[n - 1]) * 0.5) * step
        }
    }
}

pub fn trapezoid_real(values: &[f64], step: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => (pairwise_sum(&values[1..n - 1]) + 0.5 * (values[0] + values[n - 1])) * step,
    }
}

/// Second-order derivative estimate: central differences in the interior,
/// three-point one-sided formulas at both ends. Needs at least 3 samples.
pub fn central_difference(values: &[Complex64], step: f64) -> Vec<Complex64> {
    let n = values.len();
    assert!(n >= 3, "central_difference needs at least 3 samples");
    let mut out = Vec::with_capacity(n);
    out.push((values[0] * -3.0 + values[1] * 4.0 - values[2]) / (2.0 * step));
    for i in 1..n - 1 {
        out.push((values[i + 1] - values[i - 1]) / (2.0 * step));
    }
    out.push((values[n - 1] * 3.0 - values[n - 2] * 4.0 + values[n - 3]) / (2.0 * step));
    out
}

/// Sup and discrete L2 norms (`sqrt(h * sum |v|^2)`) of a set of samples.
pub fn norms<'a>(values: impl IntoIterator<Item = &'a Complex64>, step: f64) -> (f64, f64) {
    let mut sup: f64 = 0.0;
    let mut squares = Vec::new();
    for v in values {
        let m = v.norm();
        sup = sup.max(m);
        squares.push(m * m);
    }
    (sup, (step * pairwise_sum(&squares)).sqrt())
}
