use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{CalculusError, EpsilonSchedule};

/// Knobs for the ε → 0 extraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractionOptions {
    /// Number of Richardson elimination steps (error powers ε, ε², ...).
    pub order: usize,
    /// Differences below `abs_tol * max(1, max |raw|)` count as settled; the
    /// default leaves room for the roundoff of repeated differencing.
    pub abs_tol: f64,
}

impl Default for ExtractionOptions {
    fn default() -> Self {
        ExtractionOptions { order: 2, abs_tol: 1e-7 }
    }
}

/// Outcome of extracting `⟨v(ε)⟩` from the values at the schedule levels.
///
/// `converged` holds when the last difference of the extrapolated column
/// contracts (by at least `√r`) or is negligible, and the raw increments do
/// not grow over the last three levels. For a divergent sequence `value`
/// is the raw value at the finest level.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionReport {
    pub value: Complex64,
    pub converged: bool,
    /// `log(d₁/d₂)/log(1/r)` from the last two extrapolated differences.
    pub estimated_order: Option<f64>,
    /// RMS residual of a least-squares polynomial fit in ε to the raw values.
    pub fit_residual: f64,
    pub extrapolated: Vec<Complex64>,
}

/// Precomputed Richardson weights and fit projector for one schedule.
pub(crate) struct Extractor {
    ratio: f64,
    order: usize,
    abs_tol: f64,
    /// `I − V V⁺` for the Vandermonde matrix `V` of the fit.
    residual_projector: DMatrix<f64>,
}

impl Extractor {
    pub(crate) fn new(schedule: &EpsilonSchedule, options: &ExtractionOptions) -> Self {
        let n = schedule.levels();
        let order = options.order.min(n - 2);
        let eps0 = schedule.eps0();
        let v = DMatrix::from_fn(n, order + 1, |j, k| (schedule.eps(j) / eps0).powi(k as i32));
        let pinv = v.clone().pseudo_inverse(1e-13).expect("Vandermonde pseudo-inverse");
        let residual_projector = DMatrix::identity(n, n) - &v * pinv;
        Extractor { ratio: schedule.ratio(), order, abs_tol: options.abs_tol, residual_projector }
    }

    pub(crate) fn extract(&self, raw: &[Complex64]) -> Result<ExtractionReport, CalculusError> {
        let n = raw.len();
        if n < 3 {
            return Err(CalculusError::TooFewLevels(n));
        }
        assert_eq!(n, self.residual_projector.nrows(), "raw values must match the schedule");
        let p = self.order;

        // Neville-style table, kept one column at a time.
        let mut column = raw.to_vec();
        for k in 1..=p {
            let rk = self.ratio.powi(k as i32);
            column = column.windows(2).map(|w| (w[1] - w[0] * rk) / (1.0 - rk)).collect();
        }

        let scale = raw.iter().fold(1.0f64, |m, v| m.max(v.norm()));
        let tol = self.abs_tol * scale;
        let m = column.len();
        let d_last = (column[m - 1] - column[m - 2]).norm();
        let d_prev = (m >= 3).then(|| (column[m - 2] - column[m - 3]).norm());
        let r_last = (raw[n - 1] - raw[n - 2]).norm();
        let r_prev = (raw[n - 2] - raw[n - 3]).norm();

        let contracting = match d_prev {
            Some(d1) => d_last <= self.ratio.sqrt() * d1,
            None => d_last <= r_last,
        };
        let extrapolation_ok = d_last <= tol || contracting;
        let raw_ok = r_last <= tol || r_last <= r_prev;
        let finite = column[m - 1].re.is_finite() && column[m - 1].im.is_finite();
        let converged = finite && extrapolation_ok && raw_ok;

        let estimated_order = match d_prev {
            Some(d1) if d1 > 0.0 && d_last > 0.0 => Some((d1 / d_last).ln() / (1.0 / self.ratio).ln()),
            _ => None,
        };

        let mut sq = 0.0;
        for i in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n {
                acc += raw[j] * self.residual_projector[(i, j)];
            }
            sq += acc.norm_sqr();
        }
        let fit_residual = (sq / n as f64).sqrt();

        let value = if converged { column[m - 1] } else { raw[n - 1] };
        Ok(ExtractionReport { value, converged, estimated_order, fit_residual, extrapolated: column })
    }
}

/// Extraction with default options.
pub fn extract_limit(raw: &[Complex64], schedule: &EpsilonSchedule) -> Result<ExtractionReport, CalculusError> {
    extract_with(raw, schedule, &ExtractionOptions::default())
}

pub fn extract_with(
    raw: &[Complex64],
    schedule: &EpsilonSchedule,
    options: &ExtractionOptions,
) -> Result<ExtractionReport, CalculusError> {
    if raw.len() < 3 {
        return Err(CalculusError::TooFewLevels(raw.len()));
    }
    if raw.len() != schedule.levels() {
        return Err(CalculusError::Schedule(format!(
            "{} raw values for a {}-level schedule",
            raw.len(),
            schedule.levels()
        )));
    }
    Extractor::new(schedule, options).extract(raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sched() -> EpsilonSchedule {
        EpsilonSchedule::default_for_step(1e-3)
    }

    fn values(s: &EpsilonSchedule, f: impl Fn(f64) -> Complex64) -> Vec<Complex64> {
        s.epsilons().into_iter().map(f).collect()
    }

    #[test]
    fn exact_for_quadratic_error() {
        let s = sched();
        let raw = values(&s, |e| Complex64::new(1.5 + 3.0 * e - 40.0 * e * e, -2.0 * e));
        let r = extract_limit(&raw, &s).unwrap();
        assert!(r.converged);
        assert!((r.value - Complex64::new(1.5, 0.0)).norm() < 1e-12);
        assert!(r.fit_residual < 1e-12);
    }

    #[test]
    fn third_order_error_is_reduced_and_order_estimated() {
        let s = sched();
        let raw = values(&s, |e| Complex64::new(2.0 + e + 1e3 * e.powi(3), 0.0));
        let r = extract_limit(&raw, &s).unwrap();
        assert!(r.converged);
        assert!((r.value.re - 2.0).abs() < 8e3 * 1e-9 + 1e-12);
        let order = r.estimated_order.unwrap();
        assert!((order - 3.0).abs() < 1e-6, "order {order}");
    }

    #[test]
    fn divergent_sequence_is_flagged() {
        let s = sched();
        let raw = values(&s, |e| Complex64::new(e.powf(-0.5), 0.0));
        let r = extract_limit(&raw, &s).unwrap();
        assert!(!r.converged);
        assert_eq!(r.value, raw[4]);
    }

    #[test]
    fn too_few_levels() {
        let s = sched();
        let raw = vec![Complex64::new(1.0, 0.0); 2];
        assert_eq!(extract_limit(&raw, &s), Err(CalculusError::TooFewLevels(2)));
    }

    #[test]
    fn three_level_schedule() {
        let s = EpsilonSchedule::new(4e-3, 0.5, 3, 1e-3).unwrap();
        let raw = values(&s, |e| Complex64::new(-1.0 + 5.0 * e, 0.0));
        let r = extract_limit(&raw, &s).unwrap();
        assert!(r.converged);
        assert!((r.value.re + 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn converged_means_contracting_extrapolation(
            raw in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 5),
        ) {
            let s = sched();
            let raw: Vec<Complex64> = raw.into_iter().map(|(a, b)| Complex64::new(a, b)).collect();
            let r = extract_limit(&raw, &s).unwrap();
            let m = r.extrapolated.len();
            let d2 = (r.extrapolated[m - 1] - r.extrapolated[m - 2]).norm();
            let d1 = (r.extrapolated[m - 2] - r.extrapolated[m - 3]).norm();
            let scale = raw.iter().fold(1.0f64, |a, v| a.max(v.norm()));
            if r.converged {
                prop_assert!(d2 <= d1 || d2 <= ExtractionOptions::default().abs_tol * scale);
            } else {
                prop_assert_eq!(r.value, raw[4]);
            }
        }
    }
}
