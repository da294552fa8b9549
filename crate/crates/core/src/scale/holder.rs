use crate::sampled::SampledFunction;

use super::CalculusError;

const MAX_DOUBLINGS: u32 = 6;
const MIN_SCALES: usize = 4;

/// Hölder exponent estimated from the growth of sup-increments over dyadic
/// scales `h·2ʲ`.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderEstimate {
    /// Regression slope clamped to `(0, 1]`.
    pub alpha: f64,
    pub raw_slope: f64,
    pub r_squared: f64,
    pub scales: Vec<f64>,
    pub increments: Vec<f64>,
}

pub fn holder_estimate(f: &SampledFunction) -> Result<HolderEstimate, CalculusError> {
    let n = f.len();
    let mut scales = Vec::new();
    let mut increments = Vec::new();
    for j in 0..=MAX_DOUBLINGS {
        let s = 1usize << j;
        if s >= n {
            break;
        }
        let mut sup: f64 = 0.0;
        for i in 0..n - s {
            let d: f64 = f.point(i + s).iter().zip(f.point(i)).map(|(a, b)| (a - b).norm_sqr()).sum();
            sup = sup.max(d.sqrt());
        }
        scales.push(s as f64 * f.step());
        increments.push(sup);
    }
    if scales.len() < MIN_SCALES {
        return Err(CalculusError::InsufficientScales { needed: MIN_SCALES, available: scales.len() });
    }
    if increments.iter().any(|&v| v == 0.0) {
        return Err(CalculusError::Degenerate);
    }

    let xs: Vec<f64> = scales.iter().map(|s| s.ln()).collect();
    let ys: Vec<f64> = increments.iter().map(|v| v.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(HolderEstimate {
        alpha: slope.clamp(f64::MIN_POSITIVE, 1.0),
        raw_slope: slope,
        r_squared,
        scales,
        increments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lipschitz_function_has_exponent_one() {
        let f = SampledFunction::from_real_fn(0.0, 1.0, 1e-3, |t| 2.0 * t + 1.0).unwrap();
        let e = holder_estimate(&f).unwrap();
        assert!((e.alpha - 1.0).abs() < 1e-9);
        assert_eq!(e.scales.len(), 7);
    }

    #[test]
    fn square_root_cusp() {
        let f = SampledFunction::from_real_fn(-1.0, 1.0, 1e-3, |t| t.abs().sqrt()).unwrap();
        let e = holder_estimate(&f).unwrap();
        assert!((e.alpha - 0.5).abs() < 1e-9, "{}", e.alpha);
    }

    #[test]
    fn constant_is_degenerate() {
        let f = SampledFunction::from_real_fn(0.0, 1.0, 1e-2, |_| 3.0).unwrap();
        assert_eq!(holder_estimate(&f), Err(CalculusError::Degenerate));
        let short = SampledFunction::from_real_fn(0.0, 0.05, 1e-2, |t| t).unwrap();
        assert!(matches!(holder_estimate(&short), Err(CalculusError::InsufficientScales { .. })));
    }
}
