use num_complex::Complex64;
use proptest::prelude::*;
use scalecalc_core::sampled::SampledFunction;
use scalecalc_core::scale::{
    holder_estimate, leibniz_residual, scale_derivative, scale_derivative_k, scale_derivative_levels, EpsilonSchedule,
};
use scalecalc_core::zoo::{classical_derivative, make_weierstrass, parse_function, sample_on_grid};

const H: f64 = 1e-3;

fn grid(f: impl Fn(f64) -> f64) -> SampledFunction {
    SampledFunction::from_real_fn(0.0, 1.0, H, f).unwrap()
}

/// `max |□f − f′|` and `max |Im □f|` over the effective interval.
fn reduction_errors(f: &SampledFunction, df: impl Fn(f64) -> f64, s: &EpsilonSchedule) -> (f64, f64) {
    let d = scale_derivative(f, s).unwrap().values;
    let (mut real, mut imag) = (0.0f64, 0.0f64);
    for i in 0..d.len() {
        let v = d.point(i)[0];
        real = real.max((v - df(d.time(i))).norm());
        imag = imag.max(v.im.abs());
    }
    (real, imag)
}

#[test]
fn zoo_derivatives_match_hand_derivatives() {
    let s = EpsilonSchedule::default_for_step(H);
    let bound = 5.0 * (s.eps0() + H);
    // (spec, f′ written out independently)
    let cases: Vec<(&str, Box<dyn Fn(f64) -> f64>)> = vec![
        ("poly(1, -2, 3)", Box::new(|t| -2.0 + 6.0 * t)),
        ("sin(2*pi, 0.3)", Box::new(|t| 2.0 * std::f64::consts::PI * (2.0 * std::f64::consts::PI * t + 0.3).cos())),
        ("cos(3, 0)", Box::new(|t| -3.0 * (3.0 * t).sin())),
        ("sum(2 * poly(0, 0, 0, 1), -1 * sin(1, 0))", Box::new(|t| 6.0 * t * t - t.cos())),
        ("abspow(0.5, 3)", Box::new(|t| 3.0 * (t - 0.5).abs() * (t - 0.5))),
    ];
    for (src, df) in &cases {
        let spec = parse_function(src).unwrap();
        let f = sample_on_grid(&spec, 0.0, 1.0, H).unwrap();
        let (real, imag) = reduction_errors(&f, df, &s);
        assert!(real <= bound && imag <= bound, "{src}: {real:e} {imag:e}");
        // the symbolic derivative agrees with the hand one
        let c = classical_derivative(&spec);
        assert!(c.is_differentiable(), "{src}");
        for i in 0..=20 {
            let t = i as f64 / 20.0;
            assert!((c.spec.eval(t) - df(t)).abs() <= 1e-9 * (1.0 + df(t).abs()), "{src} at {t}");
        }
    }
}

#[test]
fn kinks_are_reported_as_knots() {
    let c = classical_derivative(&parse_function("abspow(0.25, 0.5)").unwrap());
    assert_eq!(c.knots, vec![0.25]);
    let w = classical_derivative(&make_weierstrass(0.5, 3, 25).unwrap());
    assert!(w.is_differentiable());
}

#[test]
fn scale_derivative_of_order_one_is_scale_derivative() {
    let s = EpsilonSchedule::default_for_step(H);
    let f = grid(|t| (5.0 * t).sin() * t);
    assert_eq!(scale_derivative_k(&f, 1, &s).unwrap(), scale_derivative(&f, &s).unwrap());
}

#[test]
fn truncated_weierstrass_holder_drifts_toward_the_exponent() {
    let target = 2f64.ln() / 3f64.ln();
    let gaps: Vec<f64> = [5, 15, 25]
        .iter()
        .map(|&n| {
            let f = sample_on_grid(&make_weierstrass(0.5, 3, n).unwrap(), 0.0, 1.0, H).unwrap();
            (holder_estimate(&f).unwrap().alpha - target).abs()
        })
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{gaps:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn levels_are_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, w in 1.0f64..20.0, c in -2.0f64..2.0) {
        let s = EpsilonSchedule::default_for_step(H);
        let f = grid(|t| (w * t).sin());
        let g = grid(|t| (c * t).exp() + t.abs().sqrt());
        let mix = f.combine(&g, Complex64::new(a, 0.0), Complex64::new(b, 0.0)).unwrap();
        let (lf, lg, lm) = (
            scale_derivative_levels(&f, &s).unwrap(),
            scale_derivative_levels(&g, &s).unwrap(),
            scale_derivative_levels(&mix, &s).unwrap(),
        );
        for ((x, y), z) in lf.iter().zip(&lg).zip(&lm) {
            for i in 0..z.len() {
                let expect = x.point(i)[0] * a + y.point(i)[0] * b;
                let scale = 1.0 + expect.norm() / H;
                prop_assert!((z.point(i)[0] - expect).norm() <= 1e-13 * scale);
            }
        }
    }

    #[test]
    fn leibniz_residual_is_symmetric(w in 1.0f64..10.0, p in 0.0f64..3.0) {
        let s = EpsilonSchedule::default_for_step(H);
        let f = grid(|t| (w * t + p).sin());
        let g = grid(|t| t * t - p * t);
        let fg = leibniz_residual(&f, &g, 1.0, 1.0, &s).unwrap();
        let gf = leibniz_residual(&g, &f, 1.0, 1.0, &s).unwrap();
        for (x, y) in fg.residual.values().iter().zip(gf.residual.values()) {
            prop_assert!((x - y).norm() <= 1e-12);
        }
    }

    #[test]
    fn constants_have_zero_scale_derivative(c in -1e3f64..1e3) {
        let s = EpsilonSchedule::default_for_step(H);
        let d = scale_derivative(&grid(|_| c), &s).unwrap();
        prop_assert!(d.values.values().iter().all(|v| v.norm() == 0.0));
        prop_assert!(d.all_converged());
    }
}
