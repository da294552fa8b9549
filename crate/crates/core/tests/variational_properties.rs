use num_complex::Complex64;
use scalecalc_core::control::{
    pontryagin_residual_classical, pontryagin_residual_scale, ControlProblem, ControlTriple, PontryaginReport,
};
use scalecalc_core::delay::{
    action_value, bump, classical_el_residual, first_variation, scale_el_residual, solve_extremal_direct,
    DelayProblem, ResidualReport, ScaleMode, Trajectory, VariationMode,
};
use scalecalc_core::expr::{parse_expression, Dims};
use scalecalc_core::sampled::SampledFunction;
use scalecalc_core::scale::EpsilonSchedule;
use scalecalc_core::zoo::FunctionSpec;

fn oscillator(h: f64) -> DelayProblem {
    DelayProblem::new(
        parse_expression("0.5*qdot[0]^2 - 0.5*qtau[0]^2", Dims::state_only(1)).unwrap(),
        0.5,
        0.0,
        2.0,
        vec![FunctionSpec::constant(1.0)],
        vec![0.0],
        h,
    )
    .unwrap()
}

fn control(h: f64) -> ControlProblem {
    let e = |s: &str| parse_expression(s, Dims::new(1, 1)).unwrap();
    ControlProblem::new(
        e("0.5*u[0]^2 + q[0]*qtau[0] + u[0]*utau[0]"),
        vec![e("u[0] + sin(q[0])*utau[0]")],
        0.5,
        0.0,
        2.0,
        vec![FunctionSpec::constant(0.0)],
        vec![0.0],
        1,
        h,
    )
    .unwrap()
}

/// Values past `t₂` replaced by `poison`.
fn poisoned(s: &SampledFunction, t2: f64, poison: f64) -> SampledFunction {
    let mut out = s.clone();
    for i in 0..out.len() {
        if out.time(i) > t2 + 1e-12 {
            out.point_mut(i).fill(Complex64::new(poison, 0.0));
        }
    }
    out
}

fn second_regime(r: &ResidualReport) -> &SampledFunction {
    r.regimes[1].residual.as_ref().expect("second regime evaluated")
}

#[test]
fn poison_beyond_t2_is_never_read_by_euler_lagrange() {
    let h = 1.0 / 200.0;
    let p = oscillator(h);
    let clean = Trajectory::from_real_fn(-0.5, 2.3, h, |t| (2.0 * t).cos() + t).unwrap();
    let bad = Trajectory::new(poisoned(clean.samples(), 2.0, 1e9));
    let s = EpsilonSchedule::default_for_step(h);
    let a = classical_el_residual(&p, &clean).unwrap();
    let b = classical_el_residual(&p, &bad).unwrap();
    assert_eq!(second_regime(&a), second_regime(&b));
    for mode in [ScaleMode::Embedding, ScaleMode::LeastAction] {
        let a = scale_el_residual(&p, &clean, &s, mode).unwrap();
        let b = scale_el_residual(&p, &bad, &s, mode).unwrap();
        assert_eq!(second_regime(&a), second_regime(&b));
    }
}

fn triple(h: f64, end: f64) -> ControlTriple {
    let f = |g: fn(f64) -> f64| SampledFunction::from_real_fn(-0.5, end, h, g).unwrap();
    ControlTriple::new(f(|t| t.sin()), f(|t| (3.0 * t).cos()), f(|t| t * t - 1.0)).unwrap()
}

#[test]
fn poison_beyond_t2_is_never_read_by_pontryagin() {
    let h = 1.0 / 200.0;
    let p = control(h);
    let clean = triple(h, 2.4);
    let bad = ControlTriple::new(
        poisoned(&clean.q, 2.0, -1e9),
        poisoned(&clean.u, 2.0, 1e9),
        poisoned(&clean.p, 2.0, 1e9),
    )
    .unwrap();
    let s = EpsilonSchedule::default_for_step(h);
    let all = |r: &PontryaginReport| {
        [&r.state, &r.costate, &r.stationary].map(|f| second_regime(f).clone())
    };
    let (a, b) = (pontryagin_residual_classical(&p, &clean).unwrap(), pontryagin_residual_classical(&p, &bad).unwrap());
    assert_eq!(all(&a), all(&b));
    let (a, b) = (pontryagin_residual_scale(&p, &clean, &s).unwrap(), pontryagin_residual_scale(&p, &bad, &s).unwrap());
    assert_eq!(all(&a), all(&b));
}

/// Largest gap between scale and classical residual on the scale norm nodes.
fn gap(scale: &ResidualReport, classical: &ResidualReport) -> f64 {
    let mut d = 0.0f64;
    let mut counted = 0;
    for (s, c) in scale.regimes.iter().zip(&classical.regimes) {
        let (rs, rc) = (s.residual.as_ref().unwrap(), c.residual.as_ref().unwrap());
        for i in (0..rs.len()).filter(|&i| s.in_norm[i]) {
            let w = rc.at(rs.time(i)).expect("classical covers the scale interval");
            counted += 1;
            for (x, y) in rs.point(i).iter().zip(w) {
                d = d.max((x - y).norm());
            }
        }
    }
    assert!(counted > 0, "no node outside the breakpoint margins");
    d
}

#[test]
fn scale_pontryagin_reduces_to_classical() {
    let gaps: Vec<f64> = [1.0 / 100.0, 1.0 / 200.0]
        .iter()
        .map(|&h| {
            let p = control(h);
            let t = triple(h, 2.0);
            let s = EpsilonSchedule::default_for_step(h);
            let (sc, cl) = (pontryagin_residual_scale(&p, &t, &s).unwrap(), pontryagin_residual_classical(&p, &t).unwrap());
            [(&sc.state, &cl.state), (&sc.costate, &cl.costate), (&sc.stationary, &cl.stationary)]
                .iter()
                .map(|(a, b)| gap(a, b))
                .fold(0.0, f64::max)
        })
        .collect();
    assert!(gaps[1] <= 5.0 * (16.0 / 200.0 + 1.0 / 200.0), "{gaps:?}");
    assert!(gaps[0] >= 1.8 * gaps[1], "{gaps:?}");
}

#[test]
fn scale_euler_lagrange_reduces_to_classical() {
    let gaps: Vec<f64> = [1.0 / 200.0, 1.0 / 400.0]
        .iter()
        .map(|&h| {
            let p = oscillator(h);
            let q = Trajectory::from_real_fn(-0.5, 2.0, h, |t| (2.0 * t).sin() + 0.3 * t.powi(3)).unwrap();
            let s = EpsilonSchedule::default_for_step(h);
            gap(
                &scale_el_residual(&p, &q, &s, ScaleMode::LeastAction).unwrap(),
                &classical_el_residual(&p, &q).unwrap(),
            )
        })
        .collect();
    assert!(gaps[0] >= 1.8 * gaps[1], "{gaps:?}");
}

#[test]
fn action_is_second_order_under_regridding() {
    // q = sin t: ∫₀² ½cos²t − ½sin²(t − ½) dt in closed form
    let exact = 0.5 * (1.0 + 4f64.sin() / 4.0) - 0.5 * (1.0 - (3f64.sin() + 1f64.sin()) / 4.0);
    let err = |h: f64| {
        let p = DelayProblem::new(
            parse_expression("0.5*qdot[0]^2 - 0.5*qtau[0]^2", Dims::state_only(1)).unwrap(),
            0.5,
            0.0,
            2.0,
            vec![FunctionSpec::sin(1.0, 0.0)],
            vec![2f64.sin()],
            h,
        )
        .unwrap();
        let q = Trajectory::from_real_fn(-0.5, 2.0, h, f64::sin).unwrap();
        (action_value(&p, &q).unwrap() - exact).abs()
    };
    let (coarse, fine) = (err(0.01), err(0.005));
    assert!(fine <= 1e-4, "{fine:e}");
    assert!(coarse >= 3.0 * fine, "{coarse:e} {fine:e}");
}

#[test]
fn extremal_is_stationary_for_a_bump_basis() {
    let p = oscillator(1.0 / 200.0);
    let q = solve_extremal_direct(&p).unwrap().trajectory;
    for i in 0..10 {
        let b = bump(&q, 0.2 + 0.16 * i as f64, 0.15, 1.0, 0);
        let v = first_variation(&p, &q, &b, &VariationMode::Classical).unwrap();
        assert!(v.finite_difference.norm() <= 1e-5, "bump {i}: {v:?}");
        assert!(v.agrees);
    }
}
