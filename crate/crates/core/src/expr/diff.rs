use num_complex::Complex64;

use super::{Expr, Func, Var};

fn konst(c: Complex64) -> Expr {
    Expr::Const(c)
}

fn as_const(e: &Expr) -> Option<Complex64> {
    match e {
        Expr::Const(c) => Some(*c),
        _ => None,
    }
}

// Folding constructors. They only fold constants and drop additive zeros
// and multiplicative ones; there is no reassociation beyond pulling a
// constant factor through a product with a constant left operand.

pub(crate) fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => konst(-c),
        Expr::Neg(inner) => *inner,
        a => Expr::Neg(Box::new(a)),
    }
}

pub(crate) fn add(a: Expr, b: Expr) -> Expr {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => konst(x + y),
        _ if a.is_zero() => b,
        _ if b.is_zero() => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn sub(a: Expr, b: Expr) -> Expr {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => konst(x - y),
        _ if b.is_zero() => a,
        _ if a.is_zero() => neg(b),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn mul(a: Expr, b: Expr) -> Expr {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => return konst(x * y),
        _ if a.is_zero() || b.is_zero() => return Expr::constant(0.0),
        _ if a.is_one() => return b,
        _ if b.is_one() => return a,
        (None, Some(_)) => return mul(b, a),
        _ => {}
    }
    if let (Some(x), Expr::Mul(inner_l, inner_r)) = (as_const(&a), &b) {
        if let Some(y) = as_const(inner_l) {
            return mul(konst(x * y), (**inner_r).clone());
        }
    }
    if let (Some(x), Expr::Neg(inner)) = (as_const(&a), &b) {
        return mul(konst(-x), (**inner).clone());
    }
    Expr::Mul(Box::new(a), Box::new(b))
}

pub(crate) fn div(a: Expr, b: Expr) -> Expr {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) if y != Complex64::new(0.0, 0.0) => konst(x / y),
        _ if b.is_one() => a,
        _ if a.is_zero() => Expr::constant(0.0),
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn pow(a: Expr, n: i32) -> Expr {
    match n {
        0 => Expr::constant(1.0),
        1 => a,
        _ => match as_const(&a) {
            Some(c) if n > 0 || c != Complex64::new(0.0, 0.0) => konst(c.powi(n)),
            _ => Expr::Pow(Box::new(a), n),
        },
    }
}

pub(crate) fn call(f: Func, a: Expr) -> Expr {
    Expr::Call(f, Box::new(a))
}

impl Expr {
    /// Constant folding with the identities used by the differentiator.
    pub fn fold_constants(&self) -> Expr {
        match self {
            Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Neg(a) => neg(a.fold_constants()),
            Expr::Add(a, b) => add(a.fold_constants(), b.fold_constants()),
            Expr::Sub(a, b) => sub(a.fold_constants(), b.fold_constants()),
            Expr::Mul(a, b) => mul(a.fold_constants(), b.fold_constants()),
            Expr::Div(a, b) => div(a.fold_constants(), b.fold_constants()),
            Expr::Pow(a, n) => pow(a.fold_constants(), *n),
            Expr::Call(f, a) => call(*f, a.fold_constants()),
        }
    }

    /// Symbolic partial derivative with respect to `v`, constant-folded.
    ///
    /// `abs(x)` differentiates to `x/abs(x)`, which is only meaningful for
    /// real `x != 0`; use [`Expr::is_analytic`] to detect such trees.
    pub fn partial_derivative(&self, v: Var) -> Expr {
        match self {
            Expr::Const(_) => Expr::constant(0.0),
            Expr::Var(w) => Expr::constant(if *w == v { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.partial_derivative(v)),
            Expr::Add(a, b) => add(a.partial_derivative(v), b.partial_derivative(v)),
            Expr::Sub(a, b) => sub(a.partial_derivative(v), b.partial_derivative(v)),
            Expr::Mul(a, b) => add(
                mul(a.partial_derivative(v), b.fold_constants()),
                mul(a.fold_constants(), b.partial_derivative(v)),
            ),
            Expr::Div(a, b) => {
                let da = a.partial_derivative(v);
                let db = b.partial_derivative(v);
                let a = a.fold_constants();
                let b = b.fold_constants();
                if db.is_zero() {
                    div(da, b)
                } else {
                    div(sub(mul(da, b.clone()), mul(a, db)), pow(b, 2))
                }
            }
            Expr::Pow(a, n) => {
                let da = a.partial_derivative(v);
                if da.is_zero() {
                    return Expr::constant(0.0);
                }
                mul(mul(Expr::constant(*n as f64), pow(a.fold_constants(), n - 1)), da)
            }
            Expr::Call(f, a) => {
                let da = a.partial_derivative(v);
                if da.is_zero() {
                    return Expr::constant(0.0);
                }
                let a = a.fold_constants();
                let outer = match f {
                    Func::Sin => call(Func::Cos, a),
                    Func::Cos => neg(call(Func::Sin, a)),
                    Func::Exp => call(Func::Exp, a),
                    Func::Log => div(Expr::constant(1.0), a),
                    Func::Abs => div(a.clone(), call(Func::Abs, a)),
                };
                mul(outer, da)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expression, strategy, Binding, Dims, VarClass};
    use proptest::prelude::*;

    fn p(s: &str) -> Expr {
        parse_expression(s, Dims::new(1, 1)).unwrap()
    }

    #[test]
    fn spec_examples() {
        let qd = Var::new(VarClass::QDot, 0);
        assert_eq!(p("0.5*qdot[0]^2").partial_derivative(qd), p("qdot[0]"));
        let qt = Var::new(VarClass::QTau, 0);
        assert_eq!(
            p("qdot[0]*qdottau[0] - q[0]*qtau[0]").partial_derivative(qt),
            p("-q[0]")
        );
        let u = Var::new(VarClass::U, 0);
        assert_eq!(p("0.5*u[0]^2 + p[0]*u[0]").partial_derivative(u), p("u[0] + p[0]"));
    }

    #[test]
    fn derivative_of_variable_and_other_variable() {
        let q = Var::new(VarClass::Q, 0);
        assert!(p("q[0]").partial_derivative(q).is_one());
        assert!(p("qtau[0]").partial_derivative(q).is_zero());
        assert!(p("sin(t)*exp(qdot[0])").partial_derivative(q).is_zero());
    }

    #[test]
    fn abs_is_flagged() {
        let e = p("abs(q[0])");
        assert!(!e.is_analytic());
        assert!(e.has_non_analytic_dependence());
        assert!(!p("abs(t)*q[0]").has_non_analytic_dependence());
        let d = e.partial_derivative(Var::new(VarClass::Q, 0));
        let b = Binding::new().with_real(VarClass::Q, &[0.0]);
        assert!(d.evaluate(&b).is_err());
        let b = Binding::new().with_real(VarClass::Q, &[-2.0]);
        assert_eq!(d.evaluate(&b).unwrap().re, -1.0);
    }

    fn all_vars() -> Vec<Var> {
        VarClass::ALL.into_iter().map(|c| Var::new(c, 0)).collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn partial_matches_central_difference(
            e in strategy::expr(Dims::new(1, 1), true),
            values in proptest::collection::vec(-2.0f64..2.0, 8),
            which in 0usize..8,
        ) {
            let v = all_vars()[which];
            let mut b = Binding::new();
            for (var, x) in all_vars().into_iter().zip(&values) {
                b.set_component(var, Complex64::new(*x, 0.0));
            }
            let magnitude = e.evaluate(&b).unwrap().norm();
            // roundoff of the difference quotient grows like 1e-11 * |f|
            prop_assume!(magnitude < 1e4);
            let d = e.partial_derivative(v).evaluate(&b).unwrap();
            let step = 1e-5;
            let base = values[which];
            let mut bp = b.clone();
            bp.set_component(v, Complex64::new(base + step, 0.0));
            let mut bm = b.clone();
            bm.set_component(v, Complex64::new(base - step, 0.0));
            let fd = (e.evaluate(&bp).unwrap() - e.evaluate(&bm).unwrap()) / (2.0 * step);
            let scale = d.norm().max(fd.norm()).max(1.0);
            prop_assert!((d - fd).norm() <= 1e-6 * scale, "{e}: analytic {d}, fd {fd}");
        }
    }
}
