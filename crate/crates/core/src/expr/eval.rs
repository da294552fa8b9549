use num_complex::Complex64;

use super::{Expr, ExprError, Func, Var, VarClass};

/// Values for the variable slots of an evaluation.
///
/// Slots are stored per class; a class that was never set is unbound and
/// evaluating an expression that references it fails.
#[derive(Clone, Debug, Default)]
pub struct Binding {
    slots: [Option<Vec<Complex64>>; 8],
}

impl Binding {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.set_time(t);
        self
    }

    pub fn with(mut self, class: VarClass, values: &[Complex64]) -> Self {
        self.set(class, values);
        self
    }

    pub fn with_real(mut self, class: VarClass, values: &[f64]) -> Self {
        let v: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.set(class, &v);
        self
    }

    pub fn set_time(&mut self, t: f64) {
        self.set(VarClass::T, &[Complex64::new(t, 0.0)]);
    }

    /// Overwrites the slot, reusing its allocation.
    pub fn set(&mut self, class: VarClass, values: &[Complex64]) {
        let slot = &mut self.slots[class.slot()];
        match slot {
            Some(v) => {
                v.clear();
                v.extend_from_slice(values);
            }
            None => *slot = Some(values.to_vec()),
        }
    }

    pub fn unset(&mut self, class: VarClass) {
        self.slots[class.slot()] = None;
    }

    pub fn get(&self, var: Var) -> Option<Complex64> {
        self.slots[var.class.slot()]
            .as_ref()
            .and_then(|v| v.get(var.index).copied())
    }

    /// Sets one component of an already present slot, or creates it.
    pub fn set_component(&mut self, var: Var, value: Complex64) {
        let slot = self.slots[var.class.slot()].get_or_insert_with(Vec::new);
        if slot.len() <= var.index {
            slot.resize(var.index + 1, Complex64::new(0.0, 0.0));
        }
        slot[var.index] = value;
    }
}

impl Expr {
    /// Evaluates the tree with complex arithmetic.
    pub fn evaluate(&self, b: &Binding) -> Result<Complex64, ExprError> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var(v) => b.get(*v).ok_or(ExprError::Unbound(*v))?,
            Expr::Neg(a) => -a.evaluate(b)?,
            Expr::Add(x, y) => x.evaluate(b)? + y.evaluate(b)?,
            Expr::Sub(x, y) => x.evaluate(b)? - y.evaluate(b)?,
            Expr::Mul(x, y) => x.evaluate(b)? * y.evaluate(b)?,
            Expr::Div(x, y) => {
                let num = x.evaluate(b)?;
                let den = y.evaluate(b)?;
                if den.re == 0.0 && den.im == 0.0 {
                    return Err(ExprError::DivisionByZero);
                }
                num / den
            }
            Expr::Pow(a, n) => {
                let base = a.evaluate(b)?;
                if *n < 0 && base.re == 0.0 && base.im == 0.0 {
                    return Err(ExprError::DivisionByZero);
                }
                base.powi(*n)
            }
            Expr::Call(func, a) => {
                let z = a.evaluate(b)?;
                match func {
                    Func::Sin => z.sin(),
                    Func::Cos => z.cos(),
                    Func::Exp => z.exp(),
                    Func::Log => {
                        if z.re == 0.0 && z.im == 0.0 {
                            return Err(ExprError::LogOfZero);
                        }
                        z.ln()
                    }
                    Func::Abs => Complex64::new(z.norm(), 0.0),
                }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expression, Dims};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn spec_examples() {
        let dims = Dims::state_only(1);
        let e = parse_expression("0.5*qdot[0]^2", dims).unwrap();
        let b = Binding::new().with_real(VarClass::QDot, &[2.0]);
        assert_eq!(e.evaluate(&b).unwrap(), c(2.0, 0.0));

        let e = parse_expression("qdot[0]", dims).unwrap();
        let b = Binding::new().with(VarClass::QDot, &[c(2.0, -0.1)]);
        assert_eq!(e.evaluate(&b).unwrap(), c(2.0, -0.1));

        let e = parse_expression("q[0]*qtau[0]", dims).unwrap();
        let b = Binding::new()
            .with_real(VarClass::Q, &[3.0])
            .with_real(VarClass::QTau, &[-1.0]);
        assert_eq!(e.evaluate(&b).unwrap(), c(-3.0, 0.0));
    }

    #[test]
    fn errors() {
        let dims = Dims::state_only(1);
        let b = Binding::new().with_real(VarClass::Q, &[0.0]);
        assert_eq!(
            parse_expression("1/q[0]", dims).unwrap().evaluate(&b),
            Err(ExprError::DivisionByZero)
        );
        assert_eq!(
            parse_expression("q[0]^-2", dims).unwrap().evaluate(&b),
            Err(ExprError::DivisionByZero)
        );
        assert_eq!(
            parse_expression("log(q[0])", dims).unwrap().evaluate(&b),
            Err(ExprError::LogOfZero)
        );
        assert_eq!(
            parse_expression("qdot[0]", dims).unwrap().evaluate(&b),
            Err(ExprError::Unbound(Var::new(VarClass::QDot, 0)))
        );
    }

    #[test]
    fn real_bindings_give_exactly_real_values() {
        let dims = Dims::new(1, 1);
        let e = parse_expression(
            "sin(q[0])*exp(t) - cos(qdot[0])^3/(2 + u[0]^2) + qtau[0]*qdottau[0]",
            dims,
        )
        .unwrap();
        let b = Binding::new()
            .with_time(0.3)
            .with_real(VarClass::Q, &[1.2])
            .with_real(VarClass::QDot, &[-0.7])
            .with_real(VarClass::QTau, &[0.4])
            .with_real(VarClass::QDotTau, &[2.5])
            .with_real(VarClass::U, &[-1.1]);
        assert_eq!(e.evaluate(&b).unwrap().im, 0.0);
    }

    #[test]
    fn constant_tree_is_exact() {
        let e = parse_expression("complex(1, 2) * complex(3, -1)", Dims::state_only(1)).unwrap();
        assert_eq!(e.evaluate(&Binding::new()).unwrap(), c(5.0, 5.0));
    }
}
