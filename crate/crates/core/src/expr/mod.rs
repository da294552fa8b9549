//! Symbolic expressions over the delay-variational variables.
//!
//! An [`Expr`] is a small tree over complex constants and the argument slots
//! of the delayed evaluation operators: `t`, `q[i]`, `qdot[i]`, `qtau[i]`,
//! `qdottau[i]`, `u[j]`, `utau[j]` and `p[i]`. Expressions can be parsed,
//! printed in a canonical form, evaluated with complex arithmetic and
//! differentiated symbolically.

mod diff;
mod eval;
mod parse;
mod print;

use std::fmt;

use num_complex::Complex64;

pub use eval::Binding;
pub use parse::parse_expression;

/// Argument slot class of a variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarClass {
    T,
    Q,
    QDot,
    QTau,
    QDotTau,
    U,
    UTau,
    P,
}

impl VarClass {
    pub const ALL: [VarClass; 8] = [
        VarClass::T,
        VarClass::Q,
        VarClass::QDot,
        VarClass::QTau,
        VarClass::QDotTau,
        VarClass::U,
        VarClass::UTau,
        VarClass::P,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VarClass::T => "t",
            VarClass::Q => "q",
            VarClass::QDot => "qdot",
            VarClass::QTau => "qtau",
            VarClass::QDotTau => "qdottau",
            VarClass::U => "u",
            VarClass::UTau => "utau",
            VarClass::P => "p",
        }
    }

    pub fn from_name(name: &str) -> Option<VarClass> {
        VarClass::ALL.into_iter().find(|c| c.name() == name)
    }

    /// Number of components of this class for the given dimensions.
    pub fn dimension(self, dims: Dims) -> usize {
        match self {
            VarClass::T => 1,
            VarClass::Q | VarClass::QDot | VarClass::QTau | VarClass::QDotTau | VarClass::P => {
                dims.state
            }
            VarClass::U | VarClass::UTau => dims.control,
        }
    }

    pub(crate) fn slot(self) -> usize {
        self as usize
    }
}

/// State dimension `d` and control dimension `m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub state: usize,
    pub control: usize,
}

impl Dims {
    pub fn new(state: usize, control: usize) -> Self {
        Dims { state, control }
    }

    pub fn state_only(state: usize) -> Self {
        Dims { state, control: 0 }
    }
}

/// A variable reference: class plus component index (`t` always has index 0).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var {
    pub class: VarClass,
    pub index: usize,
}

impl Var {
    pub fn new(class: VarClass, index: usize) -> Self {
        Var { class, index }
    }

    pub fn time() -> Self {
        Var { class: VarClass::T, index: 0 }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.class {
            VarClass::T => f.write_str("t"),
            c => write!(f, "{}[{}]", c.name(), self.index),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Abs,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        [Func::Sin, Func::Cos, Func::Exp, Func::Log, Func::Abs]
            .into_iter()
            .find(|f| f.name() == name)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(Complex64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Integer power only.
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown variable `{name}` at position {position}")]
    UnknownVariable { name: String, position: usize },
    #[error("index {index} of `{class}` out of range (dimension {dim})")]
    IndexOutOfRange {
        class: &'static str,
        index: usize,
        dim: usize,
    },
    #[error("variable {0} is not bound")]
    Unbound(Var),
    #[error("division by zero")]
    DivisionByZero,
    #[error("logarithm of zero")]
    LogOfZero,
}

impl Expr {
    pub fn constant(value: f64) -> Expr {
        Expr::Const(Complex64::new(value, 0.0))
    }

    pub fn var(class: VarClass, index: usize) -> Expr {
        Expr::Var(Var::new(class, index))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == Complex64::new(0.0, 0.0))
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == Complex64::new(1.0, 0.0))
    }

    /// Calls `visit` on every node, parents before children.
    pub fn walk(&self, visit: &mut impl FnMut(&Expr)) {
        visit(self);
        match self {
            Expr::Const(_) | Expr::Var(_) => {}
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.walk(visit),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.walk(visit);
                b.walk(visit);
            }
        }
    }

    /// Distinct variables occurring in the tree, sorted.
    pub fn variables(&self) -> Vec<Var> {
        let mut vars = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Var(v) = e {
                vars.push(*v);
            }
        });
        vars.sort();
        vars.dedup();
        vars
    }

    pub fn uses_class(&self, class: VarClass) -> bool {
        let mut found = false;
        self.walk(&mut |e| {
            if let Expr::Var(v) = e {
                found |= v.class == class;
            }
        });
        found
    }

    /// True when the tree contains no `abs` node. `abs` is not holomorphic,
    /// so derivatives through it are only valid for real arguments away
    /// from zero.
    pub fn is_analytic(&self) -> bool {
        let mut analytic = true;
        self.walk(&mut |e| {
            if let Expr::Call(Func::Abs, _) = e {
                analytic = false;
            }
        });
        analytic
    }

    /// True when some `abs` node has an argument depending on a variable
    /// other than `t`.
    pub fn has_non_analytic_dependence(&self) -> bool {
        let mut flagged = false;
        self.walk(&mut |e| {
            if let Expr::Call(Func::Abs, arg) = e {
                if arg.variables().iter().any(|v| v.class != VarClass::T) {
                    flagged = true;
                }
            }
        });
        flagged
    }

    /// Checks every variable against the declared dimensions.
    pub fn check_dims(&self, dims: Dims) -> Result<(), ExprError> {
        for v in self.variables() {
            let dim = v.class.dimension(dims);
            if v.index >= dim {
                return Err(ExprError::IndexOutOfRange {
                    class: v.class.name(),
                    index: v.index,
                    dim,
                });
            }
        }
        Ok(())
    }

    /// Replaces variable classes according to `map`, keeping indices.
    pub fn rename_classes(&self, map: &dyn Fn(VarClass) -> VarClass) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(v) => Expr::Var(Var::new(map(v.class), v.index)),
            Expr::Neg(a) => Expr::Neg(Box::new(a.rename_classes(map))),
            Expr::Add(a, b) => Expr::Add(Box::new(a.rename_classes(map)), Box::new(b.rename_classes(map))),
            Expr::Sub(a, b) => Expr::Sub(Box::new(a.rename_classes(map)), Box::new(b.rename_classes(map))),
            Expr::Mul(a, b) => Expr::Mul(Box::new(a.rename_classes(map)), Box::new(b.rename_classes(map))),
            Expr::Div(a, b) => Expr::Div(Box::new(a.rename_classes(map)), Box::new(b.rename_classes(map))),
            Expr::Pow(a, n) => Expr::Pow(Box::new(a.rename_classes(map)), *n),
            Expr::Call(f, a) => Expr::Call(*f, Box::new(a.rename_classes(map))),
        }
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::Add(Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::Sub(Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::Mul(Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

#[cfg(test)]
pub(crate) mod strategy {
    use super::*;
    use proptest::prelude::*;

    pub fn var(dims: Dims) -> impl Strategy<Value = Var> {
        let classes: Vec<VarClass> = VarClass::ALL
            .into_iter()
            .filter(|c| c.dimension(dims) > 0)
            .collect();
        proptest::sample::select(classes).prop_flat_map(move |class| {
            let dim = class.dimension(dims);
            (0..dim).prop_map(move |index| Var::new(class, if class == VarClass::T { 0 } else { index }))
        })
    }

    pub fn constant() -> impl Strategy<Value = Complex64> {
        prop_oneof![
            (-5.0f64..5.0).prop_map(|re| Complex64::new(re, 0.0)),
            (-5.0f64..5.0, -5.0f64..5.0).prop_map(|(re, im)| Complex64::new(re, im)),
        ]
    }

    /// Random trees; `analytic_only` omits `abs`/`log`/division so that
    /// finite differences are well behaved on any real binding.
    pub fn expr(dims: Dims, analytic_only: bool) -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            constant().prop_map(Expr::Const),
            var(dims).prop_map(Expr::Var),
        ];
        leaf.prop_recursive(4, 24, 2, move |inner| {
            let funcs: Vec<Func> = if analytic_only {
                vec![Func::Sin, Func::Cos, Func::Exp]
            } else {
                vec![Func::Sin, Func::Cos, Func::Exp, Func::Log, Func::Abs]
            };
            let mut options: Vec<BoxedStrategy<Expr>> = vec![
                inner.clone().prop_map(|a| -a).boxed(),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b).boxed(),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b).boxed(),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b).boxed(),
                (inner.clone(), 0i32..4).prop_map(|(a, n)| Expr::Pow(Box::new(a), n)).boxed(),
                (inner.clone(), proptest::sample::select(funcs))
                    .prop_map(|(a, f)| Expr::Call(f, Box::new(a)))
                    .boxed(),
            ];
            if !analytic_only {
                options.push(
                    (inner.clone(), inner.clone())
                        .prop_map(|(a, b)| Expr::Div(Box::new(a), Box::new(b)))
                        .boxed(),
                );
                options.push(
                    (inner, -3i32..0)
                        .prop_map(|(a, n)| Expr::Pow(Box::new(a), n))
                        .boxed(),
                );
            }
            proptest::strategy::Union::new(options)
        })
    }
}
