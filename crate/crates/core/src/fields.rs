//! Evaluation of expressions along sampled fields with retarded and
//! advanced arguments.
//!
//! Nodes are addressed by a signed index on one global grid. Every sampled
//! series (`q`, its derivative, `u`, `p`) is attached with its own offset,
//! and the `*tau` classes read the same series `τ` earlier. An expression
//! is available at a node only where every series it references has data,
//! so ranges shrink instead of extrapolating.

use num_complex::Complex64;

use crate::expr::{Binding, Expr, ExprError, VarClass};
use crate::sampled::{GridError, SampledFunction};

struct Series<'a> {
    data: &'a SampledFunction,
    offset: i64,
    flags: Option<&'a [bool]>,
}

pub(crate) struct Fields<'a> {
    origin: f64,
    step: f64,
    tau_steps: i64,
    series: [Option<Series<'a>>; 8],
}

fn is_delayed(class: VarClass) -> bool {
    matches!(class, VarClass::QTau | VarClass::QDotTau | VarClass::UTau)
}

impl<'a> Fields<'a> {
    pub(crate) fn new(origin: f64, step: f64, tau_steps: usize) -> Self {
        Fields { origin, step, tau_steps: tau_steps as i64, series: Default::default() }
    }

    pub(crate) fn node(&self, t: f64) -> i64 {
        ((t - self.origin) / self.step).round() as i64
    }

    pub(crate) fn time(&self, n: i64) -> f64 {
        self.origin + n as f64 * self.step
    }

    pub(crate) fn step(&self) -> f64 {
        self.step
    }

    pub(crate) fn tau_steps(&self) -> i64 {
        self.tau_steps
    }

    /// Attaches `data` to `class`; `flags`, when given, has one entry per node.
    pub(crate) fn bind(
        &mut self,
        class: VarClass,
        data: &'a SampledFunction,
        flags: Option<&'a [bool]>,
    ) -> Result<(), GridError> {
        let x = (data.start() - self.origin) / self.step;
        if (x - x.round()).abs() > 1e-6 || (data.step() - self.step).abs() > 1e-9 * self.step {
            return Err(GridError::Mismatch);
        }
        let offset = x.round() as i64 + if is_delayed(class) { self.tau_steps } else { 0 };
        self.series[class as usize] = Some(Series { data, offset, flags });
        Ok(())
    }

    fn series(&self, class: VarClass) -> Option<&Series<'a>> {
        self.series[class as usize].as_ref()
    }

    /// Node range `[lo, hi]` where `class` has data, or `None` if unbound.
    fn class_range(&self, class: VarClass) -> Option<(i64, i64)> {
        self.series(class).map(|s| (s.offset, s.offset + s.data.len() as i64 - 1))
    }

    fn lookup(&self, class: VarClass, n: i64) -> &[Complex64] {
        let s = self.series(class).expect("class bound");
        s.data.point((n - s.offset) as usize)
    }

    /// Binds time and every attached class at node `n`; false if some
    /// attached series has no sample there.
    pub(crate) fn fill_all(&self, b: &mut Binding, n: i64) -> bool {
        b.set_time(self.time(n));
        for class in VarClass::ALL {
            if let Some((lo, hi)) = self.class_range(class) {
                if n < lo || n > hi {
                    return false;
                }
                b.set(class, self.lookup(class, n));
            }
        }
        true
    }

    fn flag(&self, class: VarClass, n: i64) -> bool {
        match self.series(class) {
            Some(Series { flags: Some(f), offset, .. }) => f[(n - offset) as usize],
            _ => true,
        }
    }
}

/// Sum of expressions, each evaluated at a fixed node shift (`+K` for the
/// advanced argument `t+τ`).
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Combination {
    terms: Vec<(Expr, i64, Vec<VarClass>)>,
}

fn classes_of(e: &Expr) -> Vec<VarClass> {
    let mut out: Vec<VarClass> = e.variables().into_iter().map(|v| v.class).filter(|c| *c != VarClass::T).collect();
    out.sort();
    out.dedup();
    out
}

impl Combination {
    pub(crate) fn new() -> Self {
        Combination { terms: Vec::new() }
    }

    pub(crate) fn single(e: Expr) -> Self {
        Combination::new().with(e, 0)
    }

    pub(crate) fn with(mut self, e: Expr, shift: i64) -> Self {
        if !e.is_zero() {
            let classes = classes_of(&e);
            self.terms.push((e, shift, classes));
        }
        self
    }

    /// Nodes where every term has its data; `None` if a referenced class is
    /// unbound. Constant combinations are available everywhere.
    pub(crate) fn range(&self, fields: &Fields) -> Option<(i64, i64)> {
        let mut lo = i64::MIN;
        let mut hi = i64::MAX;
        for (_, shift, classes) in &self.terms {
            for &c in classes {
                let (a, b) = fields.class_range(c)?;
                lo = lo.max(a - shift);
                hi = hi.min(b - shift);
            }
        }
        Some((lo, hi))
    }

    pub(crate) fn eval(&self, fields: &Fields, n: i64, binding: &mut Binding) -> Result<Complex64, ExprError> {
        let mut acc = Complex64::new(0.0, 0.0);
        for (e, shift, classes) in &self.terms {
            let m = n + shift;
            binding.set_time(fields.time(m));
            for &c in classes {
                binding.set(c, fields.lookup(c, m));
            }
            acc += e.evaluate(binding)?;
        }
        Ok(acc)
    }

    pub(crate) fn converged(&self, fields: &Fields, n: i64) -> bool {
        self.terms.iter().all(|(_, shift, classes)| classes.iter().all(|&c| fields.flag(c, n + shift)))
    }

    /// Evaluates every component combination on `[lo, hi]` into a
    /// node-major sampled function, with per-node convergence flags.
    pub(crate) fn sample(
        parts: &[Combination],
        fields: &Fields,
        lo: i64,
        hi: i64,
    ) -> Result<(SampledFunction, Vec<bool>), ExprError> {
        let mut binding = Binding::new();
        let dim = parts.len();
        let mut values = Vec::with_capacity(((hi - lo + 1).max(0) as usize) * dim);
        let mut flags = Vec::new();
        for n in lo..=hi {
            let mut ok = true;
            for c in parts {
                values.push(c.eval(fields, n, &mut binding)?);
                ok &= c.converged(fields, n);
            }
            flags.push(ok);
        }
        Ok((SampledFunction::new_unchecked(fields.time(lo), fields.step(), dim, values), flags))
    }
}

/// Intersection of the ranges of several combinations.
pub(crate) fn common_range(parts: &[Combination], fields: &Fields) -> Option<(i64, i64)> {
    let mut lo = i64::MIN;
    let mut hi = i64::MAX;
    for p in parts {
        let (a, b) = p.range(fields)?;
        lo = lo.max(a);
        hi = hi.min(b);
    }
    Some((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expression, Dims};

    #[test]
    fn delayed_and_advanced_lookups() {
        let h = 0.1;
        let q = SampledFunction::from_real_fn(-0.5, 1.0, h, |t| t).unwrap();
        let mut f = Fields::new(-0.5, h, 5);
        f.bind(VarClass::Q, &q, None).unwrap();
        f.bind(VarClass::QTau, &q, None).unwrap();
        let e = parse_expression("q[0] - qtau[0]", Dims::state_only(1)).unwrap();
        let now = Combination::single(e.clone());
        // qtau needs t - τ ≥ -0.5
        assert_eq!(now.range(&f), Some((5, 15)));
        let adv = Combination::new().with(e, 5);
        assert_eq!(adv.range(&f), Some((0, 10)));
        let mut b = Binding::new();
        let v = now.eval(&f, f.node(0.3), &mut b).unwrap();
        assert!((v.re - 0.5).abs() < 1e-12);
        let t_only = Combination::single(parse_expression("t", Dims::state_only(1)).unwrap());
        assert_eq!(t_only.range(&f), Some((i64::MIN, i64::MAX)));
        let p = Combination::single(parse_expression("p[0]", Dims::state_only(1)).unwrap());
        assert_eq!(p.range(&f), None);
    }
}
