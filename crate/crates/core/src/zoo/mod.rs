//! Closed-form test functions: smooth oracles with exact derivatives,
//! cusps, and truncated Weierstrass sums.

mod parse;

use std::f64::consts::PI;

use crate::sampled::{GridError, SampledFunction};

pub use parse::parse_function;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FunctionError {
    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("invalid weierstrass parameters: {0}")]
    Weierstrass(String),
    #[error("invalid piecewise definition: {0}")]
    Piecewise(String),
    #[error("abspow exponent must be positive, got {0}")]
    Exponent(f64),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrigKind {
    Sin,
    Cos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub spec: FunctionSpec,
}

/// Real function of one real variable.
#[derive(Debug, Clone, PartialEq)]
pub enum FunctionSpec {
    /// `Σ cₖ tᵏ`.
    Poly(Vec<f64>),
    /// `sin(ω t + φ)` or `cos(ω t + φ)`.
    Trig { kind: TrigKind, frequency: f64, phase: f64 },
    /// `Σ_{n<terms} aⁿ cos(bⁿ π t)`.
    Weierstrass { a: f64, b: u32, terms: usize },
    /// `|t − c|^p`, or `sgn(t − c)|t − c|^p` when `signed`.
    AbsPow { center: f64, exponent: f64, signed: bool },
    /// Contiguous pieces; the first piece containing `t` wins and the outer
    /// pieces extend beyond the declared domain.
    Piecewise(Vec<Piece>),
    /// `Σ wᵢ fᵢ`.
    Sum(Vec<(f64, FunctionSpec)>),
}

/// Exact derivative together with the points where it does not exist.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalDerivative {
    pub spec: FunctionSpec,
    pub knots: Vec<f64>,
}

impl ClassicalDerivative {
    pub fn is_differentiable(&self) -> bool {
        self.knots.is_empty()
    }
}

/// `W(t) = Σ_{n<terms} aⁿ cos(bⁿ π t)` with Hölder exponent `ln(1/a)/ln b`.
pub fn make_weierstrass(a: f64, b: u32, terms: usize) -> Result<FunctionSpec, FunctionError> {
    if !(a > 0.0 && a < 1.0) {
        return Err(FunctionError::Weierstrass(format!("need 0 < a < 1, got a = {a}")));
    }
    if b < 3 || b % 2 == 0 {
        return Err(FunctionError::Weierstrass(format!("b must be an odd integer ≥ 3, got {b}")));
    }
    if a * b as f64 <= 1.0 {
        return Err(FunctionError::Weierstrass(format!("need a·b > 1, got {}", a * b as f64)));
    }
    if terms == 0 {
        return Err(FunctionError::Weierstrass("need at least one term".into()));
    }
    Ok(FunctionSpec::Weierstrass { a, b, terms })
}

/// Samples `spec` on `[a, b]` after dropping Weierstrass terms above the
/// grid's Nyquist frequency (`bⁿ h > 1`).
pub fn sample_on_grid(spec: &FunctionSpec, a: f64, b: f64, h: f64) -> Result<SampledFunction, FunctionError> {
    let limited = spec.band_limited(h);
    Ok(SampledFunction::from_real_fn(a, b, h, |t| limited.eval(t))?)
}

/// Samples one spec per component.
pub fn sample_vector_on_grid(specs: &[FunctionSpec], a: f64, b: f64, h: f64) -> Result<SampledFunction, FunctionError> {
    let limited: Vec<FunctionSpec> = specs.iter().map(|s| s.band_limited(h)).collect();
    Ok(SampledFunction::from_fn(a, b, h, specs.len(), |t, out| {
        for (o, s) in out.iter_mut().zip(&limited) {
            *o = s.eval(t).into();
        }
    })?)
}

pub fn classical_derivative(spec: &FunctionSpec) -> ClassicalDerivative {
    let mut knots = Vec::new();
    let spec = spec.derivative(&mut knots);
    knots.sort_by(f64::total_cmp);
    knots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    ClassicalDerivative { spec, knots }
}

impl FunctionSpec {
    pub fn constant(c: f64) -> Self {
        FunctionSpec::Poly(vec![c])
    }

    pub fn sin(frequency: f64, phase: f64) -> Self {
        FunctionSpec::Trig { kind: TrigKind::Sin, frequency, phase }
    }

    pub fn cos(frequency: f64, phase: f64) -> Self {
        FunctionSpec::Trig { kind: TrigKind::Cos, frequency, phase }
    }

    pub fn abspow(center: f64, exponent: f64) -> Result<Self, FunctionError> {
        if !(exponent > 0.0 && exponent.is_finite()) {
            return Err(FunctionError::Exponent(exponent));
        }
        Ok(FunctionSpec::AbsPow { center, exponent, signed: false })
    }

    pub fn piecewise(pieces: Vec<Piece>) -> Result<Self, FunctionError> {
        if pieces.is_empty() {
            return Err(FunctionError::Piecewise("no pieces".into()));
        }
        for p in &pieces {
            if !(p.lo < p.hi) {
                return Err(FunctionError::Piecewise(format!("empty interval [{}, {}]", p.lo, p.hi)));
            }
        }
        for w in pieces.windows(2) {
            if (w[0].hi - w[1].lo).abs() > 1e-12 * w[0].hi.abs().max(1.0) {
                return Err(FunctionError::Piecewise(format!(
                    "gap or overlap between {} and {}",
                    w[0].hi, w[1].lo
                )));
            }
        }
        Ok(FunctionSpec::Piecewise(pieces))
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            FunctionSpec::Poly(c) => c.iter().rev().fold(0.0, |acc, &k| acc * t + k),
            FunctionSpec::Trig { kind, frequency, phase } => {
                let x = frequency * t + phase;
                match kind {
                    TrigKind::Sin => x.sin(),
                    TrigKind::Cos => x.cos(),
                }
            }
            FunctionSpec::Weierstrass { a, b, terms } => {
                let (mut an, mut bn, mut sum) = (1.0, 1.0, 0.0);
                for _ in 0..*terms {
                    sum += an * (bn * PI * t).cos();
                    an *= a;
                    bn *= *b as f64;
                }
                sum
            }
            FunctionSpec::AbsPow { center, exponent, signed } => {
                let x = t - center;
                let m = x.abs().powf(*exponent);
                if *signed {
                    if x > 0.0 {
                        m
                    } else if x < 0.0 {
                        -m
                    } else {
                        0.0
                    }
                } else {
                    m
                }
            }
            FunctionSpec::Piecewise(pieces) => {
                let piece = pieces
                    .iter()
                    .find(|p| p.lo <= t && t <= p.hi)
                    .unwrap_or_else(|| if t < pieces[0].lo { &pieces[0] } else { &pieces[pieces.len() - 1] });
                piece.spec.eval(t)
            }
            FunctionSpec::Sum(terms) => terms.iter().map(|(w, s)| w * s.eval(t)).sum(),
        }
    }

    /// Number of Weierstrass terms kept on a grid of step `h`.
    pub fn nyquist_terms(b: u32, terms: usize, h: f64) -> usize {
        let mut bn = 1.0;
        for n in 0..terms {
            if bn * h > 1.0 + 1e-12 {
                return n;
            }
            bn *= b as f64;
        }
        terms
    }

    /// Copy with Weierstrass terms above the Nyquist frequency of step `h`
    /// removed.
    pub fn band_limited(&self, h: f64) -> FunctionSpec {
        match self {
            FunctionSpec::Weierstrass { a, b, terms } => {
                FunctionSpec::Weierstrass { a: *a, b: *b, terms: Self::nyquist_terms(*b, *terms, h) }
            }
            FunctionSpec::Piecewise(pieces) => FunctionSpec::Piecewise(
                pieces.iter().map(|p| Piece { lo: p.lo, hi: p.hi, spec: p.spec.band_limited(h) }).collect(),
            ),
            FunctionSpec::Sum(terms) => FunctionSpec::Sum(terms.iter().map(|(w, s)| (*w, s.band_limited(h))).collect()),
            other => other.clone(),
        }
    }

    /// Closed-form Hölder exponent where one is known.
    /// True when some part is a Weierstrass sum or a power of order at most
    /// one: the sampled function is then not meaningfully differentiable
    /// at grid scale, whatever its truncation.
    pub fn is_rough(&self) -> bool {
        match self {
            FunctionSpec::Weierstrass { .. } => true,
            FunctionSpec::AbsPow { exponent, .. } => *exponent <= 1.0,
            FunctionSpec::Piecewise(pieces) => pieces.iter().any(|p| p.spec.is_rough()),
            FunctionSpec::Sum(terms) => terms.iter().any(|(_, s)| s.is_rough()),
            FunctionSpec::Poly(_) | FunctionSpec::Trig { .. } => false,
        }
    }

    pub fn holder_exponent(&self) -> Option<f64> {
        match self {
            FunctionSpec::Weierstrass { a, b, .. } => Some(a.ln() / (1.0 / *b as f64).ln()),
            FunctionSpec::AbsPow { exponent, .. } => Some(exponent.min(1.0)),
            FunctionSpec::Poly(_) | FunctionSpec::Trig { .. } => Some(1.0),
            _ => None,
        }
    }

    fn derivative(&self, knots: &mut Vec<f64>) -> FunctionSpec {
        match self {
            FunctionSpec::Poly(c) if c.len() <= 1 => FunctionSpec::constant(0.0),
            FunctionSpec::Poly(c) => FunctionSpec::Poly(c.iter().enumerate().skip(1).map(|(k, v)| k as f64 * v).collect()),
            FunctionSpec::Trig { kind, frequency, phase } => {
                let (kind, w) = match kind {
                    TrigKind::Sin => (TrigKind::Cos, *frequency),
                    TrigKind::Cos => (TrigKind::Sin, -*frequency),
                };
                FunctionSpec::Sum(vec![(w, FunctionSpec::Trig { kind, frequency: *frequency, phase: *phase })])
            }
            FunctionSpec::Weierstrass { a, b, terms } => {
                let (mut an, mut bn) = (1.0, 1.0);
                let mut out = Vec::with_capacity(*terms);
                for _ in 0..*terms {
                    out.push((-an * bn * PI, FunctionSpec::sin(bn * PI, 0.0)));
                    an *= a;
                    bn *= *b as f64;
                }
                FunctionSpec::Sum(out)
            }
            FunctionSpec::AbsPow { center, exponent, signed } => {
                if *exponent <= 1.0 {
                    knots.push(*center);
                }
                let inner = FunctionSpec::AbsPow { center: *center, exponent: exponent - 1.0, signed: !signed };
                FunctionSpec::Sum(vec![(*exponent, inner)])
            }
            FunctionSpec::Piecewise(pieces) => {
                for (i, p) in pieces.iter().enumerate() {
                    if i > 0 {
                        knots.push(p.lo);
                    }
                    let mut inner = Vec::new();
                    p.spec.derivative(&mut inner);
                    knots.extend(inner.into_iter().filter(|k| p.lo <= *k && *k <= p.hi));
                }
                FunctionSpec::Piecewise(
                    pieces
                        .iter()
                        .map(|p| Piece { lo: p.lo, hi: p.hi, spec: p.spec.derivative(&mut Vec::new()) })
                        .collect(),
                )
            }
            FunctionSpec::Sum(terms) => {
                FunctionSpec::Sum(terms.iter().map(|(w, s)| (*w, s.derivative(knots))).collect())
            }
        }
    }
}
