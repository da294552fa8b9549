//! TOML problem files for the variational and control checkers.
//!
//! ```toml
//! lagrangian = "0.5*qdot[0]^2 - 0.5*qtau[0]^2"
//! tau = 0.5
//! t1 = 0.0
//! t2 = 2.0
//! history = "const(1)"      # or one FunctionSpec per component
//! q2 = [0.0]                # or a bare number when d = 1
//! h = 0.005
//! # optional: d, epsilon0, ratio, levels
//! # control problems add: phi = ["u[0]"], m = 1
//! ```
//!
//! Every diagnostic names the key it is about.

use toml::{Table, Value};

use crate::control::ControlProblem;
use crate::delay::DelayProblem;
use crate::expr::{parse_expression, Dims, Expr, VarClass};
use crate::sampled::steps_between;
use crate::scale::EpsilonSchedule;
use crate::zoo::{parse_function, FunctionSpec};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProblemFileError {
    #[error("malformed problem file: {0}")]
    Syntax(String),
    #[error("missing key `{0}`")]
    Missing(&'static str),
    #[error("key `{key}`: {message}")]
    Invalid { key: String, message: String },
}

impl ProblemFileError {
    /// The key the diagnostic is about, if any.
    pub fn key(&self) -> Option<&str> {
        match self {
            ProblemFileError::Syntax(_) => None,
            ProblemFileError::Missing(k) => Some(k),
            ProblemFileError::Invalid { key, .. } => Some(key),
        }
    }
}

fn invalid(key: &str, message: impl Into<String>) -> ProblemFileError {
    ProblemFileError::Invalid { key: key.to_string(), message: message.into() }
}

const KNOWN_KEYS: [&str; 13] =
    ["lagrangian", "tau", "t1", "t2", "history", "q2", "d", "h", "epsilon0", "ratio", "levels", "phi", "m"];

/// The `phi`/`m` part of a control problem file.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPart {
    pub phi: Vec<Expr>,
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemFile {
    pub lagrangian: Expr,
    pub tau: f64,
    pub t1: f64,
    pub t2: f64,
    pub history: Vec<FunctionSpec>,
    pub q2: Vec<f64>,
    pub h: Option<f64>,
    pub epsilon0: Option<f64>,
    pub ratio: Option<f64>,
    pub levels: Option<usize>,
    pub control: Option<ControlPart>,
}

fn number(t: &Table, key: &'static str) -> Result<Option<f64>, ProblemFileError> {
    match t.get(key) {
        None => Ok(None),
        Some(Value::Float(x)) if x.is_finite() => Ok(Some(*x)),
        Some(Value::Integer(n)) => Ok(Some(*n as f64)),
        Some(_) => Err(invalid(key, "expected a finite number")),
    }
}

fn required(t: &Table, key: &'static str) -> Result<f64, ProblemFileError> {
    number(t, key)?.ok_or(ProblemFileError::Missing(key))
}

fn count(t: &Table, key: &'static str) -> Result<Option<usize>, ProblemFileError> {
    match t.get(key) {
        None => Ok(None),
        Some(Value::Integer(n)) if *n > 0 => Ok(Some(*n as usize)),
        Some(_) => Err(invalid(key, "expected a positive integer")),
    }
}

/// A string or an array of strings.
fn strings(t: &Table, key: &'static str) -> Result<Option<Vec<String>>, ProblemFileError> {
    match t.get(key) {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(vec![s.clone()])),
        Some(Value::Array(a)) if !a.is_empty() => a
            .iter()
            .map(|v| v.as_str().map(str::to_string).ok_or_else(|| invalid(key, "expected strings")))
            .collect::<Result<Vec<_>, _>>()
            .map(Some),
        Some(_) => Err(invalid(key, "expected a string or a non-empty array of strings")),
    }
}

fn numbers(t: &Table, key: &'static str) -> Result<Vec<f64>, ProblemFileError> {
    let scalar = |v: &Value| match v {
        Value::Float(x) if x.is_finite() => Some(*x),
        Value::Integer(n) => Some(*n as f64),
        _ => None,
    };
    match t.get(key) {
        None => Err(ProblemFileError::Missing(key)),
        Some(Value::Array(a)) if !a.is_empty() => {
            a.iter().map(|v| scalar(v).ok_or_else(|| invalid(key, "expected numbers"))).collect()
        }
        Some(v) => scalar(v).map(|x| vec![x]).ok_or_else(|| invalid(key, "expected a number or an array of numbers")),
    }
}

fn is_multiple(x: f64, h: f64) -> bool {
    steps_between(0.0, x, h).is_ok()
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self, ProblemFileError> {
        let t: Table = text.parse().map_err(|e: toml::de::Error| ProblemFileError::Syntax(e.message().to_string()))?;
        if let Some(k) = t.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(invalid(k, "unknown key"));
        }

        let tau = required(&t, "tau")?;
        let t1 = required(&t, "t1")?;
        let t2 = required(&t, "t2")?;
        if tau <= 0.0 {
            return Err(invalid("tau", "must be positive"));
        }
        if t2 <= t1 {
            return Err(invalid("t2", "must exceed t1"));
        }
        if tau >= t2 - t1 {
            return Err(invalid("tau", "must be smaller than t2 - t1"));
        }

        let history_src = strings(&t, "history")?.ok_or(ProblemFileError::Missing("history"))?;
        let mut q2 = numbers(&t, "q2")?;
        let d = count(&t, "d")?.unwrap_or(history_src.len().max(q2.len()));
        let mut history = history_src
            .iter()
            .map(|s| parse_function(s).map_err(|e| invalid("history", e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        match history.len() {
            n if n == d => {}
            1 => history = vec![history[0].clone(); d],
            n => return Err(invalid("history", format!("{n} components for d = {d}"))),
        }
        match q2.len() {
            n if n == d => {}
            1 => q2 = vec![q2[0]; d],
            n => return Err(invalid("q2", format!("{n} components for d = {d}"))),
        }

        let control = match (strings(&t, "phi")?, count(&t, "m")?) {
            (None, None) => None,
            (None, Some(_)) => return Err(ProblemFileError::Missing("phi")),
            (Some(src), m) => {
                let m = m.unwrap_or(d);
                if src.len() != d {
                    return Err(invalid("phi", format!("{} components for d = {d}", src.len())));
                }
                let phi = src
                    .iter()
                    .map(|s| parse_expression(s, Dims::new(d, m)).map_err(|e| invalid("phi", e.to_string())))
                    .collect::<Result<Vec<_>, _>>()?;
                Some(ControlPart { phi, m })
            }
        };

        let dims = Dims::new(d, control.as_ref().map_or(0, |c| c.m));
        let source = t
            .get("lagrangian")
            .ok_or(ProblemFileError::Missing("lagrangian"))?
            .as_str()
            .ok_or_else(|| invalid("lagrangian", "expected a string"))?;
        let lagrangian = parse_expression(source, dims).map_err(|e| invalid("lagrangian", e.to_string()))?;
        let allowed: &[VarClass] = if control.is_some() {
            &[VarClass::T, VarClass::Q, VarClass::QTau, VarClass::U, VarClass::UTau]
        } else {
            &[VarClass::T, VarClass::Q, VarClass::QDot, VarClass::QTau, VarClass::QDotTau]
        };
        let phi = control.iter().flat_map(|c| c.phi.iter().map(|e| ("phi", e)));
        for (key, e) in phi.chain(std::iter::once(("lagrangian", &lagrangian))) {
            if let Some(v) = e.variables().into_iter().find(|v| !allowed.contains(&v.class)) {
                return Err(invalid(key, format!("{} is not allowed here", v.class.name())));
            }
        }

        let file = ProblemFile {
            lagrangian,
            tau,
            t1,
            t2,
            history,
            q2,
            h: number(&t, "h")?,
            epsilon0: number(&t, "epsilon0")?,
            ratio: number(&t, "ratio")?,
            levels: count(&t, "levels")?,
            control,
        };
        if let Some(h) = file.h {
            file.check_step(h)?;
        }
        Ok(file)
    }

    pub fn dim(&self) -> usize {
        self.history.len()
    }

    /// The grid step: `h_override` if given, else the file's `h`.
    pub fn step(&self, h_override: Option<f64>) -> Result<f64, ProblemFileError> {
        let h = h_override.or(self.h).ok_or(ProblemFileError::Missing("h"))?;
        self.check_step(h)?;
        Ok(h)
    }

    fn check_step(&self, h: f64) -> Result<(), ProblemFileError> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid("h", "must be positive"));
        }
        if !is_multiple(self.tau, h) {
            return Err(invalid("tau", format!("not an integer multiple of h = {h}")));
        }
        if !is_multiple(self.t2 - self.t1, h) {
            return Err(invalid("t2", format!("t2 - t1 is not an integer multiple of h = {h}")));
        }
        Ok(())
    }

    /// ε-schedule on step `h`; each argument overrides the file value, and
    /// missing values default to `ε₀ = 16h`, `r = 1/2`, 5 levels.
    pub fn schedule(
        &self,
        h: f64,
        eps0: Option<f64>,
        ratio: Option<f64>,
        levels: Option<usize>,
    ) -> Result<EpsilonSchedule, ProblemFileError> {
        let eps0 = eps0.or(self.epsilon0).unwrap_or(16.0 * h);
        let ratio = ratio.or(self.ratio).unwrap_or(0.5);
        let levels = levels.or(self.levels).unwrap_or(5);
        if !is_multiple(eps0, h) {
            return Err(invalid("epsilon0", format!("not an integer multiple of h = {h}")));
        }
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(invalid("ratio", "must lie in (0, 1)"));
        }
        if levels < 3 {
            return Err(invalid("levels", "at least 3 are needed"));
        }
        EpsilonSchedule::new(eps0, ratio, levels, h).map_err(|e| {
            let key = if matches!(e, crate::scale::CalculusError::Misaligned { .. }) { "ratio" } else { "epsilon0" };
            invalid(key, e.to_string())
        })
    }

    pub fn delay_problem(&self, h: f64) -> Result<DelayProblem, ProblemFileError> {
        if self.control.is_some() {
            return Err(invalid("phi", "a control problem file was given where a variational one is expected"));
        }
        DelayProblem::new(self.lagrangian.clone(), self.tau, self.t1, self.t2, self.history.clone(), self.q2.clone(), h)
            .map_err(|e| invalid("lagrangian", e.to_string()))
    }

    pub fn control_problem(&self, h: f64) -> Result<ControlProblem, ProblemFileError> {
        let c = self.control.as_ref().ok_or(ProblemFileError::Missing("phi"))?;
        ControlProblem::new(
            self.lagrangian.clone(),
            c.phi.clone(),
            self.tau,
            self.t1,
            self.t2,
            self.history.clone(),
            self.q2.clone(),
            c.m,
            h,
        )
        .map_err(|e| invalid("phi", e.to_string()))
    }
}
