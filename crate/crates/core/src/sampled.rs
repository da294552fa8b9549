//! Complex vector-valued functions tabulated on a uniform grid.

use std::fmt::Write as _;

use num_complex::Complex64;

/// Tolerance, in units of the grid step, for deciding that a time lies on
/// the grid.
pub const GRID_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("grid step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("interval [{a}, {b}] is not an integer number of steps of {h}")]
    NonIntegralGrid { a: f64, b: f64, h: f64 },
    #[error("time {t} is not a grid node")]
    OffGrid { t: f64 },
    #[error("time {t} lies outside [{a}, {b}]")]
    OutOfDomain { t: f64, a: f64, b: f64 },
    #[error("value buffer of length {len} does not hold whole {dim}-vectors")]
    Ragged { len: usize, dim: usize },
    #[error("non-finite sample at node {index}")]
    NonFinite { index: usize },
    #[error("grids do not match")]
    Mismatch,
    #[error("malformed CSV at line {line}: {message}")]
    Csv { line: usize, message: String },
}

/// Number of steps of size `h` spanning `[a, b]`, if integral.
pub fn steps_between(a: f64, b: f64, h: f64) -> Result<usize, GridError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(GridError::BadStep(h));
    }
    let ratio = (b - a) / h;
    let n = ratio.round();
    if n < 0.0 || (ratio - n).abs() > GRID_TOL * n.max(1.0) {
        return Err(GridError::NonIntegralGrid { a, b, h });
    }
    Ok(n as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    start: f64,
    step: f64,
    dim: usize,
    values: Vec<Complex64>,
}

impl SampledFunction {
    /// `values` holds `dim` components per node, node-major.
    pub fn new(start: f64, step: f64, dim: usize, values: Vec<Complex64>) -> Result<Self, GridError> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(GridError::BadStep(step));
        }
        if dim == 0 || values.is_empty() || values.len() % dim != 0 {
            return Err(GridError::Ragged { len: values.len(), dim });
        }
        if let Some(i) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(GridError::NonFinite { index: i / dim });
        }
        Ok(SampledFunction { start, step, dim, values })
    }

    /// Like [`SampledFunction::new`] but allows non-finite samples, for
    /// deliberately poisoned inputs.
    pub fn new_unchecked(start: f64, step: f64, dim: usize, values: Vec<Complex64>) -> Self {
        assert!(dim > 0 && values.len() % dim == 0);
        SampledFunction { start, step, dim, values }
    }

    /// Samples `f` at the nodes of `[a, b]` with step `h`. `f` writes the
    /// `dim` components for time `t` into the provided slice.
    pub fn from_fn(
        a: f64,
        b: f64,
        h: f64,
        dim: usize,
        mut f: impl FnMut(f64, &mut [Complex64]),
    ) -> Result<Self, GridError> {
        let n = steps_between(a, b, h)?;
        let mut values = vec![Complex64::new(0.0, 0.0); (n + 1) * dim];
        for (i, chunk) in values.chunks_mut(dim).enumerate() {
            f(a + i as f64 * h, chunk);
        }
        SampledFunction::new(a, h, dim, values)
    }

    /// Scalar real function sampled on `[a, b]`.
    pub fn from_real_fn(a: f64, b: f64, h: f64, f: impl Fn(f64) -> f64) -> Result<Self, GridError> {
        Self::from_fn(a, b, h, 1, |t, out| out[0] = Complex64::new(f(t), 0.0))
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    pub fn point(&self, i: usize) -> &[Complex64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn point_mut(&mut self, i: usize) -> &mut [Complex64] {
        &mut self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Signed node offset of `t` relative to `start`, if `t` is on the grid
    /// (possibly outside the sampled range).
    pub fn grid_offset(&self, t: f64) -> Option<i64> {
        let x = (t - self.start) / self.step;
        let n = x.round();
        ((x - n).abs() <= GRID_TOL * n.abs().max(1.0)).then_some(n as i64)
    }

    /// Node index of `t`.
    pub fn index_of(&self, t: f64) -> Result<usize, GridError> {
        let offset = self.grid_offset(t).ok_or(GridError::OffGrid { t })?;
        if offset < 0 || offset as usize >= self.len() {
            return Err(GridError::OutOfDomain { t, a: self.start, b: self.end() });
        }
        Ok(offset as usize)
    }

    /// Samples at `t`, or `None` when `t` is outside the sampled range.
    /// Panics if `t` is off the grid.
    pub fn at(&self, t: f64) -> Option<&[Complex64]> {
        let offset = self
            .grid_offset(t)
            .unwrap_or_else(|| panic!("time {t} is not a node of the grid"));
        (offset >= 0 && (offset as usize) < self.len()).then(|| self.point(offset as usize))
    }

    /// True when both functions share step and node alignment.
    pub fn aligned_with(&self, other: &SampledFunction) -> bool {
        (self.step - other.step).abs() <= GRID_TOL * self.step * 1e-3
            && self.grid_offset(other.start).is_some()
    }

    /// Nodes `lo..=hi` as a new function.
    pub fn slice(&self, lo: usize, hi: usize) -> SampledFunction {
        SampledFunction {
            start: self.time(lo),
            step: self.step,
            dim: self.dim,
            values: self.values[lo * self.dim..(hi + 1) * self.dim].to_vec(),
        }
    }

    /// The nodes at or before `t` (a copy of everything if none lie after).
    pub fn up_to(&self, t: f64) -> SampledFunction {
        let last = ((t - self.start) / self.step + 1e-6).floor();
        if last >= (self.len() - 1) as f64 {
            return self.clone();
        }
        self.slice(0, last.max(0.0) as usize)
    }

    /// Restriction to `[a, b]`, which must be on the grid and inside the
    /// sampled range.
    pub fn restrict(&self, a: f64, b: f64) -> Result<SampledFunction, GridError> {
        Ok(self.slice(self.index_of(a)?, self.index_of(b)?))
    }

    pub fn component(&self, c: usize) -> Vec<Complex64> {
        self.values.iter().skip(c).step_by(self.dim).copied().collect()
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> SampledFunction {
        SampledFunction { values: self.values.iter().map(|&v| f(v)).collect(), ..self.clone() }
    }

    /// Pointwise `a*self + b*other` on identical grids.
    pub fn combine(&self, other: &SampledFunction, a: Complex64, b: Complex64) -> Result<SampledFunction, GridError> {
        if self.len() != other.len() || self.dim != other.dim || !self.aligned_with(other) || self.grid_offset(other.start) != Some(0) {
            return Err(GridError::Mismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(SampledFunction { values, ..self.clone() })
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Writes the CSV form: header `t,re_0,im_0,...`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for c in 0..self.dim {
            write!(out, ",re_{c},im_{c}").unwrap();
        }
        out.push('\n');
        for i in 0..self.len() {
            write!(out, "{:.16e}", self.time(i)).unwrap();
            for v in self.point(i) {
                write!(out, ",{:.16e},{:.16e}", v.re, v.im).unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Reads the CSV form; blank lines and lines starting with `#` are skipped.
    pub fn from_csv(text: &str) -> Result<SampledFunction, GridError> {
        let csv_err = |line: usize, message: String| GridError::Csv { line, message };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        let (_, header) = lines.next().ok_or_else(|| csv_err(1, "empty input".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.first() != Some(&"t") || cols.len() < 3 || cols.len() % 2 == 0 {
            return Err(csv_err(1, "header must be t,re_0,im_0,...".into()));
        }
        let dim = (cols.len() - 1) / 2;
        for c in 0..dim {
            if cols[1 + 2 * c] != format!("re_{c}") || cols[2 + 2 * c] != format!("im_{c}") {
                return Err(csv_err(1, format!("unexpected column names for component {c}")));
            }
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (n, line) in lines {
            let fields: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| csv_err(n + 1, e.to_string()))?;
            if fields.len() != cols.len() {
                return Err(csv_err(n + 1, format!("expected {} fields", cols.len())));
            }
            times.push(fields[0]);
            values.extend(fields[1..].chunks(2).map(|p| Complex64::new(p[0], p[1])));
        }
        if times.len() < 2 {
            return Err(csv_err(2, "need at least two rows".into()));
        }
        let start = times[0];
        let step = (times[times.len() - 1] - start) / (times.len() - 1) as f64;
        for (i, t) in times.iter().enumerate() {
            if ((t - start) / step - i as f64).abs() > GRID_TOL * (i as f64).max(1.0) {
                return Err(csv_err(i + 2, "non-uniform grid".into()));
            }
        }
        SampledFunction::new(start, step, dim, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_bookkeeping() {
        let f = SampledFunction::from_real_fn(0.0, 1.0, 0.5, |t| t * t).unwrap();
        assert_eq!(f.len(), 3);
        assert_eq!(f.component(0), vec![0.0, 0.25, 1.0].into_iter().map(|x| Complex64::new(x, 0.0)).collect::<Vec<_>>());
        assert_eq!(f.index_of(0.5).unwrap(), 1);
        assert!(matches!(f.index_of(0.3), Err(GridError::OffGrid { .. })));
        assert!(matches!(f.index_of(1.5), Err(GridError::OutOfDomain { .. })));
        assert!(matches!(
            SampledFunction::from_real_fn(0.0, 1.0, 0.3, |t| t),
            Err(GridError::NonIntegralGrid { .. })
        ));
    }

    #[test]
    fn rejects_non_finite() {
        let v = vec![Complex64::new(0.0, 0.0), Complex64::new(f64::NAN, 0.0)];
        assert_eq!(SampledFunction::new(0.0, 1.0, 1, v), Err(GridError::NonFinite { index: 1 }));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let f = SampledFunction::from_fn(-0.3, 0.7, 0.1, 2, |t, out| {
            out[0] = Complex64::new(t.sin(), t.cos() / 3.0);
            out[1] = Complex64::new(std::f64::consts::PI * t, -1e-300);
        })
        .unwrap();
        let text = f.to_csv();
        assert!(text.starts_with("t,re_0,im_0,re_1,im_1\n"));
        let back = SampledFunction::from_csv(&text).unwrap();
        assert_eq!(back.values(), f.values());
        assert_eq!(back.len(), f.len());
        assert!((back.step() - f.step()).abs() < 1e-15);
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(SampledFunction::from_csv("x,re_0,im_0\n0,1,2\n1,1,1\n"), Err(GridError::Csv { line: 1, .. })));
        assert!(matches!(SampledFunction::from_csv("t,re_0,im_0\n0,1,2\n1,1\n"), Err(GridError::Csv { line: 3, .. })));
        assert!(matches!(SampledFunction::from_csv("t,re_0,im_0\n0,1,2\n1,1,1\n3,0,0\n"), Err(GridError::Csv { .. })));
        let f = SampledFunction::from_csv("# note\nt,re_0,im_0\n# mid\n0,1,2\n1,1,1\n").unwrap();
        assert_eq!(f.len(), 2);
    }
}
