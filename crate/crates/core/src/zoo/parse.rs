//! Textual form of [`FunctionSpec`].
//!
//! ```text
//! spec   := poly(num, ...)            Σ cₖ tᵏ, lowest degree first
//!         | const(num)
//!         | sin(num [, num])          sin(ω t + φ)
//!         | cos(num [, num])
//!         | weierstrass(num, num [, num])   a, b, terms (default 25)
//!         | abspow(num, num)          |t − c|^p
//!         | sgnpow(num, num)          sgn(t − c)|t − c|^p
//!         | piecewise(piece, ...)     piece := [num, num]: spec
//!         | sum(term, ...)            term := [num *] spec
//! num    := [-] factor {(* | /) factor}
//! factor := decimal literal | pi
//! ```

use std::fmt;

use super::{make_weierstrass, FunctionError, FunctionSpec, Piece, TrigKind};

const DEFAULT_WEIERSTRASS_TERMS: usize = 25;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Sym(char),
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, FunctionError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(text[start..i].to_ascii_lowercase())));
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let v = text[start..i].parse::<f64>().map_err(|_| FunctionError::Syntax {
                position: start,
                message: format!("bad number '{}'", &text[start..i]),
            })?;
            out.push((start, Tok::Num(v)));
        } else if "()[],:*/-".contains(c) {
            out.push((i, Tok::Sym(c)));
            i += 1;
        } else {
            return Err(FunctionError::Syntax { position: i, message: format!("unexpected character '{c}'") });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|(_, t)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, FunctionError> {
        Err(FunctionError::Syntax { position: self.here(), message: message.into() })
    }

    fn expect(&mut self, c: char) -> Result<(), FunctionError> {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            Ok(())
        } else {
            self.error(format!("expected '{c}'"))
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn starts_factor(tok: Option<&Tok>) -> bool {
        matches!(tok, Some(Tok::Num(_))) || matches!(tok, Some(Tok::Ident(s)) if s == "pi")
    }

    fn factor(&mut self) -> Result<f64, FunctionError> {
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(v)
            }
            Some(Tok::Ident(s)) if s == "pi" => {
                self.pos += 1;
                Ok(std::f64::consts::PI)
            }
            _ => self.error("expected a number"),
        }
    }

    fn number(&mut self) -> Result<f64, FunctionError> {
        let negative = self.eat('-');
        let mut v = self.factor()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Sym(c @ ('*' | '/'))) => *c,
                _ => break,
            };
            // `2 * sin(...)` inside a sum: the star belongs to the term
            if !Self::starts_factor(self.peek_at(1)) {
                break;
            }
            self.pos += 1;
            let rhs = self.factor()?;
            v = if op == '*' { v * rhs } else { v / rhs };
        }
        Ok(if negative { -v } else { v })
    }

    fn numbers(&mut self) -> Result<Vec<f64>, FunctionError> {
        let mut out = vec![self.number()?];
        while self.eat(',') {
            out.push(self.number()?);
        }
        Ok(out)
    }

    fn spec(&mut self) -> Result<FunctionSpec, FunctionError> {
        let start = self.here();
        let name = match self.peek().cloned() {
            Some(Tok::Ident(s)) => s,
            _ => return self.error("expected a function name"),
        };
        self.pos += 1;
        self.expect('(')?;
        let arity = |n: usize, lo: usize, hi: usize| -> Result<(), FunctionError> {
            if n < lo || n > hi {
                Err(FunctionError::Syntax {
                    position: start,
                    message: format!("{name} takes {lo}..={hi} arguments, got {n}"),
                })
            } else {
                Ok(())
            }
        };
        let spec = match name.as_str() {
            "poly" => FunctionSpec::Poly(self.numbers()?),
            "const" => {
                let v = self.numbers()?;
                arity(v.len(), 1, 1)?;
                FunctionSpec::constant(v[0])
            }
            "sin" | "cos" => {
                let v = self.numbers()?;
                arity(v.len(), 1, 2)?;
                let kind = if name == "sin" { TrigKind::Sin } else { TrigKind::Cos };
                FunctionSpec::Trig { kind, frequency: v[0], phase: v.get(1).copied().unwrap_or(0.0) }
            }
            "weierstrass" => {
                let v = self.numbers()?;
                arity(v.len(), 2, 3)?;
                let b = v[1];
                let terms = v.get(2).copied().unwrap_or(DEFAULT_WEIERSTRASS_TERMS as f64);
                if b.fract() != 0.0 || b < 0.0 || terms.fract() != 0.0 || terms < 0.0 {
                    return Err(FunctionError::Weierstrass("b and terms must be integers".into()));
                }
                make_weierstrass(v[0], b as u32, terms as usize)?
            }
            "abspow" | "sgnpow" => {
                let v = self.numbers()?;
                arity(v.len(), 2, 2)?;
                let base = FunctionSpec::abspow(v[0], v[1])?;
                match base {
                    FunctionSpec::AbsPow { center, exponent, .. } => {
                        FunctionSpec::AbsPow { center, exponent, signed: name == "sgnpow" }
                    }
                    _ => unreachable!(),
                }
            }
            "piecewise" => {
                let mut pieces = vec![self.piece()?];
                while self.eat(',') {
                    pieces.push(self.piece()?);
                }
                FunctionSpec::piecewise(pieces)?
            }
            "sum" => {
                let mut terms = vec![self.term()?];
                while self.eat(',') {
                    terms.push(self.term()?);
                }
                FunctionSpec::Sum(terms)
            }
            _ => {
                return Err(FunctionError::Syntax { position: start, message: format!("unknown function '{name}'") })
            }
        };
        self.expect(')')?;
        Ok(spec)
    }

    fn piece(&mut self) -> Result<Piece, FunctionError> {
        self.expect('[')?;
        let lo = self.number()?;
        self.expect(',')?;
        let hi = self.number()?;
        self.expect(']')?;
        self.expect(':')?;
        Ok(Piece { lo, hi, spec: self.spec()? })
    }

    fn term(&mut self) -> Result<(f64, FunctionSpec), FunctionError> {
        if Self::starts_factor(self.peek()) || self.peek() == Some(&Tok::Sym('-')) {
            let w = self.number()?;
            self.expect('*')?;
            Ok((w, self.spec()?))
        } else {
            Ok((1.0, self.spec()?))
        }
    }
}

pub fn parse_function(text: &str) -> Result<FunctionSpec, FunctionError> {
    let mut p = Parser { toks: lex(text)?, pos: 0, end: text.len() };
    let spec = p.spec()?;
    if p.pos != p.toks.len() {
        return p.error("trailing input");
    }
    Ok(spec)
}

struct List<'a, T>(&'a [T]);

impl<T: fmt::Debug> fmt::Display for List<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v:?}")?;
        }
        Ok(())
    }
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionSpec::Poly(c) => write!(f, "poly({})", List(c)),
            FunctionSpec::Trig { kind, frequency, phase } => {
                let name = match kind {
                    TrigKind::Sin => "sin",
                    TrigKind::Cos => "cos",
                };
                write!(f, "{name}({frequency:?}, {phase:?})")
            }
            FunctionSpec::Weierstrass { a, b, terms } => write!(f, "weierstrass({a:?}, {b}, {terms})"),
            FunctionSpec::AbsPow { center, exponent, signed } => {
                let name = if *signed { "sgnpow" } else { "abspow" };
                write!(f, "{name}({center:?}, {exponent:?})")
            }
            FunctionSpec::Piecewise(pieces) => {
                f.write_str("piecewise(")?;
                for (i, p) in pieces.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "[{:?}, {:?}]: {}", p.lo, p.hi, p.spec)?;
                }
                f.write_str(")")
            }
            FunctionSpec::Sum(terms) => {
                f.write_str("sum(")?;
                for (i, (w, s)) in terms.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{w:?} * {s}")?;
                }
                f.write_str(")")
            }
        }
    }
}
