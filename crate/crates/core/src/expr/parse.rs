use num_complex::Complex64;

use super::{Dims, Expr, ExprError, Func, Var, VarClass};

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Sym(char),
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokenize(text: &'a str) -> Result<Vec<(Token, usize)>, ExprError> {
        let mut lx = Lexer { src: text.as_bytes(), pos: 0 };
        let mut out = Vec::new();
        while let Some(tok) = lx.next_token()? {
            out.push(tok);
        }
        Ok(out)
    }

    fn next_token(&mut self) -> Result<Option<(Token, usize)>, ExprError> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let Some(&c) = self.src.get(self.pos) else {
            return Ok(None);
        };
        let start = self.pos;
        if c.is_ascii_digit() || c == b'.' {
            return self.number(start).map(Some);
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while self.pos < self.src.len()
                && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
            {
                self.pos += 1;
            }
            let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string();
            return Ok(Some((Token::Ident(name), start)));
        }
        if b"+-*/^()[],".contains(&c) {
            self.pos += 1;
            return Ok(Some((Token::Sym(c as char), start)));
        }
        Err(ExprError::Syntax {
            position: start,
            message: format!("unexpected character `{}`", c as char),
        })
    }

    fn number(&mut self, start: usize) -> Result<(Token, usize), ExprError> {
        let src = self.src;
        let mut end = start;
        while end < src.len() && (src[end].is_ascii_digit() || src[end] == b'.') {
            end += 1;
        }
        if end < src.len() && (src[end] == b'e' || src[end] == b'E') {
            let mut exp_end = end + 1;
            if exp_end < src.len() && (src[exp_end] == b'+' || src[exp_end] == b'-') {
                exp_end += 1;
            }
            let digits_start = exp_end;
            while exp_end < src.len() && src[exp_end].is_ascii_digit() {
                exp_end += 1;
            }
            if exp_end > digits_start {
                end = exp_end;
            }
        }
        let text = std::str::from_utf8(&src[start..end]).unwrap();
        let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
            position: start,
            message: format!("malformed number `{text}`"),
        })?;
        self.pos = end;
        Ok((Token::Number(value), start))
    }
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    next: usize,
    end: usize,
    dims: Dims,
}

/// Parses `text` into an [`Expr`], validating variable names and indices
/// against `dims`.
///
/// Grammar (lowest to highest precedence):
///
/// ```text
/// expr   := term (('+' | '-') term)*
/// term   := unary (('*' | '/') unary)*
/// unary  := '-' unary | power
/// power  := atom ('^' ['-'] integer)?
/// atom   := number | 't' | class '[' integer ']' | func '(' expr ')'
///         | 'complex' '(' ['-'] number ',' ['-'] number ')' | '(' expr ')'
/// ```
pub fn parse_expression(text: &str, dims: Dims) -> Result<Expr, ExprError> {
    let tokens = Lexer::tokenize(text)?;
    let mut parser = Parser { tokens, next: 0, end: text.len(), dims };
    let e = parser.expr()?;
    if let Some((tok, pos)) = parser.peek_full() {
        return Err(ExprError::Syntax {
            position: pos,
            message: format!("unexpected trailing token {tok:?}"),
        });
    }
    Ok(e)
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.next).map(|(t, _)| t)
    }

    fn peek_full(&self) -> Option<(Token, usize)> {
        self.tokens.get(self.next).cloned()
    }

    fn position(&self) -> usize {
        self.tokens.get(self.next).map_or(self.end, |(_, p)| *p)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.next).map(|(t, _)| t.clone());
        self.next += 1;
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax {
            position: self.position(),
            message: message.into(),
        })
    }

    fn expect(&mut self, c: char) -> Result<(), ExprError> {
        match self.peek() {
            Some(Token::Sym(s)) if *s == c => {
                self.next += 1;
                Ok(())
            }
            _ => self.error(format!("expected `{c}`")),
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if matches!(self.peek(), Some(Token::Sym(s)) if *s == c) {
            self.next += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if !self.eat('^') {
            return Ok(base);
        }
        let negative = self.eat('-');
        let exponent = self.integer("integer exponent")?;
        let exponent = i32::try_from(exponent).map_err(|_| ExprError::Syntax {
            position: self.position(),
            message: "exponent too large".into(),
        })?;
        Ok(Expr::Pow(Box::new(base), if negative { -exponent } else { exponent }))
    }

    fn integer(&mut self, what: &str) -> Result<usize, ExprError> {
        let pos = self.position();
        match self.bump() {
            Some(Token::Number(v)) if v.fract() == 0.0 && v >= 0.0 && v < u32::MAX as f64 => {
                Ok(v as usize)
            }
            _ => Err(ExprError::Syntax {
                position: pos,
                message: format!("expected {what}"),
            }),
        }
    }

    fn signed_number(&mut self) -> Result<f64, ExprError> {
        let negative = self.eat('-');
        match self.bump() {
            Some(Token::Number(v)) => Ok(if negative { -v } else { v }),
            _ => {
                self.next -= 1;
                self.error("expected number")
            }
        }
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let pos = self.position();
        match self.bump() {
            Some(Token::Number(v)) => Ok(Expr::Const(Complex64::new(v, 0.0))),
            Some(Token::Sym('(')) => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(Token::Ident(name)) => self.ident(name, pos),
            Some(tok) => Err(ExprError::Syntax {
                position: pos,
                message: format!("unexpected token {tok:?}"),
            }),
            None => Err(ExprError::Syntax {
                position: pos,
                message: "unexpected end of input".into(),
            }),
        }
    }

    fn ident(&mut self, name: String, pos: usize) -> Result<Expr, ExprError> {
        if name == "complex" {
            self.expect('(')?;
            let re = self.signed_number()?;
            self.expect(',')?;
            let im = self.signed_number()?;
            self.expect(')')?;
            return Ok(Expr::Const(Complex64::new(re, im)));
        }
        if let Some(func) = Func::from_name(&name) {
            self.expect('(')?;
            let arg = self.expr()?;
            self.expect(')')?;
            return Ok(Expr::Call(func, Box::new(arg)));
        }
        let Some(class) = VarClass::from_name(&name) else {
            return Err(ExprError::UnknownVariable { name, position: pos });
        };
        if class == VarClass::T {
            return Ok(Expr::Var(Var::time()));
        }
        self.expect('[')?;
        let index = self.integer("component index")?;
        self.expect(']')?;
        let dim = class.dimension(self.dims);
        if index >= dim {
            return Err(ExprError::IndexOutOfRange {
                class: class.name(),
                index,
                dim,
            });
        }
        Ok(Expr::Var(Var::new(class, index)))
    }
}
