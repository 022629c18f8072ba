//! Recursive-descent parser for complex map expressions.
//!
//! ```text
//! expr     := term (("+" | "-") term)*
//! term     := unary (("*" | "/") unary)*
//! unary    := ("-" | "+") unary | power
//! power    := atom ("^" exponent)?
//! exponent := ("-" | "+")? INTEGER ("^" exponent)?
//! atom     := NUMBER | "z" | "i" | FUNC "(" expr ")" | "(" expr ")"
//! FUNC     := "sqrt" | "log" | "exp"
//! ```

use std::fmt;

use num_complex::Complex;
use thiserror::Error;

use super::{Expr, Func};
use crate::scalar::Real;

/// Syntax error positioned at a byte offset of the source.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at offset {offset}: expected {}, found {found}", .expected.join(" or "))]
pub struct ParseError {
    pub offset: usize,
    pub expected: Vec<String>,
    pub found: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Number(f64),
    Integer(u64, f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Number(x) | Tok::Integer(_, x) => write!(f, "number `{x}`"),
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Plus => write!(f, "`+`"),
            Tok::Minus => write!(f, "`-`"),
            Tok::Star => write!(f, "`*`"),
            Tok::Slash => write!(f, "`/`"),
            Tok::Caret => write!(f, "`^`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::End => write!(f, "end of input"),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let ch = bytes[pos];
        if ch.is_ascii_whitespace() {
            pos += 1;
            continue;
        }
        let start = pos;
        let single = match ch {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = single {
            out.push((tok, start));
            pos += 1;
            continue;
        }
        if ch.is_ascii_digit() || ch == b'.' {
            while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                pos += 1;
            }
            let mut integral = true;
            if pos < bytes.len() && bytes[pos] == b'.' {
                integral = false;
                pos += 1;
                while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                    pos += 1;
                }
            }
            if pos < bytes.len() && (bytes[pos] == b'e' || bytes[pos] == b'E') {
                let mut look = pos + 1;
                if look < bytes.len() && (bytes[look] == b'+' || bytes[look] == b'-') {
                    look += 1;
                }
                if look < bytes.len() && bytes[look].is_ascii_digit() {
                    integral = false;
                    pos = look;
                    while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                        pos += 1;
                    }
                }
            }
            let text = &src[start..pos];
            let value: f64 = text.parse().map_err(|_| ParseError {
                offset: start,
                expected: vec!["number".into()],
                found: format!("`{text}`"),
            })?;
            let tok = match (integral, text.parse::<u64>()) {
                (true, Ok(n)) => Tok::Integer(n, value),
                _ => Tok::Number(value),
            };
            out.push((tok, start));
            continue;
        }
        if ch.is_ascii_alphabetic() || ch == b'_' {
            while pos < bytes.len() && (bytes[pos].is_ascii_alphanumeric() || bytes[pos] == b'_') {
                pos += 1;
            }
            out.push((Tok::Ident(src[start..pos].to_string()), start));
            continue;
        }
        let found = src[start..].chars().next().unwrap_or('?');
        return Err(ParseError {
            offset: start,
            expected: vec!["operator".into(), "operand".into()],
            found: format!("character `{found}`"),
        });
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser<T> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    _scalar: std::marker::PhantomData<T>,
}

const OPERAND: &[&str] = &["number", "`z`", "`i`", "function", "`(`"];

impl<T: Real> Parser<T> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let tok = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        tok
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        ParseError {
            offset: self.offset(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().to_string(),
        }
    }

    fn expr(&mut self) -> Result<Expr<T>, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr<T>, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr<T>, ParseError> {
        match self.peek() {
            Tok::Minus => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Tok::Plus => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr<T>, ParseError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let n = self.exponent()?;
            Ok(Expr::Pow(Box::new(base), n))
        } else {
            Ok(base)
        }
    }

    fn exponent(&mut self) -> Result<i32, ParseError> {
        let start = self.offset();
        let negative = match self.peek() {
            Tok::Minus => {
                self.bump();
                true
            }
            Tok::Plus => {
                self.bump();
                false
            }
            _ => false,
        };
        let base = match self.peek() {
            Tok::Integer(n, _) => {
                let n = *n;
                self.bump();
                n
            }
            _ => return Err(self.error(&["integer exponent"])),
        };
        let overflow = |found: String| ParseError {
            offset: start,
            expected: vec!["integer exponent in i32 range".into()],
            found,
        };
        let mut value = i64::try_from(base).map_err(|_| overflow(base.to_string()))?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let inner = self.exponent()?;
            if inner < 0 {
                return Err(ParseError {
                    offset: start,
                    expected: vec!["non-negative nested exponent".into()],
                    found: inner.to_string(),
                });
            }
            value = value
                .checked_pow(inner as u32)
                .ok_or_else(|| overflow(format!("{base}^{inner}")))?;
        }
        if negative {
            value = -value;
        }
        i32::try_from(value).map_err(|_| overflow(value.to_string()))
    }

    fn atom(&mut self) -> Result<Expr<T>, ParseError> {
        match self.peek().clone() {
            Tok::Number(x) | Tok::Integer(_, x) => {
                self.bump();
                let v = T::from_f64(x).ok_or_else(|| self.error(&["representable number"]))?;
                Ok(Expr::Const(Complex::new(v, T::zero())))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.error(&["`)`", "operator"]));
                }
                self.bump();
                Ok(inner)
            }
            Tok::Ident(name) => {
                let at = self.offset();
                self.bump();
                let is_call = *self.peek() == Tok::LParen;
                if is_call {
                    let func = match name.as_str() {
                        "sqrt" => Func::Sqrt,
                        "log" => Func::Log,
                        "exp" => Func::Exp,
                        _ => {
                            return Err(ParseError {
                                offset: at,
                                expected: vec!["`sqrt`".into(), "`log`".into(), "`exp`".into()],
                                found: format!("identifier `{name}`"),
                            })
                        }
                    };
                    self.bump();
                    let arg = self.expr()?;
                    if *self.peek() != Tok::RParen {
                        return Err(self.error(&["`)`", "operator"]));
                    }
                    self.bump();
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                match name.as_str() {
                    "z" => Ok(Expr::Var),
                    "i" => Ok(Expr::Const(Complex::i())),
                    _ => Err(ParseError {
                        offset: at,
                        expected: OPERAND.iter().map(|s| s.to_string()).collect(),
                        found: format!("identifier `{name}`"),
                    }),
                }
            }
            _ => Err(self.error(OPERAND)),
        }
    }
}

/// Parses `src` into an expression tree.
pub fn parse<T: Real>(src: &str) -> Result<Expr<T>, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        _scalar: std::marker::PhantomData,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.error(&["operator", "end of input"]));
    }
    Ok(e)
}
