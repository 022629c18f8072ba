//! Complex expression language used to define self-maps.
//!
//! Expressions are parsed into an [`Expr`] tree, evaluated with principal
//! branches (cut along the negative real axis), and differentiated
//! symbolically so multipliers are exact up to rounding.

mod diff;
mod parser;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::scalar::{lit, to_f64, Real};

pub use diff::differentiate;
pub use parser::{parse, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sqrt,
    Log,
    Exp,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Log => "log",
            Func::Exp => "exp",
        }
    }
}

/// Expression tree in the single variable `z`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr<T> {
    Var,
    Const(Complex<T>),
    Neg(Box<Expr<T>>),
    Add(Box<Expr<T>>, Box<Expr<T>>),
    Sub(Box<Expr<T>>, Box<Expr<T>>),
    Mul(Box<Expr<T>>, Box<Expr<T>>),
    Div(Box<Expr<T>>, Box<Expr<T>>),
    /// Integer power.
    Pow(Box<Expr<T>>, i32),
    Call(Func, Box<Expr<T>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EvalError {
    #[error("pole or branch point hit")]
    Pole,
    #[error("non-finite result")]
    NonFinite,
}

impl<T: Real> Expr<T> {
    pub fn constant(re: T, im: T) -> Self {
        Expr::Const(Complex::new(re, im))
    }

    pub fn real(x: T) -> Self {
        Expr::Const(Complex::new(x, T::zero()))
    }

    /// Evaluates at `z`; poles and non-finite values are flagged rather than propagated.
    pub fn eval(&self, z: Complex<T>) -> Result<Complex<T>, EvalError> {
        let v = match self {
            Expr::Var => z,
            Expr::Const(c) => *c,
            Expr::Neg(a) => -a.eval(z)?,
            Expr::Add(a, b) => a.eval(z)? + b.eval(z)?,
            Expr::Sub(a, b) => a.eval(z)? - b.eval(z)?,
            Expr::Mul(a, b) => a.eval(z)? * b.eval(z)?,
            Expr::Div(a, b) => {
                let num = a.eval(z)?;
                let den = b.eval(z)?;
                if den.is_zero() {
                    return Err(EvalError::Pole);
                }
                num / den
            }
            Expr::Pow(a, n) => {
                let base = a.eval(z)?;
                if *n < 0 && base.is_zero() {
                    return Err(EvalError::Pole);
                }
                base.powi(*n)
            }
            Expr::Call(f, a) => {
                let arg = a.eval(z)?;
                match f {
                    Func::Sqrt => arg.sqrt(),
                    Func::Exp => arg.exp(),
                    Func::Log => {
                        if arg.is_zero() {
                            return Err(EvalError::Pole);
                        }
                        arg.ln()
                    }
                }
            }
        };
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// Substitutes `inner` for the variable.
    pub fn compose(&self, inner: &Expr<T>) -> Expr<T> {
        let map = |e: &Expr<T>| Box::new(e.compose(inner));
        match self {
            Expr::Var => inner.clone(),
            Expr::Const(c) => Expr::Const(*c),
            Expr::Neg(a) => Expr::Neg(map(a)),
            Expr::Add(a, b) => Expr::Add(map(a), map(b)),
            Expr::Sub(a, b) => Expr::Sub(map(a), map(b)),
            Expr::Mul(a, b) => Expr::Mul(map(a), map(b)),
            Expr::Div(a, b) => Expr::Div(map(a), map(b)),
            Expr::Pow(a, n) => Expr::Pow(map(a), *n),
            Expr::Call(f, a) => Expr::Call(*f, map(a)),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if c.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Const(c) if c.is_one())
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(..) => 3,
            Expr::Pow(..) => 4,
            Expr::Const(c) if c.re < T::zero() && c.im.is_zero() => 5,
            _ => 5,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            write!(f, "(")?;
            self.write_at(f, 0)?;
            return write!(f, ")");
        }
        match self {
            Expr::Var => write!(f, "z"),
            Expr::Const(c) => write_const(f, *c),
            Expr::Neg(a) => {
                write!(f, "-")?;
                a.write_at(f, 3)
            }
            Expr::Add(a, b) => {
                a.write_at(f, 1)?;
                write!(f, "+")?;
                b.write_at(f, 2)
            }
            Expr::Sub(a, b) => {
                a.write_at(f, 1)?;
                write!(f, "-")?;
                b.write_at(f, 2)
            }
            Expr::Mul(a, b) => {
                a.write_at(f, 2)?;
                write!(f, "*")?;
                b.write_at(f, 3)
            }
            Expr::Div(a, b) => {
                a.write_at(f, 2)?;
                write!(f, "/")?;
                b.write_at(f, 3)
            }
            Expr::Pow(a, n) => {
                a.write_at(f, 5)?;
                write!(f, "^{n}")
            }
            Expr::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.write_at(f, 0)?;
                write!(f, ")")
            }
        }
    }
}

fn write_const<T: Real>(f: &mut fmt::Formatter<'_>, c: Complex<T>) -> fmt::Result {
    if c.im.is_zero() {
        if c.re < T::zero() {
            write!(f, "(-{})", -c.re)
        } else {
            write!(f, "{}", c.re)
        }
    } else if c.re.is_zero() && c.im.is_one() {
        write!(f, "i")
    } else if c.re.is_zero() {
        if c.im < T::zero() {
            write!(f, "(-{}*i)", -c.im)
        } else {
            write!(f, "({}*i)", c.im)
        }
    } else if c.im < T::zero() {
        write!(f, "({}-{}*i)", c.re, -c.im)
    } else {
        write!(f, "({}+{}*i)", c.re, c.im)
    }
}

impl<T: Real> fmt::Display for Expr<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}

impl<T: Real> FromStr for Expr<T> {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

/// Domain a map is defined on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    Disk,
    HalfPlane,
}

impl Domain {
    pub fn contains<T: Real>(self, z: Complex<T>) -> bool {
        let finite = z.re.is_finite() && z.im.is_finite();
        finite
            && match self {
                Domain::Disk => z.norm() < T::one(),
                Domain::HalfPlane => z.im > T::zero(),
            }
    }

    pub fn name(self) -> &'static str {
        match self {
            Domain::Disk => "disk",
            Domain::HalfPlane => "halfplane",
        }
    }
}

impl FromStr for Domain {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "disk" | "D" => Ok(Domain::Disk),
            "halfplane" | "half-plane" | "H" => Ok(Domain::HalfPlane),
            other => Err(format!(
                "unknown domain `{other}` (expected disk or halfplane)"
            )),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(
        "not a self-map of the {domain}: z = {witness_re} + {witness_im}i maps outside ({detail})"
    )]
    NotSelfMap {
        domain: Domain,
        witness_re: f64,
        witness_im: f64,
        detail: String,
    },
    #[error("self-map check needs at least 100 samples, got {0}")]
    TooFewSamples(usize),
}

impl MapError {
    fn outside<T: Real>(domain: Domain, z: Complex<T>, detail: String) -> Self {
        MapError::NotSelfMap {
            domain,
            witness_re: to_f64(z.re),
            witness_im: to_f64(z.im),
            detail,
        }
    }

    pub fn witness(&self) -> Option<(f64, f64)> {
        match self {
            MapError::NotSelfMap {
                witness_re,
                witness_im,
                ..
            } => Some((*witness_re, *witness_im)),
            _ => None,
        }
    }
}

/// An expression together with its symbolic derivative and domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedMap<T> {
    pub source: String,
    pub expr: Expr<T>,
    pub derivative: Expr<T>,
    pub domain: Domain,
}

impl<T: Real> ParsedMap<T> {
    pub fn parse(src: &str, domain: Domain) -> Result<Self, ParseError> {
        Ok(Self::from_expr(parse(src)?, domain))
    }

    pub fn from_expr(expr: Expr<T>, domain: Domain) -> Self {
        let derivative = differentiate(&expr);
        ParsedMap {
            source: expr.to_string(),
            expr,
            derivative,
            domain,
        }
    }

    pub fn eval(&self, z: Complex<T>) -> Result<Complex<T>, EvalError> {
        self.expr.eval(z)
    }

    pub fn eval_derivative(&self, z: Complex<T>) -> Result<Complex<T>, EvalError> {
        self.derivative.eval(z)
    }
}

/// Outcome of a successful [`check_selfmap`].
#[derive(Debug, Clone, PartialEq)]
pub struct SelfMapReport<T> {
    pub samples: usize,
    /// Largest Schwarz-Pick quotient seen; at most 1 for a self-map.
    pub max_quotient: T,
    pub min_quotient: T,
    /// Quotient above `1 − 1e-9` on every one of the first 20 samples.
    pub likely_automorphism: bool,
}

pub(crate) fn radical_inverse(mut n: usize, base: usize) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while n > 0 {
        out += (n % base) as f64 * inv;
        n /= base;
        inv /= base as f64;
    }
    out
}

/// Quasi-random interior points of `domain` (Halton sequence in the disk, carried to `H` by Cayley).
pub fn interior_samples<T: Real>(domain: Domain, count: usize) -> Vec<Complex<T>> {
    (1..=count)
        .map(|k| {
            let r = 0.995 * radical_inverse(k, 2).sqrt();
            let theta = std::f64::consts::TAU * radical_inverse(k, 3);
            let w = Complex::from_polar(r, theta);
            let p = match domain {
                Domain::Disk => w,
                Domain::HalfPlane => Complex::<f64>::i() * (1.0 + w) / (1.0 - w),
            };
            Complex::new(lit(p.re), lit(p.im))
        })
        .collect()
}

/// Schwarz-Pick quotient: the derivative measured in the domain's hyperbolic metric.
pub fn schwarz_pick_quotient<T: Real>(
    domain: Domain,
    z: Complex<T>,
    value: Complex<T>,
    derivative: Complex<T>,
) -> T {
    match domain {
        Domain::HalfPlane => derivative.norm() * z.im / value.im,
        Domain::Disk => {
            derivative.norm() * (T::one() - z.norm_sqr()) / (T::one() - value.norm_sqr())
        }
    }
}

/// Samples `m` at quasi-random interior points and rejects maps that leave the domain.
pub fn check_selfmap<T: Real>(
    m: &ParsedMap<T>,
    samples: usize,
) -> Result<SelfMapReport<T>, MapError> {
    if samples < 100 {
        return Err(MapError::TooFewSamples(samples));
    }
    let mut max_q = T::zero();
    let mut min_q = T::infinity();
    let mut near_isometry = 0usize;
    let threshold = T::one() - lit(1e-9);
    for (k, z) in interior_samples::<T>(m.domain, samples)
        .into_iter()
        .enumerate()
    {
        let value = m
            .eval(z)
            .map_err(|e| MapError::outside(m.domain, z, e.to_string()))?;
        if !m.domain.contains(value) {
            return Err(MapError::outside(
                m.domain,
                z,
                format!("value {} + {}i", value.re, value.im),
            ));
        }
        let deriv = m
            .eval_derivative(z)
            .map_err(|e| MapError::outside(m.domain, z, format!("derivative: {e}")))?;
        let q = schwarz_pick_quotient(m.domain, z, value, deriv);
        max_q = max_q.max(q);
        min_q = min_q.min(q);
        if k < 20 && q > threshold {
            near_isometry += 1;
        }
    }
    Ok(SelfMapReport {
        samples,
        max_quotient: max_q,
        min_quotient: min_q,
        likely_automorphism: near_isometry == 20,
    })
}
