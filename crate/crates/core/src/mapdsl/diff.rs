use num_complex::Complex;
use num_traits::{One, Zero};

use super::{Expr, Func};
use crate::scalar::Real;

fn c<T: Real>(v: Complex<T>) -> Expr<T> {
    Expr::Const(v)
}

fn neg<T: Real>(a: Expr<T>) -> Expr<T> {
    match a {
        Expr::Const(v) => c(-v),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn add<T: Real>(a: Expr<T>, b: Expr<T>) -> Expr<T> {
    match (a, b) {
        (a, b) if a.is_zero() => b,
        (a, b) if b.is_zero() => a,
        (Expr::Const(x), Expr::Const(y)) => c(x + y),
        (a, Expr::Neg(b)) => sub(a, *b),
        (a, b) => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub<T: Real>(a: Expr<T>, b: Expr<T>) -> Expr<T> {
    match (a, b) {
        (a, b) if b.is_zero() => a,
        (a, b) if a.is_zero() => neg(b),
        (Expr::Const(x), Expr::Const(y)) => c(x - y),
        (a, Expr::Neg(b)) => add(a, *b),
        (a, Expr::Div(n, d)) if matches!(*n, Expr::Const(v) if v.re < T::zero() && v.im.is_zero()) => {
            add(a, div(neg(*n), *d))
        }
        (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul<T: Real>(a: Expr<T>, b: Expr<T>) -> Expr<T> {
    match (a, b) {
        (a, _) if a.is_zero() => c(Complex::zero()),
        (_, b) if b.is_zero() => c(Complex::zero()),
        (a, b) if a.is_one() => b,
        (a, b) if b.is_one() => a,
        (Expr::Const(x), Expr::Const(y)) => c(x * y),
        (Expr::Const(x), Expr::Mul(p, q)) if matches!(*p, Expr::Const(_)) => {
            let Expr::Const(y) = *p else { unreachable!() };
            mul(c(x * y), *q)
        }
        (a, b @ Expr::Const(_)) => mul(b, a),
        (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div<T: Real>(a: Expr<T>, b: Expr<T>) -> Expr<T> {
    match (a, b) {
        (a, _) if a.is_zero() => c(Complex::zero()),
        (a, b) if b.is_one() => a,
        (Expr::Const(x), Expr::Const(y)) if !y.is_zero() => c(x / y),
        (a, b) => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn pow<T: Real>(a: Expr<T>, n: i32) -> Expr<T> {
    match n {
        0 => c(Complex::one()),
        1 => a,
        _ => Expr::Pow(Box::new(a), n),
    }
}

fn real<T: Real>(x: T) -> Expr<T> {
    Expr::real(x)
}

/// Symbolic derivative with respect to `z`, lightly simplified.
pub fn differentiate<T: Real>(e: &Expr<T>) -> Expr<T> {
    match e {
        Expr::Var => c(Complex::one()),
        Expr::Const(_) => c(Complex::zero()),
        Expr::Neg(a) => neg(differentiate(a)),
        Expr::Add(a, b) => add(differentiate(a), differentiate(b)),
        Expr::Sub(a, b) => sub(differentiate(a), differentiate(b)),
        Expr::Mul(a, b) => add(
            mul(differentiate(a), (**b).clone()),
            mul((**a).clone(), differentiate(b)),
        ),
        Expr::Div(a, b) => {
            let db = differentiate(b);
            if let Expr::Const(_) = **a {
                // (a/b)' = -a b' / b^2
                div(mul(neg((**a).clone()), db), pow((**b).clone(), 2))
            } else {
                let da = differentiate(a);
                div(
                    sub(mul(da, (**b).clone()), mul((**a).clone(), db)),
                    pow((**b).clone(), 2),
                )
            }
        }
        Expr::Pow(a, n) => {
            let n = *n;
            if n == 0 {
                return c(Complex::zero());
            }
            let nn = T::from_i32(n).expect("exponent fits scalar");
            mul(mul(real(nn), pow((**a).clone(), n - 1)), differentiate(a))
        }
        Expr::Call(f, a) => {
            let da = differentiate(a);
            let outer = match f {
                Func::Exp => e.clone(),
                Func::Log => div(c(Complex::one()), (**a).clone()),
                Func::Sqrt => div(real(T::from_f64(0.5).unwrap()), e.clone()),
            };
            mul(outer, da)
        }
    }
}
