//! Report types serialized to JSON (schema 1) or CSV.

use num_complex::Complex64;
use semiconj::dynamics::Classification;
use semiconj::geometry::ComplexPoint;
use semiconj::renorm::SemiconjResult;
use serde::Serialize;
use serde_json::Value;

pub const SCHEMA: u32 = 1;

/// Significant decimal digits carried by `f64`.
pub const F64_DIGITS: f64 = 15.65;

/// A real number with its estimated number of correct significant digits.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Num {
    pub value: f64,
    pub digits: f64,
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

impl Num {
    pub fn new(value: f64, digits: f64) -> Self {
        Num {
            value,
            digits: round2(digits.clamp(0.0, F64_DIGITS)),
        }
    }

    /// Digits implied by an absolute error bound.
    pub fn with_error(value: f64, err: f64) -> Self {
        if !err.is_finite() {
            return Num::new(value, 0.0);
        }
        let scale = value.abs().max(f64::MIN_POSITIVE);
        let digits = if err <= 0.0 {
            F64_DIGITS
        } else {
            -(err / scale).log10()
        };
        Num::new(value, digits)
    }

    pub fn exact(value: f64) -> Self {
        Num::new(value, F64_DIGITS)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CNum {
    pub re: Num,
    pub im: Num,
}

impl CNum {
    pub fn with_error(z: Complex64, err: f64) -> Self {
        let scale = z.norm();
        let digits = Num::with_error(scale, err).digits;
        CNum {
            re: Num::new(z.re, digits),
            im: Num::new(z.im, digits),
        }
    }

    pub fn exact(z: Complex64) -> Self {
        CNum {
            re: Num::exact(z.re),
            im: Num::exact(z.im),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
#[serde(untagged)]
pub enum Point {
    Finite(CNum),
    Infinity(&'static str),
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifyReport {
    pub schema: u32,
    pub command: &'static str,
    pub map: String,
    pub domain: String,
    pub kind: &'static str,
    pub dw_point: Point,
    pub multiplier: Num,
    #[serde(rename = "A")]
    pub a: Option<Num>,
    pub s_inf: Num,
    pub orientation: i8,
    pub l_inf: Option<Num>,
    pub seeds: usize,
    pub iterations: usize,
    pub tail_index: usize,
    pub stop: &'static str,
    pub tail_digits: Num,
    pub growth_ratio: Option<Num>,
    pub step_decay: Option<Num>,
    pub max_step_increase: Num,
}

impl ClassifyReport {
    pub fn new(map: &str, domain: &str, c: &Classification<f64>) -> Self {
        let conf = &c.confidence;
        let tail = conf.tail_digits;
        let a_err = |a: f64| {
            if conf.a_spread > 0.0 {
                Num::with_error(a, conf.a_spread)
            } else {
                Num::new(a, tail)
            }
        };
        ClassifyReport {
            schema: SCHEMA,
            command: "classify",
            map: map.to_string(),
            domain: domain.to_string(),
            kind: c.kind.as_str(),
            dw_point: match c.dw_point {
                ComplexPoint::Finite(z) => Point::Finite(CNum {
                    re: Num::new(z.re, tail),
                    im: Num::new(z.im, tail),
                }),
                ComplexPoint::Infinity => Point::Infinity("infinity"),
            },
            multiplier: a_err(c.multiplier),
            a: c.a.map(a_err),
            s_inf: Num::with_error(c.s_inf, conf.s_last * conf.step_decay.unwrap_or(0.0)),
            orientation: c.orientation,
            l_inf: c.l_inf.finite().map(|l| Num::new(l, tail)),
            seeds: conf.seeds,
            iterations: conf.iterations,
            tail_index: conf.tail_index,
            stop: conf.stop.as_str(),
            tail_digits: Num::exact(conf.tail_digits),
            growth_ratio: conf.growth_ratio.map(|g| Num::new(g, tail)),
            step_decay: conf.step_decay.map(|g| Num::new(g, tail)),
            max_step_increase: Num::new(conf.max_step_increase, tail),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Sample {
    pub z: CNum,
    pub value: CNum,
    pub image_value: CNum,
}

#[derive(Debug, Clone, Serialize)]
pub struct SemiconjReport {
    pub schema: u32,
    pub command: &'static str,
    pub map: String,
    pub domain: String,
    pub model: &'static str,
    pub kind: &'static str,
    pub base_point: CNum,
    #[serde(rename = "A")]
    pub a: Num,
    pub b: Option<Num>,
    pub iterations: usize,
    pub sup_cauchy_gap: Num,
    pub error_estimate: Option<Num>,
    pub residual: Num,
    pub base_value_error: Num,
    pub orientation: i8,
    pub digits_lost: Num,
    pub digits_remaining: Num,
    pub samples: Vec<Sample>,
}

impl SemiconjReport {
    pub fn new(map: &str, domain: &str, r: &SemiconjResult<f64>) -> Self {
        let err = r
            .error_estimate
            .unwrap_or(r.sup_cauchy_gap)
            .max(r.sup_cauchy_gap);
        let left = r.precision.digits_remaining;
        let samples = r
            .grid
            .iter()
            .zip(&r.values)
            .zip(&r.image_values)
            .map(|((z, v), iv)| Sample {
                z: CNum::exact(*z),
                value: CNum::with_error(*v, err),
                image_value: CNum::with_error(*iv, err),
            })
            .collect();
        SemiconjReport {
            schema: SCHEMA,
            command: "semiconj",
            map: map.to_string(),
            domain: domain.to_string(),
            model: r.model.as_str(),
            kind: r.kind.as_str(),
            base_point: CNum::exact(r.base_point),
            a: Num::new(r.a, left),
            b: r.b.map(|b| Num::with_error(b, r.b_spread.unwrap_or(0.0))),
            iterations: r.iterations,
            sup_cauchy_gap: Num::new(r.sup_cauchy_gap, left),
            error_estimate: r.error_estimate.map(|e| Num::new(e, 1.0)),
            residual: Num::new(r.residual, left),
            base_value_error: Num::new(r.base_value_error, left),
            orientation: r.orientation,
            digits_lost: Num::exact(r.precision.digits_lost),
            digits_remaining: Num::exact(left),
            samples,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub schema: u32,
    pub error: ErrorBody,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorBody {
    pub kind: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offset: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub found: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<[f64; 2]>,
}

/// Flattens a JSON report into `(path, value, digits)` rows.
pub fn flatten(v: &Value) -> Vec<(String, String, String)> {
    fn walk(prefix: &str, v: &Value, out: &mut Vec<(String, String, String)>) {
        match v {
            Value::Object(map) => {
                if let (Some(value), Some(digits), 2) =
                    (map.get("value"), map.get("digits"), map.len())
                {
                    out.push((prefix.to_string(), scalar(value), scalar(digits)));
                    return;
                }
                for (k, x) in map {
                    let p = if prefix.is_empty() {
                        k.clone()
                    } else {
                        format!("{prefix}.{k}")
                    };
                    walk(&p, x, out);
                }
            }
            Value::Array(items) => {
                for (k, x) in items.iter().enumerate() {
                    walk(&format!("{prefix}[{k}]"), x, out);
                }
            }
            other => out.push((prefix.to_string(), scalar(other), String::new())),
        }
    }
    fn scalar(v: &Value) -> String {
        match v {
            Value::String(s) => s.clone(),
            Value::Null => String::new(),
            other => other.to_string(),
        }
    }
    let mut out = Vec::new();
    walk("", v, &mut out);
    out
}
