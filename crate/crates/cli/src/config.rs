//! Run configuration: flags, an optional JSON file, and the environment.

use std::path::Path;

use num_complex::Complex64;
use semiconj::mapdsl::Domain;
use serde::Deserialize;

use crate::commands::Failure;
use crate::{Common, EngineArgs, Output};

pub const MAX_ITER_ENV: &str = "SEMICONJ_MAX_ITER";
pub const MAX_ITER_LIMIT: usize = 1_000_000;

/// Parses a `re,im` literal.
pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [re, im] => {
            let re: f64 = re.parse().map_err(|_| format!("bad real part in `{s}`"))?;
            let im: f64 = im
                .parse()
                .map_err(|_| format!("bad imaginary part in `{s}`"))?;
            if re.is_finite() && im.is_finite() {
                Ok(Complex64::new(re, im))
            } else {
                Err(format!("non-finite complex literal `{s}`"))
            }
        }
        _ => Err(format!("expected a complex literal `re,im`, got `{s}`")),
    }
}

/// Parses a `;`-separated list of `re,im` literals.
pub fn parse_points(s: &str) -> Result<Vec<Complex64>, String> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(parse_complex)
        .collect()
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    map: Option<String>,
    domain: Option<String>,
    seeds: Option<Vec<String>>,
    base_points: Option<Vec<String>>,
    max_iter: Option<usize>,
    tol: Option<f64>,
    res_tol: Option<f64>,
    grid: Option<String>,
    output: Option<String>,
}

fn read_file(path: &Path) -> Result<FileConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::usage(format!("invalid config {}: {e}", path.display())))
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub map: String,
    pub domain: Domain,
    pub seeds: Vec<Complex64>,
    pub base_points: Vec<Complex64>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    pub res_tol: Option<f64>,
    pub grid: Option<Vec<Complex64>>,
    pub output: Output,
}

impl RunConfig {
    pub fn resolve(common: Common, engine: Option<&EngineArgs>) -> Result<Self, Failure> {
        let file = match &common.config {
            Some(p) => read_file(p)?,
            None => FileConfig::default(),
        };
        let map = common
            .map
            .or(file.map)
            .ok_or_else(|| Failure::usage("--map is required".into()))?;
        let domain: Domain = common
            .domain
            .or(file.domain)
            .as_deref()
            .unwrap_or("halfplane")
            .parse()
            .map_err(Failure::usage)?;
        let seed_text = if common.seeds.is_empty() {
            file.seeds.unwrap_or_default()
        } else {
            common.seeds
        };
        let seeds = seed_text
            .iter()
            .map(|s| parse_complex(s))
            .collect::<Result<Vec<_>, _>>()
            .map_err(Failure::usage)?;
        let base_points = file
            .base_points
            .unwrap_or_default()
            .iter()
            .map(|s| parse_complex(s))
            .collect::<Result<Vec<_>, _>>()
            .map_err(Failure::usage)?;
        let env = match std::env::var(MAX_ITER_ENV) {
            Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| {
                Failure::usage(format!(
                    "{MAX_ITER_ENV} must be a positive integer, got `{v}`"
                ))
            })?),
            Err(_) => None,
        };
        let max_iter = common.max_iter.or(file.max_iter).or(env);
        if let Some(n) = max_iter {
            if n == 0 || n > MAX_ITER_LIMIT {
                return Err(Failure::usage(format!(
                    "max_iter must be in 1..={MAX_ITER_LIMIT}, got {n}"
                )));
            }
        }
        let tol = engine.and_then(|e| e.tol).or(file.tol);
        let res_tol = engine.and_then(|e| e.res_tol).or(file.res_tol);
        for (name, t) in [("tol", tol), ("res_tol", res_tol)] {
            if let Some(t) = t {
                if !(t > 0.0 && t.is_finite()) {
                    return Err(Failure::usage(format!("{name} must be positive, got {t}")));
                }
            }
        }
        let grid = match engine.and_then(|e| e.grid.clone()).or(file.grid) {
            None => None,
            Some(g) if g == "default" => None,
            Some(g) => Some(parse_points(&g).map_err(Failure::usage)?),
        };
        let output = match (common.output, file.output.as_deref()) {
            (Some(o), _) => o,
            (None, Some("csv")) => Output::Csv,
            (None, Some("json") | None) => Output::Json,
            (None, Some(other)) => return Err(Failure::usage(format!("unknown output `{other}`"))),
        };
        Ok(RunConfig {
            map,
            domain,
            seeds,
            base_points,
            max_iter,
            tol,
            res_tol,
            grid,
            output,
        })
    }

    /// Seeds, falling back to `i` on `H` and `0.3 + 0.2i` on `D`.
    pub fn seeds_or_default(&self) -> Vec<Complex64> {
        if !self.seeds.is_empty() {
            return self.seeds.clone();
        }
        vec![match self.domain {
            Domain::HalfPlane => Complex64::i(),
            Domain::Disk => Complex64::new(0.3, 0.2),
        }]
    }

    /// Base point of the renormalization: first configured base point, else first seed.
    pub fn base_point(&self) -> Complex64 {
        self.base_points
            .first()
            .copied()
            .unwrap_or_else(|| self.seeds_or_default()[0])
    }
}
