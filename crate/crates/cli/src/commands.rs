//! Subcommand handlers.

use std::io::Write;

use num_complex::Complex64;
use semiconj::dynamics::{
    classify as classify_map, Classification, ClassifyConfig, DynamicsError, SelfMap,
};
use semiconj::eqlab::{
    canonicity_check, corollary_identity, make_intertwiner, maximality_check, membership_check,
    membership_grid, residual, sample_pairs, CanonicityConfig, Codomain, CorollaryMode, EqError,
    Equation, IntertwinerSpec, Sigma, Sign, SolutionPair, Tau,
};
use semiconj::geometry::{GeometryError, Moebius};
use semiconj::mapdsl::{parse, Domain, MapError};
use semiconj::renorm::{
    baker_pommerenke_h, default_grid, pommerenke_g, Model, RenormConfig, RenormError,
    SemiconjResult,
};
use semiconj::suite::run_suite;
use serde::Serialize;

use crate::config::{parse_complex, RunConfig};
use crate::report::{
    flatten, ClassifyReport, ErrorBody, ErrorReport, Num, SemiconjReport, F64_DIGITS, SCHEMA,
};
use crate::{Common, EngineArgs, Output};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CHECK: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

/// A failed run: exit code plus the structured error written to stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub body: Box<ErrorBody>,
}

impl Failure {
    fn new(code: u8, kind: &'static str, message: String) -> Self {
        Failure {
            code,
            body: Box::new(ErrorBody {
                kind,
                message,
                offset: None,
                expected: None,
                found: None,
                witness: None,
            }),
        }
    }

    pub fn usage(message: String) -> Self {
        Failure::new(EXIT_USAGE, "usage", message)
    }

    fn numerical(message: String) -> Self {
        Failure::new(EXIT_NUMERICAL, "numerical", message)
    }

    pub fn emit(&self) {
        let report = ErrorReport {
            schema: SCHEMA,
            error: (*self.body).clone(),
        };
        let text = serde_json::to_string_pretty(&report).expect("error report serializes");
        let _ = writeln!(std::io::stderr(), "{text}");
    }
}

impl From<MapError> for Failure {
    fn from(e: MapError) -> Self {
        let message = e.to_string();
        match e {
            MapError::Parse(p) => {
                let mut f = Failure::new(EXIT_USAGE, "parse", message);
                f.body.offset = Some(p.offset);
                f.body.expected = Some(p.expected);
                f.body.found = Some(p.found);
                f
            }
            MapError::NotSelfMap {
                witness_re,
                witness_im,
                ..
            } => {
                let mut f = Failure::new(EXIT_USAGE, "not-self-map", message);
                f.body.witness = Some([witness_re, witness_im]);
                f
            }
            MapError::TooFewSamples(_) => Failure::usage(message),
        }
    }
}

impl From<GeometryError> for Failure {
    fn from(e: GeometryError) -> Self {
        Failure::new(EXIT_USAGE, "geometry", e.to_string())
    }
}

impl From<DynamicsError> for Failure {
    fn from(e: DynamicsError) -> Self {
        let message = e.to_string();
        match e {
            DynamicsError::Map(m) => m.into(),
            DynamicsError::Geometry(g) => g.into(),
            DynamicsError::Automorphism => Failure::new(EXIT_USAGE, "automorphism", message),
            DynamicsError::NotInterior { re, im, .. } => {
                let mut f = Failure::new(EXIT_USAGE, "domain", message);
                f.body.witness = Some([re, im]);
                f
            }
            DynamicsError::NoSeeds => Failure::usage(message),
            _ => Failure::numerical(message),
        }
    }
}

impl From<RenormError> for Failure {
    fn from(e: RenormError) -> Self {
        let message = e.to_string();
        match e {
            RenormError::Dynamics(d) => d.into(),
            RenormError::Geometry(g) => g.into(),
            RenormError::ModelMismatch { .. } => {
                Failure::new(EXIT_USAGE, "model-mismatch", message)
            }
            RenormError::NonConvergence { .. } => {
                Failure::new(EXIT_NUMERICAL, "non-convergence", message)
            }
            RenormError::PrecisionFloor { .. } => {
                Failure::new(EXIT_NUMERICAL, "precision", message)
            }
            _ => Failure::numerical(message),
        }
    }
}

impl From<EqError> for Failure {
    fn from(e: EqError) -> Self {
        let message = e.to_string();
        match e {
            EqError::Renorm(r) => r.into(),
            EqError::Geometry(g) => g.into(),
            EqError::Eval { .. } => Failure::numerical(message),
            EqError::Codomain { re, im, .. } => {
                let mut f = Failure::new(EXIT_CHECK, "codomain", message);
                f.body.witness = Some([re, im]);
                f
            }
            EqError::EmptyFamily { .. } => Failure::new(EXIT_CHECK, "empty-family", message),
            _ => Failure::usage(message),
        }
    }
}

fn write_json<T: Serialize>(report: &T) -> Result<(), Failure> {
    let text =
        serde_json::to_string_pretty(report).map_err(|e| Failure::numerical(e.to_string()))?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}").or_else(io_failure)
}

fn io_failure(e: std::io::Error) -> Result<(), Failure> {
    match e.kind() {
        std::io::ErrorKind::BrokenPipe => Ok(()),
        _ => Err(Failure::numerical(e.to_string())),
    }
}

fn write_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), Failure> {
    let io = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(e) => io_failure(e),
        other => Err(Failure::numerical(format!("{other:?}"))),
    };
    let mut w = csv::Writer::from_writer(std::io::stdout().lock());
    w.write_record(header).or_else(io)?;
    for row in rows {
        w.write_record(&row).or_else(io)?;
    }
    w.flush().or_else(io_failure)
}

fn emit<T: Serialize>(report: &T, output: Output) -> Result<(), Failure> {
    match output {
        Output::Json => write_json(report),
        Output::Csv => {
            let value =
                serde_json::to_value(report).map_err(|e| Failure::numerical(e.to_string()))?;
            let rows = flatten(&value).into_iter().map(|(k, v, d)| vec![k, v, d]);
            write_csv(&["key", "value", "digits"], rows)
        }
    }
}

fn classify_config(cfg: &RunConfig) -> ClassifyConfig {
    ClassifyConfig {
        max_iter: cfg.max_iter.unwrap_or(ClassifyConfig::default().max_iter),
        ..ClassifyConfig::default()
    }
}

fn load(cfg: &RunConfig) -> Result<SelfMap<f64>, Failure> {
    Ok(SelfMap::parse(&cfg.map, cfg.domain)?)
}

pub fn classify(common: Common) -> Result<u8, Failure> {
    let cfg = RunConfig::resolve(common, None)?;
    let m = load(&cfg)?;
    let c = classify_map(&m, &cfg.seeds_or_default(), &classify_config(&cfg))?;
    emit(
        &ClassifyReport::new(&cfg.map, cfg.domain.name(), &c),
        cfg.output,
    )?;
    Ok(EXIT_OK)
}

fn engine_config(cfg: &RunConfig, model: Model) -> RenormConfig {
    let mut rc = RenormConfig::for_model(model);
    if let Some(t) = cfg.tol {
        rc.tol = t;
    }
    if let Some(t) = cfg.res_tol {
        rc.res_tol = t;
    }
    if let Some(n) = cfg.max_iter {
        rc.max_iter = n;
    }
    rc
}

fn run_model(
    model: Model,
    m: &SelfMap<f64>,
    class: &Classification<f64>,
    z0: Complex64,
    grid: &[Complex64],
    rc: &RenormConfig,
) -> Result<SemiconjResult<f64>, RenormError> {
    match model {
        Model::TheoremA => pommerenke_g(m, class, z0, grid, rc),
        Model::TheoremB => baker_pommerenke_h(m, class, z0, grid, rc),
    }
}

struct Computed {
    map: SelfMap<f64>,
    class: Classification<f64>,
    model: Model,
    rc: RenormConfig,
    result: SemiconjResult<f64>,
}

fn compute(cfg: &RunConfig, model: Option<&str>) -> Result<Computed, Failure> {
    let map = load(cfg)?;
    let class = classify_map(&map, &cfg.seeds_or_default(), &classify_config(cfg))?;
    let model = match model {
        Some(s) => s.parse::<Model>().map_err(Failure::usage)?,
        None => Model::for_kind(class.kind).ok_or_else(|| {
            Failure::new(
                EXIT_USAGE,
                "model-mismatch",
                format!(
                    "{} maps have an interior fixed point; no boundary model applies",
                    class.kind
                ),
            )
        })?,
    };
    let rc = engine_config(cfg, model);
    let z0 = cfg.base_point();
    let grid = cfg
        .grid
        .clone()
        .unwrap_or_else(|| default_grid(cfg.domain, z0));
    let result = run_model(model, &map, &class, z0, &grid, &rc)?;
    Ok(Computed {
        map,
        class,
        model,
        rc,
        result,
    })
}

pub fn semiconj(common: Common, engine: EngineArgs, model: Option<String>) -> Result<u8, Failure> {
    let cfg = RunConfig::resolve(common, Some(&engine))?;
    let c = compute(&cfg, model.as_deref())?;
    let r = &c.result;
    match cfg.output {
        Output::Json => write_json(&SemiconjReport::new(&cfg.map, cfg.domain.name(), r))?,
        Output::Csv => {
            let rows = r.grid.iter().zip(&r.values).map(|(z, v)| {
                [z.re, z.im, v.re, v.im]
                    .iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
            });
            write_csv(&["re_z", "im_z", "re_val", "im_val"], rows)?;
        }
    }
    Ok(EXIT_OK)
}

pub struct VerifyArgs {
    pub common: Common,
    pub engine: EngineArgs,
    pub sigma: String,
    pub tau: String,
    pub compose: bool,
    pub codomain: String,
    pub alt_base: Option<String>,
    pub pairs: usize,
}

fn parse_tau(s: &str) -> Result<(Complex64, Complex64), Failure> {
    let nums = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| Failure::usage(format!("bad --tau `{s}`")))?;
    match nums.as_slice() {
        [a, b] => Ok((Complex64::new(*a, 0.0), Complex64::new(*b, 0.0))),
        [ar, ai, br, bi] => Ok((Complex64::new(*ar, *ai), Complex64::new(*br, *bi))),
        _ => Err(Failure::usage(format!(
            "--tau takes `a,b` or `are,aim,bre,bim`, got `{s}`"
        ))),
    }
}

#[derive(Serialize)]
struct MaximalityOut {
    pairs: usize,
    violations: usize,
    strict: usize,
    equalities: usize,
    max_excess: Num,
    pass: bool,
}

#[derive(Serialize)]
struct CanonicityOut {
    canonical: bool,
    equality_case: bool,
    equality_pairs: usize,
    pairs_tested: usize,
    fit_c: [Num; 2],
    fit_d: [Num; 2],
    fit_residual: Num,
    agree: bool,
}

#[derive(Serialize)]
struct CorollaryOut {
    mode: &'static str,
    alt_base: [Num; 2],
    deviation: Num,
    tolerance: Num,
    pass: bool,
}

#[derive(Serialize)]
struct VerifyReport {
    schema: u32,
    command: &'static str,
    map: String,
    sigma: String,
    tau: String,
    model: &'static str,
    kind: &'static str,
    residual: Num,
    residual_tol: Num,
    residual_pass: bool,
    maximality: Option<MaximalityOut>,
    canonicity: CanonicityOut,
    corollary: Option<CorollaryOut>,
    pass: bool,
}

fn pair_num(z: Complex64, digits: f64) -> [Num; 2] {
    [Num::new(z.re, digits), Num::new(z.im, digits)]
}

pub fn verify(args: VerifyArgs) -> Result<u8, Failure> {
    let cfg = RunConfig::resolve(args.common, Some(&args.engine))?;
    let c = compute(&cfg, None)?;
    let g = &c.result;
    let digits = g.precision.digits_remaining;
    let (a, b) = parse_tau(&args.tau)?;
    let codomain = match args.codomain.as_str() {
        "halfplane" | "H" => Codomain::HalfPlane,
        "disk" | "D" => Codomain::Disk,
        other => return Err(Failure::usage(format!("unknown codomain `{other}`"))),
    };
    let (equation, tau) = match c.model {
        Model::TheoremA => (
            Equation::Forward(codomain),
            Tau::Moebius(Moebius::affine(a, b)?),
        ),
        Model::TheoremB => (Equation::Planar, Tau::Affine { a, b }),
    };
    let expr = parse::<f64>(&args.sigma).map_err(MapError::from)?;
    let sigma = if args.compose {
        Sigma::PostCompose {
            outer: expr,
            inner: g.evaluator()?.clone(),
        }
    } else {
        Sigma::Closed(expr)
    };
    let pair = SolutionPair::new(sigma, tau, equation)?;

    let res = residual(&pair, &c.map, &g.grid)?;
    let res_tol = cfg.res_tol.unwrap_or(1e-6);
    let residual_pass = res < res_tol;

    let maximality = match c.model {
        Model::TheoremA => {
            let rep = maximality_check(&pair, g, &sample_pairs(g, args.pairs))?;
            Some(MaximalityOut {
                pairs: rep.pairs,
                violations: rep.violations.len(),
                strict: rep.strict,
                equalities: rep.equalities,
                max_excess: Num::new(rep.max_excess, digits),
                pass: rep.holds(),
            })
        }
        Model::TheoremB => None,
    };

    let v = canonicity_check(&pair, g, &CanonicityConfig::default())?;
    let canonicity = CanonicityOut {
        canonical: v.canonical,
        equality_case: v.equality_case,
        equality_pairs: v.equality_pairs,
        pairs_tested: v.pairs_tested,
        fit_c: pair_num(v.fit.c, digits),
        fit_d: pair_num(v.fit.d, digits),
        fit_residual: Num::new(v.fit.residual, digits),
        agree: v.agree,
    };

    let corollary = match CorollaryMode::for_kind(c.class.kind) {
        Some(mode) => {
            let z0 = cfg.base_point();
            let alt = match (&args.alt_base, cfg.base_points.get(1)) {
                (Some(s), _) => parse_complex(s).map_err(Failure::usage)?,
                (None, Some(p)) => *p,
                (None, None) => match cfg.domain {
                    Domain::HalfPlane => Complex64::new(z0.re, 2.0 * z0.im),
                    Domain::Disk => 0.5 * z0 + 0.25,
                },
            };
            let gt = run_model(c.model, &c.map, &c.class, alt, &g.grid, &c.rc)?;
            let dev = corollary_identity(g, &gt, mode)?;
            let tol =
                1e-6 + 10.0 * (g.error_estimate.unwrap_or(0.0) + gt.error_estimate.unwrap_or(0.0));
            Some(CorollaryOut {
                mode: mode.as_str(),
                alt_base: pair_num(alt, F64_DIGITS),
                deviation: Num::new(dev, digits),
                tolerance: Num::exact(tol),
                pass: dev < tol,
            })
        }
        None => None,
    };

    let pass = residual_pass
        && maximality.as_ref().is_none_or(|m| m.pass)
        && canonicity.agree
        && corollary.as_ref().is_none_or(|c| c.pass);
    let report = VerifyReport {
        schema: SCHEMA,
        command: "verify",
        map: cfg.map.clone(),
        sigma: args.sigma,
        tau: args.tau,
        model: c.model.as_str(),
        kind: c.class.kind.as_str(),
        residual: Num::new(res, digits),
        residual_tol: Num::exact(res_tol),
        residual_pass,
        maximality,
        canonicity,
        corollary,
        pass,
    };
    emit(&report, cfg.output)?;
    Ok(if pass { EXIT_OK } else { EXIT_CHECK })
}

fn parse_sign(s: &str) -> Result<Sign, Failure> {
    match s {
        "+" => Ok(Sign::Plus),
        "-" => Ok(Sign::Minus),
        other => Err(Failure::usage(format!("expected + or -, got `{other}`"))),
    }
}

/// Parses family strings such as `h->h(4,2)`, `p->e(+,1)` or `planar:p->e(0.5,1.5)`.
pub fn parse_family(s: &str) -> Result<IntertwinerSpec<f64>, Failure> {
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let (head, rest) = compact
        .split_once('(')
        .ok_or_else(|| Failure::usage(format!("family `{s}` needs parameters in parentheses")))?;
    let args: Vec<&str> = rest
        .strip_suffix(')')
        .ok_or_else(|| Failure::usage(format!("family `{s}` is missing `)`")))?
        .split(',')
        .collect();
    let num = |k: usize| -> Result<f64, Failure> {
        args.get(k)
            .ok_or_else(|| Failure::usage(format!("family `{s}` needs parameter {}", k + 1)))?
            .parse::<f64>()
            .map_err(|_| Failure::usage(format!("bad number `{}` in `{s}`", args[k])))
    };
    let sign = |k: usize| -> Result<Sign, Failure> {
        parse_sign(
            args.get(k)
                .ok_or_else(|| Failure::usage(format!("family `{s}` needs a sign")))?,
        )
    };
    let complex = || -> Result<Complex64, Failure> { Ok(Complex64::new(num(0)?, num(1)?)) };
    let arity = |n: &[usize]| -> Result<(), Failure> {
        if n.contains(&args.len()) {
            Ok(())
        } else {
            Err(Failure::usage(format!(
                "family `{s}` takes {n:?} parameters, got {}",
                args.len()
            )))
        }
    };
    let (planar, head) = match head.strip_prefix("planar") {
        Some(rest) => (true, rest.trim_start_matches(':')),
        None => (false, head),
    };
    let spec = match (planar, head) {
        (false, "h->h") => {
            arity(&[2, 3])?;
            let c = if args.len() == 3 { num(2)? } else { 1.0 };
            IntertwinerSpec::HypToHyp {
                s: num(0)?,
                t: num(1)?,
                c,
            }
        }
        (false, "h->p") => {
            arity(&[2])?;
            IntertwinerSpec::HypToPar {
                s: num(0)?,
                sign: sign(1)?,
            }
        }
        (false, "h->e") => {
            arity(&[2])?;
            IntertwinerSpec::HypToEll {
                s: num(0)?,
                theta: num(1)?,
            }
        }
        (false, "p->p") => {
            arity(&[2, 3])?;
            let d = if args.len() == 3 { num(2)? } else { 0.0 };
            IntertwinerSpec::ParToPar {
                from: sign(0)?,
                to: sign(1)?,
                d,
            }
        }
        (false, "p->h") => {
            arity(&[2])?;
            IntertwinerSpec::ParToHyp {
                sign: sign(0)?,
                t: num(1)?,
            }
        }
        (false, "p->e") => {
            arity(&[2])?;
            IntertwinerSpec::ParToEll {
                sign: sign(0)?,
                theta: num(1)?,
            }
        }
        (true, "p->p") => {
            arity(&[2])?;
            IntertwinerSpec::PlanarParToPar { c: complex()? }
        }
        (true, "p->e") => {
            arity(&[2])?;
            IntertwinerSpec::PlanarParToEll { a: complex()? }
        }
        (true, "e->p") => {
            arity(&[2])?;
            IntertwinerSpec::PlanarEllToPar { a: complex()? }
        }
        _ => return Err(Failure::usage(format!("unknown family `{s}`"))),
    };
    Ok(spec)
}

#[derive(Serialize)]
struct IntertwineReport {
    schema: u32,
    command: &'static str,
    family: String,
    sigma: String,
    equation: String,
    domain: &'static str,
    codomain: &'static str,
    points: usize,
    residual: Num,
    decay: Option<Vec<[Num; 2]>>,
    decay_monotone: Option<bool>,
    pass: bool,
}

pub fn intertwine(family: &str, output: Output) -> Result<u8, Failure> {
    let spec = parse_family(family)?;
    let f = make_intertwiner(spec)?;
    let (source, target) = spec.spaces();
    let rep = membership_check(&f.expr, &spec, &membership_grid(source))?;
    let pass = rep.passes(1e-10);
    let report = IntertwineReport {
        schema: SCHEMA,
        command: "intertwine",
        family: spec.family(),
        sigma: f.source,
        equation: f.equation,
        domain: source.name(),
        codomain: target.name(),
        points: rep.points,
        residual: Num::new(rep.residual, F64_DIGITS - 1.0),
        decay: rep.decay.map(|d| {
            d.into_iter()
                .map(|(y, q)| [Num::exact(y), Num::new(q, F64_DIGITS - 1.0)])
                .collect()
        }),
        decay_monotone: rep.decay_monotone,
        pass,
    };
    emit(&report, output)?;
    Ok(if pass { EXIT_OK } else { EXIT_CHECK })
}

#[derive(Serialize)]
struct CriterionOut {
    id: u8,
    name: &'static str,
    pass: bool,
    detail: String,
}

#[derive(Serialize)]
struct SuiteOut {
    schema: u32,
    command: &'static str,
    passed: usize,
    total: usize,
    criteria: Vec<CriterionOut>,
}

pub fn suite(output: Output) -> Result<u8, Failure> {
    let report = run_suite();
    let out = SuiteOut {
        schema: SCHEMA,
        command: "suite",
        passed: report.passed(),
        total: report.criteria.len(),
        criteria: report
            .criteria
            .iter()
            .map(|c| CriterionOut {
                id: c.id,
                name: c.name,
                pass: c.pass,
                detail: c.detail.clone(),
            })
            .collect(),
    };
    emit(&out, output)?;
    Ok(if report.all_passed() {
        EXIT_OK
    } else {
        EXIT_CHECK
    })
}
