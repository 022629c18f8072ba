//! The acceptance battery: eleven checks with hand-derived oracles, run by `semiconj suite`.

use num_complex::Complex;

use crate::dynamics::{classify, extend_orbit, Classification, ClassifyConfig, MapKind, SelfMap};
use crate::eqlab::{
    canonicity_check, corollary_identity, make_intertwiner, maximality_check, membership_check,
    membership_grid, sample_pairs, CanonicityConfig, Codomain, CorollaryMode, EqError, Equation,
    IntertwinerSpec, Sigma, Sign, SolutionPair, Tau,
};
use crate::geometry::{half_plane_distance, Moebius};
use crate::mapdsl::{differentiate, parse, radical_inverse, Domain, Expr};
use crate::renorm::{
    baker_pommerenke_h, covering_probe, default_grid, pommerenke_g, RenormConfig, SemiconjResult,
    UnivalenceRegion,
};

type C = Complex<f64>;

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub criteria: Vec<CriterionResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> usize {
        self.criteria.iter().filter(|c| c.pass).count()
    }

    pub fn all_passed(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }
}

/// The five labelled maps with their expected kinds.
pub const LABELLED_MAPS: [(&str, Domain, MapKind); 5] = [
    ("(z^2+z)/2", Domain::Disk, MapKind::EllipticAttracting),
    ("z^2", Domain::Disk, MapKind::EllipticSuperattracting),
    ("2*z+i", Domain::HalfPlane, MapKind::Hyperbolic),
    (
        "z+1-1/(z+i)",
        Domain::HalfPlane,
        MapKind::ParabolicNonzeroStep,
    ),
    ("z+i", Domain::HalfPlane, MapKind::ParabolicZeroStep),
];

/// Every closed-form expression the battery evaluates, with the domain it is sampled on.
pub fn suite_expressions() -> Vec<(String, Domain)> {
    let mut out: Vec<(String, Domain)> = LABELLED_MAPS
        .iter()
        .map(|(s, d, _)| (s.to_string(), *d))
        .collect();
    for s in [
        "(z+i)/2",
        "(z+i)/3",
        "sqrt((z+i)/2)",
        "-i*(z-i)",
        "3*z",
        "0.5*z",
        "sqrt(z)",
        "z+2-i",
    ] {
        out.push((s.to_string(), Domain::HalfPlane));
    }
    for spec in intertwiner_specs() {
        if let Ok(f) = make_intertwiner(spec) {
            out.push((f.source, Domain::HalfPlane));
        }
    }
    out
}

fn intertwiner_specs() -> Vec<IntertwinerSpec<f64>> {
    vec![
        IntertwinerSpec::HypToHyp {
            s: 4.0,
            t: 2.0,
            c: 1.0,
        },
        IntertwinerSpec::HypToHyp {
            s: 3.0,
            t: 3.0,
            c: 2.0,
        },
        IntertwinerSpec::HypToPar {
            s: 2.0,
            sign: Sign::Plus,
        },
        IntertwinerSpec::HypToPar {
            s: 2.0,
            sign: Sign::Minus,
        },
        IntertwinerSpec::HypToEll { s: 2.0, theta: 1.0 },
        IntertwinerSpec::ParToPar {
            from: Sign::Plus,
            to: Sign::Plus,
            d: 3.0,
        },
        IntertwinerSpec::ParToEll {
            sign: Sign::Plus,
            theta: 1.0,
        },
        IntertwinerSpec::ParToEll {
            sign: Sign::Minus,
            theta: 2.5,
        },
        IntertwinerSpec::PlanarParToPar {
            c: C::new(2.0, -1.0),
        },
        IntertwinerSpec::PlanarParToEll {
            a: C::new(0.5, 1.5),
        },
    ]
}

fn seed(domain: Domain) -> C {
    match domain {
        Domain::Disk => C::new(0.3, 0.2),
        Domain::HalfPlane => C::i(),
    }
}

fn half_plane(src: &str) -> Result<SelfMap<f64>, String> {
    SelfMap::parse(src, Domain::HalfPlane).map_err(|e| e.to_string())
}

fn setup(src: &str) -> Result<(SelfMap<f64>, Classification<f64>), String> {
    let m = half_plane(src)?;
    let c = classify(&m, &[C::i()], &ClassifyConfig::default()).map_err(|e| e.to_string())?;
    Ok((m, c))
}

fn theorem_a(src: &str, z0: C) -> Result<SemiconjResult<f64>, String> {
    let (m, c) = setup(src)?;
    let grid = default_grid(Domain::HalfPlane, C::i());
    pommerenke_g(&m, &c, z0, &grid, &RenormConfig::theorem_a()).map_err(|e| e.to_string())
}

fn theorem_b(src: &str, z0: C) -> Result<SemiconjResult<f64>, String> {
    let (m, c) = setup(src)?;
    let grid = default_grid(Domain::HalfPlane, C::i());
    baker_pommerenke_h(&m, &c, z0, &grid, &RenormConfig::theorem_b()).map_err(|e| e.to_string())
}

fn sup<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    it.into_iter().fold(0.0, f64::max)
}

type Outcome = Result<(bool, String), String>;
type Criterion = (&'static str, fn() -> Outcome);

fn criterion_1() -> Outcome {
    let r = theorem_a("2*z+i", C::i())?;
    let err = sup(r
        .grid
        .iter()
        .zip(&r.values)
        .map(|(z, v)| (v - (z + C::i()) / 2.0).norm()));
    let mut res = 0.0f64;
    for (v, iv) in r.values.iter().zip(&r.image_values) {
        res = res.max(half_plane_distance(*iv, 2.0 * v).map_err(|e| e.to_string())?);
    }
    let b = r.b.unwrap_or(f64::NAN);
    let pass = err < 1e-6
        && r.iterations <= 80
        && (r.a - 2.0).abs() <= 1e-9
        && b.abs() <= 1e-9
        && res < 1e-6;
    Ok((
        pass,
        format!(
            "sup|g-(z+i)/2| = {err:.2e}, N = {}, A = {}, b = {b:.2e}, residual = {res:.2e}",
            r.iterations, r.a
        ),
    ))
}

fn criterion_2() -> Outcome {
    let r = theorem_b("z+i", C::i())?;
    let err = sup(r
        .grid
        .iter()
        .zip(&r.values)
        .map(|(z, v)| (v + C::i() * (z - C::i())).norm()));
    let res = sup(r
        .values
        .iter()
        .zip(&r.image_values)
        .map(|(v, iv)| (iv - v - 1.0).norm()));
    let h0 = r
        .evaluator()
        .map_err(|e| e.to_string())?
        .eval(C::i())
        .map_err(|e| e.to_string())?;
    let pass = err < 1e-10 && res < 1e-10 && h0.norm() < 1e-12;
    Ok((
        pass,
        format!(
            "sup|h+i(z-i)| = {err:.2e}, residual = {res:.2e}, |h(z0)| = {:.2e}",
            h0.norm()
        ),
    ))
}

fn criterion_3() -> Outcome {
    let g = theorem_a("2*z+i", C::i())?;
    let gt = theorem_a("2*z+i", C::new(0.0, 2.0))?;
    let oracle = sup(gt
        .grid
        .iter()
        .zip(&gt.values)
        .map(|(z, v)| (v - (z + C::i()) / 3.0).norm()));
    let dev = corollary_identity(&g, &gt, CorollaryMode::Hyperbolic).map_err(|e| e.to_string())?;
    Ok((
        dev < 1e-6 && oracle < 1e-6,
        format!("deviation = {dev:.2e}, sup|g~-(z+i)/3| = {oracle:.2e}"),
    ))
}

fn criterion_4() -> Outcome {
    let h = theorem_b("z+i", C::i())?;
    let ht = theorem_b("z+i", C::new(1.0, 2.0))?;
    let dev = corollary_identity(&h, &ht, CorollaryMode::Planar).map_err(|e| e.to_string())?;
    Ok((dev < 1e-10, format!("deviation = {dev:.2e}")))
}

fn criterion_5() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (src, domain, expected) in LABELLED_MAPS {
        let got = SelfMap::parse(src, domain)
            .map_err(|e| e.to_string())
            .and_then(|m| {
                classify(&m, &[seed(domain)], &ClassifyConfig::default()).map_err(|e| e.to_string())
            });
        match got {
            Ok(c) => {
                pass &= c.kind == expected;
                parts.push(format!("{src}: {}", c.kind));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{src}: {e}"));
            }
        }
    }
    Ok((pass, parts.join("; ")))
}

fn criterion_6() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut count = 0;
    for (src, domain, _) in LABELLED_MAPS {
        let m = SelfMap::parse(src, domain).map_err(|e| e.to_string())?;
        let seeds = match domain {
            Domain::Disk => [C::new(0.3, 0.2), C::new(-0.5, 0.1), C::new(0.1, -0.7)],
            Domain::HalfPlane => [C::i(), C::new(2.0, 0.5), C::new(-1.0, 3.0)],
        };
        for z0 in seeds {
            let c = classify(&m, &[z0], &ClassifyConfig::default()).map_err(|e| e.to_string())?;
            let orbit = extend_orbit(&m, z0, c.confidence.iterations).map_err(|e| e.to_string())?;
            count += orbit.steps.len();
            worst = worst.max(orbit.max_step_increase());
        }
    }
    Ok((
        worst <= 1e-12,
        format!("{count} steps, max s_(n+1) - s_n = {worst:.2e}"),
    ))
}

fn post(r: &SemiconjResult<f64>, outer: &str) -> Result<Sigma<f64>, String> {
    Ok(Sigma::PostCompose {
        outer: parse(outer).map_err(|e| e.to_string())?,
        inner: r.evaluator().map_err(|e| e.to_string())?.clone(),
    })
}

fn dilation(a: f64) -> Tau<f64> {
    Tau::Moebius(Moebius::real_affine(a, 0.0).expect("positive dilation"))
}

fn forward(sigma: Sigma<f64>, tau: Tau<f64>) -> Result<SolutionPair<f64>, String> {
    SolutionPair::new(sigma, tau, Equation::Forward(Codomain::HalfPlane)).map_err(|e| e.to_string())
}

fn criterion_7() -> Outcome {
    let g = theorem_a("2*z+i", C::i())?;
    let pairs = sample_pairs(&g, 200);
    let root = forward(post(&g, "sqrt(z)")?, dilation(2f64.sqrt()))?;
    let rep = maximality_check(&root, &g, &pairs).map_err(|e| e.to_string())?;
    let frac = rep.separated_strict as f64 / rep.separated.max(1) as f64;
    let triple = forward(post(&g, "3*z")?, dilation(2.0))?;
    let rep3 = maximality_check(&triple, &g, &pairs).map_err(|e| e.to_string())?;
    let pass = rep.violations.is_empty()
        && rep.separated > 0
        && frac >= 0.95
        && rep3.equalities == rep3.pairs;
    Ok((
        pass,
        format!(
            "sqrt(g): {} violations, {:.1}% strict of {} separated pairs; 3g: {}/{} equalities",
            rep.violations.len(),
            100.0 * frac,
            rep.separated,
            rep3.equalities,
            rep3.pairs
        ),
    ))
}

fn criterion_8() -> Outcome {
    let cfg = CanonicityConfig::default();
    let g = theorem_a("2*z+i", C::i())?;
    let h = theorem_b("z+i", C::i())?;
    let unit = Tau::Affine {
        a: C::new(1.0, 0.0),
        b: C::new(1.0, 0.0),
    };
    let cases: Vec<(&str, SolutionPair<f64>, &SemiconjResult<f64>, bool)> = vec![
        (
            "0.5g",
            forward(post(&g, "0.5*z")?, dilation(2.0))?,
            &g,
            true,
        ),
        ("3g", forward(post(&g, "3*z")?, dilation(2.0))?, &g, true),
        (
            "sqrt(g)",
            forward(post(&g, "sqrt(z)")?, dilation(2f64.sqrt()))?,
            &g,
            false,
        ),
        (
            "h+2-i",
            SolutionPair::new(post(&h, "z+2-i")?, unit, Equation::Planar)
                .map_err(|e| e.to_string())?,
            &h,
            true,
        ),
        (
            "h^2+h",
            SolutionPair::new(post(&h, "z^2+z")?, unit, Equation::Planar)
                .map_err(|e| e.to_string())?,
            &h,
            false,
        ),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, pair, lim, expected) in cases {
        let v = canonicity_check(&pair, lim, &cfg).map_err(|e| e.to_string())?;
        pass &= v.canonical == expected && v.agree;
        parts.push(format!(
            "{name}: {} (fit {:.1e}, {} equality pairs)",
            if v.canonical {
                "canonical"
            } else {
                "not canonical"
            },
            v.fit.residual,
            v.equality_pairs
        ));
    }
    Ok((pass, parts.join("; ")))
}

fn criterion_9() -> Outcome {
    let mut worst = 0.0f64;
    let mut pass = true;
    for spec in intertwiner_specs() {
        let f = make_intertwiner(spec).map_err(|e| e.to_string())?;
        let rep = membership_check(&f.expr, &spec, &membership_grid(spec.spaces().0))
            .map_err(|e| e.to_string())?;
        worst = worst.max(rep.residual);
        pass &= rep.passes(1e-10);
    }
    let empty = [
        IntertwinerSpec::ParToHyp {
            sign: Sign::Plus,
            t: 2.0,
        },
        IntertwinerSpec::PlanarEllToPar {
            a: C::new(2.0, 0.0),
        },
    ]
    .into_iter()
    .all(|s| matches!(make_intertwiner(s), Err(EqError::EmptyFamily { .. })));
    let root = make_intertwiner(IntertwinerSpec::HypToHyp {
        s: 4.0,
        t: 2.0,
        c: 1.0,
    })
    .map_err(|e| e.to_string())?;
    let rep = membership_check(
        &root.expr,
        &root.spec,
        &membership_grid(Codomain::HalfPlane),
    )
    .map_err(|e| e.to_string())?;
    let decay = rep.decay_monotone == Some(true);
    Ok((
        pass && empty && decay,
        format!("max membership residual = {worst:.2e}, empty families rejected: {empty}, decay monotone: {decay}"),
    ))
}

fn criterion_10() -> Outcome {
    let h = theorem_b("z+i", C::i())?;
    let region = UnivalenceRegion::default_for(&h).map_err(|e| e.to_string())?;
    let targets: Vec<C> = (6..18)
        .map(|k| C::new(k as f64 + 0.5, if k % 2 == 0 { 0.3 } else { -0.3 }))
        .collect();
    let rep = covering_probe(&h, &targets, &region).map_err(|e| e.to_string())?;
    let ones = rep.entries.iter().filter(|e| e.winding == Some(1)).count();
    let control = covering_probe(&h, &[C::new(8.0, -20.0)], &region).map_err(|e| e.to_string())?;
    let zero = control.entries[0].winding == Some(0);
    Ok((
        ones >= 10 && zero,
        format!(
            "{ones}/{} targets wound once, control winding 0: {zero}",
            targets.len()
        ),
    ))
}

/// Quasi-random point of the sampling region for `domain`.
fn sample_point(domain: Domain, k: usize) -> C {
    let (u, v) = (radical_inverse(k, 2), radical_inverse(k, 3));
    match domain {
        Domain::Disk => C::from_polar(0.9 * u.sqrt(), std::f64::consts::TAU * v),
        Domain::HalfPlane => C::new(-3.0 + 6.0 * u, 0.1 + 2.9 * v),
    }
}

/// Fourth-order central difference with a step kept inside the domain.
fn finite_difference(e: &Expr<f64>, domain: Domain, z: C) -> Option<C> {
    let room = match domain {
        Domain::Disk => 1.0 - z.norm(),
        Domain::HalfPlane => z.im,
    };
    let h = 1e-3 * room.min(1.0 + z.norm());
    let f = |w: C| e.eval(w).ok();
    Some((f(z - 2.0 * h)? - 8.0 * f(z - h)? + 8.0 * f(z + h)? - f(z + 2.0 * h)?) / (12.0 * h))
}

fn criterion_11() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for (src, domain) in suite_expressions() {
        let e: Expr<f64> = parse(&src).map_err(|e| format!("{src}: {e}"))?;
        let d = differentiate(&e);
        for k in 1..=100 {
            let z = sample_point(domain, k);
            let exact = d.eval(z).map_err(|e| format!("{src} at {z}: {e}"))?;
            let approx = finite_difference(&e, domain, z)
                .ok_or_else(|| format!("{src}: FD failed at {z}"))?;
            worst = worst.max((exact - approx).norm() / exact.norm().max(1e-300));
            count += 1;
        }
    }
    let malformed = ["z ^", "2*(z+1", "z +* 1", "sin(z)", "", "1.2.3"];
    let positioned = malformed
        .iter()
        .all(|s| matches!(parse::<f64>(s), Err(e) if e.offset <= s.len()));
    Ok((
        worst < 1e-6 && positioned,
        format!("{count} points, max relative error = {worst:.2e}, malformed inputs positioned: {positioned}"),
    ))
}

const CRITERIA: [Criterion; 11] = [
    ("disk-model reproduction", criterion_1),
    ("planar-model reproduction", criterion_2),
    ("hyperbolic base-point identity", criterion_3),
    ("planar base-point identity", criterion_4),
    ("classification suite", criterion_5),
    ("Schwarz step monotonicity", criterion_6),
    ("maximality", criterion_7),
    ("canonicity", criterion_8),
    ("intertwiner families", criterion_9),
    ("covering probe", criterion_10),
    ("parser and derivative", criterion_11),
];

/// Runs one criterion (1-based).
pub fn run_criterion(id: u8) -> Option<CriterionResult> {
    let (name, f) = *CRITERIA.get((id as usize).checked_sub(1)?)?;
    let (pass, detail) = match f() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    Some(CriterionResult {
        id,
        name,
        pass,
        detail,
    })
}

pub fn run_suite() -> SuiteReport {
    SuiteReport {
        criteria: (1..=CRITERIA.len() as u8)
            .filter_map(run_criterion)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expressions_parse() {
        let exprs = suite_expressions();
        assert!(exprs.len() >= 20);
        for (s, _) in exprs {
            assert!(parse::<f64>(&s).is_ok(), "{s}");
        }
    }

    #[test]
    fn criterion_ids() {
        assert!(run_criterion(0).is_none());
        assert!(run_criterion(12).is_none());
        let c = run_criterion(4).unwrap();
        assert_eq!(c.id, 4);
        assert!(c.pass, "{}", c.detail);
    }
}
