//! The eleven acceptance criteria, each checked against hand-derived values.
//!
//! Every criterion prints one `PASS`/`FAIL` line to stderr; the test fails if any criterion does.

use std::f64::consts::TAU;
use std::io::Write;

use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semiconj::dynamics::{classify, ClassifyConfig, MapKind, SelfMap};
use semiconj::eqlab::{
    canonicity_check, corollary_identity, make_intertwiner, maximality_check, sample_pairs,
    CanonicityConfig, Codomain, CorollaryMode, EqError, Equation, IntertwinerSpec, Sigma, Sign,
    SolutionPair, Tau,
};
use semiconj::geometry::Moebius;
use semiconj::mapdsl::{differentiate, parse, Domain, Expr};
use semiconj::renorm::{
    baker_pommerenke_h, covering_probe, default_grid, pommerenke_g, RenormConfig, SemiconjResult,
    UnivalenceRegion,
};
use semiconj::suite::suite_expressions;

type Outcome = Result<(bool, String), String>;
type Criterion = (&'static str, fn() -> Outcome);

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn hdist(u: C, v: C) -> f64 {
    2.0 * ((u - v).norm() / (2.0 * (u.im * v.im).sqrt())).asinh()
}

fn ddist(u: C, v: C) -> f64 {
    2.0 * ((u - v).norm() / (C::new(1.0, 0.0) - v.conj() * u).norm()).atanh()
}

fn sup(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(0.0, f64::max)
}

fn rng(stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x5eed_0000 + stream)
}

fn random_h(r: &mut ChaCha8Rng, re: f64, im: (f64, f64)) -> C {
    C::new(r.gen_range(-re..re), r.gen_range(im.0..im.1))
}

fn engine(src: &str, z0: C, planar: bool) -> Result<SemiconjResult<f64>, String> {
    let m = SelfMap::parse(src, Domain::HalfPlane).map_err(e2s)?;
    let c = classify(&m, &[C::i()], &ClassifyConfig::default()).map_err(e2s)?;
    let grid = default_grid(Domain::HalfPlane, C::i());
    if planar {
        baker_pommerenke_h(&m, &c, z0, &grid, &RenormConfig::theorem_b()).map_err(e2s)
    } else {
        pommerenke_g(&m, &c, z0, &grid, &RenormConfig::theorem_a()).map_err(e2s)
    }
}

fn at(r: &SemiconjResult<f64>, z: C) -> Result<C, String> {
    r.evaluator().map_err(e2s)?.eval(z).map_err(e2s)
}

fn theorem_a_reproduction() -> Outcome {
    let g = engine("2*z+i", C::i(), false)?;
    let oracle = |z: C| (z + C::i()) / 2.0;
    let grid_err = sup(g
        .grid
        .iter()
        .zip(&g.values)
        .map(|(z, v)| (v - oracle(*z)).norm()));
    let mut r = rng(1);
    let mut off_grid = 0.0f64;
    let mut res = 0.0f64;
    for z in g
        .grid
        .iter()
        .copied()
        .chain((0..50).map(|_| random_h(&mut r, 2.0, (0.2, 4.0))))
    {
        let gz = at(&g, z)?;
        off_grid = off_grid.max((gz - oracle(z)).norm());
        res = res.max(hdist(at(&g, 2.0 * z + C::i())?, 2.0 * gz));
    }
    let b = g.b.ok_or("no translation reported")?;
    let pass = grid_err < 1e-6
        && off_grid < 1e-6
        && g.iterations <= 80
        && (g.a - 2.0).abs() <= 1e-9
        && b.abs() <= 1e-9
        && res < 1e-6;
    Ok((
        pass,
        format!(
            "grid error {grid_err:.1e}, off-grid {off_grid:.1e}, N = {}, A = {}, b = {b:.1e}, residual {res:.1e}",
            g.iterations, g.a
        ),
    ))
}

fn theorem_b_reproduction() -> Outcome {
    let h = engine("z+i", C::i(), true)?;
    let oracle = |z: C| -C::i() * (z - C::i());
    let err = sup(h
        .grid
        .iter()
        .zip(&h.values)
        .map(|(z, v)| (v - oracle(*z)).norm()));
    let mut res = 0.0f64;
    for z in &h.grid {
        res = res.max((at(&h, z + C::i())? - at(&h, *z)? - 1.0).norm());
    }
    let h0 = at(&h, C::i())?.norm();
    Ok((
        err < 1e-10 && res < 1e-10 && h0 < 1e-12,
        format!("error {err:.1e}, residual {res:.1e}, |h(z0)| = {h0:.1e}"),
    ))
}

fn hyperbolic_base_change() -> Outcome {
    let alt = C::new(0.0, 2.0);
    let g = engine("2*z+i", C::i(), false)?;
    let gt = engine("2*z+i", alt, false)?;
    let ga = at(&g, alt)?;
    let mut dev = 0.0f64;
    let mut oracle = 0.0f64;
    for z in &g.grid {
        let lhs = at(&gt, *z)?;
        dev = dev.max((lhs - (at(&g, *z)? - ga.re) / ga.im).norm());
        oracle = oracle.max((lhs - (z + C::i()) / 3.0).norm());
    }
    let lib = corollary_identity(&g, &gt, CorollaryMode::Hyperbolic).map_err(e2s)?;
    Ok((
        dev < 1e-6 && oracle < 1e-6 && lib < 1e-6,
        format!("deviation {dev:.1e} (library {lib:.1e}), distance to (z+i)/3 {oracle:.1e}"),
    ))
}

fn planar_base_change() -> Outcome {
    let alt = C::new(1.0, 2.0);
    let h = engine("z+i", C::i(), true)?;
    let ht = engine("z+i", alt, true)?;
    let ha = at(&h, alt)?;
    let mut dev = 0.0f64;
    for z in &h.grid {
        dev = dev.max((at(&ht, *z)? - (at(&h, *z)? - ha)).norm());
    }
    let lib = corollary_identity(&h, &ht, CorollaryMode::Planar).map_err(e2s)?;
    Ok((
        dev < 1e-10 && lib < 1e-10,
        format!("deviation {dev:.1e} (library {lib:.1e})"),
    ))
}

const LABELLED: [(&str, Domain, MapKind); 5] = [
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

fn classification_suite() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (src, domain, expected) in LABELLED {
        let seed = if domain == Domain::Disk {
            C::new(0.3, 0.2)
        } else {
            C::i()
        };
        let m = SelfMap::parse(src, domain).map_err(e2s)?;
        match classify(&m, &[seed], &ClassifyConfig::default()) {
            Ok(c) => {
                pass &= c.kind == expected;
                parts.push(format!("{src} {}", c.kind));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{src} {e}"));
            }
        }
    }
    Ok((pass, parts.join(", ")))
}

fn step_monotonicity() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut steps = 0usize;
    for (src, domain, _) in LABELLED {
        let m = SelfMap::parse(src, domain).map_err(e2s)?;
        let dist = if domain == Domain::Disk { ddist } else { hdist };
        let (seeds, n) = match domain {
            Domain::Disk => (
                [C::new(0.3, 0.2), C::new(-0.5, 0.1), C::new(0.1, -0.7)],
                200,
            ),
            Domain::HalfPlane => ([C::i(), C::new(2.0, 0.5), C::new(-1.0, 3.0)], 400),
        };
        for mut z in seeds {
            let mut prev = f64::INFINITY;
            for _ in 0..n {
                let w = m.apply(z).map_err(e2s)?;
                let s = dist(z, w);
                if !s.is_finite() || !w.norm().is_finite() {
                    break;
                }
                if prev.is_finite() {
                    worst = worst.max(s - prev);
                }
                steps += 1;
                prev = s;
                z = w;
            }
        }
    }
    Ok((
        worst <= 1e-12,
        format!("{steps} steps, max s_(n+1) - s_n = {worst:.1e}"),
    ))
}

fn post(r: &SemiconjResult<f64>, outer: &str) -> Result<Sigma<f64>, String> {
    Ok(Sigma::PostCompose {
        outer: parse(outer).map_err(e2s)?,
        inner: r.evaluator().map_err(e2s)?.clone(),
    })
}

fn forward(sigma: Sigma<f64>, scale: f64) -> Result<SolutionPair<f64>, String> {
    let tau = Tau::Moebius(Moebius::real_affine(scale, 0.0).map_err(e2s)?);
    SolutionPair::new(sigma, tau, Equation::Forward(Codomain::HalfPlane)).map_err(e2s)
}

fn maximality() -> Outcome {
    let g = engine("2*z+i", C::i(), false)?;
    let mut r = rng(7);
    let (mut violations, mut separated, mut strict, mut equal) = (0, 0, 0, 0);
    for _ in 0..200 {
        let z = random_h(&mut r, 2.0, (0.2, 4.0));
        let w = random_h(&mut r, 2.0, (0.2, 4.0));
        let (gz, gw) = (at(&g, z)?, at(&g, w)?);
        let rhs = hdist(gz, gw);
        let lhs = hdist(gz.sqrt(), gw.sqrt());
        if lhs > rhs + 1e-9 {
            violations += 1;
        }
        if hdist(z, w) > 0.1 {
            separated += 1;
            if lhs < rhs - 1e-9 {
                strict += 1;
            }
        }
        if (hdist(3.0 * gz, 3.0 * gw) - rhs).abs() <= 1e-9 {
            equal += 1;
        }
    }
    let frac = strict as f64 / separated.max(1) as f64;
    let pairs = sample_pairs(&g, 200);
    let root =
        maximality_check(&forward(post(&g, "sqrt(z)")?, 2f64.sqrt())?, &g, &pairs).map_err(e2s)?;
    let triple = maximality_check(&forward(post(&g, "3*z")?, 2.0)?, &g, &pairs).map_err(e2s)?;
    let lib_frac = root.separated_strict as f64 / root.separated.max(1) as f64;
    let pass = violations == 0
        && separated > 0
        && frac >= 0.95
        && equal == 200
        && root.violations.is_empty()
        && lib_frac >= 0.95
        && triple.equalities == triple.pairs;
    Ok((
        pass,
        format!(
            "sqrt(g): {violations} violations, {:.1}% strict of {separated} separated pairs (library {:.1}%); \
             3g: {equal}/200 equalities (library {}/{})",
            100.0 * frac,
            100.0 * lib_frac,
            triple.equalities,
            triple.pairs
        ),
    ))
}

fn canonicity() -> Outcome {
    let cfg = CanonicityConfig::default();
    let g = engine("2*z+i", C::i(), false)?;
    let h = engine("z+i", C::i(), true)?;
    let unit = Tau::Affine {
        a: C::new(1.0, 0.0),
        b: C::new(1.0, 0.0),
    };
    let planar = SolutionPair::new(post(&h, "z+2-i")?, unit, Equation::Planar).map_err(e2s)?;
    let cases = [
        (
            "0.5g",
            forward(post(&g, "0.5*z")?, 2.0)?,
            &g,
            Some((C::new(0.5, 0.0), C::new(0.0, 0.0))),
        ),
        (
            "3g",
            forward(post(&g, "3*z")?, 2.0)?,
            &g,
            Some((C::new(3.0, 0.0), C::new(0.0, 0.0))),
        ),
        (
            "h+2-i",
            planar,
            &h,
            Some((C::new(1.0, 0.0), C::new(2.0, -1.0))),
        ),
        (
            "sqrt(g)",
            forward(post(&g, "sqrt(z)")?, 2f64.sqrt())?,
            &g,
            None,
        ),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, pair, lim, expected) in cases {
        let v = canonicity_check(&pair, lim, &cfg).map_err(e2s)?;
        let ok = match expected {
            Some((c, d)) => {
                v.canonical && (v.fit.c - c).norm() < 1e-8 && (v.fit.d - d).norm() < 1e-8
            }
            None => !v.canonical,
        };
        pass &= ok && v.agree;
        parts.push(format!(
            "{name} {}{}",
            if v.canonical {
                "canonical"
            } else {
                "not canonical"
            },
            if v.agree {
                ""
            } else {
                " (sub-verdicts disagree)"
            }
        ));
    }
    Ok((pass, parts.join(", ")))
}

fn intertwiners() -> Outcome {
    let e = |theta: f64| C::from_polar(1.0, theta);
    let a = C::new(0.5, 1.5);
    #[allow(clippy::type_complexity)]
    let families: Vec<(
        IntertwinerSpec<f64>,
        Box<dyn Fn(C) -> C>,
        Box<dyn Fn(C) -> C>,
        Codomain,
    )> = vec![
        (
            IntertwinerSpec::HypToHyp {
                s: 4.0,
                t: 2.0,
                c: 1.0,
            },
            Box::new(|z| 4.0 * z),
            Box::new(|w| 2.0 * w),
            Codomain::HalfPlane,
        ),
        (
            IntertwinerSpec::HypToHyp {
                s: 3.0,
                t: 3.0,
                c: 2.0,
            },
            Box::new(|z| 3.0 * z),
            Box::new(|w| 3.0 * w),
            Codomain::HalfPlane,
        ),
        (
            IntertwinerSpec::HypToPar {
                s: 2.0,
                sign: Sign::Plus,
            },
            Box::new(|z| 2.0 * z),
            Box::new(|w| w + 1.0),
            Codomain::HalfPlane,
        ),
        (
            IntertwinerSpec::HypToPar {
                s: 2.0,
                sign: Sign::Minus,
            },
            Box::new(|z| 2.0 * z),
            Box::new(|w| w - 1.0),
            Codomain::HalfPlane,
        ),
        (
            IntertwinerSpec::HypToEll { s: 2.0, theta: 1.0 },
            Box::new(|z| 2.0 * z),
            Box::new(move |w| e(1.0) * w),
            Codomain::Disk,
        ),
        (
            IntertwinerSpec::ParToPar {
                from: Sign::Plus,
                to: Sign::Plus,
                d: 3.0,
            },
            Box::new(|z| z + 1.0),
            Box::new(|w| w + 1.0),
            Codomain::HalfPlane,
        ),
        (
            IntertwinerSpec::ParToEll {
                sign: Sign::Plus,
                theta: 1.0,
            },
            Box::new(|z| z + 1.0),
            Box::new(move |w| e(1.0) * w),
            Codomain::Disk,
        ),
        (
            IntertwinerSpec::ParToEll {
                sign: Sign::Minus,
                theta: 2.5,
            },
            Box::new(|z| z - 1.0),
            Box::new(move |w| e(2.5) * w),
            Codomain::Disk,
        ),
        (
            IntertwinerSpec::PlanarParToPar {
                c: C::new(2.0, -1.0),
            },
            Box::new(|z| z + 1.0),
            Box::new(|w| w + 1.0),
            Codomain::Plane,
        ),
        (
            IntertwinerSpec::PlanarParToEll { a },
            Box::new(|z| z + 1.0),
            Box::new(move |w| a * w),
            Codomain::Plane,
        ),
    ];
    let mut r = rng(9);
    let points: Vec<C> = (0..50).map(|_| random_h(&mut r, 2.0, (0.1, 3.0))).collect();
    let mut worst = 0.0f64;
    let mut contained = true;
    for (spec, gamma, tau, codomain) in &families {
        let f = make_intertwiner(*spec).map_err(e2s)?;
        for &z in &points {
            let fz = f.eval(z).map_err(e2s)?;
            worst = worst.max((f.eval(gamma(z)).map_err(e2s)? - tau(fz)).norm());
            contained &= match codomain {
                Codomain::HalfPlane => fz.im > 0.0,
                Codomain::Disk => fz.norm() < 1.0,
                Codomain::Plane => fz.is_finite(),
            };
        }
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
    .map_err(e2s)?;
    let mut ratios = Vec::new();
    for k in 2..=8 {
        let iy = C::new(0.0, 10f64.powi(k));
        ratios.push((root.eval(iy).map_err(e2s)? / iy).norm());
    }
    let decreasing = ratios.windows(2).all(|w| w[1] < w[0]);
    Ok((
        worst < 1e-10 && contained && empty && decreasing,
        format!(
            "{} families, max residual {worst:.1e}, codomain respected: {contained}, empty families rejected: {empty}, \
             |σ(iy)/(iy)| decreasing: {decreasing}",
            families.len()
        ),
    ))
}

/// Winding number of a closed curve around `w`, by summing principal argument increments.
fn winding(curve: impl Fn(f64) -> C, samples: usize, w: C) -> i64 {
    let mut total = 0.0;
    let mut prev = curve(0.0) - w;
    for k in 1..=samples {
        let cur = curve(k as f64 / samples as f64) - w;
        total += (cur / prev).arg();
        prev = cur;
    }
    (total / TAU).round() as i64
}

fn covering() -> Outcome {
    let h = engine("z+i", C::i(), true)?;
    let ev = h.evaluator().map_err(e2s)?;
    let radius = 5.0;
    let disk_image = |n: usize, w: C| {
        let center = C::new(0.0, (n + 1) as f64);
        winding(
            |t| {
                ev.eval(center + C::from_polar(radius, TAU * t))
                    .unwrap_or(C::new(f64::NAN, 0.0))
            },
            1024,
            w,
        )
    };
    let targets: Vec<C> = (6..18)
        .map(|k| C::new(k as f64 + 0.5, if k % 2 == 0 { 0.3 } else { -0.3 }))
        .collect();
    let ones = targets
        .iter()
        .filter(|w| disk_image(w.re.floor() as usize, **w) == 1)
        .count();
    let control = C::new(8.0, -20.0);
    let outside = disk_image(8, control);
    let region = UnivalenceRegion::default_for(&h).map_err(e2s)?;
    let lib = covering_probe(&h, &targets, &region).map_err(e2s)?;
    let lib_ones = lib.entries.iter().filter(|e| e.winding == Some(1)).count();
    let lib_control = covering_probe(&h, &[control], &region)
        .map_err(e2s)?
        .entries[0]
        .winding;
    Ok((
        ones >= 10 && outside == 0 && lib_ones >= 10 && lib_control == Some(0),
        format!(
            "{ones}/{} targets wound once (library {lib_ones}), control winding {outside} (library {lib_control:?})",
            targets.len()
        ),
    ))
}

fn central_difference(e: &Expr<f64>, z: C, h: f64) -> Option<C> {
    let f = |w: C| e.eval(w).ok();
    let d = |h: f64| Some((f(z + h)? - f(z - h)?) / (2.0 * h));
    Some((4.0 * d(h / 2.0)? - d(h)?) / 3.0)
}

fn parser_and_derivative() -> Outcome {
    let mut r = rng(11);
    let mut worst = 0.0f64;
    let mut count = 0;
    for (src, domain) in suite_expressions() {
        let e: Expr<f64> = parse(&src).map_err(|e| format!("{src}: {e}"))?;
        let de = differentiate(&e);
        for _ in 0..100 {
            let (z, room) = match domain {
                Domain::HalfPlane => {
                    let z = random_h(&mut r, 3.0, (0.2, 3.0));
                    (z, z.im)
                }
                Domain::Disk => {
                    let z = C::from_polar(0.85 * r.gen::<f64>().sqrt(), TAU * r.gen::<f64>());
                    (z, 1.0 - z.norm())
                }
            };
            let exact = de.eval(z).map_err(|err| format!("{src} at {z}: {err}"))?;
            let approx = central_difference(&e, z, 2e-3 * room.min(1.0))
                .ok_or_else(|| format!("{src}: no difference at {z}"))?;
            worst = worst.max((exact - approx).norm() / exact.norm().max(1e-12));
            count += 1;
        }
    }
    let malformed = [
        ("z ^", 3),
        ("2*(z+1", 6),
        ("z +* 1", 3),
        ("sin(z)", 0),
        ("", 0),
        ("z+)", 2),
    ];
    let positioned = malformed
        .iter()
        .all(|(s, at)| matches!(parse::<f64>(s), Err(e) if e.offset == *at));
    Ok((
        worst < 1e-6 && positioned,
        format!("{count} points, max relative error {worst:.1e}, syntax errors positioned: {positioned}"),
    ))
}

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 11] = [
        ("disk-model reproduction", theorem_a_reproduction),
        ("planar-model reproduction", theorem_b_reproduction),
        ("hyperbolic base-point change", hyperbolic_base_change),
        ("planar base-point change", planar_base_change),
        ("classification of labelled maps", classification_suite),
        ("Schwarz step monotonicity", step_monotonicity),
        ("maximality", maximality),
        ("canonicity", canonicity),
        ("intertwiner families", intertwiners),
        ("covering probe", covering),
        ("parser and derivative", parser_and_derivative),
    ];
    let mut failed = Vec::new();
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err);
    for (k, (name, run)) in criteria.iter().enumerate() {
        let (pass, detail) = run().unwrap_or_else(|e| (false, format!("error: {e}")));
        let _ = writeln!(
            err,
            "{} {:>2} {name}: {detail}",
            if pass { "PASS" } else { "FAIL" },
            k + 1
        );
        if !pass {
            failed.push(k + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
