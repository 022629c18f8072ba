//! Functional-equation laboratory: residuals of `σ∘φ = τ∘σ`, maximality and
//! canonicity tests against a computed limit, the base-point identities,
//! closed-form intertwiners of model automorphisms, and grand-orbit
//! equivalence in the model spaces.

use std::fmt;

use num_complex::Complex;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::dynamics::{MapKind, SelfMap};
use crate::geometry::{disk_distance, half_plane_distance, GeometryError, Moebius};
use crate::mapdsl::{radical_inverse, EvalError, Expr, Func};
use crate::renorm::{LimitEvaluator, Model, RenormError, SemiconjResult};
use crate::scalar::{lit, to_f64, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EqError {
    #[error(transparent)]
    Renorm(#[from] RenormError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("evaluation failed at {re} + {im}i: {source}")]
    Eval { re: f64, im: f64, source: EvalError },
    #[error("value at {re} + {im}i lies outside the {codomain}")]
    Codomain {
        re: f64,
        im: f64,
        codomain: Codomain,
    },
    #[error("σ is constant")]
    ConstantSigma,
    #[error("τ is not an automorphism of the {0}")]
    InvalidTau(Codomain),
    #[error("sampled σ has no value at {re} + {im}i")]
    NotSampled { re: f64, im: f64 },
    #[error("grids are incompatible: {0}")]
    IncompatibleGrids(String),
    #[error("mode mismatch: {0}")]
    ModeMismatch(String),
    #[error("the family {family} is empty ({reason})")]
    EmptyFamily {
        family: String,
        reason: &'static str,
    },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

fn at<T: Real>(z: Complex<T>) -> (f64, f64) {
    (to_f64(z.re), to_f64(z.im))
}

fn eval_err<T: Real>(z: Complex<T>, source: EvalError) -> EqError {
    let (re, im) = at(z);
    EqError::Eval { re, im, source }
}

/// Target space of a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Codomain {
    HalfPlane,
    Disk,
    Plane,
}

impl Codomain {
    pub fn name(self) -> &'static str {
        match self {
            Codomain::HalfPlane => "halfplane",
            Codomain::Disk => "disk",
            Codomain::Plane => "plane",
        }
    }

    pub fn contains<T: Real>(self, z: Complex<T>) -> bool {
        let finite = z.re.is_finite() && z.im.is_finite();
        finite
            && match self {
                Codomain::HalfPlane => z.im > T::zero(),
                Codomain::Disk => z.norm() < T::one(),
                Codomain::Plane => true,
            }
    }

    /// Hyperbolic distance on `H` or `D`, Euclidean distance on `C`.
    pub fn distance<T: Real>(self, u: Complex<T>, v: Complex<T>) -> Result<T, EqError> {
        Ok(match self {
            Codomain::HalfPlane => half_plane_distance(u, v)?,
            Codomain::Disk => disk_distance(u, v)?,
            Codomain::Plane => (u - v).norm(),
        })
    }

    fn check<T: Real>(self, z: Complex<T>, value: Complex<T>) -> Result<Complex<T>, EqError> {
        if self.contains(value) {
            Ok(value)
        } else {
            let (re, im) = at(z);
            Err(EqError::Codomain {
                re,
                im,
                codomain: self,
            })
        }
    }
}

impl fmt::Display for Codomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The candidate solution `σ`.
#[derive(Debug, Clone, PartialEq)]
pub enum Sigma<T> {
    /// Closed form in the native variable of `φ`.
    Closed(Expr<T>),
    /// `F∘g` for a computed limit `g`.
    PostCompose {
        outer: Expr<T>,
        inner: LimitEvaluator<T>,
    },
    /// Tabulated values; only the sample points can be evaluated.
    Sampled {
        points: Vec<Complex<T>>,
        values: Vec<Complex<T>>,
    },
}

impl<T: Real> Sigma<T> {
    pub fn eval(&self, z: Complex<T>) -> Result<Complex<T>, EqError> {
        match self {
            Sigma::Closed(e) => e.eval(z).map_err(|e| eval_err(z, e)),
            Sigma::PostCompose { outer, inner } => {
                let g = inner.eval(z)?;
                outer.eval(g).map_err(|e| eval_err(z, e))
            }
            Sigma::Sampled { points, values } => {
                let tol = lit::<T>(1e-12);
                points
                    .iter()
                    .position(|p| (*p - z).norm() <= tol * (T::one() + z.norm()))
                    .map(|k| values[k])
                    .ok_or_else(|| {
                        let (re, im) = at(z);
                        EqError::NotSampled { re, im }
                    })
            }
        }
    }

    /// Values of `σ` on a result's grid; post-compositions reuse the sampled limit values.
    fn on_grid(&self, r: &SemiconjResult<T>) -> Result<Vec<Complex<T>>, EqError> {
        match self {
            Sigma::PostCompose { outer, .. } => r
                .values
                .iter()
                .zip(&r.grid)
                .map(|(g, z)| outer.eval(*g).map_err(|e| eval_err(*z, e)))
                .collect(),
            _ => r.grid.iter().map(|z| self.eval(*z)).collect(),
        }
    }

    fn is_constant(&self) -> bool {
        let spread = |vals: &[Complex<T>]| {
            let tol = lit::<T>(1e-14);
            vals.iter()
                .all(|v| (*v - vals[0]).norm() <= tol * (T::one() + vals[0].norm()))
        };
        let probe = |e: &Expr<T>, pts: &[Complex<T>]| -> bool {
            let vals: Vec<_> = pts.iter().filter_map(|p| e.eval(*p).ok()).collect();
            vals.len() >= 2 && spread(&vals)
        };
        let pts = [
            Complex::new(lit(0.3), lit(1.1)),
            Complex::new(lit(-1.7), lit(2.3)),
            Complex::new(lit(0.2), lit(0.4)),
        ];
        match self {
            Sigma::Closed(e) | Sigma::PostCompose { outer: e, .. } => probe(e, &pts),
            Sigma::Sampled { values, .. } => values.is_empty() || spread(values),
        }
    }
}

/// The model automorphism `τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tau<T> {
    Moebius(Moebius<T>),
    /// `z ↦ az + b` on `C`.
    Affine {
        a: Complex<T>,
        b: Complex<T>,
    },
}

impl<T: Real> Tau<T> {
    pub fn apply(&self, z: Complex<T>) -> Option<Complex<T>> {
        match self {
            Tau::Moebius(m) => m.apply_finite(z).finite(),
            Tau::Affine { a, b } => Some(*a * z + *b),
        }
    }

    fn preserves(&self, codomain: Codomain) -> bool {
        let tol = lit::<T>(1e-9);
        match (self, codomain) {
            (Tau::Moebius(m), Codomain::HalfPlane) => m.preserves_half_plane(tol),
            (Tau::Moebius(m), Codomain::Disk) => {
                let inside = m
                    .apply_finite(Complex::zero())
                    .finite()
                    .is_some_and(|w| w.norm() < T::one());
                inside
                    && (0..8).all(|k| {
                        let t = lit::<T>(k as f64 * std::f64::consts::TAU / 8.0);
                        m.apply_finite(Complex::from_polar(T::one(), t))
                            .finite()
                            .is_some_and(|w| (w.norm() - T::one()).abs() <= tol)
                    })
            }
            (Tau::Affine { a, .. }, Codomain::Plane) => !a.is_zero(),
            _ => false,
        }
    }
}

/// Which functional equation a pair is tested against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equation {
    /// `σ∘φ = τ∘σ` with `σ` into `H` or `D` and `τ` an automorphism there.
    Forward(Codomain),
    /// `σ∘φ = τ∘σ` with `σ` into `C` and `τ` affine.
    Planar,
}

impl Equation {
    pub fn codomain(self) -> Codomain {
        match self {
            Equation::Forward(c) => c,
            Equation::Planar => Codomain::Plane,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPair<T> {
    sigma: Sigma<T>,
    tau: Tau<T>,
    equation: Equation,
}

impl<T: Real> SolutionPair<T> {
    pub fn new(sigma: Sigma<T>, tau: Tau<T>, equation: Equation) -> Result<Self, EqError> {
        if sigma.is_constant() {
            return Err(EqError::ConstantSigma);
        }
        let codomain = equation.codomain();
        match (equation, &tau) {
            (Equation::Forward(Codomain::Plane), _) => return Err(EqError::InvalidTau(codomain)),
            _ if !tau.preserves(codomain) => return Err(EqError::InvalidTau(codomain)),
            _ => {}
        }
        Ok(SolutionPair {
            sigma,
            tau,
            equation,
        })
    }

    pub fn sigma(&self) -> &Sigma<T> {
        &self.sigma
    }

    pub fn tau(&self) -> &Tau<T> {
        &self.tau
    }

    pub fn equation(&self) -> Equation {
        self.equation
    }

    pub fn codomain(&self) -> Codomain {
        self.equation.codomain()
    }

    fn value(&self, z: Complex<T>) -> Result<Complex<T>, EqError> {
        self.codomain().check(z, self.sigma.eval(z)?)
    }
}

/// `sup_grid d(σ(φ(z)), τ(σ(z)))`, hyperbolic for `H`/`D`-valued `σ` and Euclidean for the planar equation.
pub fn residual<T: Real>(
    pair: &SolutionPair<T>,
    phi: &SelfMap<T>,
    grid: &[Complex<T>],
) -> Result<T, EqError> {
    let codomain = pair.codomain();
    let mut sup = T::zero();
    for &z in grid {
        let fz = phi.apply(z).map_err(|e| eval_err(z, e))?;
        let lhs = pair.value(fz)?;
        let s = pair.value(z)?;
        let rhs = pair
            .tau
            .apply(s)
            .ok_or_else(|| eval_err(z, EvalError::Pole))?;
        sup = sup.max(codomain.distance(lhs, rhs)?);
    }
    Ok(sup)
}

/// Deterministic point pairs inside the hyperbolic ball of radius 2 about the result's base point.
pub fn sample_pairs<T: Real>(r: &SemiconjResult<T>, count: usize) -> Vec<(Complex<T>, Complex<T>)> {
    let domain = r.evaluator.as_ref().map(|e| e.map().domain());
    let z0 = r.base_point;
    let point = |k: usize| -> Complex<T> {
        let rad = 1f64.tanh() * radical_inverse(k, 2).sqrt();
        let w = Complex::from_polar(rad, std::f64::consts::TAU * radical_inverse(k, 3));
        let w = Complex::new(lit::<T>(w.re), lit::<T>(w.im));
        let one = Complex::<T>::one();
        match domain {
            Some(crate::mapdsl::Domain::Disk) => (w + z0) / (one + z0.conj() * w),
            _ => {
                let zeta = Complex::<T>::i() * (one + w) / (one - w);
                Complex::new(z0.re, T::zero()) + zeta * z0.im
            }
        }
    };
    (0..count)
        .map(|k| (point(2 * k + 1), point(2 * k + 2)))
        .collect()
}

/// Outcome of [`maximality_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct MaximalityReport<T> {
    pub pairs: usize,
    /// `(z, w, lhs, rhs)` with `lhs > rhs + 1e-9`.
    pub violations: Vec<(Complex<T>, Complex<T>, T, T)>,
    pub strict: usize,
    pub equalities: usize,
    /// Pairs whose points are more than 0.1 apart, and how many of those are strict.
    pub separated: usize,
    pub separated_strict: usize,
    pub max_excess: T,
}

impl<T: Real> MaximalityReport<T> {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Compares `ρ(σ(z), σ(w))` against `ρ(g(z), g(w))` over `pairs`.
pub fn maximality_check<T: Real>(
    pair: &SolutionPair<T>,
    g: &SemiconjResult<T>,
    pairs: &[(Complex<T>, Complex<T>)],
) -> Result<MaximalityReport<T>, EqError> {
    let eval = g.evaluator()?;
    let eq_tol = lit::<T>(1e-9);
    let floor = lit::<T>(1e-6);
    let mut report = MaximalityReport {
        pairs: pairs.len(),
        violations: Vec::new(),
        strict: 0,
        equalities: 0,
        separated: 0,
        separated_strict: 0,
        max_excess: T::neg_infinity(),
    };
    for &(z, w) in pairs {
        let lhs = pair.codomain().distance(pair.value(z)?, pair.value(w)?)?;
        let rhs = g.codomain_distance(eval.eval(z)?, eval.eval(w)?)?;
        let excess = lhs - rhs;
        report.max_excess = report.max_excess.max(excess);
        let strict = excess < -eq_tol;
        if excess > eq_tol {
            report.violations.push((z, w, lhs, rhs));
        } else if strict {
            report.strict += 1;
        } else if rhs > floor {
            report.equalities += 1;
        }
        let sep = match eval.map().domain() {
            crate::mapdsl::Domain::HalfPlane => half_plane_distance(z, w)?,
            crate::mapdsl::Domain::Disk => disk_distance(z, w)?,
        };
        if sep > lit(0.1) {
            report.separated += 1;
            if strict {
                report.separated_strict += 1;
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicityConfig {
    /// Affine-fit residual below which `σ` counts as canonical.
    pub tol: f64,
    pub equality_tol: f64,
    /// Pairs whose `g`-distance is below this are ignored by the equality search.
    pub floor: f64,
}

impl Default for CanonicityConfig {
    fn default() -> Self {
        CanonicityConfig {
            tol: 1e-8,
            equality_tol: 1e-9,
            floor: 1e-6,
        }
    }
}

/// Fitted post-composition `F(u) = c·u + d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineFit<T> {
    pub c: Complex<T>,
    pub d: Complex<T>,
    /// Sup codomain distance between `F(g)` and `σ` on the grid.
    pub residual: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicityVerdict<T> {
    pub canonical: bool,
    pub equality_pairs: usize,
    pub pairs_tested: usize,
    pub equality_case: bool,
    pub fit: AffineFit<T>,
    /// The equality-case and affine-fit sub-verdicts coincide.
    pub agree: bool,
}

fn real<T: Real>(x: T) -> Complex<T> {
    Complex::new(x, T::zero())
}

/// Decides canonicity of `σ` relative to the limit `g`: equality search in the
/// maximality inequality, and a least-squares affine fit `σ ≈ c·g + d` with
/// the model's constraints.
pub fn canonicity_check<T: Real>(
    pair: &SolutionPair<T>,
    g: &SemiconjResult<T>,
    cfg: &CanonicityConfig,
) -> Result<CanonicityVerdict<T>, EqError> {
    if let Sigma::Sampled { points, .. } = &pair.sigma {
        if points.len() != g.grid.len() {
            return Err(EqError::IncompatibleGrids(format!(
                "σ has {} samples, g has {}",
                points.len(),
                g.grid.len()
            )));
        }
    }
    let mut v = pair.sigma.on_grid(g)?;
    for (z, val) in g.grid.iter().zip(&v) {
        pair.codomain().check(*z, *val)?;
    }
    let u = &g.values;
    let n = u.len();
    if n < 2 {
        return Err(EqError::IncompatibleGrids(
            "at least two grid points are needed".into(),
        ));
    }
    let planar = match (g.model, pair.equation) {
        (Model::TheoremB, Equation::Planar) => true,
        (Model::TheoremA, Equation::Forward(_)) => false,
        (model, eq) => {
            return Err(EqError::IncompatibleGrids(format!(
                "{model} limit cannot be compared with a {eq:?} solution"
            )))
        }
    };
    let mut translation = true;
    if planar {
        match pair.tau {
            Tau::Affine { a, b } if (a - Complex::one()).norm() <= lit(1e-12) && !b.is_zero() => {
                v.iter_mut().for_each(|x| *x = *x / b);
            }
            _ => translation = false,
        }
    }
    let codomain = pair.codomain();

    let mut pairs_tested = 0;
    let mut equality_pairs = 0;
    for k in 0..n {
        for l in k + 1..n {
            let rhs = g.codomain_distance(u[k], u[l])?;
            if rhs <= lit(cfg.floor) {
                continue;
            }
            pairs_tested += 1;
            let lhs = codomain.distance(v[k], v[l])?;
            if (lhs - rhs).abs() < lit(cfg.equality_tol) {
                equality_pairs += 1;
            }
        }
    }

    let nn = lit::<T>(n as f64);
    let (c, d) = if planar {
        let mean = v
            .iter()
            .zip(u)
            .fold(Complex::zero(), |acc, (v, u)| acc + (*v - *u))
            / nn;
        (Complex::one(), mean)
    } else if g.kind == MapKind::Hyperbolic {
        let num = u
            .iter()
            .zip(&v)
            .fold(T::zero(), |acc, (u, v)| acc + (u.conj() * v).re);
        let den = u.iter().fold(T::zero(), |acc, u| acc + u.norm_sqr());
        (real(num / den), Complex::zero())
    } else {
        let mean = v
            .iter()
            .zip(u)
            .fold(T::zero(), |acc, (v, u)| acc + (v - u).re)
            / nn;
        (Complex::one(), real(mean))
    };
    let mut fit_res = T::zero();
    let positive = planar || c.re > T::zero();
    if positive {
        for (ui, vi) in u.iter().zip(&v) {
            let f = c * ui + d;
            let dist = if codomain.contains(f) {
                codomain.distance(f, *vi)?
            } else {
                T::infinity()
            };
            fit_res = fit_res.max(dist);
        }
    } else {
        fit_res = T::infinity();
    }
    let canonical = translation && fit_res < lit(cfg.tol);
    // Euclidean isometry on one pair is not rigid, so the planar test asks for every pair.
    let equality_case = translation
        && if planar {
            pairs_tested > 0 && equality_pairs == pairs_tested
        } else {
            equality_pairs > 0
        };
    Ok(CanonicityVerdict {
        canonical,
        equality_pairs,
        pairs_tested,
        equality_case,
        fit: AffineFit {
            c,
            d,
            residual: fit_res,
        },
        agree: canonical == equality_case,
    })
}

/// Which base-point identity to test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorollaryMode {
    Hyperbolic,
    ParabolicNonzeroStep,
    Planar,
}

impl CorollaryMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CorollaryMode::Hyperbolic => "hyperbolic",
            CorollaryMode::ParabolicNonzeroStep => "parabolic-nzs",
            CorollaryMode::Planar => "planar",
        }
    }

    pub fn for_kind(kind: MapKind) -> Option<Self> {
        match kind {
            MapKind::Hyperbolic => Some(CorollaryMode::Hyperbolic),
            MapKind::ParabolicNonzeroStep => Some(CorollaryMode::ParabolicNonzeroStep),
            MapKind::ParabolicZeroStep => Some(CorollaryMode::Planar),
            _ => None,
        }
    }

    fn expects(self) -> (Model, MapKind) {
        match self {
            CorollaryMode::Hyperbolic => (Model::TheoremA, MapKind::Hyperbolic),
            CorollaryMode::ParabolicNonzeroStep => (Model::TheoremA, MapKind::ParabolicNonzeroStep),
            CorollaryMode::Planar => (Model::TheoremB, MapKind::ParabolicZeroStep),
        }
    }
}

impl fmt::Display for CorollaryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CorollaryMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hyperbolic" => Ok(CorollaryMode::Hyperbolic),
            "parabolic-nzs" => Ok(CorollaryMode::ParabolicNonzeroStep),
            "planar" => Ok(CorollaryMode::Planar),
            other => Err(format!(
                "unknown mode `{other}` (expected hyperbolic, parabolic-nzs or planar)"
            )),
        }
    }
}

/// Sup deviation of the change-of-base-point identity between `g` (base `z0`)
/// and `g̃` (base `z̃0`) on their common grid.
pub fn corollary_identity<T: Real>(
    g: &SemiconjResult<T>,
    gt: &SemiconjResult<T>,
    mode: CorollaryMode,
) -> Result<T, EqError> {
    let (model, kind) = mode.expects();
    for r in [g, gt] {
        if r.model != model || r.kind != kind {
            return Err(EqError::ModeMismatch(format!(
                "{mode} needs a {model} result for a {kind} map, got {} for {}",
                r.model, r.kind
            )));
        }
    }
    let (e, et) = (g.evaluator()?, gt.evaluator()?);
    if e.map().map().source != et.map().map().source || e.map().domain() != et.map().domain() {
        return Err(EqError::ModeMismatch(
            "results come from different maps".into(),
        ));
    }
    if g.grid.len() != gt.grid.len()
        || g.grid
            .iter()
            .zip(&gt.grid)
            .any(|(a, b)| (*a - *b).norm() > lit::<T>(1e-12) * (T::one() + a.norm()))
    {
        return Err(EqError::IncompatibleGrids(
            "results use different grids".into(),
        ));
    }
    let g_at = e.eval(gt.base_point)?;
    let i = Complex::<T>::i();
    let mut sup = T::zero();
    for (u, ut) in g.values.iter().zip(&gt.values) {
        let dev = match mode {
            CorollaryMode::Hyperbolic => {
                if (g.a - T::one()).abs() < lit(1e-9) || (gt.a - T::one()).abs() < lit(1e-9) {
                    return Err(EqError::ModeMismatch("A = 1 in hyperbolic mode".into()));
                }
                let k = real(g.b.unwrap_or(T::zero()) / (g.a - T::one()));
                let kt = real(gt.b.unwrap_or(T::zero()) / (gt.a - T::one()));
                ((ut + kt) / (i + kt) - (u + k) / (g_at + k)).norm()
            }
            CorollaryMode::ParabolicNonzeroStep => {
                let b = g.b.unwrap_or(T::zero()).abs();
                let bt = gt.b.unwrap_or(T::zero()).abs();
                if b.is_zero() || bt.is_zero() {
                    return Err(EqError::ModeMismatch("b = 0 in parabolic mode".into()));
                }
                ((ut - i) / bt - (u - g_at) / b).norm()
            }
            CorollaryMode::Planar => (ut - (u - g_at)).norm(),
        };
        sup = sup.max(dev);
    }
    Ok(sup)
}

/// Sign of a unit translation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn value<T: Real>(self) -> T {
        match self {
            Sign::Plus => T::one(),
            Sign::Minus => -T::one(),
        }
    }

    fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

/// A family of maps intertwining two model automorphisms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntertwinerSpec<T> {
    /// `σ(Sz) = Tσ(z)` on `H`; `c > 0` scales the returned member.
    HypToHyp { s: T, t: T, c: T },
    /// `σ(Sz) = σ(z) ± 1` on `H`.
    HypToPar { s: T, sign: Sign },
    /// `σ(Sz) = e^{iθ}σ(z)`, `σ: H → D`.
    HypToEll { s: T, theta: T },
    /// `σ(z ± 1) = σ(z) ± 1` on `H`; the member returned is `z + d`.
    ParToPar { from: Sign, to: Sign, d: T },
    /// `σ(z ± 1) = Tσ(z)` on `H`.
    ParToHyp { sign: Sign, t: T },
    /// `σ(z ± 1) = e^{iθ}σ(z)`, `σ: H → D`.
    ParToEll { sign: Sign, theta: T },
    /// Entire `F(z + 1) = F(z) + 1`; the member returned is `z + c`.
    PlanarParToPar { c: Complex<T> },
    /// Entire `F(z + 1) = aF(z)`.
    PlanarParToEll { a: Complex<T> },
    /// Entire `F(az) = F(z) + 1`.
    PlanarEllToPar { a: Complex<T> },
}

impl<T: Real> IntertwinerSpec<T> {
    pub fn family(&self) -> String {
        match *self {
            IntertwinerSpec::HypToHyp { s, t, .. } => format!("h->h({s},{t})"),
            IntertwinerSpec::HypToPar { s, sign } => format!("h->p({s},{})", sign.symbol()),
            IntertwinerSpec::HypToEll { s, theta } => format!("h->e({s},{theta})"),
            IntertwinerSpec::ParToPar { from, to, .. } => {
                format!("p->p({},{})", from.symbol(), to.symbol())
            }
            IntertwinerSpec::ParToHyp { sign, t } => format!("p->h({},{t})", sign.symbol()),
            IntertwinerSpec::ParToEll { sign, theta } => format!("p->e({},{theta})", sign.symbol()),
            IntertwinerSpec::PlanarParToPar { .. } => "planar p->p".into(),
            IntertwinerSpec::PlanarParToEll { a } => format!("planar p->e({a})"),
            IntertwinerSpec::PlanarEllToPar { a } => format!("planar e->p({a})"),
        }
    }

    /// Domain and codomain of members.
    pub fn spaces(&self) -> (Codomain, Codomain) {
        match self {
            IntertwinerSpec::HypToHyp { .. }
            | IntertwinerSpec::HypToPar { .. }
            | IntertwinerSpec::ParToPar { .. }
            | IntertwinerSpec::ParToHyp { .. } => (Codomain::HalfPlane, Codomain::HalfPlane),
            IntertwinerSpec::HypToEll { .. } | IntertwinerSpec::ParToEll { .. } => {
                (Codomain::HalfPlane, Codomain::Disk)
            }
            _ => (Codomain::Plane, Codomain::Plane),
        }
    }

    /// Source automorphism `γ`.
    pub fn source_map(&self, z: Complex<T>) -> Complex<T> {
        match *self {
            IntertwinerSpec::HypToHyp { s, .. }
            | IntertwinerSpec::HypToPar { s, .. }
            | IntertwinerSpec::HypToEll { s, .. } => z * s,
            IntertwinerSpec::ParToPar { from: sign, .. }
            | IntertwinerSpec::ParToHyp { sign, .. }
            | IntertwinerSpec::ParToEll { sign, .. } => z + sign.value::<T>(),
            IntertwinerSpec::PlanarParToPar { .. } | IntertwinerSpec::PlanarParToEll { .. } => {
                z + T::one()
            }
            IntertwinerSpec::PlanarEllToPar { a } => a * z,
        }
    }

    /// Target automorphism `τ`.
    pub fn target_map(&self, w: Complex<T>) -> Complex<T> {
        match *self {
            IntertwinerSpec::HypToHyp { t, .. } | IntertwinerSpec::ParToHyp { t, .. } => w * t,
            IntertwinerSpec::HypToPar { sign, .. } | IntertwinerSpec::ParToPar { to: sign, .. } => {
                w + sign.value::<T>()
            }
            IntertwinerSpec::HypToEll { theta, .. } | IntertwinerSpec::ParToEll { theta, .. } => {
                w * Complex::from_polar(T::one(), theta)
            }
            IntertwinerSpec::PlanarParToPar { .. } | IntertwinerSpec::PlanarEllToPar { .. } => {
                w + T::one()
            }
            IntertwinerSpec::PlanarParToEll { a } => w * a,
        }
    }

    pub fn equation(&self) -> String {
        match *self {
            IntertwinerSpec::HypToHyp { s, t, .. } => format!("σ({s}z) = {t}σ(z)"),
            IntertwinerSpec::HypToPar { s, sign } => format!("σ({s}z) = σ(z) {} 1", sign.symbol()),
            IntertwinerSpec::HypToEll { s, theta } => format!("σ({s}z) = exp({theta}i)σ(z)"),
            IntertwinerSpec::ParToPar { from, to, .. } => {
                format!("σ(z {} 1) = σ(z) {} 1", from.symbol(), to.symbol())
            }
            IntertwinerSpec::ParToHyp { sign, t } => format!("σ(z {} 1) = {t}σ(z)", sign.symbol()),
            IntertwinerSpec::ParToEll { sign, theta } => {
                format!("σ(z {} 1) = exp({theta}i)σ(z)", sign.symbol())
            }
            IntertwinerSpec::PlanarParToPar { .. } => "F(z + 1) = F(z) + 1".into(),
            IntertwinerSpec::PlanarParToEll { a } => format!("F(z + 1) = ({a})F(z)"),
            IntertwinerSpec::PlanarEllToPar { a } => format!("F(({a})z) = F(z) + 1"),
        }
    }

    fn validate(&self) -> Result<(), EqError> {
        let bad = |msg: String| Err(EqError::InvalidParams(msg));
        let angle = |theta: T| theta >= T::zero() && theta < T::TAU();
        match *self {
            IntertwinerSpec::HypToHyp { s, t, c }
                if !(s > T::one() && t > T::one() && c > T::zero()) =>
            {
                bad(format!(
                    "need S, T > 1 and c > 0, got S = {s}, T = {t}, c = {c}"
                ))
            }
            IntertwinerSpec::HypToPar { s, .. } | IntertwinerSpec::HypToEll { s, .. }
                if !(s > T::one()) =>
            {
                bad(format!("need S > 1, got {s}"))
            }
            IntertwinerSpec::HypToEll { theta, .. } | IntertwinerSpec::ParToEll { theta, .. }
                if !angle(theta) =>
            {
                bad(format!("need θ in [0, 2π), got {theta}"))
            }
            IntertwinerSpec::ParToHyp { t, .. } if !(t > T::one()) => {
                bad(format!("need T > 1, got {t}"))
            }
            IntertwinerSpec::PlanarParToEll { a } | IntertwinerSpec::PlanarEllToPar { a }
                if a.is_zero() =>
            {
                bad("need a ≠ 0".into())
            }
            IntertwinerSpec::ParToPar { d, .. } if !d.is_finite() => {
                bad(format!("need real d, got {d}"))
            }
            _ => Ok(()),
        }
    }
}

/// Closed-form member of a family, tagged with its defining equation.
#[derive(Debug, Clone, PartialEq)]
pub struct Intertwiner<T> {
    pub spec: IntertwinerSpec<T>,
    pub expr: Expr<T>,
    pub source: String,
    pub equation: String,
}

impl<T: Real> Intertwiner<T> {
    pub fn eval(&self, z: Complex<T>) -> Result<Complex<T>, EvalError> {
        self.expr.eval(z)
    }
}

fn call<T: Real>(f: Func, e: Expr<T>) -> Expr<T> {
    Expr::Call(f, Box::new(e))
}

fn times<T: Real>(c: Complex<T>, e: Expr<T>) -> Expr<T> {
    if c.is_one() {
        e
    } else {
        Expr::Mul(Box::new(Expr::Const(c)), Box::new(e))
    }
}

fn plus<T: Real>(e: Expr<T>, c: Complex<T>) -> Expr<T> {
    if c.is_zero() {
        e
    } else {
        Expr::Add(Box::new(e), Box::new(Expr::Const(c)))
    }
}

fn nonzero_angle<T: Real>(theta: T) -> T {
    if theta.is_zero() {
        T::TAU()
    } else {
        theta
    }
}

/// Builds a closed-form member of the requested family, or reports that the family is empty.
pub fn make_intertwiner<T: Real>(spec: IntertwinerSpec<T>) -> Result<Intertwiner<T>, EqError> {
    spec.validate()?;
    let empty = |reason: &'static str| EqError::EmptyFamily {
        family: spec.family(),
        reason,
    };
    let z = Expr::Var;
    let i = Complex::<T>::i();
    let expr = match spec {
        IntertwinerSpec::HypToHyp { s, t, c } => {
            if t > s {
                return Err(empty(
                    "no self-map of H satisfies σ(Sz) = Tσ(z) with 1 < S < T",
                ));
            }
            if t == s {
                times(real(c), z)
            } else {
                let gamma = t.ln() / s.ln();
                times(
                    real(c),
                    call(Func::Exp, times(real(gamma), call(Func::Log, z))),
                )
            }
        }
        IntertwinerSpec::HypToPar { s, sign } => {
            let arg = match sign {
                Sign::Plus => z,
                Sign::Minus => Expr::Div(Box::new(Expr::real(-T::one())), Box::new(z)),
            };
            times(real(s.ln().recip()), call(Func::Log, arg))
        }
        IntertwinerSpec::HypToEll { s, theta } => {
            let w = nonzero_angle(theta) / s.ln();
            call(Func::Exp, times(i * w, call(Func::Log, z)))
        }
        IntertwinerSpec::ParToPar { from, to, d } => {
            if from != to {
                return Err(empty("a self-map of H cannot reverse the unit translation"));
            }
            plus(z, real(d))
        }
        IntertwinerSpec::ParToHyp { .. } => {
            return Err(empty(
                "no self-map of H satisfies σ(z ± 1) = Tσ(z) with T > 1",
            ))
        }
        IntertwinerSpec::ParToEll { sign, theta } => {
            let w = match sign {
                Sign::Plus => nonzero_angle(theta),
                Sign::Minus => T::TAU() - theta,
            };
            call(Func::Exp, times(i * w, z))
        }
        IntertwinerSpec::PlanarParToPar { c } => plus(z, c),
        IntertwinerSpec::PlanarParToEll { a } => call(Func::Exp, times(a.ln(), z)),
        IntertwinerSpec::PlanarEllToPar { .. } => {
            return Err(empty(
                "an entire F with F(az) = F(z) + 1 would give F(0) = F(0) + 1",
            ))
        }
    };
    Ok(Intertwiner {
        spec,
        source: expr.to_string(),
        expr,
        equation: spec.equation(),
    })
}

/// 50 points of the source space: a 10×5 lattice in `[-2, 2] × [0.25, 4]` for `H`, `[-2, 2]²` for `C`.
pub fn membership_grid<T: Real>(source: Codomain) -> Vec<Complex<T>> {
    let mut out = Vec::with_capacity(50);
    for k in 0..10 {
        let x = -2.0 + 4.0 * k as f64 / 9.0;
        for l in 0..5 {
            let y = match source {
                Codomain::Plane => -2.0 + l as f64,
                _ => 0.25 * 2f64.powi(l),
            };
            out.push(Complex::new(lit(x), lit(y)));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipReport<T> {
    pub residual: T,
    pub points: usize,
    /// `(y, |σ(iy)/(iy)|)` for `y = 10²…10⁸`, when the family forces decay.
    pub decay: Option<Vec<(T, T)>>,
    pub decay_monotone: Option<bool>,
}

impl<T: Real> MembershipReport<T> {
    pub fn passes(&self, tol: T) -> bool {
        self.residual < tol && self.decay_monotone != Some(false)
    }
}

/// Residual of the family's defining equation on `grid`, with codomain containment.
pub fn membership_check<T: Real>(
    sigma: &Expr<T>,
    spec: &IntertwinerSpec<T>,
    grid: &[Complex<T>],
) -> Result<MembershipReport<T>, EqError> {
    spec.validate()?;
    let (source, target) = spec.spaces();
    let value = |z: Complex<T>| -> Result<Complex<T>, EqError> {
        let v = sigma.eval(z).map_err(|e| eval_err(z, e))?;
        target.check(z, v)
    };
    let mut sup = T::zero();
    for &z in grid {
        if !source.contains(z) {
            let (re, im) = at(z);
            return Err(EqError::Codomain {
                re,
                im,
                codomain: source,
            });
        }
        let lhs = value(spec.source_map(z))?;
        let rhs = spec.target_map(value(z)?);
        sup = sup.max(target.distance(lhs, rhs)?);
    }
    let decay = match *spec {
        IntertwinerSpec::HypToHyp { s, t, .. } if t < s => {
            let mut samples = Vec::new();
            for p in 2..=8 {
                let y = lit::<T>(10f64.powi(p));
                let iy = Complex::new(T::zero(), y);
                samples.push((y, (value(iy)? / iy).norm()));
            }
            Some(samples)
        }
        _ => None,
    };
    let decay_monotone = decay
        .as_ref()
        .map(|s| s.windows(2).all(|w| w[1].1 < w[0].1));
    Ok(MembershipReport {
        residual: sup,
        points: grid.len(),
        decay,
        decay_monotone,
    })
}

/// Model automorphism whose grand orbits are compared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrbitModel<T> {
    /// `z ↦ Az` on `H`.
    Dilation(T),
    /// `z ↦ z + 1` on `H`.
    Translation,
    /// `z ↦ z + 1` on `C`.
    PlanarTranslation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitVerdict<T> {
    pub equivalent: bool,
    /// Nearest integer `k` with `w ≈ model^k(z)`.
    pub k: i64,
    /// Distance of the test quantity from that integer.
    pub distance: T,
}

/// Tests whether `z` and `w` lie on one grand orbit of the model map.
pub fn model_grand_orbit_equiv<T: Real>(
    model: OrbitModel<T>,
    z: Complex<T>,
    w: Complex<T>,
    tol: T,
) -> Result<OrbitVerdict<T>, EqError> {
    if !matches!(model, OrbitModel::PlanarTranslation) {
        for p in [z, w] {
            if !Codomain::HalfPlane.contains(p) {
                let (re, im) = at(p);
                return Err(EqError::Codomain {
                    re,
                    im,
                    codomain: Codomain::HalfPlane,
                });
            }
        }
    }
    let q = match model {
        OrbitModel::Dilation(a) => {
            if !(a > T::zero()) || (a - T::one()).abs() < lit(1e-12) {
                return Err(EqError::InvalidParams(format!(
                    "dilation factor must be positive and ≠ 1, got {a}"
                )));
            }
            if w.is_zero() {
                return Err(EqError::InvalidParams(
                    "w = 0 has no orbit under z ↦ Az".into(),
                ));
            }
            (w / z).ln() / a.ln()
        }
        OrbitModel::Translation | OrbitModel::PlanarTranslation => w - z,
    };
    let k = q.re.round();
    let distance = (q - real(k)).norm();
    Ok(OrbitVerdict {
        equivalent: distance <= tol,
        k: k.to_i64().unwrap_or(i64::MAX),
        distance,
    })
}
