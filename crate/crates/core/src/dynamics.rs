//! Self-maps, forward orbits and Denjoy-Wolff classification.
//!
//! Every orbit is computed in the map's native domain and transported to the
//! upper half-plane through the map's *chart*, a Möbius map `H → domain`.
//! After classification the chart sends `∞` to the Denjoy-Wolff point, so the
//! renormalization engines always see the attracting boundary point at `∞`.

use std::fmt;

use num_complex::Complex;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::geometry::{half_plane_distance, ComplexPoint, GeometryError, Moebius};
use crate::mapdsl::{check_selfmap, Domain, EvalError, MapError, ParsedMap, SelfMapReport};
use crate::scalar::{escape_radius, lit, significant_digits, to_f64, Real};

/// Default orbit cap.
pub const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("map is numerically an automorphism (Schwarz-Pick quotient ≈ 1 everywhere)")]
    Automorphism,
    #[error("point {re} + {im}i is not interior to the {domain}")]
    NotInterior { domain: Domain, re: f64, im: f64 },
    #[error("evaluation failed at iterate {index}: {source}")]
    Eval { index: usize, source: EvalError },
    #[error("precision lost: iterate {index} left the domain numerically")]
    PrecisionLoss { index: usize },
    #[error("requested {requested} iterates, cap is {cap}")]
    IterationCap { requested: usize, cap: usize },
    #[error("at least one seed is required")]
    NoSeeds,
    #[error("seeds disagree: {0}")]
    InconsistentSeeds(String),
    #[error("classification inconclusive: {0}")]
    Inconclusive(String),
    #[error("limit unstable: spread {spread} exceeds {limit}")]
    UnstableLimit { spread: f64, limit: f64 },
}

/// Analytic self-map of `D` or `H` with its symbolic derivative and a chart `H → domain`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfMap<T> {
    map: ParsedMap<T>,
    report: SelfMapReport<T>,
    chart: Moebius<T>,
    chart_inv: Moebius<T>,
}

/// Samples used when validating a map.
pub const SELFMAP_SAMPLES: usize = 200;

fn default_chart<T: Real>(domain: Domain) -> Moebius<T> {
    match domain {
        Domain::HalfPlane => Moebius::identity(),
        Domain::Disk => Moebius::half_plane_to_disk(),
    }
}

impl<T: Real> SelfMap<T> {
    /// Validates `map` with [`check_selfmap`]; automorphisms are accepted but flagged.
    pub fn new(map: ParsedMap<T>) -> Result<Self, DynamicsError> {
        let report = check_selfmap(&map, SELFMAP_SAMPLES)?;
        let chart = default_chart(map.domain);
        let chart_inv = chart.inverse()?;
        Ok(SelfMap {
            map,
            report,
            chart,
            chart_inv,
        })
    }

    pub fn parse(src: &str, domain: Domain) -> Result<Self, DynamicsError> {
        let map = ParsedMap::parse(src, domain).map_err(MapError::from)?;
        Self::new(map)
    }

    pub fn map(&self) -> &ParsedMap<T> {
        &self.map
    }

    pub fn domain(&self) -> Domain {
        self.map.domain
    }

    pub fn report(&self) -> &SelfMapReport<T> {
        &self.report
    }

    pub fn is_automorphism(&self) -> bool {
        self.report.likely_automorphism
    }

    /// Chart `H → domain`.
    pub fn chart(&self) -> &Moebius<T> {
        &self.chart
    }

    /// Same map with a different chart `H → domain`.
    pub fn with_chart(&self, chart: Moebius<T>) -> Result<Self, DynamicsError> {
        let chart_inv = chart.inverse()?;
        Ok(SelfMap {
            chart,
            chart_inv,
            ..self.clone()
        })
    }

    pub fn check_interior(&self, z: Complex<T>) -> Result<(), DynamicsError> {
        if self.domain().contains(z) {
            Ok(())
        } else {
            Err(DynamicsError::NotInterior {
                domain: self.domain(),
                re: to_f64(z.re),
                im: to_f64(z.im),
            })
        }
    }

    /// One application of the map in native coordinates.
    pub fn apply(&self, z: Complex<T>) -> Result<Complex<T>, EvalError> {
        self.map.eval(z)
    }

    pub fn derivative(&self, z: Complex<T>) -> Result<Complex<T>, EvalError> {
        self.map.eval_derivative(z)
    }

    /// Native point in chart coordinates, if it is finite and in `H`.
    pub fn to_half_plane(&self, z: Complex<T>) -> Option<Complex<T>> {
        match self.chart_inv.apply_finite(z) {
            ComplexPoint::Finite(w) if w.im > T::zero() && w.re.is_finite() && w.im.is_finite() => {
                Some(w)
            }
            _ => None,
        }
    }

    /// Chart point in native coordinates.
    pub fn from_half_plane(&self, z: Complex<T>) -> Option<Complex<T>> {
        self.chart.apply_finite(z).finite()
    }

    /// The conjugated map `chart⁻¹ ∘ φ ∘ chart` on `H`.
    pub fn half_plane_map(&self, z: Complex<T>) -> Result<Complex<T>, EvalError> {
        let native = self.from_half_plane(z).ok_or(EvalError::Pole)?;
        let image = self.apply(native)?;
        self.to_half_plane(image).ok_or(EvalError::NonFinite)
    }

    /// Native orbit of `z` up to index `n`, inclusive.
    pub fn iterate(&self, z: Complex<T>, n: usize) -> Result<Vec<Complex<T>>, DynamicsError> {
        let mut out = Vec::with_capacity(n + 1);
        out.push(z);
        let mut cur = z;
        for index in 1..=n {
            cur = self
                .apply(cur)
                .map_err(|source| DynamicsError::Eval { index, source })?;
            if !self.domain().contains(cur) {
                return Err(DynamicsError::PrecisionLoss { index });
            }
            out.push(cur);
        }
        Ok(out)
    }
}

impl<T: Real> fmt::Display for SelfMap<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} on {}", self.map.expr, self.domain())
    }
}

/// Estimate of a limit that may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LimitEstimate<T> {
    Finite(T),
    Infinite,
}

impl<T: Real> LimitEstimate<T> {
    pub fn finite(self) -> Option<T> {
        match self {
            LimitEstimate::Finite(x) => Some(x),
            LimitEstimate::Infinite => None,
        }
    }
}

/// Decimal digits a point carries: native boundary loss plus the relative step size in chart coordinates.
fn point_digits<T: Real>(
    domain: Domain,
    prev: Option<Complex<T>>,
    native: Complex<T>,
    z: Complex<T>,
) -> T {
    let ten = lit::<T>(10.0);
    let mut digits = significant_digits::<T>();
    if let Some(p) = prev {
        let delta = (z - p).norm();
        let ratio = if delta > T::zero() {
            z.norm() / delta
        } else {
            T::one()
        };
        digits = digits - ratio.max(T::one()).log(ten);
    }
    match domain {
        Domain::HalfPlane => digits - (native.norm() / native.im).max(T::one()).log(ten),
        Domain::Disk => digits + (T::one() - native.norm()).min(T::one()).log(ten),
    }
}

/// Cached forward orbit with hyperbolic steps and precision estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Orbit<T> {
    pub z0: Complex<T>,
    /// Iterates in the map's native domain.
    pub native: Vec<Complex<T>>,
    /// Iterates in chart (half-plane) coordinates.
    pub points: Vec<Complex<T>>,
    /// `steps[n] = ρ_H(z_n, z_{n+1})`.
    pub steps: Vec<T>,
    /// Estimated significant digits of each iterate.
    pub digits: Vec<T>,
}

impl<T: Real> Orbit<T> {
    pub fn start(m: &SelfMap<T>, z0: Complex<T>) -> Result<Self, DynamicsError> {
        m.check_interior(z0)?;
        let h = m
            .to_half_plane(z0)
            .ok_or(DynamicsError::PrecisionLoss { index: 0 })?;
        Ok(Orbit {
            z0,
            native: vec![z0],
            points: vec![h],
            steps: Vec::new(),
            digits: vec![point_digits(m.domain(), None, z0, h)],
        })
    }

    /// Index of the last computed iterate.
    pub fn last_index(&self) -> usize {
        self.native.len() - 1
    }

    /// Appends one iterate.
    pub fn push(&mut self, m: &SelfMap<T>) -> Result<(), DynamicsError> {
        let index = self.native.len();
        let prev = self.native[index - 1];
        let next = m
            .apply(prev)
            .map_err(|source| DynamicsError::Eval { index, source })?;
        if !m.domain().contains(next) {
            return Err(DynamicsError::PrecisionLoss { index });
        }
        let h = m
            .to_half_plane(next)
            .ok_or(DynamicsError::PrecisionLoss { index })?;
        let step = half_plane_distance(self.points[index - 1], h)?;
        self.native.push(next);
        self.points.push(h);
        self.steps.push(step);
        self.digits.push(point_digits(
            m.domain(),
            Some(self.points[index - 1]),
            next,
            h,
        ));
        Ok(())
    }

    /// Extends the orbit so that index `n` exists.
    pub fn extend_to(&mut self, m: &SelfMap<T>, n: usize) -> Result<(), DynamicsError> {
        while self.last_index() < n {
            self.push(m)?;
        }
        Ok(())
    }

    pub fn xs(&self) -> Vec<T> {
        self.points.iter().map(|z| z.re).collect()
    }

    pub fn ys(&self) -> Vec<T> {
        self.points.iter().map(|z| z.im).collect()
    }

    /// Largest `s_{n+1} − s_n`; non-positive up to rounding by Schwarz's lemma.
    pub fn max_step_increase(&self) -> T {
        self.steps
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(T::neg_infinity(), T::max)
    }

    /// `|x_n|/y_n` along the orbit.
    pub fn stolz_ratios(&self) -> Vec<T> {
        self.points.iter().map(|z| z.re.abs() / z.im).collect()
    }

    /// Limit of `y_n` from dyadic differences `y_N − y_{N/2}` and `y_{N/2} − y_{N/4}`.
    pub fn l_inf_estimate(&self) -> LimitEstimate<T> {
        l_inf_from(&self.ys()[..])
    }
}

fn l_inf_from<T: Real>(ys: &[T]) -> LimitEstimate<T> {
    let n = ys.len().saturating_sub(1);
    if n < 8 {
        return LimitEstimate::Infinite;
    }
    let (y1, y2, y3) = (ys[n / 4], ys[n / 2], ys[n]);
    let (d1, d2) = (y2 - y1, y3 - y2);
    if d2 <= T::zero() {
        return LimitEstimate::Finite(y3);
    }
    let q = d2 / d1;
    if !(q < lit(0.9)) || !(q > T::zero()) {
        return LimitEstimate::Infinite;
    }
    LimitEstimate::Finite(y3 + d2 * q / (T::one() - q))
}

/// Orbit of `z0` up to index `n` (at most [`DEFAULT_MAX_ITER`]).
pub fn extend_orbit<T: Real>(
    m: &SelfMap<T>,
    z0: Complex<T>,
    n: usize,
) -> Result<Orbit<T>, DynamicsError> {
    if n > DEFAULT_MAX_ITER {
        return Err(DynamicsError::IterationCap {
            requested: n,
            cap: DEFAULT_MAX_ITER,
        });
    }
    let mut orbit = Orbit::start(m, z0)?;
    orbit.extend_to(m, n)?;
    Ok(orbit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MapKind {
    EllipticAttracting,
    EllipticSuperattracting,
    Hyperbolic,
    ParabolicNonzeroStep,
    ParabolicZeroStep,
}

impl MapKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MapKind::EllipticAttracting => "elliptic-attracting",
            MapKind::EllipticSuperattracting => "elliptic-superattracting",
            MapKind::Hyperbolic => "hyperbolic",
            MapKind::ParabolicNonzeroStep => "parabolic-nonzero-step",
            MapKind::ParabolicZeroStep => "parabolic-zero-step",
        }
    }

    pub fn is_elliptic(self) -> bool {
        matches!(
            self,
            MapKind::EllipticAttracting | MapKind::EllipticSuperattracting
        )
    }
}

impl fmt::Display for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Hyperbolic step fell below the elliptic threshold.
    Converged,
    /// Modulus passed the escape radius.
    Escaped,
    /// Too few significant digits left.
    PrecisionFloor,
    IterationCap,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Converged => "converged",
            StopReason::Escaped => "escaped",
            StopReason::PrecisionFloor => "precision-floor",
            StopReason::IterationCap => "iteration-cap",
        }
    }
}

/// Thresholds for [`classify`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyConfig {
    pub max_iter: usize,
    /// Hyperbolic iff the dilation estimate exceeds `1 + delta`.
    pub delta: f64,
    /// Relative step decay over the last dyadic window below which the steps plateau.
    pub plateau_ratio: f64,
    pub eps_abs: f64,
    /// Zero-step needs `s_N < max(eps_abs, zero_step_rel · s_0)`.
    pub zero_step_rel: f64,
    /// Step below which an orbit counts as converged.
    pub elliptic_step: f64,
    pub superattracting: f64,
    /// Orbits stop when an iterate carries fewer digits.
    pub min_digits: f64,
    /// Tail statistics only use iterates with at least this many digits.
    pub window_digits: f64,
    /// `log(y_N/y_{3N/4}) / log(y_{N/2}/y_{N/4})` must exceed this for geometric growth.
    pub geometric_growth: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            max_iter: DEFAULT_MAX_ITER,
            delta: 1e-3,
            plateau_ratio: 0.01,
            eps_abs: 1e-6,
            zero_step_rel: 0.01,
            elliptic_step: 1e-9,
            superattracting: 1e-9,
            min_digits: 6.0,
            window_digits: 8.0,
            geometric_growth: 0.7,
        }
    }
}

/// Diagnostics attached to every classification.
#[derive(Debug, Clone, PartialEq)]
pub struct Confidence<T> {
    pub seeds: usize,
    pub iterations: usize,
    /// Last iterate used for tail statistics.
    pub tail_index: usize,
    pub stop: StopReason,
    pub tail_digits: T,
    /// Raw dilation estimate: geometric mean of `Δy_n` ratios over the last quarter.
    pub a_estimate: Option<T>,
    /// Largest difference of dilation estimates across seeds.
    pub a_spread: T,
    /// Ratio of log-growth over the last and second quarters; 1 for geometric growth.
    pub growth_ratio: Option<T>,
    /// `(s_{N/2} − s_N)/s_{N/2}`.
    pub step_decay: Option<T>,
    pub s0: T,
    pub s_last: T,
    pub newton_residual: Option<T>,
    pub max_step_increase: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification<T> {
    pub kind: MapKind,
    /// Denjoy-Wolff point in native coordinates.
    pub dw_point: ComplexPoint<T>,
    /// `c = 1/A` for boundary cases, `|φ'(p)|` for elliptic ones.
    pub multiplier: T,
    /// Model dilation; `None` for elliptic maps.
    pub a: Option<T>,
    pub s_inf: T,
    /// Sign of `lim x_n` in the chart.
    pub orientation: i8,
    pub l_inf: LimitEstimate<T>,
    /// Chart `H → domain` sending `∞` to the Denjoy-Wolff point (boundary cases).
    pub chart: Moebius<T>,
    pub confidence: Confidence<T>,
}

fn newton_fixed_point<T: Real>(m: &SelfMap<T>, start: Complex<T>) -> Option<(Complex<T>, T)> {
    let mut p = start;
    for _ in 0..60 {
        let f = m.apply(p).ok()? - p;
        let df = m.derivative(p).ok()? - Complex::one();
        if df.norm() < T::epsilon() {
            break;
        }
        let next = p - f / df;
        if !(next.re.is_finite() && next.im.is_finite()) {
            return None;
        }
        let moved = (next - p).norm();
        p = next;
        if moved <= T::epsilon() * (T::one() + p.norm()) {
            break;
        }
    }
    let residual = (m.apply(p).ok()? - p).norm();
    Some((p, residual))
}

fn try_elliptic<T: Real>(
    m: &SelfMap<T>,
    orbit: &Orbit<T>,
    cfg: &ClassifyConfig,
) -> Option<Classification<T>> {
    let last_step = *orbit.steps.last()?;
    if !(last_step < lit(1e-6)) {
        return None;
    }
    let last = orbit.native[orbit.last_index()];
    let (p, residual) = newton_fixed_point(m, last)?;
    if !m.domain().contains(p) || residual > lit::<T>(1e-10) * (T::one() + p.norm()) {
        return None;
    }
    let hp = m.to_half_plane(p)?;
    let gap = half_plane_distance(hp, orbit.points[orbit.last_index()]).ok()?;
    if !(gap < lit(1e-4)) {
        return None;
    }
    let multiplier = m.derivative(p).ok()?.norm();
    if !(multiplier < T::one()) {
        return None;
    }
    let kind = if multiplier < lit(cfg.superattracting) {
        MapKind::EllipticSuperattracting
    } else {
        MapKind::EllipticAttracting
    };
    Some(Classification {
        kind,
        dw_point: ComplexPoint::Finite(p),
        multiplier,
        a: None,
        s_inf: T::zero(),
        orientation: 1,
        l_inf: LimitEstimate::Finite(hp.im),
        chart: *m.chart(),
        confidence: Confidence {
            seeds: 1,
            iterations: orbit.last_index(),
            tail_index: orbit.last_index(),
            stop: StopReason::Converged,
            tail_digits: orbit.digits[orbit.last_index()],
            a_estimate: None,
            a_spread: T::zero(),
            growth_ratio: None,
            step_decay: None,
            s0: orbit.steps[0],
            s_last: last_step,
            newton_residual: Some(residual),
            max_step_increase: orbit.max_step_increase(),
        },
    })
}

/// Limit of a boundary-bound sequence, Aitken-accelerated when that stays consistent.
fn boundary_estimate<T: Real>(zs: &[Complex<T>]) -> Complex<T> {
    let n = zs.len() - 1;
    let last = zs[n];
    if n < 2 {
        return last;
    }
    let d1 = zs[n] - zs[n - 1];
    let d2 = zs[n] - zs[n - 1] * lit::<T>(2.0) + zs[n - 2];
    if d2.norm() <= T::epsilon() * last.norm() {
        return last;
    }
    let accel = last - d1 * d1 / d2;
    let moved = (accel - last).norm();
    if accel.re.is_finite() && accel.im.is_finite() && moved <= lit::<T>(1e4) * d1.norm() {
        accel
    } else {
        last
    }
}

/// Chart `H → domain` sending `∞` to the boundary point estimated from `p`.
fn boundary_chart<T: Real>(
    domain: Domain,
    z0: Complex<T>,
    last: Complex<T>,
    p: Complex<T>,
) -> Result<(Moebius<T>, ComplexPoint<T>), DynamicsError> {
    let zero = Complex::zero();
    let one = Complex::one();
    match domain {
        Domain::HalfPlane => {
            let x0 = Complex::new(p.re, T::zero());
            // Julia's lemma: an orbit tending to x0 stays in the horodisk at x0 through z0.
            let horo = |z: Complex<T>| (z - x0).norm_sqr() / z.im;
            let escapes = last.norm() > lit::<T>(1e3) * (T::one() + z0.norm());
            if escapes || horo(last) > lit::<T>(2.0) * horo(z0) {
                Ok((Moebius::identity(), ComplexPoint::Infinity))
            } else {
                // z ↦ x0 − 1/z
                Ok((Moebius::new(x0, -one, one, zero)?, ComplexPoint::Finite(x0)))
            }
        }
        Domain::Disk => {
            let zeta = p / p.norm();
            let i = Complex::i();
            // z ↦ ζ (z − i)/(z + i)
            Ok((
                Moebius::new(zeta, -i * zeta, one, i)?,
                ComplexPoint::Finite(zeta),
            ))
        }
    }
}

fn boundary_case<T: Real>(
    m: &SelfMap<T>,
    orbit: &Orbit<T>,
    stop: StopReason,
    cfg: &ClassifyConfig,
) -> Result<Classification<T>, DynamicsError> {
    let window = lit::<T>(cfg.window_digits);
    let n = (0..=orbit.last_index())
        .rev()
        .find(|&k| orbit.digits[k] >= window)
        .unwrap_or(0);
    if n < 16 {
        return Err(DynamicsError::Inconclusive(format!(
            "only {n} iterates carry {} digits",
            cfg.window_digits
        )));
    }
    let (chart, dw) = boundary_chart(
        m.domain(),
        orbit.z0,
        orbit.native[n],
        boundary_estimate(&orbit.native[..=n]),
    )?;
    let charted = m.with_chart(chart)?;
    let pts = orbit.native[..=n]
        .iter()
        .map(|&z| charted.to_half_plane(z))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| {
            DynamicsError::Inconclusive("orbit reached the Denjoy-Wolff point numerically".into())
        })?;
    let ys: Vec<T> = pts.iter().map(|z| z.im).collect();
    let q = n / 4;
    let r1 = (ys[n] / ys[n - q]).ln();
    let r2 = (ys[n - 2 * q] / ys[n - 3 * q]).ln();
    let (inc_last, inc_first) = (ys[n] - ys[n - 1], ys[n - q] - ys[n - q - 1]);
    let a_est = if inc_last > T::zero() && inc_first > T::zero() {
        (inc_last / inc_first).powf(lit::<T>(q as f64).recip())
    } else {
        (r1 / lit(q as f64)).exp()
    };
    let growth = if r2 > T::zero() { r1 / r2 } else { T::zero() };
    let orientation = if pts[n].re >= T::zero() { 1 } else { -1 };
    let s = &orbit.steps;
    let s0 = s[0];
    let s_last = s[n - 1];
    let s_half = s[n / 2 - 1];
    let decay = (s_half - s_last) / s_half;

    let mut out = Classification {
        kind: MapKind::Hyperbolic,
        dw_point: dw,
        multiplier: T::one(),
        a: Some(T::one()),
        s_inf: s_last,
        orientation,
        l_inf: l_inf_from(&ys),
        chart,
        confidence: Confidence {
            seeds: 1,
            iterations: orbit.last_index(),
            tail_index: n,
            stop,
            tail_digits: orbit.digits[n],
            a_estimate: Some(a_est),
            a_spread: T::zero(),
            growth_ratio: Some(growth),
            step_decay: Some(decay),
            s0,
            s_last,
            newton_residual: None,
            max_step_increase: orbit.max_step_increase(),
        },
    };
    if a_est > T::one() + lit(cfg.delta) && growth > lit(cfg.geometric_growth) {
        out.kind = MapKind::Hyperbolic;
        out.a = Some(a_est);
        out.multiplier = a_est.recip();
        out.l_inf = LimitEstimate::Infinite;
    } else if decay < lit(cfg.plateau_ratio) {
        out.kind = MapKind::ParabolicNonzeroStep;
    } else if s_last < lit::<T>(cfg.eps_abs).max(lit::<T>(cfg.zero_step_rel) * s0) {
        out.kind = MapKind::ParabolicZeroStep;
        out.s_inf = T::zero();
    } else {
        return Err(DynamicsError::Inconclusive(format!(
            "parabolic orbit with step decay {} and final step {} after {n} iterates",
            to_f64(decay),
            to_f64(s_last)
        )));
    }
    Ok(out)
}

fn classify_seed<T: Real>(
    m: &SelfMap<T>,
    seed: Complex<T>,
    cfg: &ClassifyConfig,
) -> Result<Classification<T>, DynamicsError> {
    let mut orbit = Orbit::start(m, seed)?;
    let escape = escape_radius::<T>();
    let stop = loop {
        if orbit.last_index() >= cfg.max_iter {
            break StopReason::IterationCap;
        }
        match orbit.push(m) {
            Ok(()) => {}
            Err(DynamicsError::PrecisionLoss { .. }) => break StopReason::PrecisionFloor,
            Err(e) => return Err(e),
        }
        let k = orbit.last_index();
        if orbit.steps[k - 1] < lit(cfg.elliptic_step) {
            break StopReason::Converged;
        }
        if orbit.digits[k] < lit(cfg.min_digits) {
            break StopReason::PrecisionFloor;
        }
        let z = orbit.native[k];
        if z.norm() > escape || (m.domain() == Domain::HalfPlane && z.im < escape.recip()) {
            break StopReason::Escaped;
        }
    };
    if orbit.last_index() == 0 {
        return Err(DynamicsError::PrecisionLoss { index: 1 });
    }
    if let Some(c) = try_elliptic(m, &orbit, cfg) {
        return Ok(c);
    }
    boundary_case(m, &orbit, stop, cfg)
}

fn same_point<T: Real>(
    domain: Domain,
    a: ComplexPoint<T>,
    b: ComplexPoint<T>,
    elliptic: bool,
) -> bool {
    match (a, b) {
        (ComplexPoint::Infinity, ComplexPoint::Infinity) => true,
        (ComplexPoint::Finite(p), ComplexPoint::Finite(q)) => {
            let scale = match domain {
                Domain::Disk => T::one(),
                Domain::HalfPlane => T::one() + p.norm().max(q.norm()),
            };
            let tol = if elliptic {
                lit::<T>(1e-8)
            } else {
                lit::<T>(1e-3)
            };
            (p - q).norm() <= tol * scale
        }
        _ => false,
    }
}

/// Classifies `m` from each seed and merges the verdicts in seed order.
pub fn classify<T: Real>(
    m: &SelfMap<T>,
    seeds: &[Complex<T>],
    cfg: &ClassifyConfig,
) -> Result<Classification<T>, DynamicsError> {
    if seeds.is_empty() {
        return Err(DynamicsError::NoSeeds);
    }
    if m.is_automorphism() {
        return Err(DynamicsError::Automorphism);
    }
    let verdicts = seeds
        .iter()
        .map(|&z| classify_seed(m, z, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let mut first = verdicts[0].clone();
    let mut spread = T::zero();
    for (k, v) in verdicts.iter().enumerate().skip(1) {
        if v.kind != first.kind {
            return Err(DynamicsError::InconsistentSeeds(format!(
                "seed 0 gives {}, seed {k} gives {}",
                first.kind, v.kind
            )));
        }
        if !same_point(
            m.domain(),
            first.dw_point,
            v.dw_point,
            first.kind.is_elliptic(),
        ) {
            return Err(DynamicsError::InconsistentSeeds(format!(
                "seed 0 converges to {}, seed {k} to {}",
                first.dw_point, v.dw_point
            )));
        }
        if let (Some(a), Some(b)) = (first.confidence.a_estimate, v.confidence.a_estimate) {
            spread = spread.max((a - b).abs());
        }
    }
    first.confidence.seeds = seeds.len();
    first.confidence.a_spread = spread;
    Ok(first)
}

/// Limit of `φ(iy)/(iy)` in chart coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierEstimate<T> {
    pub a: T,
    /// Largest deviation among the last three samples.
    pub spread: T,
    /// `(y, Re φ(iy)/(iy))` pairs.
    pub samples: Vec<(T, T)>,
    /// Difference from an orbit-ratio estimate, when one was supplied.
    pub orbit_discrepancy: Option<T>,
}

/// Angular derivative at `∞`, from `φ(iy)/(iy)` for `y = 10², …, 10⁸`, Richardson-extrapolated.
pub fn multiplier_at_infinity<T: Real>(
    m: &SelfMap<T>,
    orbit_estimate: Option<T>,
) -> Result<MultiplierEstimate<T>, DynamicsError> {
    let mut quotients = Vec::new();
    for k in 2..=8 {
        let y = lit::<T>(10f64.powi(k));
        let iy = Complex::new(T::zero(), y);
        let v = m
            .half_plane_map(iy)
            .map_err(|source| DynamicsError::Eval { index: 0, source })?;
        quotients.push((y, v / iy));
    }
    let last = quotients[quotients.len() - 1].1;
    let spread = quotients[quotients.len() - 3..]
        .iter()
        .map(|(_, q)| (*q - last).norm())
        .fold(T::zero(), T::max);
    if spread > lit(1e-3) {
        return Err(DynamicsError::UnstableLimit {
            spread: to_f64(spread),
            limit: 1e-3,
        });
    }
    // q(y) = A + c/y + O(1/y²): one Richardson step on the last two samples
    let prev = quotients[quotients.len() - 2].1;
    let a = (last.re * lit(10.0) - prev.re) / lit(9.0);
    Ok(MultiplierEstimate {
        a,
        spread,
        samples: quotients.iter().map(|(y, q)| (*y, q.re)).collect(),
        orbit_discrepancy: orbit_estimate.map(|o| (o - a).abs()),
    })
}
