//! Renormalization engines for the disk model (`g`, `α(w) = Aw + b`) and the
//! planar model (`h`, `z ↦ z + 1`), with standard forms and univalence and
//! covering probes.

use std::fmt;

use num_complex::Complex;
use thiserror::Error;

use crate::dynamics::{Classification, DynamicsError, MapKind, Orbit, SelfMap};
use crate::geometry::{
    curve_winding, half_plane_distance, GeometryError, HalfPlanePoint, HyperbolicDisk,
};
use crate::mapdsl::{Domain, EvalError};
use crate::scalar::{lit, significant_digits, to_f64, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Model {
    /// `g ∘ φ = α ∘ g` with `g` valued in `H`.
    TheoremA,
    /// `h ∘ φ = h + 1` with `h` valued in `C`.
    TheoremB,
}

impl Model {
    pub fn as_str(self) -> &'static str {
        match self {
            Model::TheoremA => "theoremA",
            Model::TheoremB => "theoremB",
        }
    }

    /// Engine matching a classification, if any.
    pub fn for_kind(kind: MapKind) -> Option<Model> {
        match kind {
            MapKind::Hyperbolic | MapKind::ParabolicNonzeroStep => Some(Model::TheoremA),
            MapKind::ParabolicZeroStep => Some(Model::TheoremB),
            _ => None,
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "theoremA" | "A" => Ok(Model::TheoremA),
            "theoremB" | "B" => Ok(Model::TheoremB),
            other => Err(format!(
                "unknown model `{other}` (expected theoremA or theoremB)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RenormError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("{engine} does not apply to a {kind} map; use {hint}")]
    ModelMismatch {
        engine: Model,
        kind: MapKind,
        hint: &'static str,
    },
    #[error("no Cauchy convergence after {iterations} iterations (last gap {last_gap})")]
    NonConvergence {
        iterations: usize,
        last_gap: f64,
        trace: Vec<f64>,
    },
    #[error("precision floor at iteration {iteration}: {digits} digits left")]
    PrecisionFloor { iteration: usize, digits: f64 },
    #[error("functional-equation residual {residual} exceeds {tol}")]
    Residual { residual: f64, tol: f64 },
    #[error("evaluation failed: {0}")]
    Eval(EvalError),
    #[error("cannot standardize: A = 1 and |b| = {b} is below {tol}")]
    CannotStandardize { b: f64, tol: f64 },
    #[error("result carries no limit evaluator")]
    NoEvaluator,
    #[error("invalid region: {0}")]
    InvalidRegion(String),
}

impl From<EvalError> for RenormError {
    fn from(e: EvalError) -> Self {
        RenormError::Eval(e)
    }
}

/// Engine settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenormConfig {
    /// Cauchy tolerance in the codomain metric.
    pub tol: f64,
    /// Number of consecutive gaps that must stay below `tol`.
    pub stability: usize,
    pub max_iter: usize,
    pub res_tol: f64,
    /// Minimum significant digits before a precision error is raised.
    pub min_digits: f64,
}

impl RenormConfig {
    pub fn theorem_a() -> Self {
        RenormConfig {
            tol: 1e-8,
            stability: 5,
            max_iter: crate::dynamics::DEFAULT_MAX_ITER,
            res_tol: 1e-6,
            min_digits: 6.0,
        }
    }

    pub fn theorem_b() -> Self {
        RenormConfig {
            tol: 1e-9,
            res_tol: 1e-8,
            ..Self::theorem_a()
        }
    }

    pub fn for_model(model: Model) -> Self {
        match model {
            Model::TheoremA => Self::theorem_a(),
            Model::TheoremB => Self::theorem_b(),
        }
    }
}

/// Significant-digit bookkeeping for a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionReport<T> {
    /// Largest cancellation `log10(|φ_n(z)| / |φ_n(z) − x_n|)` seen on the grid.
    pub digits_lost: T,
    /// Smallest number of significant digits left at any iteration.
    pub digits_remaining: T,
}

/// Evaluates `g_M` or `h_M` at arbitrary points for a fixed depth `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitEvaluator<T> {
    map: SelfMap<T>,
    model: Model,
    depth: usize,
    z_m: Complex<T>,
    z_m1: Complex<T>,
}

impl<T: Real> LimitEvaluator<T> {
    pub fn model(&self) -> Model {
        self.model
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn map(&self) -> &SelfMap<T> {
        &self.map
    }

    fn normalize(&self, w: Complex<T>) -> Complex<T> {
        match self.model {
            Model::TheoremA => (w - Complex::new(self.z_m.re, T::zero())) / self.z_m.im,
            Model::TheoremB => (w - self.z_m) / (self.z_m1 - self.z_m),
        }
    }

    /// Value at a native point.
    pub fn eval(&self, z: Complex<T>) -> Result<Complex<T>, RenormError> {
        let it = self.map.iterate(z, self.depth)?;
        let w = self
            .map
            .to_half_plane(it[self.depth])
            .ok_or(DynamicsError::PrecisionLoss { index: self.depth })?;
        Ok(self.normalize(w))
    }

    /// Value at a point given in chart coordinates.
    pub fn eval_chart(&self, z: Complex<T>) -> Result<Complex<T>, RenormError> {
        let native = self
            .map
            .from_half_plane(z)
            .ok_or(DynamicsError::PrecisionLoss { index: 0 })?;
        self.eval(native)
    }
}

/// Function probed by [`univalence_probe`]; points are in chart coordinates.
pub trait LimitFunction<T> {
    fn eval_chart(&self, z: Complex<T>) -> Result<Complex<T>, RenormError>;
}

impl<T: Real> LimitFunction<T> for LimitEvaluator<T> {
    fn eval_chart(&self, z: Complex<T>) -> Result<Complex<T>, RenormError> {
        LimitEvaluator::eval_chart(self, z)
    }
}

impl<T: Real, F: Fn(Complex<T>) -> Complex<T>> LimitFunction<T> for F {
    fn eval_chart(&self, z: Complex<T>) -> Result<Complex<T>, RenormError> {
        Ok(self(z))
    }
}

/// Sampled limit function and model coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiconjResult<T> {
    pub model: Model,
    pub kind: MapKind,
    /// Probe points, native coordinates.
    pub grid: Vec<Complex<T>>,
    pub values: Vec<Complex<T>>,
    /// Values at `φ(grid)`.
    pub image_values: Vec<Complex<T>>,
    pub a: T,
    /// Translation of `α`; `None` for the planar model.
    pub b: Option<T>,
    /// Spread of `b_n` over the last quarter of iterations.
    pub b_spread: Option<T>,
    pub base_point: Complex<T>,
    pub iterations: usize,
    pub sup_cauchy_gap: T,
    /// `sup_grid d(f_n, f_{n−1})` for `n = 1..=iterations`.
    pub gap_trace: Vec<T>,
    /// Extrapolated distance from the limit, when the gap decay allows one.
    pub error_estimate: Option<T>,
    pub residual: T,
    /// `ρ_H(g(z0), i)` or `|h(z0)|`.
    pub base_value_error: T,
    pub orientation: i8,
    pub precision: PrecisionReport<T>,
    pub evaluator: Option<LimitEvaluator<T>>,
}

impl<T: Real> SemiconjResult<T> {
    pub fn evaluator(&self) -> Result<&LimitEvaluator<T>, RenormError> {
        self.evaluator.as_ref().ok_or(RenormError::NoEvaluator)
    }

    /// Model map `α` (or `z ↦ z + 1`).
    pub fn model_map(&self, w: Complex<T>) -> Complex<T> {
        match self.model {
            Model::TheoremA => w * self.a + Complex::new(self.b.unwrap_or(T::zero()), T::zero()),
            Model::TheoremB => w + Complex::new(T::one(), T::zero()),
        }
    }

    /// Distance in the codomain: hyperbolic for the disk model, Euclidean for the planar one.
    pub fn codomain_distance(&self, u: Complex<T>, v: Complex<T>) -> Result<T, RenormError> {
        codomain_distance(self.model, u, v)
    }
}

pub fn codomain_distance<T: Real>(
    model: Model,
    u: Complex<T>,
    v: Complex<T>,
) -> Result<T, RenormError> {
    match model {
        Model::TheoremA => Ok(half_plane_distance(u, v)?),
        Model::TheoremB => Ok((u - v).norm()),
    }
}

/// 5×5 lattice of points within hyperbolic distance 2 of `z0`, centred on `z0`.
pub fn default_grid<T: Real>(domain: Domain, z0: Complex<T>) -> Vec<Complex<T>> {
    let steps = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let scale = 1f64.tanh() / 2f64.sqrt();
    let mut out = Vec::with_capacity(25);
    for &x in &steps {
        for &y in &steps {
            let w = Complex::new(lit::<T>(scale * x), lit::<T>(scale * y));
            let p = match domain {
                Domain::HalfPlane => {
                    let one = Complex::new(T::one(), T::zero());
                    let zeta = Complex::<T>::i() * (one + w) / (one - w);
                    Complex::new(z0.re, T::zero()) + zeta * z0.im
                }
                Domain::Disk => (w + z0) / (Complex::new(T::one(), T::zero()) + z0.conj() * w),
            };
            out.push(p);
        }
    }
    out
}

fn error_estimate<T: Real>(gaps: &[T]) -> Option<T> {
    let n = gaps.len();
    if n < 4 {
        return None;
    }
    let last = gaps[n - 1];
    if last.is_zero() {
        return Some(T::zero());
    }
    let half = gaps[n / 2 - 1];
    if !(half > T::zero()) {
        return None;
    }
    let p = (half / last).log2() / lit::<T>(n as f64 / (n / 2) as f64).log2();
    if p > lit(8.0) {
        let q = last / gaps[n - 2];
        (q < T::one() && q > T::zero()).then(|| last * q / (T::one() - q))
    } else if p > lit(1.05) {
        Some(last * lit(n as f64) / (p - T::one()))
    } else {
        None
    }
}

fn check_engine(engine: Model, class: &Classification<impl Real>) -> Result<(), RenormError> {
    let kind = class.kind;
    match (engine, kind) {
        (_, MapKind::EllipticAttracting | MapKind::EllipticSuperattracting) => {
            Err(RenormError::ModelMismatch {
                engine,
                kind,
                hint: "an engine for boundary Denjoy-Wolff points only",
            })
        }
        (Model::TheoremA, MapKind::ParabolicZeroStep) => Err(RenormError::ModelMismatch {
            engine,
            kind,
            hint: "theoremB (planar model)",
        }),
        (Model::TheoremB, MapKind::Hyperbolic | MapKind::ParabolicNonzeroStep) => {
            Err(RenormError::ModelMismatch {
                engine,
                kind,
                hint: "theoremA (disk model)",
            })
        }
        _ => Ok(()),
    }
}

fn run_engine<T: Real>(
    engine: Model,
    m: &SelfMap<T>,
    class: &Classification<T>,
    z0: Complex<T>,
    grid: &[Complex<T>],
    cfg: &RenormConfig,
) -> Result<SemiconjResult<T>, RenormError> {
    check_engine(engine, class)?;
    let charted = m.with_chart(class.chart)?;
    for &z in grid {
        charted.check_interior(z)?;
    }
    let mut orbit = Orbit::start(&charted, z0)?;
    orbit.extend_to(&charted, 1)?;
    let ten = lit::<T>(10.0);
    let sig = significant_digits::<T>();
    let min_digits = lit::<T>(cfg.min_digits);
    let tol = lit::<T>(cfg.tol);

    let normalize = |orbit: &Orbit<T>, n: usize, w: Complex<T>| -> Complex<T> {
        let zn = orbit.points[n];
        match engine {
            Model::TheoremA => (w - Complex::new(zn.re, T::zero())) / zn.im,
            Model::TheoremB => (w - zn) / (orbit.points[n + 1] - zn),
        }
    };
    let lost = |orbit: &Orbit<T>, n: usize, w: Complex<T>| -> T {
        let shift = match engine {
            Model::TheoremA => Complex::new(orbit.points[n].re, T::zero()),
            Model::TheoremB => orbit.points[n],
        };
        let diff = (w - shift).norm();
        if diff > T::zero() {
            (w.norm() / diff).max(T::one()).log(ten)
        } else {
            T::zero()
        }
    };

    let mut native: Vec<Complex<T>> = grid.to_vec();
    let to_chart = |z: Complex<T>, index: usize| {
        charted
            .to_half_plane(z)
            .ok_or(RenormError::Dynamics(DynamicsError::PrecisionLoss {
                index,
            }))
    };
    let mut values = native
        .iter()
        .map(|&z| to_chart(z, 0).map(|w| normalize(&orbit, 0, w)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut gaps: Vec<T> = Vec::new();
    let mut digits_lost = T::zero();
    let mut digits_remaining = sig;
    let mut below = 0usize;
    let mut n = 0usize;
    while below < cfg.stability {
        if n >= cfg.max_iter {
            return Err(RenormError::NonConvergence {
                iterations: n,
                last_gap: gaps.last().map(|g| to_f64(*g)).unwrap_or(f64::NAN),
                trace: gaps.iter().map(|g| to_f64(*g)).collect(),
            });
        }
        n += 1;
        orbit.extend_to(&charted, n + 1)?;
        let mut gap = T::zero();
        for (k, z) in native.iter_mut().enumerate() {
            *z = charted
                .apply(*z)
                .map_err(|source| DynamicsError::Eval { index: n, source })?;
            charted
                .check_interior(*z)
                .map_err(|_| DynamicsError::PrecisionLoss { index: n })?;
            let w = to_chart(*z, n)?;
            let loss = lost(&orbit, n, w);
            digits_lost = digits_lost.max(loss);
            let boundary = match charted.domain() {
                Domain::Disk => -(T::one() - z.norm()).log(ten),
                Domain::HalfPlane => T::zero(),
            };
            let left = sig - boundary - loss;
            digits_remaining = digits_remaining.min(left);
            if left < min_digits {
                return Err(RenormError::PrecisionFloor {
                    iteration: n,
                    digits: to_f64(left),
                });
            }
            let v = normalize(&orbit, n, w);
            gap = gap.max(codomain_distance(engine, v, values[k])?);
            values[k] = v;
        }
        gaps.push(gap);
        below = if gap < tol { below + 1 } else { 0 };
    }

    let big_n = n;
    let mut image_values = Vec::with_capacity(native.len());
    for &z in &native {
        let next = charted.apply(z).map_err(|source| DynamicsError::Eval {
            index: big_n + 1,
            source,
        })?;
        image_values.push(normalize(&orbit, big_n, to_chart(next, big_n + 1)?));
    }
    let pts = &orbit.points;
    let (a, b, b_spread) = match engine {
        Model::TheoremA => {
            let a = match class.kind {
                MapKind::Hyperbolic => class.a.unwrap_or(T::one()),
                _ => T::one(),
            };
            let b_at = |k: usize| (pts[k + 1].re - pts[k].re) / pts[k].im;
            let tail: Vec<T> = (big_n - big_n / 4..=big_n).map(b_at).collect();
            let hi = tail.iter().cloned().fold(T::neg_infinity(), T::max);
            let lo = tail.iter().cloned().fold(T::infinity(), T::min);
            (a, Some(b_at(big_n)), Some(hi - lo))
        }
        Model::TheoremB => (T::one(), None, None),
    };

    let mut result = SemiconjResult {
        model: engine,
        kind: class.kind,
        grid: grid.to_vec(),
        values,
        image_values,
        a,
        b,
        b_spread,
        base_point: z0,
        iterations: big_n,
        sup_cauchy_gap: *gaps.last().unwrap_or(&T::zero()),
        error_estimate: error_estimate(&gaps),
        gap_trace: gaps,
        residual: T::zero(),
        base_value_error: T::zero(),
        orientation: class.orientation,
        precision: PrecisionReport {
            digits_lost,
            digits_remaining,
        },
        evaluator: Some(LimitEvaluator {
            map: charted.clone(),
            model: engine,
            depth: big_n,
            z_m: pts[big_n],
            z_m1: pts[big_n + 1],
        }),
    };
    result.residual = functional_residual(&result)?;
    let base = normalize(&orbit, big_n, pts[big_n]);
    result.base_value_error = match engine {
        Model::TheoremA => half_plane_distance(base, Complex::i())?,
        Model::TheoremB => base.norm(),
    };
    if result.residual > lit(cfg.res_tol) {
        return Err(RenormError::Residual {
            residual: to_f64(result.residual),
            tol: cfg.res_tol,
        });
    }
    Ok(result)
}

/// `sup_grid d(f(φ(z)), model(f(z)))` in the codomain metric.
pub fn functional_residual<T: Real>(r: &SemiconjResult<T>) -> Result<T, RenormError> {
    let mut sup = T::zero();
    for (v, iv) in r.values.iter().zip(&r.image_values) {
        sup = sup.max(r.codomain_distance(*iv, r.model_map(*v))?);
    }
    Ok(sup)
}

/// Limit `g = lim (φ_n − x_n)/y_n` sampled on `grid`, with `g(z0) = i`.
pub fn pommerenke_g<T: Real>(
    m: &SelfMap<T>,
    class: &Classification<T>,
    z0: Complex<T>,
    grid: &[Complex<T>],
    cfg: &RenormConfig,
) -> Result<SemiconjResult<T>, RenormError> {
    run_engine(Model::TheoremA, m, class, z0, grid, cfg)
}

/// Limit `h = lim (φ_n − z_n)/(z_{n+1} − z_n)` sampled on `grid`, with `h(z0) = 0`.
pub fn baker_pommerenke_h<T: Real>(
    m: &SelfMap<T>,
    class: &Classification<T>,
    z0: Complex<T>,
    grid: &[Complex<T>],
    cfg: &RenormConfig,
) -> Result<SemiconjResult<T>, RenormError> {
    run_engine(Model::TheoremB, m, class, z0, grid, cfg)
}

/// Runs whichever engine the classification calls for.
pub fn semiconjugate<T: Real>(
    m: &SelfMap<T>,
    class: &Classification<T>,
    z0: Complex<T>,
    grid: &[Complex<T>],
    cfg: Option<&RenormConfig>,
) -> Result<SemiconjResult<T>, RenormError> {
    let model = Model::for_kind(class.kind).ok_or(RenormError::ModelMismatch {
        engine: Model::TheoremA,
        kind: class.kind,
        hint: "an engine for boundary Denjoy-Wolff points only",
    })?;
    let default = RenormConfig::for_model(model);
    run_engine(model, m, class, z0, grid, cfg.unwrap_or(&default))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StandardModel<T> {
    /// `z ↦ Az`.
    Dilation(T),
    /// `z ↦ z + sign` on `H`.
    Translation(i8),
    /// `z ↦ z + 1` on `C`.
    PlanarTranslation,
}

impl<T: Real> fmt::Display for StandardModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StandardModel::Dilation(a) => write!(f, "z -> {a}*z"),
            StandardModel::Translation(s) if *s < 0 => write!(f, "z -> z-1"),
            StandardModel::Translation(_) => write!(f, "z -> z+1"),
            StandardModel::PlanarTranslation => write!(f, "z -> z+1 (planar)"),
        }
    }
}

/// Values of `β⁻¹ ∘ g` and the standardized model.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardForm<T> {
    pub model: StandardModel<T>,
    /// `β⁻¹(u) = scale·u + shift`.
    pub scale: T,
    pub shift: T,
    pub values: Vec<Complex<T>>,
    pub image_values: Vec<Complex<T>>,
    pub residual: T,
}

/// Brings a result to the models `z ↦ Az`, `z ↦ z ± 1` or planar `z ↦ z + 1`.
pub fn standard_form<T: Real>(
    r: &SemiconjResult<T>,
    tol: T,
) -> Result<StandardForm<T>, RenormError> {
    let b = r.b.unwrap_or(T::zero());
    let (model, scale, shift) = match r.model {
        Model::TheoremB => (StandardModel::PlanarTranslation, T::one(), T::zero()),
        Model::TheoremA if r.a > T::one() + tol => {
            (StandardModel::Dilation(r.a), T::one(), b / (r.a - T::one()))
        }
        Model::TheoremA => {
            if b.abs() < tol {
                return Err(RenormError::CannotStandardize {
                    b: to_f64(b),
                    tol: to_f64(tol),
                });
            }
            let sign = if b > T::zero() { 1 } else { -1 };
            (StandardModel::Translation(sign), b.abs().recip(), T::zero())
        }
    };
    let map = |u: &Complex<T>| *u * scale + Complex::new(shift, T::zero());
    let values: Vec<Complex<T>> = r.values.iter().map(map).collect();
    let image_values: Vec<Complex<T>> = r.image_values.iter().map(map).collect();
    let step = |u: Complex<T>| match model {
        StandardModel::Dilation(a) => u * a,
        StandardModel::Translation(s) => u + Complex::new(lit::<T>(s as f64), T::zero()),
        StandardModel::PlanarTranslation => u + Complex::new(T::one(), T::zero()),
    };
    let mut residual = T::zero();
    for (v, iv) in values.iter().zip(&image_values) {
        residual = residual.max(codomain_distance(r.model, *iv, step(*v))?);
    }
    Ok(StandardForm {
        model,
        scale,
        shift,
        values,
        image_values,
        residual,
    })
}

/// Disk of a univalence region, in chart coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionDisk<T> {
    pub index: usize,
    pub center: Complex<T>,
    pub radius: T,
}

impl<T: Real> RegionDisk<T> {
    pub fn boundary_point(&self, t: T) -> Complex<T> {
        self.center + Complex::from_polar(self.radius, T::TAU() * t)
    }
}

/// Union of orbit disks `Δ(z_n, ρ)` (disk model) or `z_n + (z_{n+1} − z_n)·R·D` (planar model).
#[derive(Debug, Clone, PartialEq)]
pub struct UnivalenceRegion<T> {
    pub model: Model,
    /// Hyperbolic radius (disk model) or Euclidean factor `R` (planar model).
    pub rho: T,
    pub start_index: usize,
    pub disks: Vec<RegionDisk<T>>,
}

fn orbit_disk<T: Real>(
    model: Model,
    rho: T,
    index: usize,
    zn: Complex<T>,
    zn1: Complex<T>,
) -> Result<RegionDisk<T>, RenormError> {
    match model {
        Model::TheoremA => {
            let d = HyperbolicDisk::new(HalfPlanePoint::new(zn)?, rho)?;
            Ok(RegionDisk {
                index,
                center: d.euclidean_center(),
                radius: d.euclidean_radius(),
            })
        }
        Model::TheoremB => {
            let radius = rho * (zn1 - zn).norm();
            if zn.im - radius <= T::zero() {
                return Err(RenormError::InvalidRegion(format!(
                    "disk {index} of radius {} leaves the half-plane",
                    to_f64(radius)
                )));
            }
            Ok(RegionDisk {
                index,
                center: zn,
                radius,
            })
        }
    }
}

fn chart_orbit<T: Real>(
    ev: &LimitEvaluator<T>,
    z0: Complex<T>,
    n: usize,
) -> Result<Vec<Complex<T>>, RenormError> {
    let m = ev.map();
    m.iterate(z0, n)?
        .into_iter()
        .enumerate()
        .map(|(index, z)| {
            m.to_half_plane(z)
                .ok_or(RenormError::Dynamics(DynamicsError::PrecisionLoss {
                    index,
                }))
        })
        .collect()
}

impl<T: Real> UnivalenceRegion<T> {
    /// Disks with indices `start..start + count` along the base-point orbit.
    pub fn orbit_disks(
        r: &SemiconjResult<T>,
        rho: T,
        start: usize,
        count: usize,
    ) -> Result<Self, RenormError> {
        if !(rho > T::zero()) || count == 0 {
            return Err(RenormError::InvalidRegion(
                "rho and count must be positive".into(),
            ));
        }
        let pts = chart_orbit(r.evaluator()?, r.base_point, start + count)?;
        let disks = (start..start + count)
            .map(|n| orbit_disk(r.model, rho, n, pts[n], pts[n + 1]))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(UnivalenceRegion {
            model: r.model,
            rho,
            start_index: start,
            disks,
        })
    }

    /// `ρ = 1` (disk model) or `R = 5` (planar model), from the first index whose disk lies in `H`.
    pub fn default_for(r: &SemiconjResult<T>) -> Result<Self, RenormError> {
        let rho = match r.model {
            Model::TheoremA => T::one(),
            Model::TheoremB => lit(5.0),
        };
        let pts = chart_orbit(r.evaluator()?, r.base_point, 1000)?;
        let start = (1..999)
            .find(|&n| orbit_disk(r.model, rho, n, pts[n], pts[n + 1]).is_ok())
            .ok_or_else(|| {
                RenormError::InvalidRegion("no orbit disk fits in the half-plane".into())
            })?;
        Self::orbit_disks(r, rho, start, 8)
    }

    pub fn disk(&self, r: &SemiconjResult<T>, n: usize) -> Result<RegionDisk<T>, RenormError> {
        let pts = chart_orbit(r.evaluator()?, r.base_point, n + 1)?;
        orbit_disk(self.model, self.rho, n, pts[n], pts[n + 1])
    }
}

fn radical_inverse(mut n: usize, base: usize) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while n > 0 {
        out += (n % base) as f64 * inv;
        n /= base;
        inv /= base as f64;
    }
    out
}

fn disk_sample<T: Real>(d: &RegionDisk<T>, k: usize) -> Complex<T> {
    let r = 0.95 * radical_inverse(k + 1, 2).sqrt();
    let t = std::f64::consts::TAU * radical_inverse(k + 1, 3);
    d.center + Complex::from_polar(lit::<T>(r), lit::<T>(t)) * d.radius
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnivalenceReport<T> {
    pub pairs: usize,
    /// Smallest `d(f(z), f(w)) / ρ_H(z, w)`, codomain metric on top.
    pub min_ratio: T,
    /// Distinct pairs (chart coordinates) with coincident values.
    pub collisions: Vec<(Complex<T>, Complex<T>)>,
    pub pass: bool,
}

/// Samples pairs within and across the region's disks and looks for collisions of `f`.
pub fn univalence_probe<T: Real, F: LimitFunction<T> + ?Sized>(
    f: &F,
    region: &UnivalenceRegion<T>,
    samples: usize,
) -> Result<UnivalenceReport<T>, RenormError> {
    let nd = region.disks.len();
    if nd == 0 {
        return Err(RenormError::InvalidRegion("region has no disks".into()));
    }
    let per_disk = (2 * samples / nd).max(8);
    let mut points = Vec::with_capacity(nd);
    for d in &region.disks {
        let mut pts = Vec::with_capacity(per_disk);
        for k in 0..per_disk {
            let z = disk_sample(d, k);
            pts.push((z, f.eval_chart(z)?));
        }
        points.push(pts);
    }
    let mut min_ratio = T::infinity();
    let mut collisions = Vec::new();
    for p in 0..samples {
        let i = p % nd;
        let a = (p / nd) % per_disk;
        let (j, b) = if p % 2 == 0 || nd == 1 {
            (i, (a + 1 + p / (2 * nd)) % per_disk)
        } else {
            ((i + 1 + p / (2 * nd)) % nd, (a * 7 + 3) % per_disk)
        };
        let (j, b) = if j == i && b == a {
            (i, (a + 1) % per_disk)
        } else {
            (j, b)
        };
        let (z, fz) = points[i][a];
        let (w, fw) = points[j][b];
        let dz = half_plane_distance(z, w)?;
        if dz <= lit(1e-6) {
            continue;
        }
        let sep = (fz - fw).norm();
        if sep <= lit::<T>(1e-10) * (T::one() + fz.norm()) {
            collisions.push((z, w));
            min_ratio = T::zero();
            continue;
        }
        let dist = match region.model {
            Model::TheoremA if fz.im > T::zero() && fw.im > T::zero() => {
                half_plane_distance(fz, fw)?
            }
            _ => sep,
        };
        min_ratio = min_ratio.min(dist / dz);
    }
    Ok(UnivalenceReport {
        pairs: samples,
        min_ratio,
        pass: collisions.is_empty(),
        collisions,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoveringEntry<T> {
    pub target: Complex<T>,
    pub index: usize,
    pub winding: Option<i64>,
    pub residue: Option<T>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoveringReport<T> {
    pub entries: Vec<CoveringEntry<T>>,
}

impl<T: Real> CoveringReport<T> {
    pub fn passed(&self) -> usize {
        self.entries.iter().filter(|e| e.pass).count()
    }
}

/// Orbit index whose model image `α^n(i)` (or `n`) lies closest to `w`.
fn nearest_index<T: Real>(
    r: &SemiconjResult<T>,
    w: Complex<T>,
    start: usize,
    limit: usize,
) -> usize {
    match r.model {
        Model::TheoremB => {
            let n = w.re.round().to_f64().unwrap_or(0.0).max(0.0) as usize;
            n.clamp(start, limit)
        }
        Model::TheoremA => {
            let mut best = (start, T::infinity());
            let mut u = Complex::i();
            for _ in 0..start {
                u = r.model_map(u);
            }
            for n in start..=limit {
                let d = half_plane_distance(w, u).unwrap_or(T::infinity());
                if d < best.1 {
                    best = (n, d);
                }
                u = r.model_map(u);
                if !(u.norm() < lit(1e150)) {
                    break;
                }
            }
            best.0
        }
    }
}

/// Winding number around each target of the image of the nearest orbit disk's boundary.
pub fn covering_probe<T: Real>(
    r: &SemiconjResult<T>,
    targets: &[Complex<T>],
    region: &UnivalenceRegion<T>,
) -> Result<CoveringReport<T>, RenormError> {
    let ev = r.evaluator()?;
    let limit = region.start_index + 2000;
    let mut entries = Vec::with_capacity(targets.len());
    for &w in targets {
        let first = nearest_index(r, w, region.start_index, limit);
        let mut entry = CoveringEntry {
            target: w,
            index: first,
            winding: None,
            residue: None,
            pass: false,
        };
        for n in first..first + 3 {
            let disk = region.disk(r, n)?;
            let curve = |t: T| {
                ev.eval_chart(disk.boundary_point(t))
                    .unwrap_or(Complex::new(T::nan(), T::nan()))
            };
            match curve_winding(curve, 512, w) {
                Ok(wind) => {
                    entry = CoveringEntry {
                        target: w,
                        index: n,
                        winding: Some(wind.number),
                        residue: Some(wind.residue),
                        pass: wind.number == 1 && !wind.precision_warning,
                    };
                    break;
                }
                Err(GeometryError::PointOnPath { .. }) => continue,
                Err(e) => return Err(e.into()),
            }
        }
        entries.push(entry);
    }
    Ok(CoveringReport { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{classify, ClassifyConfig};

    type C = Complex<f64>;

    fn setup(src: &str) -> (SelfMap<f64>, Classification<f64>) {
        let m = SelfMap::parse(src, Domain::HalfPlane).unwrap();
        let c = classify(&m, &[C::i()], &ClassifyConfig::default()).unwrap();
        (m, c)
    }

    fn run(src: &str, z0: C) -> SemiconjResult<f64> {
        let (m, c) = setup(src);
        semiconjugate(&m, &c, z0, &default_grid(Domain::HalfPlane, z0), None).unwrap()
    }

    #[test]
    fn grid_is_centered_and_bounded() {
        let z0 = C::new(1.0, 2.0);
        let g = default_grid(Domain::HalfPlane, z0);
        assert_eq!(g.len(), 25);
        assert!((g[12] - z0).norm() < 1e-15);
        for z in &g {
            assert!(half_plane_distance(*z, z0).unwrap() <= 2.0 + 1e-12);
        }
        let w0 = C::new(0.3, 0.2);
        for w in default_grid(Domain::Disk, w0) {
            assert!(crate::geometry::disk_distance(w, w0).unwrap() <= 2.0 + 1e-12);
        }
    }

    #[test]
    fn theorem_a_hyperbolic() {
        let r = run("2*z+i", C::i());
        assert_eq!(r.model, Model::TheoremA);
        assert!(r.iterations <= 80);
        for (z, v) in r.grid.iter().zip(&r.values) {
            assert!((v - (z + C::i()) / 2.0).norm() < 1e-6);
        }
        assert!((r.a - 2.0).abs() < 1e-9);
        assert!(r.b.unwrap().abs() < 1e-9);
        assert!(r.residual < 1e-6);
        assert!(r.base_value_error < 1e-9);

        let r = run("2*z+i", C::new(0.0, 2.0));
        for (z, v) in r.grid.iter().zip(&r.values) {
            assert!((v - (z + C::i()) / 3.0).norm() < 1e-6);
        }
    }

    #[test]
    fn theorem_a_parabolic() {
        let r = run("z+1-1/(z+i)", C::i());
        assert!((r.a - 1.0).abs() < 1e-12);
        let b = r.b.unwrap();
        assert!(b > 0.25 && b < 0.35, "b = {b}");
        assert!(r.residual < 1e-6);
        assert!(r.base_value_error < 1e-9);
        assert!(r.error_estimate.is_some());
    }

    #[test]
    fn theorem_b_examples() {
        let r = run("z+i", C::i());
        assert_eq!(r.model, Model::TheoremB);
        for (z, v) in r.grid.iter().zip(&r.values) {
            assert!((v - (-C::i() * (z - C::i()))).norm() < 1e-10);
        }
        assert!(r.residual < 1e-12);
        assert!(r.base_value_error < 1e-12);

        let r = run("z+1+i", C::i());
        for (z, v) in r.grid.iter().zip(&r.values) {
            assert!((v - (z - C::i()) / C::new(1.0, 1.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn grid_choice_does_not_move_the_model() {
        let grid2 = vec![C::i(), C::new(2.0, 0.5), C::new(-1.0, 3.0)];
        let (m, c) = setup("2*z+i");
        let cfg = RenormConfig::theorem_a();
        let r1 = pommerenke_g(
            &m,
            &c,
            C::i(),
            &default_grid(Domain::HalfPlane, C::i()),
            &cfg,
        )
        .unwrap();
        let r2 = pommerenke_g(&m, &c, C::i(), &grid2, &cfg).unwrap();
        assert!((r1.a - r2.a).abs() < 1e-9);
        assert!((r1.b.unwrap() - r2.b.unwrap()).abs() < 1e-9);

        // b_N moves with the stopping depth; the difference stays inside the tail spread
        let (m, c) = setup("z+1-1/(z+i)");
        let r1 = pommerenke_g(
            &m,
            &c,
            C::i(),
            &default_grid(Domain::HalfPlane, C::i()),
            &cfg,
        )
        .unwrap();
        let r2 = pommerenke_g(&m, &c, C::i(), &grid2, &cfg).unwrap();
        assert_eq!(r1.a, r2.a);
        let spread = r1.b_spread.unwrap().max(r2.b_spread.unwrap());
        assert!((r1.b.unwrap() - r2.b.unwrap()).abs() <= spread);
    }

    #[test]
    fn engine_mismatch() {
        let (m, c) = setup("z+i");
        let err = pommerenke_g(&m, &c, C::i(), &[C::i()], &RenormConfig::theorem_a()).unwrap_err();
        assert!(
            matches!(err, RenormError::ModelMismatch { hint, .. } if hint.contains("theoremB"))
        );
        let (m, c) = setup("2*z+i");
        let err =
            baker_pommerenke_h(&m, &c, C::i(), &[C::i()], &RenormConfig::theorem_b()).unwrap_err();
        assert!(matches!(err, RenormError::ModelMismatch { .. }));
    }

    #[test]
    fn nonconvergence_reports_trace() {
        let (m, c) = setup("z+1-1/(z+i)");
        let cfg = RenormConfig {
            max_iter: 50,
            ..RenormConfig::theorem_a()
        };
        match pommerenke_g(&m, &c, C::i(), &[C::i(), C::new(1.0, 1.0)], &cfg).unwrap_err() {
            RenormError::NonConvergence {
                iterations, trace, ..
            } => {
                assert_eq!(iterations, 50);
                assert_eq!(trace.len(), 50);
            }
            e => panic!("unexpected {e}"),
        }
    }

    fn fake(a: f64, b: f64) -> SemiconjResult<f64> {
        let values = vec![C::new(0.0, 1.0), C::new(1.0, 2.0)];
        let image_values = values.iter().map(|v| v * a + b).collect();
        SemiconjResult {
            model: Model::TheoremA,
            kind: MapKind::Hyperbolic,
            grid: values.clone(),
            values,
            image_values,
            a,
            b: Some(b),
            b_spread: Some(0.0),
            base_point: C::i(),
            iterations: 1,
            sup_cauchy_gap: 0.0,
            gap_trace: vec![],
            error_estimate: None,
            residual: 0.0,
            base_value_error: 0.0,
            orientation: 1,
            precision: PrecisionReport {
                digits_lost: 0.0,
                digits_remaining: 15.0,
            },
            evaluator: None,
        }
    }

    #[test]
    fn standard_forms() {
        let s = standard_form(&fake(2.0, 0.0), 1e-9).unwrap();
        assert_eq!(s.model, StandardModel::Dilation(2.0));
        assert_eq!(s.values, fake(2.0, 0.0).values);

        let s = standard_form(&fake(1.0, 0.5), 1e-9).unwrap();
        assert_eq!(s.model, StandardModel::Translation(1));
        assert!((s.values[1] - C::new(2.0, 4.0)).norm() < 1e-15);
        assert!(s.residual < 1e-12);

        let s = standard_form(&fake(2.0, 2.0), 1e-9).unwrap();
        assert!((s.values[0] - C::new(2.0, 1.0)).norm() < 1e-15);
        assert!(s.residual < 1e-12);

        assert!(matches!(
            standard_form(&fake(1.0, 0.0), 1e-9),
            Err(RenormError::CannotStandardize { .. })
        ));

        let r = run("z+1-1/(z+i)", C::i());
        let s = standard_form(&r, 1e-9).unwrap();
        assert_eq!(s.model, StandardModel::Translation(1));
        assert!(s.residual < 1e-5);
    }

    #[test]
    fn univalence_examples() {
        let r = run("2*z+i", C::i());
        let region = UnivalenceRegion::default_for(&r).unwrap();
        let rep = univalence_probe(r.evaluator().unwrap(), &region, 200).unwrap();
        assert!(rep.pass);
        assert!(rep.min_ratio > 0.5);

        let r = run("z+i", C::i());
        let region = UnivalenceRegion::default_for(&r).unwrap();
        assert!(region.start_index >= 4);
        let rep = univalence_probe(r.evaluator().unwrap(), &region, 200).unwrap();
        assert!(rep.pass);

        let constant = |_z: C| C::new(0.0, 1.0);
        let rep = univalence_probe(&constant, &region, 50).unwrap();
        assert!(!rep.pass);
        assert!(!rep.collisions.is_empty());
    }

    #[test]
    fn covering_examples() {
        let r = run("z+i", C::i());
        let region = UnivalenceRegion::default_for(&r).unwrap();
        let targets: Vec<C> = (6..18)
            .map(|k| C::new(k as f64, 0.2 * if k % 2 == 0 { 1.0 } else { -1.0 }))
            .collect();
        let rep = covering_probe(&r, &targets, &region).unwrap();
        assert_eq!(rep.passed(), targets.len());
        let rep = covering_probe(&r, &[C::new(8.0, -20.0)], &region).unwrap();
        assert_eq!(rep.entries[0].winding, Some(0));

        let r = run("z+1+i", C::i());
        let region = UnivalenceRegion::default_for(&r).unwrap();
        let targets: Vec<C> = (10..15).map(|k| C::new(k as f64 + 0.1, 0.0)).collect();
        assert_eq!(covering_probe(&r, &targets, &region).unwrap().passed(), 5);

        let r = run("2*z+i", C::i());
        let region = UnivalenceRegion::default_for(&r).unwrap();
        let targets = [C::new(0.3, 8.0), C::new(-1.0, 30.0)];
        assert_eq!(covering_probe(&r, &targets, &region).unwrap().passed(), 2);
    }
}
