//! Plane, disk and half-plane geometry.
//!
//! Points of the Riemann sphere are [`ComplexPoint`]s with an explicit
//! infinity variant, so Möbius algebra never produces IEEE infinities or NaNs.
//! Distances on the upper half-plane `H` and the unit disk `D` are the
//! curvature −1 hyperbolic metrics.

use std::fmt;

use num_complex::Complex;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::scalar::{lit, to_f64, tolerance, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("degenerate Möbius map: |ad - bc| = {det:e} after normalization")]
    Degenerate { det: f64 },
    #[error("point {re} + {im}i is not in the open upper half-plane")]
    NotInHalfPlane { re: f64, im: f64 },
    #[error("point {re} + {im}i is not in the open unit disk")]
    NotInDisk { re: f64, im: f64 },
    #[error("winding number undefined: point lies on the path near vertex {index}")]
    PointOnPath { index: usize },
    #[error("path needs at least 3 vertices, got {0}")]
    PathTooShort(usize),
    #[error("curve produced a non-finite value at parameter {t}")]
    NonFiniteCurve { t: f64 },
    #[error("invalid hyperbolic radius {0}")]
    InvalidRadius(f64),
}

/// A point of the extended complex plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ComplexPoint<T> {
    Finite(Complex<T>),
    Infinity,
}

impl<T: Real> ComplexPoint<T> {
    pub fn new(re: T, im: T) -> Self {
        ComplexPoint::Finite(Complex::new(re, im))
    }

    pub fn finite(self) -> Option<Complex<T>> {
        match self {
            ComplexPoint::Finite(z) => Some(z),
            ComplexPoint::Infinity => None,
        }
    }

    pub fn is_infinity(self) -> bool {
        matches!(self, ComplexPoint::Infinity)
    }

    /// Chordal-free closeness: both infinite, or both finite within `tol`.
    pub fn approx_eq(self, other: Self, tol: T) -> bool {
        match (self, other) {
            (ComplexPoint::Infinity, ComplexPoint::Infinity) => true,
            (ComplexPoint::Finite(a), ComplexPoint::Finite(b)) => (a - b).norm() <= tol,
            _ => false,
        }
    }
}

impl<T: Real> From<Complex<T>> for ComplexPoint<T> {
    fn from(z: Complex<T>) -> Self {
        ComplexPoint::Finite(z)
    }
}

impl<T: Real> fmt::Display for ComplexPoint<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ComplexPoint::Finite(z) => write!(f, "{} + {}i", z.re, z.im),
            ComplexPoint::Infinity => write!(f, "∞"),
        }
    }
}

/// A point of `H = {Im z > 0}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlanePoint<T>(Complex<T>);

impl<T: Real> HalfPlanePoint<T> {
    pub fn new(z: Complex<T>) -> Result<Self, GeometryError> {
        if z.re.is_finite() && z.im.is_finite() && z.im > T::zero() {
            Ok(HalfPlanePoint(z))
        } else {
            Err(GeometryError::NotInHalfPlane {
                re: to_f64(z.re),
                im: to_f64(z.im),
            })
        }
    }

    pub fn value(self) -> Complex<T> {
        self.0
    }
}

/// Kinds of non-identity Möbius maps, read off the normalized trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoebiusKind {
    Identity,
    Elliptic,
    Parabolic,
    Hyperbolic,
    Loxodromic,
}

/// The fractional-linear map `z ↦ (az + b)/(cz + d)`.
///
/// Coefficients are stored divided by the one of largest modulus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moebius<T> {
    a: Complex<T>,
    b: Complex<T>,
    c: Complex<T>,
    d: Complex<T>,
}

impl<T: Real> Moebius<T> {
    pub fn new(
        a: Complex<T>,
        b: Complex<T>,
        c: Complex<T>,
        d: Complex<T>,
    ) -> Result<Self, GeometryError> {
        let scale = [a, b, c, d]
            .iter()
            .map(|z| z.norm())
            .fold(T::zero(), T::max);
        if !(scale > T::zero()) || !scale.is_finite() {
            return Err(GeometryError::Degenerate { det: 0.0 });
        }
        let (a, b, c, d) = (a / scale, b / scale, c / scale, d / scale);
        let det = a * d - b * c;
        if det.norm() <= tolerance::<T>(1e-12) {
            return Err(GeometryError::Degenerate {
                det: to_f64(det.norm()),
            });
        }
        Ok(Moebius { a, b, c, d })
    }

    pub fn identity() -> Self {
        Moebius {
            a: Complex::one(),
            b: Complex::zero(),
            c: Complex::zero(),
            d: Complex::one(),
        }
    }

    /// `z ↦ az + b`.
    pub fn affine(a: Complex<T>, b: Complex<T>) -> Result<Self, GeometryError> {
        Self::new(a, b, Complex::zero(), Complex::one())
    }

    /// `z ↦ scale·z + shift` with real coefficients.
    pub fn real_affine(scale: T, shift: T) -> Result<Self, GeometryError> {
        Self::affine(
            Complex::new(scale, T::zero()),
            Complex::new(shift, T::zero()),
        )
    }

    /// `z ↦ (z − x)/y`, the map sending `x + iy` to `i` inside `Aut_∞(H)`.
    pub fn renormalizer(x: T, y: T) -> Result<Self, GeometryError> {
        Self::real_affine(y.recip(), -x / y)
    }

    /// `z ↦ (z − i)/(z + i)`.
    pub fn half_plane_to_disk() -> Self {
        let i = Complex::i();
        Self::new(Complex::one(), -i, Complex::one(), i).expect("Cayley map is regular")
    }

    /// `w ↦ i(1 + w)/(1 − w)`.
    pub fn disk_to_half_plane() -> Self {
        let i = Complex::i();
        Self::new(i, i, -Complex::one(), Complex::one()).expect("Cayley map is regular")
    }

    pub fn coefficients(&self) -> [Complex<T>; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn determinant(&self) -> Complex<T> {
        self.a * self.d - self.b * self.c
    }

    pub fn apply(&self, z: ComplexPoint<T>) -> ComplexPoint<T> {
        match z {
            ComplexPoint::Infinity => {
                if self.c.is_zero() {
                    ComplexPoint::Infinity
                } else {
                    ComplexPoint::Finite(self.a / self.c)
                }
            }
            ComplexPoint::Finite(z) => self.apply_finite(z),
        }
    }

    pub fn apply_finite(&self, z: Complex<T>) -> ComplexPoint<T> {
        let cz = self.c * z;
        let den = cz + self.d;
        let scale = cz.norm() + self.d.norm();
        if den.norm() <= T::epsilon() * scale || den.is_zero() {
            ComplexPoint::Infinity
        } else {
            ComplexPoint::Finite((self.a * z + self.b) / den)
        }
    }

    /// `(ad − bc)/(cz + d)²`, or `None` at the pole.
    pub fn derivative(&self, z: Complex<T>) -> Option<Complex<T>> {
        let den = self.c * z + self.d;
        if den.is_zero() {
            None
        } else {
            Some(self.determinant() / (den * den))
        }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Result<Self, GeometryError> {
        Self::new(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )
    }

    pub fn inverse(&self) -> Result<Self, GeometryError> {
        Self::new(self.d, -self.b, -self.c, self.a)
    }

    /// Whether the coefficients agree with `other` up to a common scalar.
    pub fn approx_eq(&self, other: &Self, tol: T) -> bool {
        let mine = self.coefficients();
        let theirs = other.coefficients();
        // Both are normalized to max modulus 1, so they differ by a unimodular factor.
        let (k, _) = mine
            .iter()
            .enumerate()
            .map(|(k, z)| (k, z.norm()))
            .fold((0, T::zero()), |acc, x| if x.1 > acc.1 { x } else { acc });
        if theirs[k].norm() < lit(0.5) {
            return false;
        }
        let phase = mine[k] / theirs[k];
        mine.iter()
            .zip(theirs.iter())
            .all(|(m, t)| (*m - *t * phase).norm() <= tol)
    }

    /// True when the map preserves `H`: real coefficients up to a common phase, `ad − bc > 0`.
    pub fn preserves_half_plane(&self, tol: T) -> bool {
        let coeffs = self.coefficients();
        let lead = coeffs
            .iter()
            .copied()
            .fold(
                Complex::zero(),
                |acc: Complex<T>, z| if z.norm() > acc.norm() { z } else { acc },
            );
        let phase = lead / Complex::new(lead.norm(), T::zero());
        let real: Vec<Complex<T>> = coeffs.iter().map(|z| *z / phase).collect();
        if real.iter().any(|z| z.im.abs() > tol) {
            return false;
        }
        real[0].re * real[3].re - real[1].re * real[2].re > T::zero()
    }

    pub fn kind(&self) -> MoebiusKind {
        let tol = tolerance::<T>(1e-12);
        if self.b.norm() <= tol && self.c.norm() <= tol && (self.a - self.d).norm() <= tol {
            return MoebiusKind::Identity;
        }
        let tr = self.a + self.d;
        let t2 = tr * tr / self.determinant();
        let four = lit::<T>(4.0);
        if t2.im.abs() > tolerance::<T>(1e-9) {
            MoebiusKind::Loxodromic
        } else if (t2.re - four).abs() <= tolerance::<T>(1e-9) {
            MoebiusKind::Parabolic
        } else if t2.re > four {
            MoebiusKind::Hyperbolic
        } else if t2.re >= T::zero() {
            MoebiusKind::Elliptic
        } else {
            MoebiusKind::Loxodromic
        }
    }
}

impl<T: Real> fmt::Display for Moebius<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(({})z + ({}))/(({})z + ({}))",
            self.a, self.b, self.c, self.d
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CayleyDirection {
    DiskToHalfPlane,
    HalfPlaneToDisk,
}

pub fn cayley<T: Real>(z: ComplexPoint<T>, direction: CayleyDirection) -> ComplexPoint<T> {
    match direction {
        CayleyDirection::DiskToHalfPlane => Moebius::disk_to_half_plane().apply(z),
        CayleyDirection::HalfPlaneToDisk => Moebius::half_plane_to_disk().apply(z),
    }
}

/// Hyperbolic distance on `H`.
///
/// Evaluated as `2·asinh(|z − w| / (2√(Im z·Im w)))`, which equals
/// `arccosh(1 + |z − w|²/(2 Im z Im w))` without the cancellation of
/// `arccosh` near 1.
pub fn hyp_dist<T: Real>(z: HalfPlanePoint<T>, w: HalfPlanePoint<T>) -> T {
    let (z, w) = (z.value(), w.value());
    let den = lit::<T>(2.0) * z.im.sqrt() * w.im.sqrt();
    lit::<T>(2.0) * ((z - w).norm() / den).asinh()
}

/// [`hyp_dist`] on raw complex numbers, validating both arguments.
pub fn half_plane_distance<T: Real>(z: Complex<T>, w: Complex<T>) -> Result<T, GeometryError> {
    Ok(hyp_dist(HalfPlanePoint::new(z)?, HalfPlanePoint::new(w)?))
}

/// Hyperbolic distance on `D`: `2·artanh(|u − v| / |1 − ū v|)`.
pub fn disk_distance<T: Real>(u: Complex<T>, v: Complex<T>) -> Result<T, GeometryError> {
    for p in [u, v] {
        if !(p.norm() < T::one()) {
            return Err(GeometryError::NotInDisk {
                re: to_f64(p.re),
                im: to_f64(p.im),
            });
        }
    }
    let q = (u - v).norm() / (Complex::<T>::one() - u.conj() * v).norm();
    Ok(lit::<T>(2.0) * q.min(T::one() - T::epsilon()).atanh())
}

/// A hyperbolic disk `Δ(center, radius)` in `H`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperbolicDisk<T> {
    pub center: HalfPlanePoint<T>,
    pub radius: T,
}

impl<T: Real> HyperbolicDisk<T> {
    pub fn new(center: HalfPlanePoint<T>, radius: T) -> Result<Self, GeometryError> {
        if !(radius >= T::zero()) || !radius.is_finite() {
            return Err(GeometryError::InvalidRadius(to_f64(radius)));
        }
        Ok(HyperbolicDisk { center, radius })
    }

    /// Euclidean center `x + i·y·cosh r`.
    pub fn euclidean_center(&self) -> Complex<T> {
        let c = self.center.value();
        Complex::new(c.re, c.im * self.radius.cosh())
    }

    /// Euclidean radius `y·sinh r`.
    pub fn euclidean_radius(&self) -> T {
        self.center.value().im * self.radius.sinh()
    }

    pub fn contains(&self, z: Complex<T>) -> bool {
        match HalfPlanePoint::new(z) {
            Ok(p) => hyp_dist(self.center, p) < self.radius,
            Err(_) => false,
        }
    }

    /// The boundary circle at parameter `t ∈ [0, 1)`.
    pub fn boundary_point(&self, t: T) -> Complex<T> {
        let theta = T::TAU() * t;
        self.euclidean_center() + Complex::from_polar(self.euclidean_radius(), theta)
    }

    pub fn boundary(&self, samples: usize) -> Vec<Complex<T>> {
        (0..samples)
            .map(|k| self.boundary_point(lit::<T>(k as f64) / lit(samples as f64)))
            .collect()
    }
}

/// Result of a winding-number computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Winding<T> {
    pub number: i64,
    /// Distance of the raw argument total (in turns) from the reported integer.
    pub residue: T,
    /// Set when `residue > 0.1`.
    pub precision_warning: bool,
}

impl<T: Real> Winding<T> {
    fn from_total(total: T) -> Self {
        let turns = total / T::TAU();
        let rounded = turns.round();
        let residue = (turns - rounded).abs();
        Winding {
            number: rounded.to_i64().unwrap_or(0),
            residue,
            precision_warning: residue > lit(0.1),
        }
    }
}

fn segment_distance<T: Real>(a: Complex<T>, b: Complex<T>, w: Complex<T>) -> T {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2.is_zero() {
        return (w - a).norm();
    }
    let t = ((w - a) * ab.conj()).re / len2;
    let t = t.max(T::zero()).min(T::one());
    (a + ab * t - w).norm()
}

/// Winding number of the closed polyline `path` (last vertex joined to the first) around `w`.
pub fn winding_number<T: Real>(
    path: &[Complex<T>],
    w: Complex<T>,
) -> Result<Winding<T>, GeometryError> {
    let scale = path.iter().map(|p| p.norm()).fold(w.norm(), T::max) + T::one();
    winding_number_with_tol(path, w, tolerance::<T>(1e-12) * scale)
}

pub fn winding_number_with_tol<T: Real>(
    path: &[Complex<T>],
    w: Complex<T>,
    tol: T,
) -> Result<Winding<T>, GeometryError> {
    if path.len() < 3 {
        return Err(GeometryError::PathTooShort(path.len()));
    }
    let n = path.len();
    let mut total = T::zero();
    for k in 0..n {
        let (a, b) = (path[k], path[(k + 1) % n]);
        if segment_distance(a, b, w) <= tol {
            return Err(GeometryError::PointOnPath { index: k });
        }
        // A straight segment that misses w subtends an angle strictly below π,
        // so the principal argument is the exact increment.
        total = total + ((b - w) / (a - w)).arg();
    }
    Ok(Winding::from_total(total))
}

/// Winding number of a closed parametrized curve `t ↦ curve(t)`, `t ∈ [0, 1)`.
///
/// Starts from `samples` uniform parameters and bisects any interval whose
/// argument increment exceeds π/2, so the principal increments stay valid.
pub fn curve_winding<T, F>(
    curve: F,
    samples: usize,
    w: Complex<T>,
) -> Result<Winding<T>, GeometryError>
where
    T: Real,
    F: Fn(T) -> Complex<T>,
{
    const MAX_DEPTH: u32 = 24;
    let samples = samples.max(3);
    let eval = |t: T| -> Result<Complex<T>, GeometryError> {
        let z = curve(t);
        if z.re.is_finite() && z.im.is_finite() {
            Ok(z)
        } else {
            Err(GeometryError::NonFiniteCurve { t: to_f64(t) })
        }
    };
    let ts: Vec<T> = (0..=samples)
        .map(|k| lit::<T>(k as f64) / lit(samples as f64))
        .collect();
    let pts = ts.iter().map(|&t| eval(t)).collect::<Result<Vec<_>, _>>()?;
    let scale = pts.iter().map(|p| p.norm()).fold(w.norm(), T::max) + T::one();
    let tol = tolerance::<T>(1e-12) * scale;

    let mut total = T::zero();
    for k in 0..samples {
        // explicit stack of (t0, z0, t1, z1, depth)
        let mut stack = vec![(ts[k], pts[k], ts[k + 1], pts[k + 1], 0u32)];
        while let Some((t0, z0, t1, z1, depth)) = stack.pop() {
            if (z0 - w).norm() <= tol || (z1 - w).norm() <= tol {
                return Err(GeometryError::PointOnPath { index: k });
            }
            let inc = ((z1 - w) / (z0 - w)).arg();
            let tm = (t0 + t1) / lit(2.0);
            let zm = eval(tm)?;
            let first = ((zm - w) / (z0 - w)).arg();
            let second = ((z1 - w) / (zm - w)).arg();
            let consistent = (zm - w).norm() > tol
                && first.abs() <= T::FRAC_PI_2()
                && second.abs() <= T::FRAC_PI_2()
                && (first + second - inc).abs() <= lit(1e-6);
            if inc.abs() <= T::FRAC_PI_2() && consistent {
                total = total + inc;
            } else if depth >= MAX_DEPTH {
                if segment_distance(z0, z1, w) <= tol {
                    return Err(GeometryError::PointOnPath { index: k });
                }
                total = total + inc;
            } else {
                // pushed in reverse so the left half is processed first
                stack.push((tm, zm, t1, z1, depth + 1));
                stack.push((t0, z0, tm, zm, depth + 1));
            }
        }
    }
    Ok(Winding::from_total(total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type C = Complex<f64>;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn fin(z: ComplexPoint<f64>) -> C {
        z.finite().expect("finite point")
    }

    #[test]
    fn identity_apply() {
        let z = ComplexPoint::new(2.0, 3.0);
        assert_eq!(Moebius::<f64>::identity().apply(z), z);
    }

    #[test]
    fn renormalizer_sends_orbit_point_to_i() {
        let g = Moebius::renormalizer(0.0, 3.0).unwrap();
        assert!((fin(g.apply_finite(c(0.0, 3.0))) - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn cayley_of_i_is_zero() {
        let m = Moebius::new(c(1.0, 0.0), c(0.0, -1.0), c(1.0, 0.0), c(0.0, 1.0)).unwrap();
        assert!(fin(m.apply_finite(c(0.0, 1.0))).norm() < 1e-15);
    }

    #[test]
    fn pole_and_infinity() {
        let m = Moebius::new(c(1.0, 0.0), c(0.0, -1.0), c(1.0, 0.0), c(0.0, 1.0)).unwrap();
        assert!(m.apply_finite(c(0.0, -1.0)).is_infinity());
        assert!((fin(m.apply(ComplexPoint::Infinity)) - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn compose_translations_is_identity() {
        let p = Moebius::real_affine(1.0, 1.0).unwrap();
        let m = Moebius::real_affine(1.0, -1.0).unwrap();
        let id = p.compose(&m).unwrap();
        assert!(id.approx_eq(&Moebius::identity(), 1e-15));
        assert_eq!(id.kind(), MoebiusKind::Identity);
    }

    #[test]
    fn invert_dilation() {
        let inv = Moebius::real_affine(2.0, 0.0).unwrap().inverse().unwrap();
        assert!(inv.approx_eq(&Moebius::real_affine(0.5, 0.0).unwrap(), 1e-15));
    }

    #[test]
    fn gamma_ratio_is_dilation() {
        // γ_n ∘ γ_{n+1}^{-1} with (x_n, y_n) = (0, 1), (x_{n+1}, y_{n+1}) = (0, 2)
        let gn = Moebius::renormalizer(0.0, 1.0).unwrap();
        let gn1 = Moebius::renormalizer(0.0, 2.0).unwrap();
        let ratio = gn.compose(&gn1.inverse().unwrap()).unwrap();
        assert!(ratio.approx_eq(&Moebius::real_affine(2.0, 0.0).unwrap(), 1e-15));
        assert_eq!(ratio.kind(), MoebiusKind::Hyperbolic);
    }

    #[test]
    fn degenerate_map_rejected() {
        let err = Moebius::new(c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)).unwrap_err();
        assert!(matches!(err, GeometryError::Degenerate { .. }));
        let a = Moebius::new(c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)).unwrap();
        let b = Moebius::new(c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)).unwrap();
        assert!(a.compose(&b).is_ok());
    }

    #[test]
    fn kinds() {
        let translate = Moebius::real_affine(1.0, 1.0).unwrap();
        assert_eq!(translate.kind(), MoebiusKind::Parabolic);
        let rot = Moebius::affine(C::from_polar(1.0, 0.3), c(0.0, 0.0)).unwrap();
        assert_eq!(rot.kind(), MoebiusKind::Elliptic);
        let lox = Moebius::affine(C::from_polar(2.0, 0.3), c(0.0, 0.0)).unwrap();
        assert_eq!(lox.kind(), MoebiusKind::Loxodromic);
    }

    #[test]
    fn cayley_examples() {
        let i = ComplexPoint::new(0.0, 1.0);
        let zero = ComplexPoint::new(0.0, 0.0);
        assert!(cayley(i, CayleyDirection::HalfPlaneToDisk).approx_eq(zero, 1e-15));
        assert!(cayley(zero, CayleyDirection::DiskToHalfPlane).approx_eq(i, 1e-15));
        let one = cayley(ComplexPoint::Infinity, CayleyDirection::HalfPlaneToDisk);
        assert!(one.approx_eq(ComplexPoint::new(1.0, 0.0), 1e-15));
        let inf = cayley(
            ComplexPoint::new(1.0, 0.0),
            CayleyDirection::DiskToHalfPlane,
        );
        assert!(inf.is_infinity());
    }

    #[test]
    fn distance_examples() {
        let i = HalfPlanePoint::new(c(0.0, 1.0)).unwrap();
        let two_i = HalfPlanePoint::new(c(0.0, 2.0)).unwrap();
        let one_i = HalfPlanePoint::new(c(1.0, 1.0)).unwrap();
        assert_eq!(hyp_dist(i, i), 0.0);
        assert!((hyp_dist(i, two_i) - 2f64.ln()).abs() < 1e-15);
        assert!((hyp_dist(i, one_i) - 1.5f64.acosh()).abs() < 1e-15);
        assert!(half_plane_distance(c(0.0, 1.0), c(1.0, 0.0)).is_err());
        assert!(HalfPlanePoint::new(c(0.0, -1.0)).is_err());
    }

    #[test]
    fn hyperbolic_disk_geometry() {
        let center = HalfPlanePoint::new(c(1.0, 2.0)).unwrap();
        let disk = HyperbolicDisk::new(center, 0.7).unwrap();
        for z in disk.boundary(16) {
            let d = half_plane_distance(center.value(), z).unwrap();
            assert!((d - 0.7).abs() < 1e-12);
        }
        assert!(disk.contains(c(1.0, 2.1)));
        assert!(!disk.contains(c(5.0, 2.0)));
        assert!(HyperbolicDisk::new(center, f64::INFINITY).is_err());
    }

    fn square(center: C, half: f64) -> Vec<C> {
        vec![
            center + c(-half, -half),
            center + c(half, -half),
            center + c(half, half),
            center + c(-half, half),
        ]
    }

    #[test]
    fn winding_examples() {
        let sq = square(c(0.0, 0.0), 0.5);
        assert_eq!(winding_number(&sq, c(0.0, 0.0)).unwrap().number, 1);
        assert_eq!(winding_number(&sq, c(10.0, 0.0)).unwrap().number, 0);
        let twice: Vec<C> = (0..64)
            .map(|k| C::from_polar(1.0, 4.0 * std::f64::consts::PI * k as f64 / 64.0))
            .collect();
        assert_eq!(winding_number(&twice, c(0.0, 0.0)).unwrap().number, 2);
        let mut rev = sq.clone();
        rev.reverse();
        assert_eq!(winding_number(&rev, c(0.0, 0.0)).unwrap().number, -1);
    }

    #[test]
    fn winding_point_on_path() {
        let sq = square(c(0.0, 0.0), 0.5);
        let err = winding_number(&sq, c(0.5, 0.1)).unwrap_err();
        assert!(matches!(err, GeometryError::PointOnPath { .. }));
        assert!(matches!(
            winding_number(&sq[..2], c(0.0, 0.0)),
            Err(GeometryError::PathTooShort(2))
        ));
    }

    #[test]
    fn curve_winding_refines_coarse_samples() {
        // z^3 on the unit circle winds 3 times; 4 samples alone are too coarse.
        let curve = |t: f64| C::from_polar(1.0, 3.0 * std::f64::consts::TAU * t);
        let w = curve_winding(curve, 4, c(0.1, 0.0)).unwrap();
        assert_eq!(w.number, 3);
        assert!(w.residue < 1e-9);
        let err = curve_winding(|_t: f64| c(f64::NAN, 0.0), 8, c(0.0, 0.0));
        assert!(matches!(err, Err(GeometryError::NonFiniteCurve { .. })));
    }

    fn half_plane() -> impl Strategy<Value = C> {
        (-5.0..5.0f64, 0.05..5.0f64).prop_map(|(x, y)| c(x, y))
    }

    fn disk_point() -> impl Strategy<Value = C> {
        (0.0..0.95f64, 0.0..std::f64::consts::TAU).prop_map(|(r, t)| C::from_polar(r, t))
    }

    fn automorphism() -> impl Strategy<Value = Moebius<f64>> {
        (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64)
            .prop_filter("positive determinant", |(a, b, cc, d)| a * d - b * cc > 0.2)
            .prop_map(|(a, b, cc, d)| {
                Moebius::new(c(a, 0.0), c(b, 0.0), c(cc, 0.0), c(d, 0.0)).unwrap()
            })
    }

    fn general_moebius() -> impl Strategy<Value = Moebius<f64>> {
        proptest::collection::vec(-2.0..2.0f64, 8).prop_filter_map("regular", |v| {
            Moebius::new(c(v[0], v[1]), c(v[2], v[3]), c(v[4], v[5]), c(v[6], v[7]))
                .ok()
                .filter(|m| m.determinant().norm() > 0.05)
        })
    }

    proptest! {
        #[test]
        fn compose_matches_sequential_apply(m1 in general_moebius(), m2 in general_moebius(), z in disk_point()) {
            let composed = m1.compose(&m2);
            prop_assume!(composed.is_ok());
            let lhs = composed.unwrap().apply_finite(z);
            let rhs = m1.apply(m2.apply_finite(z));
            if let (Some(a), Some(b)) = (lhs.finite(), rhs.finite()) {
                prop_assume!(a.norm() < 1e3);
                prop_assert!((a - b).norm() <= 1e-12 * (1.0 + a.norm()) * 1e2);
            }
        }

        #[test]
        fn compose_associative(m1 in general_moebius(), m2 in general_moebius(), m3 in general_moebius()) {
            let left = m1.compose(&m2).and_then(|m| m.compose(&m3));
            let right = m2.compose(&m3).and_then(|m| m1.compose(&m));
            if let (Ok(l), Ok(r)) = (left, right) {
                prop_assert!(l.approx_eq(&r, 1e-10));
            }
        }

        #[test]
        fn cayley_round_trip(w in disk_point()) {
            let z = cayley(ComplexPoint::Finite(w), CayleyDirection::DiskToHalfPlane);
            let back = cayley(z, CayleyDirection::HalfPlaneToDisk);
            prop_assert!(back.approx_eq(ComplexPoint::Finite(w), 1e-14));
        }

        #[test]
        fn half_plane_and_disk_metrics_agree(z in half_plane(), w in half_plane()) {
            let u = fin(cayley(ComplexPoint::Finite(z), CayleyDirection::HalfPlaneToDisk));
            let v = fin(cayley(ComplexPoint::Finite(w), CayleyDirection::HalfPlaneToDisk));
            let dh = half_plane_distance(z, w).unwrap();
            let dd = disk_distance(u, v).unwrap();
            prop_assert!((dh - dd).abs() <= 1e-12 * (1.0 + dh) * 10.0);
        }

        #[test]
        fn automorphisms_are_isometries(m in automorphism(), z in half_plane(), w in half_plane()) {
            prop_assert!(m.preserves_half_plane(1e-12));
            let (mz, mw) = (m.apply_finite(z).finite(), m.apply_finite(w).finite());
            if let (Some(mz), Some(mw)) = (mz, mw) {
                prop_assume!(mz.im > 1e-6 && mw.im > 1e-6);
                let before = half_plane_distance(z, w).unwrap();
                let after = half_plane_distance(mz, mw).unwrap();
                prop_assert!((before - after).abs() <= 1e-12 * (1.0 + before) * 100.0);
            }
        }

        #[test]
        fn distance_symmetric_and_zero_only_on_diagonal(z in half_plane(), w in half_plane()) {
            let d1 = half_plane_distance(z, w).unwrap();
            let d2 = half_plane_distance(w, z).unwrap();
            prop_assert_eq!(d1, d2);
            prop_assert!(d1 >= 0.0);
            prop_assert_eq!(half_plane_distance(z, z).unwrap(), 0.0);
            if z != w { prop_assert!(d1 > 0.0); }
        }

        #[test]
        fn analytic_image_windings_are_integral(center in disk_point(), k in 1i32..4) {
            // image of a circle of radius 1 under u ↦ u^k, around a point inside
            let path: Vec<C> = (0..512)
                .map(|j| C::from_polar(1.0, std::f64::consts::TAU * j as f64 / 512.0).powi(k))
                .collect();
            let w = center * 0.5;
            let wind = winding_number(&path, w).unwrap();
            prop_assert_eq!(wind.number, k as i64);
            prop_assert!(wind.residue < 1e-6);
        }
    }
}
