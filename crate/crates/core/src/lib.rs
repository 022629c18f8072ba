//! Numerical semiconjugations for holomorphic self-maps of the disk and the half-plane.
//!
//! The core is generic over the real scalar (`f32` or `f64`); the aliases
//! below fix it for the common cases.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod eqlab;
pub mod geometry;
pub mod mapdsl;
pub mod renorm;
pub mod scalar;
pub mod suite;

pub use dynamics::{
    classify, Classification, ClassifyConfig, DynamicsError, MapKind, Orbit, SelfMap,
};
pub use eqlab::{EqError, IntertwinerSpec, SolutionPair};
pub use geometry::{ComplexPoint, GeometryError, HalfPlanePoint, Moebius};
pub use mapdsl::{Domain, Expr, ParseError, ParsedMap};
pub use renorm::{semiconjugate, Model, RenormConfig, RenormError, SemiconjResult};
pub use scalar::Real;

pub type Complex64 = num_complex::Complex<f64>;
pub type Complex32 = num_complex::Complex<f32>;

pub type SelfMap64 = SelfMap<f64>;
pub type SelfMap32 = SelfMap<f32>;
pub type Moebius64 = Moebius<f64>;
pub type Moebius32 = Moebius<f32>;
pub type Classification64 = Classification<f64>;
pub type Classification32 = Classification<f32>;
pub type SemiconjResult64 = SemiconjResult<f64>;
pub type SemiconjResult32 = SemiconjResult<f32>;
pub type SolutionPair64 = SolutionPair<f64>;
pub type Expr64 = Expr<f64>;
