//! Near-field multi-user channel models and linear receive beamforming for
//! extremely large uniform planar arrays.
//!
//! Two channel models are provided for a UPA lying on the y-z plane:
//!
//! - **PNUSW**: spherical wavefront phase with per-element amplitude and
//!   projected-aperture variation ([`channel::pnusw_response`]).
//! - **UPW**: the far-field uniform plane wave approximation
//!   ([`channel::upw_response`]).
//!
//! On top of the channel vectors the crate evaluates MRC, ZF and MMSE receive
//! beamforming ([`beamforming`]) with structured linear algebra that never
//! forms an `M x M` matrix ([`numerics`]), and drives the parameter sweeps in
//! [`experiments`].
//!
//! The math modules are generic over the real scalar type ([`Real`]); the
//! aliases at the crate root fix it to `f64`, which is what the experiments
//! and tolerances are calibrated for.

// `!(x > 0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamforming;
pub mod channel;
mod error;
pub mod experiments;
pub mod geometry;
pub mod numerics;
mod real;

pub use error::{Error, Result};
pub use num_complex::Complex;
pub use real::Real;

pub type Complex64 = Complex<f64>;

pub type Geometry = geometry::ArrayGeometry<f64>;
pub type Geometry32 = geometry::ArrayGeometry<f32>;
pub type Location = geometry::UserLocation<f64>;
pub type Location32 = geometry::UserLocation<f32>;
pub type Point = geometry::Vector3<f64>;
pub type Response = channel::ResponseVector<f64>;
pub type Response32 = channel::ResponseVector<f32>;
pub type Upw = channel::UpwConfig<f64>;
pub type Matrix = numerics::ComplexMatrix<f64>;
pub type Matrix32 = numerics::ComplexMatrix<f32>;
pub type Scenario = beamforming::Scenario<f64>;
pub type Report = beamforming::BeamformerReport<f64>;
