//! Numerical extrinsic conformal geometry on coordinate charts.
//!
//! The crate evaluates Weyl-structure curvature (Schouten-Weyl tensors,
//! Faraday form, Weyl tensor), Möbius and Laplace operators, conformal
//! geodesics, and the tensorial invariants of a conformal embedding
//! (trace-free fundamental form, normal curvature, mixed and relative
//! Schouten-Weyl tensors), together with the constructive total-space
//! metric that realizes prescribed invariants.
//!
//! All derivative evaluation goes through truncated Taylor jets of
//! closed-form expressions, so curvature identities hold to roundoff
//! rather than to a finite-difference error.

pub mod acceptance;
pub mod cli;
pub mod conformal;
pub mod embedding;
pub mod error;
pub mod geodesic;
pub mod jets;
pub mod randfield;
pub mod realization;
pub mod scalar;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Real;

/// Jet with `f64` coefficients, the default working type.
pub type Jet64 = jets::Jet<f64>;
/// Jet with `f32` coefficients.
pub type Jet32 = jets::Jet<f32>;
/// Weighted point tensor with `f64` coefficients.
pub type WeightedTensor64 = tensor::WeightedTensor<f64>;
