//! Chart-level conformal geometry: gauge metrics, Weyl structures,
//! curvature decomposition, and the Möbius/Laplace operators.

mod chart;
mod curvature;
mod gauge;
mod operators;

pub use chart::{ConformalChart, WeylStructure};
pub use curvature::{
    curvature_package, curvature_package_at, transform_check, CurvaturePackage,
    TransformReport,
};
pub use gauge::{invert_jet_matrix, GaugePoint, JetTensor};
pub use operators::{
    hessian_weighted, hessian_weighted_at, laplace_canonical, laplace_canonical_with,
    laplace_sigma_at, mobius_canonical, mobius_canonical_with, mobius_h0_at,
    schouten_for_gauge, Density, LaplaceStructure, MobiusStructure,
};

#[cfg(test)]
mod tests;
