//! Expression-defined scalar fields with exact derivative evaluation.
//!
//! A [`Jet`] carries the value of a function together with all mixed
//! partial Taylor coefficients up to order 3. Arithmetic on jets tracks
//! arithmetic on the underlying functions exactly, so every derivative
//! the curvature machinery needs (up to third partials of the metric) is
//! available to machine precision.

mod expr;
mod jet;
mod parser;

pub use expr::{Expr, ScalarField};
pub use jet::{Jet, JetShape, MAX_DIM, MAX_ORDER};
pub use parser::parse;
