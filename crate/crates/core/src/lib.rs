//! Numerical laboratory for Hardy-type inequalities on convex bodies,
//! Poincaré constants, K. Ball bodies of log-concave measures and radial
//! transport maps.

pub mod ball_body;
pub mod body;
pub mod cli;
pub mod error;
pub mod inequalities;
pub mod linalg;
pub mod measures;
pub mod poincare;
pub mod radial_map;
pub mod quadrature;
pub mod special;
pub mod sphere;

pub use error::{KlsError, Result};
