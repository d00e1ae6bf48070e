//! Explicit variational solution of u_t + f(u)_x = α(t)u on the quarter
//! plane (strictly convex superlinear f), its defining-property checks, and
//! an independent finite-volume reference solver.

pub mod boundary;
pub mod error;
pub mod flux;
pub mod functional;
pub mod hcurve;
pub mod piecewise;
pub mod problem;
pub mod solver;
pub mod source;

pub use error::{Error, Result};
