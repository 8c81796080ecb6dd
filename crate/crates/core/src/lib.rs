//! Radial wave laboratory: reduced solvers, norms and estimate checks for □u = Q(u′)
//! in Minkowski space and outside a ball.

pub mod decay;
pub mod error;
pub mod estimates;
pub mod fit;
pub mod lifespan;
pub mod linear;
pub mod model;
pub mod norms;
pub mod par;
pub mod picard;
pub mod report;
pub mod rk4;
pub mod semilinear;

pub use error::{Error, Result};
