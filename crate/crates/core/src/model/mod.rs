//! Geometry, grids, data profiles and the quadratic nonlinearity.
//!
//! Radial solutions are carried in the reduced variable v = r·u. For radial u the
//! equation □u = Q(u′) becomes v_tt − v_rr = r·Q(u_t, u_r) with u_t = v_t/r and
//! u_r = v_r/r − v/r².

pub mod derived;
pub mod form;
pub mod grid;
pub mod profile;

pub use derived::{to_reduced, to_u, velocity_fields, velocity_fields_from, Radii};
pub use form::{eval_q, QuadraticForm};
pub use grid::{make_grid, make_grid_with, Geometry, MemoryCap, RadialGrid, DEFAULT_CFL};
pub use profile::{sample_data, DataProfile, Shape};
