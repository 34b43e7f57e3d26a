//! Dense linear algebra primitives shared by the abstraction pipeline.

mod eig;
mod expm;
mod hull;
mod matrix;
mod simplex;

pub use eig::{lambda_max, lambda_min, operator_norm_2, sym_eig_extremes};
pub use expm::{expm, int_expm};
pub use hull::{convex_hull, Hull};
pub use matrix::{Matrix, Vector};
pub use simplex::lp_feasible;
