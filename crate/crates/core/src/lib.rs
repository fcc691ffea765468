//! Constraint qualifications, Slater points and Lagrange multipliers for
//! optimization problems with pointwise box constraints and finitely many
//! linear (and smooth nonlinear) constraints on discrete Lebesgue spaces.

pub mod acceptance;
pub mod certificates;
pub mod cones;
pub mod error;
pub mod io;
pub mod kkt;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod preprocess;
mod serde_ext;
pub mod slater;

pub use error::{Error, Result};
pub use model::{
    Activity, ExtBound, Exponent, FeasibilityReport, LinearEquality, LinearInequality,
    MeasureSpace, NonlinearConstraint, Problem, QuadraticConstraint, RegionPartition,
    SimpleFunction,
};
