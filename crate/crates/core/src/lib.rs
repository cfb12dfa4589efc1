pub mod action;
pub mod automaton;
pub mod cocycle;
pub mod error;
pub mod full_group;
pub mod graph;
pub mod line_geometry;
pub mod pattern;
pub mod permgroup;
pub mod point;
pub mod recurrence;
pub mod scalar;
pub mod schreier;
pub mod stabilizer;
#[cfg(test)]
mod testkit;
pub mod verify;
pub mod window;

pub use action::{builtin_action, fragment_generators, ActionSystem, FragmentTable, GroupWord};
pub use error::{LabError, Result};
pub use point::BoundaryPoint;
pub use scalar::Scalar;

/// Exact scalar used by every certificate.
pub type Exact = num_rational::BigRational;
