//! Conservative low-rank tensor solver for the Vlasov-Poisson system.
//!
//! 1D1V solutions are stored as truncated-SVD matrices ([`LowRankMatrix`]),
//! 2D2V solutions as fourth-order hierarchical Tucker tensors
//! ([`HTensor`]). Every truncation can be made conservative: the local mass,
//! momentum and kinetic-energy densities of the solution are preserved to
//! round-off through a weighted orthogonal projection.

pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod htucker;
mod linalg;
pub mod lowrank;
pub mod poisson;
pub mod stencil;
pub mod stepper;

pub use error::{Error, Result};
pub use grid::{AxisGrid, VelocityWeights, WeightSpec};
pub use htucker::{HTensor, Moments2D, RankTuple, VBasis2D};
pub use lowrank::{conservative_truncate, LowRankMatrix, Moments1D, ProjectorLevel, VBasis1D};
