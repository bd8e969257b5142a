//! Geometry of Carnot groups: stratified Lie algebras, normal geodesics,
//! Jacobian-density contraction analysis, closed-form Heisenberg oracle,
//! singularity audit, and Riemannian comparison models.
//!
//! Convention: the Lie bracket is the classical commutator `[X, Y] = XY - YX`
//! on the matrix model, fixed globally; all structure constants and momentum
//! equations in this crate are calibrated to it.

pub mod builtin;
pub mod contraction;
pub mod geodesic;
pub mod heisenberg;
pub mod lie;
pub mod riemann;
pub mod singularity;

pub use contraction::{
    DensityConfig, DensityProfile, McpReport, McpViolation, SamplerConfig,
};
pub use geodesic::{Covector, GeodesicPath, LayerOrderReport};
pub use heisenberg::{MonteCarloReport, SetSpec};
pub use lie::{
    AlgebraVector, CarnotSpec, GroupPoint, SpecError, ValidationReport, Violation,
};
pub use riemann::{ComparisonReport, JacobiSolution};
pub use singularity::{
    FatVerdict, IdealScreen, SingularSearchOutcome, SingularWitness, VerdictReport,
};
