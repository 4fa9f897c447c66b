//! Joint beamforming, BD-RIS configuration, and movable sub-panel placement
//! for multi-user MISO downlinks.
//!
//! The library models a base station serving single-antenna users through a
//! group-connected beyond-diagonal RIS whose sub-panels can be repositioned
//! inside a planar region. Sum-rate maximization runs as a block-coordinate
//! loop: fractional-programming auxiliaries in closed form, a power-constrained
//! beamformer via bisection, a partially proximal ADMM for the block-diagonal
//! admittance matrix, and successive convex approximation for the sub-panel
//! reference points. A seeded Monte-Carlo harness sweeps surface sizes,
//! architectures, and moving ranges, and emits CSV results.
//!
//! All numerics are generic over the real scalar through [`scalar::Real`];
//! `f64` aliases for the main types live at the crate root.

pub mod admm;
pub mod beamforming;
pub mod channel;
pub mod error;
pub mod fp;
pub mod geometry;
pub mod placement;
pub mod ris;
pub mod scalar;
pub mod selftest;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::{CMat, CVec, Real, RMat, RVec, Vec2, C};

// Concrete aliases at the default precision.
pub type CMat64 = CMat<f64>;
pub type CVec64 = CVec<f64>;
pub type RMat64 = RMat<f64>;
pub type RVec64 = RVec<f64>;
pub type Vec264 = Vec2<f64>;
pub type SystemGeometry64 = geometry::SystemGeometry<f64>;
pub type Region64 = geometry::Region<f64>;
pub type PathEnvironment64 = channel::PathEnvironment<f64>;
pub type ChannelSet64 = channel::ChannelSet<f64>;
pub type AdmittanceMatrix64 = ris::AdmittanceMatrix<f64>;
pub type ScatteringMatrix64 = ris::ScatteringMatrix<f64>;
pub type OptimizerConfig64 = fp::OptimizerConfig<f64>;
pub type OptimizeResult64 = fp::OptimizeResult<f64>;
pub type AdmmConfig64 = admm::AdmmConfig<f64>;
pub type PlacementConfig64 = placement::PlacementConfig<f64>;
pub type ExperimentSpec64 = sim::ExperimentSpec<f64>;
pub type ScenarioParams64 = sim::ScenarioParams<f64>;
