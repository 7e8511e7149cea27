//! Loss-function laboratory.
//!
//! The differentiable core ([`autodiff`], [`nn`], [`optim`], [`losses`],
//! [`advantage`]) is generic over [`Scalar`]; the aliases below fix it to
//! `f64`, which is what the environments and trainers use.

pub mod advantage;
pub mod autodiff;
pub mod env;
pub mod gradcheck;
pub mod losses;
pub mod nn;
pub mod optim;
pub mod scalar;
pub mod trainer;
pub mod verify;

pub use scalar::Scalar;

/// Working precision of the environments and trainers.
pub type Real = f64;
pub type Tape = autodiff::Tape<Real>;
pub type Mlp = nn::MlpParams<Real>;
pub type PolicyOutput = nn::PolicyOutput<Real>;
pub type LossConfig = losses::LossConfig<Real>;
pub type AdvantageBatch = advantage::AdvantageBatch<Real>;
pub type RolloutSegment = advantage::RolloutSegment<Real>;
pub type Optimizer = optim::Optimizer<Real>;
pub type OptimizerConfig = optim::OptimizerConfig<Real>;
