//! Poincaré, log-Sobolev and Φ-Sobolev constants for the joint and mixture
//! laws produced by iterated sampling kernels: closed-form constants,
//! two-scale criteria checks, exact sampler runs, and empirical certificates.

pub mod constants;
pub mod criteria;
pub mod error;
pub mod estimators;
pub mod kernels;
pub mod linalg;
pub mod numeric;
pub mod phi;
pub mod rng;
pub mod samplers;

pub use constants::{Inequality, IsoperimetricProfile, RecursionState, TwoScaleInput};
pub use error::{Error, Result};
pub use kernels::{ConditionalFamily, GaussianKernel, TargetPotential};
pub use linalg::SpdMatrix;
pub use phi::{FiniteDistribution, PhiFunction};
