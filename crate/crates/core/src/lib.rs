//! Dual precertificates and determinant criteria for positive sparse-spike recovery.

pub mod certificates;
pub mod dd;
pub mod determinants;
pub mod error;
pub mod framework;
pub mod kernel;
pub mod linalg;
pub mod normalization;
pub mod scalar;
pub mod solver;

pub use dd::DoubleDouble;
pub use error::{Result, SpikeError};
pub use framework::{Framework, MeasureKind, Observation, SamplingMeasure, SpikeConfiguration};
pub use kernel::{hermite_aux, Kernel, KernelFamily};
pub use scalar::Scalar;

/// Everyday working precision.
pub type Real = f64;
/// Extended precision used for ill-conditioned systems.
pub type Extended = DoubleDouble;
