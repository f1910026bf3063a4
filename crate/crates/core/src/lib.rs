//! Dynamic mode decomposition with control from compressed measurements.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`] dense kernels (truncated SVD, eigendecomposition,
//!   pseudoinverse, DCT basis)
//! * [`measurement`] the compression operator `C`
//! * [`sparse_recovery`] CoSaMP and full-state vector recovery
//! * [`dmd`] exact DMD and DMD with control
//! * [`compressive`] compressive DMD / DMDc in all four branches
//! * [`testbed`] synthetic low-rank plants, noise and snapshot files
//! * [`verify`] executable commutation and controllability identities plus
//!   error metrics
//! * [`experiment`] sweep and ensemble runner

pub mod compressive;
pub mod dmd;
pub mod error;
pub mod experiment;
pub mod measurement;
pub mod numerics;
pub mod rng;
pub mod sparse_recovery;
pub mod testbed;
pub mod verify;

pub use error::{Error, Result};
pub use numerics::{Complex64, ComplexMatrix, RealMatrix};
