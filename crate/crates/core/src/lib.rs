//! Binary skull-mask processing for cranial implant design.
//!
//! Everything in this crate operates on dense binary voxel grids with
//! physical geometry (spacing and origin in millimetres):
//!
//! * [`volume`] holds [`VoxelGrid`] / [`ScalarGrid`] and the geometry-aware
//!   mask operations (thresholding, morphology, exact distance transforms,
//!   connected components).
//! * [`phantom`] rasterizes synthetic full skulls.
//! * [`craniectomy`] removes simulated bone flaps to build training triplets.
//! * [`registration`] aligns masks rigidly to a common space and resamples.
//! * [`atlas`] averages registered skulls into a shape prior.
//! * [`reconstruct`] implements the classical implant estimators.
//! * [`metrics`] computes Dice / Hausdorff and aggregates reports.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! parallel batch drivers live in the `craniotk` crate.
#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod atlas;
pub mod craniectomy;
mod error;
pub mod geometry;
pub mod math;
pub mod metrics;
pub mod phantom;
pub mod reconstruct;
pub mod registration;
pub mod rng;
pub mod transform;
pub mod volume;

pub use error::Error;
pub use geometry::Geometry;
pub use transform::RigidTransform;
pub use volume::{ScalarGrid, VoxelGrid};

pub type Result<T, E = Error> = core::result::Result<T, E>;
