use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

use crate::transform::RigidTransform;

/// Errors raised by the mask-processing operations.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Grid dimensions or spacing violate the geometry invariants.
    InvalidGeometry(String),
    /// Two grids that must share geometry do not.
    GeometryMismatch,
    /// A data buffer does not match the grid it is meant to fill.
    LengthMismatch { expected: usize, actual: usize },
    /// The operation needs at least one set voxel.
    EmptyMask,
    /// The operation needs at least one unset voxel.
    FullMask,
    /// A parameter is outside its documented domain.
    InvalidParameter(String),
    /// A shape or template does not fit the target grid.
    OutOfBounds,
    /// No skull surface voxels were found in the upper region.
    NoUpperSurface,
    /// The craniectomy template does not intersect the skull.
    EmptyDefect,
    /// Registration got an empty mask.
    EmptyInput,
    /// Registration hit the iteration cap while still improving.
    NonConvergence { best: Box<RigidTransform>, objective: f64 },
    /// A matrix is not a proper rigid transform.
    NotRigid,
    /// Too many per-case failures while building an atlas.
    TooManyFailures { failed: usize, total: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidGeometry(msg) => write!(f, "invalid geometry: {msg}"),
            Error::GeometryMismatch => f.write_str("grid geometries differ"),
            Error::LengthMismatch { expected, actual } => {
                write!(f, "data length {actual} does not match grid size {expected}")
            }
            Error::EmptyMask => f.write_str("mask is empty"),
            Error::FullMask => f.write_str("mask is full"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::OutOfBounds => f.write_str("shape lies outside the grid"),
            Error::NoUpperSurface => f.write_str("no skull surface voxels in the upper region"),
            Error::EmptyDefect => f.write_str("template does not intersect the skull"),
            Error::EmptyInput => f.write_str("registration input mask is empty"),
            Error::NonConvergence { objective, .. } => {
                write!(f, "registration did not converge (best objective {objective})")
            }
            Error::NotRigid => f.write_str("matrix is not a rigid transform"),
            Error::TooManyFailures { failed, total } => {
                write!(f, "{failed} of {total} cases failed")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
