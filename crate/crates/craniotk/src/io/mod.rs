//! File formats: NIfTI-1 volumes, JSON manifests, transform files and the
//! atlas directory layout.

pub mod atlas_store;
pub mod manifest;
pub mod nifti;
pub mod transform_file;

pub use atlas_store::{read_atlas, write_atlas};
pub use manifest::{read_manifest, write_manifest, CaseEntry, CasePaths, Channel, DatasetManifest, DatasetSubset};
pub use nifti::{read_scalar_volume, read_volume, write_scalar_volume, write_volume};
pub use transform_file::{read_transform, write_transform};
