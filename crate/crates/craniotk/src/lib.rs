//! Files, batch execution and the `craniotk` command-line driver built on
//! [`craniotk_core`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::Path;

pub mod cli;
pub mod config;
pub mod exec;
pub mod io;
pub mod log;
pub mod report;

pub use craniotk_core as core;

/// Tool name and version recorded in every emitted manifest and atlas.
pub fn created_by() -> String {
    format!("craniotk {}", env!("CARGO_PKG_VERSION"))
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Bad or missing flags; exit code 2.
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] craniotk_core::Error),
    #[error(transparent)]
    Nifti(#[from] io::nifti::NiftiError),
    #[error(transparent)]
    Manifest(#[from] io::manifest::ManifestError),
    #[error(transparent)]
    Transform(#[from] io::transform_file::TransformFileError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Format(String),
    #[error("{failed} of {total} cases failed")]
    CaseFailures { failed: usize, total: usize },
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io { path: path.display().to_string(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            _ => 1,
        }
    }

    /// Short machine-readable category for log lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Usage(_) => "usage",
            Error::Core(_) => "runtime",
            Error::Nifti(_) => "volume",
            Error::Manifest(_) => "manifest",
            Error::Transform(_) => "transform",
            Error::Io { .. } => "io",
            Error::Format(_) => "format",
            Error::CaseFailures { .. } => "case-failures",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
