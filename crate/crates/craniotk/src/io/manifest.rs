//! JSON dataset manifests.
//!
//! Paths are stored as written and resolved against the manifest's own
//! directory when relative. Unknown fields are rejected.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use craniotk_core::craniectomy::CraniectomySpec;
use serde::{Deserialize, Serialize};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("schema violation at `{path}`: {message}")]
    SchemaViolation { path: String, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

type Result<T> = std::result::Result<T, ManifestError>;

fn violation(path: impl Into<String>, message: impl Into<String>) -> ManifestError {
    ManifestError::SchemaViolation { path: path.into(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetSubset {
    Train,
    Test,
    TestExtra,
}

impl DatasetSubset {
    pub fn name(self) -> &'static str {
        match self {
            DatasetSubset::Train => "train",
            DatasetSubset::Test => "test",
            DatasetSubset::TestExtra => "test-extra",
        }
    }

    /// Reporting group: training cases are reported as train-val.
    pub fn report_subset(self) -> craniotk_core::metrics::Subset {
        use craniotk_core::metrics::Subset;
        match self {
            DatasetSubset::Train => Subset::TrainVal,
            DatasetSubset::Test => Subset::Test,
            DatasetSubset::TestExtra => Subset::TestExtra,
        }
    }
}

impl std::str::FromStr for DatasetSubset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(DatasetSubset::Train),
            "test" => Ok(DatasetSubset::Test),
            "test-extra" => Ok(DatasetSubset::TestExtra),
            _ => Err(format!("unknown subset `{s}` (expected train, test or test-extra)")),
        }
    }
}

impl fmt::Display for DatasetSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Input channels of an exported training set, in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Defected,
    Prior,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CasePaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defected: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defect: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<String>,
}

impl CasePaths {
    fn entries(&self) -> [(&'static str, &Option<String>); 5] {
        [
            ("full", &self.full),
            ("defected", &self.defected),
            ("defect", &self.defect),
            ("transform", &self.transform),
            ("prior", &self.prior),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseEntry {
    pub case_id: String,
    pub subset: DatasetSubset,
    pub paths: CasePaths,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub craniectomy: Option<CraniectomySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_applied: Option<bool>,
}

impl CaseEntry {
    pub fn new(case_id: impl Into<String>, subset: DatasetSubset) -> Self {
        CaseEntry {
            case_id: case_id.into(),
            subset,
            paths: CasePaths::default(),
            seed: None,
            craniectomy: None,
            noise_applied: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub created_by: String,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<Vec<Channel>>,
    pub cases: Vec<CaseEntry>,
}

impl DatasetManifest {
    pub fn new(master_seed: u64) -> Self {
        DatasetManifest {
            format_version: MANIFEST_VERSION,
            created_by: crate::created_by(),
            master_seed,
            channels: None,
            cases: Vec::new(),
        }
    }

    /// Structural checks that serde cannot express.
    pub fn validate(&self) -> Result<()> {
        if self.format_version != MANIFEST_VERSION {
            return Err(violation("format_version", format!("unsupported version {}", self.format_version)));
        }
        let mut seen = BTreeSet::new();
        for (i, case) in self.cases.iter().enumerate() {
            if case.case_id.is_empty() {
                return Err(violation(format!("cases[{i}].case_id"), "empty case id"));
            }
            if !seen.insert(case.case_id.as_str()) {
                return Err(violation(format!("cases[{i}].case_id"), format!("duplicate case id `{}`", case.case_id)));
            }
            if case.paths.full.is_none() && case.paths.defected.is_none() {
                return Err(violation(format!("cases[{i}].paths"), "needs `full` or `defected`"));
            }
        }
        if let Some(channels) = &self.channels {
            if channels.first() != Some(&Channel::Defected) || channels.len() > 2 {
                return Err(violation("channels", "expected [defected] or [defected, prior]"));
            }
            if channels.contains(&Channel::Prior) {
                if let Some(i) = self.cases.iter().position(|c| c.paths.prior.is_none()) {
                    return Err(violation(format!("cases[{i}].paths.prior"), "prior channel declared but missing"));
                }
            }
        }
        Ok(())
    }

    /// Check that every referenced file exists relative to `base_dir`.
    pub fn validate_paths(&self, base_dir: &Path) -> Result<()> {
        for (i, case) in self.cases.iter().enumerate() {
            for (name, p) in case.paths.entries() {
                if let Some(p) = p {
                    if !resolve(base_dir, p).is_file() {
                        return Err(violation(
                            format!("cases[{i}].paths.{name}"),
                            format!("file `{p}` does not exist"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn case(&self, case_id: &str) -> Option<&CaseEntry> {
        self.cases.iter().find(|c| c.case_id == case_id)
    }
}

pub fn resolve(base_dir: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base_dir.join(p)
    }
}

/// Directory that relative paths in the manifest at `path` refer to.
pub fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Parse and validate manifest text (paths are not checked).
pub fn parse_manifest(text: &str) -> Result<DatasetManifest> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let manifest: DatasetManifest = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        violation(path, e.into_inner().to_string())
    })?;
    manifest.validate()?;
    Ok(manifest)
}

/// Read a manifest and check that every referenced file exists.
pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ManifestError::Io { path: path.display().to_string(), source })?;
    let manifest = parse_manifest(&text)?;
    manifest.validate_paths(&base_dir(path))?;
    Ok(manifest)
}

pub fn to_json(manifest: &DatasetManifest) -> String {
    let mut s = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    s.push('\n');
    s
}

pub fn write_manifest(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    manifest.validate()?;
    std::fs::write(path, to_json(manifest))
        .map_err(|source| ManifestError::Io { path: path.display().to_string(), source })
}
