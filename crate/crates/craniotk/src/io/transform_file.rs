//! ASCII 4×4 transform files (FLIRT `.mat` layout): four lines of four
//! whitespace-separated numbers mapping original-space world coordinates
//! (mm) to common-space world coordinates. Lines starting with `#` are
//! comments; the writer emits a single version comment first.

use std::path::Path;

use craniotk_core::RigidTransform;

pub const HEADER: &str = "# craniotk rigid transform v1";

#[derive(Debug, thiserror::Error)]
pub enum TransformFileError {
    #[error("malformed transform file: {0}")]
    Malformed(String),
    #[error(transparent)]
    NotRigid(#[from] craniotk_core::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Text form; 17 significant digits so every entry round-trips exactly.
pub fn format_transform(t: &RigidTransform) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for row in t.matrix() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_transform(text: &str) -> Result<RigidTransform, TransformFileError> {
    let rows: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).collect();
    if rows.len() != 4 {
        return Err(TransformFileError::Malformed(format!("expected 4 rows, found {}", rows.len())));
    }
    let mut m = [[0.0; 4]; 4];
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<&str> = row.split_whitespace().collect();
        if cells.len() != 4 {
            return Err(TransformFileError::Malformed(format!("row {} has {} values", i + 1, cells.len())));
        }
        for (j, cell) in cells.iter().enumerate() {
            m[i][j] = cell
                .parse()
                .map_err(|_| TransformFileError::Malformed(format!("row {}: `{cell}` is not a number", i + 1)))?;
        }
    }
    Ok(RigidTransform::from_matrix(m)?)
}

pub fn read_transform(path: &Path) -> Result<RigidTransform, TransformFileError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| TransformFileError::Io { path: path.display().to_string(), source })?;
    parse_transform(&text)
}

pub fn write_transform(t: &RigidTransform, path: &Path) -> Result<(), TransformFileError> {
    std::fs::write(path, format_transform(t))
        .map_err(|source| TransformFileError::Io { path: path.display().to_string(), source })
}
