//! On-disk atlas: a directory holding the float32 average, the uint8
//! binary mask and an `atlas.txt` key-value sidecar with the threshold, the
//! full-precision common grid and the build provenance.

use std::collections::BTreeMap;
use std::path::Path;

use craniotk_core::atlas::{Atlas, AtlasProvenance};
use craniotk_core::registration::CommonGridSpec;
use craniotk_core::Geometry;

use super::nifti;
use crate::{Error, Result};

pub const AVERAGE_FILE: &str = "average.nii.gz";
pub const BINARY_FILE: &str = "binary.nii.gz";
pub const SIDECAR_FILE: &str = "atlas.txt";
pub const ATLAS_VERSION: u32 = 1;

/// Largest geometry drift accepted when re-labelling a float32 header with
/// the sidecar's full-precision grid.
pub const HEADER_PRECISION_MM: f64 = 1e-3;

fn join<T: std::fmt::Display>(v: &[T], sep: &str) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(sep)
}

fn sidecar(atlas: &Atlas) -> String {
    let g = &atlas.grid;
    let p = &atlas.provenance;
    let fmt3 = |v: &[f64; 3]| join(&v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>(), " ");
    let mut s = String::from("# craniotk atlas\n");
    s.push_str(&format!("format_version = {ATLAS_VERSION}\n"));
    s.push_str(&format!("created_by = {}\n", crate::created_by()));
    s.push_str(&format!("threshold = {:?}\n", atlas.threshold));
    s.push_str(&format!("dims = {}\n", join(&g.dims, " ")));
    s.push_str(&format!("spacing = {}\n", fmt3(&g.spacing)));
    s.push_str(&format!("origin = {}\n", fmt3(&g.origin)));
    s.push_str(&format!("cases = {}\n", join(&p.case_ids, ",")));
    s.push_str(&format!("failed = {}\n", join(&p.failed_ids, ",")));
    s.push_str(&format!(
        "round_mean_dice = {}\n",
        join(&p.round_mean_dice.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>(), " ")
    ));
    s
}

/// Parse `key = value` lines; `#` starts a comment line.
pub fn parse_key_values(text: &str) -> std::result::Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected `key = value`", n + 1))?;
        let k = k.trim();
        if out.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(format!("line {}: duplicate key `{k}`", n + 1));
        }
    }
    Ok(out)
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Format(format!("atlas sidecar: {}", msg.into()))
}

fn field<'a>(kv: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str> {
    kv.get(key).map(String::as_str).ok_or_else(|| bad(format!("missing `{key}`")))
}

fn numbers<T: std::str::FromStr>(s: &str, key: &str) -> Result<Vec<T>> {
    s.split_whitespace().map(|x| x.parse().map_err(|_| bad(format!("bad value in `{key}`")))).collect()
}

fn three<T: std::str::FromStr + Copy>(kv: &BTreeMap<String, String>, key: &str) -> Result<[T; 3]> {
    let v: Vec<T> = numbers(field(kv, key)?, key)?;
    v.try_into().map_err(|_| bad(format!("`{key}` needs three values")))
}

fn list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(String::from).collect()
}

pub fn write_atlas(atlas: &Atlas, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    nifti::write_scalar_volume(&atlas.average, &dir.join(AVERAGE_FILE))?;
    nifti::write_volume(&atlas.binary, &dir.join(BINARY_FILE))?;
    let path = dir.join(SIDECAR_FILE);
    std::fs::write(&path, sidecar(atlas)).map_err(|e| Error::io(&path, e))
}

/// Replace a header geometry that agrees with `exact` to float32 precision.
pub fn conform(found: &Geometry, exact: &Geometry) -> Result<Geometry> {
    let close = |a: &[f64; 3], b: &[f64; 3]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= HEADER_PRECISION_MM);
    if found.dims == exact.dims && close(&found.spacing, &exact.spacing) && close(&found.origin, &exact.origin) {
        Ok(*exact)
    } else {
        Err(Error::Core(craniotk_core::Error::GeometryMismatch))
    }
}

pub fn read_atlas(dir: &Path) -> Result<Atlas> {
    let path = dir.join(SIDECAR_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let kv = parse_key_values(&text).map_err(bad)?;
    let version: u32 = field(&kv, "format_version")?.parse().map_err(|_| bad("bad format_version"))?;
    if version != ATLAS_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let threshold: f64 = field(&kv, "threshold")?.parse().map_err(|_| bad("bad threshold"))?;
    let grid =
        CommonGridSpec { dims: three(&kv, "dims")?, spacing: three(&kv, "spacing")?, origin: three(&kv, "origin")? };
    let geometry = grid.geometry()?;
    let provenance = AtlasProvenance {
        case_ids: list(field(&kv, "cases")?),
        failed_ids: list(field(&kv, "failed")?),
        round_mean_dice: numbers(field(&kv, "round_mean_dice")?, "round_mean_dice")?,
    };

    let average = nifti::read_scalar_volume(&dir.join(AVERAGE_FILE))?;
    let g = conform(average.geometry(), &geometry)?;
    let average = craniotk_core::ScalarGrid::new(g, average.into_data())?;
    let binary = nifti::read_volume(&dir.join(BINARY_FILE))?;
    let g = conform(binary.geometry(), &geometry)?;
    let binary = binary.with_geometry(g)?;
    let mut atlas = Atlas::from_average(average, threshold, provenance)?;
    // The stored mask was thresholded at full precision; keep it.
    atlas.binary = binary;
    atlas.grid = grid;
    Ok(atlas)
}
