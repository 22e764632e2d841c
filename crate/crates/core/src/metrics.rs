//! Overlap and surface-distance metrics, and per-subset aggregation into a
//! mean (std) report.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::math;
use crate::volume::{squared_distance_to, VoxelGrid};
use crate::{Error, Result};

/// `2|A∩B| / (|A|+|B|)`; two empty masks score 1.
pub fn dice(a: &VoxelGrid, b: &VoxelGrid) -> Result<f64> {
    let inter = a.intersection_count(b)?;
    let total = a.count_on() + b.count_on();
    if total == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / total as f64)
}

/// Which order statistic of the surface distances to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HdPercentile {
    Max,
    P95,
}

impl HdPercentile {
    pub fn value(self) -> u8 {
        match self {
            HdPercentile::Max => 100,
            HdPercentile::P95 => 95,
        }
    }

    pub fn from_value(v: u8) -> Result<Self> {
        match v {
            100 => Ok(HdPercentile::Max),
            95 => Ok(HdPercentile::P95),
            _ => Err(Error::InvalidParameter(format!("Hausdorff percentile must be 95 or 100, got {v}"))),
        }
    }
}

/// Distances (mm) from each surface voxel of `from` to the nearest surface
/// voxel of `to`, in increasing linear-index order of `from`.
pub fn directed_surface_distances(from: &VoxelGrid, to: &VoxelGrid) -> Result<Vec<f64>> {
    from.geometry().ensure_matches(to.geometry())?;
    let target = squared_distance_to(&to.surface());
    Ok(from.surface().iter_on().map(|lin| math::sqrt(target[lin])).collect())
}

/// Nearest-rank percentile of an unsorted sample.
fn nearest_rank(mut values: Vec<f64>, pct: u8) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    let rank = math::ceil(pct as f64 / 100.0 * values.len() as f64) as usize;
    values[rank.clamp(1, values.len()) - 1]
}

/// Symmetric Hausdorff distance in mm between the surfaces (face-adjacency
/// boundary voxels) of `a` and `b`. With [`HdPercentile::P95`] each directed
/// set is reduced to its 95th percentile (nearest rank) before taking the max.
pub fn hausdorff(a: &VoxelGrid, b: &VoxelGrid, percentile: HdPercentile) -> Result<f64> {
    a.geometry().ensure_matches(b.geometry())?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyMask);
    }
    let ab = directed_surface_distances(a, b)?;
    let ba = directed_surface_distances(b, a)?;
    let reduce = |d: Vec<f64>| match percentile {
        HdPercentile::Max => d.into_iter().fold(0.0, f64::max),
        HdPercentile::P95 => nearest_rank(d, 95),
    };
    Ok(reduce(ab).max(reduce(ba)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Subset {
    #[cfg_attr(feature = "serde", serde(rename = "test"))]
    Test,
    #[cfg_attr(feature = "serde", serde(rename = "test-extra"))]
    TestExtra,
    #[cfg_attr(feature = "serde", serde(rename = "train-val"))]
    TrainVal,
}

impl Subset {
    pub const ALL: [Subset; 3] = [Subset::Test, Subset::TestExtra, Subset::TrainVal];

    pub fn name(self) -> &'static str {
        match self {
            Subset::Test => "test",
            Subset::TestExtra => "test-extra",
            Subset::TrainVal => "train-val",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CaseRow {
    pub case_id: String,
    pub subset: Subset,
    pub dice: f64,
    /// `None` when either mask was empty; excluded from HD aggregates.
    pub hd_mm: Option<f64>,
}

/// Mean and population standard deviation over a group of rows.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Aggregate {
    pub n: usize,
    /// Rows with a defined HD.
    pub n_hd: usize,
    pub mean_dice: f64,
    pub std_dice: f64,
    pub mean_hd: Option<f64>,
    pub std_hd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReportMeta {
    pub format_version: u32,
    pub percentile: u8,
    pub std_kind: String,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvaluationReport {
    pub rows: Vec<CaseRow>,
    /// Keyed by subset name, plus `overall`.
    pub aggregates: BTreeMap<String, Aggregate>,
    pub meta: ReportMeta,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, math::sqrt(var))
}

fn aggregate_group<'a>(rows: impl Iterator<Item = &'a CaseRow> + Clone) -> Aggregate {
    let dices: Vec<f64> = rows.clone().map(|r| r.dice).collect();
    let hds: Vec<f64> = rows.filter_map(|r| r.hd_mm).collect();
    let (mean_dice, std_dice) = mean_std(&dices);
    let (mean_hd, std_hd) = if hds.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_std(&hds);
        (Some(m), Some(s))
    };
    Aggregate { n: dices.len(), n_hd: hds.len(), mean_dice, std_dice, mean_hd, std_hd }
}

/// Group rows by subset and overall. Standard deviations divide by N.
pub fn aggregate(rows: Vec<CaseRow>, percentile: HdPercentile) -> EvaluationReport {
    let mut aggregates = BTreeMap::new();
    for subset in Subset::ALL {
        let group = rows.iter().filter(move |r| r.subset == subset);
        if group.clone().next().is_some() {
            aggregates.insert(String::from(subset.name()), aggregate_group(group));
        }
    }
    if !rows.is_empty() {
        aggregates.insert(String::from("overall"), aggregate_group(rows.iter()));
    }
    EvaluationReport {
        rows,
        aggregates,
        meta: ReportMeta { format_version: 1, percentile: percentile.value(), std_kind: String::from("population") },
    }
}

impl EvaluationReport {
    /// Plain-text table: one line per subset, values as `mean (std)`.
    pub fn table(&self) -> String {
        let mut out = format!("{:<12} {:>5}  {:<18} {:<18}\n", "subset", "n", "Dice", "HD (mm)");
        let order = Subset::ALL.iter().map(|s| s.name()).chain(["overall"]);
        for name in order {
            if let Some(a) = self.aggregates.get(name) {
                let hd = match (a.mean_hd, a.std_hd) {
                    (Some(m), Some(s)) => format!("{m:.3} ({s:.3})"),
                    _ => String::from("-"),
                };
                out.push_str(&format!(
                    "{:<12} {:>5}  {:<18} {:<18}\n",
                    name,
                    a.n,
                    format!("{:.3} ({:.3})", a.mean_dice, a.std_dice),
                    hd
                ));
            }
        }
        out
    }
}
