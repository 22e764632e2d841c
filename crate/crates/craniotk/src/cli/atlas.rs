use std::path::PathBuf;

use clap::Args;
use craniotk_core::atlas::{build_atlas, AtlasOptions, CaseMap};
use craniotk_core::registration::CommonGridSpec;
use craniotk_core::Error as CoreError;
use serde_json::json;

use super::{input_path, load_manifest, registration_options, Context};
use crate::config::parse_triple;
use crate::io::{read_volume, write_atlas, DatasetSubset};
use crate::{log, Error, Result};

#[derive(Debug, Args)]
pub struct AtlasArgs {
    /// Manifest(s) listing full skulls; repeatable.
    #[arg(long, required = true)]
    pub manifest: Vec<PathBuf>,
    /// Occupancy threshold for the binary atlas (voxel set when average >= t).
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Refinement rounds after the initial round.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Common grid size in voxels: one value or `x,y,z`.
    #[arg(long, value_parser = parse_triple::<usize>)]
    pub grid_dims: Option<[usize; 3]>,
    /// Common grid spacing in mm: one value or `x,y,z`.
    #[arg(long, value_parser = parse_triple::<f64>)]
    pub grid_spacing: Option<[f64; 3]>,
    /// Only use cases from this subset.
    #[arg(long)]
    pub subset: Option<DatasetSubset>,
}

pub(super) fn run(args: AtlasArgs, ctx: &Context) -> Result<()> {
    let mut s = ctx.settings();
    let threshold = s.get("threshold", args.threshold, 0.5)?;
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Usage("--threshold must be in [0, 1]".into()));
    }
    let iterations = s.get("iterations", args.iterations, 2)?;
    let dims = s.get("grid_dims", args.grid_dims, CommonGridSpec::DEFAULT_DIMS)?;
    let spacing = s.get("grid_spacing", args.grid_spacing, CommonGridSpec::DEFAULT_SPACING)?;
    let subset = s.get_opt("subset", args.subset)?;
    let registration = registration_options(&mut s)?;
    let pool = ctx.pool(&mut s)?;
    log::header("atlas", &s);

    let mut cases = Vec::new();
    for path in &args.manifest {
        let (manifest, base) = load_manifest(path)?;
        for c in manifest.cases {
            if let Some(full) = &c.paths.full {
                if subset.is_none_or(|s| s == c.subset) {
                    cases.push((c.case_id.clone(), input_path(&base, full)));
                }
            }
        }
    }
    let mut ids: Vec<&str> = cases.iter().map(|c| c.0.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Format(format!("case `{}` appears in more than one manifest", w[0])));
    }
    if cases.len() < 2 {
        return Err(Error::Format(format!("atlas needs at least 2 full skulls, manifest has {}", cases.len())));
    }
    let loaded = pool.map(cases.len(), |i| read_volume(&cases[i].1));
    let mut inputs = Vec::with_capacity(cases.len());
    for ((id, _), skull) in cases.iter().zip(loaded) {
        inputs.push((id.clone(), skull?));
    }
    let center = inputs[0].1.centroid().ok_or(CoreError::EmptyMask)?;
    let options = AtlasOptions {
        threshold,
        iterations,
        grid: Some(CommonGridSpec::with_size(dims, spacing, center)),
        registration,
    };
    let atlas = build_atlas(&inputs, &options, &pool)?;
    for id in &atlas.provenance.failed_ids {
        log::emit(json!({ "event": "case", "case_id": id, "status": "failed", "kind": "registration" }));
    }
    write_atlas(&atlas, &args.out)?;
    log::done(
        "atlas",
        json!({
            "cases": atlas.provenance.case_ids.len(),
            "failed": atlas.provenance.failed_ids.len(),
            "round_mean_dice": atlas.provenance.round_mean_dice,
            "voxels": atlas.binary.count_on(),
        }),
    );
    Ok(())
}
