use std::path::PathBuf;

use clap::Args;
use craniotk_core::phantom::{fitting_geometry, generate_phantom, sample_population, PhantomSpec, Variability};
use serde_json::json;

use super::{create_dir, for_each_case, missing, Context};
use crate::config::{parse_triple, Source};
use crate::io::{write_manifest, write_volume, CaseEntry, DatasetManifest, DatasetSubset};
use crate::{log, Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Args)]
pub struct PhantomArgs {
    /// Number of skulls.
    #[arg(long)]
    pub n: Option<usize>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Voxel spacing in mm: one value or `x,y,z`.
    #[arg(long, value_parser = parse_triple::<f64>)]
    pub spacing: Option<[f64; 3]>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Subset recorded for every case.
    #[arg(long)]
    pub subset: Option<DatasetSubset>,
    #[arg(long)]
    pub id_prefix: Option<String>,
    /// Empty margin around each skull, in mm.
    #[arg(long)]
    pub margin_mm: Option<f64>,
    /// Use the base shape for every case (no random jitter in shape or pose).
    #[arg(long)]
    pub fixed_shape: bool,
}

pub(super) fn run(args: PhantomArgs, ctx: &Context) -> Result<()> {
    let mut s = ctx.settings();
    let n = s.get_opt("n", args.n)?.ok_or_else(|| missing("--n"))?;
    if n == 0 {
        return Err(Error::Usage("--n must be at least 1".into()));
    }
    let seed = s.get("seed", args.seed, 0u64)?;
    let spacing = s.get("spacing", args.spacing, [1.0; 3])?;
    if spacing.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::Usage("--spacing must be positive".into()));
    }
    let margin = s.get("margin_mm", args.margin_mm, 10.0)?;
    if !(margin >= 0.0) {
        return Err(Error::Usage("--margin-mm must be >= 0".into()));
    }
    let subset = s.get("subset", args.subset, DatasetSubset::Train)?;
    let prefix = s.get("id_prefix", args.id_prefix, "case".to_string())?;
    let variability = if args.fixed_shape { Variability::NONE } else { Variability::default() };
    s.record("variability", format!("{variability:?}"), if args.fixed_shape { Source::Flag } else { Source::Default });
    let pool = ctx.pool(&mut s)?;
    log::header("phantom", &s);

    create_dir(&args.out_dir)?;
    let specs = sample_population(n, seed, &PhantomSpec::default(), &variability)?;
    let cases: Vec<CaseEntry> = (0..n).map(|i| CaseEntry::new(format!("{prefix}_{i:04}"), subset)).collect();
    let out_dir = &args.out_dir;
    let (cases, failure) = for_each_case(&pool, &cases, |i, case| {
        let spec = &specs[i];
        let geometry = fitting_geometry(spec, spacing, margin)?;
        let skull = generate_phantom(spec, &geometry)?;
        let name = format!("{}_full.nii.gz", case.case_id);
        write_volume(&skull, &out_dir.join(&name))?;
        let mut entry = case.clone();
        entry.paths.full = Some(name);
        entry.seed = Some(spec.seed);
        Ok((entry, json!({ "voxels": skull.count_on(), "dims": geometry.dims })))
    });

    let mut manifest = DatasetManifest::new(seed);
    manifest.cases = cases;
    write_manifest(&manifest, &out_dir.join(MANIFEST_FILE))?;
    log::done("phantom", json!({ "cases": manifest.cases.len() }));
    failure.map_or(Ok(()), Err)
}
