use std::path::PathBuf;

use clap::Args;
use craniotk_core::registration::{resample, FixedImage, Interpolation};
use serde_json::json;

use super::{
    absolute, create_dir, for_each_case, input_path, load_manifest, missing, registration_options, Context,
    TrainingVariant,
};
use crate::io::atlas_store::BINARY_FILE;
use crate::io::{read_atlas, read_volume, write_manifest, write_transform, write_volume, CaseEntry, DatasetManifest};
use crate::{log, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRAINING_MANIFEST_FILE: &str = "training_manifest.json";

#[derive(Debug, Args)]
pub struct RegisterArgs {
    /// Single mode: skull to register.
    #[arg(long, conflicts_with = "manifest")]
    pub moving: Option<PathBuf>,
    /// Atlas directory.
    #[arg(long)]
    pub atlas: PathBuf,
    /// Single mode: where to write the 4×4 transform.
    #[arg(long, requires = "moving")]
    pub out_transform: Option<PathBuf>,
    /// Single mode: optional moving skull resampled onto the atlas grid.
    #[arg(long, requires = "moving")]
    pub out_resampled: Option<PathBuf>,
    /// Batch mode: register every case (defected skull, else full skull).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Batch mode output directory.
    #[arg(long, requires = "manifest")]
    pub out_dir: Option<PathBuf>,
    /// Batch mode: also write atlas-space training inputs in this layout.
    #[arg(long, value_enum, requires = "manifest")]
    pub export_training: Option<TrainingVariant>,
}

pub(super) fn run(args: RegisterArgs, ctx: &Context) -> Result<()> {
    let mut s = ctx.settings();
    let opts = registration_options(&mut s)?;
    let export = s.get_opt("export_training", args.export_training)?;
    let pool = ctx.pool(&mut s)?;
    if args.moving.is_none() && args.manifest.is_none() {
        return Err(missing("--moving or --manifest"));
    }
    log::header("register", &s);
    let atlas = read_atlas(&args.atlas)?;
    let fixed = FixedImage::new(&atlas.binary, opts)?;
    let grid = *atlas.binary.geometry();

    if let Some(moving_path) = &args.moving {
        let out_transform = args.out_transform.as_ref().ok_or_else(|| missing("--out-transform"))?;
        let moving = read_volume(moving_path)?;
        let reg = fixed.register(&moving)?;
        write_transform(&reg.transform, out_transform)?;
        if let Some(out) = &args.out_resampled {
            write_volume(&resample(&moving, &reg.transform, &grid, Interpolation::Nearest), out)?;
        }
        log::done("register", registration_detail(&reg));
        return Ok(());
    }

    let manifest_path = args.manifest.as_ref().expect("checked above");
    let out_dir = args.out_dir.as_ref().ok_or_else(|| missing("--out-dir"))?;
    let (input, base) = load_manifest(manifest_path)?;
    create_dir(out_dir)?;
    let prior = absolute(&args.atlas.join(BINARY_FILE))?;

    let (results, failure) = for_each_case(&pool, &input.cases, |_, case| {
        let source = case.paths.defected.as_deref().or(case.paths.full.as_deref()).expect("manifest validated");
        let moving = read_volume(&input_path(&base, source))?;
        let reg = fixed.register(&moving)?;
        let id = &case.case_id;
        let t_name = format!("{id}.mat");
        let r_name = format!("{id}_registered.nii.gz");
        write_transform(&reg.transform, &out_dir.join(&t_name))?;
        let registered = resample(&moving, &reg.transform, &grid, Interpolation::Nearest);
        write_volume(&registered, &out_dir.join(&r_name))?;

        let mut entry = case.clone();
        for p in [&mut entry.paths.full, &mut entry.paths.defected, &mut entry.paths.defect, &mut entry.paths.prior] {
            if let Some(rel) = p.as_mut() {
                *rel = absolute(&input_path(&base, rel))?;
            }
        }
        entry.paths.transform = Some(t_name.clone());

        let training = match export {
            Some(variant) => {
                let mut t = CaseEntry::new(id.clone(), case.subset);
                t.paths.defected = Some(r_name);
                if let Some(defect) = &case.paths.defect {
                    let y = read_volume(&input_path(&base, defect))?;
                    let y_name = format!("{id}_defect_common.nii.gz");
                    write_volume(&resample(&y, &reg.transform, &grid, Interpolation::Nearest), &out_dir.join(&y_name))?;
                    t.paths.defect = Some(y_name);
                }
                t.paths.transform = Some(t_name);
                if variant == TrainingVariant::DeShape {
                    t.paths.prior = Some(prior.clone());
                }
                t.seed = case.seed;
                t.craniectomy = case.craniectomy;
                t.noise_applied = case.noise_applied;
                Some(t)
            }
            None => None,
        };
        Ok(((entry, training), registration_detail(&reg)))
    });

    let (entries, training): (Vec<CaseEntry>, Vec<Option<CaseEntry>>) = results.into_iter().unzip();
    let mut manifest = DatasetManifest::new(input.master_seed);
    manifest.cases = entries;
    write_manifest(&manifest, &out_dir.join(MANIFEST_FILE))?;
    if let Some(variant) = export {
        let mut t = DatasetManifest::new(input.master_seed);
        t.channels = Some(variant.channels());
        t.cases = training.into_iter().flatten().collect();
        write_manifest(&t, &out_dir.join(TRAINING_MANIFEST_FILE))?;
    }
    log::done("register", json!({ "cases": manifest.cases.len() }));
    failure.map_or(Ok(()), Err)
}

fn registration_detail(reg: &craniotk_core::registration::Registration) -> serde_json::Value {
    json!({
        "objective_initial": reg.objective_initial,
        "objective": reg.objective,
        "iterations": reg.iterations,
        "converged": reg.converged,
    })
}
