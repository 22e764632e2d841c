use std::path::PathBuf;

use clap::{Args, ValueEnum};
use craniotk_core::craniectomy::{apply_craniectomy, sample_spec, CraniectomyConfig, TemplateKind};
use craniotk_core::registration::{resample, FixedImage, Interpolation};
use craniotk_core::rng::derive_seed;
use serde_json::json;

use super::{
    absolute, create_dir, for_each_case, input_path, load_manifest, registration_options, Context, TrainingVariant,
};
use crate::io::atlas_store::BINARY_FILE;
use crate::io::{
    read_atlas, read_volume, write_manifest, write_transform, write_volume, CaseEntry, DatasetManifest, DatasetSubset,
};
use crate::{log, Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRAINING_MANIFEST_FILE: &str = "training_manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TemplateChoice {
    /// Sphere, cube and challenge templates with equal probability.
    Auto,
    Sphere,
    Cube,
    Challenge,
}

impl TemplateChoice {
    fn config(self) -> CraniectomyConfig {
        match self {
            TemplateChoice::Auto => CraniectomyConfig::default(),
            TemplateChoice::Sphere => CraniectomyConfig::only(TemplateKind::Sphere),
            TemplateChoice::Cube => CraniectomyConfig::only(TemplateKind::Cube),
            TemplateChoice::Challenge => CraniectomyConfig::only(TemplateKind::Challenge),
        }
    }
}

#[derive(Debug, Args)]
pub struct CraniectomyArgs {
    /// Manifest listing full skulls.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub template: Option<TemplateChoice>,
    /// Salt-and-pepper flip probability applied to the defected skull.
    #[arg(long)]
    pub noise_p: Option<f64>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Override the subset of every emitted case.
    #[arg(long)]
    pub subset: Option<DatasetSubset>,
    /// Also write atlas-space training inputs in this channel layout.
    #[arg(long, value_enum)]
    pub export_training: Option<TrainingVariant>,
    /// Atlas directory (required with --export-training).
    #[arg(long)]
    pub atlas: Option<PathBuf>,
}

pub(super) fn run(args: CraniectomyArgs, ctx: &Context) -> Result<()> {
    let mut s = ctx.settings();
    let seed = s.get("seed", args.seed, 0u64)?;
    let template = s.get("template", args.template, TemplateChoice::Auto)?;
    let noise_p = s.get("noise_p", args.noise_p, 0.0)?;
    if !(0.0..=1.0).contains(&noise_p) {
        return Err(Error::Usage("--noise-p must be in [0, 1]".into()));
    }
    let base = template.config();
    let config = CraniectomyConfig {
        sphere_radius_mm: s.get("sphere_radius_mm", None, base.sphere_radius_mm)?,
        cube_edge_mm: s.get("cube_edge_mm", None, base.cube_edge_mm)?,
        cylinder_ratio: s.get("cylinder_ratio", None, base.cylinder_ratio)?,
        upper_quantile: s.get("upper_quantile", None, base.upper_quantile)?,
        ..base
    };
    let subset = s.get_opt("subset", args.subset)?;
    let export = s.get_opt("export_training", args.export_training)?;
    if export.is_some() && args.atlas.is_none() {
        return Err(Error::Usage("--export-training requires --atlas".into()));
    }
    let reg_opts = registration_options(&mut s)?;
    let pool = ctx.pool(&mut s)?;
    log::header("craniectomy", &s);

    let (input, base_dir) = load_manifest(&args.manifest)?;
    create_dir(&args.out_dir)?;
    let atlas = args.atlas.as_deref().map(read_atlas).transpose()?;
    let fixed = match &atlas {
        Some(a) if export.is_some() => Some(FixedImage::new(&a.binary, reg_opts)?),
        _ => None,
    };
    let prior_path = args.atlas.as_deref().map(|d| absolute(&d.join(BINARY_FILE))).transpose()?;

    let out_dir = &args.out_dir;
    let (results, failure) = for_each_case(&pool, &input.cases, |i, case| {
        let full_rel = case.paths.full.as_deref().ok_or_else(|| Error::Format("case has no full skull".into()))?;
        let full_path = input_path(&base_dir, full_rel);
        let full = read_volume(&full_path)?;
        let case_seed = derive_seed(seed, i as u64);
        let spec = sample_spec(&full, case_seed, &config)?;
        let mut triplet = apply_craniectomy(&full, &spec)?;
        if noise_p > 0.0 {
            triplet = triplet.with_input_noise(noise_p, derive_seed(case_seed, 1))?;
        }
        let id = &case.case_id;
        let defected_name = format!("{id}_defected.nii.gz");
        let defect_name = format!("{id}_defect.nii.gz");
        write_volume(&triplet.defected, &out_dir.join(&defected_name))?;
        write_volume(&triplet.defect, &out_dir.join(&defect_name))?;

        let mut entry = CaseEntry::new(id.clone(), subset.unwrap_or(case.subset));
        entry.paths.full = Some(absolute(&full_path)?);
        entry.paths.defected = Some(defected_name);
        entry.paths.defect = Some(defect_name);
        entry.seed = Some(case_seed);
        entry.craniectomy = Some(spec);
        entry.noise_applied = Some(triplet.noise_applied);

        let training = match (&fixed, &atlas, export) {
            (Some(fixed), Some(atlas), Some(variant)) => {
                let reg = fixed.register(&full)?;
                let grid = *atlas.binary.geometry();
                let t_name = format!("{id}.mat");
                write_transform(&reg.transform, &out_dir.join(&t_name))?;
                let d_name = format!("{id}_defected_common.nii.gz");
                let y_name = format!("{id}_defect_common.nii.gz");
                write_volume(
                    &resample(&triplet.defected, &reg.transform, &grid, Interpolation::Nearest),
                    &out_dir.join(&d_name),
                )?;
                write_volume(
                    &resample(&triplet.defect, &reg.transform, &grid, Interpolation::Nearest),
                    &out_dir.join(&y_name),
                )?;
                let mut t = CaseEntry::new(id.clone(), entry.subset);
                t.paths.defected = Some(d_name);
                t.paths.defect = Some(y_name);
                t.paths.transform = Some(t_name);
                if variant == TrainingVariant::DeShape {
                    t.paths.prior = prior_path.clone();
                }
                t.seed = entry.seed;
                t.craniectomy = entry.craniectomy;
                t.noise_applied = entry.noise_applied;
                Some(t)
            }
            _ => None,
        };
        let detail = json!({
            "template": spec.template.kind().name(),
            "defect_voxels": triplet.defect.count_on(),
            "noise_applied": triplet.noise_applied,
        });
        Ok(((entry, training), detail))
    });

    let (entries, training): (Vec<CaseEntry>, Vec<Option<CaseEntry>>) = results.into_iter().unzip();
    let mut manifest = DatasetManifest::new(seed);
    manifest.cases = entries;
    write_manifest(&manifest, &out_dir.join(MANIFEST_FILE))?;
    if let Some(variant) = export {
        let mut t = DatasetManifest::new(seed);
        t.channels = Some(variant.channels());
        t.cases = training.into_iter().flatten().collect();
        write_manifest(&t, &out_dir.join(TRAINING_MANIFEST_FILE))?;
    }
    log::done("craniectomy", json!({ "cases": manifest.cases.len() }));
    failure.map_or(Ok(()), Err)
}
