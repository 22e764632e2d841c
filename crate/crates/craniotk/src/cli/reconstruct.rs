use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use craniotk_core::atlas::Atlas;
use craniotk_core::reconstruct::{atlas_subtract, mirror_reconstruct, PostprocessOptions, Prediction};
use craniotk_core::registration::{map_back, resample, FixedImage, Interpolation};
use craniotk_core::{RigidTransform, VoxelGrid};
use serde_json::json;

use super::{absolute, create_dir, for_each_case, input_path, load_manifest, missing, registration_options, Context};
use crate::io::{read_atlas, read_transform, read_volume, write_manifest, write_volume, CaseEntry, DatasetManifest};
use crate::{log, Error, Result};

pub const MANIFEST_FILE: &str = "predictions.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Atlas minus the registered defected skull.
    AtlasSub,
    /// Left-right mirror of the defected skull minus itself.
    Mirror,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Single mode: defected skull.
    #[arg(long, conflicts_with = "manifest")]
    pub defected: Option<PathBuf>,
    /// Atlas directory (required for atlas-sub; optional for mirror, which
    /// then mirrors in atlas space).
    #[arg(long)]
    pub atlas: Option<PathBuf>,
    /// Transform from the defected skull's space to the atlas; registered
    /// on the fly when absent.
    #[arg(long, requires = "defected")]
    pub transform: Option<PathBuf>,
    /// Single mode: output prediction.
    #[arg(long, requires = "defected")]
    pub out: Option<PathBuf>,
    /// Resample the prediction back onto the defected skull's own grid.
    #[arg(long)]
    pub map_back: bool,
    /// Batch mode: cases with defected skulls (and optional transforms).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Batch mode output directory.
    #[arg(long, requires = "manifest")]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub close_radius_mm: Option<f64>,
    /// Opening radius applied before closing; 0 disables it.
    #[arg(long)]
    pub open_radius_mm: Option<f64>,
    #[arg(long)]
    pub d_max_mm: Option<f64>,
}

struct Reconstructor<'a> {
    method: Method,
    atlas: Option<&'a Atlas>,
    fixed: Option<&'a FixedImage>,
    map_back: bool,
    post: PostprocessOptions,
}

impl Reconstructor<'_> {
    fn transform(&self, defected: &VoxelGrid, given: Option<&Path>) -> Result<Option<RigidTransform>> {
        match (given, self.fixed) {
            (Some(p), _) => Ok(Some(read_transform(p)?)),
            (None, Some(fixed)) => Ok(Some(fixed.register(defected)?.transform)),
            (None, None) => Ok(None),
        }
    }

    fn predict(&self, defected: &VoxelGrid, transform: Option<&Path>) -> Result<Prediction> {
        let t = self.transform(defected, transform)?;
        let pred = match (self.method, self.atlas, &t) {
            (Method::AtlasSub, Some(atlas), Some(t)) => atlas_subtract(defected, atlas, t, &self.post)?,
            (Method::Mirror, Some(atlas), Some(t)) => {
                let registered = resample(defected, t, atlas.binary.geometry(), Interpolation::Nearest);
                mirror_reconstruct(&registered, &self.post)?
            }
            (Method::Mirror, None, _) => return mirror_reconstruct(defected, &self.post).map_err(Into::into),
            _ => return Err(missing("--atlas")),
        };
        match (self.map_back, t) {
            (true, Some(t)) => {
                let mask = map_back(&pred.mask, &t, defected.geometry());
                let empty = mask.is_empty();
                Ok(Prediction { mask, empty })
            }
            _ => Ok(pred),
        }
    }
}

pub(super) fn run(args: ReconstructArgs, ctx: &Context) -> Result<()> {
    let mut s = ctx.settings();
    let method = s.get("method", args.method, Method::AtlasSub)?;
    if method == Method::AtlasSub && args.atlas.is_none() {
        return Err(Error::Usage("--method atlas-sub requires --atlas".into()));
    }
    if args.defected.is_none() && args.manifest.is_none() {
        return Err(missing("--defected or --manifest"));
    }
    let d = PostprocessOptions::default();
    let post = PostprocessOptions {
        close_radius_mm: s.get("close_radius_mm", args.close_radius_mm, d.close_radius_mm)?,
        open_radius_mm: s.get("open_radius_mm", args.open_radius_mm, d.open_radius_mm)?,
        d_max_mm: s.get("d_max_mm", args.d_max_mm, d.d_max_mm)?,
    };
    if [post.close_radius_mm, post.open_radius_mm, post.d_max_mm].iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::Usage("postprocessing radii must be >= 0".into()));
    }
    s.record("map_back", args.map_back, crate::config::Source::Flag);
    let reg_opts = registration_options(&mut s)?;
    let pool = ctx.pool(&mut s)?;
    log::header("reconstruct", &s);

    let atlas = args.atlas.as_deref().map(read_atlas).transpose()?;
    let needs_registration = match (&args.defected, &args.transform) {
        (Some(_), Some(_)) => false,
        _ => atlas.is_some(),
    };
    let fixed = match (&atlas, needs_registration) {
        (Some(a), true) => Some(FixedImage::new(&a.binary, reg_opts)?),
        _ => None,
    };
    let rec = Reconstructor { method, atlas: atlas.as_ref(), fixed: fixed.as_ref(), map_back: args.map_back, post };

    if let Some(defected_path) = &args.defected {
        let out = args.out.as_ref().ok_or_else(|| missing("--out"))?;
        let defected = read_volume(defected_path)?;
        let pred = rec.predict(&defected, args.transform.as_deref())?;
        write_volume(&pred.mask, out)?;
        log::done("reconstruct", json!({ "voxels": pred.mask.count_on(), "empty": pred.empty }));
        return Ok(());
    }

    let out_dir = args.out_dir.as_ref().ok_or_else(|| missing("--out-dir"))?;
    let (input, base) = load_manifest(args.manifest.as_ref().expect("checked above"))?;
    create_dir(out_dir)?;
    let (entries, failure) = for_each_case(&pool, &input.cases, |_, case| {
        let defected_rel =
            case.paths.defected.as_deref().ok_or_else(|| Error::Format("case has no defected skull".into()))?;
        let defected_path = input_path(&base, defected_rel);
        let defected = read_volume(&defected_path)?;
        let transform = case.paths.transform.as_deref().map(|t| input_path(&base, t));
        let pred = rec.predict(&defected, transform.as_deref())?;
        let name = format!("{}_pred.nii.gz", case.case_id);
        write_volume(&pred.mask, &out_dir.join(&name))?;
        let mut entry = CaseEntry::new(case.case_id.clone(), case.subset);
        entry.paths.defected = Some(absolute(&defected_path)?);
        entry.paths.defect = Some(name);
        if let Some(t) = &transform {
            entry.paths.transform = Some(absolute(t)?);
        }
        entry.seed = case.seed;
        Ok((entry, json!({ "voxels": pred.mask.count_on(), "empty": pred.empty })))
    });
    let mut manifest = DatasetManifest::new(input.master_seed);
    manifest.cases = entries;
    write_manifest(&manifest, &out_dir.join(MANIFEST_FILE))?;
    log::done("reconstruct", json!({ "cases": manifest.cases.len() }));
    failure.map_or(Ok(()), Err)
}
