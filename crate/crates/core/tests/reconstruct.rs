mod common;

use common::{skull, small_spec};
use craniotk_core::atlas::{build_atlas, Atlas, AtlasOptions, AtlasProvenance, Sequential};
use craniotk_core::craniectomy::{apply_craniectomy, make_template, sample_spec, CraniectomyConfig, TemplateKind};
use craniotk_core::metrics::dice;
use craniotk_core::phantom::{fitting_geometry, generate_phantom, sample_population, PhantomSpec, Variability};
use craniotk_core::reconstruct::{atlas_subtract, mirror_reconstruct, postprocess, PostprocessOptions};
use craniotk_core::registration::{register_rigid, CommonGridSpec, RegistrationOptions};
use craniotk_core::{RigidTransform, ScalarGrid, VoxelGrid};

fn atlas_of(m: &VoxelGrid) -> Atlas {
    let avg = ScalarGrid::new(*m.geometry(), m.to_bools().iter().map(|&b| b as u8 as f64).collect()).unwrap();
    Atlas::from_average(avg, 0.5, AtlasProvenance::default()).unwrap()
}

#[test]
fn subtracting_from_the_atlas_itself_recovers_the_flap() {
    let (full, _) = skull(&PhantomSpec::default(), 1.0, 3.0);
    let atlas = atlas_of(&full);
    let opts = PostprocessOptions::default();
    for kind in TemplateKind::ALL {
        for seed in 0..4 {
            let spec = sample_spec(&full, seed, &CraniectomyConfig::only(kind)).unwrap();
            let t = apply_craniectomy(&atlas.binary, &spec).unwrap();
            let pred = atlas_subtract(&t.defected, &atlas, &RigidTransform::identity(), &opts).unwrap();
            let d = dice(&pred.mask, &t.defect).unwrap();
            assert!(d >= 0.99, "{kind:?} seed {seed}: {d}");
        }
    }
}

#[test]
fn nothing_missing_gives_empty_prediction() {
    let (full, _) = skull(&small_spec(), 1.5, 3.0);
    let atlas = atlas_of(&full);
    let pred = atlas_subtract(&full, &atlas, &RigidTransform::identity(), &PostprocessOptions::default()).unwrap();
    assert!(pred.empty);
}

/// Flaps drawn on the +x half that do not reach the mid-plane.
fn unilateral_flaps(full: &VoxelGrid, n: usize) -> Vec<VoxelGrid> {
    let g = full.geometry();
    let config = CraniectomyConfig {
        sphere_radius_mm: (10.0, 25.0),
        cube_edge_mm: (20.0, 35.0),
        ..CraniectomyConfig::default()
    };
    let mut out = Vec::new();
    let mut seed = 0;
    while out.len() < n {
        seed += 1;
        let spec = sample_spec(full, seed, &config).unwrap();
        let template = make_template(&spec, g).unwrap();
        if spec.center_world[0] > 0.0 && template.intersection_count(&template.mirror_x()).unwrap() == 0 {
            out.push(template);
        }
    }
    out
}

#[test]
fn mirror_restores_one_sided_flaps() {
    let (full, g) = skull(&PhantomSpec::default(), 1.0, 3.0);
    assert_eq!(g.dims[0] % 2, 1);
    assert_eq!(full.mirror_x(), full);
    for template in unilateral_flaps(&full, 5) {
        let defect = full.intersect(&template).unwrap();
        let defected = full.subtract(&template).unwrap();
        let pred = mirror_reconstruct(&defected, &PostprocessOptions::default()).unwrap();
        let d = dice(&pred.mask, &defect).unwrap();
        assert!(d >= 0.90, "{d}");
    }
}

#[test]
fn mirror_misses_symmetric_flap_pairs() {
    let (full, _) = skull(&PhantomSpec::default(), 1.0, 3.0);
    for template in unilateral_flaps(&full, 5) {
        let both = template.union(&template.mirror_x()).unwrap();
        let defect = full.intersect(&both).unwrap();
        let defected = full.subtract(&both).unwrap();
        let pred = mirror_reconstruct(&defected, &PostprocessOptions::default()).unwrap();
        assert!((pred.mask.count_on() as f64) < 0.05 * defect.count_on() as f64);
    }
}

#[test]
fn postprocess_is_idempotent_on_noisy_differences() {
    let (full, _) = skull(&small_spec(), 1.0, 3.0);
    let spec = sample_spec(&full, 3, &CraniectomyConfig::default()).unwrap();
    let t = apply_craniectomy(&full, &spec).unwrap();
    let noisy = craniotk_core::craniectomy::salt_pepper(&t.defect, 0.02, 8).unwrap();
    let opts = PostprocessOptions::default();
    let once = postprocess(&noisy, &t.defected, None, &opts).unwrap();
    let twice = postprocess(&once, &t.defected, None, &opts).unwrap();
    assert_eq!(once, twice);
    assert_eq!(once.intersection_count(&t.defected).unwrap(), 0);
}

/// Atlas from a jittered population; held-out cases registered and
/// reconstructed by subtraction. The bounds were measured once and frozen.
#[test]
fn population_atlas_subtraction_regression() {
    let jitter =
        Variability { semiaxis_sd_mm: 2.0, thickness_sd_mm: 0.3, rotation_sd_deg: 3.0, translation_sd_mm: 3.0 };
    let specs = sample_population(10, 21, &small_spec(), &jitter).unwrap();
    let voxelize = |s: &PhantomSpec| {
        let g = fitting_geometry(s, [1.0; 3], 6.0).unwrap();
        generate_phantom(s, &g).unwrap()
    };
    let train: Vec<(String, VoxelGrid)> =
        specs[..6].iter().enumerate().map(|(i, s)| (format!("t{i}"), voxelize(s))).collect();
    let center = train[0].1.centroid().unwrap();
    let options = AtlasOptions {
        grid: Some(CommonGridSpec::with_size([91, 111, 85], [1.0; 3], center)),
        ..AtlasOptions::default()
    };
    let atlas = build_atlas(&train, &options, &Sequential).unwrap();

    let opts = PostprocessOptions { open_radius_mm: 1.5, ..PostprocessOptions::default() };
    let mut dices = Vec::new();
    for (i, s) in specs[6..].iter().enumerate() {
        let full = voxelize(s);
        let spec = sample_spec(&full, 100 + i as u64, &CraniectomyConfig::default()).unwrap();
        let t = apply_craniectomy(&full, &spec).unwrap();
        let reg = register_rigid(&t.defected, &atlas.binary, &RegistrationOptions::default()).unwrap();
        let pred = atlas_subtract(&t.defected, &atlas, &reg.transform, &opts).unwrap();
        let back = craniotk_core::registration::map_back(&pred.mask, &reg.transform, full.geometry());
        dices.push(dice(&back, &t.defect).unwrap());
    }
    let mean = dices.iter().sum::<f64>() / dices.len() as f64;
    eprintln!("atlas-subtract dice per case {dices:?} mean {mean}");
    assert!(mean >= FROZEN_MEAN_DICE, "{dices:?}");
}

const FROZEN_MEAN_DICE: f64 = 0.49;
