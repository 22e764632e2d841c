mod common;

use common::small_spec;
use craniotk_core::atlas::{build_atlas, AtlasOptions, Sequential};
use craniotk_core::metrics::dice;
use craniotk_core::phantom::{fitting_geometry, generate_phantom, sample_population, Variability};
use craniotk_core::registration::CommonGridSpec;

#[test]
fn refinement_round_improves_agreement() {
    let jitter =
        Variability { semiaxis_sd_mm: 2.0, thickness_sd_mm: 0.3, rotation_sd_deg: 3.0, translation_sd_mm: 3.0 };
    let specs = sample_population(20, 5, &small_spec(), &jitter).unwrap();
    let inputs: Vec<(String, _)> = specs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let g = fitting_geometry(s, [1.5; 3], 3.0).unwrap();
            (format!("p{i}"), generate_phantom(s, &g).unwrap())
        })
        .collect();
    let center = inputs[0].1.centroid().unwrap();
    let options = AtlasOptions {
        iterations: 2,
        grid: Some(CommonGridSpec::with_size([61, 75, 57], [1.5; 3], center)),
        ..AtlasOptions::default()
    };
    let atlas = build_atlas(&inputs, &options, &Sequential).unwrap();
    let rounds = &atlas.provenance.round_mean_dice;
    assert_eq!(rounds.len(), 3);
    assert!(rounds[2] > rounds[1], "{rounds:?}");
    assert!(atlas.provenance.failed_ids.is_empty());
    assert_eq!(atlas.provenance.case_ids.len(), 20);
    assert!(atlas.average.data().iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn identical_inputs_give_their_own_shape() {
    let spec = small_spec();
    let g = fitting_geometry(&spec, [1.5; 3], 3.0).unwrap();
    let skull = generate_phantom(&spec, &g).unwrap();
    let inputs: Vec<_> = (0..3).map(|i| (format!("s{i}"), skull.clone())).collect();
    let center = skull.centroid().unwrap();
    let options =
        AtlasOptions { grid: Some(CommonGridSpec::with_size(g.dims, g.spacing, center)), ..AtlasOptions::default() };
    let atlas = build_atlas(&inputs, &options, &Sequential).unwrap();
    assert!(atlas.average.data().iter().all(|&v| v == 0.0 || v == 1.0));
    let d = dice(
        &atlas.binary,
        &craniotk_core::registration::resample(
            &skull,
            &craniotk_core::RigidTransform::identity(),
            atlas.binary.geometry(),
            craniotk_core::registration::Interpolation::Nearest,
        ),
    )
    .unwrap();
    assert!(d >= 0.98, "{d}");
}
