mod common;

use common::{pose, skull, small_spec};
use craniotk_core::craniectomy::{apply_craniectomy, sample_spec, CraniectomyConfig};
use craniotk_core::math;
use craniotk_core::metrics::dice;
use craniotk_core::phantom::{fitting_geometry, generate_phantom, PhantomSpec};
use craniotk_core::registration::{
    map_back, register_rigid, resample, CommonGridSpec, Interpolation, RegistrationOptions,
};
use craniotk_core::{Error, RigidTransform, VoxelGrid};

fn errors(found: &RigidTransform, truth: &RigidTransform) -> (f64, f64) {
    let angle = found.rotation_difference(truth).to_degrees();
    let shift = math::norm(math::sub(found.translation(), truth.translation()));
    (angle, shift)
}

#[test]
fn self_registration_stays_at_identity() {
    let (fixed, _) = skull(&small_spec(), 1.0, 10.0);
    let reg = register_rigid(&fixed, &fixed, &RegistrationOptions::default()).unwrap();
    let (angle, shift) = errors(&reg.transform, &RigidTransform::identity());
    assert!(angle < 0.5 && shift < 0.5, "{angle} deg {shift} mm");
}

#[test]
fn recovers_inverse_of_known_pose() {
    let truth_pose = pose(10.0, 0.0, 0.0, [8.0, 0.0, 0.0]);
    let moving_spec = PhantomSpec { pose: truth_pose, ..PhantomSpec::default() };
    let g = fitting_geometry(&moving_spec, [1.0; 3], 25.0).unwrap();
    let fixed = generate_phantom(&PhantomSpec::default(), &g).unwrap();
    let moving = generate_phantom(&moving_spec, &g).unwrap();
    let reg = register_rigid(&moving, &fixed, &RegistrationOptions::default()).unwrap();
    let (angle, shift) = errors(&reg.transform, &truth_pose.inverse());
    assert!(angle < 2.0 && shift < 2.0, "{angle} deg {shift} mm");
    assert!(reg.objective >= reg.objective_initial);
}

#[test]
fn empty_moving_is_rejected() {
    let (fixed, g) = skull(&small_spec(), 2.0, 4.0);
    let r = register_rigid(&VoxelGrid::empty(g), &fixed, &RegistrationOptions::default());
    assert!(matches!(r, Err(Error::EmptyInput)));
}

#[test]
fn forward_and_inverse_resampling_round_trip() {
    let (m, g) = skull(&PhantomSpec::default(), 1.0, 5.0);
    let t = pose(7.0, -4.0, 3.0, [3.3, -2.1, 1.7]);
    for interp in [Interpolation::Nearest, Interpolation::TrilinearThreshold] {
        let there = resample(&m, &t, &g, interp);
        let back = resample(&there, &t.inverse(), &g, interp);
        let d = dice(&back, &m).unwrap();
        assert!(d >= 0.95, "{interp:?}: {d}");
    }
}

#[test]
fn defect_survives_common_grid_and_map_back() {
    let (full, g) = skull(&PhantomSpec::default(), 1.0, 5.0);
    let t = pose(-6.0, 2.0, 4.0, [5.0, 2.5, -3.0]);
    let common = CommonGridSpec::centered_on(t.apply(full.centroid().unwrap())).geometry().unwrap();
    for seed in 0..6 {
        let spec = sample_spec(&full, seed, &CraniectomyConfig::default()).unwrap();
        let defect = apply_craniectomy(&full, &spec).unwrap().defect;
        let in_common = resample(&defect, &t, &common, Interpolation::Nearest);
        let back = map_back(&in_common, &t, &g);
        let d = dice(&back, &defect).unwrap();
        assert!(d >= 0.90, "seed {seed}: {d}");
    }
}
