#![allow(dead_code)]

use craniotk_core::phantom::{fitting_geometry, generate_phantom, PhantomSpec};
use craniotk_core::{Geometry, RigidTransform, VoxelGrid};

pub const DEG: f64 = std::f64::consts::PI / 180.0;

/// Half-size skull, quick to voxelize at 1 mm.
pub fn small_spec() -> PhantomSpec {
    PhantomSpec { outer_semiaxes: [35.0, 45.0, 33.0], thickness: 4.0, ..PhantomSpec::default() }
}

pub fn skull(spec: &PhantomSpec, spacing: f64, margin: f64) -> (VoxelGrid, Geometry) {
    let g = fitting_geometry(spec, [spacing; 3], margin).unwrap();
    (generate_phantom(spec, &g).unwrap(), g)
}

pub fn pose(yaw: f64, pitch: f64, roll: f64, t: [f64; 3]) -> RigidTransform {
    RigidTransform::from_euler_zyx(yaw * DEG, pitch * DEG, roll * DEG, t)
}

/// All-pairs squared distance from every voxel to the nearest seed.
pub fn brute_sq_distance(seeds: &VoxelGrid) -> Vec<f64> {
    let g = seeds.geometry();
    let pts: Vec<[f64; 3]> = seeds.iter_on().map(|l| g.world(g.coords(l))).collect();
    (0..g.len())
        .map(|l| {
            let p = g.world(g.coords(l));
            pts.iter().map(|q| (0..3).map(|a| (p[a] - q[a]) * (p[a] - q[a])).sum::<f64>()).fold(f64::INFINITY, f64::min)
        })
        .collect()
}
