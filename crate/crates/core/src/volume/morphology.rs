//! Binary morphology with a spherical structuring element of physical
//! radius, computed through exact distance transforms so anisotropic
//! spacing is handled without building explicit kernels.

use super::edt::squared_distance_to;
use super::VoxelGrid;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MorphOp {
    Dilate,
    Erode,
    Close,
    Open,
}

/// Relative slack on the ball boundary so that radii given in decimal
/// (e.g. 1.5 mm on a 0.5 mm grid) include centres lying exactly on the sphere.
const BALL_SLACK: f64 = 1e-9;

fn within(sq: f64, radius: f64) -> bool {
    sq <= radius * radius * (1.0 + BALL_SLACK) + BALL_SLACK
}

fn dilate(m: &VoxelGrid, radius: f64) -> VoxelGrid {
    if radius == 0.0 || m.is_empty() {
        return m.clone();
    }
    let sq = squared_distance_to(m);
    let mut out = VoxelGrid::empty(*m.geometry());
    for (lin, &d) in sq.iter().enumerate() {
        if within(d, radius) {
            out.set_linear(lin, true);
        }
    }
    out
}

/// Erosion treats everything outside the grid as set, so closing never
/// removes voxels near the grid border.
fn erode(m: &VoxelGrid, radius: f64) -> VoxelGrid {
    if radius == 0.0 {
        return m.clone();
    }
    let background = m.complement();
    if background.is_empty() {
        return m.clone();
    }
    let sq = squared_distance_to(&background);
    let mut out = VoxelGrid::empty(*m.geometry());
    for lin in m.iter_on() {
        if !within(sq[lin], radius) {
            out.set_linear(lin, true);
        }
    }
    out
}

pub fn morph(m: &VoxelGrid, op: MorphOp, radius_mm: f64) -> Result<VoxelGrid> {
    if !(radius_mm >= 0.0) || !radius_mm.is_finite() {
        return Err(Error::InvalidParameter("morphology radius must be finite and >= 0".into()));
    }
    Ok(match op {
        MorphOp::Dilate => dilate(m, radius_mm),
        MorphOp::Erode => erode(m, radius_mm),
        MorphOp::Close => erode(&dilate(m, radius_mm), radius_mm),
        MorphOp::Open => dilate(&erode(m, radius_mm), radius_mm),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Geometry;
    use crate::math;
    use proptest::prelude::*;

    fn brute_dilate(m: &VoxelGrid, r: f64) -> VoxelGrid {
        let g = *m.geometry();
        let on: alloc::vec::Vec<_> = m.iter_on().map(|l| g.world(g.coords(l))).collect();
        VoxelGrid::from_fn(g, |idx| {
            let p = g.world(idx);
            on.iter().any(|q| {
                let d = math::sub(p, *q);
                within(math::dot(d, d), r)
            })
        })
    }

    #[test]
    fn radius_zero_is_identity() {
        let g = Geometry::new([5, 5, 5], [1.0; 3], [0.0; 3]).unwrap();
        let m = VoxelGrid::from_fn(g, |[i, j, k]| (i + j * 2 + k) % 3 == 0);
        for op in [MorphOp::Dilate, MorphOp::Erode, MorphOp::Close, MorphOp::Open] {
            assert_eq!(morph(&m, op, 0.0).unwrap(), m);
        }
    }

    #[test]
    fn unit_dilation_of_a_voxel_is_a_cross() {
        let g = Geometry::new([5, 5, 5], [1.0; 3], [0.0; 3]).unwrap();
        let m = VoxelGrid::from_fn(g, |idx| idx == [2, 2, 2]);
        let d = morph(&m, MorphOp::Dilate, 1.0).unwrap();
        assert_eq!(d.count_on(), 7);
        assert_eq!(d, brute_dilate(&m, 1.0));
        assert!(d.get(1, 2, 2) && d.get(2, 3, 2) && d.get(2, 2, 1) && !d.get(1, 1, 2));
    }

    #[test]
    fn anisotropic_dilation() {
        let g = Geometry::new([7, 7, 7], [2.0, 1.0, 1.0], [0.0; 3]).unwrap();
        let m = VoxelGrid::from_fn(g, |idx| idx == [3, 3, 3]);
        let d = morph(&m, MorphOp::Dilate, 1.5).unwrap();
        assert!(!d.get(4, 3, 3));
        assert!(d.get(3, 4, 3) && d.get(3, 4, 4));
    }

    #[test]
    fn erosion_shrinks_full_mask_only_within_grid() {
        let g = Geometry::new([6, 6, 6], [1.0; 3], [0.0; 3]).unwrap();
        let full = VoxelGrid::full(g);
        let e = morph(&full, MorphOp::Erode, 2.0).unwrap();
        assert!(e.count_on() <= full.count_on());
        let cube = VoxelGrid::from_fn(g, |[i, j, k]| (1..5).contains(&i) && (1..5).contains(&j) && (1..5).contains(&k));
        assert_eq!(morph(&cube, MorphOp::Erode, 1.0).unwrap().count_on(), 8);
    }

    #[test]
    fn negative_radius_is_rejected() {
        let g = Geometry::new([2, 2, 2], [1.0; 3], [0.0; 3]).unwrap();
        assert!(morph(&VoxelGrid::empty(g), MorphOp::Dilate, -1.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn dilation_matches_brute_force(r in 0.0f64..3.0, sx in 0.5f64..2.0, seed in any::<u64>()) {
            let g = Geometry::new([6, 5, 4], [sx, 1.0, 0.8], [0.0; 3]).unwrap();
            let mut s = seed | 1;
            let m = VoxelGrid::from_fn(g, |_| { s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); (s >> 60) == 0 });
            prop_assert_eq!(morph(&m, MorphOp::Dilate, r).unwrap(), brute_dilate(&m, r));
        }

        #[test]
        fn closing_contains_convex_shapes(
            c in (3.0f64..9.0, 3.0f64..9.0, 3.0f64..9.0),
            axes in (1.0f64..5.0, 1.0f64..5.0, 1.0f64..5.0),
            r in 0.5f64..3.0,
        ) {
            let g = Geometry::new([12, 12, 12], [1.0; 3], [0.0; 3]).unwrap();
            let m = VoxelGrid::from_fn(g, |idx| {
                let p = g.world(idx);
                let q = [(p[0] - c.0) / axes.0, (p[1] - c.1) / axes.1, (p[2] - c.2) / axes.2];
                math::dot(q, q) <= 1.0
            });
            let closed = morph(&m, MorphOp::Close, r).unwrap();
            prop_assert!(m.is_subset_of(&closed));
            let opened = morph(&m, MorphOp::Open, r).unwrap();
            prop_assert!(opened.is_subset_of(&m));
        }
    }
}
