mod common;

use common::brute_sq_distance;
use craniotk_core::volume::{distance_to, morph, signed_distance, MorphOp};
use craniotk_core::{Geometry, VoxelGrid};
use proptest::prelude::*;

#[test]
fn point_distance_matches_all_pairs_on_nine_cube() {
    for spacing in [[1.0, 1.0, 1.0], [2.0, 1.0, 1.0]] {
        let g = Geometry::new([9, 9, 9], spacing, [0.0; 3]).unwrap();
        let mut m = VoxelGrid::empty(g);
        m.set(4, 4, 4, true);
        let d = distance_to(&m).unwrap();
        let d = d.data();
        let oracle = brute_sq_distance(&m);
        for (a, b) in d.iter().zip(&oracle) {
            assert!((a - b.sqrt()).abs() <= 1e-12);
        }
        assert_eq!(d[g.linear(7, 4, 4)], 3.0 * spacing[0]);
    }
}

#[test]
fn signed_distance_of_point_is_zero_on_it_and_positive_elsewhere() {
    let g = Geometry::new([9, 9, 9], [1.0; 3], [0.0; 3]).unwrap();
    let mut m = VoxelGrid::empty(g);
    m.set(4, 4, 4, true);
    let sdt = signed_distance(&m).unwrap();
    assert_eq!(sdt.get(4, 4, 4), 0.0);
    assert_eq!(sdt.get(7, 4, 4), 3.0);
}

#[test]
fn ball_dilation_on_five_cube_matches_membership() {
    let g = Geometry::new([5, 5, 5], [1.0; 3], [0.0; 3]).unwrap();
    let mut m = VoxelGrid::empty(g);
    m.set(2, 2, 2, true);
    let d = morph(&m, MorphOp::Dilate, 1.0).unwrap();
    let oracle = VoxelGrid::from_fn(g, |[i, j, k]| {
        let (x, y, z) = (i as i64 - 2, j as i64 - 2, k as i64 - 2);
        x * x + y * y + z * z <= 1
    });
    assert_eq!(d, oracle);
    assert_eq!(d.count_on(), 7);
}

fn mask(dims: [usize; 3]) -> impl Strategy<Value = VoxelGrid> {
    let n = dims[0] * dims[1] * dims[2];
    proptest::collection::vec(prop::bool::weighted(0.15), n).prop_map(move |bits| {
        VoxelGrid::from_bools(Geometry::new(dims, [1.0, 1.5, 0.75], [0.0; 3]).unwrap(), &bits).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn opening_is_inside_and_closing_outside(m in mask([8, 7, 6]), r in 0.0f64..3.0) {
        let opened = morph(&m, MorphOp::Open, r).unwrap();
        let closed = morph(&m, MorphOp::Close, r).unwrap();
        prop_assert!(opened.is_subset_of(&m));
        prop_assert!(m.is_subset_of(&closed));
    }

    #[test]
    fn distance_is_zero_exactly_on_the_mask(m in mask([6, 6, 6])) {
        prop_assume!(!m.is_empty());
        let d = distance_to(&m).unwrap();
        for (lin, v) in d.data().iter().enumerate() {
            prop_assert_eq!(*v == 0.0, m.get_linear(lin));
        }
    }
}
