//! Classical implant estimators: atlas reconstruct-and-subtract and
//! mid-sagittal mirroring, sharing one cleanup pass.

use alloc::vec;

use crate::atlas::Atlas;
use crate::registration::{resample, Interpolation};
use crate::transform::RigidTransform;
use crate::volume::{label, morph, squared_distance_to, Connectivity, MorphOp, VoxelGrid};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PostprocessOptions {
    /// Radius of the morphological closing.
    pub close_radius_mm: f64,
    /// Radius of an opening applied to the raw map first; 0 disables it.
    /// Removes slivers thinner than about twice the radius.
    pub open_radius_mm: f64,
    /// Components lying entirely farther than this from the defected
    /// skull's surface are discarded.
    pub d_max_mm: f64,
}

impl Default for PostprocessOptions {
    fn default() -> Self {
        PostprocessOptions { close_radius_mm: 1.5, open_radius_mm: 0.0, d_max_mm: 10.0 }
    }
}

/// An implant estimate. `empty` flags a prediction with no voxels left.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub mask: VoxelGrid,
    pub empty: bool,
}

impl Prediction {
    fn new(mask: VoxelGrid) -> Self {
        let empty = mask.is_empty();
        Prediction { mask, empty }
    }
}

/// Clean a raw difference map:
///
/// 0. open with a ball of `open_radius_mm` when it is positive,
/// 1. close with a ball of `close_radius_mm`,
/// 2. clip to `support` (if any) and remove the defected bone,
/// 3. drop 26-connected components farther than `d_max_mm` from the
///    defected skull's surface,
/// 4. keep the largest remaining component.
///
/// The output never overlaps `defected`. Without the opening step, running
/// it twice gives the same mask as running it once.
pub fn postprocess(
    raw: &VoxelGrid,
    defected: &VoxelGrid,
    support: Option<&VoxelGrid>,
    opts: &PostprocessOptions,
) -> Result<VoxelGrid> {
    raw.geometry().ensure_matches(defected.geometry())?;
    if let Some(s) = support {
        raw.geometry().ensure_matches(s.geometry())?;
    }
    if !(opts.d_max_mm >= 0.0) {
        return Err(Error::InvalidParameter("d_max_mm must be >= 0".into()));
    }
    if raw.is_empty() {
        return Ok(raw.clone());
    }
    let opened;
    let raw = if opts.open_radius_mm > 0.0 {
        opened = morph(raw, MorphOp::Open, opts.open_radius_mm)?;
        &opened
    } else {
        raw
    };
    let mut m = morph(raw, MorphOp::Close, opts.close_radius_mm)?;
    if let Some(s) = support {
        m = m.intersect(s)?;
    }
    m = m.subtract(defected)?;

    let (labels, sizes) = label(&m, Connectivity::TwentySix);
    let mut near = vec![defected.is_empty(); sizes.len()];
    if !defected.is_empty() {
        let sq = squared_distance_to(&defected.surface());
        let limit = opts.d_max_mm * opts.d_max_mm * (1.0 + 1e-12);
        for lin in m.iter_on() {
            if sq[lin] <= limit {
                near[labels[lin] as usize - 1] = true;
            }
        }
    }
    let mut keep: Option<(usize, u32)> = None;
    for (idx, &size) in sizes.iter().enumerate() {
        if near[idx] && keep.is_none_or(|(s, _)| size > s) {
            keep = Some((size, idx as u32 + 1));
        }
    }
    let mut out = VoxelGrid::empty(*m.geometry());
    if let Some((_, id)) = keep {
        for lin in m.iter_on() {
            if labels[lin] == id {
                out.set_linear(lin, true);
            }
        }
    }
    Ok(out)
}

/// Reconstruct-and-subtract with the atlas as the full-skull estimate.
/// `defected` lives in its original space and `transform` maps it onto the
/// atlas grid; the prediction is returned on the atlas grid.
pub fn atlas_subtract(
    defected: &VoxelGrid,
    atlas: &Atlas,
    transform: &RigidTransform,
    opts: &PostprocessOptions,
) -> Result<Prediction> {
    let target = *atlas.binary.geometry();
    let registered = if transform == &RigidTransform::identity() && defected.geometry().matches(&target) {
        defected.clone()
    } else {
        resample(defected, transform, &target, Interpolation::Nearest)
    };
    let raw = atlas.binary.subtract(&registered)?;
    Ok(Prediction::new(postprocess(&raw, &registered, Some(&atlas.binary), opts)?))
}

/// Mirror the defected skull through the grid mid-plane `x = (nx - 1) / 2`
/// and keep what the mirror image adds.
pub fn mirror_reconstruct(defected: &VoxelGrid, opts: &PostprocessOptions) -> Result<Prediction> {
    let raw = defected.mirror_x().subtract(defected)?;
    Ok(Prediction::new(postprocess(&raw, defected, None, opts)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Geometry;

    fn geo() -> Geometry {
        Geometry::new([60, 20, 20], [1.0; 3], [0.0; 3]).unwrap()
    }

    #[test]
    fn empty_in_empty_out() {
        let e = VoxelGrid::empty(geo());
        assert!(postprocess(&e, &e, None, &PostprocessOptions::default()).unwrap().is_empty());
    }

    #[test]
    fn keeps_largest_component_and_never_overlaps_bone() {
        let g = geo();
        let bone = VoxelGrid::from_fn(g, |[i, _, _]| i == 10);
        let raw = VoxelGrid::from_fn(g, |[i, j, k]| {
            (11..16).contains(&i) && j < 10 && k < 10 || (i == 9 && j == 18 && k == 18) || i == 10 && j == 0 && k == 0
        });
        let out = postprocess(&raw, &bone, None, &PostprocessOptions::default()).unwrap();
        assert_eq!(out.count_on(), 500);
        assert_eq!(out.intersection_count(&bone).unwrap(), 0);
    }

    #[test]
    fn far_speck_is_gated() {
        let g = geo();
        let bone = VoxelGrid::from_fn(g, |[i, _, _]| i == 2);
        let speck = VoxelGrid::from_fn(g, |idx| idx == [52, 10, 10]);
        assert!(postprocess(&speck, &bone, None, &PostprocessOptions::default()).unwrap().is_empty());
        let near = VoxelGrid::from_fn(g, |idx| idx == [8, 10, 10]);
        assert_eq!(postprocess(&near, &bone, None, &PostprocessOptions::default()).unwrap(), near);
    }

    #[test]
    fn mirror_of_symmetric_shape_is_empty() {
        let g = geo();
        let sym = VoxelGrid::from_fn(g, |[i, j, _]| (i == 5 || i == 54) && j < 8);
        let p = mirror_reconstruct(&sym, &PostprocessOptions::default()).unwrap();
        assert!(p.empty && p.mask.is_empty());
    }

    #[test]
    fn mirror_fills_unilateral_gap() {
        let g = geo();
        let full = VoxelGrid::from_fn(g, |[i, _, _]| (5..8).contains(&i) || (52..55).contains(&i));
        let flap =
            VoxelGrid::from_fn(g, |[i, j, k]| (52..55).contains(&i) && (5..12).contains(&j) && (5..12).contains(&k));
        let defected = full.subtract(&flap).unwrap();
        let p = mirror_reconstruct(&defected, &PostprocessOptions::default()).unwrap();
        assert_eq!(p.mask, flap);
    }
}
