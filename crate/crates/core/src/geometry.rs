//! Physical grid geometry: voxel counts, spacing and origin in millimetres.
//!
//! Voxel `(i, j, k)` has its centre at `origin + (i, j, k) ⊙ spacing`. Axes
//! are world-aligned (x increases with `i`, etc.); any file orientation is
//! normalized to this convention when read. Linear indices run x fastest.

use alloc::format;

use crate::math::{self, Vec3};
use crate::{Error, Result};

/// Tolerance (mm) for considering two spacings or origins equal.
pub const GEOMETRY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Geometry {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
}

impl Geometry {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidGeometry(format!("dims must be >= 1, got {dims:?}")));
        }
        if spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidGeometry(format!("spacing must be finite and > 0, got {spacing:?}")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGeometry(format!("origin must be finite, got {origin:?}")));
        }
        dims.iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::InvalidGeometry(format!("grid {dims:?} is too large")))?;
        Ok(Geometry { dims, spacing, origin })
    }

    /// Grid whose centre (midpoint between the extreme voxel centres) sits at
    /// world position `center`.
    pub fn centered_at(dims: [usize; 3], spacing: [f64; 3], center: Vec3) -> Result<Self> {
        let origin = core::array::from_fn(|a| center[a] - (dims[a] as f64 - 1.0) * spacing[a] / 2.0);
        Geometry::new(dims, spacing, origin)
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn linear(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, linear: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [linear % nx, (linear / nx) % ny, linear / (nx * ny)]
    }

    #[inline]
    pub fn world(&self, idx: [usize; 3]) -> Vec3 {
        core::array::from_fn(|a| self.origin[a] + idx[a] as f64 * self.spacing[a])
    }

    /// Fractional voxel coordinates of a world point.
    #[inline]
    pub fn continuous_index(&self, p: Vec3) -> Vec3 {
        core::array::from_fn(|a| (p[a] - self.origin[a]) / self.spacing[a])
    }

    /// Nearest voxel to a world point, or `None` outside the grid.
    pub fn index(&self, p: Vec3) -> Option<[usize; 3]> {
        let c = self.continuous_index(p);
        let mut out = [0usize; 3];
        for a in 0..3 {
            let r = math::round(c[a]);
            if !(r >= 0.0) || r > (self.dims[a] - 1) as f64 {
                return None;
            }
            out[a] = r as usize;
        }
        Some(out)
    }

    /// World coordinates of the grid centre.
    pub fn center(&self) -> Vec3 {
        core::array::from_fn(|a| self.origin[a] + (self.dims[a] as f64 - 1.0) * self.spacing[a] / 2.0)
    }

    pub fn voxel_volume(&self) -> f64 {
        self.spacing[0] * self.spacing[1] * self.spacing[2]
    }

    /// Dims must match exactly; spacing and origin within [`GEOMETRY_TOLERANCE`].
    pub fn matches(&self, other: &Geometry) -> bool {
        self.dims == other.dims
            && (0..3).all(|a| {
                math::abs(self.spacing[a] - other.spacing[a]) <= GEOMETRY_TOLERANCE
                    && math::abs(self.origin[a] - other.origin[a]) <= GEOMETRY_TOLERANCE
            })
    }

    pub fn ensure_matches(&self, other: &Geometry) -> Result<()> {
        if self.matches(other) {
            Ok(())
        } else {
            Err(Error::GeometryMismatch)
        }
    }

    /// Every `factor`-th voxel along each axis, starting at voxel 0.
    pub fn subsampled(&self, factor: usize) -> Geometry {
        let factor = factor.max(1);
        Geometry {
            dims: core::array::from_fn(|a| (self.dims[a] - 1) / factor + 1),
            spacing: core::array::from_fn(|a| self.spacing[a] * factor as f64),
            origin: self.origin,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn world_index_round_trip() {
        let g = Geometry::new([5, 6, 7], [0.695, 0.695, 0.715], [-10.3, 4.0, 2.5]).unwrap();
        for lin in 0..g.len() {
            let idx = g.coords(lin);
            assert_eq!(g.linear(idx[0], idx[1], idx[2]), lin);
            assert_eq!(g.index(g.world(idx)), Some(idx));
        }
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(Geometry::new([0, 1, 1], [1.0; 3], [0.0; 3]).is_err());
        assert!(Geometry::new([1, 1, 1], [1.0, 0.0, 1.0], [0.0; 3]).is_err());
        assert!(Geometry::new([1, 1, 1], [1.0, -1.0, 1.0], [0.0; 3]).is_err());
    }

    #[test]
    fn centered_grid_center() {
        let g = Geometry::centered_at([10, 11, 12], [1.0, 2.0, 0.5], [3.0, -4.0, 5.0]).unwrap();
        let c = g.center();
        for a in 0..3 {
            assert!(math::abs(c[a] - [3.0, -4.0, 5.0][a]) < 1e-12);
        }
        assert_eq!(g.index([1000.0, 0.0, 0.0]), None);
    }
}
