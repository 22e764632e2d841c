//! Dense binary and scalar voxel grids with physical geometry.

mod components;
mod edt;
mod morphology;

use alloc::vec;
use alloc::vec::Vec;

pub(crate) use components::label;
pub use components::{component_count, largest_component, Connectivity};
pub use edt::{distance_to, signed_distance, squared_distance_to};
pub use morphology::{morph, MorphOp};

use crate::geometry::Geometry;
use crate::math::{self, Vec3};
use crate::{Error, Result};

/// Binary occupancy mask, one bit per voxel.
///
/// Bits past the last voxel in the final word are always zero.
#[derive(Clone, PartialEq)]
pub struct VoxelGrid {
    geometry: Geometry,
    words: Vec<u64>,
}

impl core::fmt::Debug for VoxelGrid {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("VoxelGrid").field("geometry", &self.geometry).field("count_on", &self.count_on()).finish()
    }
}

fn word_count(n: usize) -> usize {
    n.div_ceil(64)
}

impl VoxelGrid {
    pub fn empty(geometry: Geometry) -> Self {
        VoxelGrid { geometry, words: vec![0; word_count(geometry.len())] }
    }

    pub fn full(geometry: Geometry) -> Self {
        let mut grid = VoxelGrid { geometry, words: vec![u64::MAX; word_count(geometry.len())] };
        grid.clear_tail();
        grid
    }

    pub fn from_fn(geometry: Geometry, mut f: impl FnMut([usize; 3]) -> bool) -> Self {
        let mut grid = VoxelGrid::empty(geometry);
        let [nx, ny, nz] = geometry.dims;
        let mut lin = 0;
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    if f([i, j, k]) {
                        grid.words[lin >> 6] |= 1 << (lin & 63);
                    }
                    lin += 1;
                }
            }
        }
        grid
    }

    /// Any nonzero byte becomes a set voxel.
    pub fn from_bytes(geometry: Geometry, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != geometry.len() {
            return Err(Error::LengthMismatch { expected: geometry.len(), actual: bytes.len() });
        }
        let mut grid = VoxelGrid::empty(geometry);
        for (lin, _) in bytes.iter().enumerate().filter(|(_, &b)| b != 0) {
            grid.words[lin >> 6] |= 1 << (lin & 63);
        }
        Ok(grid)
    }

    pub fn from_bools(geometry: Geometry, values: &[bool]) -> Result<Self> {
        if values.len() != geometry.len() {
            return Err(Error::LengthMismatch { expected: geometry.len(), actual: values.len() });
        }
        let mut grid = VoxelGrid::empty(geometry);
        for (lin, _) in values.iter().enumerate().filter(|(_, &b)| b) {
            grid.words[lin >> 6] |= 1 << (lin & 63);
        }
        Ok(grid)
    }

    /// One byte (0 or 1) per voxel, x fastest.
    pub fn to_bytes(&self) -> Vec<u8> {
        (0..self.geometry.len()).map(|lin| self.get_linear(lin) as u8).collect()
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.geometry.len()).map(|lin| self.get_linear(lin)).collect()
    }

    fn clear_tail(&mut self) {
        let n = self.geometry.len();
        if !n.is_multiple_of(64) {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << (n % 64)) - 1;
            }
        }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    /// Same voxels on a relabelled geometry with identical dims.
    pub fn with_geometry(mut self, geometry: Geometry) -> Result<Self> {
        if geometry.dims != self.geometry.dims {
            return Err(Error::GeometryMismatch);
        }
        self.geometry = geometry;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.geometry.len()
    }

    #[inline]
    pub fn get_linear(&self, lin: usize) -> bool {
        (self.words[lin >> 6] >> (lin & 63)) & 1 == 1
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.get_linear(self.geometry.linear(i, j, k))
    }

    /// Like [`get`](Self::get) but out-of-grid indices read as unset.
    #[inline]
    pub fn get_signed(&self, i: isize, j: isize, k: isize) -> bool {
        let [nx, ny, nz] = self.geometry.dims;
        if i < 0 || j < 0 || k < 0 || i as usize >= nx || j as usize >= ny || k as usize >= nz {
            return false;
        }
        self.get(i as usize, j as usize, k as usize)
    }

    #[inline]
    pub fn set_linear(&mut self, lin: usize, value: bool) {
        let bit = 1u64 << (lin & 63);
        if value {
            self.words[lin >> 6] |= bit;
        } else {
            self.words[lin >> 6] &= !bit;
        }
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: bool) {
        let lin = self.geometry.linear(i, j, k);
        self.set_linear(lin, value);
    }

    pub fn count_on(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn is_full(&self) -> bool {
        self.count_on() == self.len()
    }

    /// Linear indices of set voxels in increasing order.
    pub fn iter_on(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &word)| {
            let mut bits = word;
            core::iter::from_fn(move || {
                if bits == 0 {
                    None
                } else {
                    let tz = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    Some(w * 64 + tz)
                }
            })
        })
    }

    pub fn complement(&self) -> VoxelGrid {
        let mut out = VoxelGrid { geometry: self.geometry, words: self.words.iter().map(|w| !w).collect() };
        out.clear_tail();
        out
    }

    /// Elementwise boolean combination; geometries must match.
    pub fn set_op(&self, other: &VoxelGrid, op: SetOp) -> Result<VoxelGrid> {
        self.geometry.ensure_matches(&other.geometry)?;
        let f: fn(u64, u64) -> u64 = match op {
            SetOp::Union => |a, b| a | b,
            SetOp::Intersect => |a, b| a & b,
            SetOp::Subtract => |a, b| a & !b,
            SetOp::Xor => |a, b| a ^ b,
        };
        Ok(VoxelGrid {
            geometry: self.geometry,
            words: self.words.iter().zip(&other.words).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn union(&self, other: &VoxelGrid) -> Result<VoxelGrid> {
        self.set_op(other, SetOp::Union)
    }

    pub fn intersect(&self, other: &VoxelGrid) -> Result<VoxelGrid> {
        self.set_op(other, SetOp::Intersect)
    }

    pub fn subtract(&self, other: &VoxelGrid) -> Result<VoxelGrid> {
        self.set_op(other, SetOp::Subtract)
    }

    pub fn xor(&self, other: &VoxelGrid) -> Result<VoxelGrid> {
        self.set_op(other, SetOp::Xor)
    }

    /// `|self ∩ other|` without allocating.
    pub fn intersection_count(&self, other: &VoxelGrid) -> Result<usize> {
        self.geometry.ensure_matches(&other.geometry)?;
        Ok(self.words.iter().zip(&other.words).map(|(a, b)| (a & b).count_ones() as usize).sum())
    }

    /// `self ⊆ other`, assuming matching geometry.
    pub fn is_subset_of(&self, other: &VoxelGrid) -> bool {
        self.geometry.matches(&other.geometry) && self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    /// Set voxels with at least one face-adjacent unset neighbour. Neighbours
    /// outside the grid count as unset.
    pub fn surface(&self) -> VoxelGrid {
        let [nx, ny, nz] = self.geometry.dims;
        let mut out = VoxelGrid::empty(self.geometry);
        for lin in self.iter_on() {
            let [i, j, k] = self.geometry.coords(lin);
            let on_border = i == 0 || j == 0 || k == 0 || i + 1 == nx || j + 1 == ny || k + 1 == nz;
            let exposed = on_border
                || !self.get_linear(lin - 1)
                || !self.get_linear(lin + 1)
                || !self.get_linear(lin - nx)
                || !self.get_linear(lin + nx)
                || !self.get_linear(lin - nx * ny)
                || !self.get_linear(lin + nx * ny);
            if exposed {
                out.set_linear(lin, true);
            }
        }
        out
    }

    /// Reflection through the grid mid-plane `x = (nx - 1) / 2`.
    pub fn mirror_x(&self) -> VoxelGrid {
        let nx = self.geometry.dims[0];
        let mut out = VoxelGrid::empty(self.geometry);
        for lin in self.iter_on() {
            let [i, j, k] = self.geometry.coords(lin);
            out.set(nx - 1 - i, j, k, true);
        }
        out
    }

    /// World-space centroid of the set voxels.
    pub fn centroid(&self) -> Option<Vec3> {
        let mut sum = [0.0f64; 3];
        let mut n = 0usize;
        for lin in self.iter_on() {
            let w = self.geometry.world(self.geometry.coords(lin));
            for a in 0..3 {
                sum[a] += w[a];
            }
            n += 1;
        }
        (n > 0).then(|| math::scale(sum, 1.0 / n as f64))
    }

    /// Centroid and second central moment (covariance, mm²) of set voxels.
    pub fn moments(&self) -> Option<(Vec3, math::Mat3)> {
        let c = self.centroid()?;
        let mut cov = [[0.0f64; 3]; 3];
        let mut n = 0usize;
        for lin in self.iter_on() {
            let d = math::sub(self.geometry.world(self.geometry.coords(lin)), c);
            for a in 0..3 {
                for b in 0..3 {
                    cov[a][b] += d[a] * d[b];
                }
            }
            n += 1;
        }
        for row in cov.iter_mut() {
            for v in row.iter_mut() {
                *v /= n as f64;
            }
        }
        Some((c, cov))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetOp {
    Union,
    Intersect,
    Subtract,
    Xor,
}

/// Real-valued samples on a grid (atlas averages, distance maps).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    geometry: Geometry,
    data: Vec<f64>,
}

impl ScalarGrid {
    pub fn new(geometry: Geometry, data: Vec<f64>) -> Result<Self> {
        if data.len() != geometry.len() {
            return Err(Error::LengthMismatch { expected: geometry.len(), actual: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("scalar grid values must be finite".into()));
        }
        Ok(ScalarGrid { geometry, data })
    }

    pub fn filled(geometry: Geometry, value: f64) -> Self {
        ScalarGrid { geometry, data: vec![value; geometry.len()] }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.geometry.linear(i, j, k)]
    }

    /// Every `factor`-th sample along each axis.
    pub fn subsampled(&self, factor: usize) -> ScalarGrid {
        let geometry = self.geometry.subsampled(factor);
        let factor = factor.max(1);
        let [nx, ny, nz] = geometry.dims;
        let mut data = Vec::with_capacity(geometry.len());
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    data.push(self.get(i * factor, j * factor, k * factor));
                }
            }
        }
        ScalarGrid { geometry, data }
    }

    /// Trilinear interpolation at a world point. Outside the grid the value
    /// at the nearest grid point is extended by the distance to it, which
    /// keeps distance maps continuous and growing away from the field.
    pub fn sample(&self, p: Vec3) -> f64 {
        let g = &self.geometry;
        let c = g.continuous_index(p);
        let mut clamped = [0.0f64; 3];
        let mut outside_sq = 0.0;
        for a in 0..3 {
            let hi = (g.dims[a] - 1) as f64;
            clamped[a] = c[a].clamp(0.0, hi);
            let d = (c[a] - clamped[a]) * g.spacing[a];
            outside_sq += d * d;
        }
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..3 {
            let f = math::floor(clamped[a]);
            let mut b = f as usize;
            let mut t = clamped[a] - f;
            if b + 1 >= g.dims[a] {
                if g.dims[a] == 1 {
                    b = 0;
                    t = 0.0;
                } else {
                    b = g.dims[a] - 2;
                    t = 1.0;
                }
            }
            base[a] = b;
            frac[a] = t;
        }
        let [nx, ny, _] = g.dims;
        let step = [1usize, nx, nx * ny];
        let b0 = g.linear(base[0], base[1], base[2]);
        let mut value = 0.0;
        for corner in 0..8usize {
            let mut w = 1.0;
            let mut lin = b0;
            for a in 0..3 {
                if corner >> a & 1 == 1 {
                    if frac[a] == 0.0 {
                        w = 0.0;
                        break;
                    }
                    w *= frac[a];
                    lin += step[a];
                } else {
                    w *= 1.0 - frac[a];
                }
            }
            if w != 0.0 {
                value += w * self.data[lin];
            }
        }
        if outside_sq > 0.0 {
            value + math::sqrt(outside_sq)
        } else {
            value
        }
    }
}

/// Voxel set iff `g >= t`.
pub fn threshold(g: &ScalarGrid, t: f64) -> Result<VoxelGrid> {
    if !t.is_finite() {
        return Err(Error::InvalidParameter("threshold must be finite".into()));
    }
    let mut out = VoxelGrid::empty(g.geometry);
    for (lin, _) in g.data.iter().enumerate().filter(|(_, &v)| v >= t) {
        out.set_linear(lin, true);
    }
    Ok(out)
}
