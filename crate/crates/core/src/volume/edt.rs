//! Exact Euclidean distance transforms on anisotropic grids.
//!
//! Separable lower-envelope-of-parabolas algorithm (Felzenszwalb &
//! Huttenlocher), one pass per axis with that axis' spacing, so the result
//! is the exact squared distance in mm² between voxel centres.

use alloc::vec;
use alloc::vec::Vec;

use super::{ScalarGrid, VoxelGrid};
use crate::geometry::Geometry;
use crate::math;
use crate::{Error, Result};

/// Squared distance along one line. `f` holds the per-voxel cost (INFINITY
/// where there is no seed); results go to `out`.
fn envelope_1d(f: &[f64], spacing: f64, out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k: usize = 0;
    let mut started = false;
    for q in 0..n {
        if f[q] == f64::INFINITY {
            continue;
        }
        if !started {
            v[0] = q;
            z[0] = f64::NEG_INFINITY;
            z[1] = f64::INFINITY;
            started = true;
            continue;
        }
        let xq = q as f64 * spacing;
        loop {
            let p = v[k];
            let xp = p as f64 * spacing;
            let s = ((f[q] + xq * xq) - (f[p] + xp * xp)) / (2.0 * (xq - xp));
            if s <= z[k] {
                // z[0] is -inf so this never underflows
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    if !started {
        out.fill(f64::INFINITY);
        return;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        let x = q as f64 * spacing;
        while z[k + 1] < x {
            k += 1;
        }
        let d = x - v[k] as f64 * spacing;
        *o = d * d + f[v[k]];
    }
}

/// Squared distance (mm²) from every voxel centre to the nearest set voxel
/// of `seeds`. `INFINITY` everywhere when `seeds` is empty.
pub fn squared_distance_to(seeds: &VoxelGrid) -> Vec<f64> {
    let g: &Geometry = seeds.geometry();
    let [nx, ny, nz] = g.dims;
    let mut data: Vec<f64> = (0..g.len()).map(|lin| if seeds.get_linear(lin) { 0.0 } else { f64::INFINITY }).collect();
    if seeds.is_empty() {
        return data;
    }
    let longest = nx.max(ny).max(nz);
    let mut line = vec![0.0; longest];
    let mut out = vec![0.0; longest];
    let mut v = vec![0usize; longest];
    let mut z = vec![0.0; longest + 1];

    let mut pass = |axis: usize, data: &mut [f64]| {
        let n = g.dims[axis];
        let stride = [1, nx, nx * ny][axis];
        let (outer_a, outer_b) = match axis {
            0 => ((ny, nx), (nz, nx * ny)),
            1 => ((nx, 1), (nz, nx * ny)),
            _ => ((nx, 1), (ny, nx)),
        };
        for b in 0..outer_b.0 {
            for a in 0..outer_a.0 {
                let start = a * outer_a.1 + b * outer_b.1;
                for (t, slot) in line[..n].iter_mut().enumerate() {
                    *slot = data[start + t * stride];
                }
                envelope_1d(&line[..n], g.spacing[axis], &mut out[..n], &mut v, &mut z);
                for (t, &val) in out[..n].iter().enumerate() {
                    data[start + t * stride] = val;
                }
            }
        }
    };
    pass(0, &mut data);
    pass(1, &mut data);
    pass(2, &mut data);
    data
}

/// Euclidean distance (mm) to the nearest set voxel of `seeds`.
pub fn distance_to(seeds: &VoxelGrid) -> Result<ScalarGrid> {
    if seeds.is_empty() {
        return Err(Error::EmptyMask);
    }
    let data = squared_distance_to(seeds).into_iter().map(math::sqrt).collect();
    ScalarGrid::new(*seeds.geometry(), data)
}

/// Signed distance (mm) to the mask boundary: negative inside, positive
/// outside, zero on boundary voxels. The boundary is the set of mask voxels
/// with a face-adjacent unset neighbour (see [`VoxelGrid::surface`]).
pub fn signed_distance(mask: &VoxelGrid) -> Result<ScalarGrid> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    if mask.is_full() {
        return Err(Error::FullMask);
    }
    let boundary = mask.surface();
    let data = squared_distance_to(&boundary)
        .into_iter()
        .enumerate()
        .map(|(lin, sq)| {
            let d = math::sqrt(sq);
            if mask.get_linear(lin) && d > 0.0 {
                -d
            } else {
                d
            }
        })
        .collect();
    ScalarGrid::new(*mask.geometry(), data)
}
