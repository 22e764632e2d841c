//! Connected-component labelling of binary masks.

use alloc::vec;
use alloc::vec::Vec;

use super::VoxelGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    /// Face neighbours.
    Six,
    /// Face, edge and corner neighbours.
    TwentySix,
}

impl Connectivity {
    fn offsets(self) -> Vec<[isize; 3]> {
        let mut out = Vec::new();
        for dk in -1isize..=1 {
            for dj in -1isize..=1 {
                for di in -1isize..=1 {
                    let manhattan = di.abs() + dj.abs() + dk.abs();
                    let keep = match self {
                        Connectivity::Six => manhattan == 1,
                        Connectivity::TwentySix => manhattan > 0,
                    };
                    if keep {
                        out.push([di, dj, dk]);
                    }
                }
            }
        }
        out
    }
}

/// Component labels (1-based, 0 = background) in seed order: components are
/// numbered by the lowest linear index they contain. Returns labels and the
/// size of each component.
pub(crate) fn label(m: &VoxelGrid, connectivity: Connectivity) -> (Vec<u32>, Vec<usize>) {
    let g = *m.geometry();
    let [nx, ny, nz] = g.dims;
    let offsets = connectivity.offsets();
    let mut labels = vec![0u32; g.len()];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for seed in m.iter_on() {
        if labels[seed] != 0 {
            continue;
        }
        let id = sizes.len() as u32 + 1;
        labels[seed] = id;
        stack.push(seed);
        let mut size = 0usize;
        while let Some(lin) = stack.pop() {
            size += 1;
            let [i, j, k] = g.coords(lin);
            for off in &offsets {
                let (a, b, c) = (i as isize + off[0], j as isize + off[1], k as isize + off[2]);
                if a < 0 || b < 0 || c < 0 || a as usize >= nx || b as usize >= ny || c as usize >= nz {
                    continue;
                }
                let n = g.linear(a as usize, b as usize, c as usize);
                if labels[n] == 0 && m.get_linear(n) {
                    labels[n] = id;
                    stack.push(n);
                }
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

/// Keep only the largest connected component. Ties go to the component
/// whose lowest linear index is smallest.
pub fn largest_component(m: &VoxelGrid, connectivity: Connectivity) -> VoxelGrid {
    let (labels, sizes) = label(m, connectivity);
    let mut best: Option<(usize, u32)> = None;
    for (idx, &size) in sizes.iter().enumerate() {
        if best.is_none_or(|(s, _)| size > s) {
            best = Some((size, idx as u32 + 1));
        }
    }
    let mut out = VoxelGrid::empty(*m.geometry());
    if let Some((_, id)) = best {
        for lin in m.iter_on() {
            if labels[lin] == id {
                out.set_linear(lin, true);
            }
        }
    }
    out
}

pub fn component_count(m: &VoxelGrid, connectivity: Connectivity) -> usize {
    label(m, connectivity).1.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Geometry;

    fn geom() -> Geometry {
        Geometry::new([10, 6, 3], [1.0; 3], [0.0; 3]).unwrap()
    }

    #[test]
    fn keeps_larger_blob() {
        let m = VoxelGrid::from_fn(geom(), |[i, j, k]| (k == 0 && j < 2 && i < 5) || (k == 2 && j == 5 && i >= 7));
        let lc = largest_component(&m, Connectivity::Six);
        assert_eq!(lc.count_on(), 10);
        assert!(lc.get(0, 0, 0) && !lc.get(9, 5, 2));
        assert_eq!(component_count(&m, Connectivity::Six), 2);
    }

    #[test]
    fn empty_in_empty_out() {
        assert!(largest_component(&VoxelGrid::empty(geom()), Connectivity::TwentySix).is_empty());
    }

    #[test]
    fn tie_breaks_on_lowest_seed() {
        let m = VoxelGrid::from_fn(geom(), |idx| idx == [0, 0, 0] || idx == [2, 0, 0]);
        let lc = largest_component(&m, Connectivity::Six);
        assert_eq!(lc.iter_on().collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn diagonal_neighbours_depend_on_connectivity() {
        let m = VoxelGrid::from_fn(geom(), |idx| idx == [0, 0, 0] || idx == [1, 1, 1]);
        assert_eq!(component_count(&m, Connectivity::Six), 2);
        assert_eq!(component_count(&m, Connectivity::TwentySix), 1);
    }
}
