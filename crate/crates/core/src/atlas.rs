//! Full-skull atlas: the thresholded mean of rigidly co-registered skulls.
//!
//! Round 0 registers every input to the first one; each later round
//! registers the inputs to the previous round's binary atlas. Registered
//! masks are resampled (nearest neighbour) onto the common grid and their
//! occupancy is averaged.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::metrics::dice;
use crate::registration::{resample, CommonGridSpec, FixedImage, Interpolation, RegistrationOptions};
use crate::transform::RigidTransform;
use crate::volume::{threshold, ScalarGrid, VoxelGrid};
use crate::{Error, Result};

/// Runs independent per-case jobs. The default runs them in order;
/// batch drivers can supply a parallel implementation. Results must be
/// returned in index order.
pub trait CaseMap {
    fn map<T: Send, F: Fn(usize) -> T + Sync>(&self, n: usize, f: F) -> Vec<T>;
}

pub struct Sequential;

impl CaseMap for Sequential {
    fn map<T: Send, F: Fn(usize) -> T + Sync>(&self, n: usize, f: F) -> Vec<T> {
        (0..n).map(f).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtlasOptions {
    pub threshold: f64,
    /// Refinement rounds after the initial round against the first input.
    pub iterations: usize,
    /// Common grid; `None` centres the default grid on the first input's centroid.
    pub grid: Option<CommonGridSpec>,
    pub registration: RegistrationOptions,
}

impl Default for AtlasOptions {
    fn default() -> Self {
        AtlasOptions { threshold: 0.5, iterations: 2, grid: None, registration: RegistrationOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AtlasProvenance {
    /// Cases that contributed to the final average.
    pub case_ids: Vec<String>,
    /// Cases whose final-round registration failed.
    pub failed_ids: Vec<String>,
    /// Mean Dice between the binary atlas and each registered input, per round.
    pub round_mean_dice: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atlas {
    /// Mean occupancy in [0, 1].
    pub average: ScalarGrid,
    /// `threshold(average, threshold)`.
    pub binary: VoxelGrid,
    pub grid: CommonGridSpec,
    pub threshold: f64,
    pub provenance: AtlasProvenance,
}

impl Atlas {
    /// Assemble an atlas from a stored average, re-deriving the binary mask.
    pub fn from_average(average: ScalarGrid, t: f64, provenance: AtlasProvenance) -> Result<Self> {
        if average.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParameter("atlas average must lie in [0, 1]".into()));
        }
        let binary = threshold(&average, t)?;
        let grid = CommonGridSpec::from(*average.geometry());
        Ok(Atlas { average, binary, grid, threshold: t, provenance })
    }
}

struct Round {
    average: ScalarGrid,
    binary: VoxelGrid,
    registered: Vec<Option<VoxelGrid>>,
    transforms: Vec<Option<RigidTransform>>,
}

fn average_round(
    registered: Vec<Option<VoxelGrid>>,
    transforms: Vec<Option<RigidTransform>>,
    geometry: crate::Geometry,
    t: f64,
) -> Result<Round> {
    let mut counts = vec![0u32; geometry.len()];
    let mut n = 0u32;
    for m in registered.iter().flatten() {
        for lin in m.iter_on() {
            counts[lin] += 1;
        }
        n += 1;
    }
    let average = ScalarGrid::new(geometry, counts.iter().map(|&c| c as f64 / n as f64).collect())?;
    let binary = threshold(&average, t)?;
    Ok(Round { average, binary, registered, transforms })
}

fn check_failures(results: &[Option<RigidTransform>]) -> Result<()> {
    let failed = results.iter().filter(|r| r.is_none()).count();
    if failed * 2 > results.len() {
        return Err(Error::TooManyFailures { failed, total: results.len() });
    }
    Ok(())
}

/// Build an atlas from `(case_id, full_skull)` pairs.
pub fn build_atlas<M: CaseMap>(inputs: &[(String, VoxelGrid)], options: &AtlasOptions, exec: &M) -> Result<Atlas> {
    if inputs.len() < 2 {
        return Err(Error::InvalidParameter(format!("atlas needs >= 2 inputs, got {}", inputs.len())));
    }
    if inputs.iter().any(|(_, m)| m.is_empty()) {
        return Err(Error::EmptyMask);
    }
    let t = options.threshold;
    if !t.is_finite() {
        return Err(Error::InvalidParameter("atlas threshold must be finite".into()));
    }
    let reference = &inputs[0].1;
    let grid = match options.grid {
        Some(g) => g,
        None => CommonGridSpec::centered_on(reference.centroid().ok_or(Error::EmptyMask)?),
    };
    let geometry = grid.geometry()?;

    let register_all = |fixed: &VoxelGrid, skip_first: bool| -> Result<Round> {
        let fixed_image = FixedImage::new(fixed, options.registration.clone())?;
        let transforms: Vec<Option<RigidTransform>> = exec.map(inputs.len(), |i| {
            if skip_first && i == 0 {
                return Some(RigidTransform::identity());
            }
            fixed_image.register(&inputs[i].1).ok().map(|r| r.transform)
        });
        check_failures(&transforms)?;
        let registered = exec.map(inputs.len(), |i| {
            transforms[i].map(|tr| resample(&inputs[i].1, &tr, &geometry, Interpolation::Nearest))
        });
        average_round(registered, transforms, geometry, t)
    };

    let round_dice = |round: &Round| -> f64 {
        let scores: Vec<f64> = round.registered.iter().flatten().filter_map(|m| dice(&round.binary, m).ok()).collect();
        scores.iter().sum::<f64>() / scores.len().max(1) as f64
    };

    let mut round = register_all(reference, true)?;
    let mut history = vec![round_dice(&round)];
    for _ in 0..options.iterations {
        if round.binary.is_empty() {
            return Err(Error::EmptyMask);
        }
        round = register_all(&round.binary, false)?;
        history.push(round_dice(&round));
    }

    let mut provenance = AtlasProvenance { round_mean_dice: history, ..AtlasProvenance::default() };
    for ((id, _), tr) in inputs.iter().zip(&round.transforms) {
        if tr.is_some() {
            provenance.case_ids.push(id.clone());
        } else {
            provenance.failed_ids.push(id.clone());
        }
    }
    Ok(Atlas { average: round.average, binary: round.binary, grid, threshold: t, provenance })
}

/// The two network input channels: the registered defected skull and the
/// atlas prior, on identical geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorChannels {
    pub defected: VoxelGrid,
    pub prior: VoxelGrid,
}

pub fn prior_channel(defected_registered: &VoxelGrid, atlas: &Atlas) -> Result<PriorChannels> {
    defected_registered.geometry().ensure_matches(atlas.binary.geometry())?;
    Ok(PriorChannels { defected: defected_registered.clone(), prior: atlas.binary.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Geometry;
    use crate::phantom::{fitting_geometry, generate_phantom, PhantomSpec};

    fn small(spec_axes: [f64; 3]) -> (VoxelGrid, Geometry) {
        let spec = PhantomSpec { outer_semiaxes: spec_axes, thickness: 4.0, ..PhantomSpec::default() };
        let g = fitting_geometry(&PhantomSpec { outer_semiaxes: [34.0, 40.0, 32.0], ..spec }, [1.0; 3], 4.0).unwrap();
        (generate_phantom(&spec, &g).unwrap(), g)
    }

    fn opts(g: &Geometry) -> AtlasOptions {
        AtlasOptions { grid: Some(CommonGridSpec::from(*g)), iterations: 1, ..AtlasOptions::default() }
    }

    #[test]
    fn identical_inputs_reproduce_the_input() {
        let (m, g) = small([30.0, 36.0, 28.0]);
        let inputs: Vec<_> = (0..3).map(|i| (format!("c{i}"), m.clone())).collect();
        let atlas = build_atlas(&inputs, &opts(&g), &Sequential).unwrap();
        assert!(atlas.average.data().iter().all(|&v| v == 0.0 || v == 1.0));
        assert!(dice(&atlas.binary, &m).unwrap() >= 0.98);
        assert_eq!(atlas.binary, threshold(&atlas.average, 0.5).unwrap());
        assert_eq!(atlas.provenance.case_ids.len(), 3);
    }

    #[test]
    fn two_inputs_threshold_semantics() {
        let (a, g) = small([30.0, 36.0, 28.0]);
        let (b, _) = small([31.0, 37.0, 29.0]);
        let inputs = vec![("a".into(), a), ("b".into(), b)];
        let atlas = build_atlas(&inputs, &AtlasOptions { iterations: 0, ..opts(&g) }, &Sequential).unwrap();
        // two binary inputs average to {0, 0.5, 1}
        assert!(atlas.average.data().iter().all(|&v| v == 0.0 || v == 0.5 || v == 1.0));
        let both = threshold(&atlas.average, 0.75).unwrap();
        let either = threshold(&atlas.average, 0.5).unwrap();
        assert!(both.is_subset_of(&either));
        assert!(both.count_on() < either.count_on());
        assert!(threshold(&atlas.average, 0.6).unwrap().is_subset_of(&threshold(&atlas.average, 0.4).unwrap()));
    }

    #[test]
    fn rejects_bad_inputs() {
        let (m, g) = small([30.0, 36.0, 28.0]);
        assert!(build_atlas(&[("a".into(), m.clone())], &opts(&g), &Sequential).is_err());
        let inputs = vec![("a".into(), m), ("b".into(), VoxelGrid::empty(g))];
        assert_eq!(build_atlas(&inputs, &opts(&g), &Sequential), Err(Error::EmptyMask));
    }

    #[test]
    fn prior_channel_pairs_with_atlas() {
        let (m, g) = small([30.0, 36.0, 28.0]);
        let inputs = vec![("a".into(), m.clone()), ("b".into(), m.clone())];
        let atlas = build_atlas(&inputs, &AtlasOptions { iterations: 0, ..opts(&g) }, &Sequential).unwrap();
        let empty = VoxelGrid::empty(g);
        let ch = prior_channel(&empty, &atlas).unwrap();
        assert!(ch.defected.is_empty());
        assert_eq!(ch.prior, atlas.binary);
        let other = VoxelGrid::empty(Geometry::new([3, 3, 3], [1.0; 3], [0.0; 3]).unwrap());
        assert_eq!(prior_channel(&other, &atlas), Err(Error::GeometryMismatch));
    }
}
