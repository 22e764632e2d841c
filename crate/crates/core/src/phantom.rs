//! Synthetic full-skull phantoms: truncated ellipsoidal shells.
//!
//! The canonical phantom is centred at the world origin with x left-right,
//! y anterior-posterior and z inferior-superior. The bottom
//! `base_cut_fraction` of its height is removed, leaving an open calvarium.
//! A rigid `pose` maps the canonical phantom into world coordinates.

use alloc::format;
use alloc::vec::Vec;

use crate::geometry::Geometry;
use crate::math::{self, Vec3};
use crate::rng::{derive_seed, rng_from_seed, truncated_normal};
use crate::transform::RigidTransform;
use crate::volume::VoxelGrid;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhantomSpec {
    /// Outer semi-axes (a, b, c) in mm.
    pub outer_semiaxes: [f64; 3],
    /// Shell thickness in mm; the inner ellipsoid has semi-axes `a - t` etc.
    pub thickness: f64,
    /// Fraction of the full height removed from the bottom.
    pub base_cut_fraction: f64,
    pub pose: RigidTransform,
    /// Seed of the population draw this spec came from.
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            outer_semiaxes: [70.0, 90.0, 65.0],
            thickness: 6.0,
            base_cut_fraction: 0.25,
            pose: RigidTransform::identity(),
            seed: 0,
        }
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        let t = self.thickness;
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidParameter(format!("thickness must be > 0, got {t}")));
        }
        if self.outer_semiaxes.iter().any(|&s| !(s > t) || !s.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "semi-axes {:?} must all exceed the thickness {t}",
                self.outer_semiaxes
            )));
        }
        if !(0.0..0.5).contains(&self.base_cut_fraction) {
            return Err(Error::InvalidParameter(format!(
                "base_cut_fraction must be in [0, 0.5), got {}",
                self.base_cut_fraction
            )));
        }
        Ok(())
    }

    pub fn inner_semiaxes(&self) -> [f64; 3] {
        self.outer_semiaxes.map(|s| s - self.thickness)
    }

    /// Canonical z of the base cut plane.
    pub fn cut_z(&self) -> f64 {
        let c = self.outer_semiaxes[2];
        -c + 2.0 * c * self.base_cut_fraction
    }

    /// Membership of a point given in canonical (un-posed) coordinates.
    pub fn contains_canonical(&self, p: Vec3) -> bool {
        if p[2] < self.cut_z() {
            return false;
        }
        let [a, b, c] = self.outer_semiaxes;
        let outer = (p[0] / a) * (p[0] / a) + (p[1] / b) * (p[1] / b) + (p[2] / c) * (p[2] / c);
        if outer > 1.0 {
            return false;
        }
        let [ai, bi, ci] = self.inner_semiaxes();
        let inner = (p[0] / ai) * (p[0] / ai) + (p[1] / bi) * (p[1] / bi) + (p[2] / ci) * (p[2] / ci);
        inner > 1.0
    }

    /// World-space axis-aligned half extents of the posed outer ellipsoid.
    pub fn half_extents(&self) -> Vec3 {
        let r = self.pose.rotation();
        core::array::from_fn(|i| {
            math::sqrt(
                (0..3)
                    .map(|j| {
                        let v = r[i][j] * self.outer_semiaxes[j];
                        v * v
                    })
                    .sum(),
            )
        })
    }

    /// Analytic volume (mm³) of the truncated shell.
    pub fn analytic_volume(&self) -> f64 {
        let z0 = self.cut_z();
        cut_ellipsoid_volume(self.outer_semiaxes, z0) - cut_ellipsoid_volume(self.inner_semiaxes(), z0)
    }
}

/// Volume of `{x²/a² + y²/b² + z²/c² ≤ 1, z ≥ z0}`.
pub fn cut_ellipsoid_volume([a, b, c]: [f64; 3], z0: f64) -> f64 {
    let z0 = z0.clamp(-c, c);
    core::f64::consts::PI * a * b * ((c - z0) - (c * c * c - z0 * z0 * z0) / (3.0 * c * c))
}

/// Grid centred on the world origin, symmetric about x = 0, large enough to
/// hold the posed phantom plus `margin_mm` on every side.
pub fn fitting_geometry(spec: &PhantomSpec, spacing: [f64; 3], margin_mm: f64) -> Result<Geometry> {
    let ext = spec.half_extents();
    let t = spec.pose.translation();
    let dims = core::array::from_fn(|a| {
        let half = ext[a] + math::abs(t[a]) + margin_mm;
        2 * (math::ceil(half / spacing[a]) as usize) + 1
    });
    Geometry::centered_at(dims, spacing, [0.0; 3])
}

/// Rasterize by voxel-centre membership.
pub fn generate_phantom(spec: &PhantomSpec, geometry: &Geometry) -> Result<VoxelGrid> {
    spec.validate()?;
    let ext = spec.half_extents();
    let center = spec.pose.translation();
    let lo_grid = geometry.origin;
    let hi_grid: Vec3 =
        core::array::from_fn(|a| geometry.origin[a] + (geometry.dims[a] - 1) as f64 * geometry.spacing[a]);
    let mut lo_idx = [0usize; 3];
    let mut hi_idx = [0usize; 3];
    for a in 0..3 {
        let lo = center[a] - ext[a];
        let hi = center[a] + ext[a];
        if lo < lo_grid[a] || hi > hi_grid[a] {
            return Err(Error::OutOfBounds);
        }
        lo_idx[a] = math::floor((lo - geometry.origin[a]) / geometry.spacing[a]).max(0.0) as usize;
        hi_idx[a] = (math::ceil((hi - geometry.origin[a]) / geometry.spacing[a]) as usize).min(geometry.dims[a] - 1);
    }
    let to_canonical = spec.pose.inverse();
    let mut out = VoxelGrid::empty(*geometry);
    for k in lo_idx[2]..=hi_idx[2] {
        for j in lo_idx[1]..=hi_idx[1] {
            for i in lo_idx[0]..=hi_idx[0] {
                let p = to_canonical.apply(geometry.world([i, j, k]));
                if spec.contains_canonical(p) {
                    out.set(i, j, k, true);
                }
            }
        }
    }
    Ok(out)
}

/// Per-field jitter (standard deviations) applied around a base spec.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Variability {
    pub semiaxis_sd_mm: f64,
    pub thickness_sd_mm: f64,
    pub rotation_sd_deg: f64,
    pub translation_sd_mm: f64,
}

impl Variability {
    pub const NONE: Variability =
        Variability { semiaxis_sd_mm: 0.0, thickness_sd_mm: 0.0, rotation_sd_deg: 0.0, translation_sd_mm: 0.0 };
}

impl Default for Variability {
    fn default() -> Self {
        Variability { semiaxis_sd_mm: 4.0, thickness_sd_mm: 0.75, rotation_sd_deg: 3.0, translation_sd_mm: 3.0 }
    }
}

/// `n` specs jittered around `base` by truncated Gaussians (±2 sd, and
/// clipped so every spec satisfies the invariants). Case `i` draws from the
/// stream `derive_seed(seed, i)` and records that seed.
pub fn sample_population(
    n: usize,
    seed: u64,
    base: &PhantomSpec,
    variability: &Variability,
) -> Result<Vec<PhantomSpec>> {
    if n == 0 {
        return Err(Error::InvalidParameter("population size must be >= 1".into()));
    }
    base.validate()?;
    let v = variability;
    (0..n)
        .map(|i| {
            let case_seed = derive_seed(seed, i as u64);
            let mut rng = rng_from_seed(case_seed);
            let thickness = truncated_normal(&mut rng, base.thickness, v.thickness_sd_mm, 1.0, f64::INFINITY);
            let outer_semiaxes = base
                .outer_semiaxes
                .map(|s| truncated_normal(&mut rng, s, v.semiaxis_sd_mm, thickness + 1.0, f64::INFINITY));
            let deg = core::f64::consts::PI / 180.0;
            let mut angle = || truncated_normal(&mut rng, 0.0, v.rotation_sd_deg, -180.0, 180.0) * deg;
            let (yaw, pitch, roll) = (angle(), angle(), angle());
            let shift: Vec3 = core::array::from_fn(|_| {
                truncated_normal(&mut rng, 0.0, v.translation_sd_mm, f64::NEG_INFINITY, f64::INFINITY)
            });
            let rotation = math::rotation_zyx(yaw, pitch, roll);
            let pose = base.pose.compose(&RigidTransform::from_parts(&rotation, shift));
            let spec = PhantomSpec {
                outer_semiaxes,
                thickness,
                base_cut_fraction: base.base_cut_fraction,
                pose,
                seed: case_seed,
            };
            spec.validate()?;
            Ok(spec)
        })
        .collect()
}
