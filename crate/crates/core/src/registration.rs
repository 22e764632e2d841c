//! Rigid registration of binary masks and resampling to a common grid.
//!
//! Similarity is the negative mean absolute difference between the two
//! signed distance maps, evaluated symmetrically on points within a band
//! around each surface. Optimization is a Nelder–Mead simplex over three
//! intrinsic z-y-x Euler angles (degrees) and three translations (mm),
//! run coarse to fine on distance maps subsampled by 4, 2 and 1. The start
//! point comes from centroid alignment plus principal-axes rotation.
//!
//! Transforms map moving-image world coordinates to fixed-image world
//! coordinates, so `resample(moving, T, fixed_grid)` brings the moving mask
//! into the fixed space and `T.inverse()` maps results back.

use alloc::vec::Vec;

use crate::geometry::Geometry;
use crate::math::{self, Mat3, Vec3};
use crate::transform::RigidTransform;
use crate::volume::{signed_distance, ScalarGrid, VoxelGrid};
use crate::{Error, Result};

/// The common processing grid. Defaults to 304×304×224 voxels of
/// 0.695×0.695×0.715 mm.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CommonGridSpec {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
}

impl CommonGridSpec {
    pub const DEFAULT_DIMS: [usize; 3] = [304, 304, 224];
    pub const DEFAULT_SPACING: [f64; 3] = [0.695, 0.695, 0.715];

    /// Default-sized grid whose centre sits at `center`.
    pub fn centered_on(center: Vec3) -> Self {
        CommonGridSpec::with_size(Self::DEFAULT_DIMS, Self::DEFAULT_SPACING, center)
    }

    pub fn with_size(dims: [usize; 3], spacing: [f64; 3], center: Vec3) -> Self {
        let origin = core::array::from_fn(|a| center[a] - (dims[a] as f64 - 1.0) * spacing[a] / 2.0);
        CommonGridSpec { dims, spacing, origin }
    }

    pub fn geometry(&self) -> Result<Geometry> {
        Geometry::new(self.dims, self.spacing, self.origin)
    }
}

impl From<Geometry> for CommonGridSpec {
    fn from(g: Geometry) -> Self {
        CommonGridSpec { dims: g.dims, spacing: g.spacing, origin: g.origin }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    Nearest,
    /// Trilinear interpolation of occupancy, then `>= 0.5`.
    TrilinearThreshold,
}

/// Resample `m` onto `target`: output voxel `v` takes the value of `m` at
/// `T⁻¹(world(v))`. Samples outside `m`'s grid are background.
pub fn resample(m: &VoxelGrid, transform: &RigidTransform, target: &Geometry, interp: Interpolation) -> VoxelGrid {
    let src = *m.geometry();
    let inv = transform.inverse();
    let mut out = VoxelGrid::empty(*target);
    if m.is_empty() {
        return out;
    }
    let [nx, ny, nz] = target.dims;
    let mut lin = 0usize;
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let p = inv.apply(target.world([i, j, k]));
                let on = match interp {
                    Interpolation::Nearest => src.index(p).is_some_and(|[a, b, c]| m.get(a, b, c)),
                    Interpolation::TrilinearThreshold => occupancy(m, &src, p) >= 0.5,
                };
                if on {
                    out.set_linear(lin, true);
                }
                lin += 1;
            }
        }
    }
    out
}

fn occupancy(m: &VoxelGrid, g: &Geometry, p: Vec3) -> f64 {
    let c = g.continuous_index(p);
    let mut base = [0isize; 3];
    let mut frac = [0.0; 3];
    for a in 0..3 {
        if c[a] < -1.0 || c[a] > g.dims[a] as f64 {
            return 0.0;
        }
        let f = math::floor(c[a]);
        base[a] = f as isize;
        frac[a] = c[a] - f;
    }
    let mut value = 0.0;
    for corner in 0..8usize {
        let mut w = 1.0;
        let mut idx = base;
        for a in 0..3 {
            if corner >> a & 1 == 1 {
                w *= frac[a];
                idx[a] += 1;
            } else {
                w *= 1.0 - frac[a];
            }
        }
        if w > 0.0 && m.get_signed(idx[0], idx[1], idx[2]) {
            value += w;
        }
    }
    value
}

/// Bring a common-space prediction back onto the original image grid via
/// `T⁻¹`, nearest neighbour.
pub fn map_back(pred: &VoxelGrid, transform: &RigidTransform, original: &Geometry) -> VoxelGrid {
    resample(pred, &transform.inverse(), original, Interpolation::Nearest)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationOptions {
    /// Half-width (mm) of the band around each surface used for sampling.
    pub band_mm: f64,
    /// Subsampling factor per pyramid level, coarse to fine.
    pub levels: Vec<usize>,
    pub max_iterations_per_level: usize,
    /// Stop a level when the simplex objective spread drops below this.
    pub tolerance: f64,
    /// Cap on sample points per side and level (deterministic striding).
    pub max_samples: usize,
    /// Initial simplex step at the finest level, in degrees and mm; scaled
    /// by each level's subsampling factor.
    pub initial_step: (f64, f64),
    /// Turn a non-converged run into [`Error::NonConvergence`].
    pub require_convergence: bool,
}

impl Default for RegistrationOptions {
    fn default() -> Self {
        RegistrationOptions {
            band_mm: 20.0,
            levels: alloc::vec![4, 2, 1],
            max_iterations_per_level: 200,
            tolerance: 1e-5,
            max_samples: 40_000,
            initial_step: (1.5, 1.5),
            require_convergence: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Registration {
    pub transform: RigidTransform,
    /// Transform chosen by the moment-based initialization.
    pub initial: RigidTransform,
    /// Finest-level objective at `initial` and at `transform` (≤ 0, higher is better).
    pub objective_initial: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct Level {
    fixed: ScalarGrid,
    moving: ScalarGrid,
    fixed_points: Vec<(Vec3, f64)>,
    moving_points: Vec<(Vec3, f64)>,
    factor: usize,
}

fn band_points(sdt: &ScalarGrid, band: f64, cap: usize) -> Vec<(Vec3, f64)> {
    let g = sdt.geometry();
    let inside: Vec<usize> =
        sdt.data().iter().enumerate().filter(|(_, v)| math::abs(**v) <= band).map(|(i, _)| i).collect();
    let stride = inside.len().div_ceil(cap.max(1)).max(1);
    inside.iter().step_by(stride).map(|&lin| (g.world(g.coords(lin)), sdt.data()[lin])).collect()
}

fn mean_abs_diff(points: &[(Vec3, f64)], other: &ScalarGrid, map: &RigidTransform) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let total: f64 = points.iter().map(|(p, v)| math::abs(v - other.sample(map.apply(*p)))).sum();
    total / points.len() as f64
}

impl Level {
    fn objective(&self, t: &RigidTransform) -> f64 {
        let forward = mean_abs_diff(&self.fixed_points, &self.moving, &t.inverse());
        let backward = mean_abs_diff(&self.moving_points, &self.fixed, t);
        -(forward + backward) / 2.0
    }
}

/// Precomputed fixed-image data, reusable across many moving images.
pub struct FixedImage {
    sdt: ScalarGrid,
    centroid: Vec3,
    axes: Mat3,
    pyramid: Vec<(ScalarGrid, Vec<(Vec3, f64)>)>,
    options: RegistrationOptions,
}

impl FixedImage {
    pub fn new(fixed: &VoxelGrid, options: RegistrationOptions) -> Result<Self> {
        if fixed.is_empty() {
            return Err(Error::EmptyInput);
        }
        validate_options(&options)?;
        let sdt = signed_distance(fixed)?;
        let (centroid, cov) = fixed.moments().ok_or(Error::EmptyInput)?;
        let axes = math::symmetric_eigen(&cov).1;
        let pyramid = options
            .levels
            .iter()
            .map(|&f| {
                let g = sdt.subsampled(f);
                let pts = band_points(&g, options.band_mm, options.max_samples);
                (g, pts)
            })
            .collect();
        Ok(FixedImage { sdt, centroid, axes, pyramid, options })
    }

    pub fn options(&self) -> &RegistrationOptions {
        &self.options
    }

    /// Register `moving` onto this fixed image.
    pub fn register(&self, moving: &VoxelGrid) -> Result<Registration> {
        if moving.is_empty() {
            return Err(Error::EmptyInput);
        }
        let opts = &self.options;
        let moving_sdt = signed_distance(moving)?;
        let (m_centroid, m_cov) = moving.moments().ok_or(Error::EmptyInput)?;
        let m_axes = math::symmetric_eigen(&m_cov).1;

        let levels: Vec<Level> = opts
            .levels
            .iter()
            .zip(&self.pyramid)
            .map(|(&factor, (fixed, fixed_points))| {
                let moving = moving_sdt.subsampled(factor);
                let moving_points = band_points(&moving, opts.band_mm, opts.max_samples);
                Level { fixed: fixed.clone(), moving, fixed_points: fixed_points.clone(), moving_points, factor }
            })
            .collect();
        let finest = levels.last().expect("at least one level");

        // moment-based start: centroid shift, rotation from the identity or
        // from the principal axes (sign choice closest to the identity)
        let shift0 = math::sub(self.centroid, m_centroid);
        let pa = principal_axes_rotation(&self.axes, &m_axes);
        let candidates = [math::IDENTITY3, pa];
        let (base_rotation, objective_initial) = candidates
            .iter()
            .map(|r| (*r, finest.objective(&compose_params(r, m_centroid, shift0, &[0.0; 6]))))
            .fold((math::IDENTITY3, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best });
        let initial = compose_params(&base_rotation, m_centroid, shift0, &[0.0; 6]);

        let mut params = [0.0f64; 6];
        let mut iterations = 0;
        let mut converged = true;
        for (li, level) in levels.iter().enumerate() {
            let f = level.factor as f64;
            let step = [
                opts.initial_step.0 * f,
                opts.initial_step.0 * f,
                opts.initial_step.0 * f,
                opts.initial_step.1 * f,
                opts.initial_step.1 * f,
                opts.initial_step.1 * f,
            ];
            let cost = |x: &[f64; 6]| -level.objective(&compose_params(&base_rotation, m_centroid, shift0, x));
            let run = nelder_mead(cost, params, step, opts.max_iterations_per_level, opts.tolerance);
            params = run.best;
            iterations += run.iterations;
            if li + 1 == levels.len() {
                converged = run.converged;
            }
        }

        let mut transform = compose_params(&base_rotation, m_centroid, shift0, &params);
        let mut objective = finest.objective(&transform);
        if objective < objective_initial {
            transform = initial;
            objective = objective_initial;
        }
        if !converged && opts.require_convergence {
            return Err(Error::NonConvergence { best: alloc::boxed::Box::new(transform), objective });
        }
        Ok(Registration { transform, initial, objective_initial, objective, iterations, converged })
    }

    /// Finest-level objective of an arbitrary transform.
    pub fn objective(&self, moving: &VoxelGrid, transform: &RigidTransform) -> Result<f64> {
        let moving_sdt = signed_distance(moving)?;
        let factor = *self.options.levels.last().unwrap_or(&1);
        let (fixed, fixed_points) = self.pyramid.last().ok_or(Error::EmptyInput)?;
        let moving = moving_sdt.subsampled(factor);
        let moving_points = band_points(&moving, self.options.band_mm, self.options.max_samples);
        let level = Level { fixed: fixed.clone(), moving, fixed_points: fixed_points.clone(), moving_points, factor };
        Ok(level.objective(transform))
    }

    pub fn signed_distance(&self) -> &ScalarGrid {
        &self.sdt
    }
}

fn validate_options(o: &RegistrationOptions) -> Result<()> {
    let ok = o.band_mm > 0.0
        && !o.levels.is_empty()
        && o.levels.iter().all(|&l| l >= 1)
        && o.max_samples > 0
        && o.tolerance >= 0.0
        && o.initial_step.0 > 0.0
        && o.initial_step.1 > 0.0;
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter(alloc::format!("bad registration options {o:?}")))
    }
}

/// Register `moving` onto `fixed`.
pub fn register_rigid(moving: &VoxelGrid, fixed: &VoxelGrid, options: &RegistrationOptions) -> Result<Registration> {
    if moving.is_empty() || fixed.is_empty() {
        return Err(Error::EmptyInput);
    }
    FixedImage::new(fixed, options.clone())?.register(moving)
}

/// `x ↦ Rδ(x[0..3]) · R0 · (p − c) + c + shift + x[3..6]`, angles in degrees.
fn compose_params(base: &Mat3, center: Vec3, shift: Vec3, x: &[f64; 6]) -> RigidTransform {
    let deg = core::f64::consts::PI / 180.0;
    let delta = math::rotation_zyx(x[0] * deg, x[1] * deg, x[2] * deg);
    let rotation = math::mat_mul(&delta, base);
    RigidTransform::about_center(&rotation, center, math::add(shift, [x[3], x[4], x[5]]))
}

/// Rotation taking the moving principal axes onto the fixed ones. Of the
/// four sign choices giving a proper rotation, the one closest to the
/// identity wins (images share a canonical head orientation up to moderate
/// misalignment).
fn principal_axes_rotation(fixed_axes: &Mat3, moving_axes: &Mat3) -> Mat3 {
    let mut best = math::IDENTITY3;
    let mut best_angle = f64::INFINITY;
    for signs in 0..8u32 {
        let s: Vec3 = core::array::from_fn(|a| if signs >> a & 1 == 1 { -1.0 } else { 1.0 });
        let mut fs = *fixed_axes;
        for row in fs.iter_mut() {
            for a in 0..3 {
                row[a] *= s[a];
            }
        }
        let r = math::mat_mul(&fs, &math::transpose(moving_axes));
        if math::det(&r) < 0.0 {
            continue;
        }
        let angle = math::rotation_angle(&r);
        if angle < best_angle {
            best_angle = angle;
            best = r;
        }
    }
    best
}

struct NelderMeadRun {
    best: [f64; 6],
    iterations: usize,
    converged: bool,
}

/// Minimize `f` from `x0` with an axis-aligned initial simplex of size `step`.
fn nelder_mead<F: Fn(&[f64; 6]) -> f64>(
    f: F,
    x0: [f64; 6],
    step: [f64; 6],
    max_iter: usize,
    tol: f64,
) -> NelderMeadRun {
    const N: usize = 6;
    let mut simplex: Vec<([f64; N], f64)> = Vec::with_capacity(N + 1);
    simplex.push((x0, f(&x0)));
    for i in 0..N {
        let mut x = x0;
        x[i] += step[i];
        simplex.push((x, f(&x)));
    }
    let order =
        |s: &mut Vec<([f64; N], f64)>| s.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(core::cmp::Ordering::Equal));
    order(&mut simplex);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        if simplex[N].1 - simplex[0].1 < tol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut centroid = [0.0; N];
        for (x, _) in &simplex[..N] {
            for d in 0..N {
                centroid[d] += x[d] / N as f64;
            }
        }
        let worst = simplex[N];
        let along = |t: f64| -> [f64; N] { core::array::from_fn(|d| centroid[d] + t * (worst.0[d] - centroid[d])) };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = f(&xe);
            simplex[N] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[N - 1].1 {
            simplex[N] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let x = along(-0.5);
                (x, f(&x))
            } else {
                let x = along(0.5);
                (x, f(&x))
            };
            if fc < worst.1.min(fr) {
                simplex[N] = (xc, fc);
            } else {
                let best = simplex[0].0;
                for v in simplex.iter_mut().skip(1) {
                    let x: [f64; N] = core::array::from_fn(|d| best[d] + 0.5 * (v.0[d] - best[d]));
                    *v = (x, f(&x));
                }
            }
        }
        order(&mut simplex);
    }
    if !converged && simplex[N].1 - simplex[0].1 < tol {
        converged = true;
    }
    NelderMeadRun { best: simplex[0].0, iterations, converged }
}
