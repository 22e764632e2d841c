//! Virtual craniectomy: remove a randomly placed, randomly sized bone flap
//! from a full skull to produce `(full, defected, defect)` training triplets.
//!
//! Three template families are available: solid spheres, solid cubes and
//! the "challenge" shape, a cube unioned with two vertical cylinders running
//! along two of its vertical edges. Cylinder axes are always parallel to z,
//! i.e. perpendicular to the axial planes.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::geometry::Geometry;
use crate::math::{self, Vec3};
use crate::rng::rng_from_seed;
use crate::volume::VoxelGrid;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum TemplateKind {
    Sphere,
    Cube,
    Challenge,
}

impl TemplateKind {
    pub const ALL: [TemplateKind; 3] = [TemplateKind::Sphere, TemplateKind::Cube, TemplateKind::Challenge];

    pub fn name(self) -> &'static str {
        match self {
            TemplateKind::Sphere => "sphere",
            TemplateKind::Cube => "cube",
            TemplateKind::Challenge => "challenge",
        }
    }
}

impl core::str::FromStr for TemplateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TemplateKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown template kind `{s}`")))
    }
}

/// Template geometry. Sizes are in mm.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "lowercase"))]
pub enum TemplateShape {
    Sphere { radius_mm: f64 },
    Cube { edge_mm: f64 },
    Challenge { edge_mm: f64, cylinder_radius_mm: f64 },
}

impl TemplateShape {
    pub fn kind(&self) -> TemplateKind {
        match self {
            TemplateShape::Sphere { .. } => TemplateKind::Sphere,
            TemplateShape::Cube { .. } => TemplateKind::Cube,
            TemplateShape::Challenge { .. } => TemplateKind::Challenge,
        }
    }

    /// Radius of a sphere about the template centre that contains it.
    fn bounding_radius(&self) -> f64 {
        match *self {
            TemplateShape::Sphere { radius_mm } => radius_mm,
            TemplateShape::Cube { edge_mm } => edge_mm * 0.5 * math::sqrt(3.0),
            TemplateShape::Challenge { edge_mm, cylinder_radius_mm } => {
                let h = edge_mm / 2.0;
                math::sqrt(2.0 * h * h + h * h) + cylinder_radius_mm
            }
        }
    }
}

/// One simulated defect.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CraniectomySpec {
    pub template: TemplateShape,
    pub center_world: Vec3,
    /// Rotation about z (radians) of the cube-based templates.
    pub orientation_rad: f64,
    pub seed: u64,
}

impl CraniectomySpec {
    pub fn validate(&self) -> Result<()> {
        let sizes: Vec<f64> = match self.template {
            TemplateShape::Sphere { radius_mm } => vec![radius_mm],
            TemplateShape::Cube { edge_mm } => vec![edge_mm],
            TemplateShape::Challenge { edge_mm, cylinder_radius_mm } => vec![edge_mm, cylinder_radius_mm],
        };
        if sizes.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidParameter(format!("template sizes must be > 0: {:?}", self.template)));
        }
        if self.center_world.iter().chain([&self.orientation_rad]).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("template placement must be finite".into()));
        }
        Ok(())
    }

    /// Membership of a world point in the solid template.
    pub fn contains(&self, p: Vec3) -> bool {
        let d = math::sub(p, self.center_world);
        match self.template {
            TemplateShape::Sphere { radius_mm } => math::dot(d, d) <= radius_mm * radius_mm,
            TemplateShape::Cube { edge_mm } => in_cube(self.local(d), edge_mm / 2.0),
            TemplateShape::Challenge { edge_mm, cylinder_radius_mm } => {
                let q = self.local(d);
                let h = edge_mm / 2.0;
                if in_cube(q, h) {
                    return true;
                }
                if q[2] < -h || q[2] >= h {
                    return false;
                }
                let r2 = cylinder_radius_mm * cylinder_radius_mm;
                [h, -h].iter().any(|&ey| {
                    let dx = q[0] - h;
                    let dy = q[1] - ey;
                    dx * dx + dy * dy <= r2
                })
            }
        }
    }

    /// Template-local coordinates: undo the rotation about z.
    fn local(&self, d: Vec3) -> Vec3 {
        let (s, c) = math::sin_cos(self.orientation_rad);
        [c * d[0] + s * d[1], -s * d[0] + c * d[1], d[2]]
    }
}

/// Half-open so an edge of `n` voxels centred on a voxel centre hits exactly
/// `n` centres per axis.
fn in_cube(q: Vec3, h: f64) -> bool {
    q.iter().all(|&x| x >= -h && x < h)
}

/// Rasterize the solid template onto `geometry` by voxel-centre membership.
pub fn make_template(spec: &CraniectomySpec, geometry: &Geometry) -> Result<VoxelGrid> {
    spec.validate()?;
    let radius = spec.template.bounding_radius();
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for a in 0..3 {
        let c0 = (spec.center_world[a] - radius - geometry.origin[a]) / geometry.spacing[a];
        let c1 = (spec.center_world[a] + radius - geometry.origin[a]) / geometry.spacing[a];
        let last = (geometry.dims[a] - 1) as f64;
        if c1 < 0.0 || c0 > last {
            return Err(Error::OutOfBounds);
        }
        lo[a] = math::floor(c0).max(0.0) as usize;
        hi[a] = math::ceil(c1).min(last) as usize;
    }
    let mut out = VoxelGrid::empty(*geometry);
    for k in lo[2]..=hi[2] {
        for j in lo[1]..=hi[1] {
            for i in lo[0]..=hi[0] {
                if spec.contains(geometry.world([i, j, k])) {
                    out.set(i, j, k, true);
                }
            }
        }
    }
    Ok(out)
}

/// Sampling ranges and mixture for [`sample_spec`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CraniectomyConfig {
    /// Relative weights of sphere, cube and challenge templates.
    pub template_mix: [f64; 3],
    pub sphere_radius_mm: (f64, f64),
    pub cube_edge_mm: (f64, f64),
    /// Cylinder radius as a fraction of the cube edge.
    pub cylinder_ratio: f64,
    /// Centres are drawn from surface voxels above this quantile of skull z.
    pub upper_quantile: f64,
}

impl Default for CraniectomyConfig {
    fn default() -> Self {
        CraniectomyConfig {
            template_mix: [1.0, 1.0, 1.0],
            sphere_radius_mm: (10.0, 40.0),
            cube_edge_mm: (20.0, 60.0),
            cylinder_ratio: 0.5,
            upper_quantile: 0.6,
        }
    }
}

impl CraniectomyConfig {
    /// Configuration that always draws `kind`.
    pub fn only(kind: TemplateKind) -> Self {
        let mut mix = [0.0; 3];
        mix[TemplateKind::ALL.iter().position(|&k| k == kind).unwrap_or(0)] = 1.0;
        CraniectomyConfig { template_mix: mix, ..CraniectomyConfig::default() }
    }

    fn validate(&self) -> Result<()> {
        let total: f64 = self.template_mix.iter().sum();
        if self.template_mix.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) || !(total > 0.0) {
            return Err(Error::InvalidParameter(format!("bad template mix {:?}", self.template_mix)));
        }
        for (name, (lo, hi)) in [("sphere radius", self.sphere_radius_mm), ("cube edge", self.cube_edge_mm)] {
            if !(lo > 0.0) || !(hi >= lo) || !hi.is_finite() {
                return Err(Error::InvalidParameter(format!("bad {name} range ({lo}, {hi})")));
            }
        }
        if !(self.cylinder_ratio > 0.0) || !(0.0..1.0).contains(&self.upper_quantile) {
            return Err(Error::InvalidParameter("bad cylinder ratio or upper quantile".into()));
        }
        Ok(())
    }
}

/// Surface voxels of `full` whose z lies strictly above the
/// `quantile`-quantile (nearest rank) of z over all skull voxels.
pub fn upper_surface(full: &VoxelGrid, quantile: f64) -> VoxelGrid {
    let g = full.geometry();
    let nz = g.dims[2];
    let slab = g.dims[0] * g.dims[1];
    let mut per_slice = vec![0usize; nz];
    for lin in full.iter_on() {
        per_slice[lin / slab] += 1;
    }
    let total: usize = per_slice.iter().sum();
    let mut out = VoxelGrid::empty(*g);
    if total == 0 {
        return out;
    }
    let rank = (math::ceil(quantile * total as f64) as usize).clamp(1, total);
    let mut seen = 0;
    let mut cut_slice = 0;
    for (k, &c) in per_slice.iter().enumerate() {
        seen += c;
        if seen >= rank {
            cut_slice = k;
            break;
        }
    }
    for lin in full.surface().iter_on() {
        if lin / slab > cut_slice {
            out.set_linear(lin, true);
        }
    }
    out
}

fn uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Draw a random craniectomy for `full` from the stream seeded by `seed`.
pub fn sample_spec(full: &VoxelGrid, seed: u64, config: &CraniectomyConfig) -> Result<CraniectomySpec> {
    config.validate()?;
    let centroid = full.centroid().ok_or(Error::EmptyMask)?;
    let candidates: Vec<usize> = upper_surface(full, config.upper_quantile).iter_on().collect();
    if candidates.is_empty() {
        return Err(Error::NoUpperSurface);
    }
    let mut rng = rng_from_seed(seed);

    let total: f64 = config.template_mix.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut kind = TemplateKind::Challenge;
    for (k, &w) in TemplateKind::ALL.iter().zip(&config.template_mix) {
        if w > 0.0 && u < w {
            kind = *k;
            break;
        }
        u -= w;
    }
    // guard against rounding past the last positive weight
    if config.template_mix[2] == 0.0 && kind == TemplateKind::Challenge {
        kind = if config.template_mix[1] > 0.0 { TemplateKind::Cube } else { TemplateKind::Sphere };
    }

    let pick = candidates[rng.random_range(0..candidates.len())];
    let g = full.geometry();
    let center_world = g.world(g.coords(pick));

    let (template, orientation_rad) = match kind {
        TemplateKind::Sphere => (TemplateShape::Sphere { radius_mm: uniform(&mut rng, config.sphere_radius_mm) }, 0.0),
        TemplateKind::Cube => (TemplateShape::Cube { edge_mm: uniform(&mut rng, config.cube_edge_mm) }, 0.0),
        TemplateKind::Challenge => {
            let edge_mm = uniform(&mut rng, config.cube_edge_mm);
            // local +x faces away from the skull centroid, so the cylinders
            // sit on the two outer vertical edges
            let outward = math::atan2(center_world[1] - centroid[1], center_world[0] - centroid[0]);
            (TemplateShape::Challenge { edge_mm, cylinder_radius_mm: edge_mm * config.cylinder_ratio }, outward)
        }
    };
    Ok(CraniectomySpec { template, center_world, orientation_rad, seed })
}

/// Where a triplet came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Provenance {
    Simulated(CraniectomySpec),
    /// Pre-defected case supplied with the dataset; no template was applied.
    Provided,
}

/// `(X_full, X_defected, Y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseTriplet {
    pub full: VoxelGrid,
    pub defected: VoxelGrid,
    pub defect: VoxelGrid,
    pub provenance: Provenance,
    pub noise_applied: bool,
}

impl CaseTriplet {
    /// Wrap a dataset-provided triplet after checking the partition.
    pub fn provided(full: VoxelGrid, defected: VoxelGrid, defect: VoxelGrid) -> Result<Self> {
        let triplet = CaseTriplet { full, defected, defect, provenance: Provenance::Provided, noise_applied: false };
        if !triplet.partition_holds()? {
            return Err(Error::InvalidParameter("defected and defect do not partition the full skull".into()));
        }
        if triplet.defect.is_empty() {
            return Err(Error::EmptyDefect);
        }
        Ok(triplet)
    }

    /// `defected ∪ defect = full` and `defected ∩ defect = ∅`, voxelwise.
    pub fn partition_holds(&self) -> Result<bool> {
        let joined = self.defected.union(&self.defect)?;
        Ok(joined == self.full && self.defected.intersection_count(&self.defect)? == 0)
    }

    /// Replace the model input with a salt-and-pepper corrupted copy. The
    /// ground-truth defect is never touched.
    pub fn with_input_noise(mut self, p: f64, seed: u64) -> Result<Self> {
        self.defected = salt_pepper(&self.defected, p, seed)?;
        self.noise_applied = p > 0.0;
        Ok(self)
    }
}

/// Remove the template from `full`: `defect = full ∩ T`, `defected = full ∖ T`.
pub fn apply_craniectomy(full: &VoxelGrid, spec: &CraniectomySpec) -> Result<CaseTriplet> {
    if full.is_empty() {
        return Err(Error::EmptyMask);
    }
    let template = make_template(spec, full.geometry())?;
    let defect = full.intersect(&template)?;
    if defect.is_empty() {
        return Err(Error::EmptyDefect);
    }
    let defected = full.subtract(&template)?;
    Ok(CaseTriplet {
        full: full.clone(),
        defected,
        defect,
        provenance: Provenance::Simulated(*spec),
        noise_applied: false,
    })
}

/// Flip every voxel independently with probability `p`.
pub fn salt_pepper(m: &VoxelGrid, p: f64, seed: u64) -> Result<VoxelGrid> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("flip probability must be in [0, 1], got {p}")));
    }
    if p == 0.0 {
        return Ok(m.clone());
    }
    let mut rng = rng_from_seed(seed);
    let mut out = m.clone();
    for lin in 0..m.len() {
        if rng.random::<f64>() < p {
            out.set_linear(lin, !m.get_linear(lin));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::{fitting_geometry, generate_phantom, PhantomSpec};

    fn small_skull() -> VoxelGrid {
        let spec = PhantomSpec { outer_semiaxes: [30.0, 36.0, 28.0], thickness: 4.0, ..PhantomSpec::default() };
        let g = fitting_geometry(&spec, [1.0; 3], 4.0).unwrap();
        generate_phantom(&spec, &g).unwrap()
    }

    #[test]
    fn sphere_volume_is_close_to_analytic() {
        let g = Geometry::centered_at([31, 31, 31], [1.0; 3], [0.0; 3]).unwrap();
        let spec = CraniectomySpec {
            template: TemplateShape::Sphere { radius_mm: 10.0 },
            center_world: [0.0; 3],
            orientation_rad: 0.0,
            seed: 0,
        };
        let n = make_template(&spec, &g).unwrap().count_on() as f64;
        let analytic = 4.0 / 3.0 * core::f64::consts::PI * 1000.0;
        assert!(math::abs(n - analytic) / analytic < 0.03, "{n} vs {analytic}");
    }

    #[test]
    fn axis_aligned_cube_counts_exactly() {
        let g = Geometry::centered_at([41, 41, 41], [1.0; 3], [0.0; 3]).unwrap();
        let spec = CraniectomySpec {
            template: TemplateShape::Cube { edge_mm: 20.0 },
            center_world: [0.0; 3],
            orientation_rad: 0.0,
            seed: 0,
        };
        assert_eq!(make_template(&spec, &g).unwrap().count_on(), 8000);
    }

    #[test]
    fn challenge_contains_its_cube() {
        let g = Geometry::centered_at([61, 61, 41], [1.0; 3], [0.0; 3]).unwrap();
        for theta in [0.0, 0.4, 2.0] {
            let challenge = CraniectomySpec {
                template: TemplateShape::Challenge { edge_mm: 20.0, cylinder_radius_mm: 10.0 },
                center_world: [0.5, -1.0, 0.0],
                orientation_rad: theta,
                seed: 0,
            };
            let cube = CraniectomySpec { template: TemplateShape::Cube { edge_mm: 20.0 }, ..challenge };
            let c = make_template(&challenge, &g).unwrap();
            let k = make_template(&cube, &g).unwrap();
            assert!(k.is_subset_of(&c));
            assert!(c.count_on() > k.count_on());
        }
    }

    #[test]
    fn template_outside_grid() {
        let g = Geometry::centered_at([11, 11, 11], [1.0; 3], [0.0; 3]).unwrap();
        let spec = CraniectomySpec {
            template: TemplateShape::Sphere { radius_mm: 3.0 },
            center_world: [100.0, 0.0, 0.0],
            orientation_rad: 0.0,
            seed: 0,
        };
        assert_eq!(make_template(&spec, &g), Err(Error::OutOfBounds));
        let bad = CraniectomySpec { template: TemplateShape::Sphere { radius_mm: -1.0 }, ..spec };
        assert!(make_template(&bad, &g).is_err());
    }

    #[test]
    fn partition_and_determinism() {
        let full = small_skull();
        for seed in 0..10 {
            let spec = sample_spec(&full, seed, &CraniectomyConfig::default()).unwrap();
            let t = match apply_craniectomy(&full, &spec) {
                Ok(t) => t,
                Err(Error::EmptyDefect) => continue,
                Err(e) => panic!("{e}"),
            };
            assert!(t.partition_holds().unwrap());
            assert_eq!(t.defected.count_on() + t.defect.count_on(), full.count_on());
            assert_eq!(apply_craniectomy(&full, &spec).unwrap(), t);
        }
    }

    #[test]
    fn covering_template_takes_everything() {
        let full = small_skull();
        let spec = CraniectomySpec {
            template: TemplateShape::Sphere { radius_mm: 500.0 },
            center_world: [0.0; 3],
            orientation_rad: 0.0,
            seed: 0,
        };
        let t = apply_craniectomy(&full, &spec).unwrap();
        assert!(t.defected.is_empty());
        assert_eq!(t.defect, full);
    }

    #[test]
    fn missing_the_skull_is_an_error() {
        let full = small_skull();
        let spec = CraniectomySpec {
            template: TemplateShape::Sphere { radius_mm: 5.0 },
            center_world: [0.0, 0.0, 0.0],
            orientation_rad: 0.0,
            seed: 0,
        };
        assert_eq!(apply_craniectomy(&full, &spec), Err(Error::EmptyDefect));
    }

    #[test]
    fn degenerate_mix_and_surface_centres() {
        let full = small_skull();
        let surface = full.surface();
        let cfg = CraniectomyConfig::only(TemplateKind::Sphere);
        for seed in 0..20 {
            let spec = sample_spec(&full, seed, &cfg).unwrap();
            assert_eq!(spec.template.kind(), TemplateKind::Sphere);
            let idx = full.geometry().index(spec.center_world).unwrap();
            assert!(surface.get(idx[0], idx[1], idx[2]));
        }
    }

    #[test]
    fn no_upper_surface() {
        let g = Geometry::centered_at([5, 5, 5], [1.0; 3], [0.0; 3]).unwrap();
        // a single slab has no voxel above its own z quantile
        let slab = VoxelGrid::from_fn(g, |[_, _, k]| k == 2);
        assert_eq!(sample_spec(&slab, 0, &CraniectomyConfig::default()), Err(Error::NoUpperSurface));
    }

    #[test]
    fn salt_pepper_extremes() {
        let full = small_skull();
        assert_eq!(salt_pepper(&full, 0.0, 3).unwrap(), full);
        assert_eq!(salt_pepper(&full, 1.0, 3).unwrap(), full.complement());
        assert_eq!(salt_pepper(&full, 0.3, 3).unwrap(), salt_pepper(&full, 0.3, 3).unwrap());
        assert!(salt_pepper(&full, 1.5, 3).is_err());
    }

    #[test]
    fn noise_never_touches_the_defect() {
        let full = small_skull();
        let spec = sample_spec(&full, 11, &CraniectomyConfig::only(TemplateKind::Cube)).unwrap();
        let clean = apply_craniectomy(&full, &spec).unwrap();
        let noisy = clean.clone().with_input_noise(0.05, 9).unwrap();
        assert_eq!(noisy.defect, clean.defect);
        assert!(noisy.noise_applied);
        assert_ne!(noisy.defected, clean.defected);
    }
}
