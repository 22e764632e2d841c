//! Rigid world-coordinate transforms (mm → mm).

use crate::math::{self, Mat3, Vec3};
use crate::{Error, Result};

/// Tolerance on orthonormality, determinant and last row.
pub const RIGID_TOLERANCE: f64 = 1e-6;

/// A proper rigid motion `x ↦ R x + t` stored as a 4×4 homogeneous matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "[[f64; 4]; 4]", into = "[[f64; 4]; 4]"))]
pub struct RigidTransform {
    matrix: [[f64; 4]; 4],
}

impl TryFrom<[[f64; 4]; 4]> for RigidTransform {
    type Error = Error;

    fn try_from(m: [[f64; 4]; 4]) -> Result<Self> {
        RigidTransform::from_matrix(m)
    }
}

impl From<RigidTransform> for [[f64; 4]; 4] {
    fn from(t: RigidTransform) -> Self {
        t.matrix
    }
}

impl Default for RigidTransform {
    fn default() -> Self {
        RigidTransform::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform::from_parts(&math::IDENTITY3, [0.0; 3])
    }

    /// Trusted constructor; `rotation` must already be a proper rotation.
    pub fn from_parts(rotation: &Mat3, translation: Vec3) -> Self {
        let mut matrix = [[0.0; 4]; 4];
        for i in 0..3 {
            matrix[i][..3].copy_from_slice(&rotation[i]);
            matrix[i][3] = translation[i];
        }
        matrix[3][3] = 1.0;
        RigidTransform { matrix }
    }

    /// Validates the rigid-body invariants before accepting `m`.
    pub fn from_matrix(m: [[f64; 4]; 4]) -> Result<Self> {
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NotRigid);
        }
        if m[3] != [0.0, 0.0, 0.0, 1.0]
            && (0..4).any(|j| math::abs(m[3][j] - [0.0, 0.0, 0.0, 1.0][j]) > RIGID_TOLERANCE)
        {
            return Err(Error::NotRigid);
        }
        let r: Mat3 = core::array::from_fn(|i| [m[i][0], m[i][1], m[i][2]]);
        let rrt = math::mat_mul(&r, &math::transpose(&r));
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { 0.0 };
                if math::abs(rrt[i][j] - expected) > RIGID_TOLERANCE {
                    return Err(Error::NotRigid);
                }
            }
        }
        if math::abs(math::det(&r) - 1.0) > RIGID_TOLERANCE {
            return Err(Error::NotRigid);
        }
        let mut matrix = m;
        matrix[3] = [0.0, 0.0, 0.0, 1.0];
        Ok(RigidTransform { matrix })
    }

    /// Intrinsic z-y-x Euler angles (radians) followed by a translation:
    /// `x ↦ Rz(yaw) Ry(pitch) Rx(roll) x + t`.
    pub fn from_euler_zyx(yaw: f64, pitch: f64, roll: f64, translation: Vec3) -> Self {
        RigidTransform::from_parts(&math::rotation_zyx(yaw, pitch, roll), translation)
    }

    /// Rotation by `rotation` about `center`, then translation by `shift`.
    pub fn about_center(rotation: &Mat3, center: Vec3, shift: Vec3) -> Self {
        let rc = math::mat_vec(rotation, center);
        RigidTransform::from_parts(rotation, math::add(math::sub(center, rc), shift))
    }

    pub fn matrix(&self) -> &[[f64; 4]; 4] {
        &self.matrix
    }

    pub fn rotation(&self) -> Mat3 {
        core::array::from_fn(|i| [self.matrix[i][0], self.matrix[i][1], self.matrix[i][2]])
    }

    pub fn translation(&self) -> Vec3 {
        [self.matrix[0][3], self.matrix[1][3], self.matrix[2][3]]
    }

    #[inline]
    pub fn apply(&self, p: Vec3) -> Vec3 {
        let m = &self.matrix;
        [
            m[0][0] * p[0] + m[0][1] * p[1] + m[0][2] * p[2] + m[0][3],
            m[1][0] * p[0] + m[1][1] * p[1] + m[1][2] * p[2] + m[1][3],
            m[2][0] * p[0] + m[2][1] * p[1] + m[2][2] * p[2] + m[2][3],
        ]
    }

    /// Exact inverse `x ↦ Rᵀ (x − t)`.
    pub fn inverse(&self) -> Self {
        let rt = math::transpose(&self.rotation());
        let t = math::mat_vec(&rt, self.translation());
        RigidTransform::from_parts(&rt, math::scale(t, -1.0))
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        let mut matrix = [[0.0; 4]; 4];
        for (i, row) in matrix.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..4).map(|k| self.matrix[i][k] * other.matrix[k][j]).sum();
            }
        }
        RigidTransform { matrix }
    }

    /// Angle (radians) of the relative rotation between two transforms.
    pub fn rotation_difference(&self, other: &RigidTransform) -> f64 {
        let rel = math::mat_mul(&self.rotation(), &math::transpose(&other.rotation()));
        math::rotation_angle(&rel)
    }

    /// Largest absolute entry-wise difference.
    pub fn max_abs_diff(&self, other: &RigidTransform) -> f64 {
        self.matrix
            .iter()
            .flatten()
            .zip(other.matrix.iter().flatten())
            .map(|(a, b)| math::abs(a - b))
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_checks() {
        let t = RigidTransform::identity();
        assert_eq!(t.apply([1.0, 2.0, 3.0]), [1.0, 2.0, 3.0]);
        assert_eq!(t.inverse(), t);
    }

    #[test]
    fn rejects_non_rigid() {
        let mut m = *RigidTransform::identity().matrix();
        m[0][0] = 2.0;
        assert_eq!(RigidTransform::from_matrix(m), Err(Error::NotRigid));
        let mut reflect = *RigidTransform::identity().matrix();
        reflect[0][0] = -1.0;
        assert_eq!(RigidTransform::from_matrix(reflect), Err(Error::NotRigid));
        let mut row = *RigidTransform::identity().matrix();
        row[3][0] = 0.5;
        assert_eq!(RigidTransform::from_matrix(row), Err(Error::NotRigid));
    }

    #[test]
    fn about_center_fixes_center() {
        let r = math::rotation_zyx(0.3, 0.1, -0.2);
        let c = [10.0, -4.0, 7.0];
        let t = RigidTransform::about_center(&r, c, [0.0; 3]);
        let out = t.apply(c);
        for a in 0..3 {
            assert!(math::abs(out[a] - c[a]) < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn inverse_properties(y in -3.0f64..3.0, p in -1.5f64..1.5, r in -3.0f64..3.0,
                              tx in -100.0f64..100.0, ty in -100.0f64..100.0, tz in -100.0f64..100.0) {
            let t = RigidTransform::from_euler_zyx(y, p, r, [tx, ty, tz]);
            prop_assert!(RigidTransform::from_matrix(*t.matrix()).is_ok());
            prop_assert!(t.inverse().inverse().max_abs_diff(&t) < 1e-9);
            prop_assert!(t.compose(&t.inverse()).max_abs_diff(&RigidTransform::identity()) < 1e-6);
            let q = [1.0, -2.0, 3.5];
            let back = t.inverse().apply(t.apply(q));
            for a in 0..3 { prop_assert!(math::abs(back[a] - q[a]) < 1e-9); }
        }
    }
}
