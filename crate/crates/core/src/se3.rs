//! Rigid-body transforms on SE(3) and pose-error metrics.
//!
//! Everything downstream (tracking, servoing, simulation) moves points and
//! frames around with [`RigidTransform`]. Rotations are stored as plain 3x3
//! matrices; there is deliberately no Lie-algebra machinery here.

use std::fmt;

use nalgebra::{Matrix3, Matrix4, Vector3};

/// Tolerance used when validating that a matrix is a proper rotation.
pub const ROTATION_TOL: f64 = 1e-9;

/// Errors from constructing geometry types out of raw matrices.
#[derive(Debug, Clone, PartialEq)]
pub enum GeometryError {
    /// The matrix is not orthonormal within [`ROTATION_TOL`].
    NotOrthonormal { deviation: f64 },
    /// The matrix is orthonormal but has determinant -1 (a reflection).
    NotRightHanded { determinant: f64 },
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryError::NotOrthonormal { deviation } => {
                write!(f, "matrix is not orthonormal (max deviation {deviation:.3e})")
            }
            GeometryError::NotRightHanded { determinant } => {
                write!(f, "matrix is a reflection (determinant {determinant:.6})")
            }
        }
    }
}

impl std::error::Error for GeometryError {}

/// A proper rotation (orthonormal, determinant +1) in 3D.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation3 {
    m: Matrix3<f64>,
}

impl Rotation3 {
    pub fn identity() -> Self {
        Rotation3 { m: Matrix3::identity() }
    }

    /// Wraps a matrix after checking orthonormality and handedness.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        let deviation = (m.transpose() * m - Matrix3::identity()).abs().max();
        if deviation > ROTATION_TOL {
            return Err(GeometryError::NotOrthonormal { deviation });
        }
        let det = m.determinant();
        if det < 0.0 {
            return Err(GeometryError::NotRightHanded { determinant: det });
        }
        Ok(Rotation3 { m })
    }

    /// Wraps a matrix that is already known to be a proper rotation.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Rotation3 { m }
    }

    /// Builds a rotation from an (unnormalized) quaternion `(w, x, y, z)`.
    ///
    /// The quaternion is normalized internally; the zero quaternion is not a
    /// rotation and panics.
    pub fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Self {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        assert!(n > 0.0, "zero quaternion does not define a rotation");
        let (w, x, y, z) = (w / n, x / n, y / n, z / n);
        let m = Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        );
        Rotation3 { m }
    }

    pub fn from_axis_angle(axis: &Vector3<f64>, angle_rad: f64) -> Self {
        let a = axis.normalize();
        let (s, c) = (angle_rad / 2.0).sin_cos();
        Rotation3::from_quaternion(c, a.x * s, a.y * s, a.z * s)
    }

    pub fn rot_x(angle_rad: f64) -> Self {
        Rotation3::from_axis_angle(&Vector3::x(), angle_rad)
    }

    pub fn rot_y(angle_rad: f64) -> Self {
        Rotation3::from_axis_angle(&Vector3::y(), angle_rad)
    }

    pub fn rot_z(angle_rad: f64) -> Self {
        Rotation3::from_axis_angle(&Vector3::z(), angle_rad)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    /// Inverse rotation (the transpose).
    pub fn inverse(&self) -> Self {
        Rotation3 { m: self.m.transpose() }
    }

    /// Rotates a vector.
    pub fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.m * v
    }

    pub fn compose(&self, other: &Rotation3) -> Self {
        Rotation3 { m: self.m * other.m }
    }

    pub fn determinant(&self) -> f64 {
        self.m.determinant()
    }

    /// Geodesic angle to another rotation, in radians.
    pub fn angle_to(&self, other: &Rotation3) -> f64 {
        let c = ((self.m.transpose() * other.m).trace() - 1.0) / 2.0;
        c.clamp(-1.0, 1.0).acos()
    }

    /// Projects onto the nearest proper rotation via SVD.
    ///
    /// Long-running composition chains call this periodically to undo
    /// floating-point drift.
    pub fn orthonormalized(&self) -> Self {
        let svd = self.m.svd(true, true);
        let u = svd.u.expect("3x3 SVD always yields U");
        let v_t = svd.v_t.expect("3x3 SVD always yields V^T");
        let mut r = u * v_t;
        if r.determinant() < 0.0 {
            // Flip the axis of least significance so the result stays a
            // proper rotation rather than a reflection.
            let mut u = u;
            u.column_mut(2).scale_mut(-1.0);
            r = u * v_t;
        }
        Rotation3 { m: r }
    }
}

impl std::ops::Mul for Rotation3 {
    type Output = Rotation3;
    fn mul(self, rhs: Rotation3) -> Rotation3 {
        self.compose(&rhs)
    }
}

/// A rigid transform: rotation followed by translation, `p' = R p + t`.
///
/// Translations are in millimeters throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Rotation3,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform { rotation: Rotation3::identity(), translation: Vector3::zeros() }
    }

    pub fn new(rotation: Rotation3, translation: Vector3<f64>) -> Self {
        RigidTransform { rotation, translation }
    }

    pub fn from_rotation(rotation: Rotation3) -> Self {
        RigidTransform { rotation, translation: Vector3::zeros() }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        RigidTransform { rotation: Rotation3::identity(), translation }
    }

    /// Applies `other` first, then `self`, matching the homogeneous-matrix
    /// product `T_self * T_other`.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        RigidTransform {
            rotation: self.rotation.compose(&other.rotation),
            translation: self.rotation.apply(&other.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> Self {
        let r_inv = self.rotation.inverse();
        RigidTransform { rotation: r_inv, translation: -r_inv.apply(&self.translation) }
    }

    /// Maps a point: `R p + t`.
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.apply(p) + self.translation
    }

    /// The equivalent 4x4 homogeneous matrix.
    pub fn homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(self.rotation.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Re-orthonormalizes the rotation part.
    pub fn orthonormalized(&self) -> Self {
        RigidTransform { rotation: self.rotation.orthonormalized(), translation: self.translation }
    }

    /// Serializes as 12 numbers: the rotation in row-major order, then the
    /// translation.
    pub fn to_array(&self) -> [f64; 12] {
        let m = self.rotation.matrix();
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
            self.translation.x,
            self.translation.y,
            self.translation.z,
        ]
    }

    /// Inverse of [`RigidTransform::to_array`], validating the rotation.
    pub fn from_array(a: &[f64; 12]) -> Result<Self, GeometryError> {
        let m = Matrix3::new(a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7], a[8]);
        Ok(RigidTransform {
            rotation: Rotation3::from_matrix(m)?,
            translation: Vector3::new(a[9], a[10], a[11]),
        })
    }
}

impl std::ops::Mul for RigidTransform {
    type Output = RigidTransform;
    fn mul(self, rhs: RigidTransform) -> RigidTransform {
        self.compose(&rhs)
    }
}

/// Separation between two poses: straight-line translation distance and
/// geodesic rotation angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseError {
    pub translation_mm: f64,
    pub rotation_deg: f64,
}

/// Measures how far apart two poses are. Symmetric in its arguments.
pub fn pose_error(a: &RigidTransform, b: &RigidTransform) -> PoseError {
    PoseError {
        translation_mm: (a.translation - b.translation).norm(),
        rotation_deg: a.rotation.angle_to(&b.rotation).to_degrees(),
    }
}
