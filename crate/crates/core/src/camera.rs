//! Pinhole camera model for the rectified left camera.

use std::fmt;

use nalgebra::{Matrix3x4, Vector3};

use crate::se3::RigidTransform;

/// Points closer than this along the optical axis are treated as behind the
/// camera.
const MIN_DEPTH_MM: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum CameraError {
    InvalidIntrinsics(String),
    /// The point projects from behind the image plane.
    BehindCamera { depth_mm: f64 },
}

impl fmt::Display for CameraError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CameraError::InvalidIntrinsics(msg) => write!(f, "invalid intrinsics: {msg}"),
            CameraError::BehindCamera { depth_mm } => {
                write!(f, "point is behind the camera (depth {depth_mm:.3} mm)")
            }
        }
    }
}

impl std::error::Error for CameraError {}

/// Intrinsics of the rectified left camera. Distortion-free by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, CameraError> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(CameraError::InvalidIntrinsics(format!(
                "focal lengths must be positive, got ({fx}, {fy})"
            )));
        }
        if width == 0 || height == 0 {
            return Err(CameraError::InvalidIntrinsics(format!(
                "image dimensions must be nonzero, got {width}x{height}"
            )));
        }
        Ok(CameraIntrinsics { fx, fy, cx, cy, width, height })
    }

    /// The 3x4 projection matrix `[K | 0]`.
    pub fn projection_matrix(&self) -> Matrix3x4<f64> {
        Matrix3x4::new(
            self.fx, 0.0, self.cx, 0.0, //
            0.0, self.fy, self.cy, 0.0, //
            0.0, 0.0, 1.0, 0.0,
        )
    }

    pub fn contains_pixel(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u <= (self.width - 1) as f64 && v <= (self.height - 1) as f64
    }
}

/// Projects a camera-frame point through a rigid motion into pixel
/// coordinates: the moved point `M p` is divided by its depth and mapped by
/// the intrinsics.
pub fn project(
    k: &CameraIntrinsics,
    motion: &RigidTransform,
    p: &Vector3<f64>,
) -> Result<(f64, f64), CameraError> {
    let q = motion.apply(p);
    if q.z <= MIN_DEPTH_MM {
        return Err(CameraError::BehindCamera { depth_mm: q.z });
    }
    Ok((k.fx * q.x / q.z + k.cx, k.fy * q.y / q.z + k.cy))
}
