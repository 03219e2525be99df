//! Deforming-phantom simulator: a textured heightfield with an internal
//! scalar volume, scripted rigid motion profiles, camera-frame rendering
//! with depth noise, occluder events, and simulated ultrasound slices.
//!
//! Everything is deterministic: surfaces regenerate bit-identically from a
//! seed, frames are pure functions of `(time, seed)`, and no call order or
//! thread scheduling leaks into the output. That makes whole experiment
//! runs replayable byte for byte.

pub mod motion;
pub mod occluder;
pub mod render;
pub mod surface;
pub mod ultrasound;

pub use motion::{motion_offset, Axis, FreeFormMotion, MotionProfile, SinusoidMotion};
pub use occluder::{OccluderEvent, OCCLUDER_COLOR, OCCLUDER_DEPTH_MM};
pub use render::{generate_frame, SceneFrame, SceneLabel, BACKGROUND_COLOR};
pub use surface::{PhantomConfig, PhantomSurface};
pub use ultrasound::{
    render_ultrasound_slice, UltrasoundSlice, CONTACT_SLACK_MM, SLICE_DIM, SLICE_EXTENT_MM,
};

use crate::camera::CameraIntrinsics;
use crate::se3::{RigidTransform, Rotation3};
use nalgebra::Vector3;

/// Camera pose over the phantom used throughout the experiments: the
/// tissue patch sits 150 mm below the camera, tilted 25 degrees off
/// frontal so the surface relief is visible, with the tissue +z axis
/// pointing back toward the camera.
pub fn default_mount() -> RigidTransform {
    RigidTransform::new(
        Rotation3::rot_x(155.0_f64.to_radians()),
        Vector3::new(0.0, 0.0, 150.0),
    )
}

/// A complete scripted scene: phantom, motion, occluders, and camera.
///
/// Bundles everything [`generate_frame`] needs so experiment code can ask
/// for frames by timestamp alone.
#[derive(Debug, Clone)]
pub struct Scene {
    pub surface: PhantomSurface,
    pub profile: MotionProfile,
    pub occluders: Vec<OccluderEvent>,
    pub camera: CameraIntrinsics,
    pub mount: RigidTransform,
    pub noise_sigma_mm: f64,
    pub seed: u64,
}

impl Scene {
    pub fn frame_at(&self, t_s: f64) -> SceneFrame {
        generate_frame(
            &self.surface,
            &self.profile,
            &self.occluders,
            &self.camera,
            &self.mount,
            self.noise_sigma_mm,
            t_s,
            self.seed,
        )
    }

    /// Tissue-to-camera pose at t = 0, the frame trackers initialize on.
    pub fn reference_pose(&self) -> RigidTransform {
        self.mount.compose(&motion_offset(&self.profile, 0.0))
    }

    /// Tissue-to-camera pose at time `t`.
    pub fn true_pose(&self, t_s: f64) -> RigidTransform {
        self.mount.compose(&motion_offset(&self.profile, t_s))
    }

    /// Camera-frame motion of the tissue since t = 0, the quantity a
    /// tracker initialized on the first frame estimates.
    pub fn true_motion(&self, t_s: f64) -> RigidTransform {
        self.true_pose(t_s).compose(&self.reference_pose().inverse())
    }
}
