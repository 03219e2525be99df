//! Rigid tissue tracking from color + organized depth frames.
//!
//! [`TissueTracker`] maintains a set of small textured windows (ROIs) on the
//! tissue surface and recovers the rigid motion of the tissue relative to
//! the first frame. Each step runs five stages:
//!
//! 1. segment tissue by color,
//! 2. advance every ROI by patch correlation against the previous frame,
//! 3. stop ROIs that left the tissue or no longer look like their reference
//!    patch (occlusion),
//! 4. estimate the rigid motion of the ROI centers' 3D points robustly,
//! 5. re-acquire stopped ROIs where the current pose predicts them.
//!
//! The estimate maps first-frame camera coordinates onto current-frame
//! camera coordinates, so downstream consumers can re-anchor any point
//! recorded at initialization time.

mod appearance;
mod features;
mod matching;
mod registration;
mod segment;

pub use appearance::{
    appearance_matches, bhattacharyya, describe_patch, signature_similarity,
    AppearanceDescriptor, HISTOGRAM_BINS, SIGNATURE_BINS,
};
pub use features::init_rois;
pub use matching::{extract_patch, match_patch, track_rois, zero_mean_ncc, PatchMatch};
pub use registration::{
    alignment_residual, estimate_pose_ransac, kabsch_fit, RegistrationError, TissuePoseEstimate,
};
pub use segment::{segment_tissue, HsvRange, SegmentationMask};

use std::fmt;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::camera::{project, CameraIntrinsics};
use crate::cloud::OrganizedPointCloud;
use crate::grid::{to_gray, ColorImage, GrayImage};
use crate::se3::RigidTransform;

#[derive(Debug, Clone, PartialEq)]
pub enum TrackerError {
    InvalidConfig(String),
    /// Fewer trackable windows were found than requested.
    InsufficientTexture { found: usize, needed: usize },
}

impl fmt::Display for TrackerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrackerError::InvalidConfig(msg) => write!(f, "invalid tracker config: {msg}"),
            TrackerError::InsufficientTexture { found, needed } => {
                write!(f, "only {found} of {needed} requested ROIs found enough texture")
            }
        }
    }
}

impl std::error::Error for TrackerError {}

/// Axis-aligned tracking window. `u`/`v` is the subpixel top-left corner;
/// width and height stay fixed for the life of the ROI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoiRect {
    pub u: f64,
    pub v: f64,
    pub width: u32,
    pub height: u32,
}

impl RoiRect {
    pub fn center(&self) -> (f64, f64) {
        (self.u + self.width as f64 / 2.0, self.v + self.height as f64 / 2.0)
    }

    pub fn top_left_rounded(&self) -> (i64, i64) {
        (self.u.round() as i64, self.v.round() as i64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoiState {
    Tracking,
    /// Lost to occlusion or a failed match; kept for re-acquisition.
    Stopped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Roi {
    pub id: u32,
    pub rect: RoiRect,
    pub state: RoiState,
    /// Appearance captured at initialization, used to detect occlusion and
    /// to confirm re-acquisition.
    pub reference_appearance: AppearanceDescriptor,
    /// Camera-frame position of the window center in the first frame (mm).
    pub reference_point: Vector3<f64>,
    /// Camera-frame position of the window center now; `None` while stopped
    /// or when the depth under the center is invalid.
    pub current_point: Option<Vector3<f64>>,
}

impl Roi {
    pub fn stop(&mut self) {
        self.state = RoiState::Stopped;
        self.current_point = None;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub roi_count: usize,
    pub roi_width: u32,
    pub roi_height: u32,
    /// Patch search radius per axis, in pixels, between consecutive frames.
    pub search_window_px: u32,
    /// Minimum correlation score for a match to count; below it the ROI
    /// stops.
    pub track_score_floor: f64,
    /// Minimum structure-tensor score for a window to be considered
    /// trackable at initialization.
    pub min_corner_score: f64,
    /// Minimum fraction of ROI pixels classified as tissue.
    pub occlusion_tissue_fraction: f64,
    /// Minimum intensity-histogram similarity to the reference appearance.
    pub appearance_match_threshold: f64,
    /// Minimum gradient-signature similarity to the reference appearance.
    pub signature_gate: f64,
    pub ransac_iterations: usize,
    pub ransac_inlier_threshold_mm: f64,
    pub tissue_color: HsvRange,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            roi_count: 12,
            roi_width: 20,
            roi_height: 25,
            search_window_px: 15,
            track_score_floor: 0.5,
            min_corner_score: 1e-5,
            occlusion_tissue_fraction: 0.6,
            appearance_match_threshold: 0.8,
            signature_gate: 0.7,
            ransac_iterations: 100,
            ransac_inlier_threshold_mm: 1.5,
            tissue_color: HsvRange {
                hue_deg: (2.0, 32.0),
                saturation: (0.30, 0.85),
                value: (0.10, 0.95),
            },
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), TrackerError> {
        let fail = |msg: &str| Err(TrackerError::InvalidConfig(msg.to_string()));
        if self.roi_count < 3 {
            return fail("roi_count must be at least 3 to constrain a rigid motion");
        }
        if self.roi_width < 4 || self.roi_height < 4 {
            return fail("ROI windows must be at least 4x4");
        }
        if self.search_window_px == 0 {
            return fail("search_window_px must be positive");
        }
        if !(0.0..=1.0).contains(&self.occlusion_tissue_fraction) {
            return fail("occlusion_tissue_fraction must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.appearance_match_threshold)
            || !(-1.0..=1.0).contains(&self.signature_gate)
        {
            return fail("appearance thresholds must lie in their score ranges");
        }
        if self.ransac_iterations == 0 {
            return fail("ransac_iterations must be positive");
        }
        if self.ransac_inlier_threshold_mm <= 0.0 {
            return fail("ransac_inlier_threshold_mm must be positive");
        }
        Ok(())
    }
}

/// RNG that drives the pose consensus of frame `frame_index` for a tracker
/// seeded with `seed`. The stream depends only on these two values, so a
/// frame's estimate can be recomputed in isolation.
pub fn pose_rng(seed: u64, frame_index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ frame_index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// True when the ROI should stop: its window slid off the segmented tissue
/// or its current patch no longer matches the reference appearance.
pub fn check_occlusion(
    roi: &Roi,
    mask: &SegmentationMask,
    gray: &GrayImage,
    config: &TrackerConfig,
) -> bool {
    if mask.tissue_fraction(&roi.rect) < config.occlusion_tissue_fraction {
        return true;
    }
    match describe_patch(gray, &roi.rect) {
        Some(current) => !appearance_matches(
            &current,
            &roi.reference_appearance,
            config.appearance_match_threshold,
            config.signature_gate,
        ),
        None => true,
    }
}

/// Attempts to resume every stopped ROI at the pixel where the current pose
/// estimate predicts its reference point. A stopped ROI resumes only when
/// the predicted window is on tissue, inside the image, and looks like the
/// reference patch again.
pub fn reinitialize_rois(
    rois: &mut [Roi],
    estimate: &RigidTransform,
    gray: &GrayImage,
    mask: &SegmentationMask,
    cloud: &OrganizedPointCloud,
    camera: &CameraIntrinsics,
    config: &TrackerConfig,
) {
    for roi in rois.iter_mut().filter(|r| r.state == RoiState::Stopped) {
        let (u, v) = match project(camera, estimate, &roi.reference_point) {
            Ok(px) => px,
            Err(_) => continue,
        };
        let rect = RoiRect {
            u: u - roi.rect.width as f64 / 2.0,
            v: v - roi.rect.height as f64 / 2.0,
            width: roi.rect.width,
            height: roi.rect.height,
        };
        if mask.tissue_fraction(&rect) < config.occlusion_tissue_fraction {
            continue;
        }
        let candidate = match describe_patch(gray, &rect) {
            Some(d) => d,
            None => continue,
        };
        if !appearance_matches(
            &candidate,
            &roi.reference_appearance,
            config.appearance_match_threshold,
            config.signature_gate,
        ) {
            continue;
        }
        roi.rect = rect;
        roi.state = RoiState::Tracking;
        let (cu, cv) = rect.center();
        roi.current_point = cloud.point_at_pixel(cu, cv).ok();
    }
}

/// Output of one tracker step. `estimate` is the latest successful pose;
/// `stale` marks steps where no fresh consensus was reached and the
/// previous estimate was carried forward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerStep {
    pub estimate: TissuePoseEstimate,
    pub stale: bool,
}

pub struct TissueTracker {
    config: TrackerConfig,
    camera: CameraIntrinsics,
    rois: Vec<Roi>,
    prev_gray: GrayImage,
    last_estimate: TissuePoseEstimate,
    frame_index: u64,
    seed: u64,
}

impl TissueTracker {
    /// Initializes ROIs on the first frame. The tracker's pose estimates are
    /// expressed relative to this frame.
    pub fn init(
        image: &ColorImage,
        cloud: &OrganizedPointCloud,
        camera: CameraIntrinsics,
        config: TrackerConfig,
        seed: u64,
    ) -> Result<Self, TrackerError> {
        config.validate()?;
        assert_eq!(
            (image.width(), image.height()),
            (cloud.width(), cloud.height()),
            "image and cloud dimensions must match"
        );
        let gray = to_gray(image);
        let mask = segment_tissue(image, &config.tissue_color);
        let rois = init_rois(&gray, &mask, cloud, &config)?;
        let roi_count = rois.len();
        Ok(TissueTracker {
            config,
            camera,
            rois,
            prev_gray: gray,
            last_estimate: TissuePoseEstimate {
                transform: RigidTransform::identity(),
                inlier_count: roi_count,
                mean_inlier_residual_mm: 0.0,
            },
            frame_index: 0,
            seed,
        })
    }

    /// Processes the next frame and returns the current pose estimate.
    pub fn step(&mut self, image: &ColorImage, cloud: &OrganizedPointCloud) -> TrackerStep {
        assert_eq!(
            (image.width(), image.height()),
            (cloud.width(), cloud.height()),
            "image and cloud dimensions must match"
        );
        self.frame_index += 1;
        let gray = to_gray(image);
        let mask = segment_tissue(image, &self.config.tissue_color);

        track_rois(&self.prev_gray, &gray, cloud, &mut self.rois, &self.config);

        for i in 0..self.rois.len() {
            if self.rois[i].state == RoiState::Tracking
                && check_occlusion(&self.rois[i], &mask, &gray, &self.config)
            {
                self.rois[i].stop();
            }
        }

        let mut rng = pose_rng(self.seed, self.frame_index);
        let stale = match estimate_pose_ransac(&self.rois, &self.config, &mut rng) {
            Ok(estimate) => {
                self.last_estimate = estimate;
                false
            }
            Err(_) => true,
        };
        // Re-acquisition runs even on stale steps: when every ROI is lost at
        // once, the last estimate is the only pointer back to the tissue,
        // and the appearance gate rejects it if the tissue has moved on.
        reinitialize_rois(
            &mut self.rois,
            &self.last_estimate.transform,
            &gray,
            &mask,
            cloud,
            &self.camera,
            &self.config,
        );

        self.prev_gray = gray;
        TrackerStep { estimate: self.last_estimate, stale }
    }

    pub fn rois(&self) -> &[Roi] {
        &self.rois
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn last_estimate(&self) -> TissuePoseEstimate {
        self.last_estimate
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn frame_index(&self) -> u64 {
        self.frame_index
    }
}

#[cfg(test)]
pub(crate) fn test_roi(id: u32, reference: Vector3<f64>, current: Vector3<f64>) -> Roi {
    Roi {
        id,
        rect: RoiRect { u: 0.0, v: 0.0, width: 20, height: 25 },
        state: RoiState::Tracking,
        reference_appearance: AppearanceDescriptor::flat(),
        reference_point: reference,
        current_point: Some(current),
    }
}

#[cfg(test)]
pub(crate) fn test_roi_at(id: u32, u: f64, v: f64) -> Roi {
    Roi {
        id,
        rect: RoiRect { u, v, width: 20, height: 25 },
        state: RoiState::Tracking,
        reference_appearance: AppearanceDescriptor::flat(),
        reference_point: Vector3::zeros(),
        current_point: None,
    }
}
