//! Shared experiment rig: camera, robot mounting, phantom scene, motion
//! profiles, probe trajectories, and the ground-truth desired pose.
//!
//! All experiments run on the same fixed rig so results are comparable
//! across studies. The base-to-camera and effector-to-marker transforms
//! are deliberately non-trivial: errors in the frame bookkeeping would
//! show up as gross pose offsets rather than cancelling out.

use nalgebra::Vector3;

use tiscan_core::se3::{RigidTransform, Rotation3};
use tiscan_core::servo::trajectory::{ScanTrajectory, TrajectoryPoint};
use tiscan_core::servo::{desired_marker_pose, ControlConfig, ServoError};
use tiscan_core::sim::surface::PhantomSurface;
use tiscan_core::sim::{
    default_mount, Axis, FreeFormMotion, MotionProfile, PhantomConfig, Scene,
};
use tiscan_core::CameraIntrinsics;

use crate::config::{ExperimentConfig, MotionAxis, ProfileSelection};

/// Largest allowed gap between consecutive trajectory points (mm).
pub const MAX_POINT_SPACING_MM: f64 = 20.0;

/// Local tissue coordinates of the probe-hold contact point (mm). Slightly
/// off the patch center so no symmetry of the phantom is special-cased.
pub const HOLD_POINT_MM: (f64, f64) = (5.0, -4.0);

/// Gentle orientation wobble used by free-form trials (deg RMS per axis).
pub const FREE_FORM_ROTATION_RMS_DEG: f64 = 1.0;

const TRACKER_SEED_XOR: u64 = 0xA5A5_A5A5_A5A5_A5A5;
const FREE_FORM_SEED_XOR: u64 = 0x3C3C_3C3C_3C3C_3C3C;

/// Camera used by every experiment.
pub fn default_camera() -> CameraIntrinsics {
    CameraIntrinsics::new(800.0, 800.0, 360.0, 288.0, 720, 576)
        .expect("static intrinsics are valid")
}

/// Fixed robot-base-to-camera transform of the rig.
pub fn base_from_camera() -> RigidTransform {
    RigidTransform::new(
        Rotation3::rot_z(0.5).compose(&Rotation3::rot_x(2.3)),
        Vector3::new(350.0, -120.0, 430.0),
    )
}

/// Fixed hand-eye transform from the end-effector to the probe marker.
pub fn effector_from_marker() -> RigidTransform {
    RigidTransform::new(
        Rotation3::rot_z(0.2).compose(&Rotation3::rot_y(0.05)),
        Vector3::new(2.5, -1.5, 14.0),
    )
}

/// Exact marker observation the rig's camera would report for a robot at
/// `base_from_effector`: the marker detector is not simulated, so the
/// kinematic chain is closed without error.
pub fn marker_observation(base_from_effector: &RigidTransform) -> RigidTransform {
    base_from_camera()
        .inverse()
        .compose(base_from_effector)
        .compose(&effector_from_marker())
}

/// Tracker seed derived from the run seed.
pub fn tracker_seed(config: &ExperimentConfig) -> u64 {
    config.seed ^ TRACKER_SEED_XOR
}

/// Motion profile selected by the config. Free-form magnitudes match the
/// RMS of the corresponding sinusoid (peak-to-peak / 2√2) so trials of one
/// profile are energy-comparable across axes.
pub fn motion_profile(config: &ExperimentConfig) -> MotionProfile {
    let axis = |a: MotionAxis| match a {
        MotionAxis::X => Axis::X,
        MotionAxis::Y => Axis::Y,
        MotionAxis::Z => Axis::Z,
        MotionAxis::FreeForm => unreachable!("free-form handled separately"),
    };
    let peak_to_peak = |p: ProfileSelection| match p {
        ProfileSelection::Static => 0.0,
        ProfileSelection::Profile1 | ProfileSelection::Profile2 => 3.0,
        ProfileSelection::Profile3 => 5.0,
    };
    match (config.profile, config.axis) {
        (ProfileSelection::Static, _) => MotionProfile::Static,
        (profile, MotionAxis::FreeForm) => {
            let rms = peak_to_peak(profile) / (2.0 * 2.0_f64.sqrt());
            MotionProfile::FreeForm(FreeFormMotion::generate(
                rms,
                config.duration_s + 1.0,
                config.seed ^ FREE_FORM_SEED_XOR,
                FREE_FORM_ROTATION_RMS_DEG,
            ))
        }
        (ProfileSelection::Profile1, a) => MotionProfile::profile1(axis(a)),
        (ProfileSelection::Profile2, a) => MotionProfile::profile2(axis(a)),
        (ProfileSelection::Profile3, a) => MotionProfile::profile3(axis(a)),
    }
}

/// Builds the simulated scene for a config: seeded phantom, selected
/// motion, default mount and camera, no occluders.
pub fn scene(config: &ExperimentConfig) -> Scene {
    let surface = PhantomSurface::generate(PhantomConfig {
        seed: config.phantom_seed,
        ..PhantomConfig::default()
    });
    Scene {
        surface,
        profile: motion_profile(config),
        occluders: vec![],
        camera: default_camera(),
        mount: default_mount(),
        noise_sigma_mm: config.noise_sigma_mm,
        seed: config.seed,
    }
}

/// Servo loop rates and thresholds for a config.
pub fn control_config(config: &ExperimentConfig) -> ControlConfig {
    ControlConfig {
        stale_timeout_s: config.stale_timeout_s,
        ..ControlConfig::default()
    }
}

fn trajectory_point(
    surface: &PhantomSurface,
    reference_pose: &RigidTransform,
    x_mm: f64,
    y_mm: f64,
    dwell_s: f64,
) -> TrajectoryPoint {
    let contact = reference_pose.apply(&surface.surface_point(x_mm, y_mm));
    let normal = reference_pose.rotation.apply(&surface.surface_normal(x_mm, y_mm));
    TrajectoryPoint { contact_point: contact, normal, dwell_s }
}

/// Single-point trajectory that parks the probe over [`HOLD_POINT_MM`] for
/// `hold_s` seconds, expressed in the reference camera frame. Used by the
/// accuracy and NCC studies, where the quantity of interest is how well
/// the probe rides the moving tissue rather than path coverage.
pub fn probe_hold_trajectory(
    surface: &PhantomSurface,
    reference_pose: &RigidTransform,
    hold_s: f64,
) -> ScanTrajectory {
    let point =
        trajectory_point(surface, reference_pose, HOLD_POINT_MM.0, HOLD_POINT_MM.1, hold_s);
    ScanTrajectory::new(vec![point], MAX_POINT_SPACING_MM)
        .expect("single on-patch point is a valid trajectory")
}

/// Serpentine coverage path over the safe interior of the patch: `rows`
/// sweeps of `cols` points each, alternating direction, expressed in the
/// reference camera frame.
pub fn serpentine_trajectory(
    surface: &PhantomSurface,
    reference_pose: &RigidTransform,
    rows: usize,
    cols: usize,
    dwell_s: f64,
) -> ScanTrajectory {
    assert!(rows >= 2 && cols >= 2, "a serpentine needs at least a 2x2 grid");
    let (x_max, y_max) = (45.0, 30.0);
    let mut points = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let y = -y_max + 2.0 * y_max * r as f64 / (rows - 1) as f64;
        for c in 0..cols {
            let along = if r % 2 == 0 { c } else { cols - 1 - c };
            let x = -x_max + 2.0 * x_max * along as f64 / (cols - 1) as f64;
            points.push(trajectory_point(surface, reference_pose, x, y, dwell_s));
        }
    }
    ScanTrajectory::new(points, MAX_POINT_SPACING_MM)
        .expect("grid planar spacing plus surface relief stays within the spacing limit")
}

/// Ground-truth desired end-effector pose for a trajectory point under the
/// given tissue motion: the pose the controller is trying to realize,
/// computed from truth instead of the tracker estimate.
pub fn desired_effector_pose(
    point: &TrajectoryPoint,
    tissue_motion: &RigidTransform,
    control: &ControlConfig,
) -> Result<RigidTransform, ServoError> {
    let contact = tissue_motion.apply(&point.contact_point);
    let normal = tissue_motion.rotation.apply(&point.normal);
    let camera_from_marker = desired_marker_pose(
        &contact,
        &normal,
        &Vector3::zeros(),
        control.contact_offset_mm,
        control.min_normal_view_angle_deg,
    )?;
    Ok(base_from_camera()
        .compose(&camera_from_marker)
        .compose(&effector_from_marker().inverse()))
}
