//! Position-based visual servoing for the scanning probe.
//!
//! A calibrated frame graph links the robot base, the camera, the probe
//! marker, and the tissue contact point. Each control cycle synthesizes the
//! desired marker pose for the active trajectory point (probe pressing along
//! the surface normal, marker face turned toward the camera), propagates it
//! through the transform chain to a base-frame end-effector command, and
//! hands the command to a simulated robot plant.
//!
//! Two loops run at different rates: the tracker publishes tissue pose
//! estimates through [`EstimateSnapshot`] at the outer rate, and
//! [`ScanController::servo_step`] consumes the latest snapshot at the inner
//! rate without ever waiting for a fresh one.

pub mod plant;
pub mod snapshot;
pub mod trajectory;

use std::fmt;

use nalgebra::{Matrix3, Vector3};

use crate::se3::RigidTransform;

pub use plant::RobotPlant;
pub use snapshot::EstimateSnapshot;
pub use trajectory::{
    update_trajectory, ScanTrajectory, TrajectoryError, TrajectoryPoint, DEFAULT_DWELL_S,
};

/// A value paired with the simulation time it was produced at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stamped<T> {
    pub value: T,
    pub stamp_s: f64,
}

/// Errors raised by the servo layer.
#[derive(Debug, Clone, PartialEq)]
pub enum ServoError {
    /// A live transform has never been observed.
    MissingTransform { factor: &'static str },
    /// A live transform is older than the stale timeout.
    StaleTransform { factor: &'static str, age_s: f64, timeout_s: f64 },
    /// No tissue pose estimate has been published yet.
    NoEstimate,
    /// The latest tissue pose estimate is older than the stale timeout.
    StaleEstimate { age_s: f64, timeout_s: f64 },
    /// The surface normal is too close to the camera view direction for the
    /// marker-facing constraint to pick an orientation.
    DegenerateNormal { angle_to_view_deg: f64 },
    /// Every trajectory point has been scanned.
    EndOfTrajectory,
}

impl fmt::Display for ServoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ServoError::MissingTransform { factor } => {
                write!(f, "transform {factor} has not been observed")
            }
            ServoError::StaleTransform { factor, age_s, timeout_s } => {
                write!(f, "transform {factor} is {age_s:.3} s old, timeout {timeout_s:.3} s")
            }
            ServoError::NoEstimate => write!(f, "no tissue pose estimate published yet"),
            ServoError::StaleEstimate { age_s, timeout_s } => {
                write!(f, "tissue estimate is {age_s:.3} s old, timeout {timeout_s:.3} s")
            }
            ServoError::DegenerateNormal { angle_to_view_deg } => {
                write!(
                    f,
                    "surface normal is {angle_to_view_deg:.2} deg from the view direction; \
                     marker facing is undefined"
                )
            }
            ServoError::EndOfTrajectory => write!(f, "every trajectory point has been scanned"),
        }
    }
}

impl std::error::Error for ServoError {}

/// Rates, timeouts, and probe geometry for the scan controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlConfig {
    /// Marker feedback and command rate (Hz).
    pub inner_rate_hz: f64,
    /// Tissue pose estimate rate (Hz); must not exceed the inner rate.
    pub outer_rate_hz: f64,
    /// Maximum age of live transforms and tissue estimates (s).
    pub stale_timeout_s: f64,
    /// Distance the probe tip is pressed past the contact point, along the
    /// inward surface direction (mm).
    pub contact_offset_mm: f64,
    /// Minimum angle between the surface normal and the camera view
    /// direction (deg); below this the marker-facing constraint is
    /// degenerate.
    pub min_normal_view_angle_deg: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            inner_rate_hz: 25.0,
            outer_rate_hz: 10.0,
            stale_timeout_s: 0.5,
            contact_offset_mm: 1.0,
            min_normal_view_angle_deg: 1.0,
        }
    }
}

/// Calibrated and observed transforms between the robot base, camera, probe
/// marker, and tissue contact frames.
///
/// Names follow the `a_from_b` convention: `base_from_camera` maps
/// camera-frame coordinates into the base frame. The two calibration
/// transforms are fixed for a scan; the rest are live observations that
/// expire after a stale timeout.
#[derive(Debug, Clone)]
pub struct FrameGraph {
    base_from_camera: RigidTransform,
    effector_from_marker: RigidTransform,
    base_from_effector: Option<Stamped<RigidTransform>>,
    camera_from_marker: Option<Stamped<RigidTransform>>,
    camera_from_contact: Option<Stamped<RigidTransform>>,
    contact_update: Option<Stamped<RigidTransform>>,
}

impl FrameGraph {
    pub fn new(base_from_camera: RigidTransform, effector_from_marker: RigidTransform) -> Self {
        FrameGraph {
            base_from_camera,
            effector_from_marker,
            base_from_effector: None,
            camera_from_marker: None,
            camera_from_contact: None,
            contact_update: None,
        }
    }

    pub fn base_from_camera(&self) -> &RigidTransform {
        &self.base_from_camera
    }

    pub fn effector_from_marker(&self) -> &RigidTransform {
        &self.effector_from_marker
    }

    /// Records the robot's current end-effector pose in the base frame.
    pub fn observe_effector(&mut self, pose: RigidTransform, stamp_s: f64) {
        self.base_from_effector = Some(Stamped { value: pose, stamp_s });
    }

    /// Records a camera-frame observation of the probe marker.
    pub fn observe_marker(&mut self, pose: RigidTransform, stamp_s: f64) {
        self.camera_from_marker = Some(Stamped { value: pose, stamp_s });
    }

    /// Records the camera-frame pose of the reference contact point.
    pub fn set_contact(&mut self, pose: RigidTransform, stamp_s: f64) {
        self.camera_from_contact = Some(Stamped { value: pose, stamp_s });
    }

    /// Records the tracked motion of the contact point, expressed in the
    /// contact frame (reference contact to current contact).
    pub fn set_contact_update(&mut self, update: RigidTransform, stamp_s: f64) {
        self.contact_update = Some(Stamped { value: update, stamp_s });
    }

    /// Computes the commanded base-frame end-effector pose.
    ///
    /// The command is the composition of the current effector pose, the
    /// hand-eye calibration, the inverted marker observation, the contact
    /// observation, the tracked contact update, `contact_from_marker_desired`,
    /// and the inverted hand-eye calibration. Every live factor must be
    /// younger than `stale_timeout_s` at `now_s`.
    pub fn control_law(
        &self,
        contact_from_marker_desired: &RigidTransform,
        now_s: f64,
        stale_timeout_s: f64,
    ) -> Result<RigidTransform, ServoError> {
        let base_from_effector =
            fresh(&self.base_from_effector, "base-from-effector", now_s, stale_timeout_s)?;
        let camera_from_marker =
            fresh(&self.camera_from_marker, "camera-from-marker", now_s, stale_timeout_s)?;
        let camera_from_contact =
            fresh(&self.camera_from_contact, "camera-from-contact", now_s, stale_timeout_s)?;
        let contact_update =
            fresh(&self.contact_update, "contact-update", now_s, stale_timeout_s)?;

        Ok(base_from_effector
            .compose(&self.effector_from_marker)
            .compose(&camera_from_marker.inverse())
            .compose(&camera_from_contact)
            .compose(&contact_update)
            .compose(contact_from_marker_desired)
            .compose(&self.effector_from_marker.inverse()))
    }
}

/// Returns the transform if it exists and is younger than the timeout.
fn fresh(
    slot: &Option<Stamped<RigidTransform>>,
    factor: &'static str,
    now_s: f64,
    timeout_s: f64,
) -> Result<RigidTransform, ServoError> {
    match slot {
        None => Err(ServoError::MissingTransform { factor }),
        Some(stamped) => {
            let age_s = now_s - stamped.stamp_s;
            if age_s > timeout_s {
                Err(ServoError::StaleTransform { factor, age_s, timeout_s })
            } else {
                Ok(stamped.value)
            }
        }
    }
}

/// Synthesizes the desired marker pose for a contact point.
///
/// All inputs share one frame; the returned transform maps marker
/// coordinates into it. The marker z axis presses along the inward surface
/// direction `-normal`, the origin sits at the probe tip
/// `contact_point - contact_offset_mm * normal`, and the remaining freedom
/// (rotation about the probe axis) turns the marker x axis as far toward the
/// camera as the axis constraint allows.
///
/// Fails when the normal is within `min_view_angle_deg` of the camera view
/// direction, where every rotation about the probe axis faces the camera
/// equally well.
pub fn desired_marker_pose(
    contact_point: &Vector3<f64>,
    normal: &Vector3<f64>,
    camera_position: &Vector3<f64>,
    contact_offset_mm: f64,
    min_view_angle_deg: f64,
) -> Result<RigidTransform, ServoError> {
    let tip = contact_point - normal * contact_offset_mm;
    let toward_camera = camera_position - tip;
    let distance = toward_camera.norm();
    if distance < 1e-9 {
        return Err(ServoError::DegenerateNormal { angle_to_view_deg: 0.0 });
    }
    let toward = toward_camera / distance;

    let z = -normal;
    let axial = toward.dot(&z);
    let angle_to_view_deg = axial.abs().clamp(0.0, 1.0).acos().to_degrees();
    if angle_to_view_deg < min_view_angle_deg {
        return Err(ServoError::DegenerateNormal { angle_to_view_deg });
    }

    let x = (toward - z * axial).normalize();
    let y = z.cross(&x);
    let rotation = crate::se3::Rotation3::from_matrix(Matrix3::from_columns(&[x, y, z]))
        .expect("orthonormal basis by construction");
    Ok(RigidTransform::new(rotation, tip))
}

/// One emitted pose command with its bookkeeping.
#[derive(Debug, Clone, Copy)]
pub struct ServoCommand {
    /// Commanded base-frame end-effector pose.
    pub pose: RigidTransform,
    /// Trajectory point the command targets.
    pub active_index: usize,
    /// Age of the tissue estimate the command was built from (s).
    pub estimate_age_s: f64,
    /// True when the estimate is older than one outer-loop period, meaning
    /// at least one tissue update was missed.
    pub stale: bool,
}

/// Walks the scan trajectory and turns tissue estimates into pose commands.
///
/// The controller owns the reference trajectory and the dwell clock. Each
/// [`servo_step`](Self::servo_step) maps the active point through the latest
/// tissue estimate, synthesizes the desired marker pose in the camera frame
/// (where the static camera sits at the origin), and runs the control law.
#[derive(Debug)]
pub struct ScanController {
    config: ControlConfig,
    trajectory: ScanTrajectory,
    active_index: usize,
    point_entered_s: Option<f64>,
    finished: bool,
}

impl ScanController {
    pub fn new(config: ControlConfig, trajectory: ScanTrajectory) -> Self {
        assert!(
            config.inner_rate_hz >= config.outer_rate_hz,
            "inner loop must run at least as fast as the outer loop"
        );
        ScanController {
            config,
            trajectory,
            active_index: 0,
            point_entered_s: None,
            finished: false,
        }
    }

    pub fn config(&self) -> &ControlConfig {
        &self.config
    }

    pub fn trajectory(&self) -> &ScanTrajectory {
        &self.trajectory
    }

    pub fn active_index(&self) -> usize {
        self.active_index
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Produces the next pose command at time `now_s`.
    ///
    /// Reads the latest tissue estimate from `estimates` without blocking,
    /// advances the active trajectory point once its dwell has elapsed,
    /// installs the contact factors into `graph`, and composes the command.
    /// Fails once every point is scanned, when the estimate is missing or
    /// stale, or when a live transform in the graph has expired.
    pub fn servo_step(
        &mut self,
        graph: &mut FrameGraph,
        estimates: &EstimateSnapshot,
        now_s: f64,
    ) -> Result<ServoCommand, ServoError> {
        if self.finished {
            return Err(ServoError::EndOfTrajectory);
        }
        let estimate = estimates.latest().ok_or(ServoError::NoEstimate)?;
        let age_s = now_s - estimate.stamp_s;
        if age_s > self.config.stale_timeout_s {
            return Err(ServoError::StaleEstimate {
                age_s,
                timeout_s: self.config.stale_timeout_s,
            });
        }

        match self.point_entered_s {
            None => self.point_entered_s = Some(now_s),
            Some(entered_s) => {
                if now_s - entered_s >= self.trajectory.point(self.active_index).dwell_s {
                    if self.active_index + 1 >= self.trajectory.len() {
                        self.finished = true;
                        return Err(ServoError::EndOfTrajectory);
                    }
                    self.active_index += 1;
                    self.point_entered_s = Some(now_s);
                }
            }
        }

        let point = self.trajectory.point(self.active_index);
        let motion = estimate.value.transform;
        let contact_current = motion.apply(&point.contact_point);
        let normal_current = motion.rotation.apply(&point.normal);
        let camera_from_marker_desired = desired_marker_pose(
            &contact_current,
            &normal_current,
            &Vector3::zeros(),
            self.config.contact_offset_mm,
            self.config.min_normal_view_angle_deg,
        )?;

        let camera_from_contact = RigidTransform::from_translation(point.contact_point);
        let contact_update =
            camera_from_contact.inverse().compose(&motion).compose(&camera_from_contact);
        let camera_from_contact_current = motion.compose(&camera_from_contact);
        let contact_from_marker_desired =
            camera_from_contact_current.inverse().compose(&camera_from_marker_desired);

        graph.set_contact(camera_from_contact, now_s);
        graph.set_contact_update(contact_update, now_s);
        let pose =
            graph.control_law(&contact_from_marker_desired, now_s, self.config.stale_timeout_s)?;

        Ok(ServoCommand {
            pose,
            active_index: self.active_index,
            estimate_age_s: age_s,
            stale: age_s > 1.0 / self.config.outer_rate_hz,
        })
    }
}
