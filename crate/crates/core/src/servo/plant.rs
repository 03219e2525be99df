//! Simulated Cartesian robot plant: first-order pose lag behind a delayed
//! command stream.
//!
//! The plant stands in for a real arm's low-level controller. Commands take
//! effect `latency_s` after they are issued and the pose then relaxes toward
//! the active command with time constant `time_constant_s`, translating along
//! the straight line and rotating along the geodesic.

use std::collections::VecDeque;

use nalgebra::UnitQuaternion;

use crate::se3::{RigidTransform, Rotation3};

use super::Stamped;

/// Pose steps between SVD re-orthonormalizations of the plant rotation.
const RENORM_INTERVAL_STEPS: usize = 100;

/// First-order pose plant with fixed command latency.
#[derive(Debug, Clone)]
pub struct RobotPlant {
    pose: RigidTransform,
    target: RigidTransform,
    time_constant_s: f64,
    latency_s: f64,
    queue: VecDeque<Stamped<RigidTransform>>,
    now_s: f64,
    steps_since_renorm: usize,
}

impl RobotPlant {
    /// Creates a plant at rest at `initial_pose`.
    ///
    /// `time_constant_s = 0` makes the pose snap to the active command;
    /// `latency_s = 0` makes commands take effect within the step that issues
    /// them.
    pub fn new(initial_pose: RigidTransform, time_constant_s: f64, latency_s: f64) -> Self {
        assert!(time_constant_s >= 0.0, "time constant must be non-negative");
        assert!(latency_s >= 0.0, "latency must be non-negative");
        RobotPlant {
            pose: initial_pose,
            target: initial_pose,
            time_constant_s,
            latency_s,
            queue: VecDeque::new(),
            now_s: 0.0,
            steps_since_renorm: 0,
        }
    }

    /// Current end-effector pose.
    pub fn pose(&self) -> &RigidTransform {
        &self.pose
    }

    /// Plant-internal simulation time, advanced by [`step`](Self::step).
    pub fn now_s(&self) -> f64 {
        self.now_s
    }

    /// Issues `command` and advances the plant by `dt` seconds.
    ///
    /// The command enters the latency queue and matures `latency_s` later.
    /// The pose relaxes toward the most recently matured command; when a
    /// command matures mid-step the relaxation is integrated piecewise, so
    /// step size does not change where the command takes effect.
    pub fn step(&mut self, command: &RigidTransform, dt: f64) {
        assert!(dt > 0.0, "plant step requires dt > 0");
        self.queue.push_back(Stamped { value: *command, stamp_s: self.now_s + self.latency_s });

        let end_s = self.now_s + dt;
        while let Some(front) = self.queue.front() {
            if front.stamp_s > end_s {
                break;
            }
            let mature_s = front.stamp_s.max(self.now_s);
            if mature_s > self.now_s {
                self.relax(mature_s - self.now_s);
                self.now_s = mature_s;
            }
            self.target = self.queue.pop_front().expect("front checked above").value;
        }
        if end_s > self.now_s {
            self.relax(end_s - self.now_s);
            self.now_s = end_s;
        }

        self.steps_since_renorm += 1;
        if self.steps_since_renorm >= RENORM_INTERVAL_STEPS {
            self.pose = self.pose.orthonormalized();
            self.steps_since_renorm = 0;
        }
    }

    /// Moves the pose toward the active target over `dt` with interpolation
    /// factor `1 - exp(-dt / tau)`.
    fn relax(&mut self, dt: f64) {
        let alpha = if self.time_constant_s > 0.0 {
            1.0 - (-dt / self.time_constant_s).exp()
        } else {
            1.0
        };
        if alpha >= 1.0 {
            self.pose = self.target;
            return;
        }
        let translation =
            self.pose.translation + (self.target.translation - self.pose.translation) * alpha;
        let rotation = rotate_toward(&self.pose.rotation, &self.target.rotation, alpha);
        self.pose = RigidTransform::new(rotation, translation);
    }
}

/// Rotates `from` a fraction `alpha` of the way to `to` along the geodesic.
fn rotate_toward(from: &Rotation3, to: &Rotation3, alpha: f64) -> Rotation3 {
    let relative = from.inverse().compose(to);
    let q = UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(
        *relative.matrix(),
    ));
    match q.axis_angle() {
        Some((axis, angle)) => {
            from.compose(&Rotation3::from_axis_angle(&axis.into_inner(), alpha * angle))
        }
        None => *to,
    }
}
