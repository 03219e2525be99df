//! Closed-loop engine: simulator, tracker, servo, and plant stepped on one
//! simulated clock.
//!
//! Three cadences share a 20 ms base tick: the plant integrates every
//! tick, the servo runs every second tick (25 Hz), and the camera frame
//! plus tracker run every fifth tick (10 Hz). On coincident ticks the
//! tracker publishes before the servo reads, and the servo reads the
//! plant's pose before the plant integrates onward, so each consumer sees
//! the state of the instant it runs at.

use tiscan_core::se3::{pose_error, RigidTransform};
use tiscan_core::servo::trajectory::ScanTrajectory;
use tiscan_core::servo::{EstimateSnapshot, FrameGraph, ScanController, ServoError};
use tiscan_core::sim::{render_ultrasound_slice, Scene, UltrasoundSlice};
use tiscan_core::tracker::{
    Roi, RoiState, TissuePoseEstimate, TissueTracker, TrackerConfig,
};

use crate::config::ExperimentConfig;
use crate::metrics::MetricsRecord;
use crate::ncc::{ncc, NccSeries};
use crate::report::{CommandRow, RoiLogEntry, ServoErrorRow, TrackerLogRow};
use crate::scenario;
use crate::HarnessError;

/// Base simulation step (s); the plant integrates at this rate.
pub const BASE_TICK_S: f64 = 0.02;
/// Servo period in base ticks (25 Hz).
pub const SERVO_EVERY_TICKS: u64 = 2;
/// Camera frame period in base ticks (10 Hz).
pub const FRAME_EVERY_TICKS: u64 = 5;

/// Fraction of servo ticks allowed to trip the stale-estimate timeout
/// before the run aborts.
pub const MAX_STALE_FRACTION: f64 = 0.1;

/// One closed-loop run description.
pub struct ClosedLoopParams<'a> {
    pub config: &'a ExperimentConfig,
    pub scene: &'a Scene,
    pub trajectory: ScanTrajectory,
    /// When false the servo is fed the identity tissue pose every frame
    /// tick, freezing the trajectory in the reference frame; the tracker
    /// still runs and is logged.
    pub motion_compensation: bool,
    /// Record an ultrasound NCC series against the initial slice.
    pub record_ultrasound: bool,
}

/// Everything a closed-loop run produced.
pub struct ClosedLoopRun {
    /// Plant pose vs. the ground-truth desired pose, one sample per servo
    /// tick.
    pub metrics: MetricsRecord,
    pub error_rows: Vec<ServoErrorRow>,
    pub command_rows: Vec<CommandRow>,
    pub tracker_rows: Vec<TrackerLogRow>,
    pub ncc: Option<NccSeries>,
    /// Servo ticks that tripped the stale-estimate timeout.
    pub stale_ticks: usize,
    pub servo_ticks: usize,
    /// Set when the trajectory was consumed before the configured duration.
    pub ended_early_s: Option<f64>,
}

pub(crate) fn roi_log(rois: &[Roi]) -> Vec<RoiLogEntry> {
    rois.iter()
        .map(|roi| {
            let (u, v) = roi.rect.center();
            RoiLogEntry {
                id: roi.id,
                state: match roi.state {
                    RoiState::Tracking => "tracking".to_string(),
                    RoiState::Stopped => "stopped".to_string(),
                },
                u,
                v,
            }
        })
        .collect()
}

fn identity_estimate() -> TissuePoseEstimate {
    TissuePoseEstimate {
        transform: RigidTransform::identity(),
        inlier_count: 0,
        mean_inlier_residual_mm: 0.0,
    }
}

/// Probe pose in the moving tissue frame, the quantity the ultrasound
/// imager is driven by.
fn probe_in_tissue(scene_pose: &RigidTransform, plant_pose: &RigidTransform) -> RigidTransform {
    let camera_from_marker = scenario::marker_observation(plant_pose);
    scene_pose.inverse().compose(&camera_from_marker)
}

/// Runs the full loop for the configured duration and returns every log
/// the experiments report from.
pub fn run_closed_loop(params: ClosedLoopParams<'_>) -> Result<ClosedLoopRun, HarnessError> {
    let config = params.config;
    let scene = params.scene;
    let control = scenario::control_config(config);

    let first = scene.frame_at(0.0);
    let mut tracker = TissueTracker::init(
        &first.image,
        &first.cloud,
        scene.camera,
        TrackerConfig::default(),
        scenario::tracker_seed(config),
    )
    .map_err(|e| HarnessError::Tracking(format!("tracker init: {e}")))?;

    let mut graph = FrameGraph::new(scenario::base_from_camera(), scenario::effector_from_marker());
    let snapshot = EstimateSnapshot::new();
    let mut controller = ScanController::new(control, params.trajectory);

    let initial_pose =
        scenario::desired_effector_pose(controller.trajectory().point(0), &RigidTransform::identity(), &control)
            .map_err(|e| HarnessError::Tracking(format!("initial pose: {e}")))?;
    let mut plant = tiscan_core::servo::RobotPlant::new(
        initial_pose,
        config.plant_time_constant_s,
        config.plant_latency_s,
    );
    let mut current_command = initial_pose;

    snapshot.publish(
        if params.motion_compensation { tracker.last_estimate() } else { identity_estimate() },
        0.0,
    );

    let mut run = ClosedLoopRun {
        metrics: MetricsRecord::default(),
        error_rows: Vec::new(),
        command_rows: Vec::new(),
        tracker_rows: Vec::new(),
        ncc: params.record_ultrasound.then(|| NccSeries::new(params.motion_compensation)),
        stale_ticks: 0,
        servo_ticks: 0,
        ended_early_s: None,
    };
    run.tracker_rows.push(TrackerLogRow {
        frame: 0,
        t_s: 0.0,
        pose: tracker.last_estimate().transform.to_array(),
        inlier_count: tracker.last_estimate().inlier_count,
        mean_inlier_residual_mm: tracker.last_estimate().mean_inlier_residual_mm,
        stale: false,
        rois: roi_log(tracker.rois()),
    });

    let reference_slice: Option<UltrasoundSlice> = run.ncc.is_some().then(|| {
        render_ultrasound_slice(&scene.surface, &probe_in_tissue(&first.true_pose, plant.pose()))
    });
    if let (Some(series), Some(reference)) = (run.ncc.as_mut(), reference_slice.as_ref()) {
        let (score, flagged) = ncc(reference, reference);
        series.push(0.0, score, flagged);
    }

    let ticks = (config.duration_s / BASE_TICK_S).round() as u64;
    let mut first_stale_s: Option<f64> = None;

    for i in 0..ticks {
        let t_s = i as f64 * BASE_TICK_S;

        if i > 0 && i % FRAME_EVERY_TICKS == 0 {
            let frame = scene.frame_at(t_s);
            let step = tracker.step(&frame.image, &frame.cloud);
            run.tracker_rows.push(TrackerLogRow {
                frame: tracker.frame_index(),
                t_s,
                pose: step.estimate.transform.to_array(),
                inlier_count: step.estimate.inlier_count,
                mean_inlier_residual_mm: step.estimate.mean_inlier_residual_mm,
                stale: step.stale,
                rois: roi_log(tracker.rois()),
            });
            if params.motion_compensation {
                if !step.stale {
                    snapshot.publish(step.estimate, t_s);
                }
            } else {
                snapshot.publish(identity_estimate(), t_s);
            }
            if let (Some(series), Some(reference)) = (run.ncc.as_mut(), reference_slice.as_ref())
            {
                let slice = render_ultrasound_slice(
                    &scene.surface,
                    &probe_in_tissue(&frame.true_pose, plant.pose()),
                );
                let (score, flagged) = ncc(reference, &slice);
                series.push(t_s, score, flagged);
            }
        }

        if i % SERVO_EVERY_TICKS == 0 {
            run.servo_ticks += 1;
            graph.observe_effector(*plant.pose(), t_s);
            graph.observe_marker(scenario::marker_observation(plant.pose()), t_s);
            let (active_index, stale) = match controller.servo_step(&mut graph, &snapshot, t_s) {
                Ok(command) => {
                    current_command = command.pose;
                    (command.active_index, command.stale)
                }
                Err(ServoError::StaleEstimate { .. }) => {
                    run.stale_ticks += 1;
                    first_stale_s.get_or_insert(t_s);
                    (controller.active_index(), true)
                }
                Err(ServoError::EndOfTrajectory) => {
                    run.ended_early_s = Some(t_s);
                    break;
                }
                Err(e) => {
                    return Err(HarnessError::Tracking(format!("servo failure at t={t_s}: {e}")))
                }
            };

            let desired = scenario::desired_effector_pose(
                controller.trajectory().point(active_index),
                &scene.true_motion(t_s),
                &control,
            )
            .map_err(|e| HarnessError::Tracking(format!("desired pose at t={t_s}: {e}")))?;
            let err = pose_error(plant.pose(), &desired);
            run.metrics.push(t_s, err.translation_mm, err.rotation_deg);
            run.error_rows.push(ServoErrorRow {
                t_s,
                translation_err_mm: err.translation_mm,
                rotation_err_deg: err.rotation_deg,
                active_index,
                stale,
            });
            run.command_rows.push(CommandRow {
                t_s,
                commanded: current_command.to_array(),
                plant: plant.pose().to_array(),
                active_index,
                stale,
            });
        }

        plant.step(&current_command, BASE_TICK_S);
    }

    let stale_fraction = run.stale_ticks as f64 / run.servo_ticks.max(1) as f64;
    if stale_fraction > MAX_STALE_FRACTION {
        return Err(HarnessError::Tracking(format!(
            "stale-estimate timeout tripped on {} of {} servo ticks ({:.0}%, first at t={}s); \
             the tracker lost the tissue",
            run.stale_ticks,
            run.servo_ticks,
            stale_fraction * 100.0,
            first_stale_s.unwrap_or(0.0),
        )));
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ProfileSelection;

    #[test]
    fn static_scene_closed_loop_stays_put_and_never_goes_stale() {
        let config = ExperimentConfig {
            profile: ProfileSelection::Static,
            duration_s: 2.0,
            ..ExperimentConfig::default()
        };
        let scene = scenario::scene(&config);
        let trajectory = scenario::probe_hold_trajectory(
            &scene.surface,
            &scene.reference_pose(),
            config.duration_s + 60.0,
        );
        let run = run_closed_loop(ClosedLoopParams {
            config: &config,
            scene: &scene,
            trajectory,
            motion_compensation: true,
            record_ultrasound: false,
        })
        .unwrap();

        assert_eq!(run.servo_ticks, 50);
        assert_eq!(run.stale_ticks, 0);
        assert!(run.ended_early_s.is_none());
        assert!(run.ncc.is_none());
        assert_eq!(run.metrics.samples.len(), 50);
        assert_eq!(run.command_rows.len(), 50);
        let mean = run.metrics.translation_summary().unwrap().mean;
        assert!(mean < 0.5, "static closed loop drifted: mean error {mean} mm");
    }
}
