//! The three studies: tracking accuracy, servo accuracy, and NCC
//! stability. Each runner executes one trial, writes its reports into the
//! config's output directory, and returns the in-memory results.
//!
//! File stems are deterministic (`tracking_profile1_x`, `servo_static`,
//! `ncc_profile3_y`), so a suite run leaves a predictable directory.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use tiscan_core::se3::pose_error;
use tiscan_core::tracker::{TissueTracker, TrackerConfig};

use crate::config::{ExperimentConfig, MotionAxis, ProfileSelection};
use crate::loops::{run_closed_loop, ClosedLoopParams, FRAME_EVERY_TICKS};
use crate::metrics::{MetricsRecord, Summary};
use crate::ncc::NccSeries;
use crate::report::{
    write_ncc_csv, write_servo_error_csv, write_summary_json, write_tracker_jsonl,
    write_tracking_csv, write_command_csv, TrackerLogRow, TrackingRow,
};
use crate::scenario;
use crate::{loops, HarnessError};

/// Mean ± std of one trial, as printed by `--table`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub label: String,
    pub translation_mm: Summary,
    pub rotation_deg: Summary,
}

/// Paired NCC means of one axis, as printed by `--table`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NccOutcome {
    pub label: String,
    pub mean_with_compensation: f64,
    pub mean_without_compensation: f64,
    pub flagged_with: usize,
    pub flagged_without: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct TrackingSummaryFile {
    config: ExperimentConfig,
    label: String,
    frames: usize,
    stale_frames: usize,
    translation_mm: Summary,
    rotation_deg: Summary,
}

#[derive(Debug, Serialize, Deserialize)]
struct ServoSummaryFile {
    config: ExperimentConfig,
    label: String,
    servo_ticks: usize,
    stale_ticks: usize,
    ended_early_s: Option<f64>,
    translation_mm: Summary,
    rotation_deg: Summary,
}

#[derive(Debug, Serialize, Deserialize)]
struct NccSummaryFile {
    config: ExperimentConfig,
    label: String,
    samples: usize,
    mean_with_compensation: f64,
    mean_without_compensation: f64,
    flagged_with: usize,
    flagged_without: usize,
}

fn ensure_out_dir(config: &ExperimentConfig) -> Result<(), HarnessError> {
    std::fs::create_dir_all(&config.out_dir).map_err(|e| {
        HarnessError::Io(format!("creating {}: {e}", config.out_dir.display()))
    })
}

fn out_path(config: &ExperimentConfig, name: &str) -> PathBuf {
    config.out_dir.join(name)
}

fn summaries(record: &MetricsRecord) -> Result<(Summary, Summary), HarnessError> {
    match (record.translation_summary(), record.rotation_summary()) {
        (Some(t), Some(r)) => Ok((t, r)),
        _ => Err(HarnessError::Tracking("experiment produced no samples".into())),
    }
}

/// Runs the tracker against ground truth over a simulated sequence at the
/// camera rate, with no robot in the loop.
pub fn run_tracking_accuracy(
    config: &ExperimentConfig,
) -> Result<(MetricsRecord, TrialOutcome), HarnessError> {
    config.validate()?;
    ensure_out_dir(config)?;
    let scene = scenario::scene(config);
    let label = config.trial_label();

    let first = scene.frame_at(0.0);
    let mut tracker = TissueTracker::init(
        &first.image,
        &first.cloud,
        scene.camera,
        TrackerConfig::default(),
        scenario::tracker_seed(config),
    )
    .map_err(|e| HarnessError::Tracking(format!("tracker init: {e}")))?;

    let frame_period_s = loops::BASE_TICK_S * FRAME_EVERY_TICKS as f64;
    let steps = (config.duration_s / frame_period_s).round() as u64;
    let reference_pose = scene.reference_pose();
    let mut record = MetricsRecord::default();
    let mut rows = Vec::new();
    let mut log_rows = vec![TrackerLogRow {
        frame: 0,
        t_s: 0.0,
        pose: tracker.last_estimate().transform.to_array(),
        inlier_count: tracker.last_estimate().inlier_count,
        mean_inlier_residual_mm: tracker.last_estimate().mean_inlier_residual_mm,
        stale: false,
        rois: loops::roi_log(tracker.rois()),
    }];
    let mut stale_frames = 0;

    for k in 1..=steps {
        let t_s = k as f64 * frame_period_s;
        let frame = scene.frame_at(t_s);
        let step = tracker.step(&frame.image, &frame.cloud);
        // Compare tissue poses, not raw camera-frame motions: anchoring both
        // transforms at the tissue origin keeps the translation figure from
        // absorbing the rotation error times the camera-to-tissue distance.
        let estimated_pose = step.estimate.transform.compose(&reference_pose);
        let err = pose_error(&estimated_pose, &frame.true_pose);
        record.push(t_s, err.translation_mm, err.rotation_deg);
        if step.stale {
            stale_frames += 1;
        }
        rows.push(TrackingRow {
            frame: tracker.frame_index(),
            t_s,
            translation_err_mm: err.translation_mm,
            rotation_err_deg: err.rotation_deg,
            inlier_count: step.estimate.inlier_count,
            stale: step.stale,
        });
        log_rows.push(TrackerLogRow {
            frame: tracker.frame_index(),
            t_s,
            pose: step.estimate.transform.to_array(),
            inlier_count: step.estimate.inlier_count,
            mean_inlier_residual_mm: step.estimate.mean_inlier_residual_mm,
            stale: step.stale,
            rois: loops::roi_log(tracker.rois()),
        });
    }

    let (translation, rotation) = summaries(&record)?;
    write_tracking_csv(&out_path(config, &format!("tracking_{label}.csv")), &rows)?;
    write_tracker_jsonl(&out_path(config, &format!("tracking_{label}.jsonl")), &log_rows)?;
    write_summary_json(
        &out_path(config, &format!("tracking_{label}.json")),
        &TrackingSummaryFile {
            config: config.clone(),
            label: label.clone(),
            frames: rows.len(),
            stale_frames,
            translation_mm: translation,
            rotation_deg: rotation,
        },
    )?;
    Ok((record, TrialOutcome { label, translation_mm: translation, rotation_deg: rotation }))
}

/// Runs the full closed loop with motion compensation and reports how well
/// the plant tracked the ground-truth desired pose.
pub fn run_servo_accuracy(
    config: &ExperimentConfig,
) -> Result<(MetricsRecord, TrialOutcome), HarnessError> {
    config.validate()?;
    ensure_out_dir(config)?;
    let scene = scenario::scene(config);
    let label = config.trial_label();

    let trajectory = scenario::probe_hold_trajectory(
        &scene.surface,
        &scene.reference_pose(),
        config.duration_s + 60.0,
    );
    let run = run_closed_loop(ClosedLoopParams {
        config,
        scene: &scene,
        trajectory,
        motion_compensation: true,
        record_ultrasound: false,
    })?;

    let (translation, rotation) = summaries(&run.metrics)?;
    write_servo_error_csv(
        &out_path(config, &format!("servo_{label}_errors.csv")),
        &run.error_rows,
    )?;
    write_command_csv(
        &out_path(config, &format!("servo_{label}_commands.csv")),
        &run.command_rows,
    )?;
    write_tracker_jsonl(
        &out_path(config, &format!("servo_{label}_tracker.jsonl")),
        &run.tracker_rows,
    )?;
    write_summary_json(
        &out_path(config, &format!("servo_{label}.json")),
        &ServoSummaryFile {
            config: config.clone(),
            label: label.clone(),
            servo_ticks: run.servo_ticks,
            stale_ticks: run.stale_ticks,
            ended_early_s: run.ended_early_s,
            translation_mm: translation,
            rotation_deg: rotation,
        },
    )?;
    Ok((run.metrics, TrialOutcome { label, translation_mm: translation, rotation_deg: rotation }))
}

/// Runs the closed loop twice on identical seeds, with and without motion
/// compensation, and scores ultrasound stability against the first slice.
pub fn run_ncc_stability(
    config: &ExperimentConfig,
) -> Result<(NccSeries, NccSeries, NccOutcome), HarnessError> {
    config.validate()?;
    ensure_out_dir(config)?;
    let scene = scenario::scene(config);
    let label = config.trial_label();

    let mut paired = Vec::with_capacity(2);
    for motion_compensation in [true, false] {
        let trajectory = scenario::probe_hold_trajectory(
            &scene.surface,
            &scene.reference_pose(),
            config.duration_s + 60.0,
        );
        let run = run_closed_loop(ClosedLoopParams {
            config,
            scene: &scene,
            trajectory,
            motion_compensation,
            record_ultrasound: true,
        })?;
        paired.push(run);
    }
    let with_run = paired.remove(0);
    let without_run = paired.remove(0);
    let with = with_run.ncc.expect("ultrasound recording was requested");
    let without = without_run.ncc.expect("ultrasound recording was requested");
    if with.is_empty() || without.is_empty() {
        return Err(HarnessError::Tracking("experiment produced no samples".into()));
    }

    let outcome = NccOutcome {
        label: label.clone(),
        mean_with_compensation: with.mean().expect("series is non-empty"),
        mean_without_compensation: without.mean().expect("series is non-empty"),
        flagged_with: with.flagged_count(),
        flagged_without: without.flagged_count(),
    };
    write_ncc_csv(&out_path(config, &format!("ncc_{label}_on.csv")), &with)?;
    write_ncc_csv(&out_path(config, &format!("ncc_{label}_off.csv")), &without)?;
    write_tracker_jsonl(
        &out_path(config, &format!("ncc_{label}_tracker_on.jsonl")),
        &with_run.tracker_rows,
    )?;
    write_tracker_jsonl(
        &out_path(config, &format!("ncc_{label}_tracker_off.jsonl")),
        &without_run.tracker_rows,
    )?;
    write_summary_json(
        &out_path(config, &format!("ncc_{label}.json")),
        &NccSummaryFile {
            config: config.clone(),
            label,
            samples: with.samples.len(),
            mean_with_compensation: outcome.mean_with_compensation,
            mean_without_compensation: outcome.mean_without_compensation,
            flagged_with: outcome.flagged_with,
            flagged_without: outcome.flagged_without,
        },
    )?;
    Ok((with, without, outcome))
}

/// The twelve tracking trials: every profile crossed with every axis.
pub fn tracking_suite() -> Vec<(ProfileSelection, MotionAxis)> {
    let profiles = [
        ProfileSelection::Profile1,
        ProfileSelection::Profile2,
        ProfileSelection::Profile3,
    ];
    let axes = [MotionAxis::X, MotionAxis::Y, MotionAxis::Z, MotionAxis::FreeForm];
    profiles
        .iter()
        .flat_map(|&p| axes.iter().map(move |&a| (p, a)))
        .collect()
}

/// The ten servo trials: nine sinusoid profile/axis pairs plus one
/// free-form run at the largest magnitude.
pub fn servo_suite() -> Vec<(ProfileSelection, MotionAxis)> {
    let mut trials: Vec<(ProfileSelection, MotionAxis)> = [
        ProfileSelection::Profile1,
        ProfileSelection::Profile2,
        ProfileSelection::Profile3,
    ]
    .iter()
    .flat_map(|&p| [MotionAxis::X, MotionAxis::Y, MotionAxis::Z].iter().map(move |&a| (p, a)))
    .collect();
    trials.push((ProfileSelection::Profile3, MotionAxis::FreeForm));
    trials
}

/// The three paired NCC trials: the largest profile on each axis.
pub fn ncc_suite() -> Vec<(ProfileSelection, MotionAxis)> {
    [MotionAxis::X, MotionAxis::Y, MotionAxis::Z]
        .iter()
        .map(|&a| (ProfileSelection::Profile3, a))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_have_the_documented_trial_counts() {
        assert_eq!(tracking_suite().len(), 12);
        assert_eq!(servo_suite().len(), 10);
        assert_eq!(ncc_suite().len(), 3);
    }

    #[test]
    fn suite_labels_are_unique() {
        let mut labels: Vec<String> = tracking_suite()
            .iter()
            .map(|&(p, a)| {
                ExperimentConfig { profile: p, axis: a, ..ExperimentConfig::default() }
                    .trial_label()
            })
            .collect();
        labels.sort();
        labels.dedup();
        assert_eq!(labels.len(), 12);
    }
}
