//! Report writers: per-frame CSV, per-frame tracker JSONL, and JSON
//! summaries.
//!
//! Numbers are written with Rust's shortest round-trip float formatting,
//! so a file is byte-identical across reruns exactly when the run itself
//! is. Writers refuse empty inputs before touching the filesystem: a
//! failed experiment never leaves a plausible-looking empty report.

use std::fmt;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ncc::NccSeries;

#[derive(Debug)]
pub enum ReportError {
    /// No rows to write.
    Empty,
    Io(std::io::Error),
}

impl fmt::Display for ReportError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReportError::Empty => write!(f, "refusing to write an empty report"),
            ReportError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ReportError {}

impl From<std::io::Error> for ReportError {
    fn from(e: std::io::Error) -> Self {
        ReportError::Io(e)
    }
}

/// One tracking-accuracy frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingRow {
    pub frame: u64,
    pub t_s: f64,
    pub translation_err_mm: f64,
    pub rotation_err_deg: f64,
    pub inlier_count: usize,
    pub stale: bool,
}

/// One servo-accuracy control tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServoErrorRow {
    pub t_s: f64,
    pub translation_err_mm: f64,
    pub rotation_err_deg: f64,
    pub active_index: usize,
    pub stale: bool,
}

/// One commanded/realized pose pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommandRow {
    pub t_s: f64,
    pub commanded: [f64; 12],
    pub plant: [f64; 12],
    pub active_index: usize,
    pub stale: bool,
}

/// Per-ROI line item inside a tracker log row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiLogEntry {
    pub id: u32,
    /// `"tracking"` or `"stopped"`.
    pub state: String,
    /// Window center pixel.
    pub u: f64,
    pub v: f64,
}

/// Full tracker state after one frame, written as one JSONL line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerLogRow {
    pub frame: u64,
    pub t_s: f64,
    /// Row-major rotation then translation of the estimated tissue motion.
    pub pose: [f64; 12],
    pub inlier_count: usize,
    pub mean_inlier_residual_mm: f64,
    pub stale: bool,
    pub rois: Vec<RoiLogEntry>,
}

fn write_text(path: &Path, text: &str) -> Result<(), ReportError> {
    std::fs::write(path, text)?;
    Ok(())
}

pub fn write_tracking_csv(path: &Path, rows: &[TrackingRow]) -> Result<(), ReportError> {
    if rows.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut text =
        String::from("frame,t_s,translation_err_mm,rotation_err_deg,inlier_count,stale\n");
    for r in rows {
        writeln!(
            text,
            "{},{},{},{},{},{}",
            r.frame,
            r.t_s,
            r.translation_err_mm,
            r.rotation_err_deg,
            r.inlier_count,
            r.stale as u8
        )
        .expect("string writes cannot fail");
    }
    write_text(path, &text)
}

pub fn write_servo_error_csv(path: &Path, rows: &[ServoErrorRow]) -> Result<(), ReportError> {
    if rows.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut text =
        String::from("t_s,translation_err_mm,rotation_err_deg,active_index,stale\n");
    for r in rows {
        writeln!(
            text,
            "{},{},{},{},{}",
            r.t_s,
            r.translation_err_mm,
            r.rotation_err_deg,
            r.active_index,
            r.stale as u8
        )
        .expect("string writes cannot fail");
    }
    write_text(path, &text)
}

pub fn write_command_csv(path: &Path, rows: &[CommandRow]) -> Result<(), ReportError> {
    if rows.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut text = String::from("t_s");
    for i in 0..12 {
        write!(text, ",cmd_{i}").expect("string writes cannot fail");
    }
    for i in 0..12 {
        write!(text, ",plant_{i}").expect("string writes cannot fail");
    }
    text.push_str(",active_index,stale\n");
    for r in rows {
        write!(text, "{}", r.t_s).expect("string writes cannot fail");
        for v in r.commanded.iter().chain(r.plant.iter()) {
            write!(text, ",{v}").expect("string writes cannot fail");
        }
        writeln!(text, ",{},{}", r.active_index, r.stale as u8)
            .expect("string writes cannot fail");
    }
    write_text(path, &text)
}

pub fn write_ncc_csv(path: &Path, series: &NccSeries) -> Result<(), ReportError> {
    if series.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut text = String::from("t_s,score,flagged\n");
    for s in &series.samples {
        writeln!(text, "{},{},{}", s.t_s, s.score, s.flagged as u8)
            .expect("string writes cannot fail");
    }
    write_text(path, &text)
}

pub fn write_tracker_jsonl(path: &Path, rows: &[TrackerLogRow]) -> Result<(), ReportError> {
    if rows.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut text = String::new();
    for row in rows {
        let line = serde_json::to_string(row).expect("tracker log rows serialize");
        text.push_str(&line);
        text.push('\n');
    }
    write_text(path, &text)
}

/// Writes a pretty-printed JSON summary (config echo plus statistics).
pub fn write_summary_json<T: Serialize>(path: &Path, summary: &T) -> Result<(), ReportError> {
    let mut text = serde_json::to_string_pretty(summary)
        .map_err(|e| ReportError::Io(std::io::Error::other(e)))?;
    text.push('\n');
    write_text(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tracking_rows() -> Vec<TrackingRow> {
        vec![
            TrackingRow {
                frame: 0,
                t_s: 0.0,
                translation_err_mm: 0.125,
                rotation_err_deg: 0.5,
                inlier_count: 12,
                stale: false,
            },
            TrackingRow {
                frame: 1,
                t_s: 0.1,
                translation_err_mm: 0.25,
                rotation_err_deg: 1.0,
                inlier_count: 11,
                stale: true,
            },
        ]
    }

    #[test]
    fn empty_reports_error_and_leave_no_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        assert!(matches!(write_tracking_csv(&path, &[]), Err(ReportError::Empty)));
        assert!(matches!(write_command_csv(&path, &[]), Err(ReportError::Empty)));
        assert!(matches!(
            write_ncc_csv(&path, &NccSeries::new(true)),
            Err(ReportError::Empty)
        ));
        assert!(matches!(write_tracker_jsonl(&path, &[]), Err(ReportError::Empty)));
        assert!(!path.exists());
    }

    #[test]
    fn tracking_csv_is_byte_stable_and_parses_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        write_tracking_csv(&path, &tracking_rows()).unwrap();
        let first = std::fs::read(&path).unwrap();
        write_tracking_csv(&path, &tracking_rows()).unwrap();
        assert_eq!(first, std::fs::read(&path).unwrap());

        let text = String::from_utf8(first).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "frame,t_s,translation_err_mm,rotation_err_deg,inlier_count,stale"
        );
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(fields, ["0", "0", "0.125", "0.5", "12", "0"]);
    }

    #[test]
    fn command_csv_has_27_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cmd.csv");
        let row = CommandRow {
            t_s: 0.04,
            commanded: [1.0; 12],
            plant: [2.0; 12],
            active_index: 3,
            stale: false,
        };
        write_command_csv(&path, &[row]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        for line in text.lines() {
            assert_eq!(line.split(',').count(), 27, "line: {line}");
        }
    }

    #[test]
    fn tracker_jsonl_round_trips_through_serde() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let row = TrackerLogRow {
            frame: 4,
            t_s: 0.4,
            pose: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.5, -0.25, 0.0],
            inlier_count: 10,
            mean_inlier_residual_mm: 0.21,
            stale: false,
            rois: vec![RoiLogEntry {
                id: 0,
                state: "tracking".into(),
                u: 120.5,
                v: 80.0,
            }],
        };
        write_tracker_jsonl(&path, std::slice::from_ref(&row)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let back: TrackerLogRow = serde_json::from_str(text.trim()).unwrap();
        assert_eq!(back, row);
    }
}
