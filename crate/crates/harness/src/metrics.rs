//! Error samples and their mean/std summaries.

use serde::{Deserialize, Serialize};

/// Mean, population standard deviation, and sample count of one error
/// channel, the "mean ± std" shape the study tables report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

/// Summarizes a sample set; `None` when it is empty.
pub fn summarize(samples: &[f64]) -> Option<Summary> {
    if samples.is_empty() {
        return None;
    }
    let count = samples.len();
    let mean = samples.iter().sum::<f64>() / count as f64;
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / count as f64;
    Some(Summary { mean, std: var.sqrt(), count })
}

/// Pose error of one frame or control tick against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSample {
    pub t_s: f64,
    pub translation_mm: f64,
    pub rotation_deg: f64,
}

/// Time series of pose errors with on-demand summaries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsRecord {
    pub samples: Vec<ErrorSample>,
}

impl MetricsRecord {
    pub fn push(&mut self, t_s: f64, translation_mm: f64, rotation_deg: f64) {
        self.samples.push(ErrorSample { t_s, translation_mm, rotation_deg });
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn translation_summary(&self) -> Option<Summary> {
        let values: Vec<f64> = self.samples.iter().map(|s| s.translation_mm).collect();
        summarize(&values)
    }

    pub fn rotation_summary(&self) -> Option<Summary> {
        let values: Vec<f64> = self.samples.iter().map(|s| s.rotation_deg).collect();
        summarize(&values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_of_known_values() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.count, 4);
        assert!((s.std - 1.25_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn empty_sets_have_no_summary() {
        assert!(summarize(&[]).is_none());
        assert!(MetricsRecord::default().translation_summary().is_none());
    }

    #[test]
    fn constant_series_has_zero_std() {
        let s = summarize(&[0.75; 8]).unwrap();
        assert_eq!(s.mean, 0.75);
        assert_eq!(s.std, 0.0);
    }

    #[test]
    fn record_summaries_split_the_channels() {
        let mut record = MetricsRecord::default();
        record.push(0.0, 1.0, 10.0);
        record.push(0.1, 3.0, 30.0);
        assert_eq!(record.translation_summary().unwrap().mean, 2.0);
        assert_eq!(record.rotation_summary().unwrap().mean, 20.0);
    }
}
