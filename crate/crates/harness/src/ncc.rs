//! Zero-mean normalized cross-correlation between ultrasound slices.

use serde::{Deserialize, Serialize};

use tiscan_core::sim::UltrasoundSlice;

/// Zero-mean NCC of two equally sized slices at zero displacement.
///
/// Returns `(score, flagged)`. When either slice has zero variance the
/// correlation is undefined; that case comes back as `(0.0, true)`, which
/// deliberately covers the all-black lost-contact slice.
pub fn ncc(a: &UltrasoundSlice, b: &UltrasoundSlice) -> (f64, bool) {
    assert_eq!(
        (a.width(), a.height()),
        (b.width(), b.height()),
        "ncc requires equal slice dimensions"
    );
    let n = a.data().len() as f64;
    let mean_a = a.data().iter().map(|&v| v as f64).sum::<f64>() / n;
    let mean_b = b.data().iter().map(|&v| v as f64).sum::<f64>() / n;
    let mut cross = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (&va, &vb) in a.data().iter().zip(b.data()) {
        let da = va as f64 - mean_a;
        let db = vb as f64 - mean_b;
        cross += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a <= 0.0 || var_b <= 0.0 {
        return (0.0, true);
    }
    ((cross / (var_a.sqrt() * var_b.sqrt())).clamp(-1.0, 1.0), false)
}

/// One scored ultrasound frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NccSample {
    pub t_s: f64,
    /// NCC against the run's initial slice, in [-1, 1].
    pub score: f64,
    /// True when the correlation was undefined (lost contact).
    pub flagged: bool,
}

/// NCC time series of one run, tagged by whether motion compensation was
/// active.
#[derive(Debug, Clone, PartialEq)]
pub struct NccSeries {
    pub motion_compensation: bool,
    pub samples: Vec<NccSample>,
}

impl NccSeries {
    pub fn new(motion_compensation: bool) -> Self {
        NccSeries { motion_compensation, samples: Vec::new() }
    }

    pub fn push(&mut self, t_s: f64, score: f64, flagged: bool) {
        self.samples.push(NccSample { t_s, score, flagged });
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean score over all samples. Flagged frames count as their recorded
    /// zero score: losing contact is a failure of the run, not a gap in it.
    pub fn mean(&self) -> Option<f64> {
        if self.samples.is_empty() {
            return None;
        }
        Some(self.samples.iter().map(|s| s.score).sum::<f64>() / self.samples.len() as f64)
    }

    pub fn flagged_count(&self) -> usize {
        self.samples.iter().filter(|s| s.flagged).count()
    }
}
