//! Latest-value hand-off of tissue pose estimates between control loops.
//!
//! The outer loop overwrites the slot at its own cadence and the inner loop
//! reads whatever is there; neither side ever waits for the other to produce
//! or consume a value.

use std::sync::Mutex;

use crate::tracker::TissuePoseEstimate;

use super::Stamped;

/// Single-writer, single-reader cell holding the most recent tissue pose
/// estimate.
///
/// [`publish`](Self::publish) replaces the stored value unconditionally and
/// [`latest`](Self::latest) copies it out, so a slow reader only ever skips
/// intermediate estimates, it never backs up the writer.
#[derive(Debug, Default)]
pub struct EstimateSnapshot {
    slot: Mutex<Option<Stamped<TissuePoseEstimate>>>,
}

impl EstimateSnapshot {
    /// Creates an empty cell; [`latest`](Self::latest) returns `None` until
    /// the first publish.
    pub fn new() -> Self {
        EstimateSnapshot { slot: Mutex::new(None) }
    }

    /// Stores `estimate` with the publication time `stamp_s`, discarding any
    /// previous value.
    pub fn publish(&self, estimate: TissuePoseEstimate, stamp_s: f64) {
        let mut slot = self.slot.lock().expect("estimate snapshot lock poisoned");
        *slot = Some(Stamped { value: estimate, stamp_s });
    }

    /// Copies out the most recently published estimate, if any.
    pub fn latest(&self) -> Option<Stamped<TissuePoseEstimate>> {
        *self.slot.lock().expect("estimate snapshot lock poisoned")
    }
}
