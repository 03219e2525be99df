//! Color-based tissue segmentation.
//!
//! Tissue in the camera image sits in a narrow hue band, so a per-pixel HSV
//! box test separates it from gray instruments and the dark background. The
//! resulting mask drives ROI placement and occlusion checks.

use crate::grid::{rgb_to_hsv, ColorImage, Grid};
use crate::tracker::RoiRect;

/// Inclusive HSV box, hue in degrees and saturation/value in `[0, 1]`.
///
/// The hue interval may wrap through 0 (e.g. `(350, 20)` covers reds on both
/// sides of the wrap point).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsvRange {
    pub hue_deg: (f64, f64),
    pub saturation: (f64, f64),
    pub value: (f64, f64),
}

impl HsvRange {
    pub fn contains(&self, h_deg: f64, s: f64, v: f64) -> bool {
        let (h_lo, h_hi) = self.hue_deg;
        let hue_ok = if h_lo <= h_hi {
            h_deg >= h_lo && h_deg <= h_hi
        } else {
            h_deg >= h_lo || h_deg <= h_hi
        };
        hue_ok
            && s >= self.saturation.0
            && s <= self.saturation.1
            && v >= self.value.0
            && v <= self.value.1
    }
}

/// Per-pixel tissue mask with ROI-level coverage queries.
#[derive(Debug, Clone)]
pub struct SegmentationMask {
    mask: Grid<bool>,
}

impl SegmentationMask {
    pub fn width(&self) -> usize {
        self.mask.width()
    }

    pub fn height(&self) -> usize {
        self.mask.height()
    }

    pub fn is_tissue(&self, u: usize, v: usize) -> bool {
        *self.mask.get(u, v).unwrap_or(&false)
    }

    /// Fraction of the rectangle's pixels classified as tissue. Pixels
    /// outside the image count as non-tissue; an empty intersection gives 0.
    pub fn tissue_fraction(&self, rect: &RoiRect) -> f64 {
        let (u0, v0) = rect.top_left_rounded();
        let total = (rect.width as u64 * rect.height as u64) as f64;
        if total == 0.0 {
            return 0.0;
        }
        let mut hits = 0u64;
        for dv in 0..rect.height as i64 {
            for du in 0..rect.width as i64 {
                let (u, v) = (u0 + du, v0 + dv);
                if u >= 0
                    && v >= 0
                    && (u as usize) < self.width()
                    && (v as usize) < self.height()
                    && self.mask[(u as usize, v as usize)]
                {
                    hits += 1;
                }
            }
        }
        hits as f64 / total
    }
}

/// Classifies every pixel of `image` against the tissue color range.
pub fn segment_tissue(image: &ColorImage, range: &HsvRange) -> SegmentationMask {
    let mask = Grid::from_fn(image.width(), image.height(), |u, v| {
        let (h, s, val) = rgb_to_hsv(image[(u, v)]);
        range.contains(h, s, val)
    });
    SegmentationMask { mask }
}
