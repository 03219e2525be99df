//! Patch appearance descriptors for occlusion detection and re-acquisition.
//!
//! Each ROI stores a reference descriptor captured at initialization. A
//! candidate patch matches when its intensity histogram stays close in the
//! Bhattacharyya sense and its gradient-orientation signature stays aligned,
//! so a gray instrument sliding over the patch (different intensities) or an
//! unrelated tissue spot (different micro-structure) both fail.

use crate::grid::GrayImage;
use crate::tracker::RoiRect;

pub const HISTOGRAM_BINS: usize = 32;
/// 2x2 spatial cells times 8 orientation bins.
pub const SIGNATURE_BINS: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct AppearanceDescriptor {
    /// Intensity histogram over the patch, normalized to sum 1.
    pub intensity_histogram: [f32; HISTOGRAM_BINS],
    /// Gradient-orientation energy per spatial cell, L2-normalized.
    pub keypoint_signature: [f32; SIGNATURE_BINS],
}

impl AppearanceDescriptor {
    /// Descriptor of a patch with no texture at middle gray; useful as a
    /// placeholder in tests.
    pub fn flat() -> Self {
        let mut hist = [0.0f32; HISTOGRAM_BINS];
        hist[HISTOGRAM_BINS / 2] = 1.0;
        AppearanceDescriptor { intensity_histogram: hist, keypoint_signature: [0.0; SIGNATURE_BINS] }
    }
}

/// Computes the descriptor for the patch under `rect`, or `None` when the
/// rounded rectangle does not lie fully inside the image.
pub fn describe_patch(gray: &GrayImage, rect: &RoiRect) -> Option<AppearanceDescriptor> {
    let (u0, v0) = rect.top_left_rounded();
    let (w, h) = (rect.width as i64, rect.height as i64);
    if u0 < 0 || v0 < 0 || w < 2 || h < 2 {
        return None;
    }
    let (u0, v0, w, h) = (u0 as usize, v0 as usize, w as usize, h as usize);
    if u0 + w > gray.width() || v0 + h > gray.height() {
        return None;
    }

    let mut hist = [0.0f32; HISTOGRAM_BINS];
    for v in v0..v0 + h {
        for u in u0..u0 + w {
            let value = gray[(u, v)].clamp(0.0, 1.0);
            let bin = ((value * HISTOGRAM_BINS as f32) as usize).min(HISTOGRAM_BINS - 1);
            hist[bin] += 1.0;
        }
    }
    let total = (w * h) as f32;
    for bin in hist.iter_mut() {
        *bin /= total;
    }

    let mut signature = [0.0f32; SIGNATURE_BINS];
    for v in v0 + 1..v0 + h - 1 {
        for u in u0 + 1..u0 + w - 1 {
            let gx = gray[(u + 1, v)] - gray[(u - 1, v)];
            let gy = gray[(u, v + 1)] - gray[(u, v - 1)];
            let magnitude = (gx * gx + gy * gy).sqrt();
            if magnitude == 0.0 {
                continue;
            }
            let angle = (gy as f64).atan2(gx as f64);
            let orientation_bin = (((angle + std::f64::consts::PI)
                / (2.0 * std::f64::consts::PI)
                * 8.0) as usize)
                .min(7);
            let cell_u = usize::from(u - u0 >= w / 2);
            let cell_v = usize::from(v - v0 >= h / 2);
            signature[(cell_v * 2 + cell_u) * 8 + orientation_bin] += magnitude;
        }
    }
    let norm = signature.iter().map(|x| x * x).sum::<f32>().sqrt();
    if norm > 0.0 {
        for x in signature.iter_mut() {
            *x /= norm;
        }
    }

    Some(AppearanceDescriptor { intensity_histogram: hist, keypoint_signature: signature })
}

/// Bhattacharyya coefficient between two normalized histograms, in `[0, 1]`.
pub fn bhattacharyya(a: &[f32; HISTOGRAM_BINS], b: &[f32; HISTOGRAM_BINS]) -> f64 {
    a.iter().zip(b.iter()).map(|(&p, &q)| ((p as f64) * (q as f64)).sqrt()).sum()
}

/// Cosine similarity between two signatures. Both inputs are L2-normalized
/// at construction, so this is a plain dot product; a zero signature (flat
/// patch) yields 0.
pub fn signature_similarity(a: &[f32; SIGNATURE_BINS], b: &[f32; SIGNATURE_BINS]) -> f64 {
    a.iter().zip(b.iter()).map(|(&p, &q)| p as f64 * q as f64).sum()
}

/// Joint appearance test used by both the occlusion check and ROI
/// re-acquisition: the histogram must stay above `histogram_threshold` and
/// the signature above `signature_gate`.
pub fn appearance_matches(
    candidate: &AppearanceDescriptor,
    reference: &AppearanceDescriptor,
    histogram_threshold: f64,
    signature_gate: f64,
) -> bool {
    bhattacharyya(&candidate.intensity_histogram, &reference.intensity_histogram)
        >= histogram_threshold
        && signature_similarity(&candidate.keypoint_signature, &reference.keypoint_signature)
            >= signature_gate
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn textured_image(seed: u64) -> GrayImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f32> = (0..60 * 50).map(|_| rng.random_range(0.2..0.8)).collect();
        Grid::from_fn(60, 50, |u, v| values[v * 60 + u])
    }

    fn rect(u: f64, v: f64) -> RoiRect {
        RoiRect { u, v, width: 20, height: 25 }
    }

    #[test]
    fn identical_patches_match_perfectly() {
        let image = textured_image(5);
        let d = describe_patch(&image, &rect(10.0, 10.0)).unwrap();
        assert!((bhattacharyya(&d.intensity_histogram, &d.intensity_histogram) - 1.0).abs() < 1e-5);
        assert!((signature_similarity(&d.keypoint_signature, &d.keypoint_signature) - 1.0).abs() < 1e-5);
        assert!(appearance_matches(&d, &d, 0.8, 0.7));
    }

    #[test]
    fn gray_flat_patch_does_not_match_texture() {
        let image = textured_image(6);
        let reference = describe_patch(&image, &rect(10.0, 10.0)).unwrap();
        let flat = Grid::filled(60, 50, 0.5f32);
        let candidate = describe_patch(&flat, &rect(10.0, 10.0)).unwrap();
        assert!(!appearance_matches(&candidate, &reference, 0.8, 0.7));
        assert_eq!(signature_similarity(&candidate.keypoint_signature, &reference.keypoint_signature), 0.0);
    }

    #[test]
    fn unrelated_texture_fails_the_signature_gate() {
        let a = textured_image(7);
        let b = textured_image(8);
        let da = describe_patch(&a, &rect(10.0, 10.0)).unwrap();
        let db = describe_patch(&b, &rect(10.0, 10.0)).unwrap();
        // Independent noise keeps similar intensity statistics but
        // uncorrelated structure; random signatures still share energy, so
        // the gate only needs to sit clearly below the matched case.
        let cross = signature_similarity(&da.keypoint_signature, &db.keypoint_signature);
        let matched = signature_similarity(&da.keypoint_signature, &da.keypoint_signature);
        assert!(matched - cross > 0.05, "matched {matched} vs cross {cross}");
    }

    #[test]
    fn brightness_shift_lowers_the_histogram_score() {
        let image = textured_image(9);
        let reference = describe_patch(&image, &rect(10.0, 10.0)).unwrap();
        let darker = Grid::from_fn(60, 50, |u, v| (image[(u, v)] - 0.35).max(0.0));
        let candidate = describe_patch(&darker, &rect(10.0, 10.0)).unwrap();
        let score =
            bhattacharyya(&candidate.intensity_histogram, &reference.intensity_histogram);
        assert!(score < 0.5, "expected large histogram shift, got {score}");
    }

    #[test]
    fn out_of_bounds_rect_yields_none() {
        let image = textured_image(10);
        assert!(describe_patch(&image, &rect(-1.0, 0.0)).is_none());
        assert!(describe_patch(&image, &rect(45.0, 10.0)).is_none());
        assert!(describe_patch(&image, &rect(10.0, 30.0)).is_none());
    }

    #[test]
    fn histogram_sums_to_one() {
        let image = textured_image(11);
        let d = describe_patch(&image, &rect(5.0, 5.0)).unwrap();
        let sum: f32 = d.intensity_histogram.iter().sum();
        assert!((sum - 1.0).abs() < 1e-4);
    }
}
