//! Frame-to-frame ROI tracking by normalized cross-correlation.
//!
//! Each tracking ROI carries its rectangle forward by matching the patch
//! from the previous gray frame against a bounded search window in the
//! current frame. The integer-pixel peak is refined to subpixel resolution
//! with a one-dimensional parabola fit per axis.

use crate::cloud::OrganizedPointCloud;
use crate::grid::GrayImage;
use crate::tracker::{Roi, RoiState, TrackerConfig};

/// Result of matching one patch: displacement in pixels and the correlation
/// score at the (integer) peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchMatch {
    pub du: f64,
    pub dv: f64,
    pub score: f64,
}

/// Zero-mean normalized cross-correlation of two equal-length patches, or
/// `None` when either patch has (numerically) zero variance.
pub fn zero_mean_ncc(a: &[f32], b: &[f32]) -> Option<f64> {
    assert_eq!(a.len(), b.len(), "patch sizes must match");
    let n = a.len() as f64;
    if n == 0.0 {
        return None;
    }
    let mean_a = a.iter().map(|&x| x as f64).sum::<f64>() / n;
    let mean_b = b.iter().map(|&x| x as f64).sum::<f64>() / n;
    let mut num = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (&x, &y) in a.iter().zip(b.iter()) {
        let da = x as f64 - mean_a;
        let db = y as f64 - mean_b;
        num += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a <= 1e-12 || var_b <= 1e-12 {
        return None;
    }
    Some(num / (var_a * var_b).sqrt())
}

/// Copies the `w x h` patch at integer top-left `(u0, v0)` into a flat
/// row-major buffer, or `None` when it leaves the image.
pub fn extract_patch(gray: &GrayImage, u0: i64, v0: i64, w: usize, h: usize) -> Option<Vec<f32>> {
    if u0 < 0 || v0 < 0 {
        return None;
    }
    let (u0, v0) = (u0 as usize, v0 as usize);
    if u0 + w > gray.width() || v0 + h > gray.height() {
        return None;
    }
    let mut patch = Vec::with_capacity(w * h);
    for v in v0..v0 + h {
        for u in u0..u0 + w {
            patch.push(gray[(u, v)]);
        }
    }
    Some(patch)
}

/// One-dimensional parabola refinement of a correlation peak. Given scores
/// at offsets -1, 0, +1 around the maximum, returns the subpixel offset of
/// the fitted vertex, clamped to half a pixel.
fn parabola_offset(left: f64, center: f64, right: f64) -> f64 {
    let curvature = left + right - 2.0 * center;
    if curvature.abs() < 1e-12 {
        return 0.0;
    }
    ((left - right) / (2.0 * curvature)).clamp(-0.5, 0.5)
}

fn sample_bilinear(image: &GrayImage, u: f64, v: f64) -> f64 {
    let u0 = u.floor();
    let v0 = v.floor();
    let fu = u - u0;
    let fv = v - v0;
    let (u0, v0) = (u0 as usize, v0 as usize);
    let u1 = if fu > 0.0 { u0 + 1 } else { u0 };
    let v1 = if fv > 0.0 { v0 + 1 } else { v0 };
    let a = image[(u0, v0)] as f64;
    let b = image[(u1, v0)] as f64;
    let c = image[(u0, v1)] as f64;
    let d = image[(u1, v1)] as f64;
    (a * (1.0 - fu) + b * fu) * (1.0 - fv) + (c * (1.0 - fu) + d * fu) * fv
}

/// Zero-mean NCC of the centered template against the current frame
/// resampled at fractional window origin `(u, v)`. `None` when the window
/// (including the extra row/column bilinear sampling reads) leaves the
/// image or the resampled patch has no variance.
fn ncc_fractional(
    centered: &[f64],
    norm_t: f64,
    current: &GrayImage,
    u: f64,
    v: f64,
    w: usize,
    h: usize,
) -> Option<f64> {
    let max_u = u + (w - 1) as f64;
    let max_v = v + (h - 1) as f64;
    if u < 0.0
        || v < 0.0
        || max_u > (current.width() - 1) as f64
        || max_v > (current.height() - 1) as f64
    {
        return None;
    }
    let n = (w * h) as f64;
    let mut dot = 0.0;
    let mut sum_c = 0.0;
    let mut sum_c2 = 0.0;
    let mut k = 0;
    for dv in 0..h {
        for du in 0..w {
            let c = sample_bilinear(current, u + du as f64, v + dv as f64);
            dot += centered[k] * c;
            sum_c += c;
            sum_c2 += c * c;
            k += 1;
        }
    }
    let var_c = sum_c2 - sum_c * sum_c / n;
    if var_c <= 1e-12 {
        return None;
    }
    Some(dot / (norm_t * var_c.sqrt()))
}

/// Pulls a peak estimate off the unit correlation grid by re-fitting
/// parabolas to NCC scores sampled at fractional displacements, halving
/// the sample spacing each round. Unit-grid parabola fits carry a
/// texture-dependent bias of up to ~0.15 px toward the nearest integer;
/// the re-fits shrink that to well under 0.02 px. Returns the refined
/// displacement and the score evaluated there, or `None` near the image
/// border or on a degenerate surface, in which case the caller keeps the
/// grid estimate.
fn refine_fractional(
    centered: &[f64],
    norm_t: f64,
    current: &GrayImage,
    u0: i64,
    v0: i64,
    w: usize,
    h: usize,
    seed_du: f64,
    seed_dv: f64,
) -> Option<(f64, f64, f64)> {
    let eval = |du: f64, dv: f64| {
        ncc_fractional(centered, norm_t, current, u0 as f64 + du, v0 as f64 + dv, w, h)
    };
    let mut du = seed_du;
    let mut dv = seed_dv;
    for step in [0.5, 0.25, 0.125] {
        let c = eval(du, dv)?;
        let l = eval(du - step, dv)?;
        let r = eval(du + step, dv)?;
        du += step * parabola_offset(l, c, r);
        let c = eval(du, dv)?;
        let below = eval(du, dv - step)?;
        let above = eval(du, dv + step)?;
        dv += step * parabola_offset(below, c, above);
    }
    let score = eval(du, dv)?;
    Some((du, dv, score))
}

/// Matches `template` (taken at integer top-left `(u0, v0)` in the previous
/// frame) against the current frame over displacements up to
/// `search_radius` pixels per axis. Returns `None` when no candidate window
/// produced a defined correlation score.
pub fn match_patch(
    template: &[f32],
    current: &GrayImage,
    u0: i64,
    v0: i64,
    w: usize,
    h: usize,
    search_radius: i64,
) -> Option<PatchMatch> {
    let n = (w * h) as f64;
    let mean_t = template.iter().map(|&x| x as f64).sum::<f64>() / n;
    let centered: Vec<f64> = template.iter().map(|&x| x as f64 - mean_t).collect();
    let norm_t = centered.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm_t <= 1e-6 {
        return None;
    }

    let side = (2 * search_radius + 1) as usize;
    let mut scores = vec![f64::NEG_INFINITY; side * side];
    let mut best: Option<(f64, usize, usize)> = None;
    for (j, dv) in (-search_radius..=search_radius).enumerate() {
        for (i, du) in (-search_radius..=search_radius).enumerate() {
            let (cu, cv) = (u0 + du, v0 + dv);
            if cu < 0
                || cv < 0
                || cu as usize + w > current.width()
                || cv as usize + h > current.height()
            {
                continue;
            }
            let (cu, cv) = (cu as usize, cv as usize);
            // The template is zero-mean, so the cross term with the
            // candidate mean vanishes and one pass suffices.
            let mut dot = 0.0;
            let mut sum_c = 0.0;
            let mut sum_c2 = 0.0;
            let mut k = 0;
            for v in cv..cv + h {
                for u in cu..cu + w {
                    let c = current[(u, v)] as f64;
                    dot += centered[k] * c;
                    sum_c += c;
                    sum_c2 += c * c;
                    k += 1;
                }
            }
            let var_c = sum_c2 - sum_c * sum_c / n;
            if var_c <= 1e-12 {
                continue;
            }
            let score = dot / (norm_t * var_c.sqrt());
            scores[j * side + i] = score;
            let replace = match best {
                None => true,
                Some((s, _, _)) => score > s,
            };
            if replace {
                best = Some((score, i, j));
            }
        }
    }

    let (score, i, j) = best?;
    let at = |i: usize, j: usize| scores[j * side + i];
    let du_sub = if i > 0 && i + 1 < side && at(i - 1, j).is_finite() && at(i + 1, j).is_finite() {
        parabola_offset(at(i - 1, j), score, at(i + 1, j))
    } else {
        0.0
    };
    let dv_sub = if j > 0 && j + 1 < side && at(i, j - 1).is_finite() && at(i, j + 1).is_finite() {
        parabola_offset(at(i, j - 1), score, at(i, j + 1))
    } else {
        0.0
    };
    let du = (i as i64 - search_radius) as f64 + du_sub;
    let dv = (j as i64 - search_radius) as f64 + dv_sub;
    match refine_fractional(&centered, norm_t, current, u0, v0, w, h, du, dv) {
        Some((rdu, rdv, rscore)) if rscore >= score => Some(PatchMatch {
            du: rdu,
            dv: rdv,
            score: rscore,
        }),
        // The refit sampled the actual correlation surface and still could
        // not beat the integer peak, so the peak really is on the grid and
        // the unverified parabola vertex would only pull away from it.
        Some(_) => Some(PatchMatch {
            du: (i as i64 - search_radius) as f64,
            dv: (j as i64 - search_radius) as f64,
            score,
        }),
        None => Some(PatchMatch { du, dv, score }),
    }
}

/// Advances every tracking ROI from the previous frame to the current one.
///
/// An ROI whose match score falls below the configured floor (or whose
/// patch cannot be matched at all) is stopped in place; otherwise its
/// rectangle moves by the matched displacement, clamped to the image, and
/// its current 3D point is refreshed from the cloud (or cleared when the
/// depth there is invalid).
pub fn track_rois(
    previous: &GrayImage,
    current: &GrayImage,
    cloud: &OrganizedPointCloud,
    rois: &mut [Roi],
    config: &TrackerConfig,
) {
    for roi in rois.iter_mut() {
        if roi.state != RoiState::Tracking {
            continue;
        }
        let (u0, v0) = roi.rect.top_left_rounded();
        let (w, h) = (roi.rect.width as usize, roi.rect.height as usize);
        let template = match extract_patch(previous, u0, v0, w, h) {
            Some(t) => t,
            None => {
                roi.stop();
                continue;
            }
        };
        let found = match_patch(
            &template,
            current,
            u0,
            v0,
            w,
            h,
            config.search_window_px as i64,
        );
        let m = match found {
            Some(m) if m.score >= config.track_score_floor => m,
            _ => {
                roi.stop();
                continue;
            }
        };
        roi.rect.u = (roi.rect.u + m.du)
            .clamp(0.0, (current.width() - w) as f64);
        roi.rect.v = (roi.rect.v + m.dv)
            .clamp(0.0, (current.height() - h) as f64);
        let (cu, cv) = roi.rect.center();
        roi.current_point = cloud.point_at_pixel(cu, cv).ok();
    }
}
