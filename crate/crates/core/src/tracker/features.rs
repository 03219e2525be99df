//! ROI placement on textured tissue.
//!
//! Candidate windows are scored by the smaller eigenvalue of the gradient
//! structure tensor (strong in both directions means the window is
//! trackable), computed in constant time per window from integral images.
//! The score is damped when the gradient mass sits off-center so that the
//! greedy pick lands windows on salient texture rather than drifting to the
//! edge of a feature. Windows must lie fully on segmented tissue and have a
//! valid depth at their center.

use crate::cloud::OrganizedPointCloud;
use crate::grid::GrayImage;
use crate::tracker::{
    describe_patch, Roi, RoiRect, RoiState, SegmentationMask, TrackerConfig, TrackerError,
};

/// Summed-area table with one row and column of zero padding, so rectangle
/// sums need no boundary special cases.
struct IntegralImage {
    width: usize,
    data: Vec<f64>,
}

impl IntegralImage {
    fn build(width: usize, height: usize, mut value: impl FnMut(usize, usize) -> f64) -> Self {
        let w = width + 1;
        let mut data = vec![0.0f64; w * (height + 1)];
        for v in 0..height {
            let mut row_sum = 0.0;
            for u in 0..width {
                row_sum += value(u, v);
                data[(v + 1) * w + (u + 1)] = data[v * w + (u + 1)] + row_sum;
            }
        }
        IntegralImage { width: w, data }
    }

    /// Sum over `[u0, u0 + w) x [v0, v0 + h)`.
    fn rect_sum(&self, u0: usize, v0: usize, w: usize, h: usize) -> f64 {
        let (u1, v1) = (u0 + w, v0 + h);
        self.data[v1 * self.width + u1] + self.data[v0 * self.width + u0]
            - self.data[v0 * self.width + u1]
            - self.data[v1 * self.width + u0]
    }
}

struct WindowScorer {
    gxx: IntegralImage,
    gyy: IntegralImage,
    gxy: IntegralImage,
    mag: IntegralImage,
    mag_u: IntegralImage,
    mag_v: IntegralImage,
    tissue: IntegralImage,
}

impl WindowScorer {
    fn build(gray: &GrayImage, mask: &SegmentationMask) -> Self {
        let (w, h) = (gray.width(), gray.height());
        let grad = |u: usize, v: usize| -> (f64, f64) {
            if u == 0 || v == 0 || u + 1 >= w || v + 1 >= h {
                return (0.0, 0.0);
            }
            let gx = (gray[(u + 1, v)] - gray[(u - 1, v)]) as f64 * 0.5;
            let gy = (gray[(u, v + 1)] - gray[(u, v - 1)]) as f64 * 0.5;
            (gx, gy)
        };
        WindowScorer {
            gxx: IntegralImage::build(w, h, |u, v| {
                let (gx, _) = grad(u, v);
                gx * gx
            }),
            gyy: IntegralImage::build(w, h, |u, v| {
                let (_, gy) = grad(u, v);
                gy * gy
            }),
            gxy: IntegralImage::build(w, h, |u, v| {
                let (gx, gy) = grad(u, v);
                gx * gy
            }),
            mag: IntegralImage::build(w, h, |u, v| {
                let (gx, gy) = grad(u, v);
                (gx * gx + gy * gy).sqrt()
            }),
            mag_u: IntegralImage::build(w, h, |u, v| {
                let (gx, gy) = grad(u, v);
                (gx * gx + gy * gy).sqrt() * u as f64
            }),
            mag_v: IntegralImage::build(w, h, |u, v| {
                let (gx, gy) = grad(u, v);
                (gx * gx + gy * gy).sqrt() * v as f64
            }),
            tissue: IntegralImage::build(w, h, |u, v| f64::from(mask.is_tissue(u, v))),
        }
    }

    fn all_tissue(&self, u0: usize, v0: usize, w: usize, h: usize) -> bool {
        self.tissue.rect_sum(u0, v0, w, h) as u64 == (w * h) as u64
    }

    /// Centering-damped minimum eigenvalue of the window's structure tensor.
    fn score(&self, u0: usize, v0: usize, w: usize, h: usize) -> f64 {
        let area = (w * h) as f64;
        let sxx = self.gxx.rect_sum(u0, v0, w, h) / area;
        let syy = self.gyy.rect_sum(u0, v0, w, h) / area;
        let sxy = self.gxy.rect_sum(u0, v0, w, h) / area;
        let half_trace = 0.5 * (sxx + syy);
        let min_eig = half_trace - (0.25 * (sxx - syy).powi(2) + sxy * sxy).sqrt();

        let mag = self.mag.rect_sum(u0, v0, w, h);
        if mag <= 0.0 {
            return 0.0;
        }
        let centroid_u = self.mag_u.rect_sum(u0, v0, w, h) / mag;
        let centroid_v = self.mag_v.rect_sum(u0, v0, w, h) / mag;
        let center_u = u0 as f64 + (w as f64 - 1.0) / 2.0;
        let center_v = v0 as f64 + (h as f64 - 1.0) / 2.0;
        let off_center_sq =
            (centroid_u - center_u).powi(2) + (centroid_v - center_v).powi(2);
        min_eig / (1.0 + off_center_sq / 9.0)
    }
}

fn rects_overlap(a: &RoiRect, b: &RoiRect) -> bool {
    let (au, av) = (a.u, a.v);
    let (bu, bv) = (b.u, b.v);
    au < bu + b.width as f64
        && bu < au + a.width as f64
        && av < bv + b.height as f64
        && bv < av + a.height as f64
}

/// Selects up to `config.roi_count` non-overlapping tracking windows.
///
/// Candidates are ranked by texture score and taken greedily; each accepted
/// window must be fully on tissue, fully inside the image, carry a valid
/// depth at its center pixel, and not overlap an earlier pick. Returns
/// [`TrackerError::InsufficientTexture`] when fewer windows qualify than
/// requested.
pub fn init_rois(
    gray: &GrayImage,
    mask: &SegmentationMask,
    cloud: &OrganizedPointCloud,
    config: &TrackerConfig,
) -> Result<Vec<Roi>, TrackerError> {
    let (img_w, img_h) = (gray.width(), gray.height());
    let (w, h) = (config.roi_width as usize, config.roi_height as usize);
    if w + 2 > img_w || h + 2 > img_h {
        return Err(TrackerError::InsufficientTexture { found: 0, needed: config.roi_count });
    }
    let scorer = WindowScorer::build(gray, mask);

    // Gradients at the outermost pixel ring are zero-padded, so windows stay
    // one pixel inside the image.
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for v0 in 1..img_h - h - 1 {
        for u0 in 1..img_w - w - 1 {
            if !scorer.all_tissue(u0, v0, w, h) {
                continue;
            }
            let score = scorer.score(u0, v0, w, h);
            if score > config.min_corner_score {
                candidates.push((score, v0, u0));
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
    });

    let mut rois: Vec<Roi> = Vec::new();
    for &(_score, v0, u0) in &candidates {
        if rois.len() == config.roi_count {
            break;
        }
        let rect = RoiRect { u: u0 as f64, v: v0 as f64, width: config.roi_width, height: config.roi_height };
        if rois.iter().any(|r| rects_overlap(&r.rect, &rect)) {
            continue;
        }
        let (cu, cv) = rect.center();
        let point = match cloud.point_at_pixel(cu, cv) {
            Ok(p) => p,
            Err(_) => continue,
        };
        let appearance = match describe_patch(gray, &rect) {
            Some(d) => d,
            None => continue,
        };
        rois.push(Roi {
            id: rois.len() as u32,
            rect,
            state: RoiState::Tracking,
            reference_appearance: appearance,
            reference_point: point,
            current_point: Some(point),
        });
    }

    if rois.len() < config.roi_count {
        return Err(TrackerError::InsufficientTexture {
            found: rois.len(),
            needed: config.roi_count,
        });
    }
    Ok(rois)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{hsv_to_rgb_f32, to_gray, Grid};
    use crate::tracker::segment_tissue;

    fn tissue_pixel(value: f64) -> [u8; 3] {
        let [r, g, b] = hsv_to_rgb_f32(14.0, 0.55, value);
        [(r * 255.0).round() as u8, (g * 255.0).round() as u8, (b * 255.0).round() as u8]
    }

    /// Tissue-colored image with dark dots on a regular lattice.
    fn dotted_scene(dot_spacing: usize) -> (GrayImage, SegmentationMask, OrganizedPointCloud) {
        let (w, h) = (200, 160);
        let image = Grid::from_fn(w, h, |u, v| {
            let on_dot = u % dot_spacing < 3 && v % dot_spacing < 3 && u > 4 && v > 4;
            tissue_pixel(if on_dot { 0.33 } else { 0.55 })
        });
        let cfg = TrackerConfig::default();
        let mask = segment_tissue(&image, &cfg.tissue_color);
        let mut cloud = OrganizedPointCloud::new(w, h);
        for v in 0..h {
            for u in 0..w {
                cloud.set(u, v, nalgebra::Vector3::new(u as f64 * 0.2, v as f64 * 0.2, 150.0));
            }
        }
        (to_gray(&image), mask, cloud)
    }

    #[test]
    fn picks_requested_count_of_distinct_windows() {
        let (gray, mask, cloud) = dotted_scene(24);
        let cfg = TrackerConfig::default();
        let rois = init_rois(&gray, &mask, &cloud, &cfg).unwrap();
        assert_eq!(rois.len(), cfg.roi_count);
        for (i, a) in rois.iter().enumerate() {
            assert_eq!(a.id, i as u32);
            assert_eq!(a.state, RoiState::Tracking);
            assert_eq!(a.current_point, Some(a.reference_point));
            for b in &rois[i + 1..] {
                assert!(!rects_overlap(&a.rect, &b.rect), "ROIs {} and {} overlap", a.id, b.id);
            }
        }
    }

    #[test]
    fn windows_center_on_the_dots() {
        let (gray, mask, cloud) = dotted_scene(40);
        let cfg = TrackerConfig { roi_count: 6, ..TrackerConfig::default() };
        let rois = init_rois(&gray, &mask, &cloud, &cfg).unwrap();
        for roi in &rois {
            let (cu, cv) = roi.rect.center();
            // Dots occupy [k*40, k*40 + 3); their centers sit at k*40 + 1.
            let du = (cu - 1.0).rem_euclid(40.0).min(40.0 - (cu - 1.0).rem_euclid(40.0));
            let dv = (cv - 1.0).rem_euclid(40.0).min(40.0 - (cv - 1.0).rem_euclid(40.0));
            let dist = (du * du + dv * dv).sqrt();
            assert!(dist <= 3.0, "ROI {} center ({cu}, {cv}) is {dist:.2}px from a dot", roi.id);
        }
    }

    #[test]
    fn flat_image_has_insufficient_texture() {
        let (w, h) = (200usize, 160usize);
        let image = Grid::filled(w, h, tissue_pixel(0.55));
        let cfg = TrackerConfig::default();
        let mask = segment_tissue(&image, &cfg.tissue_color);
        let cloud = OrganizedPointCloud::new(w, h);
        let result = init_rois(&to_gray(&image), &mask, &cloud, &cfg);
        assert!(matches!(result, Err(TrackerError::InsufficientTexture { found: 0, .. })));
    }

    #[test]
    fn windows_avoid_non_tissue_regions() {
        let (gray, mask, cloud) = {
            let (w, h) = (200, 160);
            let image = Grid::from_fn(w, h, |u, v| {
                if u >= 100 {
                    [80u8, 80, 85]
                } else {
                    let on_dot = u % 18 < 3 && v % 18 < 3 && u > 4 && v > 4;
                    tissue_pixel(if on_dot { 0.33 } else { 0.55 })
                }
            });
            let cfg = TrackerConfig::default();
            let mask = segment_tissue(&image, &cfg.tissue_color);
            let mut cloud = OrganizedPointCloud::new(w, h);
            for v in 0..h {
                for u in 0..w {
                    cloud.set(u, v, nalgebra::Vector3::new(0.0, 0.0, 150.0));
                }
            }
            (to_gray(&image), mask, cloud)
        };
        let cfg = TrackerConfig { roi_count: 8, ..TrackerConfig::default() };
        let rois = init_rois(&gray, &mask, &cloud, &cfg).unwrap();
        for roi in &rois {
            assert!(
                roi.rect.u + roi.rect.width as f64 <= 100.0,
                "ROI {} extends into the gray region",
                roi.id
            );
        }
    }

    #[test]
    fn centers_require_valid_depth() {
        let (gray, mask, mut cloud) = dotted_scene(24);
        // Invalidate depth on the left half; windows must shift right.
        for v in 0..cloud.height() {
            for u in 0..cloud.width() / 2 {
                cloud.set_invalid(u, v);
            }
        }
        let cfg = TrackerConfig { roi_count: 4, ..TrackerConfig::default() };
        let rois = init_rois(&gray, &mask, &cloud, &cfg).unwrap();
        for roi in &rois {
            let (cu, _) = roi.rect.center();
            assert!(cu >= (cloud.width() / 2) as f64 - 1.0);
        }
    }
}
