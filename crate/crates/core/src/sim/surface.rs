//! Synthetic tissue phantom: a smooth heightfield patch with salient color
//! texture and an internal scalar volume.
//!
//! The surface mimics what the tracker needs from real tissue: a gently
//! curved shape, a tissue-colored base with value mottling fine enough for
//! patch correlation, dark blobs as salient landmarks, and a 3D texture
//! volume that ultrasound slices can sample. Everything derives from
//! counter-based lattice noise, so a surface is fully reproducible from its
//! config.

use nalgebra::Vector3;

use crate::grid::hsv_to_rgb_f32;

/// SplitMix64 finalizer; decorrelates consecutive lattice coordinates.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic lattice value in [-1, 1] for integer coordinates.
fn lattice_value(seed: u64, ix: i64, iy: i64, iz: i64) -> f64 {
    let h = mix64(seed ^ mix64(ix as u64 ^ mix64(iy as u64 ^ mix64(iz as u64 ^ 0xA5A5_A5A5))));
    ((h >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Smoothly interpolated 2D lattice noise with values in [-1, 1].
#[derive(Debug, Clone, Copy)]
pub struct ValueNoise2 {
    seed: u64,
    scale_mm: f64,
}

impl ValueNoise2 {
    pub fn new(seed: u64, scale_mm: f64) -> Self {
        assert!(scale_mm > 0.0, "noise scale must be positive");
        ValueNoise2 { seed, scale_mm }
    }

    pub fn sample(&self, x_mm: f64, y_mm: f64) -> f64 {
        let x = x_mm / self.scale_mm;
        let y = y_mm / self.scale_mm;
        let (ix, iy) = (x.floor(), y.floor());
        let (fx, fy) = (smoothstep(x - ix), smoothstep(y - iy));
        let (ix, iy) = (ix as i64, iy as i64);
        let v = |dx: i64, dy: i64| lattice_value(self.seed, ix + dx, iy + dy, 0);
        let top = v(0, 0) * (1.0 - fx) + v(1, 0) * fx;
        let bottom = v(0, 1) * (1.0 - fx) + v(1, 1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

/// Smoothly interpolated 3D lattice noise with values in [-1, 1].
#[derive(Debug, Clone, Copy)]
pub struct ValueNoise3 {
    seed: u64,
    scale_mm: f64,
}

impl ValueNoise3 {
    pub fn new(seed: u64, scale_mm: f64) -> Self {
        assert!(scale_mm > 0.0, "noise scale must be positive");
        ValueNoise3 { seed, scale_mm }
    }

    pub fn sample(&self, p_mm: &Vector3<f64>) -> f64 {
        let x = p_mm.x / self.scale_mm;
        let y = p_mm.y / self.scale_mm;
        let z = p_mm.z / self.scale_mm;
        let (ix, iy, iz) = (x.floor(), y.floor(), z.floor());
        let (fx, fy, fz) = (smoothstep(x - ix), smoothstep(y - iy), smoothstep(z - iz));
        let (ix, iy, iz) = (ix as i64, iy as i64, iz as i64);
        let v = |dx: i64, dy: i64, dz: i64| lattice_value(self.seed, ix + dx, iy + dy, iz + dz);
        let lerp = |a: f64, b: f64, t: f64| a * (1.0 - t) + b * t;
        let front = lerp(
            lerp(v(0, 0, 0), v(1, 0, 0), fx),
            lerp(v(0, 1, 0), v(1, 1, 0), fx),
            fy,
        );
        let back = lerp(
            lerp(v(0, 0, 1), v(1, 0, 1), fx),
            lerp(v(0, 1, 1), v(1, 1, 1), fx),
            fy,
        );
        lerp(front, back, fz)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomConfig {
    /// Patch half-extents; the surface covers `[-x, x] x [-y, y]` mm.
    pub half_extent_x_mm: f64,
    pub half_extent_y_mm: f64,
    /// Node spacing of the stored heightfield lattice.
    pub height_grid_step_mm: f64,
    /// Peak height excursion of the surface relief.
    pub height_amplitude_mm: f64,
    /// Horizontal size of the dominant relief features.
    pub height_feature_scale_mm: f64,
    pub blob_count: usize,
    pub blob_sigma_mm: f64,
    /// How much a blob darkens the HSV value channel at its center.
    pub blob_value_drop: f64,
    pub blob_min_separation_mm: f64,
    /// Correlation length of the internal scalar volume.
    pub volume_feature_scale_mm: f64,
    /// Base tissue color as (hue deg, saturation, value).
    pub base_hsv: (f64, f64, f64),
    pub seed: u64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig {
            half_extent_x_mm: 60.0,
            half_extent_y_mm: 45.0,
            height_grid_step_mm: 0.5,
            height_amplitude_mm: 2.5,
            height_feature_scale_mm: 25.0,
            blob_count: 50,
            blob_sigma_mm: 1.2,
            blob_value_drop: 0.22,
            blob_min_separation_mm: 6.0,
            volume_feature_scale_mm: 1.5,
            base_hsv: (14.0, 0.55, 0.55),
            seed: 2024,
        }
    }
}

/// Tissue thickness below the surface; the scalar volume vanishes outside.
const TISSUE_DEPTH_MM: f64 = 40.0;
/// Blobs keep this margin from the patch border.
const BLOB_MARGIN_MM: f64 = 5.0;
/// Target node spacing of the prerendered texture raster. Fine enough to
/// resolve the 0.8 mm value mottling; the renderer samples it bilinearly
/// instead of re-evaluating the noise stack per pixel.
const TEXTURE_RASTER_STEP_MM: f64 = 0.15;

#[derive(Debug, Clone)]
pub struct PhantomSurface {
    config: PhantomConfig,
    /// Heightfield node values, row-major, `nodes_x * nodes_y`.
    heights: Vec<f64>,
    nodes_x: usize,
    nodes_y: usize,
    blob_centers: Vec<(f64, f64)>,
    /// Coarse buckets over the patch mapping to blob indices within reach.
    blob_buckets: Vec<Vec<u16>>,
    buckets_x: usize,
    buckets_y: usize,
    bucket_step_mm: f64,
    /// Prerendered color texture (RGB in [0, 1]), row-major.
    texture: Vec<[f32; 3]>,
    texture_x: usize,
    texture_y: usize,
    texture_step_x_mm: f64,
    texture_step_y_mm: f64,
    /// Reciprocal steps; lookups multiply instead of divide.
    inv_height_step: f64,
    inv_texture_step_x: f64,
    inv_texture_step_y: f64,
    value_noise_coarse: ValueNoise2,
    value_noise_fine: ValueNoise2,
    hue_noise: ValueNoise2,
    saturation_noise: ValueNoise2,
    volume_noise: ValueNoise3,
}

impl PhantomSurface {
    pub fn generate(config: PhantomConfig) -> Self {
        assert!(config.half_extent_x_mm > 0.0 && config.half_extent_y_mm > 0.0);
        assert!(config.height_grid_step_mm > 0.0);
        let half_x = config.half_extent_x_mm;
        let half_y = config.half_extent_y_mm;
        let relief_a = ValueNoise2::new(config.seed ^ 0x11, config.height_feature_scale_mm);
        let relief_b =
            ValueNoise2::new(config.seed ^ 0x22, config.height_feature_scale_mm / 2.3);
        let nodes_x =
            (2.0 * config.half_extent_x_mm / config.height_grid_step_mm).round() as usize + 1;
        let nodes_y =
            (2.0 * config.half_extent_y_mm / config.height_grid_step_mm).round() as usize + 1;
        let mut heights = Vec::with_capacity(nodes_x * nodes_y);
        for j in 0..nodes_y {
            let y = -config.half_extent_y_mm + j as f64 * config.height_grid_step_mm;
            for i in 0..nodes_x {
                let x = -config.half_extent_x_mm + i as f64 * config.height_grid_step_mm;
                heights.push(
                    config.height_amplitude_mm
                        * (0.75 * relief_a.sample(x, y) + 0.25 * relief_b.sample(x, y)),
                );
            }
        }

        let blob_centers = place_blobs(&config);
        let bucket_step_mm = config.blob_min_separation_mm.max(1.0);
        let buckets_x = (2.0 * config.half_extent_x_mm / bucket_step_mm).ceil() as usize + 1;
        let buckets_y = (2.0 * config.half_extent_y_mm / bucket_step_mm).ceil() as usize + 1;
        let mut blob_buckets = vec![Vec::new(); buckets_x * buckets_y];
        let reach = 3.0 * config.blob_sigma_mm;
        for (idx, &(bx, by)) in blob_centers.iter().enumerate() {
            let i0 = (((bx - reach + config.half_extent_x_mm) / bucket_step_mm).floor() as i64)
                .max(0) as usize;
            let i1 = (((bx + reach + config.half_extent_x_mm) / bucket_step_mm).floor() as i64)
                .min(buckets_x as i64 - 1) as usize;
            let j0 = (((by - reach + config.half_extent_y_mm) / bucket_step_mm).floor() as i64)
                .max(0) as usize;
            let j1 = (((by + reach + config.half_extent_y_mm) / bucket_step_mm).floor() as i64)
                .min(buckets_y as i64 - 1) as usize;
            for j in j0..=j1 {
                for i in i0..=i1 {
                    blob_buckets[j * buckets_x + i].push(idx as u16);
                }
            }
        }

        let texture_x = (2.0 * config.half_extent_x_mm / TEXTURE_RASTER_STEP_MM).ceil() as usize + 1;
        let texture_y = (2.0 * config.half_extent_y_mm / TEXTURE_RASTER_STEP_MM).ceil() as usize + 1;
        let inv_height_step = 1.0 / config.height_grid_step_mm;
        let mut surface = PhantomSurface {
            value_noise_coarse: ValueNoise2::new(config.seed ^ 0x33, 2.5),
            value_noise_fine: ValueNoise2::new(config.seed ^ 0x44, 0.8),
            hue_noise: ValueNoise2::new(config.seed ^ 0x55, 8.0),
            saturation_noise: ValueNoise2::new(config.seed ^ 0x66, 5.0),
            volume_noise: ValueNoise3::new(config.seed ^ 0x77, config.volume_feature_scale_mm),
            config,
            heights,
            nodes_x,
            nodes_y,
            blob_centers,
            blob_buckets,
            buckets_x,
            buckets_y,
            bucket_step_mm,
            texture: Vec::new(),
            texture_x,
            texture_y,
            texture_step_x_mm: 2.0 * half_x / (texture_x - 1) as f64,
            texture_step_y_mm: 2.0 * half_y / (texture_y - 1) as f64,
            inv_height_step,
            inv_texture_step_x: (texture_x - 1) as f64 / (2.0 * half_x),
            inv_texture_step_y: (texture_y - 1) as f64 / (2.0 * half_y),
        };
        let mut texture = Vec::with_capacity(texture_x * texture_y);
        for j in 0..texture_y {
            let y = -half_y + j as f64 * surface.texture_step_y_mm;
            for i in 0..texture_x {
                let x = -half_x + i as f64 * surface.texture_step_x_mm;
                texture.push(surface.texture_rgb(x, y));
            }
        }
        surface.texture = texture;
        surface
    }

    pub fn config(&self) -> &PhantomConfig {
        &self.config
    }

    pub fn blob_centers(&self) -> &[(f64, f64)] {
        &self.blob_centers
    }

    pub fn contains(&self, x_mm: f64, y_mm: f64) -> bool {
        x_mm.abs() <= self.config.half_extent_x_mm && y_mm.abs() <= self.config.half_extent_y_mm
    }

    /// Hard bound on |height| anywhere on the patch: node values are the
    /// amplitude times a blend of noises in [-1, 1], and bilinear
    /// interpolation cannot exceed its nodes.
    pub fn height_bound_mm(&self) -> f64 {
        self.config.height_amplitude_mm
    }

    /// Continuous cell coordinates clamped to the lattice interior.
    fn cell_at(&self, x_mm: f64, y_mm: f64) -> (usize, usize, f64, f64) {
        let gx = ((x_mm + self.config.half_extent_x_mm) * self.inv_height_step)
            .clamp(0.0, (self.nodes_x - 1) as f64);
        let gy = ((y_mm + self.config.half_extent_y_mm) * self.inv_height_step)
            .clamp(0.0, (self.nodes_y - 1) as f64);
        let i = (gx.floor() as usize).min(self.nodes_x - 2);
        let j = (gy.floor() as usize).min(self.nodes_y - 2);
        (i, j, gx - i as f64, gy - j as f64)
    }

    fn node(&self, i: usize, j: usize) -> f64 {
        self.heights[j * self.nodes_x + i]
    }

    /// Bilinear surface height; coordinates outside the patch clamp to the
    /// border cell.
    pub fn height_at(&self, x_mm: f64, y_mm: f64) -> f64 {
        let (i, j, fx, fy) = self.cell_at(x_mm, y_mm);
        let h00 = self.node(i, j);
        let h10 = self.node(i + 1, j);
        let h01 = self.node(i, j + 1);
        let h11 = self.node(i + 1, j + 1);
        (h00 * (1.0 - fx) + h10 * fx) * (1.0 - fy) + (h01 * (1.0 - fx) + h11 * fx) * fy
    }

    /// Height and exact in-cell gradient in a single cell lookup; the value
    /// matches `height_at` and `height_gradient` bit for bit.
    pub fn height_and_gradient(&self, x_mm: f64, y_mm: f64) -> (f64, f64, f64) {
        let (i, j, fx, fy) = self.cell_at(x_mm, y_mm);
        let step = self.config.height_grid_step_mm;
        let h00 = self.node(i, j);
        let h10 = self.node(i + 1, j);
        let h01 = self.node(i, j + 1);
        let h11 = self.node(i + 1, j + 1);
        let h = (h00 * (1.0 - fx) + h10 * fx) * (1.0 - fy) + (h01 * (1.0 - fx) + h11 * fx) * fy;
        let dhdx = ((h10 - h00) * (1.0 - fy) + (h11 - h01) * fy) / step;
        let dhdy = ((h01 - h00) * (1.0 - fx) + (h11 - h10) * fx) / step;
        (h, dhdx, dhdy)
    }

    /// Exact in-cell gradient (dh/dx, dh/dy) of the bilinear height.
    pub fn height_gradient(&self, x_mm: f64, y_mm: f64) -> (f64, f64) {
        let (i, j, fx, fy) = self.cell_at(x_mm, y_mm);
        let step = self.config.height_grid_step_mm;
        let h00 = self.node(i, j);
        let h10 = self.node(i + 1, j);
        let h01 = self.node(i, j + 1);
        let h11 = self.node(i + 1, j + 1);
        let dhdx = ((h10 - h00) * (1.0 - fy) + (h11 - h01) * fy) / step;
        let dhdy = ((h01 - h00) * (1.0 - fx) + (h11 - h10) * fx) / step;
        (dhdx, dhdy)
    }

    pub fn surface_point(&self, x_mm: f64, y_mm: f64) -> Vector3<f64> {
        Vector3::new(x_mm, y_mm, self.height_at(x_mm, y_mm))
    }

    /// Outward unit normal (positive z side, toward the camera).
    pub fn surface_normal(&self, x_mm: f64, y_mm: f64) -> Vector3<f64> {
        let (dhdx, dhdy) = self.height_gradient(x_mm, y_mm);
        Vector3::new(-dhdx, -dhdy, 1.0).normalize()
    }

    /// Full noise-stack texture evaluation; only used to fill the raster.
    fn texture_rgb(&self, x_mm: f64, y_mm: f64) -> [f32; 3] {
        let (h0, s0, v0) = self.config.base_hsv;
        let hue = h0 + 4.0 * self.hue_noise.sample(x_mm, y_mm);
        let saturation = s0 + 0.06 * self.saturation_noise.sample(x_mm, y_mm);
        let mut value = v0
            + 0.08 * self.value_noise_coarse.sample(x_mm, y_mm)
            + 0.05 * self.value_noise_fine.sample(x_mm, y_mm);

        let bi = (((x_mm + self.config.half_extent_x_mm) / self.bucket_step_mm) as i64)
            .clamp(0, self.buckets_x as i64 - 1) as usize;
        let bj = (((y_mm + self.config.half_extent_y_mm) / self.bucket_step_mm) as i64)
            .clamp(0, self.buckets_y as i64 - 1) as usize;
        let two_sigma_sq = 2.0 * self.config.blob_sigma_mm * self.config.blob_sigma_mm;
        for &idx in &self.blob_buckets[bj * self.buckets_x + bi] {
            let (bx, by) = self.blob_centers[idx as usize];
            let d_sq = (x_mm - bx).powi(2) + (y_mm - by).powi(2);
            value -= self.config.blob_value_drop * (-d_sq / two_sigma_sq).exp();
        }

        hsv_to_rgb_f32(hue.rem_euclid(360.0), saturation.clamp(0.0, 1.0), value.clamp(0.0, 1.0))
    }

    /// Tissue color at a point of the patch, sampled bilinearly from the
    /// prerendered raster. Coordinates outside the patch clamp to the border.
    pub fn texture_at(&self, x_mm: f64, y_mm: f64) -> [u8; 3] {
        let gx = ((x_mm + self.config.half_extent_x_mm) * self.inv_texture_step_x)
            .clamp(0.0, (self.texture_x - 1) as f64);
        let gy = ((y_mm + self.config.half_extent_y_mm) * self.inv_texture_step_y)
            .clamp(0.0, (self.texture_y - 1) as f64);
        let i = (gx.floor() as usize).min(self.texture_x - 2);
        let j = (gy.floor() as usize).min(self.texture_y - 2);
        let (fx, fy) = ((gx - i as f64) as f32, (gy - j as f64) as f32);
        let at = |i: usize, j: usize| self.texture[j * self.texture_x + i];
        let (t00, t10, t01, t11) = (at(i, j), at(i + 1, j), at(i, j + 1), at(i + 1, j + 1));
        let mut rgb = [0u8; 3];
        for c in 0..3 {
            let top = t00[c] * (1.0 - fx) + t10[c] * fx;
            let bottom = t01[c] * (1.0 - fx) + t11[c] * fx;
            rgb[c] = ((top * (1.0 - fy) + bottom * fy) * 255.0).round() as u8;
        }
        rgb
    }

    /// Internal scalar texture in [0, 1]; zero above the surface, outside
    /// the patch, or deeper than the tissue slab.
    pub fn volume_at(&self, p_tissue_mm: &Vector3<f64>) -> f64 {
        if !self.contains(p_tissue_mm.x, p_tissue_mm.y) {
            return 0.0;
        }
        let surface_z = self.height_at(p_tissue_mm.x, p_tissue_mm.y);
        if p_tissue_mm.z > surface_z || p_tissue_mm.z < surface_z - TISSUE_DEPTH_MM {
            return 0.0;
        }
        0.5 + 0.45 * self.volume_noise.sample(p_tissue_mm)
    }
}

/// Rejection-samples blob centers with a minimum pairwise separation inside
/// the patch margin. Deterministic in the config seed.
fn place_blobs(config: &PhantomConfig) -> Vec<(f64, f64)> {
    let x_range = config.half_extent_x_mm - BLOB_MARGIN_MM;
    let y_range = config.half_extent_y_mm - BLOB_MARGIN_MM;
    let min_sep_sq = config.blob_min_separation_mm * config.blob_min_separation_mm;
    let mut centers: Vec<(f64, f64)> = Vec::with_capacity(config.blob_count);
    let mut counter = 0u64;
    let mut attempts = 0u64;
    let max_attempts = 200_000;
    while centers.len() < config.blob_count && attempts < max_attempts {
        attempts += 1;
        let ux = (mix64(config.seed ^ 0x88 ^ counter) >> 11) as f64 / (1u64 << 53) as f64;
        counter += 1;
        let uy = (mix64(config.seed ^ 0x88 ^ counter) >> 11) as f64 / (1u64 << 53) as f64;
        counter += 1;
        let x = (2.0 * ux - 1.0) * x_range;
        let y = (2.0 * uy - 1.0) * y_range;
        if centers
            .iter()
            .all(|&(cx, cy)| (x - cx).powi(2) + (y - cy).powi(2) >= min_sep_sq)
        {
            centers.push((x, y));
        }
    }
    assert_eq!(
        centers.len(),
        config.blob_count,
        "could not place {} blobs with {} mm separation on the patch",
        config.blob_count,
        config.blob_min_separation_mm
    );
    centers
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::rgb_to_hsv;
    use crate::tracker::TrackerConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn surface() -> PhantomSurface {
        PhantomSurface::generate(PhantomConfig::default())
    }

    #[test]
    fn heightfield_is_continuous_and_bounded() {
        let s = surface();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let x = rng.random_range(-59.0..59.0);
            let y = rng.random_range(-44.0..44.0);
            let h = s.height_at(x, y);
            assert!(h.abs() <= s.config().height_amplitude_mm * 1.01, "height {h} at ({x}, {y})");
            let eps = 1e-4;
            let dh = (s.height_at(x + eps, y) - h).abs() + (s.height_at(x, y + eps) - h).abs();
            assert!(dh < 1e-3, "jump {dh} at ({x}, {y})");
        }
    }

    #[test]
    fn gradient_matches_finite_differences_inside_cells() {
        let s = surface();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let step = s.config().height_grid_step_mm;
        for _ in 0..500 {
            // Sample cell interiors so the finite-difference stencil stays
            // within one bilinear patch.
            let i = rng.random_range(5..230) as f64;
            let j = rng.random_range(5..170) as f64;
            let x = -60.0 + (i + rng.random_range(0.3..0.7)) * step;
            let y = -45.0 + (j + rng.random_range(0.3..0.7)) * step;
            let (gx, gy) = s.height_gradient(x, y);
            let eps = 1e-6;
            let fdx = (s.height_at(x + eps, y) - s.height_at(x - eps, y)) / (2.0 * eps);
            let fdy = (s.height_at(x, y + eps) - s.height_at(x, y - eps)) / (2.0 * eps);
            assert!((gx - fdx).abs() < 1e-6, "dh/dx {gx} vs fd {fdx}");
            assert!((gy - fdy).abs() < 1e-6, "dh/dy {gy} vs fd {fdy}");
        }
    }

    #[test]
    fn out_of_patch_heights_clamp_to_the_border() {
        let s = surface();
        assert_eq!(s.height_at(100.0, 0.0), s.height_at(60.0, 0.0));
        assert_eq!(s.height_at(0.0, -80.0), s.height_at(0.0, -45.0));
        assert!(!s.contains(60.1, 0.0));
        assert!(s.contains(-60.0, 45.0));
    }

    #[test]
    fn blobs_respect_count_separation_and_margin() {
        let s = surface();
        let cfg = s.config();
        let blobs = s.blob_centers();
        assert_eq!(blobs.len(), cfg.blob_count);
        for (i, &(x, y)) in blobs.iter().enumerate() {
            assert!(x.abs() <= cfg.half_extent_x_mm - BLOB_MARGIN_MM);
            assert!(y.abs() <= cfg.half_extent_y_mm - BLOB_MARGIN_MM);
            for &(ox, oy) in &blobs[i + 1..] {
                let d = ((x - ox).powi(2) + (y - oy).powi(2)).sqrt();
                assert!(d >= cfg.blob_min_separation_mm, "blobs {d:.2} mm apart");
            }
        }
    }

    #[test]
    fn texture_stays_inside_the_tracker_color_band() {
        let s = surface();
        let band = TrackerConfig::default().tissue_color;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5000 {
            let x = rng.random_range(-60.0..60.0);
            let y = rng.random_range(-45.0..45.0);
            let (h, sat, v) = rgb_to_hsv(s.texture_at(x, y));
            assert!(band.contains(h, sat, v), "texture ({h:.1}, {sat:.2}, {v:.2}) at ({x:.1}, {y:.1})");
        }
    }

    #[test]
    fn blob_centers_are_visibly_darker_than_their_surroundings() {
        let s = surface();
        for &(x, y) in &s.blob_centers()[..10] {
            let center = rgb_to_hsv(s.texture_at(x, y)).2;
            let away = rgb_to_hsv(s.texture_at(x + 4.5, y)).2;
            assert!(
                away - center > 0.1,
                "blob at ({x:.1}, {y:.1}): center v {center:.2}, nearby v {away:.2}"
            );
        }
    }

    #[test]
    fn volume_vanishes_above_surface_and_outside_tissue() {
        let s = surface();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..500 {
            let x = rng.random_range(-55.0..55.0);
            let y = rng.random_range(-40.0..40.0);
            let h = s.height_at(x, y);
            assert_eq!(s.volume_at(&Vector3::new(x, y, h + 0.01)), 0.0);
            assert_eq!(s.volume_at(&Vector3::new(x, y, h - TISSUE_DEPTH_MM - 0.1)), 0.0);
            let inside = s.volume_at(&Vector3::new(x, y, h - 5.0));
            assert!((0.05..=0.95).contains(&inside), "volume {inside}");
        }
        assert_eq!(s.volume_at(&Vector3::new(80.0, 0.0, -5.0)), 0.0);
    }

    #[test]
    fn same_config_regenerates_identical_surfaces() {
        let a = PhantomSurface::generate(PhantomConfig::default());
        let b = PhantomSurface::generate(PhantomConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let x = rng.random_range(-60.0..60.0);
            let y = rng.random_range(-45.0..45.0);
            assert_eq!(a.height_at(x, y).to_bits(), b.height_at(x, y).to_bits());
            assert_eq!(a.texture_at(x, y), b.texture_at(x, y));
            let p = Vector3::new(x, y, a.height_at(x, y) - 3.0);
            assert_eq!(a.volume_at(&p).to_bits(), b.volume_at(&p).to_bits());
        }
        let c = PhantomSurface::generate(PhantomConfig { seed: 999, ..PhantomConfig::default() });
        let differing = (0..50)
            .filter(|k| {
                let x = -50.0 + 2.0 * *k as f64;
                a.height_at(x, 0.0) != c.height_at(x, 0.0)
            })
            .count();
        assert!(differing > 40, "different seeds should change the relief");
    }

    #[test]
    fn normals_are_unit_and_face_outward() {
        let s = surface();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..500 {
            let x = rng.random_range(-59.0..59.0);
            let y = rng.random_range(-44.0..44.0);
            let n = s.surface_normal(x, y);
            assert!((n.norm() - 1.0).abs() < 1e-12);
            assert!(n.z > 0.8, "surface steeper than expected: n = {n:?}");
        }
    }

    #[test]
    fn noise_is_smooth_and_in_range() {
        let n2 = ValueNoise2::new(7, 2.0);
        let n3 = ValueNoise3::new(8, 1.5);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let x = rng.random_range(-100.0..100.0);
            let y = rng.random_range(-100.0..100.0);
            let z = rng.random_range(-40.0..10.0);
            let a = n2.sample(x, y);
            assert!((-1.0..=1.0).contains(&a));
            assert!((n2.sample(x + 1e-5, y) - a).abs() < 1e-3);
            let b = n3.sample(&Vector3::new(x, y, z));
            assert!((-1.0..=1.0).contains(&b));
            assert!((n3.sample(&Vector3::new(x, y, z + 1e-5)) - b).abs() < 1e-3);
        }
    }
}
