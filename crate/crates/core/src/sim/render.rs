//! Frame synthesis: poses the phantom, intersects one ray per pixel with
//! the heightfield, and emits the color image, noisy organized cloud, and
//! ground-truth labels and pose.
//!
//! Rays are parameterized by camera z-depth, `p(s) = s * (dx, dy, 1)`, and
//! the intersection solves `g(s) = z_tissue(s) - h(x_tissue(s), y_tissue(s))`
//! by Newton iteration with the exact in-cell gradient of the bilinear
//! heightfield. Depth noise perturbs `s`, which keeps every cloud point on
//! its own pixel ray, so reprojecting a noisy point still lands on its
//! pixel center.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::camera::CameraIntrinsics;
use crate::cloud::OrganizedPointCloud;
use crate::grid::{ColorImage, Grid};
use crate::se3::RigidTransform;
use crate::sim::motion::{motion_offset, MotionProfile};
use crate::sim::occluder::{any_occluder_covers, OccluderEvent, OCCLUDER_COLOR, OCCLUDER_DEPTH_MM};
use crate::sim::surface::{mix64, PhantomSurface};

pub const BACKGROUND_COLOR: [u8; 3] = [6, 7, 9];

const NEWTON_TOLERANCE_MM: f64 = 1e-9;
/// A Newton update this small leaves a remaining gap far below the
/// tolerance (the residual after an update is quadratic in the step), so
/// the confirming re-evaluation can be skipped.
const NEWTON_STEP_ACCEPT_MM: f64 = 1e-7;
const NEWTON_MAX_ITERATIONS: usize = 40;
const DEPTH_MIN_MM: f64 = 10.0;
const DEPTH_MAX_MM: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneLabel {
    Tissue,
    Occluder,
    Background,
}

#[derive(Debug, Clone)]
pub struct SceneFrame {
    pub image: ColorImage,
    pub cloud: OrganizedPointCloud,
    pub labels: Grid<SceneLabel>,
    /// Tissue frame to camera frame at this timestamp.
    pub true_pose: RigidTransform,
    /// Camera-frame rigid motion of the tissue since t = 0; this is what a
    /// tracker initialized on the first frame should estimate.
    pub tissue_motion: RigidTransform,
    pub t_s: f64,
}

/// Newton intersection of one z-parameterized ray with the heightfield in
/// the tissue frame. Returns the depth `s` and the tissue-frame hit point.
fn intersect_ray(
    surface: &PhantomSurface,
    origin_t: &Vector3<f64>,
    dir_t: &Vector3<f64>,
    s_start: f64,
) -> Option<(f64, Vector3<f64>)> {
    let mut s = s_start.clamp(DEPTH_MIN_MM, DEPTH_MAX_MM);
    for _ in 0..NEWTON_MAX_ITERATIONS {
        let p = origin_t + dir_t * s;
        let (h, dhdx, dhdy) = surface.height_and_gradient(p.x, p.y);
        let g = p.z - h;
        if g.abs() < NEWTON_TOLERANCE_MM {
            return Some((s, p));
        }
        let dg = dir_t.z - (dhdx * dir_t.x + dhdy * dir_t.y);
        if dg.abs() < 1e-12 {
            return None;
        }
        let step = g / dg;
        s -= step;
        if !(DEPTH_MIN_MM..=DEPTH_MAX_MM).contains(&s) {
            return None;
        }
        if step.abs() < NEWTON_STEP_ACCEPT_MM {
            return Some((s, origin_t + dir_t * s));
        }
    }
    None
}

/// Cheap no-hit test: the surface lives inside a slab `|z| <= bound`, so a
/// ray whose slab crossing stays outside the patch rectangle on one side
/// cannot intersect. Returns the slab-entry depth to seed Newton, or None
/// for a definite miss.
fn slab_entry(
    half_x: f64,
    half_y: f64,
    bound: f64,
    origin_t: &Vector3<f64>,
    dir_t: &Vector3<f64>,
) -> Option<f64> {
    if dir_t.z.abs() < 1e-9 {
        return Some(DEPTH_MIN_MM);
    }
    let inv_dz = 1.0 / dir_t.z;
    let s_a = (bound - origin_t.z) * inv_dz;
    let s_b = (-bound - origin_t.z) * inv_dz;
    let (s0, s1) = if s_a <= s_b { (s_a, s_b) } else { (s_b, s_a) };
    if s1 < DEPTH_MIN_MM || s0 > DEPTH_MAX_MM {
        return None;
    }
    let xa = origin_t.x + dir_t.x * s0;
    let xb = origin_t.x + dir_t.x * s1;
    if (xa > half_x && xb > half_x) || (xa < -half_x && xb < -half_x) {
        return None;
    }
    let ya = origin_t.y + dir_t.y * s0;
    let yb = origin_t.y + dir_t.y * s1;
    if (ya > half_y && yb > half_y) || (ya < -half_y && yb < -half_y) {
        return None;
    }
    Some(0.5 * (s0.max(DEPTH_MIN_MM) + s1.min(DEPTH_MAX_MM)))
}

/// Renders the scene at time `t`. Deterministic in `(t_s, seed)`: repeated
/// calls produce bit-identical frames.
#[allow(clippy::too_many_arguments)]
pub fn generate_frame(
    surface: &PhantomSurface,
    profile: &MotionProfile,
    occluders: &[OccluderEvent],
    camera: &CameraIntrinsics,
    mount: &RigidTransform,
    noise_sigma_mm: f64,
    t_s: f64,
    seed: u64,
) -> SceneFrame {
    let true_pose = mount.compose(&motion_offset(profile, t_s));
    let reference_pose = mount.compose(&motion_offset(profile, 0.0));
    let tissue_motion = true_pose.compose(&reference_pose.inverse());
    let inverse = true_pose.inverse();
    let origin_t = inverse.translation;

    let (width, height) = (camera.width, camera.height);
    let mut image = Grid::filled(width, height, BACKGROUND_COLOR);
    let mut labels = Grid::filled(width, height, SceneLabel::Background);
    let mut cloud = OrganizedPointCloud::new(width, height);

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ mix64(t_s.to_bits()));
    let normal = Normal::new(0.0, 1.0).unwrap();
    let half_x = surface.config().half_extent_x_mm;
    let half_y = surface.config().half_extent_y_mm;
    let bound = surface.height_bound_mm() + 1e-6;
    let u_dirs: Vec<f64> = (0..width).map(|u| (u as f64 - camera.cx) / camera.fx).collect();

    for v in 0..height {
        let v_dir = (v as f64 - camera.cy) / camera.fy;
        let mut warm: Option<f64> = None;
        for u in 0..width {
            let noise = if noise_sigma_mm > 0.0 {
                noise_sigma_mm * normal.sample(&mut rng)
            } else {
                0.0
            };
            let dir_cam = Vector3::new(u_dirs[u], v_dir, 1.0);

            if any_occluder_covers(occluders, u as f64, v as f64, t_s) {
                image[(u, v)] = OCCLUDER_COLOR;
                labels[(u, v)] = SceneLabel::Occluder;
                cloud.set(u, v, dir_cam * (OCCLUDER_DEPTH_MM + noise));
                continue;
            }

            let dir_t = inverse.rotation.apply(&dir_cam);
            let entry = match slab_entry(half_x, half_y, bound, &origin_t, &dir_t) {
                Some(entry) => entry,
                None => {
                    warm = None;
                    continue;
                }
            };
            match intersect_ray(surface, &origin_t, &dir_t, warm.unwrap_or(entry)) {
                Some((s, hit)) => {
                    // Converging on the border-clamped surface outside the
                    // patch still seeds the neighbor pixel well.
                    warm = Some(s);
                    if surface.contains(hit.x, hit.y) {
                        image[(u, v)] = surface.texture_at(hit.x, hit.y);
                        labels[(u, v)] = SceneLabel::Tissue;
                        cloud.set(u, v, dir_cam * (s + noise));
                    }
                }
                None => {
                    warm = None;
                }
            }
        }
    }

    SceneFrame { image, cloud, labels, true_pose, tissue_motion, t_s }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::project;
    use crate::se3::Rotation3;
    use crate::sim::motion::Axis;
    use crate::sim::surface::PhantomConfig;
    use crate::tracker::kabsch_fit;
    use rand::{Rng, SeedableRng};

    fn camera() -> CameraIntrinsics {
        CameraIntrinsics::new(800.0, 800.0, 360.0, 288.0, 720, 576).unwrap()
    }

    fn mount() -> RigidTransform {
        RigidTransform::new(
            Rotation3::rot_x(155.0_f64.to_radians()),
            Vector3::new(0.0, 0.0, 150.0),
        )
    }

    fn surface() -> PhantomSurface {
        PhantomSurface::generate(PhantomConfig::default())
    }

    #[test]
    fn noiseless_cloud_lies_exactly_on_the_surface() {
        let s = surface();
        let frame = generate_frame(
            &s,
            &MotionProfile::Static,
            &[],
            &camera(),
            &mount(),
            0.0,
            0.0,
            1,
        );
        let inv = frame.true_pose.inverse();
        let mut checked = 0;
        for v in (0..576).step_by(7) {
            for u in (0..720).step_by(7) {
                if frame.labels[(u, v)] != SceneLabel::Tissue {
                    continue;
                }
                let p = frame.cloud.point(u, v).unwrap();
                let q = inv.apply(&p);
                let gap = (q.z - s.height_at(q.x, q.y)).abs();
                assert!(gap < 1e-6, "pixel ({u}, {v}) sits {gap} mm off the surface");
                assert!(s.contains(q.x, q.y));
                checked += 1;
            }
        }
        assert!(checked > 2000, "only {checked} tissue pixels sampled");
    }

    #[test]
    fn noisy_points_still_reproject_onto_their_pixel() {
        let k = camera();
        let frame = generate_frame(
            &surface(),
            &MotionProfile::profile3(Axis::Z),
            &[],
            &k,
            &mount(),
            0.3,
            1.3,
            7,
        );
        let identity = RigidTransform::identity();
        for v in (0..576).step_by(13) {
            for u in (0..720).step_by(13) {
                if !frame.cloud.is_valid(u, v) {
                    continue;
                }
                let p = frame.cloud.point(u, v).unwrap();
                let (pu, pv) = project(&k, &identity, &p).unwrap();
                let err = ((pu - u as f64).powi(2) + (pv - v as f64).powi(2)).sqrt();
                assert!(err < 1e-6, "pixel ({u}, {v}) reprojects {err} px away");
            }
        }
    }

    #[test]
    fn frames_are_bit_identical_for_the_same_time_and_seed() {
        let s = surface();
        let k = camera();
        let m = mount();
        let profile = MotionProfile::profile1(Axis::X);
        let occ = vec![OccluderEvent::static_rectangle(0.0, 5.0, 200.0, 150.0, 400.0, 350.0)];
        let a = generate_frame(&s, &profile, &occ, &k, &m, 0.3, 0.62, 42);
        let b = generate_frame(&s, &profile, &occ, &k, &m, 0.3, 0.62, 42);
        assert_eq!(a.image.data(), b.image.data());
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        a.cloud.write_to(&mut buf_a).unwrap();
        b.cloud.write_to(&mut buf_b).unwrap();
        assert_eq!(buf_a, buf_b);
        assert_eq!(a.true_pose.to_array(), b.true_pose.to_array());

        let c = generate_frame(&s, &profile, &occ, &k, &m, 0.3, 0.62, 43);
        let mut buf_c = Vec::new();
        c.cloud.write_to(&mut buf_c).unwrap();
        assert_ne!(buf_a, buf_c, "different seeds must change the depth noise");
    }

    #[test]
    fn sinusoid_poses_repeat_after_a_period() {
        let s = surface();
        let k = camera();
        let m = mount();
        let profile = MotionProfile::profile1(Axis::Y);
        // 0.75 and 3.75 are exactly representable and differ by the period,
        // so the pose (and with sigma = 0 the whole frame) repeats exactly.
        let a = generate_frame(&s, &profile, &[], &k, &m, 0.0, 0.75, 1);
        let b = generate_frame(&s, &profile, &[], &k, &m, 0.0, 3.75, 1);
        assert_eq!(a.true_pose.to_array(), b.true_pose.to_array());
        assert_eq!(a.image.data(), b.image.data());
    }

    #[test]
    fn kabsch_on_surface_samples_recovers_the_scripted_motion() {
        let s = surface();
        let m = mount();
        let profile = MotionProfile::profile3(Axis::X);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let points: Vec<Vector3<f64>> = (0..40)
            .map(|_| {
                s.surface_point(rng.random_range(-55.0..55.0), rng.random_range(-40.0..40.0))
            })
            .collect();
        for t in [0.4, 1.2, 2.9] {
            let pose_0 = m.compose(&motion_offset(&profile, 0.0));
            let pose_t = m.compose(&motion_offset(&profile, t));
            let at_0: Vec<_> = points.iter().map(|p| pose_0.apply(p)).collect();
            let at_t: Vec<_> = points.iter().map(|p| pose_t.apply(p)).collect();
            let fit = kabsch_fit(&at_0, &at_t).unwrap();
            let truth = pose_t.compose(&pose_0.inverse());
            let e = crate::se3::pose_error(&fit, &truth);
            assert!(e.translation_mm < 1e-6, "t = {t}: {}", e.translation_mm);
            assert!(e.rotation_deg < 1e-6, "t = {t}: {}", e.rotation_deg);
        }
    }

    #[test]
    fn occluder_changes_pixels_but_not_pose() {
        let s = surface();
        let k = camera();
        let m = mount();
        let profile = MotionProfile::profile2(Axis::Z);
        let occ = vec![OccluderEvent::static_rectangle(1.0, 2.0, 250.0, 200.0, 450.0, 380.0)];
        let with = generate_frame(&s, &profile, &occ, &k, &m, 0.0, 1.5, 9);
        let without = generate_frame(&s, &profile, &[], &k, &m, 0.0, 1.5, 9);

        assert_eq!(with.true_pose.to_array(), without.true_pose.to_array());
        assert_eq!(with.tissue_motion.to_array(), without.tissue_motion.to_array());

        assert_eq!(with.labels[(300, 250)], SceneLabel::Occluder);
        assert_eq!(with.image[(300, 250)], OCCLUDER_COLOR);
        let p = with.cloud.point(300, 250).unwrap();
        assert!((p.z - OCCLUDER_DEPTH_MM).abs() < 1e-6);

        // Outside the polygon the frames agree pixel for pixel.
        assert_eq!(with.image[(100, 100)], without.image[(100, 100)]);
        assert_eq!(with.labels[(100, 100)], without.labels[(100, 100)]);

        // Outside the time window the occluder leaves no trace.
        let cleared = generate_frame(&s, &profile, &occ, &k, &m, 0.0, 2.5, 9);
        let clean = generate_frame(&s, &profile, &[], &k, &m, 0.0, 2.5, 9);
        assert_eq!(cleared.image.data(), clean.image.data());
    }

    #[test]
    fn frame_has_tissue_coverage_and_a_background_ring() {
        let frame = generate_frame(
            &surface(),
            &MotionProfile::Static,
            &[],
            &camera(),
            &mount(),
            0.0,
            0.0,
            1,
        );
        let total = 720 * 576;
        let tissue = frame.labels.data().iter().filter(|&&l| l == SceneLabel::Tissue).count();
        let background =
            frame.labels.data().iter().filter(|&&l| l == SceneLabel::Background).count();
        assert!(tissue as f64 > 0.4 * total as f64, "tissue covers only {tissue} px");
        assert!(background as f64 > 0.05 * total as f64, "background covers only {background} px");
        for v in 0..576 {
            for u in 0..720 {
                assert_eq!(
                    frame.cloud.is_valid(u, v),
                    frame.labels[(u, v)] != SceneLabel::Background,
                    "validity must match labels at ({u}, {v})"
                );
            }
        }
        // The patch center projects near the principal point.
        assert_eq!(frame.labels[(360, 288)], SceneLabel::Tissue);
        let center = frame.cloud.point(360, 288).unwrap();
        assert!((center.z - 150.0).abs() < 5.0, "center depth {}", center.z);
    }
}
