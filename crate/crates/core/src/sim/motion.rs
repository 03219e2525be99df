//! Scripted phantom motion: per-axis sinusoids and smoothed random walks.
//!
//! Amplitudes are peak-to-peak: a 3 mm profile oscillates between -1.5 and
//! +1.5 mm. Offsets are expressed in the phantom's own frame, so the mounted
//! patch moves along its platform axes.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::se3::{RigidTransform, Rotation3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn unit(self) -> Vector3<f64> {
        match self {
            Axis::X => Vector3::x(),
            Axis::Y => Vector3::y(),
            Axis::Z => Vector3::z(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidMotion {
    pub axis: Axis,
    pub period_s: f64,
    /// Peak-to-peak travel; the offset stays within half of this either way.
    pub amplitude_mm: f64,
    pub phase_rad: f64,
}

/// Sample cadence of the generated free-form path.
pub const FREE_FORM_RATE_HZ: f64 = 50.0;

/// Translation path from a Gaussian random walk smoothed with a moving
/// average and rescaled so the realized RMS offset magnitude equals the
/// target exactly. Optionally adds a small rotational wander built the same
/// way.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeFormMotion {
    pub rms_offset_mm: f64,
    pub duration_s: f64,
    pub seed: u64,
    pub rotation_rms_deg: f64,
    offsets: Vec<Vector3<f64>>,
    rotations: Vec<Vector3<f64>>,
}

impl FreeFormMotion {
    pub fn generate(rms_offset_mm: f64, duration_s: f64, seed: u64, rotation_rms_deg: f64) -> Self {
        assert!(rms_offset_mm > 0.0 && duration_s > 0.0);
        let samples = (duration_s * FREE_FORM_RATE_HZ).ceil() as usize + 1;
        let window = (0.5 * FREE_FORM_RATE_HZ).round() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let offsets = smoothed_walk(&mut rng, samples, window, rms_offset_mm);
        let rotations = if rotation_rms_deg > 0.0 {
            smoothed_walk(&mut rng, samples, window, rotation_rms_deg.to_radians())
        } else {
            Vec::new()
        };
        FreeFormMotion { rms_offset_mm, duration_s, seed, rotation_rms_deg, offsets, rotations }
    }

    fn sample(path: &[Vector3<f64>], t_s: f64) -> Vector3<f64> {
        if path.is_empty() {
            return Vector3::zeros();
        }
        let s = (t_s * FREE_FORM_RATE_HZ).clamp(0.0, (path.len() - 1) as f64);
        let i = (s.floor() as usize).min(path.len() - 2);
        let f = s - i as f64;
        path[i] * (1.0 - f) + path[i + 1] * f
    }

    pub fn offset_at(&self, t_s: f64) -> Vector3<f64> {
        Self::sample(&self.offsets, t_s)
    }

    pub fn rotation_at(&self, t_s: f64) -> Rotation3 {
        if self.rotations.is_empty() {
            return Rotation3::identity();
        }
        let r = Self::sample(&self.rotations, t_s);
        let angle = r.norm();
        if angle < 1e-15 {
            return Rotation3::identity();
        }
        Rotation3::from_axis_angle(&(r / angle), angle)
    }

    /// Realized root-mean-square offset magnitude over the stored path.
    pub fn realized_rms_mm(&self) -> f64 {
        let n = self.offsets.len() as f64;
        (self.offsets.iter().map(|o| o.norm_squared()).sum::<f64>() / n).sqrt()
    }
}

/// Random walk, moving-average smoothing, then exact RMS normalization.
/// The first sample is pinned to zero so paths start at rest.
fn smoothed_walk(
    rng: &mut ChaCha8Rng,
    samples: usize,
    window: usize,
    target_rms: f64,
) -> Vec<Vector3<f64>> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut walk = Vec::with_capacity(samples);
    let mut position = Vector3::zeros();
    for _ in 0..samples {
        walk.push(position);
        position += Vector3::new(
            normal.sample(rng),
            normal.sample(rng),
            normal.sample(rng),
        );
    }

    let window = window.max(1);
    let mut smoothed = Vec::with_capacity(samples);
    for k in 0..samples {
        let lo = k.saturating_sub(window / 2);
        let hi = (k + window / 2 + 1).min(samples);
        let mean = walk[lo..hi].iter().sum::<Vector3<f64>>() / (hi - lo) as f64;
        smoothed.push(mean);
    }
    let start = smoothed[0];
    for s in smoothed.iter_mut() {
        *s -= start;
    }

    let rms = (smoothed.iter().map(|o| o.norm_squared()).sum::<f64>() / samples as f64).sqrt();
    if rms > 0.0 {
        let scale = target_rms / rms;
        for s in smoothed.iter_mut() {
            *s *= scale;
        }
    }
    smoothed
}

#[derive(Debug, Clone, PartialEq)]
pub enum MotionProfile {
    Static,
    Sinusoid(SinusoidMotion),
    FreeForm(FreeFormMotion),
}

impl MotionProfile {
    /// 3 s period, 3 mm peak-to-peak.
    pub fn profile1(axis: Axis) -> Self {
        MotionProfile::Sinusoid(SinusoidMotion {
            axis,
            period_s: 3.0,
            amplitude_mm: 3.0,
            phase_rad: 0.0,
        })
    }

    /// 5 s period, 3 mm peak-to-peak.
    pub fn profile2(axis: Axis) -> Self {
        MotionProfile::Sinusoid(SinusoidMotion {
            axis,
            period_s: 5.0,
            amplitude_mm: 3.0,
            phase_rad: 0.0,
        })
    }

    /// 5 s period, 5 mm peak-to-peak.
    pub fn profile3(axis: Axis) -> Self {
        MotionProfile::Sinusoid(SinusoidMotion {
            axis,
            period_s: 5.0,
            amplitude_mm: 5.0,
            phase_rad: 0.0,
        })
    }
}

/// Pose offset of the phantom at time `t`, in the phantom frame.
pub fn motion_offset(profile: &MotionProfile, t_s: f64) -> RigidTransform {
    match profile {
        MotionProfile::Static => RigidTransform::identity(),
        MotionProfile::Sinusoid(s) => {
            // Reducing t modulo the period first keeps long runs from losing
            // precision inside sin.
            let phase_turns = t_s.rem_euclid(s.period_s) / s.period_s;
            let angle = std::f64::consts::TAU * phase_turns + s.phase_rad;
            let offset = 0.5 * s.amplitude_mm * angle.sin();
            RigidTransform::from_translation(s.axis.unit() * offset)
        }
        MotionProfile::FreeForm(f) => {
            RigidTransform::new(f.rotation_at(t_s), f.offset_at(t_s))
        }
    }
}
