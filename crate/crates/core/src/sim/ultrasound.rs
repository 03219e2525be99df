//! Simulated ultrasound slices cut from the phantom's scalar volume.
//!
//! The probe images a square planar window hanging below its tip: columns
//! run laterally along the probe x axis, rows run into the tissue along the
//! probe z axis. Each sample reads the phantom volume at the corresponding
//! 3D point in the tissue frame, so a probe held at the same pose relative
//! to the tissue always sees the same slice. When the tip loses contact
//! with the surface the slice goes fully black, mirroring how a real probe
//! image dies the moment the acoustic coupling breaks.

use nalgebra::Vector3;

use crate::se3::RigidTransform;
use crate::sim::surface::PhantomSurface;

/// Slice resolution (square).
pub const SLICE_DIM: usize = 64;
/// Physical side length of the imaged window, mm.
pub const SLICE_EXTENT_MM: f64 = 20.0;
/// How far the tip may hover above the surface before contact counts as
/// lost. Matches the probe's standoff tolerance during servoing.
pub const CONTACT_SLACK_MM: f64 = 1.0;

/// Square scalar image sampled from the phantom volume.
#[derive(Debug, Clone, PartialEq)]
pub struct UltrasoundSlice {
    data: Vec<f32>,
    in_contact: bool,
}

impl UltrasoundSlice {
    /// The all-zero slice returned when the probe has lost contact.
    pub fn black() -> Self {
        UltrasoundSlice { data: vec![0.0; SLICE_DIM * SLICE_DIM], in_contact: false }
    }

    /// Slice with explicit row-major samples, marked as in contact.
    pub fn from_data(data: Vec<f32>) -> Self {
        assert_eq!(
            data.len(),
            SLICE_DIM * SLICE_DIM,
            "slice data must be {SLICE_DIM}x{SLICE_DIM}"
        );
        UltrasoundSlice { data, in_contact: true }
    }

    pub fn width(&self) -> usize {
        SLICE_DIM
    }

    pub fn height(&self) -> usize {
        SLICE_DIM
    }

    /// Sample at column `i` (lateral) and row `j` (depth), row-major.
    pub fn sample(&self, i: usize, j: usize) -> f32 {
        assert!(i < SLICE_DIM && j < SLICE_DIM, "sample ({i}, {j}) out of bounds");
        self.data[j * SLICE_DIM + i]
    }

    /// Whether the probe tip was touching the tissue when this slice was taken.
    pub fn in_contact(&self) -> bool {
        self.in_contact
    }

    pub fn is_all_zero(&self) -> bool {
        self.data.iter().all(|s| *s == 0.0)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }
}

/// Images the phantom volume through the probe's scan plane.
///
/// `probe_in_tissue` places the probe in the tissue frame: the translation
/// is the tip, the x axis spans the slice laterally, and the z axis points
/// into the tissue. Contact holds while the tip sits over the patch and no
/// more than [`CONTACT_SLACK_MM`] above the local surface height (pressing
/// in is fine); otherwise the all-zero slice comes back.
pub fn render_ultrasound_slice(
    surface: &PhantomSurface,
    probe_in_tissue: &RigidTransform,
) -> UltrasoundSlice {
    let tip = probe_in_tissue.translation;
    if !surface.contains(tip.x, tip.y)
        || tip.z > surface.height_at(tip.x, tip.y) + CONTACT_SLACK_MM
    {
        return UltrasoundSlice::black();
    }

    let step = SLICE_EXTENT_MM / SLICE_DIM as f64;
    let mut data = Vec::with_capacity(SLICE_DIM * SLICE_DIM);
    for j in 0..SLICE_DIM {
        let depth = (j as f64 + 0.5) * step;
        for i in 0..SLICE_DIM {
            let lateral = (i as f64 + 0.5 - SLICE_DIM as f64 / 2.0) * step;
            let p = probe_in_tissue.apply(&Vector3::new(lateral, 0.0, depth));
            data.push(surface.volume_at(&p) as f32);
        }
    }
    UltrasoundSlice { data, in_contact: true }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::se3::Rotation3;
    use crate::sim::surface::PhantomConfig;

    fn surface() -> PhantomSurface {
        PhantomSurface::generate(PhantomConfig::default())
    }

    /// Probe pressed straight down at `(x, y)`, tip `above_mm` over the surface.
    fn probe_at(s: &PhantomSurface, x: f64, y: f64, above_mm: f64) -> RigidTransform {
        // Flipping about x sends the probe z axis straight down into the tissue.
        RigidTransform::new(
            Rotation3::rot_x(std::f64::consts::PI),
            Vector3::new(x, y, s.height_at(x, y) + above_mm),
        )
    }

    fn zero_mean_ncc(a: &UltrasoundSlice, b: &UltrasoundSlice) -> f64 {
        let n = (SLICE_DIM * SLICE_DIM) as f64;
        let mean = |s: &UltrasoundSlice| s.data().iter().map(|v| *v as f64).sum::<f64>() / n;
        let (ma, mb) = (mean(a), mean(b));
        let mut num = 0.0;
        let mut va = 0.0;
        let mut vb = 0.0;
        for (x, y) in a.data().iter().zip(b.data()) {
            let (dx, dy) = (*x as f64 - ma, *y as f64 - mb);
            num += dx * dy;
            va += dx * dx;
            vb += dy * dy;
        }
        num / (va * vb).sqrt()
    }

    #[test]
    fn same_pose_gives_identical_slices() {
        let s = surface();
        let pose = probe_at(&s, 10.0, -5.0, 0.0);
        let a = render_ultrasound_slice(&s, &pose);
        let b = render_ultrasound_slice(&s, &pose);
        assert!(a.in_contact());
        assert!(!a.is_all_zero());
        assert_eq!(a, b);
    }

    #[test]
    fn lifted_probe_returns_the_black_slice() {
        let s = surface();
        let lifted = render_ultrasound_slice(&s, &probe_at(&s, 10.0, -5.0, 10.0));
        assert!(!lifted.in_contact());
        assert!(lifted.is_all_zero());

        let off_patch = probe_at(&s, 0.0, 0.0, 0.0);
        let off_patch = RigidTransform::new(off_patch.rotation, Vector3::new(90.0, 0.0, 0.0));
        let slice = render_ultrasound_slice(&s, &off_patch);
        assert!(!slice.in_contact());
        assert!(slice.is_all_zero());
    }

    #[test]
    fn hovering_within_the_slack_still_images() {
        let s = surface();
        let hover = render_ultrasound_slice(&s, &probe_at(&s, -15.0, 8.0, 0.8));
        assert!(hover.in_contact());
        assert!(!hover.is_all_zero());
        let pressed = render_ultrasound_slice(&s, &probe_at(&s, -15.0, 8.0, -0.5));
        assert!(pressed.in_contact());
        assert!(!pressed.is_all_zero());
    }

    #[test]
    fn lateral_shift_decorrelates_the_slice() {
        let s = surface();
        let a = render_ultrasound_slice(&s, &probe_at(&s, 5.0, 5.0, 0.0));
        let b = render_ultrasound_slice(&s, &probe_at(&s, 15.0, 5.0, 0.0));
        let ncc = zero_mean_ncc(&a, &b);
        assert!(ncc.abs() < 0.5, "10 mm shift still correlates at {ncc:.3}");
    }

    #[test]
    fn submillimeter_shift_stays_correlated() {
        let s = surface();
        let a = render_ultrasound_slice(&s, &probe_at(&s, 5.0, 5.0, 0.0));
        let b = render_ultrasound_slice(&s, &probe_at(&s, 5.3, 5.0, 0.0));
        let ncc = zero_mean_ncc(&a, &b);
        assert!(ncc > 0.8, "0.3 mm shift should barely move the slice, ncc {ncc:.3}");
    }
}
