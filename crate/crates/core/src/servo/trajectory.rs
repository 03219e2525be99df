//! Scan trajectories over the tissue surface and their re-anchoring under
//! tissue motion.
//!
//! A trajectory is an ordered list of contact points with outward surface
//! normals, expressed in the reference tissue frame (the camera frame at scan
//! start). When the tracker reports tissue motion, [`update_trajectory`] maps
//! every point through the estimated rigid transform so the probe follows the
//! tissue instead of the original positions in space.

use std::fmt;

use nalgebra::Vector3;

use crate::tracker::TissuePoseEstimate;

use super::{ServoError, Stamped};

/// Tolerance on `|normal| - 1` when validating trajectory normals.
pub const UNIT_NORMAL_TOL: f64 = 1e-6;

/// Dwell time per trajectory point when none is specified.
pub const DEFAULT_DWELL_S: f64 = 1.0;

/// One stop on the scan path: where the probe touches, which way the surface
/// faces there, and how long the probe holds the pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    /// Contact position in the reference tissue frame (mm).
    pub contact_point: Vector3<f64>,
    /// Outward unit surface normal at the contact position.
    pub normal: Vector3<f64>,
    /// Time the probe holds this point before moving on (s).
    pub dwell_s: f64,
}

impl TrajectoryPoint {
    /// Creates a point with the default dwell of [`DEFAULT_DWELL_S`].
    pub fn new(contact_point: Vector3<f64>, normal: Vector3<f64>) -> Self {
        TrajectoryPoint { contact_point, normal, dwell_s: DEFAULT_DWELL_S }
    }
}

/// Errors from validating a scan trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum TrajectoryError {
    /// The trajectory contains no points.
    Empty,
    /// A normal is not unit length within [`UNIT_NORMAL_TOL`].
    NonUnitNormal { index: usize, norm: f64 },
    /// Two consecutive contact points are farther apart than allowed.
    SpacingExceeded { index: usize, spacing_mm: f64, max_spacing_mm: f64 },
}

impl fmt::Display for TrajectoryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrajectoryError::Empty => write!(f, "trajectory has no points"),
            TrajectoryError::NonUnitNormal { index, norm } => {
                write!(f, "normal at point {index} has length {norm:.6}, expected 1")
            }
            TrajectoryError::SpacingExceeded { index, spacing_mm, max_spacing_mm } => {
                write!(
                    f,
                    "points {} and {index} are {spacing_mm:.3} mm apart, max {max_spacing_mm:.3} mm",
                    index - 1
                )
            }
        }
    }
}

impl std::error::Error for TrajectoryError {}

/// Validated ordered scan path in the reference tissue frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanTrajectory {
    points: Vec<TrajectoryPoint>,
}

impl ScanTrajectory {
    /// Validates and wraps `points`: the list must be nonempty, every normal
    /// unit length, and consecutive contact points no farther apart than
    /// `max_spacing_mm`.
    pub fn new(
        points: Vec<TrajectoryPoint>,
        max_spacing_mm: f64,
    ) -> Result<Self, TrajectoryError> {
        if points.is_empty() {
            return Err(TrajectoryError::Empty);
        }
        for (index, point) in points.iter().enumerate() {
            let norm = point.normal.norm();
            if (norm - 1.0).abs() > UNIT_NORMAL_TOL {
                return Err(TrajectoryError::NonUnitNormal { index, norm });
            }
            if index > 0 {
                let spacing_mm = (point.contact_point - points[index - 1].contact_point).norm();
                if spacing_mm > max_spacing_mm {
                    return Err(TrajectoryError::SpacingExceeded {
                        index,
                        spacing_mm,
                        max_spacing_mm,
                    });
                }
            }
        }
        Ok(ScanTrajectory { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[TrajectoryPoint] {
        &self.points
    }

    pub fn point(&self, index: usize) -> &TrajectoryPoint {
        &self.points[index]
    }
}

/// Maps every trajectory point through the estimated tissue motion: contact
/// points by the full transform, normals by its rotation, dwell times
/// unchanged.
///
/// The estimate must be younger than `stale_timeout_s` at `now_s`; re-anchoring
/// a trajectory to outdated motion would steer the probe toward where the
/// tissue used to be.
pub fn update_trajectory(
    trajectory: &ScanTrajectory,
    estimate: &Stamped<TissuePoseEstimate>,
    now_s: f64,
    stale_timeout_s: f64,
) -> Result<ScanTrajectory, ServoError> {
    let age_s = now_s - estimate.stamp_s;
    if age_s > stale_timeout_s {
        return Err(ServoError::StaleEstimate { age_s, timeout_s: stale_timeout_s });
    }
    let motion = &estimate.value.transform;
    let points = trajectory
        .points
        .iter()
        .map(|p| TrajectoryPoint {
            contact_point: motion.apply(&p.contact_point),
            normal: motion.rotation.apply(&p.normal),
            dwell_s: p.dwell_s,
        })
        .collect();
    Ok(ScanTrajectory { points })
}

#[cfg(test)]
mod tests {
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::se3::{RigidTransform, Rotation3};

    use super::*;

    fn stamped(transform: RigidTransform) -> Stamped<TissuePoseEstimate> {
        Stamped {
            value: TissuePoseEstimate { transform, inlier_count: 12, mean_inlier_residual_mm: 0.1 },
            stamp_s: 0.0,
        }
    }

    fn square_path() -> ScanTrajectory {
        let z = Vector3::new(0.0, 0.0, 1.0);
        let points = vec![
            TrajectoryPoint::new(Vector3::new(0.0, 0.0, 0.0), z),
            TrajectoryPoint::new(Vector3::new(5.0, 0.0, 0.0), z),
            TrajectoryPoint::new(Vector3::new(5.0, 5.0, 0.0), z),
            TrajectoryPoint::new(Vector3::new(0.0, 5.0, 0.0), z),
        ];
        ScanTrajectory::new(points, 10.0).expect("valid path")
    }

    fn random_transform(rng: &mut ChaCha8Rng) -> RigidTransform {
        let axis = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let rotation = Rotation3::from_axis_angle(&axis, rng.random_range(-1.0..1.0));
        let translation = Vector3::new(
            rng.random_range(-20.0..20.0),
            rng.random_range(-20.0..20.0),
            rng.random_range(-20.0..20.0),
        );
        RigidTransform::new(rotation, translation)
    }

    #[test]
    fn rejects_empty_non_unit_and_spread_out_paths() {
        assert_eq!(ScanTrajectory::new(vec![], 10.0), Err(TrajectoryError::Empty));

        let bad_normal =
            vec![TrajectoryPoint::new(Vector3::zeros(), Vector3::new(0.0, 0.0, 2.0))];
        assert!(matches!(
            ScanTrajectory::new(bad_normal, 10.0),
            Err(TrajectoryError::NonUnitNormal { index: 0, .. })
        ));

        let z = Vector3::new(0.0, 0.0, 1.0);
        let spread = vec![
            TrajectoryPoint::new(Vector3::zeros(), z),
            TrajectoryPoint::new(Vector3::new(25.0, 0.0, 0.0), z),
        ];
        assert!(matches!(
            ScanTrajectory::new(spread, 10.0),
            Err(TrajectoryError::SpacingExceeded { index: 1, .. })
        ));
    }

    #[test]
    fn identity_estimate_leaves_the_path_unchanged() {
        let path = square_path();
        let updated =
            update_trajectory(&path, &stamped(RigidTransform::identity()), 0.0, 0.5).unwrap();
        assert_eq!(updated, path);
    }

    #[test]
    fn pure_translation_shifts_points_and_keeps_normals() {
        let path = square_path();
        let shift = Vector3::new(0.0, 0.0, 5.0);
        let updated =
            update_trajectory(&path, &stamped(RigidTransform::from_translation(shift)), 0.0, 0.5)
                .unwrap();
        for (before, after) in path.points().iter().zip(updated.points()) {
            assert_eq!(after.contact_point, before.contact_point + shift);
            assert_eq!(after.normal, before.normal);
            assert_eq!(after.dwell_s, before.dwell_s);
        }
    }

    #[test]
    fn rotation_rotates_normals_by_the_same_angle() {
        let path = square_path();
        let angle = 10.0f64.to_radians();
        let motion = RigidTransform::from_rotation(Rotation3::rot_x(angle));
        let updated = update_trajectory(&path, &stamped(motion), 0.0, 0.5).unwrap();
        for (before, after) in path.points().iter().zip(updated.points()) {
            let turned_deg = before.normal.dot(&after.normal).clamp(-1.0, 1.0).acos().to_degrees();
            assert!((turned_deg - 10.0).abs() < 1e-9, "normal turned {turned_deg} deg");
        }
    }

    #[test]
    fn update_preserves_distances_and_normal_angles() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let path = square_path();
        for _ in 0..50 {
            let updated =
                update_trajectory(&path, &stamped(random_transform(&mut rng)), 0.0, 0.5).unwrap();
            for i in 0..path.len() {
                for j in (i + 1)..path.len() {
                    let d_before =
                        (path.point(i).contact_point - path.point(j).contact_point).norm();
                    let d_after =
                        (updated.point(i).contact_point - updated.point(j).contact_point).norm();
                    assert!((d_before - d_after).abs() < 1e-9);

                    let a_before = path.point(i).normal.dot(&path.point(j).normal);
                    let a_after = updated.point(i).normal.dot(&updated.point(j).normal);
                    assert!((a_before - a_after).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn stale_estimate_is_rejected() {
        let path = square_path();
        let estimate = stamped(RigidTransform::identity());
        let result = update_trajectory(&path, &estimate, 0.6, 0.5);
        assert!(matches!(result, Err(ServoError::StaleEstimate { .. })));
    }
}
