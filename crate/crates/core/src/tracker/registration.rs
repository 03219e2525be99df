//! Rigid registration between corresponding 3D point sets.
//!
//! [`kabsch_fit`] solves the least-squares rigid alignment in closed form via
//! SVD; [`estimate_pose_ransac`] wraps it in a RANSAC loop over tracked ROI
//! correspondences so a few bad tracks cannot corrupt the pose.

use std::fmt;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;

use crate::se3::{RigidTransform, Rotation3};
use crate::tracker::{Roi, RoiState, TrackerConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum RegistrationError {
    TooFewPoints { found: usize },
    MismatchedLengths { initial: usize, current: usize },
    /// The points are collinear or coincident; the rotation is not
    /// observable.
    DegenerateGeometry,
    /// Fewer than three tracking ROIs carry a valid current point.
    TooFewRois { found: usize },
    /// No RANSAC hypothesis gathered a minimal consensus.
    NoConsensus { best_inliers: usize },
}

impl fmt::Display for RegistrationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegistrationError::TooFewPoints { found } => {
                write!(f, "rigid fit needs at least 3 points, got {found}")
            }
            RegistrationError::MismatchedLengths { initial, current } => {
                write!(f, "point sets differ in length ({initial} vs {current})")
            }
            RegistrationError::DegenerateGeometry => {
                write!(f, "point set is collinear or coincident")
            }
            RegistrationError::TooFewRois { found } => {
                write!(f, "pose estimation needs 3 tracked ROIs with depth, got {found}")
            }
            RegistrationError::NoConsensus { best_inliers } => {
                write!(f, "no consensus: best hypothesis had {best_inliers} inliers")
            }
        }
    }
}

impl std::error::Error for RegistrationError {}

/// Rigid tissue motion recovered from ROI correspondences, mapping reference
/// (initial) camera-frame points onto their current positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TissuePoseEstimate {
    pub transform: RigidTransform,
    pub inlier_count: usize,
    pub mean_inlier_residual_mm: f64,
}

/// Least-squares rigid transform mapping `initial[i]` onto `current[i]`.
///
/// Centroids are removed, the cross-covariance `H = sum of outer products of
/// the centered pairs` is decomposed as `U S V^T`, and the rotation is
/// `V U^T`. When that product is a reflection the column of `V` belonging to
/// the smallest singular value is negated and the product recomputed, which
/// yields the optimal proper rotation. The translation then carries the
/// initial centroid onto the current one.
pub fn kabsch_fit(
    initial: &[Vector3<f64>],
    current: &[Vector3<f64>],
) -> Result<RigidTransform, RegistrationError> {
    if initial.len() != current.len() {
        return Err(RegistrationError::MismatchedLengths {
            initial: initial.len(),
            current: current.len(),
        });
    }
    if initial.len() < 3 {
        return Err(RegistrationError::TooFewPoints { found: initial.len() });
    }

    let n = initial.len() as f64;
    let c_init: Vector3<f64> = initial.iter().sum::<Vector3<f64>>() / n;
    let c_curr: Vector3<f64> = current.iter().sum::<Vector3<f64>>() / n;

    let mut h = Matrix3::<f64>::zeros();
    for (p, q) in initial.iter().zip(current.iter()) {
        h += (p - c_init) * (q - c_curr).transpose();
    }

    let svd = h.svd(true, true);
    let sv = svd.singular_values;
    // Rank below 2 means the centered points span at most a line, so the
    // rotation about that line is unobservable.
    if sv[1] <= 1e-12 + 1e-9 * sv[0] {
        return Err(RegistrationError::DegenerateGeometry);
    }
    let u = svd.u.expect("3x3 SVD always yields U");
    let v_t = svd.v_t.expect("3x3 SVD always yields V^T");
    let mut v = v_t.transpose();
    let mut r = v * u.transpose();
    if r.determinant() < 0.0 {
        v.column_mut(2).scale_mut(-1.0);
        r = v * u.transpose();
    }
    let rotation = Rotation3::from_matrix_unchecked(r);
    let translation = c_curr - rotation.apply(&c_init);
    Ok(RigidTransform::new(rotation, translation))
}

/// Sum of squared alignment residuals for a candidate transform.
pub fn alignment_residual(
    transform: &RigidTransform,
    initial: &[Vector3<f64>],
    current: &[Vector3<f64>],
) -> f64 {
    initial
        .iter()
        .zip(current.iter())
        .map(|(p, q)| (transform.apply(p) - q).norm_squared())
        .sum()
}

/// Robustly estimates tissue motion from the tracked ROI set.
///
/// Tracking ROIs with a valid current point, taken in id order, feed a
/// RANSAC loop: each iteration fits a rigid transform to three sampled
/// correspondences and scores it by inlier count under the configured
/// residual threshold. Hypotheses are ranked by inlier count, then lower
/// mean inlier residual, then earlier iteration. The winner is refined by
/// refitting on its inliers until the inlier set stabilizes.
///
/// Stopped ROIs never participate, so removing them leaves the estimate
/// bit-identical under the same RNG.
pub fn estimate_pose_ransac(
    rois: &[Roi],
    config: &TrackerConfig,
    rng: &mut impl Rng,
) -> Result<TissuePoseEstimate, RegistrationError> {
    let mut tracked: Vec<&Roi> = rois
        .iter()
        .filter(|r| r.state == RoiState::Tracking && r.current_point.is_some())
        .collect();
    tracked.sort_by_key(|r| r.id);
    let initial: Vec<Vector3<f64>> = tracked.iter().map(|r| r.reference_point).collect();
    let current: Vec<Vector3<f64>> =
        tracked.iter().map(|r| r.current_point.unwrap()).collect();

    if tracked.len() < 3 {
        return Err(RegistrationError::TooFewRois { found: tracked.len() });
    }

    let threshold = config.ransac_inlier_threshold_mm;
    let classify = |t: &RigidTransform| -> (Vec<usize>, f64) {
        let mut inliers = Vec::new();
        let mut residual_sum = 0.0;
        for (i, (p, q)) in initial.iter().zip(current.iter()).enumerate() {
            let r = (t.apply(p) - q).norm();
            if r <= threshold {
                inliers.push(i);
                residual_sum += r;
            }
        }
        let mean = if inliers.is_empty() { f64::INFINITY } else { residual_sum / inliers.len() as f64 };
        (inliers, mean)
    };

    let mut best: Option<(Vec<usize>, f64, RigidTransform)> = None;
    for _ in 0..config.ransac_iterations {
        let sample = rand::seq::index::sample(rng, tracked.len(), 3);
        let tri_init: Vec<Vector3<f64>> = sample.iter().map(|i| initial[i]).collect();
        let tri_curr: Vec<Vector3<f64>> = sample.iter().map(|i| current[i]).collect();
        let hypothesis = match kabsch_fit(&tri_init, &tri_curr) {
            Ok(t) => t,
            Err(_) => continue,
        };
        let (inliers, mean) = classify(&hypothesis);
        let better = match &best {
            None => true,
            Some((best_in, best_mean, _)) => {
                inliers.len() > best_in.len()
                    || (inliers.len() == best_in.len() && mean < *best_mean)
            }
        };
        if better {
            best = Some((inliers, mean, hypothesis));
        }
    }

    let (mut inliers, _, hypothesis) = best.ok_or(RegistrationError::NoConsensus { best_inliers: 0 })?;
    if inliers.len() < 3 {
        return Err(RegistrationError::NoConsensus { best_inliers: inliers.len() });
    }

    let gather = |idx: &[usize]| -> (Vec<Vector3<f64>>, Vec<Vector3<f64>>) {
        (idx.iter().map(|&i| initial[i]).collect(), idx.iter().map(|&i| current[i]).collect())
    };

    let mut transform = {
        let (pi, pc) = gather(&inliers);
        kabsch_fit(&pi, &pc).unwrap_or(hypothesis)
    };
    // Re-classifying after the refit usually recovers borderline inliers;
    // iterate until the set stops changing (twice is enough in practice).
    for _ in 0..2 {
        let (new_inliers, _) = classify(&transform);
        if new_inliers.len() < 3 || new_inliers == inliers {
            break;
        }
        let (pi, pc) = gather(&new_inliers);
        match kabsch_fit(&pi, &pc) {
            Ok(t) => {
                transform = t;
                inliers = new_inliers;
            }
            Err(_) => break,
        }
    }

    let mean_residual = {
        let (pi, pc) = gather(&inliers);
        pi.iter()
            .zip(pc.iter())
            .map(|(p, q)| (transform.apply(p) - q).norm())
            .sum::<f64>()
            / inliers.len() as f64
    };

    Ok(TissuePoseEstimate {
        transform,
        inlier_count: inliers.len(),
        mean_inlier_residual_mm: mean_residual,
    })
}
