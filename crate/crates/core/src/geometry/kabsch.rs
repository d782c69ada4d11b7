use nalgebra::{Matrix3, Rotation3, SymmetricEigen};
use rand::Rng;

use super::{AlignmentWeights, Vec3};
use crate::error::{Error, Result};

/// Proper rotation followed by a translation: `p ↦ R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn apply_all(&self, pts: &[Vec3]) -> Vec<Vec3> {
        pts.iter().map(|p| self.apply(p)).collect()
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn is_proper(&self, tol: f64) -> bool {
        let r = &self.rotation;
        (r.determinant() - 1.0).abs() < tol && (r.transpose() * r - Matrix3::identity()).abs().max() < tol
    }

    /// Uniformly random rotation with a Gaussian translation of scale `shift`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, shift: f64) -> Self {
        // Random unit quaternion via Shoemake's method.
        let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
        let tau = std::f64::consts::TAU;
        let q = nalgebra::Quaternion::new(
            (u1).sqrt() * (tau * u3).cos(),
            (1.0 - u1).sqrt() * (tau * u2).sin(),
            (1.0 - u1).sqrt() * (tau * u2).cos(),
            (u1).sqrt() * (tau * u3).sin(),
        );
        let rot = nalgebra::UnitQuaternion::from_quaternion(q);
        let t = Vec3::new(
            rng.random::<f64>() - 0.5,
            rng.random::<f64>() - 0.5,
            rng.random::<f64>() - 0.5,
        ) * (2.0 * shift);
        RigidTransform {
            rotation: *rot.to_rotation_matrix().matrix(),
            translation: t,
        }
    }

    pub fn from_rotation(rotation: Rotation3<f64>) -> Self {
        RigidTransform {
            rotation: *rotation.matrix(),
            translation: Vec3::zeros(),
        }
    }
}

fn weighted_centroid(pts: &[Vec3], w: &[f64], total: f64) -> Vec3 {
    pts.iter().zip(w).map(|(p, w)| p * *w).sum::<Vec3>() / total
}

/// Spread of a weighted point cloud: all eigenvalues of its covariance, ascending.
fn spread(pts: &[Vec3], w: &[f64], c: &Vec3) -> [f64; 3] {
    let mut cov = Matrix3::zeros();
    for (p, w) in pts.iter().zip(w) {
        let d = p - c;
        cov += d * d.transpose() * *w;
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(cov).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    [ev[0], ev[1], ev[2]]
}

fn is_degenerate(ev: [f64; 3]) -> bool {
    ev[2] <= 1e-20 || ev[1] <= 1e-10 * ev[2]
}

/// Weighted Kabsch-Umeyama superposition. Returns the proper rigid transform
/// minimising Σ wᵢ |R mobileᵢ + t − targetᵢ|².
pub fn kabsch_weighted(
    mobile: &[Vec3],
    target: &[Vec3],
    weights: &AlignmentWeights,
) -> Result<RigidTransform> {
    let w = weights.as_slice();
    if mobile.len() != target.len() {
        return Err(Error::ShapeMismatch {
            expected: mobile.len(),
            got: target.len(),
        });
    }
    if w.len() != mobile.len() {
        return Err(Error::ShapeMismatch {
            expected: mobile.len(),
            got: w.len(),
        });
    }
    if w.iter().filter(|&&x| x > 0.0).count() < 3 {
        return Err(Error::DegenerateAlignment);
    }
    let total: f64 = w.iter().sum();
    let cm = weighted_centroid(mobile, w, total);
    let ct = weighted_centroid(target, w, total);
    if is_degenerate(spread(mobile, w, &cm)) || is_degenerate(spread(target, w, &ct)) {
        return Err(Error::DegenerateAlignment);
    }

    let mut h = Matrix3::zeros();
    for ((m, t), w) in mobile.iter().zip(target).zip(w) {
        h += (m - cm) * (t - ct).transpose() * *w;
    }
    let svd = h.svd(true, true);
    let u = svd.u.ok_or(Error::DegenerateAlignment)?;
    let v = svd.v_t.ok_or(Error::DegenerateAlignment)?.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let correction = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, d));
    let rotation = v * correction * u.transpose();
    Ok(RigidTransform {
        rotation,
        translation: ct - rotation * cm,
    })
}

/// Unweighted single-pass superposition (no outlier rejection cycles).
pub fn superpose(mobile: &[Vec3], target: &[Vec3]) -> Result<RigidTransform> {
    kabsch_weighted(mobile, target, &AlignmentWeights::uniform(mobile.len()))
}
