//! Shared numerical substrate: rigid superposition, RMSD, LDDT, FAPE,
//! distance maps and pocket definitions.

mod fape;
mod kabsch;
mod lddt;
mod pocket;
mod weights;

pub use fape::{fape, fape_frames, fape_with_grad, FapeFrames, FapeOptions};
pub use kabsch::{kabsch_weighted, superpose, RigidTransform};
pub use lddt::{
    lddt, lddt_on_atoms, per_atom_lddt, smooth_lddt, smooth_lddt_with_grad, LddtAtoms,
    LddtOptions,
};
pub use pocket::{
    detect_pocket, pocket_aligned_ligand_rmsd, pocket_aligned_rmsd_between, ChainMapping,
    ResidueRef,
};
pub use weights::{default_alignment_weights, AlignmentWeights};

use std::ops::{Deref, DerefMut};

use nalgebra::DMatrix;

pub type Vec3 = nalgebra::Vector3<f64>;

/// Where a coordinate set came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Provenance {
    Prior,
    Intermediate,
    Denoised,
    #[default]
    Reference,
}

/// An N×3 coordinate set in Å.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Conformation {
    pub coords: Vec<Vec3>,
    pub provenance: Provenance,
}

impl Conformation {
    pub fn new(coords: Vec<Vec3>, provenance: Provenance) -> Self {
        Conformation { coords, provenance }
    }

    pub fn reference(coords: Vec<Vec3>) -> Self {
        Self::new(coords, Provenance::Reference)
    }

    pub fn transformed(&self, t: &RigidTransform) -> Self {
        Conformation {
            coords: self.coords.iter().map(|p| t.apply(p)).collect(),
            provenance: self.provenance,
        }
    }
}

impl Deref for Conformation {
    type Target = [Vec3];
    fn deref(&self) -> &[Vec3] {
        &self.coords
    }
}

impl DerefMut for Conformation {
    fn deref_mut(&mut self) -> &mut [Vec3] {
        &mut self.coords
    }
}

pub fn centroid(coords: &[Vec3]) -> Vec3 {
    let sum: Vec3 = coords.iter().sum();
    sum / coords.len().max(1) as f64
}

/// Plain RMSD over corresponding points, no superposition.
pub fn rmsd(a: &[Vec3], b: &[Vec3]) -> f64 {
    assert_eq!(a.len(), b.len());
    if a.is_empty() {
        return 0.0;
    }
    let ss: f64 = a.iter().zip(b).map(|(p, q)| (p - q).norm_squared()).sum();
    (ss / a.len() as f64).sqrt()
}

/// Weighted squared deviation Σ wᵢ |aᵢ − bᵢ|².
pub fn weighted_sq_deviation(a: &[Vec3], b: &[Vec3], w: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(w)
        .map(|((p, q), w)| w * (p - q).norm_squared())
        .sum()
}

/// RMSD after a single unweighted Kabsch superposition of `mobile` onto `target`.
pub fn aligned_rmsd(mobile: &[Vec3], target: &[Vec3]) -> crate::Result<f64> {
    let t = superpose(mobile, target)?;
    let moved: Vec<Vec3> = mobile.iter().map(|p| t.apply(p)).collect();
    Ok(rmsd(&moved, target))
}

/// Pairwise Euclidean distances over `subset` (symmetric, zero diagonal).
pub fn distance_map(coords: &[Vec3], subset: &[usize]) -> DMatrix<f64> {
    let n = subset.len();
    let mut m = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in (a + 1)..n {
            let d = (coords[subset[a]] - coords[subset[b]]).norm();
            m[(a, b)] = d;
            m[(b, a)] = d;
        }
    }
    m
}


#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn distance_map_basics() {
        let pts = vec![Vec3::zeros(), Vec3::new(3.0, 4.0, 0.0)];
        let m = distance_map(&pts, &[0, 1]);
        assert_eq!(m[(0, 1)], 5.0);
        assert_eq!(m[(1, 0)], 5.0);
        let same = vec![Vec3::new(1.0, 1.0, 1.0); 4];
        assert!(distance_map(&same, &[0, 1, 2, 3]).iter().all(|&d| d == 0.0));
    }

    #[test]
    fn distance_map_matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = testing::random_points(&mut rng, 20, 7.0);
        let subset: Vec<usize> = (0..20).collect();
        let m = distance_map(&pts, &subset);
        for i in 0..20 {
            for j in 0..20 {
                let naive = ((pts[i].x - pts[j].x).powi(2)
                    + (pts[i].y - pts[j].y).powi(2)
                    + (pts[i].z - pts[j].z).powi(2))
                .sqrt();
                assert!((m[(i, j)] - naive).abs() < 1e-12);
            }
        }
    }
}
