use crate::error::Result;
use crate::geometry::{aligned_rmsd, Conformation, Vec3};
use crate::topology::MolecularSystem;

use super::automorphism::{automorphisms, Automorphisms, DEFAULT_AUTOMORPHISM_CAP};

/// Bijection over atom indices. Applying it to coordinates gives
/// `out[i] = x[mapping[i]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomPermutation {
    pub mapping: Vec<usize>,
}

impl AtomPermutation {
    pub fn identity(n: usize) -> Self {
        Self {
            mapping: (0..n).collect(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.mapping.iter().enumerate().all(|(i, &m)| i == m)
    }

    pub fn apply(&self, x: &[Vec3]) -> Vec<Vec3> {
        self.mapping.iter().map(|&m| x[m]).collect()
    }
}

/// Automorphism groups of every multi-atom bonded component, computed once
/// per system so repeated permutation searches are cheap.
#[derive(Debug, Clone)]
pub struct SymmetryIndex {
    n_atoms: usize,
    groups: Vec<Automorphisms>,
}

impl SymmetryIndex {
    pub fn new(system: &MolecularSystem) -> Self {
        Self::with_cap(system, DEFAULT_AUTOMORPHISM_CAP)
    }

    pub fn with_cap(system: &MolecularSystem, cap: usize) -> Self {
        let groups = system
            .components()
            .into_iter()
            .filter(|c| c.len() > 1)
            .map(|c| automorphisms(system, &c, cap))
            .filter(|g| g.maps.len() > 1)
            .collect::<Vec<_>>();
        for g in &groups {
            if g.truncated {
                log::warn!(
                    "automorphism search capped at {} for a {}-atom component; using best of truncated list",
                    g.maps.len(),
                    g.atoms.len()
                );
            }
        }
        Self {
            n_atoms: system.n_atoms(),
            groups,
        }
    }

    /// Components with a nontrivial automorphism group.
    pub fn groups(&self) -> &[Automorphisms] {
        &self.groups
    }

    /// Per component, pick the automorphism minimizing the summed squared
    /// deviation of the permuted prediction to `target`. Ties keep the
    /// earliest candidate, so the identity wins when nothing is better.
    pub fn best_permutation(&self, pred: &[Vec3], target: &[Vec3]) -> AtomPermutation {
        assert_eq!(pred.len(), self.n_atoms);
        assert_eq!(target.len(), self.n_atoms);
        let mut perm = AtomPermutation::identity(self.n_atoms);
        for g in &self.groups {
            let mut best = 0;
            let mut best_cost = f64::INFINITY;
            for (k, map) in g.maps.iter().enumerate() {
                // Position atoms[p] receives the prediction of its image.
                let cost: f64 = g
                    .atoms
                    .iter()
                    .zip(map)
                    .map(|(&a, &img)| (pred[img] - target[a]).norm_squared())
                    .sum();
                if cost < best_cost {
                    best_cost = cost;
                    best = k;
                }
            }
            for (&a, &img) in g.atoms.iter().zip(&g.maps[best]) {
                perm.mapping[a] = img;
            }
        }
        perm
    }

    /// Lowest aligned RMSD over relabelings of `pred` by the component
    /// automorphisms. Each component's map is chosen in turn with a full
    /// superposition per candidate, sweeping until nothing improves.
    pub fn aligned_rmsd(&self, pred: &[Vec3], target: &[Vec3]) -> Result<f64> {
        let mut perm = AtomPermutation::identity(self.n_atoms);
        let mut best = aligned_rmsd(pred, target)?;
        for _ in 0..4 {
            let mut improved = false;
            for g in &self.groups {
                for map in &g.maps {
                    let mut trial = perm.clone();
                    for (&a, &img) in g.atoms.iter().zip(map) {
                        trial.mapping[a] = img;
                    }
                    let r = aligned_rmsd(&trial.apply(pred), target)?;
                    if r < best - 1e-12 {
                        best = r;
                        perm = trial;
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        Ok(best)
    }
}

/// Symmetry-correct `pred` against `target`. Builds the automorphism index on
/// the fly; use [`SymmetryIndex`] directly inside loops.
pub fn optimal_graph_permutation(
    pred: &Conformation,
    target: &Conformation,
    system: &MolecularSystem,
) -> (AtomPermutation, Conformation) {
    let index = SymmetryIndex::new(system);
    let perm = index.best_permutation(pred, target);
    let coords = perm.apply(pred);
    (perm, Conformation::new(coords, pred.provenance.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::testing::random_points;
    use crate::symmetry::automorphism::tests::ring_system;
    use crate::symmetry::is_automorphism;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn symmetric_rmsd_ignores_ring_flips() {
        let sys = ring_system(6, "C");
        let mut x = hexagon();
        x[0].z = 0.8;
        // Mirror across the axis between atoms 0 and 1.
        let flipped: Vec<Vec3> = (0..6).map(|k| x[(7 - k) % 6]).collect();
        let index = SymmetryIndex::new(&sys);
        assert!(aligned_rmsd(&flipped, &x).unwrap() > 0.1);
        assert!(index.aligned_rmsd(&flipped, &x).unwrap() < 1e-9);
    }

    fn sq_dev(a: &[Vec3], b: &[Vec3]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm_squared()).sum()
    }

    fn hexagon() -> Vec<Vec3> {
        (0..6)
            .map(|k| {
                let th = std::f64::consts::PI / 3.0 * k as f64;
                Vec3::new(1.39 * th.cos(), 1.39 * th.sin(), 0.0)
            })
            .collect()
    }

    #[test]
    fn identical_input_gives_identity() {
        let sys = ring_system(6, "C");
        let x = Conformation::reference(hexagon());
        let (perm, out) = optimal_graph_permutation(&x, &x, &sys);
        assert!(perm.is_identity());
        assert_eq!(out.coords, x.coords);
    }

    #[test]
    fn rotated_labels_are_recovered() {
        let sys = ring_system(6, "C");
        let target = hexagon();
        // Prediction has every label shifted one position around the ring.
        let pred: Vec<Vec3> = (0..6).map(|i| target[(i + 1) % 6]).collect();
        assert!(sq_dev(&pred, &target) > 1.0);
        let (perm, out) = optimal_graph_permutation(
            &Conformation::reference(pred),
            &Conformation::reference(target.clone()),
            &sys,
        );
        assert!(sq_dev(&out, &target) < 1e-20);
        assert!(is_automorphism(&sys, &(0..6).collect::<Vec<_>>(), &perm.mapping));
    }

    proptest! {
        #[test]
        fn correction_never_increases_deviation(seed in any::<u64>(), noise in 0.0f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sys = ring_system(6, "C");
            let target = hexagon();
            let jitter = random_points(&mut rng, 6, noise);
            let pred: Vec<Vec3> = target.iter().zip(&jitter).map(|(a, b)| a + b).collect();
            let index = SymmetryIndex::new(&sys);
            let perm = index.best_permutation(&pred, &target);
            let after = perm.apply(&pred);
            prop_assert!(sq_dev(&after, &target) <= sq_dev(&pred, &target) + 1e-12);
            prop_assert!(is_automorphism(&sys, &(0..6).collect::<Vec<_>>(), &perm.mapping));
        }
    }
}
