//! Globular polymer prior: short overdamped Langevin dynamics that pulls
//! bonded atoms together, residues and chains into blobs, and everything
//! into a sphere. Also the greedy entity permutation used in training.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{centroid, Conformation, Provenance, Vec3};
use crate::topology::MolecularSystem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorParams {
    pub dt: f64,
    pub steps: usize,
    /// Confinement radius in Å. `None` derives it from the residue count.
    pub sphere_r: Option<f64>,
    pub res_r: f64,
    pub ent_r: f64,
    /// Noise amplitude factor; the update adds `noise_scale·√dt·ε`.
    /// Zero gives the deterministic test mode.
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for PriorParams {
    fn default() -> Self {
        Self {
            dt: 0.25,
            steps: 64,
            sphere_r: None,
            res_r: 4.0,
            ent_r: 10.0,
            noise_scale: 2.0,
            seed: 0,
        }
    }
}

/// `max(8, 4·N_res^(1/3))` Å.
pub fn default_sphere_radius(n_residues: usize) -> f64 {
    (4.0 * (n_residues as f64).cbrt()).max(8.0)
}

impl PriorParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.dt > 0.0) {
            return bad("dt must be > 0");
        }
        if self.steps == 0 {
            return bad("steps must be >= 1");
        }
        if !(self.res_r > 0.0 && self.ent_r > 0.0 && self.sphere_r.map_or(true, |r| r > 0.0)) {
            return bad("radii must be > 0");
        }
        if !(self.noise_scale >= 0.0) {
            return bad("noise_scale must be >= 0");
        }
        Ok(())
    }

    pub fn sphere_radius(&self, system: &MolecularSystem) -> f64 {
        self.sphere_r
            .unwrap_or_else(|| default_sphere_radius(system.n_residues()))
    }
}

/// Row-sparse averaging operator; each row's weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRows {
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    fn averaging(groups: impl Iterator<Item = Vec<usize>>) -> Self {
        Self {
            rows: groups
                .map(|g| {
                    let w = 1.0 / g.len() as f64;
                    g.into_iter().map(|j| (j, w)).collect()
                })
                .collect(),
        }
    }

    pub fn apply(&self, x: &[Vec3]) -> Vec<Vec3> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, w)| x[j] * w).sum())
            .collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().map(|e| e.1).sum()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborOperators {
    pub s_bond: SparseRows,
    pub s_residue: SparseRows,
    pub s_entity: SparseRows,
}

impl NeighborOperators {
    /// Bond rows average the bonded neighbours (self for unbonded atoms);
    /// residue and entity rows average the atom's residue / chain,
    /// including the atom itself.
    pub fn build(system: &MolecularSystem) -> Self {
        let n = system.n_atoms();
        let s_bond = SparseRows::averaging((0..n).map(|i| {
            let nb = system.neighbors(i);
            if nb.is_empty() {
                vec![i]
            } else {
                nb.to_vec()
            }
        }));
        let s_residue = SparseRows::averaging((0..n).map(|i| system.residue_of(i).atoms.clone().collect()));
        let s_entity = SparseRows::averaging(
            (0..n).map(|i| system.chain(system.atom(i).chain_index).atoms.clone().collect()),
        );
        Self {
            s_bond,
            s_residue,
            s_entity,
        }
    }
}

/// Deterministic part of one update.
pub fn prior_drift(ops: &NeighborOperators, x: &[Vec3], params: &PriorParams, sphere_r: f64) -> Vec<Vec3> {
    let sb = ops.s_bond.apply(x);
    let sr = ops.s_residue.apply(x);
    let se = ops.s_entity.apply(x);
    let (ir, ie, is) = (
        1.0 / (params.res_r * params.res_r),
        1.0 / (params.ent_r * params.ent_r),
        1.0 / (sphere_r * sphere_r),
    );
    (0..x.len())
        .map(|i| 2.0 * (sb[i] - x[i]) + (se[i] - x[i]) * ie + (sr[i] - x[i]) * ir - x[i] * is)
        .collect()
}

/// Run `params.steps` Langevin updates from `x0`.
pub fn langevin_relax<R: Rng>(
    x0: Vec<Vec3>,
    ops: &NeighborOperators,
    params: &PriorParams,
    sphere_r: f64,
    rng: &mut R,
) -> Vec<Vec3> {
    let mut x = x0;
    let amp = params.noise_scale * params.dt.sqrt();
    for _ in 0..params.steps {
        let drift = prior_drift(ops, &x, params, sphere_r);
        for (xi, di) in x.iter_mut().zip(&drift) {
            *xi += di * params.dt;
            if amp > 0.0 {
                *xi += standard_normal3(rng) * amp;
            }
        }
    }
    x
}

fn standard_normal3<R: Rng>(rng: &mut R) -> Vec3 {
    Vec3::new(
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
    )
}

/// Plain isotropic Gaussian with standard deviation `sphere_r`; the starting
/// point of the Langevin run and a comparison baseline.
pub fn sample_gaussian_baseline(system: &MolecularSystem, params: &PriorParams) -> Result<Conformation> {
    params.validate()?;
    let r = params.sphere_radius(system);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let x = (0..system.n_atoms()).map(|_| standard_normal3(&mut rng) * r).collect();
    Ok(Conformation::new(x, Provenance::Prior))
}

pub fn sample_prior(system: &MolecularSystem, params: &PriorParams) -> Result<Conformation> {
    sample_prior_with(system, &NeighborOperators::build(system), params)
}

/// As [`sample_prior`] with prebuilt operators, for repeated draws.
pub fn sample_prior_with(
    system: &MolecularSystem,
    ops: &NeighborOperators,
    params: &PriorParams,
) -> Result<Conformation> {
    params.validate()?;
    let r = params.sphere_radius(system);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let x0 = (0..system.n_atoms()).map(|_| standard_normal3(&mut rng) * r).collect();
    let x = langevin_relax(x0, ops, params, r, &mut rng);
    Ok(Conformation::new(x, Provenance::Prior))
}

fn chain_centroids(x: &[Vec3], system: &MolecularSystem) -> Vec<Vec3> {
    system
        .chains()
        .iter()
        .map(|c| centroid(&x[c.atoms.clone()]))
        .collect()
}

fn nearest_chain(centroids: &[Vec3], c: usize) -> Option<usize> {
    (0..centroids.len())
        .filter(|&o| o != c)
        .min_by(|&a, &b| {
            let da = (centroids[a] - centroids[c]).norm_squared();
            let db = (centroids[b] - centroids[c]).norm_squared();
            da.total_cmp(&db).then(a.cmp(&b))
        })
}

/// Greedily reassign whole-chain prior blocks among copies of each entity so
/// that the chain-level nearest-neighbour relation agrees with the
/// reference's. Entities are visited in ascending id and their slots in
/// chain order; for each slot the candidate block maximizing the number of
/// agreeing chains wins, then the one whose centroid distances best match
/// the reference, then the block already there.
pub fn permute_prior_entities(
    prior: &Conformation,
    reference: &Conformation,
    system: &MolecularSystem,
) -> Conformation {
    let n_chains = system.chains().len();
    let prior_c = chain_centroids(prior, system);
    let ref_c = chain_centroids(reference, system);
    let ref_nn: Vec<Option<usize>> = (0..n_chains).map(|c| nearest_chain(&ref_c, c)).collect();

    // source[slot] = chain whose prior block is placed at `slot`.
    let mut source: Vec<usize> = (0..n_chains).collect();
    let arranged = |source: &[usize]| -> Vec<Vec3> { source.iter().map(|&s| prior_c[s]).collect() };

    for group in system.entity_groups().values().filter(|g| g.len() > 1) {
        let mut free: Vec<usize> = group.clone();
        for (k, &slot) in group.iter().enumerate() {
            let mut best: Option<(usize, f64, bool, usize)> = None;
            for &cand in &free {
                // Tentative: cand at slot, remaining free blocks fill the
                // remaining slots in order.
                let mut trial = source.clone();
                trial[slot] = cand;
                let mut rest = free.iter().filter(|&&f| f != cand);
                for &later in &group[k + 1..] {
                    trial[later] = *rest.next().expect("group sizes match");
                }
                let cents = arranged(&trial);
                let agree = (0..n_chains)
                    .filter(|&c| nearest_chain(&cents, c) == ref_nn[c])
                    .count();
                let mismatch: f64 = (0..n_chains)
                    .filter(|&o| o != slot)
                    .map(|o| ((cents[slot] - cents[o]).norm() - (ref_c[slot] - ref_c[o]).norm()).abs())
                    .sum();
                let keep = cand == source[slot];
                let better = match best {
                    None => true,
                    Some((ba, bm, bk, _)) => {
                        agree > ba || (agree == ba && (mismatch < bm - 1e-9 || ((mismatch - bm).abs() <= 1e-9 && keep && !bk)))
                    }
                };
                if better {
                    best = Some((agree, mismatch, keep, cand));
                }
            }
            let chosen = best.expect("free is nonempty").3;
            free.retain(|&f| f != chosen);
            source[slot] = chosen;
        }
    }

    let mut out = prior.coords.clone();
    for (slot, &src) in source.iter().enumerate() {
        if slot != src {
            let dst = system.chain(slot).atoms.clone();
            let from = system.chain(src).atoms.clone();
            out[dst].copy_from_slice(&prior.coords[from]);
        }
    }
    Conformation::new(out, prior.provenance.clone())
}
