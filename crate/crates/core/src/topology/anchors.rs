use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::MolecularSystem;
use crate::error::{Error, Result};

/// Budget-limited subset of atoms used for coarse conditioning and
/// distance-error heads. Indices are sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnchorSet {
    pub indices: Vec<usize>,
    pub budget: usize,
}

impl AnchorSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Every atom of the system, budget equal to the atom count.
    pub fn all(system: &MolecularSystem) -> Self {
        AnchorSet {
            indices: (0..system.n_atoms()).collect(),
            budget: system.n_atoms(),
        }
    }
}

fn take(rng: &mut ChaCha8Rng, pool: &[usize], room: usize, out: &mut Vec<usize>) {
    if pool.len() <= room {
        out.extend_from_slice(pool);
    } else {
        out.extend(index::sample(rng, pool.len(), room).into_iter().map(|k| pool[k]));
    }
}

/// Three-stage anchor selection: backbone C-alpha / C1' first, then ligand and
/// non-standard residue atoms, then the remaining standard-residue atoms.
/// Each stage samples without replacement when it overflows the budget.
pub fn select_anchors(system: &MolecularSystem, budget: usize, seed: u64) -> Result<AnchorSet> {
    if budget == 0 {
        return Err(Error::InvalidParameter("anchor budget must be >= 1".into()));
    }
    let n = system.n_atoms();
    if n == 0 {
        return Err(Error::NoAtoms);
    }

    let mut backbone = Vec::new();
    let mut special = Vec::new();
    let mut rest = Vec::new();
    for a in 0..n {
        if system.is_backbone_anchor(a) {
            backbone.push(a);
        } else if system.is_ligand(a) || !system.is_standard_residue(a) {
            special.push(a);
        } else {
            rest.push(a);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::with_capacity(budget.min(n));
    for pool in [&backbone, &special, &rest] {
        let room = budget - chosen.len();
        if room == 0 {
            break;
        }
        take(&mut rng, pool, room, &mut chosen);
    }
    chosen.sort_unstable();
    Ok(AnchorSet {
        indices: chosen,
        budget,
    })
}
