use std::collections::{BTreeMap, HashMap};

use super::{rmsd, superpose, Vec3};
use crate::error::{Error, Result};
use crate::topology::MolecularSystem;

/// (chain index, residue ordinal) pair.
pub type ResidueRef = (usize, usize);

/// Reference chain index → predicted chain index.
pub type ChainMapping = HashMap<usize, usize>;

/// Residues whose C-alpha lies within `radius` Å (inclusive) of any atom of
/// `ligand_chain` in `reference`. Sorted by (chain, residue).
pub fn detect_pocket(
    reference: &[Vec3],
    system: &MolecularSystem,
    ligand_chain: usize,
    radius: f64,
) -> Result<Vec<ResidueRef>> {
    let ligand = system
        .chains()
        .get(ligand_chain)
        .ok_or_else(|| Error::InvalidParameter(format!("ligand chain {ligand_chain} does not exist")))?;
    let ligand_atoms: Vec<Vec3> = ligand.atoms.clone().map(|a| reference[a]).collect();
    let r2 = radius * radius;
    let mut out = Vec::new();
    for (ci, chain) in system.chains().iter().enumerate() {
        if ci == ligand_chain || !chain.class.is_amino() {
            continue;
        }
        for ri in 0..chain.residues.len() {
            let Some(ca) = system.ca_atom(ci, ri) else {
                continue;
            };
            if ligand_atoms.iter().any(|l| (reference[ca] - l).norm_squared() <= r2) {
                out.push((ci, ri));
            }
        }
    }
    if out.is_empty() {
        return Err(Error::NoPocket);
    }
    Ok(out)
}

/// Pocket-aligned RMSD of predicted ligand chain `pred_ligand` against
/// reference ligand chain `ref_ligand` (identical atom layouts).
///
/// The reference pocket is every C-alpha within 10 Å of the reference ligand,
/// restricted to the chain contributing most pocket residues. The matching
/// C-alphas of the predicted chain (given by `mapping`, or else every chain of
/// the same entity, keeping the minimum) are superposed onto the reference
/// pocket in one closed-form pass, and the ligand RMSD is taken after that
/// transform.
pub fn pocket_aligned_rmsd_between(
    pred: &[Vec3],
    reference: &[Vec3],
    system: &MolecularSystem,
    ref_ligand: usize,
    pred_ligand: usize,
    mapping: Option<&ChainMapping>,
) -> Result<f64> {
    let pocket = detect_pocket(reference, system, ref_ligand, 10.0)?;
    let mut per_chain: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(c, r) in &pocket {
        per_chain.entry(c).or_default().push(r);
    }
    // Most residues wins; BTreeMap iteration makes ties go to the lowest chain.
    let (ref_chain, residues) = per_chain
        .iter()
        .fold(None::<(usize, &Vec<usize>)>, |best, (c, rs)| match best {
            Some((_, b)) if b.len() >= rs.len() => best,
            _ => Some((*c, rs)),
        })
        .expect("pocket is nonempty");
    if residues.len() < 3 {
        return Err(Error::PocketTooSmall(residues.len()));
    }

    let candidates: Vec<usize> = match mapping.and_then(|m| m.get(&ref_chain)) {
        Some(&c) => vec![c],
        None => {
            let entity = system.chain(ref_chain).entity_id;
            (0..system.chains().len())
                .filter(|&c| system.chain(c).entity_id == entity)
                .collect()
        }
    };

    let ref_ca: Vec<Vec3> = residues
        .iter()
        .map(|&r| reference[system.ca_atom(ref_chain, r).expect("pocket residue has CA")])
        .collect();
    let ref_lig: Vec<Vec3> = system.chain(ref_ligand).atoms.clone().map(|a| reference[a]).collect();
    let pred_lig_atoms = system.chain(pred_ligand).atoms.clone();
    if pred_lig_atoms.len() != ref_lig.len() {
        return Err(Error::ShapeMismatch {
            expected: ref_lig.len(),
            got: pred_lig_atoms.len(),
        });
    }

    let mut best: Option<f64> = None;
    let mut last_err = None;
    for c in candidates {
        let pred_ca: Option<Vec<Vec3>> = residues
            .iter()
            .map(|&r| system.ca_atom(c, r).map(|a| pred[a]))
            .collect();
        let Some(pred_ca) = pred_ca else {
            continue;
        };
        match superpose(&pred_ca, &ref_ca) {
            Ok(t) => {
                let moved: Vec<Vec3> = pred_lig_atoms.clone().map(|a| t.apply(&pred[a])).collect();
                let v = rmsd(&moved, &ref_lig);
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or(Error::PocketTooSmall(0)))
}

/// Pocket-aligned ligand heavy-atom RMSD for one ligand chain.
pub fn pocket_aligned_ligand_rmsd(
    pred: &[Vec3],
    reference: &[Vec3],
    system: &MolecularSystem,
    ligand_chain: usize,
    mapping: Option<&ChainMapping>,
) -> Result<f64> {
    pocket_aligned_rmsd_between(pred, reference, system, ligand_chain, ligand_chain, mapping)
}
