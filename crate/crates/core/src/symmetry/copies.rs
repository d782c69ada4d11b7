use crate::error::{Error, Result};
use crate::geometry::{pocket_aligned_rmsd_between, Vec3};
use crate::topology::{MolecularSystem, MoleculeClass};

use super::assignment::min_cost_assignment;

pub const MAX_LIGAND_COPIES: usize = 10;

/// Ligand chains whose residue names, joined with '-', equal `code`.
pub fn ligand_copies(system: &MolecularSystem, code: &str) -> Vec<usize> {
    system
        .chains()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.class == MoleculeClass::Ligand)
        .filter(|(_, c)| {
            let label: Vec<&str> = c.residues.iter().map(|r| r.name.as_str()).collect();
            label.join("-") == code
        })
        .map(|(i, _)| i)
        .collect()
}

/// Minimum pocket-aligned RMSD over pairings of predicted to reference
/// copies of ligand `code`: sqrt of the mean squared per-pair RMSD under the
/// optimal assignment of the N×N pairwise table.
pub fn ligand_copy_min_rmsd(
    pred: &[Vec3],
    reference: &[Vec3],
    system: &MolecularSystem,
    code: &str,
) -> Result<f64> {
    let copies = ligand_copies(system, code);
    if copies.is_empty() {
        return Err(Error::InvalidParameter(format!("no ligand copies labelled {code}")));
    }
    if copies.len() > MAX_LIGAND_COPIES {
        return Err(Error::CopyLimit(copies.len()));
    }
    let mut table = vec![vec![0.0; copies.len()]; copies.len()];
    for (p, &pc) in copies.iter().enumerate() {
        for (r, &rc) in copies.iter().enumerate() {
            let v = pocket_aligned_rmsd_between(pred, reference, system, rc, pc, None)?;
            table[p][r] = v * v;
        }
    }
    let assign = min_cost_assignment(&table);
    let total: f64 = assign.iter().enumerate().map(|(p, &r)| table[p][r]).sum();
    Ok((total / copies.len() as f64).sqrt())
}
