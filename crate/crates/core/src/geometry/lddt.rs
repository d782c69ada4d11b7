//! Local distance difference test (LDDT) and its sigmoid relaxation.
//!
//! Pairs are drawn from the reference: atoms in different residues whose
//! reference distance is below the inclusion radius (15 Å, or 25 Å when either
//! atom belongs to a DNA/RNA chain). A pair is preserved at threshold τ when
//! |d_pred − d_ref| < τ. The score averages preserved fractions over
//! τ ∈ {0.5, 1, 2, 4} Å.

use super::Vec3;
use crate::error::{Error, Result};
use crate::topology::MolecularSystem;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LddtOptions {
    pub thresholds: Vec<f64>,
    pub protein_cutoff: f64,
    pub nucleic_cutoff: f64,
    /// Restrict to backbone atoms (bbLDDT).
    pub backbone_only: bool,
    /// Sigmoid steepness (1/Å) of the smooth variant.
    pub steepness: f64,
}

impl Default for LddtOptions {
    fn default() -> Self {
        LddtOptions {
            thresholds: vec![0.5, 1.0, 2.0, 4.0],
            protein_cutoff: 15.0,
            nucleic_cutoff: 25.0,
            backbone_only: false,
            steepness: 10.0,
        }
    }
}

/// Per-atom bookkeeping needed to enumerate LDDT pairs, decoupled from a
/// [`MolecularSystem`] so that atom-aligned subsets of different systems can
/// be compared.
#[derive(Debug, Clone, PartialEq)]
pub struct LddtAtoms {
    /// Residue group id; pairs within one group are excluded.
    pub residue: Vec<usize>,
    pub nucleic: Vec<bool>,
    pub include: Vec<bool>,
}

impl LddtAtoms {
    pub fn from_system(system: &MolecularSystem, opts: &LddtOptions) -> Self {
        let mut residue = Vec::with_capacity(system.n_atoms());
        let mut offsets = Vec::with_capacity(system.chains().len());
        let mut acc = 0;
        for c in system.chains() {
            offsets.push(acc);
            acc += c.residues.len();
        }
        for a in system.atoms() {
            residue.push(offsets[a.chain_index] + a.residue_index);
        }
        LddtAtoms {
            residue,
            nucleic: (0..system.n_atoms())
                .map(|a| system.chain_class(a).is_nucleic())
                .collect(),
            include: (0..system.n_atoms())
                .map(|a| !opts.backbone_only || system.is_backbone(a))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.residue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residue.is_empty()
    }
}

struct Contact {
    i: usize,
    j: usize,
    d_ref: f64,
}

fn contacts(reference: &[Vec3], atoms: &LddtAtoms, opts: &LddtOptions) -> Vec<Contact> {
    let n = atoms.len();
    let mut out = Vec::new();
    for i in 0..n {
        if !atoms.include[i] {
            continue;
        }
        for j in (i + 1)..n {
            if !atoms.include[j] || atoms.residue[i] == atoms.residue[j] {
                continue;
            }
            let cutoff = if atoms.nucleic[i] || atoms.nucleic[j] {
                opts.nucleic_cutoff
            } else {
                opts.protein_cutoff
            };
            let d_ref = (reference[i] - reference[j]).norm();
            if d_ref < cutoff {
                out.push(Contact { i, j, d_ref });
            }
        }
    }
    out
}

fn check_len(pred: &[Vec3], reference: &[Vec3], atoms: &LddtAtoms) -> Result<()> {
    if pred.len() != reference.len() || pred.len() != atoms.len() {
        return Err(Error::ShapeMismatch {
            expected: atoms.len(),
            got: pred.len().min(reference.len()),
        });
    }
    Ok(())
}

fn preserved_fraction(dev: f64, thresholds: &[f64]) -> f64 {
    thresholds.iter().filter(|&&t| dev < t).count() as f64 / thresholds.len() as f64
}

pub fn lddt_on_atoms(
    pred: &[Vec3],
    reference: &[Vec3],
    atoms: &LddtAtoms,
    opts: &LddtOptions,
) -> Result<f64> {
    check_len(pred, reference, atoms)?;
    let pairs = contacts(reference, atoms, opts);
    if pairs.is_empty() {
        return Err(Error::NoContacts);
    }
    let total: f64 = pairs
        .iter()
        .map(|c| {
            let dev = ((pred[c.i] - pred[c.j]).norm() - c.d_ref).abs();
            preserved_fraction(dev, &opts.thresholds)
        })
        .sum();
    Ok(total / pairs.len() as f64)
}

pub fn lddt(
    pred: &[Vec3],
    reference: &[Vec3],
    system: &MolecularSystem,
    opts: &LddtOptions,
) -> Result<f64> {
    lddt_on_atoms(pred, reference, &LddtAtoms::from_system(system, opts), opts)
}

/// LDDT restricted to each atom's own contacts; `None` for atoms without any.
pub fn per_atom_lddt(
    pred: &[Vec3],
    reference: &[Vec3],
    system: &MolecularSystem,
    opts: &LddtOptions,
) -> Result<Vec<Option<f64>>> {
    let atoms = LddtAtoms::from_system(system, opts);
    check_len(pred, reference, &atoms)?;
    let n = atoms.len();
    let mut sum = vec![0.0; n];
    let mut count = vec![0usize; n];
    for c in contacts(reference, &atoms, opts) {
        let dev = ((pred[c.i] - pred[c.j]).norm() - c.d_ref).abs();
        let f = preserved_fraction(dev, &opts.thresholds);
        for a in [c.i, c.j] {
            sum[a] += f;
            count[a] += 1;
        }
    }
    Ok(sum
        .into_iter()
        .zip(count)
        .map(|(s, c)| (c > 0).then(|| s / c as f64))
        .collect())
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Sigmoid-relaxed LDDT and its gradient with respect to `pred`.
pub fn smooth_lddt_with_grad(
    pred: &[Vec3],
    reference: &[Vec3],
    atoms: &LddtAtoms,
    opts: &LddtOptions,
) -> Result<(f64, Vec<Vec3>)> {
    check_len(pred, reference, atoms)?;
    let pairs = contacts(reference, atoms, opts);
    if pairs.is_empty() {
        return Err(Error::NoContacts);
    }
    let k = opts.steepness;
    let scale = 1.0 / (pairs.len() as f64 * opts.thresholds.len() as f64);
    let mut grad = vec![Vec3::zeros(); pred.len()];
    let mut total = 0.0;
    for c in &pairs {
        let diff = pred[c.i] - pred[c.j];
        let d = diff.norm();
        let delta = d - c.d_ref;
        let dev = delta.abs();
        let mut d_dev = 0.0;
        for &t in &opts.thresholds {
            let s = sigmoid(k * (t - dev));
            total += s;
            d_dev -= k * s * (1.0 - s);
        }
        if d > 0.0 && delta != 0.0 {
            let g = diff / d * (d_dev * delta.signum() * scale);
            grad[c.i] += g;
            grad[c.j] -= g;
        }
    }
    Ok((total * scale, grad))
}

pub fn smooth_lddt(
    pred: &[Vec3],
    reference: &[Vec3],
    system: &MolecularSystem,
    opts: &LddtOptions,
) -> Result<f64> {
    let atoms = LddtAtoms::from_system(system, opts);
    smooth_lddt_with_grad(pred, reference, &atoms, opts).map(|(v, _)| v)
}
