use crate::error::{Error, Result};
use crate::topology::MolecularSystem;

/// Per-atom nonnegative superposition weights with at least one positive entry.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentWeights(Vec<f64>);

impl AlignmentWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidParameter(
                "alignment weights must be finite and nonnegative".into(),
            ));
        }
        if !weights.iter().any(|&w| w > 0.0) {
            return Err(Error::DegenerateAlignment);
        }
        Ok(AlignmentWeights(weights))
    }

    pub fn uniform(n: usize) -> Self {
        AlignmentWeights(vec![1.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub const LIGAND_OF_INTEREST_WEIGHT: f64 = 10.0;

/// Backbone-trace weights: 10 for the ligand of interest, 1 for C-alpha / C1'
/// and every other ligand atom, 0 for side-chain atoms.
///
/// A system with no positively weighted atom yields
/// [`Error::DegenerateAlignment`], the same error `kabsch_weighted` reports.
pub fn default_alignment_weights(
    system: &MolecularSystem,
    ligand_of_interest: Option<usize>,
) -> Result<AlignmentWeights> {
    let w = (0..system.n_atoms())
        .map(|a| {
            if Some(system.atom(a).chain_index) == ligand_of_interest && system.is_ligand(a) {
                LIGAND_OF_INTEREST_WEIGHT
            } else if system.is_backbone_anchor(a) || system.is_ligand(a) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    AlignmentWeights::new(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::fixtures::*;
    use crate::topology::{ChainSpec, MoleculeClass, ResidueSpec};

    #[test]
    fn protein_and_ligand_weights() {
        let sys = system(
            vec![backbone_chain("A", 1, 2), ligand_chain("L", 2, "LIG", &["C", "N"]), ligand_chain("M", 3, "HOH", &["O"])],
            vec![],
        );
        let w = default_alignment_weights(&sys, None).unwrap();
        assert_eq!(w.as_slice(), &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let w = default_alignment_weights(&sys, Some(1)).unwrap();
        assert_eq!(&w.as_slice()[8..], &[10.0, 10.0, 1.0]);
    }

    #[test]
    fn sidechain_only_system_is_degenerate() {
        let chain = ChainSpec {
            id: "A".into(),
            entity_id: 1,
            molecule_class: MoleculeClass::Protein,
            residues: vec![ResidueSpec {
                name: "SER".into(),
                atoms: vec![atom("CB", "C"), atom("OG", "O")],
            }],
        };
        let sys = system(vec![chain], vec![]);
        assert!(matches!(
            default_alignment_weights(&sys, None),
            Err(Error::DegenerateAlignment)
        ));
    }
}
