//! Molecular system model: atoms, bonds, residues, chains and entities.
//!
//! A [`MolecularSystem`] is built from a [`TopologyDoc`] (the serde form of the
//! topology JSON file) and validated once; afterwards it is immutable.

mod anchors;
mod msa;
mod orientation;
pub mod vocab;

pub use anchors::{select_anchors, AnchorSet};
pub use msa::{pair_msa, ChainMsa, MsaCell, MsaHit, PairedMsa};
pub use orientation::{bond_orientation_features, local_frame, LocalFrame};
pub(crate) use orientation::nearest_bonded as orientation_neighbors;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoleculeClass {
    Protein,
    Dna,
    Rna,
    Ligand,
    Peptide,
    Modified,
}

impl MoleculeClass {
    pub fn is_nucleic(self) -> bool {
        matches!(self, MoleculeClass::Dna | MoleculeClass::Rna)
    }

    pub fn is_amino(self) -> bool {
        matches!(
            self,
            MoleculeClass::Protein | MoleculeClass::Peptide | MoleculeClass::Modified
        )
    }

    pub fn is_polymer(self) -> bool {
        self != MoleculeClass::Ligand
    }
}

/// Bond order. Serialised as `1`, `2`, `3` or `"aromatic"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Integer code used in features; 0 is reserved for non-bonded pairs.
    pub fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

impl Serialize for BondOrder {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BondOrder::Aromatic => s.serialize_str("aromatic"),
            other => s.serialize_u8(other.code()),
        }
    }
}

impl<'de> Deserialize<'de> for BondOrder {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u8),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(1) => Ok(BondOrder::Single),
            Raw::Int(2) => Ok(BondOrder::Double),
            Raw::Int(3) => Ok(BondOrder::Triple),
            Raw::Str(s) if s.eq_ignore_ascii_case("aromatic") => Ok(BondOrder::Aromatic),
            Raw::Int(n) => Err(serde::de::Error::custom(format!(
                "bond order must be 1, 2, 3 or \"aromatic\", got {n}"
            ))),
            Raw::Str(s) => Err(serde::de::Error::custom(format!(
                "bond order must be 1, 2, 3 or \"aromatic\", got {s:?}"
            ))),
        }
    }
}

/// Sign of the signed volume spanned by the three ordered neighbour vectors
/// of a tetrahedral centre.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomSpec {
    pub name: String,
    pub element: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidueSpec {
    pub name: String,
    pub atoms: Vec<AtomSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub id: String,
    pub entity_id: u32,
    pub molecule_class: MoleculeClass,
    pub residues: Vec<ResidueSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BondSpec {
    pub i: usize,
    pub j: usize,
    pub order: BondOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StereoSpec {
    pub center: usize,
    pub neighbors: [usize; 3],
    pub parity: Parity,
}

pub const TOPOLOGY_SCHEMA_VERSION: u32 = 1;

fn default_version() -> u32 {
    TOPOLOGY_SCHEMA_VERSION
}

/// Serde form of the topology JSON document. Atom indices are global,
/// zero-based and follow document order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyDoc {
    #[serde(default = "default_version")]
    pub version: u32,
    pub chains: Vec<ChainSpec>,
    #[serde(default)]
    pub bonds: Vec<BondSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stereocenters: Vec<StereoSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub element: String,
    pub name: String,
    pub chain_index: usize,
    /// Ordinal of the residue within its chain.
    pub residue_index: usize,
    pub residue_name: String,
}

impl Atom {
    /// Hydrogens are never represented.
    pub fn is_heavy(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residue {
    pub name: String,
    pub atoms: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub id: String,
    pub entity_id: u32,
    pub class: MoleculeClass,
    pub residues: Vec<Residue>,
    pub atoms: Range<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub order: BondOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stereocenter {
    pub center: usize,
    pub neighbors: [usize; 3],
    pub parity: Parity,
}

#[derive(Debug, Clone)]
pub struct MolecularSystem {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    chains: Vec<Chain>,
    stereocenters: Vec<Stereocenter>,
    neighbors: Vec<Vec<usize>>,
    bond_orders: HashMap<(usize, usize), BondOrder>,
}

fn ordered(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

impl MolecularSystem {
    pub fn from_doc(doc: &TopologyDoc) -> Result<Self> {
        if doc.version != TOPOLOGY_SCHEMA_VERSION {
            return Err(Error::Topology(format!(
                "version: unsupported schema version {}",
                doc.version
            )));
        }
        let mut atoms = Vec::new();
        let mut chains = Vec::with_capacity(doc.chains.len());
        let mut seen_ids = HashSet::new();
        for (ci, cs) in doc.chains.iter().enumerate() {
            if cs.id.is_empty() {
                return Err(Error::Topology(format!("chains[{ci}].id: empty chain id")));
            }
            if !seen_ids.insert(cs.id.clone()) {
                return Err(Error::Topology(format!(
                    "chains[{ci}].id: duplicate chain id {:?}",
                    cs.id
                )));
            }
            if cs.residues.is_empty() {
                return Err(Error::Topology(format!("chains[{ci}].residues: chain has no residues")));
            }
            let chain_start = atoms.len();
            let mut residues = Vec::with_capacity(cs.residues.len());
            for (ri, rs) in cs.residues.iter().enumerate() {
                if rs.atoms.is_empty() {
                    return Err(Error::Topology(format!(
                        "chains[{ci}].residues[{ri}].atoms: residue has no atoms"
                    )));
                }
                let start = atoms.len();
                let mut names = HashSet::new();
                for (ai, a) in rs.atoms.iter().enumerate() {
                    let element = vocab::normalize_element(&a.element).ok_or_else(|| {
                        Error::Topology(format!(
                            "chains[{ci}].residues[{ri}].atoms[{ai}].element: {:?} is not a heavy element",
                            a.element
                        ))
                    })?;
                    let name = a.name.trim().to_string();
                    if name.is_empty() || !names.insert(name.clone()) {
                        return Err(Error::Topology(format!(
                            "chains[{ci}].residues[{ri}].atoms[{ai}].name: empty or duplicate atom name {:?}",
                            a.name
                        )));
                    }
                    atoms.push(Atom {
                        element,
                        name,
                        chain_index: ci,
                        residue_index: ri,
                        residue_name: rs.name.clone(),
                    });
                }
                residues.push(Residue {
                    name: rs.name.clone(),
                    atoms: start..atoms.len(),
                });
            }
            chains.push(Chain {
                id: cs.id.clone(),
                entity_id: cs.entity_id,
                class: cs.molecule_class,
                residues,
                atoms: chain_start..atoms.len(),
            });
        }
        if atoms.is_empty() {
            return Err(Error::NoAtoms);
        }

        let n = atoms.len();
        let mut bonds = Vec::with_capacity(doc.bonds.len());
        let mut bond_orders = HashMap::new();
        let mut neighbors = vec![Vec::new(); n];
        for (bi, b) in doc.bonds.iter().enumerate() {
            if b.i >= n || b.j >= n {
                return Err(Error::Topology(format!(
                    "bonds[{bi}]: atom index out of range (n_atoms = {n})"
                )));
            }
            if b.i == b.j {
                return Err(Error::Topology(format!("bonds[{bi}]: self bond on atom {}", b.i)));
            }
            if bond_orders.insert(ordered(b.i, b.j), b.order).is_some() {
                return Err(Error::Topology(format!(
                    "bonds[{bi}]: duplicate bond ({}, {})",
                    b.i, b.j
                )));
            }
            neighbors[b.i].push(b.j);
            neighbors[b.j].push(b.i);
            bonds.push(Bond {
                i: b.i,
                j: b.j,
                order: b.order,
            });
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }

        let mut stereocenters = Vec::with_capacity(doc.stereocenters.len());
        for (si, s) in doc.stereocenters.iter().enumerate() {
            let all = [s.center, s.neighbors[0], s.neighbors[1], s.neighbors[2]];
            if all.iter().any(|&a| a >= n) {
                return Err(Error::Topology(format!(
                    "stereocenters[{si}]: atom index out of range"
                )));
            }
            let distinct: HashSet<_> = all.iter().collect();
            if distinct.len() != 4 {
                return Err(Error::Topology(format!(
                    "stereocenters[{si}]: centre and neighbours must be distinct"
                )));
            }
            stereocenters.push(Stereocenter {
                center: s.center,
                neighbors: s.neighbors,
                parity: s.parity,
            });
        }

        let system = MolecularSystem {
            atoms,
            bonds,
            chains,
            stereocenters,
            neighbors,
            bond_orders,
        };
        system.check_entities()?;
        Ok(system)
    }

    fn check_entities(&self) -> Result<()> {
        let mut first: HashMap<u32, usize> = HashMap::new();
        for (ci, chain) in self.chains.iter().enumerate() {
            let Some(&ri) = first.get(&chain.entity_id) else {
                first.insert(chain.entity_id, ci);
                continue;
            };
            let reference = &self.chains[ri];
            let same_class = reference.class == chain.class;
            let same_layout = reference.residues.len() == chain.residues.len()
                && reference
                    .residues
                    .iter()
                    .zip(&chain.residues)
                    .all(|(a, b)| {
                        a.name == b.name
                            && a.atoms.len() == b.atoms.len()
                            && a.atoms.clone().zip(b.atoms.clone()).all(|(x, y)| {
                                self.atoms[x].name == self.atoms[y].name
                                    && self.atoms[x].element == self.atoms[y].element
                            })
                    });
            if !(same_class && same_layout) {
                return Err(Error::Topology(format!(
                    "chains[{ci}]: entity {} composition differs from chain {:?}",
                    chain.entity_id, reference.id
                )));
            }
        }
        Ok(())
    }

    pub fn to_doc(&self) -> TopologyDoc {
        TopologyDoc {
            version: TOPOLOGY_SCHEMA_VERSION,
            chains: self
                .chains
                .iter()
                .map(|c| ChainSpec {
                    id: c.id.clone(),
                    entity_id: c.entity_id,
                    molecule_class: c.class,
                    residues: c
                        .residues
                        .iter()
                        .map(|r| ResidueSpec {
                            name: r.name.clone(),
                            atoms: r
                                .atoms
                                .clone()
                                .map(|a| AtomSpec {
                                    name: self.atoms[a].name.clone(),
                                    element: self.atoms[a].element.clone(),
                                })
                                .collect(),
                        })
                        .collect(),
                })
                .collect(),
            bonds: self
                .bonds
                .iter()
                .map(|b| BondSpec {
                    i: b.i,
                    j: b.j,
                    order: b.order,
                })
                .collect(),
            stereocenters: self
                .stereocenters
                .iter()
                .map(|s| StereoSpec {
                    center: s.center,
                    neighbors: s.neighbors,
                    parity: s.parity,
                })
                .collect(),
        }
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn chains(&self) -> &[Chain] {
        &self.chains
    }

    pub fn chain(&self, i: usize) -> &Chain {
        &self.chains[i]
    }

    pub fn stereocenters(&self) -> &[Stereocenter] {
        &self.stereocenters
    }

    pub fn chain_index(&self, id: &str) -> Option<usize> {
        self.chains.iter().position(|c| c.id == id)
    }

    pub fn chain_class(&self, atom: usize) -> MoleculeClass {
        self.chains[self.atoms[atom].chain_index].class
    }

    /// Bonded neighbours of `atom`, ascending.
    pub fn neighbors(&self, atom: usize) -> &[usize] {
        &self.neighbors[atom]
    }

    pub fn bond_order(&self, i: usize, j: usize) -> Option<BondOrder> {
        self.bond_orders.get(&ordered(i, j)).copied()
    }

    pub fn is_bonded(&self, i: usize, j: usize) -> bool {
        self.bond_orders.contains_key(&ordered(i, j))
    }

    pub fn same_residue(&self, i: usize, j: usize) -> bool {
        let (a, b) = (&self.atoms[i], &self.atoms[j]);
        a.chain_index == b.chain_index && a.residue_index == b.residue_index
    }

    pub fn residue_of(&self, atom: usize) -> &Residue {
        let a = &self.atoms[atom];
        &self.chains[a.chain_index].residues[a.residue_index]
    }

    /// Whether the residue carrying `atom` is a standard residue for its chain class.
    pub fn is_standard_residue(&self, atom: usize) -> bool {
        let a = &self.atoms[atom];
        let name = a.residue_name.as_str();
        match self.chain_class(atom) {
            MoleculeClass::Protein | MoleculeClass::Peptide => vocab::AMINO_ACIDS.contains(&name),
            MoleculeClass::Rna => vocab::RIBONUCLEOTIDES.contains(&name),
            MoleculeClass::Dna => vocab::DEOXYRIBONUCLEOTIDES.contains(&name),
            MoleculeClass::Ligand | MoleculeClass::Modified => false,
        }
    }

    /// C-alpha of amino-acid residues or C1' of nucleotides.
    pub fn is_backbone_anchor(&self, atom: usize) -> bool {
        let a = &self.atoms[atom];
        let class = self.chain_class(atom);
        (class.is_amino() && a.name == "CA" && a.element == "C")
            || (class.is_nucleic() && a.name == "C1'")
    }

    pub fn is_ligand(&self, atom: usize) -> bool {
        self.chain_class(atom) == MoleculeClass::Ligand
    }

    /// Backbone-trace atoms used for the backbone-only LDDT variant.
    pub fn is_backbone(&self, atom: usize) -> bool {
        let a = &self.atoms[atom];
        let class = self.chain_class(atom);
        if class.is_amino() {
            matches!(a.name.as_str(), "N" | "CA" | "C" | "O")
        } else if class.is_nucleic() {
            matches!(
                a.name.as_str(),
                "P" | "OP1" | "OP2" | "O5'" | "C5'" | "C4'" | "O4'" | "C3'" | "O3'" | "C2'" | "C1'"
            )
        } else {
            false
        }
    }

    /// C-alpha atom index of residue `residue` in chain `chain`, if present.
    pub fn ca_atom(&self, chain: usize, residue: usize) -> Option<usize> {
        let res = self.chains[chain].residues.get(residue)?;
        res.atoms.clone().find(|&a| self.atoms[a].name == "CA")
    }

    /// Chain indices grouped by entity id, ascending.
    pub fn entity_groups(&self) -> BTreeMap<u32, Vec<usize>> {
        let mut groups: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (ci, c) in self.chains.iter().enumerate() {
            groups.entry(c.entity_id).or_default().push(ci);
        }
        groups
    }

    /// Connected components of the bond graph, each sorted ascending, ordered
    /// by their smallest atom index.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.atoms.len();
        let mut label = vec![usize::MAX; n];
        let mut out = Vec::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut stack = vec![start];
            let mut members = Vec::new();
            label[start] = id;
            while let Some(v) = stack.pop() {
                members.push(v);
                for &w in &self.neighbors[v] {
                    if label[w] == usize::MAX {
                        label[w] = id;
                        stack.push(w);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    /// Number of residues across all chains.
    pub fn n_residues(&self) -> usize {
        self.chains.iter().map(|c| c.residues.len()).sum()
    }

    /// Amino-acid / nucleotide one-letter sequence of a chain.
    pub fn sequence(&self, chain: usize) -> String {
        self.chains[chain]
            .residues
            .iter()
            .map(|r| vocab::one_letter(&r.name))
            .collect()
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    //! Small hand-built systems shared by unit tests across the crate.
    use super::*;

    pub fn atom(name: &str, element: &str) -> AtomSpec {
        AtomSpec {
            name: name.into(),
            element: element.into(),
        }
    }

    /// A poly-glycine-like chain: N, CA, C, O per residue, backbone bonded.
    pub fn backbone_chain(id: &str, entity: u32, n_res: usize) -> ChainSpec {
        ChainSpec {
            id: id.into(),
            entity_id: entity,
            molecule_class: MoleculeClass::Protein,
            residues: (0..n_res)
                .map(|_| ResidueSpec {
                    name: "GLY".into(),
                    atoms: vec![
                        atom("N", "N"),
                        atom("CA", "C"),
                        atom("C", "C"),
                        atom("O", "O"),
                    ],
                })
                .collect(),
        }
    }

    pub fn backbone_bonds(offset: usize, n_res: usize) -> Vec<BondSpec> {
        let mut bonds = Vec::new();
        for r in 0..n_res {
            let b = offset + 4 * r;
            bonds.push(BondSpec { i: b, j: b + 1, order: BondOrder::Single });
            bonds.push(BondSpec { i: b + 1, j: b + 2, order: BondOrder::Single });
            bonds.push(BondSpec { i: b + 2, j: b + 3, order: BondOrder::Double });
            if r + 1 < n_res {
                bonds.push(BondSpec { i: b + 2, j: b + 4, order: BondOrder::Single });
            }
        }
        bonds
    }

    pub fn ligand_chain(id: &str, entity: u32, code: &str, elements: &[&str]) -> ChainSpec {
        ChainSpec {
            id: id.into(),
            entity_id: entity,
            molecule_class: MoleculeClass::Ligand,
            residues: vec![ResidueSpec {
                name: code.into(),
                atoms: elements
                    .iter()
                    .enumerate()
                    .map(|(k, e)| atom(&format!("{}{}", e.to_ascii_uppercase(), k + 1), e))
                    .collect(),
            }],
        }
    }

    pub fn system(chains: Vec<ChainSpec>, bonds: Vec<BondSpec>) -> MolecularSystem {
        MolecularSystem::from_doc(&TopologyDoc {
            version: TOPOLOGY_SCHEMA_VERSION,
            chains,
            bonds,
            stereocenters: Vec::new(),
        })
        .expect("fixture system")
    }

    /// Protein chain with one atom ("CA") per residue and no bonds.
    pub fn ca_only(id: &str, entity: u32, n_res: usize) -> ChainSpec {
        ChainSpec {
            id: id.into(),
            entity_id: entity,
            molecule_class: MoleculeClass::Protein,
            residues: (0..n_res)
                .map(|_| ResidueSpec {
                    name: "ALA".into(),
                    atoms: vec![atom("CA", "C")],
                })
                .collect(),
        }
    }
}
