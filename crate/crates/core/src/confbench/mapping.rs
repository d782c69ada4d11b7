use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::align::smith_waterman;
use crate::error::{Error, Result};
use crate::geometry::{lddt_on_atoms, ChainMapping, LddtAtoms, LddtOptions, ResidueRef, Vec3};
use crate::io::StructureRecord;
use crate::topology::MolecularSystem;

/// Fraction of reference pocket residues that must be mapped.
pub const MIN_POCKET_COVERAGE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMappingCandidate {
    pub ref_chain: String,
    pub query_chain: String,
    /// Identity over the reference pocket residues of this chain.
    pub pocket_fident: f64,
    /// All-atom LDDT over aligned residues.
    pub lddt: f64,
    pub bb_lddt: f64,
}

/// Best candidate: descending on (pocket_fident, lddt, bb_lddt), ties by
/// ascending query then reference chain id.
pub fn rank_chain_mappings(candidates: &[ChainMappingCandidate]) -> Result<ChainMappingCandidate> {
    let mut sorted = candidates.to_vec();
    sorted.sort_by(|a, b| {
        b.pocket_fident
            .total_cmp(&a.pocket_fident)
            .then(b.lddt.total_cmp(&a.lddt))
            .then(b.bb_lddt.total_cmp(&a.bb_lddt))
            .then_with(|| a.query_chain.cmp(&b.query_chain))
            .then_with(|| a.ref_chain.cmp(&b.ref_chain))
    });
    sorted
        .into_iter()
        .next()
        .ok_or_else(|| Error::InvalidParameter("no chain mapping candidates".into()))
}

/// Residue-level alignment of two chains by sequence.
fn chain_alignment(a: &MolecularSystem, ca: usize, b: &MolecularSystem, cb: usize) -> Vec<(usize, usize)> {
    smith_waterman(&a.sequence(ca), &b.sequence(cb)).pairs
}

/// Atom pairs with the same name in aligned residues, optionally only
/// backbone atoms.
fn matched_atoms(
    a: &MolecularSystem,
    ca: usize,
    b: &MolecularSystem,
    cb: usize,
    residues: &[(usize, usize)],
    backbone_only: bool,
) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for &(ra, rb) in residues {
        let res_b = &b.chain(cb).residues[rb];
        for ia in a.chain(ca).residues[ra].atoms.clone() {
            let atom = a.atom(ia);
            if !atom.is_heavy() || (backbone_only && !a.is_backbone(ia)) {
                continue;
            }
            if let Some(ib) = res_b.atoms.clone().find(|&ib| b.atom(ib).name == atom.name) {
                out.push((ia, ib));
            }
        }
    }
    out
}

/// LDDT of `query` against `reference` over matched atoms, each residue its
/// own exclusion group. Zero when there are no contacts.
fn matched_lddt(pairs: &[(usize, usize)], a: &StructureRecord, b: &StructureRecord) -> f64 {
    let reference: Vec<Vec3> = pairs.iter().map(|p| a.coords[p.0]).collect();
    let query: Vec<Vec3> = pairs.iter().map(|p| b.coords[p.1]).collect();
    let atoms = LddtAtoms {
        residue: pairs
            .iter()
            .map(|p| {
                let at = a.system.atom(p.0);
                at.chain_index * 1_000_000 + at.residue_index
            })
            .collect(),
        nucleic: vec![false; pairs.len()],
        include: vec![true; pairs.len()],
    };
    lddt_on_atoms(&query, &reference, &atoms, &LddtOptions::default()).unwrap_or(0.0)
}

/// One candidate per (reference pocket chain, query polymer chain of the
/// same class).
pub fn chain_mapping_candidates(
    reference: &StructureRecord,
    query: &StructureRecord,
    pocket: &[ResidueRef],
) -> Vec<ChainMappingCandidate> {
    let ref_chains: BTreeSet<usize> = pocket.iter().map(|p| p.0).collect();
    let mut out = Vec::new();
    for &rc in &ref_chains {
        let class = reference.system.chain(rc).class;
        let ref_seq: Vec<char> = reference.system.sequence(rc).chars().collect();
        for (qc, qchain) in query.system.chains().iter().enumerate() {
            if qchain.class != class {
                continue;
            }
            let q_seq: Vec<char> = query.system.sequence(qc).chars().collect();
            let aligned = chain_alignment(&reference.system, rc, &query.system, qc);
            let in_pocket: Vec<usize> = pocket.iter().filter(|p| p.0 == rc).map(|p| p.1).collect();
            let identical = in_pocket
                .iter()
                .filter(|&&r| {
                    aligned
                        .iter()
                        .find(|p| p.0 == r)
                        .is_some_and(|p| ref_seq[p.0] == q_seq[p.1])
                })
                .count();
            let all = matched_atoms(&reference.system, rc, &query.system, qc, &aligned, false);
            let bb = matched_atoms(&reference.system, rc, &query.system, qc, &aligned, true);
            out.push(ChainMappingCandidate {
                ref_chain: reference.system.chain(rc).id.clone(),
                query_chain: qchain.id.clone(),
                pocket_fident: identical as f64 / in_pocket.len().max(1) as f64,
                lddt: matched_lddt(&all, reference, query),
                bb_lddt: matched_lddt(&bb, reference, query),
            });
        }
    }
    out
}

/// Greedy mapping of each reference pocket chain (in index order) to its
/// best-ranked unused query chain.
pub fn best_chain_mapping(
    reference: &StructureRecord,
    query: &StructureRecord,
    pocket: &[ResidueRef],
) -> Result<ChainMapping> {
    let candidates = chain_mapping_candidates(reference, query, pocket);
    let ref_chains: BTreeSet<usize> = pocket.iter().map(|p| p.0).collect();
    let mut used = BTreeSet::new();
    let mut mapping = HashMap::new();
    for rc in ref_chains {
        let id = &reference.system.chain(rc).id;
        let pool: Vec<ChainMappingCandidate> = candidates
            .iter()
            .filter(|c| &c.ref_chain == id && !used.contains(&c.query_chain))
            .cloned()
            .collect();
        if pool.is_empty() {
            continue;
        }
        let best = rank_chain_mappings(&pool)?;
        let qc = query
            .system
            .chain_index(&best.query_chain)
            .expect("candidate chain exists");
        used.insert(best.query_chain);
        mapping.insert(rc, qc);
    }
    Ok(mapping)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PocketMapping {
    /// Reference residue → query residue, in reference order.
    pub pairs: Vec<(ResidueRef, ResidueRef)>,
    pub total: usize,
}

impl PocketMapping {
    pub fn coverage(&self) -> f64 {
        self.pairs.len() as f64 / self.total.max(1) as f64
    }

    pub fn get(&self, r: ResidueRef) -> Option<ResidueRef> {
        self.pairs.iter().find(|p| p.0 == r).map(|p| p.1)
    }
}

/// Map reference residues onto the query through a local sequence
/// alignment of each mapped chain pair. Fails below 50% coverage.
pub fn map_pocket(
    reference: &MolecularSystem,
    query: &MolecularSystem,
    pocket: &[ResidueRef],
    chains: &ChainMapping,
) -> Result<PocketMapping> {
    let mut alignments: HashMap<usize, Vec<(usize, usize)>> = HashMap::new();
    let mut pairs = Vec::new();
    for &(rc, rr) in pocket {
        let Some(&qc) = chains.get(&rc) else {
            continue;
        };
        let aligned = alignments
            .entry(rc)
            .or_insert_with(|| chain_alignment(reference, rc, query, qc));
        if let Some(p) = aligned.iter().find(|p| p.0 == rr) {
            pairs.push(((rc, rr), (qc, p.1)));
        }
    }
    let m = PocketMapping {
        total: pocket.len(),
        pairs,
    };
    if m.coverage() < MIN_POCKET_COVERAGE {
        return Err(Error::PocketMappingFailed {
            mapped: m.pairs.len(),
            total: m.total,
        });
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{AtomSpec, ChainSpec, MoleculeClass, ResidueSpec, TopologyDoc, TOPOLOGY_SCHEMA_VERSION};

    pub(crate) fn protein(seq: &str) -> MolecularSystem {
        let names = |c: char| match c {
            'A' => "ALA",
            'G' => "GLY",
            'K' => "LYS",
            'W' => "TRP",
            'S' => "SER",
            'L' => "LEU",
            _ => "VAL",
        };
        let residues = seq
            .chars()
            .map(|c| ResidueSpec {
                name: names(c).into(),
                atoms: vec![AtomSpec { name: "CA".into(), element: "C".into() }],
            })
            .collect();
        MolecularSystem::from_doc(&TopologyDoc {
            version: TOPOLOGY_SCHEMA_VERSION,
            chains: vec![ChainSpec { id: "A".into(), entity_id: 1, molecule_class: MoleculeClass::Protein, residues }],
            bonds: vec![],
            stereocenters: vec![],
        })
        .unwrap()
    }

    fn identity() -> ChainMapping {
        HashMap::from([(0, 0)])
    }

    #[test]
    fn identical_sequences_map_identically() {
        let s = protein("AGKWSLVAGKWSL");
        let pocket: Vec<ResidueRef> = (4..9).map(|r| (0, r)).collect();
        let m = map_pocket(&s, &s, &pocket, &identity()).unwrap();
        assert!(m.pairs.iter().all(|(a, b)| a == b));
        assert_eq!(m.coverage(), 1.0);
    }

    #[test]
    fn insertion_before_pocket_shifts_mapping() {
        let r = protein("AGKWSLVAGKWSLVKA");
        let q = protein("AGKGGGWSLVAGKWSLVKA");
        let pocket: Vec<ResidueRef> = (8..13).map(|k| (0, k)).collect();
        let m = map_pocket(&r, &q, &pocket, &identity()).unwrap();
        for ((_, a), (_, b)) in &m.pairs {
            assert_eq!(*b, a + 3);
        }
        assert_eq!(m.pairs.len(), 5);
    }

    #[test]
    fn low_coverage_fails() {
        let r = protein("AGKWSLVAGKWSLVKALW");
        // Only the first 12 residues survive; two of five pocket residues.
        let q = protein("AGKWSLVAGKWS");
        let pocket: Vec<ResidueRef> = (10..15).map(|k| (0, k)).collect();
        let err = map_pocket(&r, &q, &pocket, &identity()).unwrap_err();
        assert!(matches!(err, Error::PocketMappingFailed { mapped: 2, total: 5 }));
    }

    fn cand(q: &str, f: f64, l: f64, b: f64) -> ChainMappingCandidate {
        ChainMappingCandidate { ref_chain: "A".into(), query_chain: q.into(), pocket_fident: f, lddt: l, bb_lddt: b }
    }

    #[test]
    fn chain_ranking_order() {
        let one = cand("B", 0.5, 0.5, 0.5);
        assert_eq!(rank_chain_mappings(&[one.clone()]).unwrap(), one);
        let best = rank_chain_mappings(&[cand("B", 0.9, 0.7, 0.99), cand("C", 0.9, 0.8, 0.1)]).unwrap();
        assert_eq!(best.query_chain, "C");
        let best = rank_chain_mappings(&[cand("D", 1.0, 0.8, 0.8), cand("A", 1.0, 0.8, 0.8), cand("C", 1.0, 0.8, 0.8)]).unwrap();
        assert_eq!(best.query_chain, "A");
        assert!(rank_chain_mappings(&[]).is_err());
    }
}
