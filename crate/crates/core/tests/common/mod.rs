//! Builders shared by the integration tests.
#![allow(dead_code)]

use flowplex_core::topology::{AtomSpec, BondOrder, BondSpec, ChainSpec, MoleculeClass, ResidueSpec, TopologyDoc};
use flowplex_core::{MolecularSystem, Vec3};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn atom(name: &str, element: &str) -> AtomSpec {
    AtomSpec {
        name: name.into(),
        element: element.into(),
    }
}

pub fn bond(i: usize, j: usize, order: BondOrder) -> BondSpec {
    BondSpec { i, j, order }
}

/// Protein chain with a single CA per residue.
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
        version: flowplex_core::topology::TOPOLOGY_SCHEMA_VERSION,
        chains,
        bonds,
        stereocenters: Vec::new(),
    })
    .expect("test topology")
}

/// Six aromatic carbons in a ring.
pub fn benzene() -> MolecularSystem {
    let bonds = (0..6).map(|i| bond(i, (i + 1) % 6, BondOrder::Aromatic)).collect();
    system(vec![ligand_chain("L", 1, "BNZ", &["C"; 6])], bonds)
}

pub fn hexagon(radius: f64) -> Vec<Vec3> {
    (0..6)
        .map(|k| {
            let th = std::f64::consts::PI / 3.0 * k as f64;
            Vec3::new(radius * th.cos(), radius * th.sin(), 0.0)
        })
        .collect()
}

pub fn random_points<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vec<Vec3> {
    (0..n)
        .map(|_| {
            Vec3::new(
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            ) * scale
        })
        .collect()
}

pub fn add(a: &[Vec3], b: &[Vec3]) -> Vec<Vec3> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sq_dev(a: &[Vec3], b: &[Vec3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_squared()).sum()
}
