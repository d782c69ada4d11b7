//! Small deterministic systems with plausible coordinates for tests,
//! benchmarks and the toy training run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::geometry::Vec3;
use crate::topology::{
    AtomSpec, BondOrder, BondSpec, ChainSpec, MolecularSystem, MoleculeClass, ResidueSpec, TopologyDoc,
};

fn atom(name: &str, element: &str) -> AtomSpec {
    AtomSpec {
        name: name.into(),
        element: element.into(),
    }
}

fn bond(i: usize, j: usize) -> BondSpec {
    BondSpec {
        i,
        j,
        order: BondOrder::Single,
    }
}

/// Alanine chain (N, CA, C, O, CB per residue) with backbone bonds. Atom
/// indices start at `offset`.
fn alanine_chain(id: &str, entity: u32, n_res: usize, offset: usize) -> (ChainSpec, Vec<BondSpec>) {
    let residues = (0..n_res)
        .map(|_| ResidueSpec {
            name: "ALA".into(),
            atoms: vec![atom("N", "N"), atom("CA", "C"), atom("C", "C"), atom("O", "O"), atom("CB", "C")],
        })
        .collect();
    let mut bonds = Vec::new();
    for r in 0..n_res {
        let b = offset + 5 * r;
        bonds.push(bond(b, b + 1));
        bonds.push(bond(b + 1, b + 2));
        bonds.push(BondSpec {
            i: b + 2,
            j: b + 3,
            order: BondOrder::Double,
        });
        bonds.push(bond(b + 1, b + 4));
        if r + 1 < n_res {
            bonds.push(bond(b + 2, b + 5));
        }
    }
    (
        ChainSpec {
            id: id.into(),
            entity_id: entity,
            molecule_class: MoleculeClass::Protein,
            residues,
        },
        bonds,
    )
}

fn ligand(id: &str, entity: u32, code: &str, elements: &[&str]) -> ChainSpec {
    ChainSpec {
        id: id.into(),
        entity_id: entity,
        molecule_class: MoleculeClass::Ligand,
        residues: vec![ResidueSpec {
            name: code.into(),
            atoms: elements
                .iter()
                .enumerate()
                .map(|(k, e)| atom(&format!("{e}{}", k + 1), e))
                .collect(),
        }],
    }
}

fn build(chains: Vec<ChainSpec>, bonds: Vec<BondSpec>) -> MolecularSystem {
    MolecularSystem::from_doc(&TopologyDoc {
        version: crate::topology::TOPOLOGY_SCHEMA_VERSION,
        chains,
        bonds,
        stereocenters: Vec::new(),
    })
    .expect("toy topology is valid")
}

/// Coordinates from a short distance-geometry relaxation: bonds pulled to
/// 1.5 Å, 1-3 pairs to 2.5 Å, everything else pushed beyond 3.3 Å, with a
/// weak pull to the origin. Deterministic in `seed`.
pub fn embed_coordinates(system: &MolecularSystem, seed: u64) -> Vec<Vec3> {
    let n = system.n_atoms();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<Vec3> = (0..n)
        .map(|_| {
            Vec3::new(
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            ) * 3.0
        })
        .collect();
    let mut target = vec![vec![None; n]; n];
    for i in 0..n {
        for &j in system.neighbors(i) {
            target[i][j] = Some((1.5, true));
            for &k in system.neighbors(j) {
                if k != i && !system.is_bonded(i, k) {
                    target[i][k] = Some((2.5, true));
                }
            }
        }
    }
    for step in 0..4000 {
        let lr = if step < 3000 { 0.05 } else { 0.01 };
        let mut g = vec![Vec3::zeros(); n];
        for i in 0..n {
            g[i] += x[i] * 0.02;
            for j in (i + 1)..n {
                let d = x[i] - x[j];
                let r = d.norm().max(1e-6);
                let (t0, spring) = target[i][j].unwrap_or((3.3, false));
                let f = if spring {
                    2.0 * (r - t0)
                } else if r < t0 {
                    2.0 * (r - t0)
                } else {
                    0.0
                };
                let gi = d / r * f;
                g[i] += gi;
                g[j] -= gi;
            }
        }
        for (p, gi) in x.iter_mut().zip(&g) {
            *p -= gi * lr;
        }
    }
    let c: Vec3 = x.iter().sum::<Vec3>() / n as f64;
    x.iter().map(|p| p - c).collect()
}

/// Four alanines, 20 atoms.
pub fn peptide() -> (MolecularSystem, Vec<Vec3>) {
    let (chain, bonds) = alanine_chain("A", 1, 4, 0);
    let sys = build(vec![chain], bonds);
    let x = embed_coordinates(&sys, 11);
    (sys, x)
}

/// Fused bicyclic ligand with two short substituents, 17 atoms.
pub fn ligand_only() -> (MolecularSystem, Vec<Vec3>) {
    let elements = [
        "C", "C", "C", "C", "C", "C", "C", "C", "N", "C", // rings
        "C", "C", "O", "N", // substituent on atom 0
        "C", "O", "O", // carboxylate on atom 5
    ];
    let mut bonds: Vec<BondSpec> = (0..6)
        .map(|k| BondSpec {
            i: k,
            j: (k + 1) % 6,
            order: BondOrder::Aromatic,
        })
        .collect();
    // Second ring shares atoms 3 and 4.
    for (i, j) in [(4, 6), (6, 7), (7, 8), (8, 9), (9, 3)] {
        bonds.push(BondSpec {
            i,
            j,
            order: BondOrder::Aromatic,
        });
    }
    bonds.extend([bond(0, 10), bond(10, 11), bond(11, 12), bond(11, 13)]);
    bonds.extend([
        bond(5, 14),
        BondSpec {
            i: 14,
            j: 15,
            order: BondOrder::Double,
        },
        bond(14, 16),
    ]);
    let sys = build(vec![ligand("L", 1, "BCL", &elements)], bonds);
    let x = embed_coordinates(&sys, 12);
    (sys, x)
}

/// Five alanines and a benzene ring, 31 atoms.
pub fn complex() -> (MolecularSystem, Vec<Vec3>) {
    let (chain, mut bonds) = alanine_chain("A", 1, 5, 0);
    bonds.extend((0..6).map(|k| BondSpec {
        i: 25 + k,
        j: 25 + (k + 1) % 6,
        order: BondOrder::Aromatic,
    }));
    let sys = build(vec![chain, ligand("L", 2, "BNZ", &["C"; 6])], bonds);
    let x = embed_coordinates(&sys, 13);
    (sys, x)
}

/// Two glycine-like residues plus a bonded C-O pair, 10 atoms.
pub fn ten_atom() -> (MolecularSystem, Vec<Vec3>) {
    let (mut chain, _) = alanine_chain("A", 1, 2, 0);
    for r in &mut chain.residues {
        r.atoms.pop();
    }
    let bonds = vec![
        bond(0, 1),
        bond(1, 2),
        BondSpec {
            i: 2,
            j: 3,
            order: BondOrder::Double,
        },
        bond(2, 4),
        bond(4, 5),
        bond(5, 6),
        BondSpec {
            i: 6,
            j: 7,
            order: BondOrder::Double,
        },
        bond(8, 9),
    ];
    let sys = build(vec![chain, ligand("L", 2, "CMO", &["C", "O"])], bonds);
    let x = embed_coordinates(&sys, 14);
    (sys, x)
}

/// Four alanines with two copies of a three-atom ligand, 26 atoms.
pub fn two_ligand_copies() -> (MolecularSystem, Vec<Vec3>) {
    let (chain, mut bonds) = alanine_chain("A", 1, 4, 0);
    bonds.extend([bond(20, 21), bond(21, 22), bond(23, 24), bond(24, 25)]);
    let sys = build(
        vec![chain, ligand("L", 2, "EOH", &["C", "C", "O"]), ligand("M", 2, "EOH", &["C", "C", "O"])],
        bonds,
    );
    let x = embed_coordinates(&sys, 15);
    (sys, x)
}

/// The three overfitting targets: peptide (20), ligand (17), complex (31).
pub fn training_set() -> Vec<(String, MolecularSystem, Vec<Vec3>)> {
    let (a, xa) = peptide();
    let (b, xb) = ligand_only();
    let (c, xc) = complex();
    vec![
        ("peptide".into(), a, xa),
        ("ligand".into(), b, xb),
        ("complex".into(), c, xc),
    ]
}
