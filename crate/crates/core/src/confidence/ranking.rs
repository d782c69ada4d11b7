use serde::{Deserialize, Serialize};

use super::head::ConfidenceOutput;
use crate::error::{Error, Result};
use crate::geometry::{Conformation, Vec3};
use crate::topology::{MolecularSystem, Parity};

/// Heavy-atom clash distance in Å (exclusive).
pub const CLASH_CUTOFF: f64 = 1.7;
/// Anchor pairs closer than this (Å) form the pDockQ interface.
pub const INTERFACE_CUTOFF: f64 = 15.0;

/// Average of two distance-scaled terms and the predicted fraction of
/// native contacts, from interface pair distance errors in Å.
pub fn pdockq(pde: &[f64]) -> Result<f64> {
    if pde.is_empty() {
        return Err(Error::NoInterface);
    }
    let n = pde.len() as f64;
    let msq = pde.iter().map(|e| e * e).sum::<f64>() / n;
    let lr = 1.0 / (1.0 + msq / (8.5 * 8.5));
    let sr = 1.0 / (1.0 + msq / (1.5 * 1.5));
    let fnat = pde.iter().filter(|&&e| e < 5.0).count() as f64 / n;
    Ok((lr + sr + fnat) / 3.0)
}

/// True when two non-bonded heavy atoms of different residues are closer
/// than `cutoff`.
pub fn clash_check(x: &[Vec3], system: &MolecularSystem, cutoff: f64) -> bool {
    let atoms = system.atoms();
    for i in 0..x.len() {
        if !atoms[i].is_heavy() {
            continue;
        }
        for j in (i + 1)..x.len() {
            if !atoms[j].is_heavy() || system.same_residue(i, j) || system.is_bonded(i, j) {
                continue;
            }
            if (x[i] - x[j]).norm() < cutoff {
                return true;
            }
        }
    }
    false
}

/// True when any declared stereocentre has the wrong handedness (or is
/// flat).
pub fn chirality_check(x: &[Vec3], system: &MolecularSystem) -> bool {
    system.stereocenters().iter().any(|s| {
        let c = x[s.center];
        let [a, b, d] = s.neighbors.map(|k| x[k] - c);
        let vol = a.dot(&b.cross(&d));
        let observed = if vol > 0.0 {
            Some(Parity::Positive)
        } else if vol < 0.0 {
            Some(Parity::Negative)
        } else {
            None
        };
        observed != Some(s.parity)
    })
}

/// Positions in `anchors` of the pairs on the interface between `chain_a`
/// and `chain_b` (the same chain allowed), by distance in `x`.
pub fn interface_pairs(
    anchors: &[usize],
    x: &[Vec3],
    system: &MolecularSystem,
    chain_a: usize,
    chain_b: usize,
    cutoff: f64,
) -> Vec<(usize, usize)> {
    let in_chain = |k: usize, c: usize| system.atom(anchors[k]).chain_index == c;
    let mut out = Vec::new();
    for a in 0..anchors.len() {
        for b in 0..anchors.len() {
            if a == b || !in_chain(a, chain_a) || !in_chain(b, chain_b) {
                continue;
            }
            if chain_a == chain_b && b < a {
                continue;
            }
            if (x[anchors[a]] - x[anchors[b]]).norm() < cutoff {
                out.push((a, b));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingSubject {
    /// Ligand chain id.
    Ligand(String),
    Chain(String),
    ChainPair(String, String),
}

impl std::str::FromStr for RankingSubject {
    type Err = Error;

    /// `ligand:L`, `chain:A` or `pair:A,B`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidParameter(format!("ranking subject '{s}' needs kind:ids")))?;
        match kind {
            "ligand" => Ok(RankingSubject::Ligand(rest.into())),
            "chain" => Ok(RankingSubject::Chain(rest.into())),
            "pair" => match rest.split_once(',') {
                Some((a, b)) => Ok(RankingSubject::ChainPair(a.into(), b.into())),
                None => Err(Error::InvalidParameter(format!("pair subject '{s}' needs two chain ids"))),
            },
            _ => Err(Error::InvalidParameter(format!("unknown ranking subject kind '{kind}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Candidate {
    pub conformation: Conformation,
    pub confidence: ConfidenceOutput,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankingScore {
    pub value: f64,
    /// Ligand pLDDT or pDockQ.
    pub base: f64,
    pub clash: bool,
    pub chirality_violation: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedSample {
    /// Position in the input list.
    pub index: usize,
    pub score: RankingScore,
}

fn chain_of(system: &MolecularSystem, id: &str) -> Result<usize> {
    system
        .chain_index(id)
        .ok_or_else(|| Error::InvalidParameter(format!("no chain '{id}'")))
}

fn score(c: &Candidate, system: &MolecularSystem, subject: &RankingSubject) -> Result<RankingScore> {
    match subject {
        RankingSubject::Ligand(id) => {
            let chain = system.chain(chain_of(system, id)?);
            let plddt = c.confidence.plddt();
            let atoms = chain.atoms.clone();
            let base = plddt[atoms.clone()].iter().sum::<f64>() / atoms.len().max(1) as f64;
            let clash = clash_check(&c.conformation, system, CLASH_CUTOFF);
            let chirality_violation = chirality_check(&c.conformation, system);
            Ok(RankingScore {
                value: base - 1000.0 * (clash as u8 + chirality_violation as u8) as f64,
                base,
                clash,
                chirality_violation,
            })
        }
        RankingSubject::Chain(a) | RankingSubject::ChainPair(a, _) => {
            let ca = chain_of(system, a)?;
            let cb = match subject {
                RankingSubject::ChainPair(_, b) => chain_of(system, b)?,
                _ => ca,
            };
            let pairs = interface_pairs(&c.confidence.anchors, &c.conformation, system, ca, cb, INTERFACE_CUTOFF);
            let pde: Vec<f64> = pairs.iter().map(|&(p, q)| c.confidence.pde_pair(p, q)).collect();
            let base = match pdockq(&pde) {
                Ok(v) => v,
                Err(Error::NoInterface) => 0.0,
                Err(e) => return Err(e),
            };
            Ok(RankingScore {
                value: base,
                base,
                clash: false,
                chirality_violation: false,
            })
        }
    }
}

/// Candidates in descending score order; ties keep input order.
pub fn rank_samples(candidates: &[Candidate], system: &MolecularSystem, subject: &RankingSubject) -> Result<Vec<RankedSample>> {
    if candidates.is_empty() {
        return Err(Error::InvalidParameter("no candidates to rank".into()));
    }
    let mut ranked = candidates
        .iter()
        .enumerate()
        .map(|(index, c)| Ok(RankedSample { index, score: score(c, system, subject)? }))
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| b.score.value.total_cmp(&a.score.value));
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confidence::Bins;
    use crate::flow::nn::Mat;
    use crate::flow::toy;
    use crate::geometry::testing::random_rigid;
    use crate::topology::fixtures::*;
    use crate::topology::{StereoSpec, TopologyDoc, TOPOLOGY_SCHEMA_VERSION};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pdockq_values() {
        assert!((pdockq(&[0.0; 4]).unwrap() - 1.0).abs() < 1e-12);
        assert!(pdockq(&[1e9; 3]).unwrap() < 1e-6);
        assert!((pdockq(&[8.5; 5]).unwrap() - 0.17673).abs() < 1e-5);
        assert!(matches!(pdockq(&[]), Err(Error::NoInterface)));
        // Strict comparison at the Fnat threshold.
        let at = pdockq(&[5.0]).unwrap();
        let below = pdockq(&[5.0 - 1e-9]).unwrap();
        assert!(below - at > 0.3);
    }

    fn two_atoms(d: f64, bonded: bool) -> (MolecularSystem, Vec<Vec3>) {
        let bonds = if bonded { vec![crate::topology::BondSpec { i: 0, j: 1, order: crate::BondOrder::Single }] } else { vec![] };
        let sys = system(vec![ligand_chain("A", 1, "X", &["C"]), ligand_chain("B", 2, "Y", &["C"])], bonds);
        (sys, vec![Vec3::zeros(), Vec3::new(d, 0.0, 0.0)])
    }

    #[test]
    fn clash_examples() {
        let (s, x) = two_atoms(1.0, false);
        assert!(clash_check(&x, &s, CLASH_CUTOFF));
        let (s, x) = two_atoms(1.4, true);
        assert!(!clash_check(&x, &s, CLASH_CUTOFF));
        let (s, x) = two_atoms(1.7, false);
        assert!(!clash_check(&x, &s, CLASH_CUTOFF));
        let (s, x) = two_atoms(1.7 - 1e-9, false);
        assert!(clash_check(&x, &s, CLASH_CUTOFF));
    }

    fn chiral(parity: Parity) -> (MolecularSystem, Vec<Vec3>) {
        let doc = TopologyDoc {
            version: TOPOLOGY_SCHEMA_VERSION,
            chains: vec![ligand_chain("L", 1, "CHR", &["C", "N", "O", "F", "C"])],
            bonds: (1..5).map(|k| crate::topology::BondSpec { i: 0, j: k, order: crate::BondOrder::Single }).collect(),
            stereocenters: vec![StereoSpec { center: 0, neighbors: [1, 2, 3], parity }],
        };
        let x = vec![
            Vec3::zeros(),
            Vec3::new(1.0, 1.0, 1.0),
            Vec3::new(1.0, -1.0, -1.0),
            Vec3::new(-1.0, 1.0, -1.0),
            Vec3::new(-1.0, -1.0, 1.0),
        ];
        (MolecularSystem::from_doc(&doc).unwrap(), x)
    }

    #[test]
    fn mirror_image_violates_declared_parity() {
        let (s, x) = chiral(Parity::Negative);
        let (a, b, d) = (x[1], x[2], x[3]);
        let positive = a.dot(&b.cross(&d)) > 0.0;
        let (s, x) = if positive { chiral(Parity::Positive) } else { (s, x) };
        assert!(!chirality_check(&x, &s));
        let mirrored: Vec<Vec3> = x.iter().map(|p| Vec3::new(-p.x, p.y, p.z)).collect();
        assert!(chirality_check(&mirrored, &s));
    }

    proptest! {
        #[test]
        fn rigid_motion_never_changes_chirality(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for parity in [Parity::Positive, Parity::Negative] {
                let (s, x) = chiral(parity);
                let moved = random_rigid(&mut rng).apply_all(&x);
                prop_assert_eq!(chirality_check(&x, &s), chirality_check(&moved, &s));
            }
        }

        #[test]
        fn flag_free_ligand_ranking_is_plddt_order(bins in proptest::collection::vec(0usize..50, 1..8)) {
            let (sys, x) = toy::complex();
            let c: Vec<Candidate> = bins.iter().map(|&b| candidate(&x, b, vec![])).collect();
            let got: Vec<usize> = rank_samples(&c, &sys, &RankingSubject::Ligand("L".into())).unwrap().iter().map(|r| r.index).collect();
            let mut want: Vec<usize> = (0..bins.len()).collect();
            want.sort_by(|&a, &b| bins[b].cmp(&bins[a]));
            prop_assert_eq!(got, want);
        }

        #[test]
        fn pdockq_does_not_increase_with_any_error(errs in proptest::collection::vec(0.0f64..30.0, 1..20), k in 0usize..20, bump in 0.0f64..10.0) {
            let before = pdockq(&errs).unwrap();
            let mut more = errs.clone();
            let k = k % more.len();
            more[k] += bump;
            prop_assert!(pdockq(&more).unwrap() <= before + 1e-15);
        }
    }

    /// Output whose ligand pLDDT decodes to exactly `plddt` via a single
    /// dominant bin.
    fn candidate(x: &[Vec3], plddt_bin: usize, anchors: Vec<usize>) -> Candidate {
        let mut logits = Mat::zeros(x.len(), 50);
        for i in 0..x.len() {
            logits[(i, plddt_bin)] = 1e3;
        }
        let na = anchors.len();
        Candidate {
            conformation: Conformation::reference(x.to_vec()),
            confidence: ConfidenceOutput {
                anchors,
                plddt_logits: logits,
                pde_logits: Mat::zeros(na * na, 64),
                plddt_bins: Bins::new(50, 0.0, 1.0),
                pde_bins: Bins::new(64, 0.0, 32.0),
            },
        }
    }

    #[test]
    fn clash_free_low_confidence_beats_clashing_high_confidence() {
        let (sys, x) = toy::complex();
        let lig = RankingSubject::Ligand("L".into());
        let mut clashing = x.clone();
        clashing[25] = x[0] + Vec3::new(0.5, 0.0, 0.0);
        // Bin 35 decodes to 0.71, bin 47 to 0.95.
        let c = vec![candidate(&clashing, 47, vec![]), candidate(&x, 35, vec![])];
        let r = rank_samples(&c, &sys, &lig).unwrap();
        assert_eq!(r[0].index, 1);
        assert!((r[0].score.value - 0.71).abs() < 1e-9);
        assert!((r[1].score.value - (0.95 - 1000.0)).abs() < 1e-9);
        assert!(r[1].score.clash);
    }

    #[test]
    fn ties_keep_input_order_and_singletons_pass_through() {
        let (sys, x) = toy::complex();
        let lig = RankingSubject::Ligand("L".into());
        let c = vec![candidate(&x, 20, vec![]), candidate(&x, 30, vec![]), candidate(&x, 20, vec![]), candidate(&x, 30, vec![])];
        let order: Vec<usize> = rank_samples(&c, &sys, &lig).unwrap().iter().map(|r| r.index).collect();
        assert_eq!(order, vec![1, 3, 0, 2]);
        let one = rank_samples(&c[..1], &sys, &lig).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].index, 0);
        assert!(rank_samples(&[], &sys, &lig).is_err());
    }

    #[test]
    fn pair_subject_uses_pdockq_and_empty_interface_scores_zero() {
        let (sys, x) = toy::complex();
        let anchors = vec![1, 6, 11, 25, 28];
        let c = candidate(&x, 10, anchors.clone());
        let r = rank_samples(&[c.clone()], &sys, &"pair:A,L".parse().unwrap()).unwrap();
        let pairs = interface_pairs(&anchors, &x, &sys, 0, 1, INTERFACE_CUTOFF);
        assert!(!pairs.is_empty());
        // Uniform pDE logits decode to 16 Å for every pair.
        assert!((r[0].score.value - pdockq(&vec![16.0; pairs.len()]).unwrap()).abs() < 1e-9);
        let far: Vec<Vec3> = x.iter().enumerate().map(|(i, p)| if i >= 25 { p + Vec3::new(100.0, 0.0, 0.0) } else { *p }).collect();
        let c = candidate(&far, 10, anchors);
        let r = rank_samples(&[c], &sys, &"pair:A,L".parse().unwrap()).unwrap();
        assert_eq!(r[0].score.value, 0.0);
        assert!("chain:A".parse::<RankingSubject>().is_ok());
        assert!("bogus".parse::<RankingSubject>().is_err());
    }
}
