use serde::{Deserialize, Serialize};

use super::mapping::{best_chain_mapping, map_pocket, PocketMapping};
use crate::error::{Error, Result};
use crate::geometry::{aligned_rmsd, detect_pocket, ResidueRef, Vec3};
use crate::io::StructureRecord;
use crate::topology::MolecularSystem;

/// C-alpha radius (Å) around the ligand of interest defining the pocket.
pub const POCKET_RADIUS: f64 = 10.0;
/// Apo and holo must differ by more than this RMSD (Å) at some level.
pub const VALIDATION_GATE: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConformationLabel {
    Apo,
    Holo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreLevel {
    Global,
    Pocket,
    PocketSidechain,
}

impl ScoreLevel {
    pub const ALL: [ScoreLevel; 3] = [ScoreLevel::Global, ScoreLevel::Pocket, ScoreLevel::PocketSidechain];
}

/// Signed placement of a query between reference (+1) and alternative
/// (−1): `(q_alt − q_ref) / √(½(q_alt² + q_ref² + alt_ref²))`.
pub fn conformational_score(q_ref: f64, q_alt: f64, alt_ref: f64) -> Result<f64> {
    let denom = (0.5 * (q_alt * q_alt + q_ref * q_ref + alt_ref * alt_ref)).sqrt();
    if denom == 0.0 {
        return Err(Error::DegenerateLinkage);
    }
    Ok((q_alt - q_ref) / denom)
}

#[derive(Debug, Clone)]
pub struct ConfBenchLinkage {
    pub apo: StructureRecord,
    pub holo: StructureRecord,
    pub query: StructureRecord,
    /// Chain id of the ligand of interest in the holo structure.
    pub ligand_chain: String,
    /// State the query is meant to reproduce.
    pub label: ConformationLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelScore {
    pub score: f64,
    pub rmsd_query_ref: f64,
    pub rmsd_query_alt: f64,
    pub rmsd_alt_ref: f64,
    pub n_atoms: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfBenchScore {
    pub global: LevelScore,
    pub pocket: LevelScore,
    pub pocket_sidechain: LevelScore,
}

impl ConfBenchScore {
    pub fn level(&self, level: ScoreLevel) -> &LevelScore {
        match level {
            ScoreLevel::Global => &self.global,
            ScoreLevel::Pocket => &self.pocket,
            ScoreLevel::PocketSidechain => &self.pocket_sidechain,
        }
    }
}

/// Matched atoms of one level as index triples (holo, apo, query).
type Triples = Vec<(usize, usize, usize)>;

/// Mappings and atom sets of a linkage that passed validation.
#[derive(Debug, Clone)]
pub struct PreparedLinkage {
    pub pocket: Vec<ResidueRef>,
    pub apo_pocket: PocketMapping,
    pub query_pocket: PocketMapping,
    levels: [Triples; 3],
    /// Apo-vs-holo RMSD per level.
    pub apo_holo_rmsd: [f64; 3],
}

fn atom_named(system: &MolecularSystem, (c, r): ResidueRef, name: &str) -> Option<usize> {
    system.chain(c).residues[r]
        .atoms
        .clone()
        .find(|&i| system.atom(i).name == name)
}

fn triples(
    l: &ConfBenchLinkage,
    residues: &[(ResidueRef, ResidueRef, ResidueRef)],
    sidechains: bool,
) -> Triples {
    let mut out = Vec::new();
    for &(h, a, q) in residues {
        let names: Vec<String> = if sidechains {
            let res = &l.holo.system.chain(h.0).residues[h.1];
            res.atoms
                .clone()
                .filter(|&i| l.holo.system.atom(i).is_heavy())
                .map(|i| l.holo.system.atom(i).name.clone())
                .collect()
        } else {
            vec!["CA".to_string()]
        };
        for name in names {
            if let (Some(ih), Some(ia), Some(iq)) = (
                atom_named(&l.holo.system, h, &name),
                atom_named(&l.apo.system, a, &name),
                atom_named(&l.query.system, q, &name),
            ) {
                out.push((ih, ia, iq));
            }
        }
    }
    out
}

fn pick(rec: &StructureRecord, idx: impl Iterator<Item = usize>) -> Vec<Vec3> {
    idx.map(|i| rec.coords[i]).collect()
}

fn level_rmsds(l: &ConfBenchLinkage, t: &Triples) -> Result<(Vec<Vec3>, Vec<Vec3>, Vec<Vec3>)> {
    if t.len() < 3 {
        return Err(Error::PocketTooSmall(t.len()));
    }
    Ok((
        pick(&l.holo, t.iter().map(|x| x.0)),
        pick(&l.apo, t.iter().map(|x| x.1)),
        pick(&l.query, t.iter().map(|x| x.2)),
    ))
}

/// Freeze the pocket from the holo reference, map chains and pocket
/// residues onto apo and query, build the three atom sets and apply the
/// apo/holo difference gate.
pub fn validate_linkage(l: &ConfBenchLinkage) -> Result<PreparedLinkage> {
    let lig = l
        .holo
        .system
        .chain_index(&l.ligand_chain)
        .ok_or_else(|| Error::InvalidLinkage(format!("holo has no chain '{}'", l.ligand_chain)))?;
    let pocket = detect_pocket(&l.holo.coords, &l.holo.system, lig, POCKET_RADIUS)?;
    let apo_chains = best_chain_mapping(&l.holo, &l.apo, &pocket)?;
    let query_chains = best_chain_mapping(&l.holo, &l.query, &pocket)?;
    let apo_pocket = map_pocket(&l.holo.system, &l.apo.system, &pocket, &apo_chains)?;
    let query_pocket = map_pocket(&l.holo.system, &l.query.system, &pocket, &query_chains)?;

    // Global level: every holo residue of the mapped chains aligned in both.
    let mut global = Vec::new();
    let mut chains: Vec<usize> = apo_chains.keys().copied().collect();
    chains.sort_unstable();
    for hc in chains {
        let (Some(&ac), Some(&qc)) = (apo_chains.get(&hc), query_chains.get(&hc)) else {
            continue;
        };
        let all: Vec<ResidueRef> = (0..l.holo.system.chain(hc).residues.len()).map(|r| (hc, r)).collect();
        let to_apo = map_pocket(&l.holo.system, &l.apo.system, &all, &[(hc, ac)].into())
            .map_err(|_| Error::InvalidLinkage("apo chain does not align to holo".into()))?;
        let to_query = map_pocket(&l.holo.system, &l.query.system, &all, &[(hc, qc)].into())
            .map_err(|_| Error::InvalidLinkage("query chain does not align to holo".into()))?;
        for &(h, a) in &to_apo.pairs {
            if let Some(q) = to_query.get(h) {
                global.push((h, a, q));
            }
        }
    }
    let pocket_res: Vec<(ResidueRef, ResidueRef, ResidueRef)> = apo_pocket
        .pairs
        .iter()
        .filter_map(|&(h, a)| query_pocket.get(h).map(|q| (h, a, q)))
        .collect();
    let levels = [
        triples(l, &global, false),
        triples(l, &pocket_res, false),
        triples(l, &pocket_res, true),
    ];
    let mut apo_holo = [0.0; 3];
    for (k, t) in levels.iter().enumerate() {
        let (h, a, _) = level_rmsds(l, t)?;
        apo_holo[k] = aligned_rmsd(&a, &h)?;
    }
    if apo_holo.iter().all(|&r| r <= VALIDATION_GATE) {
        return Err(Error::InvalidLinkage(format!(
            "apo and holo differ by at most {VALIDATION_GATE} Å at every level ({apo_holo:.3?})"
        )));
    }
    Ok(PreparedLinkage {
        pocket,
        apo_pocket,
        query_pocket,
        levels,
        apo_holo_rmsd: apo_holo,
    })
}

/// Score all three levels with one Kabsch pass per RMSD. The labelled
/// state is the reference, the other the alternative.
pub fn confbench_score(l: &ConfBenchLinkage) -> Result<ConfBenchScore> {
    let prep = validate_linkage(l)?;
    let mut out = Vec::with_capacity(3);
    for (k, t) in prep.levels.iter().enumerate() {
        let (holo, apo, query) = level_rmsds(l, t)?;
        let q_holo = aligned_rmsd(&query, &holo)?;
        let q_apo = aligned_rmsd(&query, &apo)?;
        let alt_ref = prep.apo_holo_rmsd[k];
        let (q_ref, q_alt) = match l.label {
            ConformationLabel::Holo => (q_holo, q_apo),
            ConformationLabel::Apo => (q_apo, q_holo),
        };
        out.push(LevelScore {
            score: conformational_score(q_ref, q_alt, alt_ref)?,
            rmsd_query_ref: q_ref,
            rmsd_query_alt: q_alt,
            rmsd_alt_ref: alt_ref,
            n_atoms: t.len(),
        });
    }
    Ok(ConfBenchScore {
        global: out[0],
        pocket: out[1],
        pocket_sidechain: out[2],
    })
}

/// Fraction of scores strictly above `threshold` at `level`.
pub fn win_rate(scores: &[ConfBenchScore], level: ScoreLevel, threshold: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::InvalidParameter("win rate of an empty score list".into()));
    }
    let wins = scores.iter().filter(|s| s.level(level).score > threshold).count();
    Ok(wins as f64 / scores.len() as f64)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::flow::toy;
    use crate::geometry::testing::random_rigid;
    use crate::geometry::Conformation;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Holo = toy complex; apo = same protein without the ligand, with the
    /// C-terminal residues swung away by `shift` Å.
    pub(crate) fn linkage(shift: f64, query_is_holo: bool, label: ConformationLabel) -> ConfBenchLinkage {
        let (sys, x) = toy::complex();
        let mut doc = sys.to_doc();
        doc.chains.truncate(1);
        doc.bonds.retain(|b| b.i < 25 && b.j < 25);
        let apo_sys = MolecularSystem::from_doc(&doc).unwrap();
        let apo_x: Vec<Vec3> = x[..25]
            .iter()
            .enumerate()
            .map(|(i, p)| if i >= 15 { p + Vec3::new(shift, shift * 0.5, 0.0) } else { *p })
            .collect();
        let holo = StructureRecord::new(sys.clone(), Conformation::reference(x.clone())).unwrap();
        let apo = StructureRecord::new(apo_sys.clone(), Conformation::reference(apo_x.clone())).unwrap();
        let query = if query_is_holo { holo.clone() } else { apo.clone() };
        ConfBenchLinkage { apo, holo, query, ligand_chain: "L".into(), label }
    }

    #[test]
    fn score_examples() {
        assert!((conformational_score(0.0, 2.0, 2.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((conformational_score(2.0, 0.0, 2.0).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(conformational_score(1.3, 1.3, 2.0).unwrap(), 0.0);
        assert!(matches!(conformational_score(0.0, 0.0, 0.0), Err(Error::DegenerateLinkage)));
    }

    #[test]
    fn query_equal_to_reference_or_alternative() {
        let s = confbench_score(&linkage(3.0, true, ConformationLabel::Holo)).unwrap();
        for l in ScoreLevel::ALL {
            assert!((s.level(l).score - 1.0).abs() < 1e-6, "{l:?} {:?}", s.level(l));
        }
        let s = confbench_score(&linkage(3.0, false, ConformationLabel::Holo)).unwrap();
        for l in ScoreLevel::ALL {
            assert!((s.level(l).score + 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn flipping_the_label_negates_every_level() {
        let a = confbench_score(&linkage(3.0, true, ConformationLabel::Holo)).unwrap();
        let b = confbench_score(&linkage(3.0, true, ConformationLabel::Apo)).unwrap();
        for l in ScoreLevel::ALL {
            assert_eq!(a.level(l).score, -b.level(l).score);
        }
    }

    #[test]
    fn rigid_motion_of_query_changes_nothing() {
        let base = linkage(3.0, true, ConformationLabel::Holo);
        let s0 = confbench_score(&base).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut moved = base.clone();
        moved.query.coords = base.query.coords.transformed(&random_rigid(&mut rng));
        let s1 = confbench_score(&moved).unwrap();
        for l in ScoreLevel::ALL {
            assert!((s0.level(l).score - s1.level(l).score).abs() < 1e-9);
        }
    }

    #[test]
    fn gate_rejects_near_identical_states() {
        let err = confbench_score(&linkage(0.2, true, ConformationLabel::Holo)).unwrap_err();
        assert!(matches!(err, Error::InvalidLinkage(_)));
    }

    fn with(score: f64) -> ConfBenchScore {
        let l = LevelScore { score, rmsd_query_ref: 0.0, rmsd_query_alt: 0.0, rmsd_alt_ref: 0.0, n_atoms: 0 };
        ConfBenchScore { global: l, pocket: l, pocket_sidechain: l }
    }

    #[test]
    fn win_rates() {
        assert_eq!(win_rate(&[with(1.0), with(1.0)], ScoreLevel::Pocket, 0.0).unwrap(), 1.0);
        assert_eq!(win_rate(&[with(-1.0)], ScoreLevel::Pocket, 0.5).unwrap(), 0.0);
        let mixed = [with(0.6), with(-0.2), with(0.1)];
        assert!((win_rate(&mixed, ScoreLevel::Global, 0.0).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!((win_rate(&mixed, ScoreLevel::Global, 0.5).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!(win_rate(&[], ScoreLevel::Global, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn scores_are_bounded_and_antisymmetric(a in 0.0f64..20.0, b in 0.0f64..20.0, c in 0.0f64..20.0) {
            // Three RMSDs satisfying the triangle inequality.
            prop_assume!(a <= b + c && b <= a + c && c <= a + b && a + b + c > 0.0);
            let s = conformational_score(a, b, c).unwrap();
            prop_assert!(s.abs() <= 1.0 + 1e-12);
            prop_assert_eq!(conformational_score(b, a, c).unwrap(), -s);
        }
    }
}
