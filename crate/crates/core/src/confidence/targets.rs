use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::bins::cross_entropy_with_grad;
use super::head::{row, ConfidenceOutput};
use crate::error::{Error, Result};
use crate::flow::nn::Mat;
use crate::geometry::{per_atom_lddt, LddtOptions, Vec3};
use crate::topology::MolecularSystem;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceTargets {
    /// `None` for atoms with no inter-residue contact in the reference.
    pub per_atom_lddt: Vec<Option<f64>>,
    pub anchors: Vec<usize>,
    /// `|D_pred − D_ref|` over anchor pairs.
    pub anchor_errors: DMatrix<f64>,
}

/// Per-atom LDDT of `pred` against `reference` and the anchor distance-map
/// errors. Both are alignment free.
pub fn confidence_targets(
    pred: &[Vec3],
    reference: &[Vec3],
    system: &MolecularSystem,
    anchors: &[usize],
) -> Result<ConfidenceTargets> {
    if let Some(&bad) = anchors.iter().find(|&&a| a >= system.n_atoms()) {
        return Err(Error::InvalidParameter(format!("anchor {bad} out of range")));
    }
    let per_atom = per_atom_lddt(pred, reference, system, &LddtOptions::default())?;
    let n = anchors.len();
    let errors = DMatrix::from_fn(n, n, |a, b| {
        let (i, j) = (anchors[a], anchors[b]);
        ((pred[i] - pred[j]).norm() - (reference[i] - reference[j]).norm()).abs()
    });
    Ok(ConfidenceTargets {
        per_atom_lddt: per_atom,
        anchors: anchors.to_vec(),
        anchor_errors: errors,
    })
}

#[derive(Debug, Clone)]
pub struct ConfidenceLoss {
    /// Mean cross-entropy over atoms with a target.
    pub plddt: f64,
    /// Mean cross-entropy over ordered anchor pairs `a ≠ b`.
    pub pde: f64,
    pub total: f64,
    pub d_plddt_logits: Mat,
    pub d_pde_logits: Mat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceLossValue {
    pub plddt: f64,
    pub pde: f64,
    pub total: f64,
}

/// Cross-entropy of the binned targets under the head logits.
pub fn confidence_loss(out: &ConfidenceOutput, targets: &ConfidenceTargets) -> Result<ConfidenceLoss> {
    if out.anchors != targets.anchors || out.plddt_logits.nrows() != targets.per_atom_lddt.len() {
        return Err(Error::InvalidParameter("confidence targets do not match the head output".into()));
    }
    let mut d_plddt = Mat::zeros(out.plddt_logits.nrows(), out.plddt_logits.ncols());
    let labelled: Vec<(usize, f64)> = targets
        .per_atom_lddt
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .collect();
    let mut plddt = 0.0;
    for &(i, v) in &labelled {
        let (l, g) = cross_entropy_with_grad(&row(&out.plddt_logits, i), out.plddt_bins.index(v));
        plddt += l;
        for (c, gc) in g.into_iter().enumerate() {
            d_plddt[(i, c)] = gc / labelled.len() as f64;
        }
    }
    if !labelled.is_empty() {
        plddt /= labelled.len() as f64;
    }

    let na = out.anchors.len();
    let pairs = na * na.saturating_sub(1);
    let mut d_pde = Mat::zeros(out.pde_logits.nrows(), out.pde_logits.ncols());
    let mut pde = 0.0;
    for a in 0..na {
        for b in 0..na {
            if a == b {
                continue;
            }
            let r = a * na + b;
            let target = out.pde_bins.index(targets.anchor_errors[(a, b)]);
            let (l, g) = cross_entropy_with_grad(&row(&out.pde_logits, r), target);
            pde += l;
            for (c, gc) in g.into_iter().enumerate() {
                d_pde[(r, c)] = gc / pairs as f64;
            }
        }
    }
    if pairs > 0 {
        pde /= pairs as f64;
    }
    Ok(ConfidenceLoss {
        plddt,
        pde,
        total: plddt + pde,
        d_plddt_logits: d_plddt,
        d_pde_logits: d_pde,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confidence::{Bins, ConfidenceConfig, ConfidenceHead};
    use crate::flow::toy;
    use crate::geometry::testing::random_points;
    use crate::topology::fixtures::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_prediction_targets() {
        let (sys, x) = toy::complex();
        let t = confidence_targets(&x, &x, &sys, &[0, 5, 25]).unwrap();
        assert!(t.per_atom_lddt.iter().flatten().all(|&v| v == 1.0));
        assert!(t.anchor_errors.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn displaced_atom_only_touches_its_rows() {
        let (sys, x) = toy::complex();
        let anchors: Vec<usize> = (0..31).step_by(3).collect();
        let mut moved = x.clone();
        moved[9] += Vec3::new(1.0, -2.0, 0.5);
        let t = confidence_targets(&moved, &x, &sys, &anchors).unwrap();
        let k = anchors.iter().position(|&a| a == 9).unwrap();
        for a in 0..anchors.len() {
            for b in 0..anchors.len() {
                if a != k && b != k {
                    assert!(t.anchor_errors[(a, b)] < 1e-12);
                }
            }
        }
        assert!(t.anchor_errors.row(k).iter().any(|&e| e > 0.1));
    }

    #[test]
    fn per_atom_lddt_matches_brute_force() {
        // Three residues of two atoms each.
        let sys = system(vec![ligand_chain("A", 1, "X", &["C", "C"]), ligand_chain("B", 2, "Y", &["C", "C"]), ligand_chain("C", 3, "Z", &["C", "C"])], vec![]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let reference = random_points(&mut rng, 6, 4.0);
        let noise = random_points(&mut rng, 6, 1.5);
        let pred: Vec<Vec3> = reference.iter().zip(&noise).map(|(a, b)| a + b).collect();
        let t = confidence_targets(&pred, &reference, &sys, &[0, 1]).unwrap();
        for i in 0..6 {
            let mut scores = Vec::new();
            for j in 0..6 {
                if i / 2 == j / 2 {
                    continue;
                }
                let dr = (reference[i] - reference[j]).norm();
                if dr >= 15.0 {
                    continue;
                }
                let dev = ((pred[i] - pred[j]).norm() - dr).abs();
                let kept = [0.5, 1.0, 2.0, 4.0].iter().filter(|&&c| dev < c).count();
                scores.push(kept as f64 / 4.0);
            }
            let want = (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64);
            match (want, t.per_atom_lddt[i]) {
                (Some(a), Some(b)) => assert!((a - b).abs() < 1e-12),
                (None, None) => {}
                other => panic!("{other:?}"),
            }
        }
    }

    fn uniform_output(n_atoms: usize, anchors: Vec<usize>) -> ConfidenceOutput {
        let na = anchors.len();
        ConfidenceOutput {
            anchors,
            plddt_logits: Mat::zeros(n_atoms, 50),
            pde_logits: Mat::zeros(na * na, 64),
            plddt_bins: Bins::new(50, 0.0, 1.0),
            pde_bins: Bins::new(64, 0.0, 32.0),
        }
    }

    #[test]
    fn uniform_logits_cost_log_bins() {
        let (sys, x) = toy::complex();
        let mut moved = x.clone();
        moved[3] += Vec3::new(0.7, 0.0, 0.0);
        let t = confidence_targets(&moved, &x, &sys, &[0, 10, 20, 30]).unwrap();
        let l = confidence_loss(&uniform_output(31, vec![0, 10, 20, 30]), &t).unwrap();
        assert!((l.plddt - 50f64.ln()).abs() < 1e-12);
        assert!((l.pde - 64f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn loss_gradient_matches_central_differences() {
        let (sys, x) = toy::ten_atom();
        let head = ConfidenceHead::for_system(ConfidenceConfig { plddt_bins: 6, pde_bins: 5, ..Default::default() }, &sys);
        let mut out = head.predict(&sys, &x, &[0, 4, 9]);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let moved: Vec<Vec3> = x.iter().zip(random_points(&mut rng, 10, 0.8)).map(|(a, b)| a + b).collect();
        let t = confidence_targets(&moved, &x, &sys, &[0, 4, 9]).unwrap();
        let l = confidence_loss(&out, &t).unwrap();
        let h = 1e-6;
        for (which, grad) in [(0, l.d_plddt_logits.clone()), (1, l.d_pde_logits.clone())] {
            for idx in 0..grad.len() {
                let m = if which == 0 { &mut out.plddt_logits } else { &mut out.pde_logits };
                let orig = m[idx];
                m[idx] = orig + h;
                let fp = confidence_loss(&out, &t).unwrap().total;
                let m = if which == 0 { &mut out.plddt_logits } else { &mut out.pde_logits };
                m[idx] = orig - h;
                let fm = confidence_loss(&out, &t).unwrap().total;
                let m = if which == 0 { &mut out.plddt_logits } else { &mut out.pde_logits };
                m[idx] = orig;
                assert!(((fp - fm) / (2.0 * h) - grad[idx]).abs() < 1e-6);
            }
        }
    }
}
