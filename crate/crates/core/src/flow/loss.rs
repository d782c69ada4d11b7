use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::error::{Error, Result};
use crate::geometry::{
    fape_frames, fape_with_grad, smooth_lddt_with_grad, FapeFrames, FapeOptions, LddtAtoms, LddtOptions, Vec3,
};
use crate::topology::{AnchorSet, MolecularSystem};

/// `1 / (ε + (1 − t)·σ_data)`.
pub fn loss_weight(t: f64, epsilon: f64, sigma_data: f64) -> f64 {
    1.0 / (epsilon + (1.0 - t) * sigma_data)
}

/// Mean over atoms of `sqrt(|Δ|² + c²) − c`, with its gradient.
pub fn pseudo_huber_with_grad(pred: &[Vec3], reference: &[Vec3], c: f64) -> (f64, Vec<Vec3>) {
    let n = pred.len().max(1) as f64;
    let mut total = 0.0;
    let grad = pred
        .iter()
        .zip(reference)
        .map(|(p, r)| {
            let d = p - r;
            let s = (d.norm_squared() + c * c).sqrt();
            total += s - c;
            d / (s * n)
        })
        .collect();
    (total / n, grad)
}

/// Per-system data for the structural loss terms, fixed at construction.
#[derive(Debug, Clone)]
pub struct LossContext {
    pub frames: FapeFrames,
    pub lddt_atoms: LddtAtoms,
    pub lddt: LddtOptions,
    pub fape: FapeOptions,
}

impl LossContext {
    /// FAPE frames sit on every atom with two bonded neighbours.
    pub fn new(system: &MolecularSystem, reference: &[Vec3]) -> Self {
        let lddt = LddtOptions::default();
        Self {
            frames: fape_frames(system, reference, &AnchorSet::all(system)),
            lddt_atoms: LddtAtoms::from_system(system, &lddt),
            lddt,
            fape: FapeOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub t: f64,
    pub weight: f64,
    pub pseudo_huber: f64,
    /// Smooth LDDT value (not the loss term); absent without contacts.
    pub smooth_lddt: Option<f64>,
    pub fape: Option<f64>,
    pub total: f64,
}

impl LossBreakdown {
    /// Component-wise mean; optional terms average over the entries that have them.
    pub fn mean(items: &[LossBreakdown]) -> LossBreakdown {
        let n = items.len().max(1) as f64;
        let opt_mean = |f: fn(&LossBreakdown) -> Option<f64>| {
            let v: Vec<f64> = items.iter().filter_map(f).collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        LossBreakdown {
            t: items.iter().map(|b| b.t).sum::<f64>() / n,
            weight: items.iter().map(|b| b.weight).sum::<f64>() / n,
            pseudo_huber: items.iter().map(|b| b.pseudo_huber).sum::<f64>() / n,
            smooth_lddt: opt_mean(|b| b.smooth_lddt),
            fape: opt_mean(|b| b.fape),
            total: items.iter().map(|b| b.total).sum::<f64>() / n,
        }
    }
}

/// `w(t)·PseudoHuber + w_lddt·(1 − SmoothLDDT) + w_fape·FAPE` and its
/// gradient with respect to `pred`. `reference` is a constant.
pub fn training_loss(
    pred: &[Vec3],
    reference: &[Vec3],
    ctx: &LossContext,
    cfg: &TrainConfig,
    t: f64,
) -> Result<(LossBreakdown, Vec<Vec3>)> {
    if pred.len() != reference.len() {
        return Err(Error::ShapeMismatch {
            expected: reference.len(),
            got: pred.len(),
        });
    }
    let w = loss_weight(t, cfg.epsilon, cfg.sigma_data);
    let (ph, g_ph) = pseudo_huber_with_grad(pred, reference, cfg.huber_c);
    let mut grad: Vec<Vec3> = g_ph.iter().map(|g| g * w).collect();
    let mut total = w * ph;

    let smooth = if cfg.w_lddt > 0.0 {
        match smooth_lddt_with_grad(pred, reference, &ctx.lddt_atoms, &ctx.lddt) {
            Ok((v, g)) => {
                total += cfg.w_lddt * (1.0 - v);
                for (a, b) in grad.iter_mut().zip(&g) {
                    *a -= b * cfg.w_lddt;
                }
                Some(v)
            }
            Err(Error::NoContacts) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };

    let fape = if cfg.w_fape > 0.0 && !ctx.frames.triples.is_empty() {
        match fape_with_grad(pred, reference, &ctx.frames, &ctx.fape) {
            Ok((v, g)) => {
                total += cfg.w_fape * v;
                for (a, b) in grad.iter_mut().zip(&g) {
                    *a += b * cfg.w_fape;
                }
                Some(v)
            }
            Err(Error::InvalidParameter(_)) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };

    Ok((
        LossBreakdown {
            t,
            weight: w,
            pseudo_huber: ph,
            smooth_lddt: smooth,
            fape,
            total,
        },
        grad,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::testing::random_points;
    use crate::topology::fixtures::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn weight_values() {
        assert!((loss_weight(0.0, 0.01, 16.0) - 0.06246).abs() < 1e-5);
        assert!((loss_weight(0.5, 0.01, 16.0) - 0.12484).abs() < 1e-5);
        assert!((loss_weight(1.0, 0.01, 16.0) - 100.0).abs() < 1e-9);
    }

    #[test]
    fn perfect_prediction() {
        let sys = system(vec![backbone_chain("A", 1, 3)], backbone_bonds(0, 3));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_points(&mut rng, 12, 3.0);
        let ctx = LossContext::new(&sys, &x);
        let (b, g) = training_loss(&x, &x, &ctx, &TrainConfig::default(), 0.3).unwrap();
        assert_eq!(b.pseudo_huber, 0.0);
        assert_eq!(b.fape, Some(0.0));
        assert!(b.smooth_lddt.unwrap() > 0.99);
        assert!(g.iter().all(|v| v.norm() < 1e-6));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let sys = system(
            vec![backbone_chain("A", 1, 2), ligand_chain("L", 2, "LIG", &["C", "O"])],
            {
                let mut b = backbone_bonds(0, 2);
                b.push(crate::topology::BondSpec { i: 8, j: 9, order: crate::topology::BondOrder::Single });
                b
            },
        );
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let reference = random_points(&mut rng, 10, 3.0);
        let noise = random_points(&mut rng, 10, 0.6);
        let pred: Vec<Vec3> = reference.iter().zip(&noise).map(|(a, b)| a + b).collect();
        let ctx = LossContext::new(&sys, &reference);
        let cfg = TrainConfig::default();
        let (_, g) = training_loss(&pred, &reference, &ctx, &cfg, 0.7).unwrap();
        let h = 1e-6;
        for i in 0..10 {
            for k in 0..3 {
                let mut p = pred.clone();
                p[i][k] += h;
                let fp = training_loss(&p, &reference, &ctx, &cfg, 0.7).unwrap().0.total;
                p[i][k] -= 2.0 * h;
                let fm = training_loss(&p, &reference, &ctx, &cfg, 0.7).unwrap().0.total;
                let fd = (fp - fm) / (2.0 * h);
                assert!((fd - g[i][k]).abs() <= 1e-3 * fd.abs() + 1e-7, "{i},{k}: {fd} vs {}", g[i][k]);
            }
        }
    }
}
