use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::denoiser::{Conditioning, Denoiser, ToyDenoiser};
use super::loss::{training_loss, LossBreakdown, LossContext};
use super::nn::Mat;
use super::{shift_timestep, TrainConfig};
use crate::error::{Error, Result};
use crate::geometry::{centroid, default_alignment_weights, kabsch_weighted, AlignmentWeights, RigidTransform, Vec3};
use crate::prior::{permute_prior_entities, sample_prior_with, NeighborOperators, PriorParams};
use crate::symmetry::{AtomPermutation, SymmetryIndex};
use crate::topology::MolecularSystem;
use crate::Conformation;

/// A training structure with everything that does not change between
/// iterations precomputed.
#[derive(Debug, Clone)]
pub struct TrainingExample {
    pub system: MolecularSystem,
    pub reference: Vec<Vec3>,
    pub weights: AlignmentWeights,
    pub symmetry: SymmetryIndex,
    pub loss: LossContext,
    pub prior_ops: NeighborOperators,
}

impl TrainingExample {
    pub fn new(system: MolecularSystem, reference: Vec<Vec3>) -> Result<Self> {
        if reference.len() != system.n_atoms() {
            return Err(Error::ShapeMismatch {
                expected: system.n_atoms(),
                got: reference.len(),
            });
        }
        Ok(Self {
            weights: default_alignment_weights(&system, None)?,
            symmetry: SymmetryIndex::new(&system),
            loss: LossContext::new(&system, &reference),
            prior_ops: NeighborOperators::build(&system),
            system,
            reference,
        })
    }
}

/// The random choices of one replica.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicaDraw {
    pub t: f64,
    pub prior_seed: u64,
}

impl ReplicaDraw {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            t: rng.random::<f64>(),
            prior_seed: rng.random::<u64>(),
        }
    }
}

/// Inputs and targets of one replica with alignment and permutation fixed,
/// so the loss is a plain function of the model parameters.
#[derive(Debug, Clone)]
pub struct FrozenTarget {
    pub t: f64,
    pub x_t: Vec<Vec3>,
    pub reference: Vec<Vec3>,
    pub permutation: AtomPermutation,
}

/// Weighted superposition, falling back to matching centroids when the
/// weighted point set is degenerate.
fn align_or_translate(mobile: &[Vec3], target: &[Vec3], w: &AlignmentWeights) -> Result<RigidTransform> {
    match kabsch_weighted(mobile, target, w) {
        Ok(t) => Ok(t),
        Err(Error::DegenerateAlignment) => {
            log::debug!("degenerate alignment, matching centroids only");
            Ok(RigidTransform {
                rotation: nalgebra::Matrix3::identity(),
                translation: centroid(target) - centroid(mobile),
            })
        }
        Err(e) => Err(e),
    }
}

/// Prior draw, entity permutation and interpolation for one replica. The
/// reference is superposed onto the prior sample first so that, as in
/// sampling, the clean component of `x_t` shares the prior's pose.
pub fn noisy_input(ex: &TrainingExample, cfg: &TrainConfig, draw: &ReplicaDraw) -> Result<Vec<Vec3>> {
    let params = PriorParams {
        seed: draw.prior_seed,
        ..cfg.prior.clone()
    };
    let x0 = sample_prior_with(&ex.system, &ex.prior_ops, &params)?;
    let x0 = permute_prior_entities(&x0, &Conformation::reference(ex.reference.clone()), &ex.system);
    let fit = align_or_translate(&ex.reference, &x0, &ex.weights)?;
    let x1 = fit.apply_all(&ex.reference);
    Ok(x0
        .iter()
        .zip(&x1)
        .map(|(a, b)| a * (1.0 - draw.t) + b * draw.t)
        .collect())
}

/// Run the model on a replica and fix the alignment of the reference onto
/// the prediction and the symmetry permutation of the prediction.
pub fn freeze_replica(
    model: &ToyDenoiser,
    cond: &Conditioning,
    ex: &TrainingExample,
    cfg: &TrainConfig,
    draw: &ReplicaDraw,
) -> Result<FrozenTarget> {
    let x_t = noisy_input(ex, cfg, draw)?;
    let pred = model.denoise(cond, &x_t, shift_timestep(draw.t, cfg.shift_exponent));
    let fit = align_or_translate(&ex.reference, &pred, &ex.weights)?;
    let reference = fit.apply_all(&ex.reference);
    let permutation = ex.symmetry.best_permutation(&pred, &reference);
    Ok(FrozenTarget {
        t: draw.t,
        x_t,
        reference,
        permutation,
    })
}

/// Loss and parameter gradient for a frozen replica.
pub fn frozen_loss(
    model: &ToyDenoiser,
    cond: &Conditioning,
    ex: &TrainingExample,
    cfg: &TrainConfig,
    frozen: &FrozenTarget,
) -> Result<(LossBreakdown, Vec<Mat>)> {
    let (pred, cache) = model.forward(cond, &frozen.x_t, shift_timestep(frozen.t, cfg.shift_exponent));
    let permuted = frozen.permutation.apply(&pred);
    let (breakdown, g_perm) = training_loss(&permuted, &frozen.reference, &ex.loss, cfg, frozen.t)?;
    let mut g_pred = vec![Vec3::zeros(); pred.len()];
    for (i, &src) in frozen.permutation.mapping.iter().enumerate() {
        g_pred[src] += g_perm[i];
    }
    let mut grads = model.zero_grads();
    model.backward(&cache, &g_pred, &mut grads);
    Ok((breakdown, grads))
}

fn replica(
    model: &ToyDenoiser,
    cond: &Conditioning,
    ex: &TrainingExample,
    cfg: &TrainConfig,
    draw: &ReplicaDraw,
) -> Result<(LossBreakdown, Vec<Mat>)> {
    let frozen = freeze_replica(model, cond, ex, cfg, draw)?;
    let (b, g) = frozen_loss(model, cond, ex, cfg, &frozen)?;
    if !b.total.is_finite() {
        return Err(Error::NonFiniteLoss {
            t: draw.t,
            seed: draw.prior_seed,
        });
    }
    Ok((b, g))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global gradient-norm clip.
    pub clip_norm: Option<f64>,
    pub warmup_steps: usize,
    /// Cosine decay to `final_lr_fraction·lr` over this many steps.
    pub decay_steps: Option<usize>,
    pub final_lr_fraction: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: Some(1.0),
            warmup_steps: 100,
            decay_steps: None,
            final_lr_fraction: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<Mat>,
    v: Vec<Mat>,
    step: usize,
}

impl Adam {
    pub fn new(config: AdamConfig, model: &ToyDenoiser) -> Self {
        Self::for_params(config, model.params())
    }

    /// Optimiser state shaped like `params`.
    pub fn for_params(config: AdamConfig, params: &[Mat]) -> Self {
        let zeros: Vec<Mat> = params.iter().map(|p| Mat::zeros(p.nrows(), p.ncols())).collect();
        Self {
            config,
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    pub fn learning_rate(&self, step: usize) -> f64 {
        let c = &self.config;
        let warm = if c.warmup_steps > 0 {
            ((step + 1) as f64 / c.warmup_steps as f64).min(1.0)
        } else {
            1.0
        };
        let decay = match c.decay_steps {
            Some(total) if total > 0 => {
                let p = (step as f64 / total as f64).min(1.0);
                c.final_lr_fraction + (1.0 - c.final_lr_fraction) * 0.5 * (1.0 + (std::f64::consts::PI * p).cos())
            }
            _ => 1.0,
        };
        c.lr * warm * decay
    }

    /// Apply one update; returns the pre-clip gradient norm.
    pub fn update(&mut self, params: &mut [Mat], grads: &[Mat]) -> f64 {
        let norm = grads.iter().map(|g| g.norm_squared()).sum::<f64>().sqrt();
        let scale = match self.config.clip_norm {
            Some(c) if norm > c => c / norm,
            _ => 1.0,
        };
        let lr = self.learning_rate(self.step);
        self.step += 1;
        let (b1, b2) = (self.config.beta1, self.config.beta2);
        let bc1 = 1.0 - b1.powi(self.step as i32);
        let bc2 = 1.0 - b2.powi(self.step as i32);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for idx in 0..p.len() {
                let gi = g[idx] * scale;
                m[idx] = b1 * m[idx] + (1.0 - b1) * gi;
                v[idx] = b2 * v[idx] + (1.0 - b2) * gi * gi;
                p[idx] -= lr * (m[idx] / bc1) / ((v[idx] / bc2).sqrt() + self.config.eps);
            }
        }
        norm
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: usize,
    pub loss: LossBreakdown,
    pub replica_totals: Vec<f64>,
    pub grad_norm: f64,
}

/// Loss and averaged gradient over `cfg.replicas` independent draws that
/// share one conditioning pass. Draws are taken from `rng` in order, then
/// evaluated in parallel.
pub fn replicated_gradient<R: Rng + ?Sized>(
    model: &ToyDenoiser,
    ex: &TrainingExample,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<(Vec<LossBreakdown>, Vec<Mat>)> {
    cfg.validate()?;
    let cond = model.condition(&ex.system);
    let draws: Vec<ReplicaDraw> = (0..cfg.replicas).map(|_| ReplicaDraw::sample(rng)).collect();
    let results: Vec<Result<(LossBreakdown, Vec<Mat>)>> =
        draws.par_iter().map(|d| replica(model, &cond, ex, cfg, d)).collect();
    let mut breakdowns = Vec::with_capacity(draws.len());
    let mut grads = model.zero_grads();
    for r in results {
        let (b, g) = r?;
        breakdowns.push(b);
        for (acc, gi) in grads.iter_mut().zip(&g) {
            *acc += gi;
        }
    }
    let inv = 1.0 / draws.len() as f64;
    for g in &mut grads {
        *g *= inv;
    }
    Ok((breakdowns, grads))
}

/// One optimisation step over `cfg.replicas` decoder replicas.
pub fn train_replicated<R: Rng + ?Sized>(
    model: &mut ToyDenoiser,
    opt: &mut Adam,
    ex: &TrainingExample,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<StepReport> {
    let (breakdowns, grads) = replicated_gradient(model, ex, cfg, rng)?;
    let grad_norm = opt.update(model.params_mut(), &grads);
    Ok(StepReport {
        step: opt.steps_taken(),
        loss: LossBreakdown::mean(&breakdowns),
        replica_totals: breakdowns.iter().map(|b| b.total).collect(),
        grad_norm,
    })
}

/// One optimisation step with a single replica.
pub fn train_step<R: Rng + ?Sized>(
    model: &mut ToyDenoiser,
    opt: &mut Adam,
    ex: &TrainingExample,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<StepReport> {
    let single = TrainConfig {
        replicas: 1,
        ..cfg.clone()
    };
    train_replicated(model, opt, ex, &single, rng)
}

/// `steps` optimisation steps cycling through `examples` in order, calling
/// `on_step` after each. Returns the last report.
pub fn train_round_robin<R: Rng + ?Sized>(
    model: &mut ToyDenoiser,
    opt: &mut Adam,
    examples: &[TrainingExample],
    cfg: &TrainConfig,
    steps: usize,
    rng: &mut R,
    mut on_step: impl FnMut(usize, &StepReport),
) -> Result<Option<StepReport>> {
    if examples.is_empty() && steps > 0 {
        return Err(Error::InvalidParameter("no training examples".into()));
    }
    let mut last = None;
    for s in 0..steps {
        let k = s % examples.len();
        let r = train_replicated(model, opt, &examples[k], cfg, rng)?;
        on_step(k, &r);
        last = Some(r);
    }
    Ok(last)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::denoiser::ToyDenoiserConfig;
    use crate::flow::toy;
    use crate::geometry::testing::random_rigid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_model() -> ToyDenoiser {
        ToyDenoiser::new(ToyDenoiserConfig {
            d_model: 16,
            n_heads: 2,
            n_blocks: 1,
            mlp_hidden: 16,
            head_init: 0.3,
            ..Default::default()
        })
    }

    #[test]
    fn loss_invariant_to_rigid_motion_of_reference() {
        let (sys, x) = toy::peptide();
        let ex = TrainingExample::new(sys.clone(), x.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let moved = TrainingExample::new(sys, random_rigid(&mut rng).apply_all(&x)).unwrap();
        let model = tiny_model();
        let cfg = TrainConfig::default();
        for seed in 0..5 {
            let draw = ReplicaDraw::sample(&mut ChaCha8Rng::seed_from_u64(seed));
            let cond = model.condition(&ex.system);
            let a = replica(&model, &cond, &ex, &cfg, &draw).unwrap().0.total;
            let b = replica(&model, &cond, &moved, &cfg, &draw).unwrap().0.total;
            assert!((a - b).abs() <= 1e-6 * a.abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn parameter_gradient_matches_finite_differences() {
        let (sys, x) = toy::ten_atom();
        let ex = TrainingExample::new(sys, x).unwrap();
        let mut model = tiny_model();
        let cfg = TrainConfig::default();
        let cond = model.condition(&ex.system);
        let draw = ReplicaDraw { t: 0.6, prior_seed: 3 };
        let frozen = freeze_replica(&model, &cond, &ex, &cfg, &draw).unwrap();
        let (_, grads) = frozen_loss(&model, &cond, &ex, &cfg, &frozen).unwrap();
        let last = model.params().len() - 2;
        let h = 1e-6;
        for k in [0, 4, last] {
            for idx in [0, model.params()[k].len() / 3] {
                let orig = model.params()[k][idx];
                model.params_mut()[k][idx] = orig + h;
                let fp = frozen_loss(&model, &cond, &ex, &cfg, &frozen).unwrap().0.total;
                model.params_mut()[k][idx] = orig - h;
                let fm = frozen_loss(&model, &cond, &ex, &cfg, &frozen).unwrap().0.total;
                model.params_mut()[k][idx] = orig;
                let fd = (fp - fm) / (2.0 * h);
                let an = grads[k][idx];
                assert!((fd - an).abs() <= 1e-3 * fd.abs() + 1e-8, "{k}[{idx}]: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn single_replica_equals_train_step() {
        let (sys, x) = toy::peptide();
        let ex = TrainingExample::new(sys, x).unwrap();
        let cfg = TrainConfig::default();
        let mut m1 = tiny_model();
        let mut m2 = tiny_model();
        let mut o1 = Adam::new(AdamConfig::default(), &m1);
        let mut o2 = Adam::new(AdamConfig::default(), &m2);
        let r1 = train_step(&mut m1, &mut o1, &ex, &cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let r2 = train_replicated(&mut m2, &mut o2, &ex, &cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(m1.params(), m2.params());
    }

    #[test]
    fn conditioning_computed_once_per_iteration() {
        let (sys, x) = toy::peptide();
        let ex = TrainingExample::new(sys, x).unwrap();
        let cfg = TrainConfig { replicas: 6, ..Default::default() };
        let mut model = tiny_model();
        let mut opt = Adam::new(AdamConfig::default(), &model);
        let r = train_replicated(&mut model, &mut opt, &ex, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(r.replica_totals.len(), 6);
        assert_eq!(model.condition_calls(), 1);
    }

    #[test]
    fn replica_averaging_reduces_variance() {
        // w(t) has a 1/(1 - t) tail, so the single-draw loss only has a
        // finite variance with t bounded away from 1.
        let (sys, x) = toy::peptide();
        let ex = TrainingExample::new(sys, x).unwrap();
        let model = tiny_model();
        let cfg = TrainConfig::default();
        let cond = model.condition(&ex.system);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let losses: Vec<f64> = (0..480)
            .map(|_| {
                let mut d = ReplicaDraw::sample(&mut rng);
                d.t *= 0.9;
                replica(&model, &cond, &ex, &cfg, &d).unwrap().0.total
            })
            .collect();
        let var = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        };
        let means: Vec<f64> = losses.chunks(8).map(|c| c.iter().sum::<f64>() / 8.0).collect();
        let ratio = var(&means) / var(&losses);
        assert!((1.0 / 24.0..1.0 / 3.0).contains(&ratio), "{ratio}");
    }
}
