use rand::Rng;
use serde::{Deserialize, Serialize};

use super::head::ConfidenceHead;
use super::targets::{confidence_loss, confidence_targets, ConfidenceLossValue};
use crate::error::{Error, Result};
use crate::flow::nn::Mat;
use crate::flow::{
    noisy_input, sample_structure, shift_timestep, train_step, Adam, AdamConfig, Denoiser, FlowConfig, ReplicaDraw,
    ToyDenoiser, TrainConfig, TrainingExample,
};
use crate::geometry::Vec3;
use crate::topology::select_anchors;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConfidenceTrainConfig {
    pub iterations: usize,
    /// Add a short rollout every `n`-th iteration; `None` never does.
    pub every_n: Option<usize>,
    pub rollout_steps: usize,
    pub anchor_budget: usize,
    pub flow: TrainConfig,
    pub adam: AdamConfig,
}

impl Default for ConfidenceTrainConfig {
    fn default() -> Self {
        Self {
            iterations: 500,
            every_n: Some(10),
            rollout_steps: 10,
            anchor_budget: 32,
            flow: TrainConfig::default(),
            adam: AdamConfig {
                warmup_steps: 20,
                ..Default::default()
            },
        }
    }
}

impl ConfidenceTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.every_n == Some(0) {
            return Err(Error::InvalidParameter("every_n must be >= 1".into()));
        }
        if self.rollout_steps == 0 || self.anchor_budget == 0 {
            return Err(Error::InvalidParameter("rollout_steps and anchor_budget must be >= 1".into()));
        }
        self.flow.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceIterationReport {
    /// One-based.
    pub iteration: usize,
    pub flow_loss: Option<f64>,
    pub one_step: ConfidenceLossValue,
    pub rollout: Option<ConfidenceLossValue>,
}

fn accumulate(
    head: &ConfidenceHead,
    ex: &TrainingExample,
    x: &[Vec3],
    anchors: &[usize],
    grads: &mut [Mat],
) -> Result<ConfidenceLossValue> {
    let targets = confidence_targets(x, &ex.reference, &ex.system, anchors)?;
    let (out, cache) = head.forward(&ex.system, x, anchors);
    let loss = confidence_loss(&out, &targets)?;
    head.backward(&cache, &loss.d_plddt_logits, &loss.d_pde_logits, grads);
    Ok(ConfidenceLossValue {
        plddt: loss.plddt,
        pde: loss.pde,
        total: loss.total,
    })
}

/// Confidence update against a fixed denoiser: the loss on a one-step
/// denoised structure, plus on a short rollout when `iteration` is a
/// multiple of `every_n`.
pub fn confidence_iteration<R: Rng + ?Sized>(
    denoiser: &dyn Denoiser,
    head: &mut ConfidenceHead,
    opt: &mut Adam,
    ex: &TrainingExample,
    cfg: &ConfidenceTrainConfig,
    iteration: usize,
    rng: &mut R,
) -> Result<ConfidenceIterationReport> {
    cfg.validate()?;
    let anchors = select_anchors(&ex.system, cfg.anchor_budget, 0)?.indices;
    let draw = ReplicaDraw::sample(rng);
    let x_t = noisy_input(ex, &cfg.flow, &draw)?;
    let cond = denoiser.condition(&ex.system);
    let pred = denoiser.denoise(&cond, &x_t, shift_timestep(draw.t, cfg.flow.shift_exponent));

    let mut grads = head.zero_grads();
    let one_step = accumulate(head, ex, &pred, &anchors, &mut grads)?;
    let rollout = match cfg.every_n {
        Some(n) if iteration % n == 0 => {
            let flow = FlowConfig {
                steps: cfg.rollout_steps,
                shift_exponent: cfg.flow.shift_exponent,
                seed: rng.random(),
                prior: cfg.flow.prior.clone(),
            };
            let sampled = sample_structure(denoiser, &ex.system, &flow)?;
            Some(accumulate(head, ex, &sampled.conformation, &anchors, &mut grads)?)
        }
        _ => None,
    };
    opt.update(head.params_mut(), &grads);
    Ok(ConfidenceIterationReport {
        iteration,
        flow_loss: None,
        one_step,
        rollout,
    })
}

/// Joint loop: each iteration optionally takes a flow-matching step on
/// the denoiser, then a confidence step against the updated denoiser.
/// Examples are visited round robin.
#[allow(clippy::too_many_arguments)]
pub fn confidence_train_loop<R: Rng + ?Sized>(
    denoiser: &mut ToyDenoiser,
    mut flow_opt: Option<&mut Adam>,
    head: &mut ConfidenceHead,
    head_opt: &mut Adam,
    examples: &[TrainingExample],
    cfg: &ConfidenceTrainConfig,
    rng: &mut R,
) -> Result<Vec<ConfidenceIterationReport>> {
    if examples.is_empty() {
        return Err(Error::InvalidParameter("no training examples".into()));
    }
    let mut reports = Vec::with_capacity(cfg.iterations);
    for it in 1..=cfg.iterations {
        let ex = &examples[(it - 1) % examples.len()];
        let flow_loss = match flow_opt.as_deref_mut() {
            Some(opt) => Some(train_step(denoiser, opt, ex, &cfg.flow, rng)?.loss.total),
            None => None,
        };
        let mut r = confidence_iteration(&*denoiser, head, head_opt, ex, cfg, it, rng)?;
        r.flow_loss = flow_loss;
        reports.push(r);
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confidence::ConfidenceConfig;
    use crate::flow::{toy, Conditioning, ToyDenoiserConfig};
    use crate::geometry::{superpose, testing::random_points};
    use crate::topology::MolecularSystem;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Moves the current state towards the superposed truth by `t`, so
    /// one-step predictions are poor early and good late.
    struct Blend {
        truth: Vec<Vec3>,
    }

    impl Denoiser for Blend {
        fn condition(&self, system: &MolecularSystem) -> Conditioning {
            Conditioning::from_system(system)
        }

        fn denoise(&self, _c: &Conditioning, x_t: &[Vec3], t: f64) -> Vec<Vec3> {
            let truth = superpose(&self.truth, x_t).unwrap().apply_all(&self.truth);
            truth.iter().zip(x_t).map(|(a, b)| a * t + b * (1.0 - t)).collect()
        }
    }

    fn mean_plddt(head: &ConfidenceHead, ex: &TrainingExample, x: &[Vec3]) -> f64 {
        let p = head.predict(&ex.system, x, &[]).plddt();
        p.iter().sum::<f64>() / p.len() as f64
    }

    #[test]
    fn rollout_schedule_follows_every_n() {
        let (sys, x) = toy::peptide();
        let ex = TrainingExample::new(sys.clone(), x.clone()).unwrap();
        let blend = Blend { truth: x };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (every_n, want) in [(Some(1), 6), (Some(3), 2), (None, 0)] {
            let cfg = ConfidenceTrainConfig { every_n, ..Default::default() };
            let mut head = ConfidenceHead::for_system(ConfidenceConfig::default(), &sys);
            let mut opt = Adam::for_params(cfg.adam.clone(), head.params());
            let n = (1..=6)
                .filter(|&it| confidence_iteration(&blend, &mut head, &mut opt, &ex, &cfg, it, &mut rng).unwrap().rollout.is_some())
                .count();
            assert_eq!(n, want);
        }
    }

    #[test]
    fn joint_loop_steps_both_models() {
        let (sys, x) = toy::peptide();
        let ex = TrainingExample::new(sys.clone(), x).unwrap();
        let mut model = ToyDenoiser::new(ToyDenoiserConfig { d_model: 16, n_heads: 2, n_blocks: 1, mlp_hidden: 16, ..Default::default() });
        let mut flow_opt = Adam::new(AdamConfig::default(), &model);
        let cfg = ConfidenceTrainConfig { iterations: 3, every_n: Some(2), ..Default::default() };
        let mut head = ConfidenceHead::for_system(ConfidenceConfig::default(), &sys);
        let mut head_opt = Adam::for_params(cfg.adam.clone(), head.params());
        let before = model.params()[0].clone();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = confidence_train_loop(&mut model, Some(&mut flow_opt), &mut head, &mut head_opt, &[ex], &cfg, &mut rng).unwrap();
        assert_eq!(r.len(), 3);
        assert!(r.iter().all(|x| x.flow_loss.is_some()));
        assert_eq!(r.iter().filter(|x| x.rollout.is_some()).count(), 1);
        assert_ne!(model.params()[0], before);
        assert_eq!(head_opt.steps_taken(), 3);
    }

    #[test]
    fn trained_head_prefers_sampled_over_noised_structures() {
        let (sys, x) = toy::complex();
        let ex = TrainingExample::new(sys.clone(), x.clone()).unwrap();
        let blend = Blend { truth: x.clone() };
        let cfg = ConfidenceTrainConfig { adam: AdamConfig { lr: 3e-3, warmup_steps: 10, ..Default::default() }, ..Default::default() };
        let mut head = ConfidenceHead::for_system(ConfidenceConfig::default(), &sys);
        let mut opt = Adam::for_params(cfg.adam.clone(), head.params());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for it in 1..=300 {
            confidence_iteration(&blend, &mut head, &mut opt, &ex, &cfg, it, &mut rng).unwrap();
        }
        let (mut sampled, mut noised) = (0.0, 0.0);
        for seed in 0..5 {
            let out = sample_structure(&blend, &sys, &FlowConfig { seed, ..Default::default() }).unwrap();
            sampled += mean_plddt(&head, &ex, &out.conformation);
            let noise = random_points(&mut rng, x.len(), 4.0);
            let y: Vec<Vec3> = x.iter().zip(&noise).map(|(a, b)| a + b).collect();
            noised += mean_plddt(&head, &ex, &y);
        }
        assert!(sampled > noised + 0.5, "{sampled} vs {noised}");
    }
}
