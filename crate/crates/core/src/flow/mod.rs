//! Conditional flow matching: the straight-line sampler, the training
//! iteration with its loss stack, a small trainable toy denoiser and
//! compute-budget bookkeeping.

mod budget;
mod checkpoint;
mod denoiser;
mod features;
mod loss;
pub(crate) mod nn;
mod sampler;
pub mod toy;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::prior::PriorParams;

pub use budget::{compute_budget, BudgetReport};
pub(crate) use checkpoint::{read_container, write_container};
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use denoiser::{Conditioning, Denoiser, OracleDenoiser, ToyDenoiser, ToyDenoiserConfig};
pub use features::label_frame;
pub use loss::{loss_weight, pseudo_huber_with_grad, training_loss, LossBreakdown, LossContext};
pub use sampler::{sample_structure, SampleOutput};
pub use train::{
    freeze_replica, frozen_loss, noisy_input, replicated_gradient, train_replicated, train_round_robin, train_step, Adam, AdamConfig,
    FrozenTarget, ReplicaDraw, StepReport, TrainingExample,
};

pub const DEFAULT_SHIFT_EXPONENT: f64 = 1.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowConfig {
    /// Integrator steps.
    pub steps: usize,
    pub shift_exponent: f64,
    pub seed: u64,
    pub prior: PriorParams,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            steps: 40,
            shift_exponent: DEFAULT_SHIFT_EXPONENT,
            seed: 0,
            prior: PriorParams::default(),
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidParameter("steps must be >= 1".into()));
        }
        if !(self.shift_exponent > 0.0) {
            return Err(Error::InvalidParameter("shift_exponent must be > 0".into()));
        }
        self.prior.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub sigma_data: f64,
    pub epsilon: f64,
    /// Weight of the (1 − smooth LDDT) term.
    pub w_lddt: f64,
    pub w_fape: f64,
    /// Decoder replicas per iteration.
    pub replicas: usize,
    /// Pseudo-Huber scale in Å.
    pub huber_c: f64,
    pub shift_exponent: f64,
    pub prior: PriorParams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            sigma_data: 16.0,
            epsilon: 0.01,
            w_lddt: 1.0,
            w_fape: 0.1,
            replicas: 1,
            huber_c: 1.0,
            shift_exponent: DEFAULT_SHIFT_EXPONENT,
            prior: PriorParams::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if !(self.sigma_data > 0.0) {
            return bad("sigma_data must be > 0");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be > 0");
        }
        if self.replicas == 0 {
            return bad("replicas must be >= 1");
        }
        if !(self.huber_c > 0.0) {
            return bad("huber_c must be > 0");
        }
        if !(self.w_lddt >= 0.0 && self.w_fape >= 0.0) {
            return bad("loss weights must be >= 0");
        }
        self.prior.validate()
    }
}

/// One Euler step along the straight conditional path:
/// `t_next·x1 + (1 − t_next)·(x_t − t·x1)/(1 − t)`.
pub fn cfm_sample_step(x1_pred: &[Vec3], x_t: &[Vec3], t: f64, t_next: f64) -> Result<Vec<Vec3>> {
    if t >= 1.0 {
        return Err(Error::StepPastTerminal(t));
    }
    if !(0.0..=1.0).contains(&t) || !(t < t_next && t_next <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 <= t < t_next <= 1, got t={t}, t_next={t_next}"
        )));
    }
    if x1_pred.len() != x_t.len() {
        return Err(Error::ShapeMismatch {
            expected: x_t.len(),
            got: x1_pred.len(),
        });
    }
    let a = (1.0 - t_next) / (1.0 - t);
    Ok(x1_pred
        .iter()
        .zip(x_t)
        .map(|(x1, xt)| x1 * t_next + (xt - x1 * t) * a)
        .collect())
}

/// `t^exponent`; the default exponent is 1.15.
pub fn shift_timestep(t: f64, exponent: f64) -> f64 {
    t.powf(exponent)
}
