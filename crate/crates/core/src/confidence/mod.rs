//! Confidence heads and sample ranking: binned pLDDT and pair distance
//! error heads, their training targets and loss, pDockQ, clash and
//! chirality checks, and the ranking score built from them.

mod bins;
mod head;
mod ranking;
mod targets;
mod train;

pub use bins::{cross_entropy_with_grad, expected_value, Bins};
pub use head::{load_confidence_head, save_confidence_head, ConfidenceConfig, ConfidenceHead, ConfidenceOutput};
pub use ranking::{
    chirality_check, clash_check, interface_pairs, pdockq, rank_samples, Candidate, RankedSample, RankingScore,
    RankingSubject, CLASH_CUTOFF, INTERFACE_CUTOFF,
};
pub use targets::{confidence_loss, confidence_targets, ConfidenceLoss, ConfidenceLossValue, ConfidenceTargets};
pub use train::{
    confidence_iteration, confidence_train_loop, ConfidenceIterationReport, ConfidenceTrainConfig,
};
