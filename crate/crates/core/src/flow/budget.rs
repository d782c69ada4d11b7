use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Training compute accounting for encoder cost α, decoder cost β, decoder
/// replicas P and iteration count D.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub alpha: f64,
    pub beta: f64,
    pub replicas: f64,
    pub iterations: f64,
    /// `(α·β·P)·D`, taken literally. Not a FLOP count dimensionally.
    pub literal_product: f64,
    /// `(α + β·P)·D`: one encoder pass plus P decoder passes per iteration.
    pub additive: f64,
    pub encoder_decoder_ratio: f64,
}

pub fn compute_budget(alpha: f64, beta: f64, replicas: f64, iterations: f64) -> Result<BudgetReport> {
    for (name, v) in [("alpha", alpha), ("beta", beta), ("replicas", replicas), ("iterations", iterations)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{name} must be positive and finite")));
        }
    }
    Ok(BudgetReport {
        alpha,
        beta,
        replicas,
        iterations,
        literal_product: alpha * beta * replicas * iterations,
        additive: (alpha + beta * replicas) * iterations,
        encoder_decoder_ratio: alpha / beta,
    })
}
