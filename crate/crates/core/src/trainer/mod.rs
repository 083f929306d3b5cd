//! Skip-gram training with negative sampling (NEG) or noise contrastive
//! estimation (NCE).

mod loss;
mod model;
mod sampler;
mod sgd;

pub use loss::{
    log_sigmoid, nce_loss_and_grads, neg_loss_and_grads, sigmoid, softmax_distribution, softmax_probability,
    PairGradients,
};
pub use model::{init_model, Checkpoint, ModelState};
pub use sampler::NoiseSampler;
pub use sgd::{learning_rate_at, train, train_with, EpochMetrics, TrainOutput};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Negative sampling: logistic loss on raw scores.
    Neg,
    /// Noise contrastive estimation: scores corrected by `log(k * q(w))`.
    Nce,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Neg => "neg",
            LossKind::Nce => "nce",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "neg" => Ok(LossKind::Neg),
            "nce" => Ok(LossKind::Nce),
            _ => Err(Error::config("loss", format!("expected \"neg\" or \"nce\", got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    pub embedding_size: usize,
    pub negative_samples: usize,
    pub max_context: u32,
    pub subsample_threshold: f64,
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub loss: LossKind,
    pub noise_power: f64,
    pub seed: u64,
    pub workers: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            embedding_size: 200,
            negative_samples: 25,
            max_context: 5,
            subsample_threshold: 1e-3,
            epochs: 5,
            lr_start: 0.025,
            lr_end: 0.001,
            loss: LossKind::Neg,
            noise_power: 0.75,
            seed: 1,
            workers: 1,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embedding_size == 0 {
            return Err(Error::config("embedding_size", "must be >= 1"));
        }
        if self.negative_samples == 0 {
            return Err(Error::config("negative_samples", "must be >= 1"));
        }
        if self.max_context == 0 {
            return Err(Error::config("max_context", "must be >= 1"));
        }
        if !(self.subsample_threshold > 0.0) {
            return Err(Error::config("subsample_threshold", "must be > 0"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs", "must be >= 1"));
        }
        if !(self.lr_end > 0.0) {
            return Err(Error::config("lr_end", "must be > 0"));
        }
        if !(self.lr_start > self.lr_end) {
            return Err(Error::config("lr_start", "must exceed lr_end"));
        }
        if !self.noise_power.is_finite() {
            return Err(Error::config("noise_power", "must be finite"));
        }
        if self.workers == 0 {
            return Err(Error::config("workers", "must be >= 1"));
        }
        Ok(())
    }
}
