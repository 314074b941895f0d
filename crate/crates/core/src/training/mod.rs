//! Mixup, the KL loss and the two training phases.

mod audit;
mod loss;
mod mixup;
mod phase1;
mod phase2;

use std::fmt::Write as _;
use std::path::Path;

pub use audit::finite_difference_audit;
pub use loss::{kl_loss, LossConfig};
pub use mixup::{mixup_batch, mixup_samples, mixup_with, Mixable, MixupConfig};
pub use phase1::{backbone_loss_and_grad, train_phase1, Phase1Config};
pub use phase2::{backbone_digest, fusion_loss_and_grad, train_phase2, Phase2Config};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    I,
    II,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

/// One training run and its per-epoch history. Loss is the mean batch loss;
/// accuracy is the share of training samples whose prediction matches the
/// argmax of their (possibly mixed) target.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRun {
    pub phase: Phase,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub history: Vec<EpochRecord>,
}

impl TrainRun {
    pub fn final_accuracy(&self) -> Option<f64> {
        self.history.last().map(|r| r.accuracy)
    }

    pub fn to_log(&self) -> String {
        let mut s = String::from("epoch\tloss\taccuracy\n");
        for r in &self.history {
            let _ = writeln!(s, "{}\t{:.10}\t{:.6}", r.epoch, r.loss, r.accuracy);
        }
        s
    }

    pub fn write_log(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_log()).map_err(|e| Error::file(path, e))
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn check_batch_size(batch_size: usize) -> Result<()> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    Ok(())
}
