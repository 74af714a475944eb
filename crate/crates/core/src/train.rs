//! Training-loop settings shared by the detector and the hierarchizer.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Blocks per step for the detector, documents per step for the hierarchizer.
    pub batch_size: usize,
    pub epochs: usize,
    /// Epochs without held-out improvement before stopping.
    pub patience: usize,
    pub learning_rate: f64,
    /// Share of the training set held out for early stopping. No split is made
    /// when it would leave fewer than `min_validation` samples.
    pub validation_fraction: f64,
    pub min_validation: usize,
    /// Lower bound on optimizer steps; extends `epochs` for tiny training sets.
    pub min_steps: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            epochs: 30,
            patience: 5,
            learning_rate: 1e-3,
            validation_fraction: 0.1,
            min_validation: 2,
            min_steps: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config("validation_fraction must lie in [0, 1)".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }

    /// Epoch count for `n` training units, honouring `min_steps`.
    pub fn epochs_for(&self, n: usize) -> usize {
        let per_epoch = n.div_ceil(self.batch_size).max(1);
        self.epochs.max(self.min_steps.div_ceil(per_epoch))
    }

    /// Shuffles `0..n` and splits it into (train, held-out) index lists.
    pub fn split<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> (Vec<usize>, Vec<usize>) {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(rng);
        let held = (n as f64 * self.validation_fraction).round() as usize;
        if held < self.min_validation.max(1) || held >= n {
            return (idx, Vec::new());
        }
        let train = idx.split_off(held);
        (train, idx)
    }
}

/// Per-epoch losses of one training run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
    /// Epoch (0-based) whose weights were kept.
    pub best_epoch: usize,
}

/// Tracks the best held-out loss and decides when to stop.
#[derive(Debug)]
pub(crate) struct EarlyStopping {
    patience: usize,
    best: f64,
    since_best: usize,
}

impl EarlyStopping {
    pub(crate) fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            since_best: 0,
        }
    }

    /// Returns true when `loss` is a new best.
    pub(crate) fn observe(&mut self, loss: f64) -> bool {
        if loss < self.best {
            self.best = loss;
            self.since_best = 0;
            true
        } else {
            self.since_best += 1;
            false
        }
    }

    pub(crate) fn should_stop(&self) -> bool {
        self.patience > 0 && self.since_best >= self.patience
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn split_sizes() {
        let cfg = TrainConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (t, v) = cfg.split(100, &mut rng);
        assert_eq!((t.len(), v.len()), (90, 10));
        let (t, v) = cfg.split(5, &mut rng);
        assert_eq!((t.len(), v.len()), (5, 0));
    }

    #[test]
    fn early_stopping_counts_stale_epochs() {
        let mut es = EarlyStopping::new(2);
        assert!(es.observe(1.0));
        assert!(!es.observe(1.5));
        assert!(!es.should_stop());
        assert!(!es.observe(1.0));
        assert!(es.should_stop());
    }
}
