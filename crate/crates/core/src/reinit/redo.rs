//! ReDo: periodically reset hidden units whose normalized activity is at or
//! below a threshold.

use rand::Rng;

use super::units::{mean_abs_columns, reset_unit};
use crate::error::{Error, Result};
use crate::nn::{ForwardCache, Network};
use crate::optim::Optimizer;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RedoConfig {
    /// Run after every `frequency`-th update.
    pub frequency: u64,
    pub threshold: f64,
}

impl RedoConfig {
    /// Large-network setting: rf = 2⁴, rt = 10⁻⁴.
    pub fn tuned_large() -> Self {
        Self {
            frequency: 1 << 4,
            threshold: 1e-4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frequency == 0 {
            return Err(Error::Config("redo frequency must be a positive integer".into()));
        }
        if !(self.threshold >= 0.0 && self.threshold.is_finite()) {
            return Err(Error::Config(format!("redo threshold must be >= 0, got {}", self.threshold)));
        }
        Ok(())
    }
}

/// `s_i = a_i / mean_j a_j` with `a_i` the batch mean of `|h_i|` (ReLU
/// output). An all-zero layer scores every unit 0.
pub fn dormancy_scores(cache: &ForwardCache, layer: usize) -> Vec<f64> {
    let activity = mean_abs_columns(&cache.hidden[layer].activation);
    let mean = activity.iter().sum::<f64>() / activity.len().max(1) as f64;
    if mean == 0.0 {
        return vec![0.0; activity.len()];
    }
    activity.iter().map(|a| a / mean).collect()
}

pub fn redo_step<R: Rng + ?Sized>(
    net: &mut Network,
    cache: &ForwardCache,
    cfg: &RedoConfig,
    optimizer: &mut Optimizer,
    step: u64,
    rng: &mut R,
) -> Result<usize> {
    if !(step + 1).is_multiple_of(cfg.frequency) {
        return Ok(0);
    }
    let mut reset = 0;
    for layer in 0..net.num_hidden() {
        let scores = dormancy_scores(cache, layer);
        for (unit, s) in scores.iter().enumerate() {
            if *s <= cfg.threshold {
                reset_unit(net, layer, unit, optimizer, rng)?;
                reset += 1;
            }
        }
    }
    Ok(reset)
}
