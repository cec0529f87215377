//! Continual backpropagation: replace mature low-utility hidden units at a
//! fixed rate.

use rand::Rng;

use super::units::{mean_abs_columns, reset_unit};
use crate::error::{Error, Result};
use crate::nn::{ForwardCache, Network};
use crate::optim::Optimizer;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CbpConfig {
    /// Replacement rate, in units per eligible unit per update.
    pub replacement_rate: f64,
    /// Units must be strictly older than this many updates to be replaced.
    pub maturity_threshold: u64,
}

impl CbpConfig {
    /// Large-network setting: rr = 10⁻⁴, mt = 500.
    pub fn tuned_large() -> Self {
        Self {
            replacement_rate: 1e-4,
            maturity_threshold: 500,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.replacement_rate) {
            return Err(Error::Config(format!(
                "cbp replacement rate must be in [0,1], got {}",
                self.replacement_rate
            )));
        }
        if self.maturity_threshold == 0 {
            return Err(Error::Config("cbp maturity threshold must be a positive integer".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CbpState {
    /// Updates since each hidden unit was (re)initialized.
    pub ages: Vec<Vec<u64>>,
    /// Fractional replacements carried over, one per hidden layer.
    pub accumulators: Vec<f64>,
}

impl CbpState {
    pub fn new(net: &Network) -> Self {
        Self {
            ages: net.hidden_widths().iter().map(|&w| vec![0; w]).collect(),
            accumulators: vec![0.0; net.num_hidden()],
        }
    }
}

/// Contribution utility of each unit in hidden layer `layer`: mean over the
/// batch of `|y_i|` times the summed magnitude of its outgoing weights, where
/// `y` is what the next layer consumes.
pub fn contribution_utility(net: &Network, cache: &ForwardCache, layer: usize) -> Vec<f64> {
    let activity = mean_abs_columns(cache.hidden[layer].output());
    let next = &net.dense(layer + 1).weights;
    activity
        .iter()
        .enumerate()
        .map(|(i, a)| a * (0..next.rows()).map(|o| next.get(o, i).abs()).sum::<f64>())
        .collect()
}

/// Ages every hidden unit by one update and replaces mature units as the
/// per-layer accumulators allow. Returns the number of replaced units.
pub fn cbp_step<R: Rng + ?Sized>(
    net: &mut Network,
    cache: &ForwardCache,
    cfg: &CbpConfig,
    state: &mut CbpState,
    optimizer: &mut Optimizer,
    rng: &mut R,
) -> Result<usize> {
    let mut replaced = 0;
    for layer in 0..net.num_hidden() {
        let ages = &mut state.ages[layer];
        ages.iter_mut().for_each(|a| *a += 1);
        let eligible = ages.iter().filter(|&&a| a > cfg.maturity_threshold).count();
        state.accumulators[layer] += cfg.replacement_rate * eligible as f64;
        if state.accumulators[layer] < 1.0 {
            continue;
        }
        let utility = contribution_utility(net, cache, layer);
        while state.accumulators[layer] >= 1.0 {
            let ages = &state.ages[layer];
            let candidate = (0..ages.len())
                .filter(|&i| ages[i] > cfg.maturity_threshold)
                .min_by(|&a, &b| utility[a].total_cmp(&utility[b]).then(a.cmp(&b)));
            let Some(unit) = candidate else {
                state.accumulators[layer] = state.accumulators[layer].fract();
                break;
            };
            reset_unit(net, layer, unit, optimizer, rng)?;
            state.ages[layer][unit] = 0;
            state.accumulators[layer] -= 1.0;
            replaced += 1;
        }
    }
    Ok(replaced)
}
