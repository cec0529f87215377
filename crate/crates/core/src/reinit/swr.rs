//! Selective weight reinitialization.

use rand::Rng;

use super::{compute_utility, prune_indices, reinit_values, validate_factor};
use super::{PruningKind, ReinitMethod, UtilityKind};
use crate::error::{Error, Result};
use crate::nn::{Gradients, Network, ParamId, ParamKind};
use crate::optim::Optimizer;

/// Which parameter tensors selective reinitialization may touch.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum SwrScope {
    /// Every weight matrix, bias vector and layer-norm parameter.
    #[default]
    All,
    /// Weight matrices only.
    Weights,
    Tensors(Vec<ParamId>),
}

impl SwrScope {
    pub fn contains(&self, id: &ParamId) -> bool {
        match self {
            SwrScope::All => true,
            SwrScope::Weights => id.kind == ParamKind::Weight,
            SwrScope::Tensors(ids) => ids.contains(id),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwrConfig {
    /// Reinitialize after every `tau`-th update.
    pub tau: u64,
    pub k: f64,
    pub utility: UtilityKind,
    pub pruning: PruningKind,
    pub reinit: ReinitMethod,
    pub scope: SwrScope,
}

impl SwrConfig {
    /// Gradient utility, threshold pruning, resample reinitialization.
    pub fn gradient_threshold_resample(tau: u64, k: f64) -> Self {
        Self {
            tau,
            k,
            utility: UtilityKind::Gradient,
            pruning: PruningKind::Threshold,
            reinit: ReinitMethod::Resample,
            scope: SwrScope::All,
        }
    }

    /// Best large-network variant of the initial assessment: τ = 2¹¹, k = 10⁻⁵.
    pub fn tuned_large() -> Self {
        Self::gradient_threshold_resample(1 << 11, 1e-5)
    }

    /// Small-network setting: τ = 2¹¹, k = 10⁻⁶.
    pub fn tuned_small() -> Self {
        Self::gradient_threshold_resample(1 << 11, 1e-6)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau == 0 {
            return Err(Error::Config("swr tau must be a positive integer".into()));
        }
        validate_factor(self.k, self.pruning)
    }

    pub fn triggers_at(&self, step: u64) -> bool {
        (step + 1).is_multiple_of(self.tau)
    }
}

/// Runs one reinitialization round if `step` triggers it and returns the
/// number of reinitialized entries. `grads` must be the gradients of the
/// update that just happened.
pub fn swr_step<R: Rng + ?Sized>(
    net: &mut Network,
    grads: &Gradients,
    cfg: &SwrConfig,
    optimizer: &mut Optimizer,
    step: u64,
    rng: &mut R,
) -> Result<usize> {
    if !cfg.triggers_at(step) {
        return Ok(0);
    }
    grads.check_congruent(net)?;
    let mut total = 0;
    let mut touched = Vec::new();
    for (tensor, (param, g)) in net.params_mut().into_iter().zip(&grads.tensors).enumerate() {
        if !cfg.scope.contains(&param.id) || param.values.is_empty() {
            continue;
        }
        let utilities = compute_utility(param.values, g, cfg.utility)?;
        let indices = prune_indices(&utilities, cfg.k, cfg.pruning, rng)?;
        let fresh = reinit_values(indices.len(), &param.init, cfg.reinit, rng);
        for (&i, v) in indices.iter().zip(fresh) {
            param.values[i] = v;
        }
        total += indices.len();
        touched.push((tensor, indices));
    }
    for (tensor, indices) in touched {
        optimizer.reset_at(tensor, &indices)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Architecture, LayerNormMode};
    use crate::optim::OptimConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (Network, Gradients, Optimizer) {
        let net = Network::new(&Architecture::new(vec![6, 5, 5, 3], LayerNormMode::Standard), 3).unwrap();
        let grads = Gradients {
            tensors: net
                .params()
                .iter()
                .map(|p| (0..p.values.len()).map(|i| (i as f64 * 0.37).sin()).collect())
                .collect(),
        };
        let opt = Optimizer::new(OptimConfig::adamw(1e-3, 0.9, 0.999), &net).unwrap();
        (net, grads, opt)
    }

    #[test]
    fn tuned_values() {
        let c = SwrConfig::tuned_large();
        assert_eq!(c.tau, 2048);
        assert_eq!(c.k, 1e-5);
        assert_eq!(c.utility, UtilityKind::Gradient);
        assert_eq!(c.pruning, PruningKind::Threshold);
        assert_eq!(c.reinit, ReinitMethod::Resample);
    }

    #[test]
    fn off_trigger_is_a_no_op() {
        let (mut net, grads, mut opt) = setup();
        let before = net.clone();
        let cfg = SwrConfig::gradient_threshold_resample(4, 10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for step in [0, 1, 2, 4, 5, 6] {
            assert_eq!(swr_step(&mut net, &grads, &cfg, &mut opt, step, &mut rng).unwrap(), 0);
        }
        assert_eq!(net, before);
        assert!(swr_step(&mut net, &grads, &cfg, &mut opt, 3, &mut rng).unwrap() > 0);
        assert_ne!(net, before);
    }

    #[test]
    fn tiny_threshold_prunes_nothing() {
        let (mut net, _, mut opt) = setup();
        // magnitudes bounded away from zero
        for p in net.params_mut() {
            for (i, v) in p.values.iter_mut().enumerate() {
                *v = 1.0 + (i % 3) as f64;
            }
        }
        let grads = Gradients::zeros_like(&net);
        let before = net.clone();
        let mut cfg = SwrConfig::gradient_threshold_resample(1, 1e-3);
        cfg.utility = UtilityKind::Magnitude;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(swr_step(&mut net, &grads, &cfg, &mut opt, 0, &mut rng).unwrap(), 0);
        assert_eq!(net, before);
    }

    #[test]
    fn shapes_survive_and_state_is_cleared() {
        let (mut net, grads, mut opt) = setup();
        opt.step(&mut net, &grads).unwrap();
        let count = net.param_count();
        let mut cfg = SwrConfig::gradient_threshold_resample(1, 0.5);
        cfg.pruning = PruningKind::Proportional;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let before = net.clone();
        let n = swr_step(&mut net, &grads, &cfg, &mut opt, 0, &mut rng).unwrap();
        assert!(n > 0);
        assert_eq!(net.param_count(), count);
        for (t, (a, b)) in before.params().iter().zip(net.params()).enumerate() {
            for (i, (x, y)) in a.values.iter().zip(b.values).enumerate() {
                if x != y {
                    assert_eq!(opt.state.first_moment[t][i], 0.0);
                    assert_eq!(opt.state.second_moment[t][i], 0.0);
                }
            }
        }
    }

    #[test]
    fn scope_limits_tensors() {
        let (mut net, grads, mut opt) = setup();
        let before = net.clone();
        let mut cfg = SwrConfig::gradient_threshold_resample(1, 0.9);
        cfg.pruning = PruningKind::Proportional;
        cfg.scope = SwrScope::Weights;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        swr_step(&mut net, &grads, &cfg, &mut opt, 0, &mut rng).unwrap();
        for (a, b) in before.params().iter().zip(net.params()) {
            if a.id.kind != ParamKind::Weight {
                assert_eq!(a.values, b.values, "{} changed", a.id);
            }
        }
    }
}
