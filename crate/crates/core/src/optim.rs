//! Parameter-update rules and their per-element state.

use crate::error::{shape_err, Error, Result};
use crate::nn::{Gradients, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OptimizerKind {
    #[default]
    Sgd,
    SgdwMomentum,
    AdamW,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimConfig {
    pub kind: OptimizerKind,
    /// Step size.
    pub alpha: f64,
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    /// Weight-decay / L2 factor; the per-step shrink is `1 - alpha * l2_lambda`.
    pub l2_lambda: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            alpha: 0.05,
            momentum: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            l2_lambda: 0.0,
        }
    }
}

impl OptimConfig {
    pub fn sgd(alpha: f64) -> Self {
        Self {
            alpha,
            ..Self::default()
        }
    }

    pub fn sgdw_momentum(alpha: f64, momentum: f64) -> Self {
        Self {
            kind: OptimizerKind::SgdwMomentum,
            alpha,
            momentum,
            ..Self::default()
        }
    }

    pub fn adamw(alpha: f64, beta1: f64, beta2: f64) -> Self {
        Self {
            kind: OptimizerKind::AdamW,
            alpha,
            beta1,
            beta2,
            ..Self::default()
        }
    }

    pub fn with_l2(mut self, l2_lambda: f64) -> Self {
        self.l2_lambda = l2_lambda;
        self
    }

    /// Whether decay is applied outside the gradient term. For plain SGD the
    /// coupled and decoupled forms coincide.
    pub fn decoupled(&self) -> bool {
        !matches!(self.kind, OptimizerKind::Sgd)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..1.0).contains(&v);
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !unit(self.momentum) {
            return Err(Error::Config(format!("momentum must be in [0,1), got {}", self.momentum)));
        }
        if !unit(self.beta1) || !unit(self.beta2) {
            return Err(Error::Config("beta1 and beta2 must be in [0,1)".into()));
        }
        if !(self.adam_epsilon > 0.0) {
            return Err(Error::Config("adam_epsilon must be > 0".into()));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return Err(Error::Config(format!("l2_lambda must be >= 0, got {}", self.l2_lambda)));
        }
        Ok(())
    }
}

/// Momentum and moment buffers, one per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub momentum: Vec<Vec<f64>>,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, net: &Network) -> Self {
        let zeros = || -> Vec<Vec<f64>> {
            net.params().iter().map(|p| vec![0.0; p.values.len()]).collect()
        };
        let (momentum, first_moment, second_moment) = match kind {
            OptimizerKind::Sgd => (Vec::new(), Vec::new(), Vec::new()),
            OptimizerKind::SgdwMomentum => (zeros(), Vec::new(), Vec::new()),
            OptimizerKind::AdamW => (Vec::new(), zeros(), zeros()),
        };
        Self {
            kind,
            momentum,
            first_moment,
            second_moment,
            step: 0,
        }
    }

    fn buffers_mut(&mut self) -> impl Iterator<Item = &mut Vec<Vec<f64>>> {
        [&mut self.momentum, &mut self.first_moment, &mut self.second_moment].into_iter()
    }

    fn check(&self, kind: OptimizerKind, grads: &Gradients) -> Result<()> {
        if self.kind != kind {
            return Err(Error::State(format!("state is for {:?}, not {kind:?}", self.kind)));
        }
        let buffers: &[&Vec<Vec<f64>>] = match kind {
            OptimizerKind::Sgd => &[],
            OptimizerKind::SgdwMomentum => &[&self.momentum],
            OptimizerKind::AdamW => &[&self.first_moment, &self.second_moment],
        };
        for buf in buffers {
            if buf.is_empty() {
                return Err(Error::State("optimizer state is uninitialized".into()));
            }
            if buf.len() != grads.tensors.len()
                || buf.iter().zip(&grads.tensors).any(|(b, g)| b.len() != g.len())
            {
                return Err(shape_err("optimizer state does not mirror the gradients"));
            }
        }
        Ok(())
    }
}

/// Zeroes momentum and both moments at `indices` of tensor `tensor`.
pub fn reset_state_at(state: &mut OptimizerState, tensor: usize, indices: &[usize]) -> Result<()> {
    for buf in state.buffers_mut() {
        if buf.is_empty() {
            continue;
        }
        let t = buf
            .get_mut(tensor)
            .ok_or_else(|| Error::Input(format!("no parameter tensor {tensor}")))?;
        if let Some(&bad) = indices.iter().find(|&&i| i >= t.len()) {
            return Err(Error::Input(format!("index {bad} out of range for tensor {tensor} of length {}", t.len())));
        }
        for &i in indices {
            t[i] = 0.0;
        }
    }
    Ok(())
}

/// `θ ← (1 − αλ)θ − αg`
pub fn sgd_step(net: &mut Network, grads: &Gradients, cfg: &OptimConfig) -> Result<()> {
    grads.check_congruent(net)?;
    let shrink = 1.0 - cfg.alpha * cfg.l2_lambda;
    for (p, g) in net.params_mut().into_iter().zip(&grads.tensors) {
        for (w, g) in p.values.iter_mut().zip(g) {
            *w = shrink * *w - cfg.alpha * g;
        }
    }
    Ok(())
}

/// `v ← m·v + g; θ ← (1 − αλ)θ − α·v`
pub fn sgdw_momentum_step(
    net: &mut Network,
    grads: &Gradients,
    cfg: &OptimConfig,
    state: &mut OptimizerState,
) -> Result<()> {
    grads.check_congruent(net)?;
    state.check(OptimizerKind::SgdwMomentum, grads)?;
    let shrink = 1.0 - cfg.alpha * cfg.l2_lambda;
    for ((p, g), v) in net
        .params_mut()
        .into_iter()
        .zip(&grads.tensors)
        .zip(&mut state.momentum)
    {
        for ((w, g), v) in p.values.iter_mut().zip(g).zip(v.iter_mut()) {
            *v = cfg.momentum * *v + g;
            *w = shrink * *w - cfg.alpha * *v;
        }
    }
    state.step += 1;
    Ok(())
}

/// AdamW with bias correction and decoupled decay.
pub fn adamw_step(
    net: &mut Network,
    grads: &Gradients,
    cfg: &OptimConfig,
    state: &mut OptimizerState,
) -> Result<()> {
    grads.check_congruent(net)?;
    state.check(OptimizerKind::AdamW, grads)?;
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let shrink = 1.0 - cfg.alpha * cfg.l2_lambda;
    for (((p, g), m), v) in net
        .params_mut()
        .into_iter()
        .zip(&grads.tensors)
        .zip(&mut state.first_moment)
        .zip(&mut state.second_moment)
    {
        for (((w, g), m), v) in p.values.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *w = shrink * *w - cfg.alpha * m_hat / (v_hat.sqrt() + cfg.adam_epsilon);
        }
    }
    Ok(())
}

/// A configured optimizer together with its state.
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub config: OptimConfig,
    pub state: OptimizerState,
}

impl Optimizer {
    pub fn new(config: OptimConfig, net: &Network) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            state: OptimizerState::new(config.kind, net),
            config,
        })
    }

    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<()> {
        match self.config.kind {
            OptimizerKind::Sgd => {
                sgd_step(net, grads, &self.config)?;
                self.state.step += 1;
                Ok(())
            }
            OptimizerKind::SgdwMomentum => sgdw_momentum_step(net, grads, &self.config, &mut self.state),
            OptimizerKind::AdamW => adamw_step(net, grads, &self.config, &mut self.state),
        }
    }

    pub fn reset_at(&mut self, tensor: usize, indices: &[usize]) -> Result<()> {
        reset_state_at(&mut self.state, tensor, indices)
    }
}
