//! Plasticity-preserving interventions applied after each optimizer update.
//!
//! Selective weight reinitialization works on individual weights: every
//! `tau` updates it scores each entry of each parameter tensor, prunes the
//! low-utility ones and redraws them from the tensor's [`InitSpec`]. The
//! unit-level methods ([`cbp`], [`redo`]) reset whole hidden ReLU units, and
//! [`shrink_perturb`] adds Gaussian noise on top of the optimizer's L2 shrink.

pub mod cbp;
pub mod redo;
pub mod shrink_perturb;
pub mod swr;
mod units;

use rand::Rng;

use crate::error::{Error, Result};
use crate::init::InitSpec;
use crate::nn::{ForwardCache, Gradients, Network};
use crate::optim::Optimizer;

pub use cbp::{cbp_step, CbpConfig, CbpState};
pub use redo::{redo_step, RedoConfig};
pub use shrink_perturb::{shrink_perturb_step, ShrinkPerturbConfig};
pub use swr::{swr_step, SwrConfig, SwrScope};
pub use units::reset_unit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UtilityKind {
    /// `|w|`
    Magnitude,
    /// `|w · ∂L/∂w|`
    Gradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PruningKind {
    /// Lowest `k·d` entries in expectation.
    Proportional,
    /// Every entry with utility `<= k · mean(utility)`.
    Threshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReinitMethod {
    Resample,
    Mean,
}

pub fn compute_utility(weights: &[f64], grads: &[f64], kind: UtilityKind) -> Result<Vec<f64>> {
    match kind {
        UtilityKind::Magnitude => Ok(weights.iter().map(|w| w.abs()).collect()),
        UtilityKind::Gradient => {
            if weights.len() != grads.len() {
                return Err(Error::Shape(format!(
                    "{} weights but {} gradients",
                    weights.len(),
                    grads.len()
                )));
            }
            Ok(weights.iter().zip(grads).map(|(w, g)| (w * g).abs()).collect())
        }
    }
}

pub fn validate_factor(k: f64, mode: PruningKind) -> Result<()> {
    let ok = match mode {
        PruningKind::Proportional => k > 0.0 && k < 1.0,
        PruningKind::Threshold => k > 0.0 && k.is_finite(),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!("reinitialization factor {k} is invalid for {mode:?} pruning")))
    }
}

/// Indices of the entries to prune.
///
/// Proportional pruning returns the `⌊k·d⌋ + Bernoulli(frac(k·d))` lowest
/// utilities (stable ascending sort, so ties go to the lower index), in
/// utility order. Threshold pruning returns `{ i : u_i <= k·mean(u) }` in
/// index order.
pub fn prune_indices<R: Rng + ?Sized>(
    utilities: &[f64],
    k: f64,
    mode: PruningKind,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if utilities.is_empty() {
        return Err(Error::Input("cannot prune an empty utility vector".into()));
    }
    validate_factor(k, mode)?;
    match mode {
        PruningKind::Proportional => {
            let target = k * utilities.len() as f64;
            let whole = target.floor();
            let frac = target - whole;
            let mut count = whole as usize;
            if frac > 0.0 && rng.random_bool(frac) {
                count += 1;
            }
            let mut order: Vec<usize> = (0..utilities.len()).collect();
            order.sort_by(|&a, &b| utilities[a].total_cmp(&utilities[b]));
            order.truncate(count);
            Ok(order)
        }
        PruningKind::Threshold => {
            let mean = utilities.iter().sum::<f64>() / utilities.len() as f64;
            let threshold = k * mean;
            Ok(utilities
                .iter()
                .enumerate()
                .filter(|(_, &u)| u <= threshold)
                .map(|(i, _)| i)
                .collect())
        }
    }
}

pub fn reinit_values<R: Rng + ?Sized>(
    count: usize,
    spec: &InitSpec,
    method: ReinitMethod,
    rng: &mut R,
) -> Vec<f64> {
    match method {
        ReinitMethod::Resample => (0..count).map(|_| spec.sample(rng)).collect(),
        ReinitMethod::Mean => vec![spec.mean(); count],
    }
}

/// The six learning systems compared on permuted MNIST.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Algorithm {
    #[default]
    Base,
    L2,
    ShrinkPerturb(ShrinkPerturbConfig),
    Cbp(CbpConfig),
    Redo(RedoConfig),
    Swr(SwrConfig),
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Base => "base",
            Algorithm::L2 => "l2",
            Algorithm::ShrinkPerturb(_) => "shrink_perturb",
            Algorithm::Cbp(_) => "cbp",
            Algorithm::Redo(_) => "redo",
            Algorithm::Swr(_) => "swr",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Algorithm::Base | Algorithm::L2 => Ok(()),
            Algorithm::ShrinkPerturb(c) => c.validate(),
            Algorithm::Cbp(c) => c.validate(),
            Algorithm::Redo(c) => c.validate(),
            Algorithm::Swr(c) => c.validate(),
        }
    }
}

/// Everything an intervention may read or modify after one update.
pub struct UpdateContext<'a, R: Rng + ?Sized> {
    pub net: &'a mut Network,
    pub grads: &'a Gradients,
    pub cache: &'a ForwardCache,
    pub optimizer: &'a mut Optimizer,
    /// Zero-based index of the update that just happened.
    pub step: u64,
    pub rng: &'a mut R,
}

/// Stateful hook run after every optimizer update.
#[derive(Debug, Clone)]
pub enum Intervention {
    None,
    ShrinkPerturb(ShrinkPerturbConfig),
    Cbp(CbpConfig, CbpState),
    Redo(RedoConfig),
    Swr(SwrConfig),
}

impl Intervention {
    pub fn new(algorithm: &Algorithm, net: &Network) -> Result<Self> {
        algorithm.validate()?;
        Ok(match algorithm {
            Algorithm::Base | Algorithm::L2 => Intervention::None,
            Algorithm::ShrinkPerturb(c) => Intervention::ShrinkPerturb(*c),
            Algorithm::Cbp(c) => Intervention::Cbp(*c, CbpState::new(net)),
            Algorithm::Redo(c) => Intervention::Redo(*c),
            Algorithm::Swr(c) => Intervention::Swr(c.clone()),
        })
    }

    /// Returns how many weights (SWR) or units (CBP, ReDo) were reinitialized.
    pub fn after_update<R: Rng + ?Sized>(&mut self, ctx: UpdateContext<'_, R>) -> Result<usize> {
        match self {
            Intervention::None => Ok(0),
            Intervention::ShrinkPerturb(c) => {
                shrink_perturb_step(ctx.net, c, ctx.rng);
                Ok(0)
            }
            Intervention::Cbp(c, state) => {
                cbp_step(ctx.net, ctx.cache, c, state, ctx.optimizer, ctx.rng)
            }
            Intervention::Redo(c) => {
                redo_step(ctx.net, ctx.cache, c, ctx.optimizer, ctx.step, ctx.rng)
            }
            Intervention::Swr(c) => {
                swr_step(ctx.net, ctx.grads, c, ctx.optimizer, ctx.step, ctx.rng)
            }
        }
    }
}
