use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::nn::Network;

/// Gaussian parameter noise. The shrink half comes from the optimizer's
/// `l2_lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShrinkPerturbConfig {
    /// Noise variance σ².
    pub sigma2: f64,
}

impl ShrinkPerturbConfig {
    /// Large-network setting: σ² = 10⁻⁷.
    pub fn tuned_large() -> Self {
        Self { sigma2: 1e-7 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(Error::Config(format!("sigma2 must be >= 0, got {}", self.sigma2)));
        }
        Ok(())
    }
}

/// Adds i.i.d. `N(0, σ²)` noise to every parameter.
pub fn shrink_perturb_step<R: Rng + ?Sized>(net: &mut Network, cfg: &ShrinkPerturbConfig, rng: &mut R) {
    if cfg.sigma2 == 0.0 {
        return;
    }
    let noise = Normal::new(0.0, cfg.sigma2.sqrt()).expect("validated variance");
    for p in net.params_mut() {
        for v in p.values.iter_mut() {
            *v += noise.sample(rng);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Architecture, LayerNormMode};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_variance_is_identity() {
        let mut net = Network::new(&Architecture::new(vec![3, 4, 2], LayerNormMode::None), 0).unwrap();
        let before = net.clone();
        shrink_perturb_step(&mut net, &ShrinkPerturbConfig { sigma2: 0.0 }, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(net, before);
    }

    #[test]
    fn tuned_value() {
        assert_eq!(ShrinkPerturbConfig::tuned_large().sigma2, 1e-7);
        assert!(ShrinkPerturbConfig { sigma2: -1.0 }.validate().is_err());
    }
}
