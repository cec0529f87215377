//! Initialization distributions attached to every parameter tensor.
//!
//! The same record drives both the initial draw and any later
//! reinitialization, so resampled values always come from the distribution
//! the tensor started with.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitSpec {
    /// Uniform on `[-bound, bound]`.
    UniformSymmetric { bound: f64 },
    Normal { mean: f64, std: f64 },
    Constant { value: f64 },
}

impl InitSpec {
    /// Kaiming-uniform for a ReLU layer with the given fan-in.
    pub fn kaiming_uniform(fan_in: usize) -> Self {
        InitSpec::UniformSymmetric {
            bound: (6.0 / fan_in as f64).sqrt(),
        }
    }

    pub fn zeros() -> Self {
        InitSpec::Constant { value: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            InitSpec::UniformSymmetric { bound } if !(bound > 0.0 && bound.is_finite()) => {
                Err(Error::Config(format!("uniform bound must be positive, got {bound}")))
            }
            InitSpec::Normal { mean, std } if !(std >= 0.0 && std.is_finite() && mean.is_finite()) => {
                Err(Error::Config(format!("normal std must be >= 0, got {std}")))
            }
            InitSpec::Constant { value } if !value.is_finite() => {
                Err(Error::Config("constant init must be finite".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            InitSpec::UniformSymmetric { .. } => 0.0,
            InitSpec::Normal { mean, .. } => mean,
            InitSpec::Constant { value } => value,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            InitSpec::UniformSymmetric { bound } => bound * bound / 3.0,
            InitSpec::Normal { std, .. } => std * std,
            InitSpec::Constant { .. } => 0.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            InitSpec::UniformSymmetric { bound } => rng.random_range(-bound..=bound),
            InitSpec::Normal { mean, std } => {
                if std == 0.0 {
                    mean
                } else {
                    // validated: std is finite and positive
                    Normal::new(mean, std).expect("valid normal").sample(rng)
                }
            }
            InitSpec::Constant { value } => value,
        }
    }

    pub fn fill<R: Rng + ?Sized>(&self, out: &mut [f64], rng: &mut R) {
        for v in out {
            *v = self.sample(rng);
        }
    }
}
