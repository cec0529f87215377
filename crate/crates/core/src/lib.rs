//! Plasticity-preserving interventions for continually trained dense networks.
//!
//! The crate bundles a small dense-network engine ([`nn`]), the optimizers
//! ([`optim`]), selective weight reinitialization together with continual
//! backpropagation, ReDo and shrink-and-perturb ([`reinit`]), MNIST IDX
//! loading ([`data`]), the permuted-MNIST training loop ([`continual`]), the
//! plasticity correlates ([`metrics`]), and configuration, sweeps, CSV and SVG
//! output ([`runner`]).
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod continual;
pub mod data;
pub mod error;
pub mod init;
pub mod metrics;
pub mod nn;
pub mod optim;
pub mod reinit;
pub mod rng;
pub mod runner;
pub mod tensor;

pub use error::{Error, Result};
pub use init::InitSpec;
pub use nn::{Architecture, LayerNormMode, Network};
pub use tensor::Matrix;
