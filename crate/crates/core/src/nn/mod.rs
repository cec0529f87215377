//! Dense ReLU network with optional layer normalization and hand-derived
//! backpropagation.

mod layer;
mod loss;
mod network;
mod norm;

pub use layer::DenseLayer;
pub use loss::{accuracy, cross_entropy, one_hot, softmax_rows};
pub use network::{
    Architecture, ForwardCache, Gradients, HiddenCache, HiddenStage, LayerNormMode, LossAndGrad,
    Network, ParamId, ParamKind, ParamMut, ParamRef,
};
pub use norm::{LayerNormStage, NormCache, LN_EPSILON};
