use super::layer::DenseLayer;
use super::loss::{check_one_hot, cross_entropy_from_logits, softmax_rows};
use super::norm::{LayerNormStage, NormCache};
use crate::error::{shape_err, Error, Result};
use crate::init::InitSpec;
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LayerNormMode {
    #[default]
    None,
    Standard,
    Reparameterized,
}

/// Layer widths `[input, hidden..., output]` plus the normalization mode
/// applied after every hidden ReLU.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub widths: Vec<usize>,
    pub layer_norm: LayerNormMode,
}

impl Architecture {
    pub fn new(widths: Vec<usize>, layer_norm: LayerNormMode) -> Self {
        Self { widths, layer_norm }
    }

    /// Three hidden layers of 100 units.
    pub fn large_mnist() -> Self {
        Self::new(vec![784, 100, 100, 100, 10], LayerNormMode::None)
    }

    /// Three hidden layers of 10 units.
    pub fn small_mnist() -> Self {
        Self::new(vec![784, 10, 10, 10, 10], LayerNormMode::None)
    }

    pub fn with_layer_norm(mut self, mode: LayerNormMode) -> Self {
        self.layer_norm = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(Error::Config(
                "architecture needs at least an input and an output width".into(),
            ));
        }
        if let Some(i) = self.widths.iter().position(|&w| w == 0) {
            return Err(Error::Config(format!("width at position {i} must be >= 1")));
        }
        Ok(())
    }
}

/// A hidden dense layer followed by ReLU and, optionally, layer norm.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenStage {
    pub dense: DenseLayer,
    pub norm: Option<LayerNormStage>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamKind {
    Weight,
    Bias,
    Gamma,
    Beta,
}

/// Addresses one parameter tensor. `layer` counts hidden stages from 0; the
/// output layer has `layer == num_hidden()`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId {
    pub layer: usize,
    pub kind: ParamKind,
}

impl std::fmt::Display for ParamId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.kind {
            ParamKind::Weight => "weight",
            ParamKind::Bias => "bias",
            ParamKind::Gamma => "gamma",
            ParamKind::Beta => "beta",
        };
        write!(f, "layer{}.{kind}", self.layer)
    }
}

pub struct ParamRef<'a> {
    pub id: ParamId,
    pub values: &'a [f64],
    pub init: InitSpec,
}

pub struct ParamMut<'a> {
    pub id: ParamId,
    pub values: &'a mut [f64],
    pub init: InitSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    hidden: Vec<HiddenStage>,
    output: DenseLayer,
}

/// Intermediates of one hidden stage.
#[derive(Debug, Clone)]
pub struct HiddenCache {
    pub pre_activation: Matrix,
    /// ReLU output.
    pub activation: Matrix,
    pub norm: Option<(NormCache, Matrix)>,
}

impl HiddenCache {
    /// The matrix the next layer consumes.
    pub fn output(&self) -> &Matrix {
        match &self.norm {
            Some((_, y)) => y,
            None => &self.activation,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub input: Matrix,
    pub hidden: Vec<HiddenCache>,
    pub logits: Matrix,
    pub probabilities: Matrix,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.input.rows()
    }

    fn layer_input(&self, layer: usize) -> &Matrix {
        if layer == 0 {
            &self.input
        } else {
            self.hidden[layer - 1].output()
        }
    }

    /// Input of the output layer, i.e. the last hidden representation.
    pub fn last_hidden(&self) -> &Matrix {
        self.layer_input(self.hidden.len())
    }
}

/// One tensor per network parameter tensor, in [`Network::param_ids`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            tensors: net.params().iter().map(|p| vec![0.0; p.values.len()]).collect(),
        }
    }

    pub fn check_congruent(&self, net: &Network) -> Result<()> {
        let params = net.params();
        if params.len() != self.tensors.len() {
            return Err(shape_err(format!(
                "{} gradient tensors for {} parameter tensors",
                self.tensors.len(),
                params.len()
            )));
        }
        for (p, g) in params.iter().zip(&self.tensors) {
            if p.values.len() != g.len() {
                return Err(shape_err(format!(
                    "gradient for {} has {} entries, expected {}",
                    p.id,
                    g.len(),
                    p.values.len()
                )));
            }
        }
        Ok(())
    }

    /// Mean of `|g|` pooled over every entry of every tensor.
    pub fn mean_abs(&self) -> f64 {
        let (sum, n) = self
            .tensors
            .iter()
            .flatten()
            .fold((0.0, 0usize), |(s, n), g| (s + g.abs(), n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }
}

pub struct LossAndGrad {
    pub loss: f64,
    pub grads: Gradients,
    pub predictions: Matrix,
    pub cache: ForwardCache,
}

impl Network {
    /// Kaiming-uniform weights, zero biases, and layer-norm parameters at
    /// their identity values. Fully determined by `(arch, seed)`.
    pub fn new(arch: &Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = crate::rng::stream_rng(seed, crate::rng::Stream::Init, 0);
        let w = &arch.widths;
        let n_hidden = w.len() - 2;
        let mut hidden = Vec::with_capacity(n_hidden);
        for l in 0..n_hidden {
            let dense = DenseLayer::new(
                w[l],
                w[l + 1],
                InitSpec::kaiming_uniform(w[l]),
                InitSpec::zeros(),
                &mut rng,
            );
            let norm = match arch.layer_norm {
                LayerNormMode::None => None,
                LayerNormMode::Standard => Some(LayerNormStage::new(w[l + 1], false)),
                LayerNormMode::Reparameterized => Some(LayerNormStage::new(w[l + 1], true)),
            };
            hidden.push(HiddenStage { dense, norm });
        }
        let output = DenseLayer::new(
            w[n_hidden],
            w[n_hidden + 1],
            InitSpec::kaiming_uniform(w[n_hidden]),
            InitSpec::zeros(),
            &mut rng,
        );
        Ok(Self { hidden, output })
    }

    /// Assembles a network from explicit layers, checking that widths chain.
    pub fn from_parts(hidden: Vec<HiddenStage>, output: DenseLayer) -> Result<Self> {
        let mut width = None;
        for (i, stage) in hidden.iter().enumerate() {
            if let Some(w) = width {
                if stage.dense.fan_in() != w {
                    return Err(shape_err(format!("stage {i} expects {} inputs, got {w}", stage.dense.fan_in())));
                }
            }
            if stage.dense.bias.len() != stage.dense.fan_out() {
                return Err(shape_err(format!("stage {i} bias length mismatch")));
            }
            if let Some(norm) = &stage.norm {
                if norm.width() != stage.dense.fan_out() || norm.beta.len() != norm.width() {
                    return Err(shape_err(format!("stage {i} layer norm width mismatch")));
                }
                if !(norm.epsilon > 0.0) {
                    return Err(Error::Config("layer norm epsilon must be positive".into()));
                }
            }
            width = Some(stage.dense.fan_out());
        }
        if let Some(w) = width {
            if output.fan_in() != w {
                return Err(shape_err(format!("output layer expects {} inputs, got {w}", output.fan_in())));
            }
        }
        if output.bias.len() != output.fan_out() {
            return Err(shape_err("output bias length mismatch"));
        }
        Ok(Self { hidden, output })
    }

    pub fn num_hidden(&self) -> usize {
        self.hidden.len()
    }

    pub fn hidden(&self) -> &[HiddenStage] {
        &self.hidden
    }

    pub fn hidden_mut(&mut self) -> &mut [HiddenStage] {
        &mut self.hidden
    }

    pub fn output(&self) -> &DenseLayer {
        &self.output
    }

    pub fn output_mut(&mut self) -> &mut DenseLayer {
        &mut self.output
    }

    pub fn input_width(&self) -> usize {
        self.hidden
            .first()
            .map_or(self.output.fan_in(), |s| s.dense.fan_in())
    }

    pub fn output_width(&self) -> usize {
        self.output.fan_out()
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.hidden.iter().map(|s| s.dense.fan_out()).collect()
    }

    /// Dense layer by index; `num_hidden()` is the output layer.
    pub fn dense(&self, layer: usize) -> &DenseLayer {
        if layer == self.hidden.len() {
            &self.output
        } else {
            &self.hidden[layer].dense
        }
    }

    pub fn dense_mut(&mut self, layer: usize) -> &mut DenseLayer {
        if layer == self.hidden.len() {
            &mut self.output
        } else {
            &mut self.hidden[layer].dense
        }
    }

    /// Canonical tensor order: per hidden stage weight, bias, gamma, beta;
    /// then the output weight and bias.
    pub fn param_ids(&self) -> Vec<ParamId> {
        self.params().into_iter().map(|p| p.id).collect()
    }

    pub fn param_index(&self, id: ParamId) -> Option<usize> {
        self.param_ids().iter().position(|p| *p == id)
    }

    pub fn params(&self) -> Vec<ParamRef<'_>> {
        let mut out = Vec::new();
        for (layer, stage) in self.hidden.iter().enumerate() {
            push_dense(&mut out, layer, &stage.dense);
            if let Some(n) = &stage.norm {
                out.push(ParamRef {
                    id: ParamId { layer, kind: ParamKind::Gamma },
                    values: &n.gamma,
                    init: n.gamma_init,
                });
                out.push(ParamRef {
                    id: ParamId { layer, kind: ParamKind::Beta },
                    values: &n.beta,
                    init: n.beta_init,
                });
            }
        }
        push_dense(&mut out, self.hidden.len(), &self.output);
        out
    }

    pub fn params_mut(&mut self) -> Vec<ParamMut<'_>> {
        let mut out = Vec::new();
        let n_hidden = self.hidden.len();
        for (layer, stage) in self.hidden.iter_mut().enumerate() {
            push_dense_mut(&mut out, layer, &mut stage.dense);
            if let Some(n) = &mut stage.norm {
                out.push(ParamMut {
                    id: ParamId { layer, kind: ParamKind::Gamma },
                    values: &mut n.gamma,
                    init: n.gamma_init,
                });
                out.push(ParamMut {
                    id: ParamId { layer, kind: ParamKind::Beta },
                    values: &mut n.beta,
                    init: n.beta_init,
                });
            }
        }
        push_dense_mut(&mut out, n_hidden, &mut self.output);
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.values.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|p| p.values.iter().all(|v| v.is_finite()))
    }

    pub fn forward(&self, batch: &Matrix) -> Result<(Matrix, ForwardCache)> {
        if batch.cols() != self.input_width() {
            return Err(shape_err(format!(
                "batch has {} columns, network expects {}",
                batch.cols(),
                self.input_width()
            )));
        }
        let mut hidden = Vec::with_capacity(self.hidden.len());
        for stage in &self.hidden {
            let input = match hidden.last() {
                None => batch,
                Some(h) => HiddenCache::output(h),
            };
            let pre_activation = stage.dense.forward(input);
            let mut activation = pre_activation.clone();
            for v in activation.as_mut_slice() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            let norm = stage.norm.as_ref().map(|n| {
                let (y, c) = n.forward(&activation);
                (c, y)
            });
            hidden.push(HiddenCache {
                pre_activation,
                activation,
                norm,
            });
        }
        let last = hidden.last().map_or(batch, HiddenCache::output);
        let logits = self.output.forward(last);
        let probabilities = softmax_rows(&logits);
        let cache = ForwardCache {
            input: batch.clone(),
            hidden,
            logits,
            probabilities: probabilities.clone(),
        };
        Ok((probabilities, cache))
    }

    /// Exact gradient of the mean cross-entropy loss of a cached forward pass.
    pub fn backward(&self, cache: &ForwardCache, targets: &Matrix) -> Result<Gradients> {
        let m = cache.batch_size();
        if targets.rows() != m || targets.cols() != self.output_width() {
            return Err(shape_err(format!(
                "targets {}x{} do not match predictions {}x{}",
                targets.rows(),
                targets.cols(),
                m,
                self.output_width()
            )));
        }
        let mut grads = Gradients::zeros_like(self);
        let mut slot = grads.tensors.len();

        let mut dz = cache.probabilities.clone();
        let inv_m = 1.0 / m as f64;
        for (d, y) in dz.as_mut_slice().iter_mut().zip(targets.as_slice()) {
            *d = (*d - y) * inv_m;
        }

        // output layer: last two tensors
        slot -= 2;
        let want = !self.hidden.is_empty();
        let mut upstream = {
            let (dw, rest) = grads.tensors[slot..].split_at_mut(1);
            self.output
                .backward(cache.last_hidden(), &dz, &mut dw[0], &mut rest[0], want)
        };

        for layer in (0..self.hidden.len()).rev() {
            let stage = &self.hidden[layer];
            let hc = &cache.hidden[layer];
            let mut dh = upstream.take().expect("input gradient requested");
            if let (Some(norm), Some((nc, _))) = (&stage.norm, &hc.norm) {
                slot -= 2;
                let (dg, db) = grads.tensors[slot..].split_at_mut(1);
                dh = norm.backward(nc, &dh, &mut dg[0], &mut db[0]);
            }
            for (d, z) in dh.as_mut_slice().iter_mut().zip(hc.pre_activation.as_slice()) {
                if *z <= 0.0 {
                    *d = 0.0;
                }
            }
            slot -= 2;
            let (dw, db) = grads.tensors[slot..].split_at_mut(1);
            upstream = stage.dense.backward(
                cache.layer_input(layer),
                &dh,
                &mut dw[0],
                &mut db[0],
                layer > 0,
            );
        }
        debug_assert_eq!(slot, 0);
        Ok(grads)
    }

    pub fn loss_and_grad(&self, batch: &Matrix, targets: &Matrix) -> Result<LossAndGrad> {
        check_one_hot(targets)?;
        if targets.rows() != batch.rows() {
            return Err(shape_err(format!(
                "{} target rows for a batch of {}",
                targets.rows(),
                batch.rows()
            )));
        }
        let (predictions, cache) = self.forward(batch)?;
        let grads = self.backward(&cache, targets)?;
        let loss = cross_entropy_from_logits(&cache.logits, targets);
        Ok(LossAndGrad {
            loss,
            grads,
            predictions,
            cache,
        })
    }

    /// Mean loss without gradients.
    pub fn loss(&self, batch: &Matrix, targets: &Matrix) -> Result<f64> {
        let (_, cache) = self.forward(batch)?;
        Ok(cross_entropy_from_logits(&cache.logits, targets))
    }
}

fn push_dense<'a>(out: &mut Vec<ParamRef<'a>>, layer: usize, d: &'a DenseLayer) {
    out.push(ParamRef {
        id: ParamId { layer, kind: ParamKind::Weight },
        values: d.weights.as_slice(),
        init: d.weight_init,
    });
    out.push(ParamRef {
        id: ParamId { layer, kind: ParamKind::Bias },
        values: &d.bias,
        init: d.bias_init,
    });
}

fn push_dense_mut<'a>(out: &mut Vec<ParamMut<'a>>, layer: usize, d: &'a mut DenseLayer) {
    out.push(ParamMut {
        id: ParamId { layer, kind: ParamKind::Weight },
        values: d.weights.as_mut_slice(),
        init: d.weight_init,
    });
    out.push(ParamMut {
        id: ParamId { layer, kind: ParamKind::Bias },
        values: &mut d.bias,
        init: d.bias_init,
    });
}
