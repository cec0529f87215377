use crate::init::InitSpec;
use crate::tensor::Matrix;

pub const LN_EPSILON: f64 = 1e-5;

/// Layer normalization over the units of one layer:
/// `y = (x - mean) / (std + eps) * scale + beta`, where `scale` is `gamma`
/// or, in the reparameterized form, `1 + gamma`. `std` is the biased
/// (population) estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNormStage {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub epsilon: f64,
    pub reparameterized: bool,
    pub gamma_init: InitSpec,
    pub beta_init: InitSpec,
}

/// Per-row intermediates kept for the backward pass.
#[derive(Debug, Clone)]
pub struct NormCache {
    /// Normalized values before the affine part.
    pub normalized: Matrix,
    pub mean: Vec<f64>,
    /// Biased standard deviation of each row.
    pub std: Vec<f64>,
}

impl LayerNormStage {
    pub fn new(width: usize, reparameterized: bool) -> Self {
        let gamma_value = if reparameterized { 0.0 } else { 1.0 };
        Self {
            gamma: vec![gamma_value; width],
            beta: vec![0.0; width],
            epsilon: LN_EPSILON,
            reparameterized,
            gamma_init: InitSpec::Constant { value: gamma_value },
            beta_init: InitSpec::zeros(),
        }
    }

    pub fn width(&self) -> usize {
        self.gamma.len()
    }

    #[inline]
    fn scale(&self, j: usize) -> f64 {
        if self.reparameterized {
            1.0 + self.gamma[j]
        } else {
            self.gamma[j]
        }
    }

    pub fn forward(&self, x: &Matrix) -> (Matrix, NormCache) {
        let n = x.cols();
        let mut out = Matrix::zeros(x.rows(), n);
        let mut normalized = Matrix::zeros(x.rows(), n);
        let mut means = Vec::with_capacity(x.rows());
        let mut stds = Vec::with_capacity(x.rows());
        for r in 0..x.rows() {
            let row = x.row(r);
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let std = var.sqrt();
            let denom = std + self.epsilon;
            let nrow = normalized.row_mut(r);
            for (dst, v) in nrow.iter_mut().zip(row) {
                *dst = (v - mean) / denom;
            }
            let orow = out.row_mut(r);
            for j in 0..n {
                orow[j] = normalized.get(r, j) * self.scale(j) + self.beta[j];
            }
            means.push(mean);
            stds.push(std);
        }
        (
            out,
            NormCache {
                normalized,
                mean: means,
                std: stds,
            },
        )
    }

    /// Returns the input gradient; adds into `dgamma` and `dbeta`.
    pub fn backward(
        &self,
        cache: &NormCache,
        dy: &Matrix,
        dgamma: &mut [f64],
        dbeta: &mut [f64],
    ) -> Matrix {
        let n = dy.cols();
        let nf = n as f64;
        let mut dx = Matrix::zeros(dy.rows(), n);
        let mut g_hat = vec![0.0; n];
        for r in 0..dy.rows() {
            let gy = dy.row(r);
            let xhat = cache.normalized.row(r);
            let std = cache.std[r];
            let denom = std + self.epsilon;
            for j in 0..n {
                dgamma[j] += gy[j] * xhat[j];
                dbeta[j] += gy[j];
                g_hat[j] = gy[j] * self.scale(j);
            }
            let g_mean = g_hat.iter().sum::<f64>() / nf;
            // d/dx of std contributes only when the row is not constant
            let proj = if std > 0.0 {
                let centered_dot: f64 = g_hat.iter().zip(xhat).map(|(g, h)| g * h * denom).sum();
                centered_dot / (nf * std * denom * denom)
            } else {
                0.0
            };
            let out = dx.row_mut(r);
            for j in 0..n {
                let centered = xhat[j] * denom;
                out[j] = (g_hat[j] - g_mean) / denom - centered * proj;
            }
        }
        dx
    }
}
