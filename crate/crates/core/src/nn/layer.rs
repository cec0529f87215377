use rand::Rng;

use crate::init::InitSpec;
use crate::tensor::{axpy, Matrix};

/// Fully-connected layer, `z = x Wᵀ + b`, with `W` stored as (out × in).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub weight_init: InitSpec,
    pub bias_init: InitSpec,
}

impl DenseLayer {
    pub fn new<R: Rng + ?Sized>(
        fan_in: usize,
        fan_out: usize,
        weight_init: InitSpec,
        bias_init: InitSpec,
        rng: &mut R,
    ) -> Self {
        let mut weights = Matrix::zeros(fan_out, fan_in);
        weight_init.fill(weights.as_mut_slice(), rng);
        let mut bias = vec![0.0; fan_out];
        bias_init.fill(&mut bias, rng);
        Self {
            weights,
            bias,
            weight_init,
            bias_init,
        }
    }

    #[inline]
    pub fn fan_in(&self) -> usize {
        self.weights.cols()
    }

    #[inline]
    pub fn fan_out(&self) -> usize {
        self.weights.rows()
    }

    pub fn param_count(&self) -> usize {
        self.weights.as_slice().len() + self.bias.len()
    }

    /// Input rows must already have `fan_in` columns.
    pub(crate) fn forward(&self, input: &Matrix) -> Matrix {
        let mut z = input
            .matmul_transposed(&self.weights)
            .expect("caller checked input width");
        for r in 0..z.rows() {
            for (v, b) in z.row_mut(r).iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        z
    }

    /// Accumulates parameter gradients for upstream gradient `dz` and returns
    /// the gradient with respect to the input when `want_input_grad` is set.
    pub(crate) fn backward(
        &self,
        input: &Matrix,
        dz: &Matrix,
        dw: &mut [f64],
        db: &mut [f64],
        want_input_grad: bool,
    ) -> Option<Matrix> {
        let fan_in = self.fan_in();
        for r in 0..dz.rows() {
            let x = input.row(r);
            for (o, &g) in dz.row(r).iter().enumerate() {
                if g != 0.0 {
                    axpy(&mut dw[o * fan_in..(o + 1) * fan_in], g, x);
                }
                db[o] += g;
            }
        }
        if !want_input_grad {
            return None;
        }
        let mut dx = Matrix::zeros(dz.rows(), fan_in);
        for r in 0..dz.rows() {
            let dst = dx.row_mut(r);
            for (o, &g) in dz.row(r).iter().enumerate() {
                if g != 0.0 {
                    axpy(dst, g, self.weights.row(o));
                }
            }
        }
        Some(dx)
    }
}
