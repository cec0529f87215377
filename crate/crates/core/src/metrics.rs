//! Correlates of plasticity loss: dead units, weight magnitude, gradient
//! magnitude and the stable rank of the last hidden representation.

use crate::nn::{ForwardCache, Gradients, Network, ParamKind};
use crate::tensor::Matrix;

/// Per-task measurements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRecord {
    pub task: usize,
    pub avg_online_accuracy: f64,
    pub dead_unit_fraction: f64,
    pub avg_weight_magnitude: f64,
    pub avg_gradient_magnitude: f64,
    pub stable_rank: f64,
    /// Number of updates performed during the task.
    pub updates: usize,
}

impl MetricsRecord {
    pub fn is_finite(&self) -> bool {
        [
            self.avg_online_accuracy,
            self.dead_unit_fraction,
            self.avg_weight_magnitude,
            self.avg_gradient_magnitude,
            self.stable_rank,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Fraction of hidden ReLU units, pooled over all hidden layers, whose output
/// is exactly zero for every row of the cached batch.
pub fn dead_unit_fraction_from_cache(cache: &ForwardCache) -> f64 {
    let mut dead = 0usize;
    let mut total = 0usize;
    for h in &cache.hidden {
        let a = &h.activation;
        for j in 0..a.cols() {
            total += 1;
            if (0..a.rows()).all(|r| a.get(r, j) == 0.0) {
                dead += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        dead as f64 / total as f64
    }
}

pub fn dead_unit_fraction(net: &Network, probe: &Matrix) -> crate::Result<f64> {
    let (_, cache) = net.forward(probe)?;
    Ok(dead_unit_fraction_from_cache(&cache))
}

/// Mean `|w|` over every weight-matrix entry (biases and layer-norm
/// parameters excluded).
pub fn avg_weight_magnitude(net: &Network) -> f64 {
    let (sum, n) = net
        .params()
        .iter()
        .filter(|p| p.id.kind == ParamKind::Weight)
        .flat_map(|p| p.values.iter())
        .fold((0.0, 0usize), |(s, n), w| (s + w.abs(), n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableRank {
    pub value: f64,
    /// Set when the feature matrix was entirely zero; `value` is then 0.
    pub all_zero: bool,
}

pub const POWER_TOLERANCE: f64 = 1e-9;
pub const POWER_MAX_ITERS: usize = 1000;

/// `‖A‖_F² / σ_max(A)²`, with `σ_max²` from power iteration on `AᵀA`.
pub fn stable_rank(features: &Matrix) -> StableRank {
    let gram = gram(features);
    let n = gram.rows();
    let frobenius2: f64 = (0..n).map(|i| gram.get(i, i)).sum();
    if frobenius2 == 0.0 {
        return StableRank {
            value: 0.0,
            all_zero: true,
        };
    }
    let top = top_eigenvalue(&gram);
    StableRank {
        value: frobenius2 / top,
        all_zero: false,
    }
}

fn gram(a: &Matrix) -> Matrix {
    let n = a.cols();
    let mut g = Matrix::zeros(n, n);
    for r in 0..a.rows() {
        let row = a.row(r);
        for i in 0..n {
            let ri = row[i];
            if ri == 0.0 {
                continue;
            }
            let gi = g.row_mut(i);
            for j in 0..n {
                gi[j] += ri * row[j];
            }
        }
    }
    g
}

/// Largest eigenvalue of a symmetric positive semi-definite matrix. Stops
/// once the residual `‖Gv − λv‖` drops below `POWER_TOLERANCE · λ`.
fn top_eigenvalue(g: &Matrix) -> f64 {
    let n = g.rows();
    // deterministic start with a slight tilt so it is not orthogonal to
    // structured eigenvectors
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 + 1.0).sqrt() * 1e-3).collect();
    normalize(&mut v);
    let mut lambda = 0.0;
    let mut gv = vec![0.0; n];
    for _ in 0..POWER_MAX_ITERS {
        mat_vec(g, &v, &mut gv);
        lambda = crate::tensor::dot(&v, &gv);
        let residual = gv
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual <= POWER_TOLERANCE * lambda.abs() {
            break;
        }
        v.copy_from_slice(&gv);
        if normalize(&mut v) == 0.0 {
            break;
        }
    }
    lambda
}

fn mat_vec(g: &Matrix, v: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = crate::tensor::dot(g.row(i), v);
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Running mean of the per-update mean gradient magnitude.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GradMagnitude {
    sum: f64,
    count: usize,
}

impl GradMagnitude {
    pub fn push(&mut self, grads: &Gradients) {
        self.push_value(grads.mean_abs());
    }

    pub fn push_value(&mut self, mean_abs: f64) {
        self.sum += mean_abs;
        self.count += 1;
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Architecture, LayerNormMode};

    fn constant_net(bias: f64) -> Network {
        let mut net = Network::new(&Architecture::new(vec![4, 5, 3, 2], LayerNormMode::None), 0).unwrap();
        for l in 0..net.num_hidden() {
            let d = net.dense_mut(l);
            d.weights.as_mut_slice().iter_mut().for_each(|w| *w = 0.0);
            d.bias.iter_mut().for_each(|b| *b = bias);
        }
        net
    }

    fn probe() -> Matrix {
        Matrix::from_vec(3, 4, (0..12).map(|i| i as f64 * 0.1 - 0.4).collect()).unwrap()
    }

    #[test]
    fn dead_fraction_extremes() {
        assert_eq!(dead_unit_fraction(&constant_net(1.0), &probe()).unwrap(), 0.0);
        assert_eq!(dead_unit_fraction(&constant_net(-1.0), &probe()).unwrap(), 1.0);
    }

    #[test]
    fn weight_magnitude() {
        let mut net = Network::new(&Architecture::new(vec![1, 1], LayerNormMode::None), 0).unwrap();
        net.output_mut().weights.as_mut_slice()[0] = 0.0;
        net.output_mut().bias[0] = 5.0;
        assert_eq!(avg_weight_magnitude(&net), 0.0);

        let mut net = Network::new(&Architecture::new(vec![2, 1], LayerNormMode::None), 0).unwrap();
        net.output_mut().weights.as_mut_slice().copy_from_slice(&[-2.0, 2.0]);
        assert_eq!(avg_weight_magnitude(&net), 2.0);
    }

    #[test]
    fn stable_rank_simple_cases() {
        let mut eye = Matrix::zeros(3, 5);
        for i in 0..3 {
            eye.set(i, i, 1.0);
        }
        assert!((stable_rank(&eye).value - 3.0).abs() < 1e-9);

        let rank1 = Matrix::from_vec(3, 2, vec![1.0, 2.0, 2.0, 4.0, -1.0, -2.0]).unwrap();
        assert!((stable_rank(&rank1).value - 1.0).abs() < 1e-9);

        let zero = stable_rank(&Matrix::zeros(4, 3));
        assert!(zero.all_zero);
        assert_eq!(zero.value, 0.0);
    }

    #[test]
    fn grad_magnitude_means() {
        let mut acc = GradMagnitude::default();
        assert_eq!(acc.mean(), 0.0);
        for _ in 0..4 {
            acc.push_value(0.7);
        }
        assert!((acc.mean() - 0.7).abs() < 1e-15);
        acc.reset();
        acc.push(&Gradients { tensors: vec![vec![0.0; 3]] });
        assert_eq!(acc.mean(), 0.0);
        acc.reset();
        acc.push(&Gradients { tensors: vec![vec![1.0, -1.0]] });
        acc.push(&Gradients { tensors: vec![vec![3.0, -3.0]] });
        assert_eq!(acc.mean(), 2.0);
    }
}
