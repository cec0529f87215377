#![allow(dead_code)]

use std::path::Path;

use plasticity::data::{make_dataset, write_idx_images, write_idx_labels, Dataset, RawImages, PIXELS};
use plasticity::tensor::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Learnable fake digits: class `c` lights up a band of pixels plus noise.
pub fn synthetic_raw(n: usize, seed: u64) -> (RawImages, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pixels = vec![0u8; n * PIXELS];
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = rng.random_range(0..10u8);
        labels.push(c);
        let img = &mut pixels[i * PIXELS..(i + 1) * PIXELS];
        for (j, p) in img.iter_mut().enumerate() {
            let on = (j / 78) as u8 == c;
            let base: u8 = if on { 180 } else { 0 };
            *p = base.saturating_add(rng.random_range(0..60));
        }
    }
    (RawImages { count: n, pixels }, labels)
}

pub fn synthetic_dataset(n: usize, seed: u64) -> Dataset {
    let (images, labels) = synthetic_raw(n, seed);
    make_dataset(images, labels).unwrap()
}

/// Writes `train-images-idx3-ubyte` / `train-labels-idx1-ubyte` into `dir`.
pub fn write_synthetic_mnist(dir: &Path, n: usize, seed: u64) {
    let (images, labels) = synthetic_raw(n, seed);
    std::fs::create_dir_all(dir).unwrap();
    write_idx_images(dir.join("train-images-idx3-ubyte"), &images).unwrap();
    write_idx_labels(dir.join("train-labels-idx1-ubyte"), &labels).unwrap();
}

pub fn random_matrix<R: Rng>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> Matrix {
    let v = (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect();
    Matrix::from_vec(rows, cols, v).unwrap()
}

/// Largest relative error between analytic and central-difference
/// gradients over every parameter. Relative error is
/// `|a - n| / max(|a|, |n|, floor)`.
pub fn max_gradient_error(
    net: &plasticity::Network,
    x: &Matrix,
    targets: &Matrix,
    h: f64,
    floor: f64,
) -> (f64, String) {
    let analytic = net.loss_and_grad(x, targets).unwrap().grads;
    let mut probe = net.clone();
    let ids = net.param_ids();
    let mut worst = (0.0, String::new());
    for (t, id) in ids.iter().enumerate() {
        let len = analytic.tensors[t].len();
        for j in 0..len {
            let orig = probe.params()[t].values[j];
            probe.params_mut()[t].values[j] = orig + h;
            let up = probe.loss(x, targets).unwrap();
            probe.params_mut()[t].values[j] = orig - h;
            let down = probe.loss(x, targets).unwrap();
            probe.params_mut()[t].values[j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic.tensors[t][j];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            if err > worst.0 {
                worst = (err, format!("{id}[{j}] analytic {a:e} numeric {numeric:e}"));
            }
        }
    }
    worst
}

/// A random network with widths in `1..=16`, optionally with layer norm
/// whose scale and shift are moved away from their initial values.
pub fn random_small_network(
    seed: u64,
    mode: plasticity::LayerNormMode,
) -> (plasticity::Network, Matrix, Matrix) {
    use plasticity::nn::one_hot;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = rng.random_range(1..=3);
    let mut widths = vec![rng.random_range(2..=16)];
    for _ in 0..depth {
        widths.push(rng.random_range(2..=16));
    }
    let classes = rng.random_range(2..=16);
    widths.push(classes);
    let arch = plasticity::Architecture::new(widths.clone(), mode);
    let mut net = plasticity::Network::new(&arch, seed).unwrap();
    for p in net.params_mut() {
        if matches!(p.id.kind, plasticity::nn::ParamKind::Bias | plasticity::nn::ParamKind::Gamma | plasticity::nn::ParamKind::Beta) {
            for v in p.values.iter_mut() {
                *v += rng.random_range(-0.5..0.5);
            }
        }
    }
    let batch = rng.random_range(1..=6);
    let x = random_matrix(batch, widths[0], 1.0, &mut rng);
    let labels: Vec<u8> = (0..batch).map(|_| rng.random_range(0..classes as u8)).collect();
    let targets = one_hot(&labels, classes).unwrap();
    (net, x, targets)
}
