//! One network trained on a fixed batch with SGD, SGDW with momentum, and
//! AdamW.

use plasticity::nn::one_hot;
use plasticity::optim::{OptimConfig, Optimizer};
use plasticity::{Architecture, LayerNormMode, Matrix, Network};

fn main() -> plasticity::Result<()> {
    let x = Matrix::from_vec(6, 5, (0..30).map(|i| ((i * 13) % 7) as f64 / 7.0).collect())?;
    let y = one_hot(&[0, 1, 2, 0, 1, 2], 3)?;
    let configs = [
        ("sgd + l2", OptimConfig::sgd(0.05).with_l2(1e-4 / 0.05)),
        ("sgdw momentum", OptimConfig::sgdw_momentum(5e-3, 0.9).with_l2(1e-2)),
        ("adamw", OptimConfig::adamw(5e-4, 0.9, 0.999).with_l2(1e-2)),
    ];
    for (name, cfg) in configs {
        let mut net = Network::new(&Architecture::new(vec![5, 8, 8, 3], LayerNormMode::None), 0)?;
        let mut opt = Optimizer::new(cfg, &net)?;
        let start = net.loss(&x, &y)?;
        for _ in 0..200 {
            let g = net.loss_and_grad(&x, &y)?.grads;
            opt.step(&mut net, &g)?;
        }
        println!("{name:14} loss {start:.4} -> {:.4}", net.loss(&x, &y)?);
    }
    Ok(())
}
