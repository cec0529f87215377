//! Continual training on permuted MNIST with a chosen learning system.
//!
//! ```text
//! cargo run --release --example permuted_mnist -- [base|l2|sp|cbp|redo|swr] [small|large] [tasks] [subsample] [ln]
//! ```

use std::time::Instant;

use plasticity::continual::{run_experiment_with, ContinualConfig};
use plasticity::data::{default_data_dir, load_mnist_train};
use plasticity::optim::OptimConfig;
use plasticity::reinit::{Algorithm, CbpConfig, RedoConfig, ShrinkPerturbConfig, SwrConfig};
use plasticity::{Architecture, LayerNormMode};

fn main() -> plasticity::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let system = args.first().map_or("base", String::as_str);
    let size = args.get(1).map_or("small", String::as_str);
    let tasks: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(20);
    let subsample: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let layer_norm = args.get(4).is_some_and(|s| s == "ln");

    let mut arch = if size == "large" { Architecture::large_mnist() } else { Architecture::small_mnist() };
    if layer_norm {
        arch = arch.with_layer_norm(LayerNormMode::Standard);
    }
    let alpha = if layer_norm { 0.1 } else { 0.05 };
    let mut optim = OptimConfig::sgd(alpha);
    let algorithm = match system {
        "l2" => {
            optim = optim.with_l2(1e-4 / alpha);
            Algorithm::L2
        }
        "sp" => {
            optim = optim.with_l2(1e-4 / alpha);
            Algorithm::ShrinkPerturb(ShrinkPerturbConfig { sigma2: 1e-9 })
        }
        "cbp" => Algorithm::Cbp(CbpConfig { replacement_rate: 1e-3, maturity_threshold: 5 }),
        "redo" => Algorithm::Redo(RedoConfig { frequency: 8, threshold: 1e-2 }),
        "swr" => Algorithm::Swr(SwrConfig::tuned_small()),
        _ => Algorithm::Base,
    };
    let cfg = ContinualConfig {
        arch,
        optim,
        algorithm,
        tasks,
        subsample,
        ..ContinualConfig::default()
    };

    let dataset = load_mnist_train(default_data_dir())?;
    let start = Instant::now();
    let result = run_experiment_with(&cfg, &dataset, 0, |r| {
        println!(
            "task {:4}  acc {:.4}  dead {:.3}  |w| {:.4}  |g| {:.2e}  srank {:.2}  ({:.1}s)",
            r.task,
            r.avg_online_accuracy,
            r.dead_unit_fraction,
            r.avg_weight_magnitude,
            r.avg_gradient_magnitude,
            r.stable_rank,
            start.elapsed().as_secs_f64()
        );
    })?;
    let n = result.records.len();
    let mean = |rs: &[plasticity::metrics::MetricsRecord]| {
        rs.iter().map(|r| r.avg_online_accuracy).sum::<f64>() / rs.len() as f64
    };
    let w = (n / 10).max(1);
    println!(
        "{system}: first {w} tasks {:.4}, last {w} tasks {:.4}",
        mean(&result.records[..w]),
        mean(&result.records[n - w..])
    );
    Ok(())
}
