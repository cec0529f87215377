//! A two-by-two grid over SWR's τ and k on a synthetic stand-in for MNIST,
//! followed by a plot of the winning cell against the rest.
//!
//! ```text
//! cargo run --release --example sweep_and_plot -- [out_dir]
//! ```

use std::path::PathBuf;

use plasticity::data::{write_idx_images, write_idx_labels, RawImages, PIXELS};
use plasticity::runner::{emit_plot, parse_sweep, run_sweep};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> plasticity::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/sweep_example".into()));
    let data = out.join("data");
    std::fs::create_dir_all(&data)?;

    // 600 images whose class is written into one band of pixels
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let n = 600;
    let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..10)).collect();
    let mut pixels = vec![0u8; n * PIXELS];
    for (i, &c) in labels.iter().enumerate() {
        for j in 0..PIXELS {
            pixels[i * PIXELS + j] = if j / 78 == c as usize { 200 } else { rng.random_range(0..40) };
        }
    }
    write_idx_images(data.join("train-images-idx3-ubyte"), &RawImages { count: n, pixels })?;
    write_idx_labels(data.join("train-labels-idx1-ubyte"), &labels)?;

    let spec = format!(
        "[data]\ndir = {}\n\
         [network]\nwidths = 784, 10, 10, 10, 10\n\
         [algorithm]\nname = swr\n\
         [experiment]\ntasks = 15\nprobe_size = 200\noutput = {}\n\
         [sweep]\nruns = 3\n\
         [grid]\nalgorithm.tau = 16 | 256\nalgorithm.k = 1e-3 | 1e-1\n",
        data.display(),
        out.join("cells").display()
    );
    let outcome = run_sweep(&parse_sweep(&spec)?, 2)?;
    for (cell, s) in outcome.cells.iter().zip(&outcome.summaries) {
        println!("{} {:?}: auc {:.4} ± {:.4}", s.name, cell.assignments, s.mean_auc, s.stderr_auc);
    }
    if let Some(w) = outcome.winner {
        println!("best: {}", outcome.summaries[w].name);
    }

    let csvs: Vec<PathBuf> = outcome
        .cells
        .iter()
        .flat_map(|c| (0..3).map(move |s| (c.dir_name(), s)))
        .map(|(dir, s)| out.join("cells").join(dir).join(format!("seed_{s}.csv")))
        .collect();
    let svg = out.join("accuracy.svg");
    emit_plot(&csvs, "avg_online_accuracy", &svg)?;
    println!("wrote {}", svg.display());
    Ok(())
}
