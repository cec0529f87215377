//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.
//!
//! Criteria 8-11 train the small network on permuted MNIST for 200 tasks
//! with five seeds per system (20 runs). MNIST is read from
//! `$PLASTICITY_DATA_DIR`, falling back to `<workspace>/data/mnist`.

mod common;

use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::Instant;

use nalgebra::DMatrix;
use plasticity::continual::{run_experiment, ContinualConfig};
use plasticity::data::{load_mnist_train, Dataset, DATA_DIR_ENV};
use plasticity::init::InitSpec;
use plasticity::metrics::stable_rank;
use plasticity::nn::LayerNormStage;
use plasticity::optim::{OptimConfig, Optimizer};
use plasticity::reinit::{
    cbp_step, prune_indices, redo_step, reinit_values, CbpConfig, CbpState, PruningKind, RedoConfig, ReinitMethod,
    SwrConfig,
};
use plasticity::reinit::Algorithm;
use plasticity::runner::mean_and_stderr;
use plasticity::{Architecture, LayerNormMode, Matrix, Network};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gradient_exactness() -> Outcome {
    let modes = [LayerNormMode::None, LayerNormMode::Standard, LayerNormMode::Reparameterized];
    let mut worst = (0.0, String::new());
    for i in 0..20u64 {
        let (net, x, t) = common::random_small_network(1000 + i, modes[i as usize % 3]);
        assert!(net.hidden_widths().iter().all(|&w| w <= 16) && net.input_width() <= 16);
        let (err, at) = common::max_gradient_error(&net, &x, &t, 1e-5, 1e-6);
        if err > worst.0 {
            worst = (err, format!("net {i} {at}"));
        }
    }
    check(worst.0 < 1e-4, format!("20 networks, max relative error {:.2e} ({})", worst.0, worst.1))
}

fn pruning_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for trial in 0..10_000 {
        let d = rng.random_range(1..=300);
        let ties = rng.random_bool(0.3);
        let u: Vec<f64> = (0..d)
            .map(|_| if ties { rng.random_range(0..4) as f64 } else { rng.random_range(0.0..10.0) })
            .collect();
        let k = rng.random_range(1e-3..3.0);
        let got = prune_indices(&u, k, PruningKind::Threshold, &mut rng).unwrap();
        let mean = u.iter().sum::<f64>() / d as f64;
        let want: Vec<usize> = (0..d).filter(|&i| u[i] <= k * mean).collect();
        if got != want {
            return Err(format!("threshold mismatch on vector {trial}"));
        }
        let kp = rng.random_range(1e-3..0.999);
        let n = prune_indices(&u, kp, PruningKind::Proportional, &mut rng).unwrap().len();
        let lo = (kp * d as f64).floor() as usize;
        if n != lo && n != lo + 1 {
            return Err(format!("proportional count {n} for k·d = {}", kp * d as f64));
        }
    }
    let d = 100;
    let k = 0.037;
    let u: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
    let lo = (k * d as f64).floor() as usize;
    let mut total = 0usize;
    for _ in 0..100_000 {
        let n = prune_indices(&u, k, PruningKind::Proportional, &mut rng).unwrap().len();
        if n != lo && n != lo + 1 {
            return Err(format!("proportional count {n} for k·d = {}", k * d as f64));
        }
        total += n;
    }
    let mean = total as f64 / 1e5;
    let rel = (mean / (k * d as f64) - 1.0).abs();
    check(
        rel < 0.01,
        format!("10^4 threshold vectors exact; proportional mean count {mean:.4} vs k·d {:.4} (rel {rel:.2e})", k * d as f64),
    )
}

fn reinit_distribution() -> Outcome {
    let n = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut details = Vec::new();
    let specs = [
        (InitSpec::kaiming_uniform(784), "kaiming(784)"),
        (InitSpec::kaiming_uniform(10), "kaiming(10)"),
        (InitSpec::Normal { mean: 0.5, std: 2.0 }, "normal(0.5, 2)"),
    ];
    for (spec, name) in specs {
        let v = reinit_values(n, &spec, ReinitMethod::Resample, &mut rng);
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = spec.variance().sqrt();
        let mean_tol = 3.0 * sd / (n as f64).sqrt();
        let var_rel = (var / spec.variance() - 1.0).abs();
        if (mean - spec.mean()).abs() > mean_tol || var_rel > 0.02 {
            return Err(format!("{name}: mean {mean:e} (tol {mean_tol:e}), variance off by {var_rel:.3}"));
        }
        if let InitSpec::UniformSymmetric { bound } = spec {
            if v.iter().any(|x| x.abs() > bound) {
                return Err(format!("{name}: value outside the bound"));
            }
        }
        let m = reinit_values(1000, &spec, ReinitMethod::Mean, &mut rng);
        if m.iter().any(|&x| x != spec.mean()) {
            return Err(format!("{name}: mean reinit is not the distribution mean"));
        }
        details.push(format!("{name} var rel {var_rel:.4}"));
    }
    check(true, format!("10^5 draws each: {}; mean reinit exact", details.join(", ")))
}

fn svd_stable_rank(m: &Matrix) -> f64 {
    let s = DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice()).singular_values();
    let top = s.max();
    s.iter().map(|v| v * v).sum::<f64>() / (top * top)
}

fn stable_rank_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let r = rng.random_range(1..=50);
        let c = rng.random_range(1..=50);
        let m = common::random_matrix(r, c, 1.0, &mut rng);
        let ours = stable_rank(&m).value;
        worst = worst.max((ours - svd_stable_rank(&m)).abs());
        let s = rng.random_range(1e-3..1e3);
        let scaled = Matrix::from_vec(r, c, m.as_slice().iter().map(|v| v * s).collect()).unwrap();
        let diff = (stable_rank(&scaled).value - ours).abs();
        if diff > 1e-9 * ours {
            return Err(format!("scaling by {s} moved stable rank by {diff:e}"));
        }
    }
    let u: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
    let v: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
    let r1 = Matrix::from_vec(30, 20, u.iter().flat_map(|a| v.iter().map(move |b| a * b)).collect()).unwrap();
    let rank1 = stable_rank(&r1).value;
    check(
        worst < 1e-6 && (rank1 - 1.0).abs() < 1e-12,
        format!("100 matrices, max |ours - svd| {worst:.2e}; rank-1 gives {rank1:.15}"),
    )
}

fn layer_norm_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..200 {
        let w = rng.random_range(1..=64);
        let std_ln = LayerNormStage::new(w, false);
        let mut rep = LayerNormStage::new(w, true);
        let mut std_ln = std_ln;
        let beta: Vec<f64> = (0..w).map(|_| rng.random_range(-1.0..1.0)).collect();
        std_ln.beta = beta.clone();
        rep.beta = beta;
        let x = common::random_matrix(rng.random_range(1..8), w, 5.0, &mut rng);
        let (a, _) = std_ln.forward(&x);
        let (b, _) = rep.forward(&x);
        let same = a.as_slice().iter().zip(b.as_slice()).all(|(p, q)| p.to_bits() == q.to_bits());
        if !same {
            return Err(format!("stage trial {trial} differs"));
        }
    }
    for seed in 0..20 {
        let widths = vec![12, 9, 7, 4];
        let a = Network::new(&Architecture::new(widths.clone(), LayerNormMode::Standard), seed).unwrap();
        let b = Network::new(&Architecture::new(widths, LayerNormMode::Reparameterized), seed).unwrap();
        let x = common::random_matrix(5, 12, 2.0, &mut rng);
        let (pa, _) = a.forward(&x).unwrap();
        let (pb, _) = b.forward(&x).unwrap();
        if pa.as_slice().iter().zip(pb.as_slice()).any(|(p, q)| p.to_bits() != q.to_bits()) {
            return Err(format!("network seed {seed} differs"));
        }
    }
    check(true, "200 random stages and 20 networks bitwise equal".into())
}

/// Units whose incoming weights changed during a reset step. Columns that
/// feed from a reset unit of the previous layer were zeroed by that reset,
/// so they are ignored.
fn reset_units(before: &Network, after: &Network) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for l in 0..before.num_hidden() {
        for u in 0..before.dense(l).fan_out() {
            let (a, b) = (before.dense(l).weights.row(u), after.dense(l).weights.row(u));
            let changed = (0..a.len()).any(|j| a[j] != b[j] && !(l > 0 && out.contains(&(l - 1, j))));
            if changed {
                out.push((l, u));
            }
        }
    }
    out
}

fn unit_reset_semantics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut resets = 0;
    for trial in 0..40u64 {
        let arch = Architecture::new(vec![8, 10, 9, 8, 5], LayerNormMode::None);
        let mut net = Network::new(&arch, trial).unwrap();
        for l in 0..3 {
            for b in net.dense_mut(l).bias.iter_mut() {
                *b = rng.random_range(-0.3..0.3);
            }
        }
        let x = common::random_matrix(12, 8, 1.0, &mut rng);
        let cache = net.forward(&x).unwrap().1;
        let before = net.clone();
        let mut opt = Optimizer::new(OptimConfig::sgdw_momentum(0.01, 0.9), &net).unwrap();
        if trial % 2 == 0 {
            let cfg = CbpConfig { replacement_rate: 0.15, maturity_threshold: 1 };
            let mut state = CbpState::new(&net);
            cbp_step(&mut net, &cache, &cfg, &mut state, &mut opt, &mut rng).unwrap();
            cbp_step(&mut net, &cache, &cfg, &mut state, &mut opt, &mut rng).unwrap();
        } else {
            let cfg = RedoConfig { frequency: 1, threshold: 0.6 };
            redo_step(&mut net, &cache, &cfg, &mut opt, 0, &mut rng).unwrap();
        }
        let units = reset_units(&before, &net);
        resets += units.len();
        let mut cut = before.clone();
        for &(l, u) in &units {
            let next = cut.dense_mut(l + 1);
            for o in 0..next.fan_out() {
                next.weights.set(o, u, 0.0);
            }
        }
        let probe = common::random_matrix(20, 8, 1.0, &mut rng);
        if net.forward(&probe).unwrap().0 != cut.forward(&probe).unwrap().0 {
            return Err(format!("trial {trial}: outputs differ after resetting {units:?}"));
        }
    }
    check(resets > 0, format!("40 CBP/ReDo steps, {resets} unit resets, outputs identical"))
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = tmp.path().join("data");
    common::write_synthetic_mnist(&data, 300, 7);
    let cfg = tmp.path().join("run.txt");
    let text = format!(
        "[data]\nimages = {}\nlabels = {}\n[network]\nwidths = 784, 10, 10, 10, 10\nlayer_norm = standard\n\
         [algorithm]\nname = swr\ntau = 8\nk = 0.05\n[experiment]\ntasks = 4\nprobe_size = 60\nseeds = 21\n",
        data.join("train-images-idx3-ubyte").display(),
        data.join("train-labels-idx1-ubyte").display()
    );
    std::fs::write(&cfg, text).map_err(|e| e.to_string())?;
    let mut bytes = Vec::new();
    for name in ["first", "second"] {
        let out = tmp.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_plasticity"))
            .args(["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .env("RUST_LOG", "warn")
            .stdout(std::process::Stdio::null())
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("`run` exited with {status}"));
        }
        bytes.push(std::fs::read(out.join("swr_seed21.csv")).map_err(|e| e.to_string())?);
    }
    check(
        bytes[0] == bytes[1] && !bytes[0].is_empty(),
        format!("two `run` invocations wrote {} identical bytes", bytes[0].len()),
    )
}

// ---- desk-scale experiments ----

const TASKS: usize = 200;
const SEEDS: u64 = 5;
const WINDOW: usize = 10;

struct Runs {
    label: &'static str,
    accuracy: Vec<Vec<f64>>,
    dead: Vec<Vec<f64>>,
}

impl Runs {
    fn per_seed_window(&self, start: usize) -> Vec<f64> {
        self.accuracy
            .iter()
            .map(|a| a[start..start + WINDOW].iter().sum::<f64>() / WINDOW as f64)
            .collect()
    }
    fn early(&self) -> (f64, f64) {
        mean_and_stderr(&self.per_seed_window(0))
    }
    fn late(&self) -> (f64, f64) {
        mean_and_stderr(&self.per_seed_window(TASKS - WINDOW))
    }
    fn drop(&self) -> f64 {
        self.early().0 - self.late().0
    }
    fn dead_at(&self, task: usize) -> f64 {
        mean_and_stderr(&self.dead.iter().map(|d| d[task]).collect::<Vec<_>>()).0
    }
}

fn small(layer_norm: LayerNormMode, alpha: f64, algorithm: Algorithm) -> ContinualConfig {
    ContinualConfig {
        arch: Architecture::small_mnist().with_layer_norm(layer_norm),
        optim: OptimConfig::sgd(alpha),
        algorithm,
        tasks: TASKS,
        ..ContinualConfig::default()
    }
}

fn run_systems(data: &Dataset) -> Result<Vec<Runs>, String> {
    let systems: Vec<(&'static str, ContinualConfig)> = vec![
        ("base", small(LayerNormMode::None, 0.05, Algorithm::Base)),
        ("swr", small(LayerNormMode::None, 0.05, Algorithm::Swr(SwrConfig::gradient_threshold_resample(2048, 1e-6)))),
        (
            "cbp+ln",
            small(
                LayerNormMode::Standard,
                0.1,
                Algorithm::Cbp(CbpConfig { replacement_rate: 1e-5, maturity_threshold: 1 }),
            ),
        ),
        ("swr+ln", small(LayerNormMode::Standard, 0.1, Algorithm::Swr(SwrConfig::gradient_threshold_resample(2048, 1e-6)))),
    ];
    let jobs: Vec<(usize, u64)> = (0..systems.len()).flat_map(|s| (0..SEEDS).map(move |seed| (s, seed))).collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(s, seed)| {
            let t = Instant::now();
            let r = run_experiment(&systems[s].1, data, seed);
            eprintln!("  {} seed {seed}: {:.0}s", systems[s].0, t.elapsed().as_secs_f64());
            (s, r)
        })
        .collect();
    let mut runs: Vec<Runs> = systems
        .iter()
        .map(|(label, _)| Runs { label, accuracy: Vec::new(), dead: Vec::new() })
        .collect();
    for (s, r) in results {
        let r = r.map_err(|e| format!("{} failed: {e}", systems[s].0))?;
        runs[s].accuracy.push(r.records.iter().map(|x| x.avg_online_accuracy).collect());
        runs[s].dead.push(r.records.iter().map(|x| x.dead_unit_fraction).collect());
    }
    Ok(runs)
}

fn data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

fn describe(r: &Runs) -> String {
    let (e, es) = r.early();
    let (l, ls) = r.late();
    format!("{} early {e:.4}±{es:.4} late {l:.4}±{ls:.4}", r.label)
}

fn experiments() -> Vec<(u32, &'static str, Outcome)> {
    let names = [
        (8, "loss of plasticity (base)"),
        (9, "SWR maintains plasticity"),
        (10, "layer norm hurts unit reinit"),
        (11, "dead-unit correlate"),
    ];
    let fail_all = |msg: String| names.iter().map(|&(n, s)| (n, s, Err(msg.clone()))).collect();
    let dir = data_dir();
    let data = match load_mnist_train(&dir) {
        Ok(d) => d,
        Err(e) => return fail_all(format!("MNIST training set not loadable from {}: {e}", dir.display())),
    };
    let t = Instant::now();
    let runs = match run_systems(&data) {
        Ok(r) => r,
        Err(e) => return fail_all(e),
    };
    eprintln!("  {} runs in {:.0}s", runs.len() as u64 * SEEDS, t.elapsed().as_secs_f64());
    let (base, swr, cbp_ln, swr_ln) = (&runs[0], &runs[1], &runs[2], &runs[3]);

    let (be, bes) = base.early();
    let (bl, bls) = base.late();
    let pooled = (bes * bes + bls * bls).sqrt();
    let c8 = check(
        be - bl > 2.0 * pooled,
        format!("{}; drop {:.4} vs 2×pooled SE {:.4}", describe(base), be - bl, 2.0 * pooled),
    );

    let (se, ses) = swr.early();
    let (sl, _) = swr.late();
    let c9 = check(
        (sl - se).abs() <= ses && sl > bl,
        format!(
            "{}; |late-early| {:.4} vs early SE {ses:.4}; late {sl:.4} vs base late {bl:.4}",
            describe(swr),
            (sl - se).abs()
        ),
    );

    let c10 = check(
        cbp_ln.drop() > swr_ln.drop(),
        format!(
            "{}; {}; drops {:.4} vs {:.4}",
            describe(cbp_ln),
            describe(swr_ln),
            cbp_ln.drop(),
            swr_ln.drop()
        ),
    );

    let (b0, b_end, s_end) = (base.dead_at(0), base.dead_at(TASKS - 1), swr.dead_at(TASKS - 1));
    let c11 = check(
        b_end > b0 && s_end < b_end,
        format!("base dead fraction task 1 {b0:.4} -> task {TASKS} {b_end:.4}; swr task {TASKS} {s_end:.4}"),
    );
    vec![
        (8, names[0].1, c8),
        (9, names[1].1, c9),
        (10, names[2].1, c10),
        (11, names[3].1, c11),
    ]
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, &str, Outcome)> = vec![
        (1, "gradient exactness", gradient_exactness()),
        (2, "pruning oracle", pruning_oracle()),
        (3, "reinit distribution", reinit_distribution()),
        (4, "stable rank", stable_rank_oracle()),
        (5, "reparameterized layer norm", layer_norm_identity()),
        (6, "unit-reset semantics", unit_reset_semantics()),
        (7, "determinism", determinism()),
    ];
    for (n, name, r) in &results {
        print_line(*n, name, r);
    }
    // `cargo test --test acceptance -- --quick` stops after criterion 7.
    if std::env::args().any(|a| a == "--quick") {
        let failed = results.iter().filter(|r| r.2.is_err()).count();
        println!("acceptance (quick, criteria 8-11 not run): {} passed, {failed} failed", results.len() - failed);
        return if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE };
    }
    let exp = experiments();
    for (n, name, r) in &exp {
        print_line(*n, name, r);
    }
    results.extend(exp);
    let failed = results.iter().filter(|r| r.2.is_err()).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn print_line(n: u32, name: &str, r: &Outcome) {
    match r {
        Ok(d) => println!("criterion {n:>2} PASS  {name}: {d}"),
        Err(d) => println!("criterion {n:>2} FAIL  {name}: {d}"),
    }
}
