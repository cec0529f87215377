//! Configuration files, per-run CSV output, grid sweeps and SVG plots.

pub mod config;
pub mod plot;
pub mod sweep;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub use config::{parse_config, serialize_config, DataPaths, ExperimentConfig, RawConfig};
pub use plot::{emit_plot, read_series, render_svg, Series};
pub use sweep::{parse_sweep, rank_cells, run_sweep, CellSummary, SweepOutcome, SweepSpec};

use crate::continual::run_experiment_with;
use crate::data::{load_dataset, Dataset};
use crate::error::{Error, Result};
use crate::metrics::MetricsRecord;

/// Column order of every run CSV.
pub const CSV_HEADER: [&str; 7] = [
    "seed",
    "task",
    "avg_online_accuracy",
    "dead_unit_fraction",
    "avg_weight_magnitude",
    "avg_gradient_magnitude",
    "stable_rank",
];

/// Shortest decimal form that parses back to the same `f64`.
fn fmt_float(v: f64) -> String {
    format!("{v:?}")
}

pub fn csv_row(seed: u64, r: &MetricsRecord) -> [String; 7] {
    [
        seed.to_string(),
        r.task.to_string(),
        fmt_float(r.avg_online_accuracy),
        fmt_float(r.dead_unit_fraction),
        fmt_float(r.avg_weight_magnitude),
        fmt_float(r.avg_gradient_magnitude),
        fmt_float(r.stable_rank),
    ]
}

pub fn load_training_set(paths: &DataPaths) -> Result<Dataset> {
    let (images, labels) = paths.resolve();
    load_dataset(&images, &labels)
}

/// Runs one seed and writes its CSV to `out`, one row per finished task.
/// On failure the rows written so far stay on disk and the error is returned.
pub fn execute_run_to<W: Write>(
    cfg: &ExperimentConfig,
    dataset: &Dataset,
    seed: u64,
    out: W,
    mut on_task: impl FnMut(&MetricsRecord),
) -> Result<Vec<MetricsRecord>> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(CSV_HEADER)?;
    writer.flush()?;
    let mut io_error = None;
    let result = run_experiment_with(&cfg.run, dataset, seed, |rec| {
        if io_error.is_none() {
            let res = writer.write_record(csv_row(seed, rec)).and_then(|_| Ok(writer.flush()?));
            if let Err(e) = res {
                io_error = Some(e);
            }
        }
        on_task(rec);
    });
    if let Some(e) = io_error {
        return Err(e.into());
    }
    writer.flush()?;
    Ok(result?.records)
}

/// Runs one seed and returns the CSV text.
pub fn execute_run(cfg: &ExperimentConfig, dataset: &Dataset, seed: u64) -> Result<String> {
    let mut buf = Vec::new();
    execute_run_to(cfg, dataset, seed, &mut buf, |_| {})?;
    String::from_utf8(buf).map_err(|e| Error::State(e.to_string()))
}

pub fn run_csv_name(cfg: &ExperimentConfig, seed: u64) -> String {
    format!("{}_seed{seed}.csv", cfg.algorithm_name())
}

/// Runs every seed in `cfg.seeds`, writing `<algorithm>_seed<S>.csv` files
/// and a copy of the resolved configuration into `cfg.output`.
pub fn run_all_seeds(cfg: &ExperimentConfig, dataset: &Dataset) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&cfg.output)?;
    fs::write(cfg.output.join("config.txt"), serialize_config(cfg))?;
    let mut written = Vec::new();
    for &seed in &cfg.seeds {
        let path = cfg.output.join(run_csv_name(cfg, seed));
        let file = fs::File::create(&path)?;
        log::info!("seed {seed} -> {}", path.display());
        execute_run_to(cfg, dataset, seed, file, |r| {
            log::debug!(
                "seed {seed} task {} acc {:.4} dead {:.3}",
                r.task,
                r.avg_online_accuracy,
                r.dead_unit_fraction
            );
        })?;
        written.push(path);
    }
    Ok(written)
}

/// One run CSV read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl RunTable {
    pub fn read(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let columns: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>().map_err(|e| {
                        Error::Input(format!("{}: row {} value `{s}`: {e}", path.display(), i + 1))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Ok(Self { columns, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

/// Mean of the per-task average online accuracy, i.e. the area under the
/// accuracy curve divided by the number of tasks.
pub fn accuracy_auc(accuracies: &[f64]) -> f64 {
    if accuracies.is_empty() {
        return f64::NAN;
    }
    accuracies.iter().sum::<f64>() / accuracies.len() as f64
}

/// Mean and standard error of the mean. A constant sample gives exactly
/// that constant and zero.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let first = values[0];
    let mean = first + values.iter().map(|v| v - first).sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt())
}
