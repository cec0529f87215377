//! Grid sweeps: every combination of the listed values, several seeds each,
//! ranked by mean area under the average-online-accuracy curve.
//!
//! A sweep file is a regular config plus two extra sections:
//!
//! ```text
//! [sweep]
//! runs = 10
//!
//! [grid]
//! algorithm.tau = 256 | 512 | 1024
//! algorithm.k = 1e-6 | 1e-5
//! ```
//!
//! Grid values are separated by `|` so that list-valued keys such as
//! `network.widths` can be swept too.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{from_raw, serialize_config, ExperimentConfig, RawConfig};
use super::{accuracy_auc, execute_run_to, load_training_set, mean_and_stderr, RunTable};
use crate::error::{Error, Result};

pub const DEFAULT_RUNS_PER_CELL: usize = 10;
pub const SUMMARY_FILE: &str = "summary.csv";
const FAILED_SUFFIX: &str = ".failed";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: RawConfig,
    /// `(key, values)` in file order; the last key varies fastest.
    pub grid: Vec<(String, Vec<String>)>,
    pub runs_per_cell: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub assignments: Vec<(String, String)>,
    pub config: ExperimentConfig,
}

impl Cell {
    pub fn dir_name(&self) -> String {
        format!("cell-{:03}", self.index)
    }
}

pub fn parse_sweep(text: &str) -> Result<SweepSpec> {
    let mut base = RawConfig::parse(text)?;
    let mut runs_per_cell = DEFAULT_RUNS_PER_CELL;
    for (key, value) in base.take_section("sweep") {
        match key.as_str() {
            "runs" => {
                runs_per_cell = value.parse().map_err(|e| Error::ConfigKey {
                    key: "sweep.runs".into(),
                    message: format!("cannot parse `{value}`: {e}"),
                })?;
                if runs_per_cell == 0 {
                    return Err(Error::ConfigKey {
                        key: "sweep.runs".into(),
                        message: "must be >= 1".into(),
                    });
                }
            }
            _ => {
                return Err(Error::ConfigKey {
                    key: format!("sweep.{key}"),
                    message: "unknown key".into(),
                })
            }
        }
    }
    let mut grid = Vec::new();
    for (key, value) in base.take_section("grid") {
        let path = format!("grid.{key}");
        if key.starts_with("data.") || key == "experiment.seeds" || key == "experiment.output" {
            return Err(Error::ConfigKey {
                key: path,
                message: "cannot be swept".into(),
            });
        }
        let values: Vec<String> = value.split('|').map(|v| v.trim().to_string()).collect();
        if values.iter().any(String::is_empty) {
            return Err(Error::ConfigKey {
                key: path,
                message: "empty value in list".into(),
            });
        }
        grid.push((key, values));
    }
    // take_section returns keys sorted; keep that order so cell numbering is stable.
    let spec = SweepSpec {
        base,
        grid,
        runs_per_cell,
    };
    spec.cells()?;
    Ok(spec)
}

impl SweepSpec {
    /// Expands the cross product and validates every resulting config.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        let mut combos: Vec<Vec<(String, String)>> = vec![Vec::new()];
        for (key, values) in &self.grid {
            combos = combos
                .into_iter()
                .flat_map(|prefix| {
                    values.iter().map(move |v| {
                        let mut c = prefix.clone();
                        c.push((key.clone(), v.clone()));
                        c
                    })
                })
                .collect();
        }
        combos
            .into_iter()
            .enumerate()
            .map(|(index, assignments)| {
                let mut raw = self.base.clone();
                for (k, v) in &assignments {
                    raw.set(k, v);
                }
                let mut config = from_raw(&raw)?;
                config.seeds = (0..self.runs_per_cell as u64).collect();
                Ok(Cell {
                    index,
                    assignments,
                    config,
                })
            })
            .collect()
    }

    pub fn output_dir(&self) -> Result<PathBuf> {
        Ok(from_raw(&self.base)?.output)
    }
}

/// Mean AUC of one cell, computed from its run CSVs.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub name: String,
    pub completed: usize,
    pub failed: usize,
    pub mean_auc: f64,
    pub stderr_auc: f64,
}

impl CellSummary {
    pub fn eligible(&self) -> bool {
        self.failed == 0 && self.completed > 0
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub cells: Vec<Cell>,
    /// Same order as `cells`.
    pub summaries: Vec<CellSummary>,
    pub winner: Option<usize>,
    pub summary_path: PathBuf,
}

fn seed_file(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("seed_{seed}.csv"))
}

/// Runs every cell and seed on a pool of `jobs` threads, then ranks the
/// cells from the CSV files they produced. Failed runs leave a
/// `seed_<S>.csv.failed` file with the error and do not stop the sweep.
pub fn run_sweep(spec: &SweepSpec, jobs: usize) -> Result<SweepOutcome> {
    let cells = spec.cells()?;
    let out = spec.output_dir()?;
    let dataset = load_training_set(&from_raw(&spec.base)?.data)?;
    for cell in &cells {
        let dir = out.join(cell.dir_name());
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("config.txt"), serialize_config(&cell.config))?;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::State(e.to_string()))?;
    let jobs: Vec<(usize, u64)> = cells
        .iter()
        .flat_map(|c| c.config.seeds.iter().map(move |&s| (c.index, s)))
        .collect();
    let results: Vec<(usize, u64, Result<()>)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(ci, seed)| {
                let cell = &cells[ci];
                let path = seed_file(&out.join(cell.dir_name()), seed);
                let res = fs::File::create(&path)
                    .map_err(Error::from)
                    .and_then(|f| execute_run_to(&cell.config, &dataset, seed, f, |_| {}).map(|_| ()));
                (ci, seed, res)
            })
            .collect()
    });

    for (ci, seed, res) in &results {
        let path = seed_file(&out.join(cells[*ci].dir_name()), *seed);
        let marker = PathBuf::from(format!("{}{FAILED_SUFFIX}", path.display()));
        match res {
            Ok(()) => {
                if marker.exists() {
                    fs::remove_file(&marker)?;
                }
            }
            Err(e) => {
                log::warn!("{} seed {seed} failed: {e}", cells[*ci].dir_name());
                fs::write(&marker, format!("{e}\n"))?;
            }
        }
    }

    let dirs: Vec<PathBuf> = cells.iter().map(|c| out.join(c.dir_name())).collect();
    let summaries = rank_cells(&dirs)?;
    let winner = best_cell(&summaries);
    let summary_path = out.join(SUMMARY_FILE);
    write_summary(&summary_path, spec, &cells, &summaries, winner)?;
    Ok(SweepOutcome {
        cells,
        summaries,
        winner,
        summary_path,
    })
}

/// Summarises each cell directory from the files in it. This is all the
/// ranking depends on, so it can be re-run on a finished sweep.
pub fn rank_cells(dirs: &[PathBuf]) -> Result<Vec<CellSummary>> {
    dirs.iter()
        .map(|dir| {
            let mut aucs = Vec::new();
            let mut failed = 0;
            let mut entries: Vec<PathBuf> = fs::read_dir(dir)?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<_>>()?;
            entries.sort();
            for path in entries {
                let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
                if !name.starts_with("seed_") {
                    continue;
                }
                if name.ends_with(FAILED_SUFFIX) {
                    failed += 1;
                } else if name.ends_with(".csv") {
                    let failed_marker = PathBuf::from(format!("{}{FAILED_SUFFIX}", path.display()));
                    if failed_marker.exists() {
                        continue;
                    }
                    let table = RunTable::read(&path)?;
                    let acc = table.column("avg_online_accuracy").ok_or_else(|| {
                        Error::Input(format!("{} has no avg_online_accuracy column", path.display()))
                    })?;
                    aucs.push(accuracy_auc(&acc));
                }
            }
            let (mean_auc, stderr_auc) = mean_and_stderr(&aucs);
            Ok(CellSummary {
                name: dir
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                completed: aucs.len(),
                failed,
                mean_auc,
                stderr_auc,
            })
        })
        .collect()
}

/// Highest mean AUC among cells with no failed runs; ties go to the
/// earlier cell.
pub fn best_cell(summaries: &[CellSummary]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in summaries.iter().enumerate() {
        if !s.eligible() {
            continue;
        }
        if best.is_none_or(|b| s.mean_auc > summaries[b].mean_auc) {
            best = Some(i);
        }
    }
    best
}

fn write_summary(
    path: &Path,
    spec: &SweepSpec,
    cells: &[Cell],
    summaries: &[CellSummary],
    winner: Option<usize>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["cell".to_string()];
    header.extend(spec.grid.iter().map(|(k, _)| k.clone()));
    header.extend(
        ["runs", "completed", "failed", "mean_auc", "stderr_auc", "best"]
            .iter()
            .map(|s| s.to_string()),
    );
    w.write_record(&header)?;
    for (i, (cell, s)) in cells.iter().zip(summaries).enumerate() {
        let mut row = vec![s.name.clone()];
        row.extend(cell.assignments.iter().map(|(_, v)| v.clone()));
        row.push(cell.config.seeds.len().to_string());
        row.push(s.completed.to_string());
        row.push(s.failed.to_string());
        row.push(format!("{:?}", s.mean_auc));
        row.push(format!("{:?}", s.stderr_auc));
        row.push((winner == Some(i)).to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
