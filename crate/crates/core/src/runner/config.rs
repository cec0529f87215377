//! Line-oriented configuration files.
//!
//! ```text
//! # comment
//! [network]
//! widths = 784, 10, 10, 10, 10
//! layer_norm = standard
//!
//! [algorithm]
//! name = swr
//! tau = 2048
//! k = 1e-6
//! ```
//!
//! Keys are addressed as `section.key`. Unknown keys, and keys that do not
//! apply to the chosen optimizer or algorithm, are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::continual::ContinualConfig;
use crate::data::{default_data_dir, DATA_DIR_ENV, TRAIN_IMAGES, TRAIN_LABELS};
use crate::error::{Error, Result};
use crate::nn::{LayerNormMode, ParamId, ParamKind};
use crate::optim::OptimizerKind;
use crate::reinit::{
    Algorithm, CbpConfig, PruningKind, RedoConfig, ReinitMethod, ShrinkPerturbConfig, SwrConfig,
    SwrScope, UtilityKind,
};

/// Where the training images and labels live.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DataPaths {
    pub dir: Option<PathBuf>,
    pub images: Option<PathBuf>,
    pub labels: Option<PathBuf>,
}

impl DataPaths {
    /// Explicit file paths win; otherwise files are looked up in
    /// `$PLASTICITY_DATA_DIR`, then `dir`, then `data/mnist`.
    pub fn resolve(&self) -> (PathBuf, PathBuf) {
        let dir = if std::env::var_os(DATA_DIR_ENV).is_some() {
            default_data_dir()
        } else {
            self.dir.clone().unwrap_or_else(default_data_dir)
        };
        (
            self.images.clone().unwrap_or_else(|| dir.join(TRAIN_IMAGES)),
            self.labels.clone().unwrap_or_else(|| dir.join(TRAIN_LABELS)),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: DataPaths,
    pub run: ContinualConfig,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: DataPaths::default(),
            run: ContinualConfig::default(),
            seeds: vec![0],
            output: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.run.validate()?;
        if self.seeds.is_empty() {
            return Err(key_err("experiment.seeds", "at least one seed is required"));
        }
        let l2 = self.run.optim.l2_lambda;
        if matches!(self.run.algorithm, Algorithm::L2 | Algorithm::ShrinkPerturb(_)) && l2 <= 0.0 {
            return Err(key_err("optimizer.l2_lambda", "must be > 0 for l2 and shrink_perturb"));
        }
        Ok(())
    }

    pub fn algorithm_name(&self) -> &'static str {
        self.run.algorithm.name()
    }
}

fn key_err(key: &str, message: impl Into<String>) -> Error {
    Error::ConfigKey {
        key: key.to_string(),
        message: message.into(),
    }
}

/// Ordered `section.key -> (value, line)` pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, usize)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut section = String::new();
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| Error::ConfigSyntax {
                    line: line_no,
                    message: format!("unterminated section header `{line}`"),
                })?;
                section = name.trim().to_string();
                if section.is_empty() || section.contains(char::is_whitespace) {
                    return Err(Error::ConfigSyntax {
                        line: line_no,
                        message: format!("bad section name `{name}`"),
                    });
                }
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigSyntax {
                line: line_no,
                message: format!("expected `key = value`, found `{line}`"),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::ConfigSyntax {
                    line: line_no,
                    message: "empty key".into(),
                });
            }
            let path = if section.is_empty() {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            if entries
                .insert(path.clone(), (value.trim().to_string(), line_no))
                .is_some()
            {
                return Err(Error::ConfigSyntax {
                    line: line_no,
                    message: format!("duplicate key `{path}`"),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), (value.to_string(), 0));
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|(v, _)| v)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    /// Splits off every `section.*` entry, with the section prefix removed.
    pub fn take_section(&mut self, section: &str) -> Vec<(String, String)> {
        let prefix = format!("{section}.");
        let keys: Vec<String> = self
            .entries
            .keys()
            .filter(|k| k.starts_with(&prefix))
            .cloned()
            .collect();
        keys.into_iter()
            .map(|k| {
                let (v, _) = self.entries.remove(&k).expect("key listed");
                (k[prefix.len()..].to_string(), v)
            })
            .collect()
    }
}

struct Fields<'a> {
    raw: &'a RawConfig,
    used: Vec<&'a str>,
}

impl<'a> Fields<'a> {
    fn str(&mut self, key: &'a str) -> Option<&'a str> {
        let v = self.raw.get(key)?;
        self.used.push(key);
        Some(v)
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &'a str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.str(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| key_err(key, format!("cannot parse `{v}`: {e}"))),
        }
    }

    fn list<T: std::str::FromStr>(&mut self, key: &'a str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        match self.str(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|s| {
                    let s = s.trim();
                    s.parse::<T>()
                        .map_err(|e| key_err(key, format!("cannot parse `{s}`: {e}")))
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    fn choice<T: Copy>(&mut self, key: &'a str, options: &[(&str, T)]) -> Result<Option<T>> {
        match self.str(key) {
            None => Ok(None),
            Some(v) => options
                .iter()
                .find(|(name, _)| name.eq_ignore_ascii_case(v))
                .map(|(_, t)| Some(*t))
                .ok_or_else(|| {
                    let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                    key_err(key, format!("`{v}` is not one of {}", names.join(", ")))
                }),
        }
    }

    fn reject_unused(&self) -> Result<()> {
        for key in self.raw.keys() {
            if !self.used.contains(&key) {
                return Err(key_err(key, "unknown or inapplicable key"));
            }
        }
        Ok(())
    }
}

const LAYER_NORM: &[(&str, LayerNormMode)] = &[
    ("none", LayerNormMode::None),
    ("standard", LayerNormMode::Standard),
    ("reparameterized", LayerNormMode::Reparameterized),
];
const OPTIMIZERS: &[(&str, OptimizerKind)] = &[
    ("sgd", OptimizerKind::Sgd),
    ("sgdw_momentum", OptimizerKind::SgdwMomentum),
    ("adamw", OptimizerKind::AdamW),
];
const UTILITIES: &[(&str, UtilityKind)] = &[
    ("gradient", UtilityKind::Gradient),
    ("magnitude", UtilityKind::Magnitude),
];
const PRUNING: &[(&str, PruningKind)] = &[
    ("threshold", PruningKind::Threshold),
    ("proportional", PruningKind::Proportional),
];
const REINIT: &[(&str, ReinitMethod)] = &[
    ("resample", ReinitMethod::Resample),
    ("mean", ReinitMethod::Mean),
];

fn name_of<T: PartialEq>(options: &[(&'static str, T)], value: &T) -> &'static str {
    options
        .iter()
        .find(|(_, t)| t == value)
        .map(|(n, _)| *n)
        .expect("every variant is listed")
}

fn parse_param_id(s: &str) -> Option<ParamId> {
    let (layer, kind) = s.trim().split_once('.')?;
    let layer = layer.strip_prefix("layer")?.parse().ok()?;
    let kind = match kind {
        "weight" => ParamKind::Weight,
        "bias" => ParamKind::Bias,
        "gamma" => ParamKind::Gamma,
        "beta" => ParamKind::Beta,
        _ => return None,
    };
    Some(ParamId { layer, kind })
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    from_raw(&RawConfig::parse(text)?)
}

pub fn from_raw(raw: &RawConfig) -> Result<ExperimentConfig> {
    let mut f = Fields { raw, used: Vec::new() };
    let mut cfg = ExperimentConfig::default();

    cfg.data.dir = f.str("data.dir").map(PathBuf::from);
    cfg.data.images = f.str("data.images").map(PathBuf::from);
    cfg.data.labels = f.str("data.labels").map(PathBuf::from);

    if let Some(widths) = f.list::<i64>("network.widths")? {
        if let Some(w) = widths.iter().find(|&&w| w < 1) {
            return Err(key_err("network.widths", format!("width {w} must be >= 1")));
        }
        cfg.run.arch.widths = widths.into_iter().map(|w| w as usize).collect();
    }
    if let Some(mode) = f.choice("network.layer_norm", LAYER_NORM)? {
        cfg.run.arch.layer_norm = mode;
    }

    let o = &mut cfg.run.optim;
    if let Some(kind) = f.choice("optimizer.kind", OPTIMIZERS)? {
        o.kind = kind;
    }
    if let Some(v) = f.parse("optimizer.alpha")? {
        o.alpha = v;
    }
    match o.kind {
        OptimizerKind::Sgd => {}
        OptimizerKind::SgdwMomentum => {
            if let Some(v) = f.parse("optimizer.momentum")? {
                o.momentum = v;
            }
        }
        OptimizerKind::AdamW => {
            if let Some(v) = f.parse("optimizer.beta1")? {
                o.beta1 = v;
            }
            if let Some(v) = f.parse("optimizer.beta2")? {
                o.beta2 = v;
            }
            if let Some(v) = f.parse("optimizer.adam_epsilon")? {
                o.adam_epsilon = v;
            }
        }
    }
    let explicit_l2: Option<f64> = f.parse("optimizer.l2_lambda")?;

    let name = f.str("algorithm.name").unwrap_or("base").to_ascii_lowercase();
    cfg.run.algorithm = match name.as_str() {
        "base" => Algorithm::Base,
        "l2" => Algorithm::L2,
        "shrink_perturb" => Algorithm::ShrinkPerturb(ShrinkPerturbConfig {
            sigma2: f.parse("algorithm.sigma2")?.unwrap_or(1e-7),
        }),
        "cbp" => {
            let d = CbpConfig::tuned_large();
            Algorithm::Cbp(CbpConfig {
                replacement_rate: f.parse("algorithm.replacement_rate")?.unwrap_or(d.replacement_rate),
                maturity_threshold: f.parse("algorithm.maturity_threshold")?.unwrap_or(d.maturity_threshold),
            })
        }
        "redo" => {
            let d = RedoConfig::tuned_large();
            Algorithm::Redo(RedoConfig {
                frequency: f.parse("algorithm.frequency")?.unwrap_or(d.frequency),
                threshold: f.parse("algorithm.threshold")?.unwrap_or(d.threshold),
            })
        }
        "swr" => {
            let d = SwrConfig::tuned_large();
            let scope = match f.str("algorithm.scope") {
                None => d.scope,
                Some(s) if s.eq_ignore_ascii_case("all") => SwrScope::All,
                Some(s) if s.eq_ignore_ascii_case("weights") => SwrScope::Weights,
                Some(s) => SwrScope::Tensors(
                    s.split(',')
                        .map(|p| {
                            parse_param_id(p).ok_or_else(|| {
                                key_err("algorithm.scope", format!("`{}` is not a tensor name like layer0.weight", p.trim()))
                            })
                        })
                        .collect::<Result<_>>()?,
                ),
            };
            Algorithm::Swr(SwrConfig {
                tau: f.parse("algorithm.tau")?.unwrap_or(d.tau),
                k: f.parse("algorithm.k")?.unwrap_or(d.k),
                utility: f.choice("algorithm.utility", UTILITIES)?.unwrap_or(d.utility),
                pruning: f.choice("algorithm.pruning", PRUNING)?.unwrap_or(d.pruning),
                reinit: f.choice("algorithm.reinit", REINIT)?.unwrap_or(d.reinit),
                scope,
            })
        }
        other => {
            return Err(key_err(
                "algorithm.name",
                format!("`{other}` is not one of base, l2, shrink_perturb, cbp, redo, swr"),
            ))
        }
    };
    cfg.run.optim.l2_lambda = match (&cfg.run.algorithm, explicit_l2) {
        (_, Some(v)) => v,
        (Algorithm::L2 | Algorithm::ShrinkPerturb(_), None) => 1e-4 / cfg.run.optim.alpha,
        _ => 0.0,
    };

    if let Some(v) = f.parse("experiment.tasks")? {
        cfg.run.tasks = v;
    }
    if let Some(v) = f.parse("experiment.batch_size")? {
        cfg.run.batch_size = v;
    }
    if let Some(v) = f.parse("experiment.subsample")? {
        cfg.run.subsample = v;
    }
    if let Some(v) = f.parse("experiment.probe_size")? {
        cfg.run.probe_size = v;
    }
    if let Some(v) = f.list("experiment.seeds")? {
        cfg.seeds = v;
    }
    if let Some(v) = f.str("experiment.output") {
        cfg.output = PathBuf::from(v);
    }

    f.reject_unused()?;
    validate_with_keys(&cfg)?;
    Ok(cfg)
}

/// Re-raises validation failures against the key that caused them.
fn validate_with_keys(cfg: &ExperimentConfig) -> Result<()> {
    let attach = |key: &str, r: Result<()>| r.map_err(|e| key_err(key, e.to_string()));
    attach("network.widths", cfg.run.arch.validate())?;
    attach("optimizer", cfg.run.optim.validate())?;
    let algo_key = match &cfg.run.algorithm {
        Algorithm::Swr(_) => "algorithm.k",
        Algorithm::Cbp(_) => "algorithm.replacement_rate",
        Algorithm::Redo(_) => "algorithm.threshold",
        Algorithm::ShrinkPerturb(_) => "algorithm.sigma2",
        _ => "algorithm.name",
    };
    attach(algo_key, cfg.run.algorithm.validate())?;
    match cfg.validate() {
        Ok(()) => Ok(()),
        Err(e @ Error::ConfigKey { .. }) => Err(e),
        Err(e) => Err(key_err("experiment", e.to_string())),
    }
}

/// Formats a float so it parses back to the same value.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e6).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(", ")
}

/// Writes every setting explicitly, in a form [`parse_config`] accepts.
pub fn serialize_config(cfg: &ExperimentConfig) -> String {
    let mut s = String::new();
    let run = &cfg.run;
    let paths = [("dir", &cfg.data.dir), ("images", &cfg.data.images), ("labels", &cfg.data.labels)];
    if paths.iter().any(|(_, p)| p.is_some()) {
        s.push_str("[data]\n");
        for (key, p) in paths {
            if let Some(p) = p {
                let _ = writeln!(s, "{key} = {}", p.display());
            }
        }
        s.push('\n');
    }
    let _ = writeln!(s, "[network]\nwidths = {}", join(&run.arch.widths, |w| w.to_string()));
    let _ = writeln!(s, "layer_norm = {}\n", name_of(LAYER_NORM, &run.arch.layer_norm));

    let o = &run.optim;
    let _ = writeln!(s, "[optimizer]\nkind = {}", name_of(OPTIMIZERS, &o.kind));
    let _ = writeln!(s, "alpha = {}", fmt_f64(o.alpha));
    match o.kind {
        OptimizerKind::Sgd => {}
        OptimizerKind::SgdwMomentum => {
            let _ = writeln!(s, "momentum = {}", fmt_f64(o.momentum));
        }
        OptimizerKind::AdamW => {
            let _ = writeln!(s, "beta1 = {}", fmt_f64(o.beta1));
            let _ = writeln!(s, "beta2 = {}", fmt_f64(o.beta2));
            let _ = writeln!(s, "adam_epsilon = {}", fmt_f64(o.adam_epsilon));
        }
    }
    let _ = writeln!(s, "l2_lambda = {}\n", fmt_f64(o.l2_lambda));

    let _ = writeln!(s, "[algorithm]\nname = {}", run.algorithm.name());
    match &run.algorithm {
        Algorithm::Base | Algorithm::L2 => {}
        Algorithm::ShrinkPerturb(c) => {
            let _ = writeln!(s, "sigma2 = {}", fmt_f64(c.sigma2));
        }
        Algorithm::Cbp(c) => {
            let _ = writeln!(s, "replacement_rate = {}", fmt_f64(c.replacement_rate));
            let _ = writeln!(s, "maturity_threshold = {}", c.maturity_threshold);
        }
        Algorithm::Redo(c) => {
            let _ = writeln!(s, "frequency = {}", c.frequency);
            let _ = writeln!(s, "threshold = {}", fmt_f64(c.threshold));
        }
        Algorithm::Swr(c) => {
            let _ = writeln!(s, "tau = {}", c.tau);
            let _ = writeln!(s, "k = {}", fmt_f64(c.k));
            let _ = writeln!(s, "utility = {}", name_of(UTILITIES, &c.utility));
            let _ = writeln!(s, "pruning = {}", name_of(PRUNING, &c.pruning));
            let _ = writeln!(s, "reinit = {}", name_of(REINIT, &c.reinit));
            let scope = match &c.scope {
                SwrScope::All => "all".to_string(),
                SwrScope::Weights => "weights".to_string(),
                SwrScope::Tensors(ids) => join(ids, |id| id.to_string()),
            };
            let _ = writeln!(s, "scope = {scope}");
        }
    }
    s.push('\n');
    let _ = writeln!(s, "[experiment]\ntasks = {}", run.tasks);
    let _ = writeln!(s, "batch_size = {}", run.batch_size);
    let _ = writeln!(s, "subsample = {}", fmt_f64(run.subsample));
    let _ = writeln!(s, "probe_size = {}", run.probe_size);
    let _ = writeln!(s, "seeds = {}", join(&cfg.seeds, |v| v.to_string()));
    let _ = writeln!(s, "output = {}", cfg.output.display());
    s
}
