//! Permuted-MNIST task stream and the continual training loop.
//!
//! Every task applies one fixed pixel permutation to the same pool of
//! training images and makes a single pass over it in mini-batches. Online
//! accuracy is read off each batch before the network updates on it.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, CLASSES, PIXELS};
use crate::error::{Error, Result};
use crate::metrics::{self, GradMagnitude, MetricsRecord};
use crate::nn::{accuracy, one_hot, Architecture, Network};
use crate::optim::{OptimConfig, Optimizer};
use crate::reinit::{Algorithm, Intervention, UpdateContext};
use crate::rng::{stream_rng, Stream};
use crate::tensor::Matrix;

pub const DEFAULT_PROBE_SIZE: usize = 1500;

/// Deterministic bijection on `0..784` for task `k`.
pub fn permutation_for_task(seed: u64, task: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..PIXELS).collect();
    perm.shuffle(&mut stream_rng(seed, Stream::Permutation, task as u64));
    perm
}

/// Everything that defines a run apart from data location and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinualConfig {
    pub arch: Architecture,
    pub optim: OptimConfig,
    pub algorithm: Algorithm,
    pub tasks: usize,
    pub batch_size: usize,
    /// Fraction of the training set that makes up each task, in `(0, 1]`.
    pub subsample: f64,
    pub probe_size: usize,
}

impl Default for ContinualConfig {
    fn default() -> Self {
        Self {
            arch: Architecture::large_mnist(),
            optim: OptimConfig::sgd(0.05),
            algorithm: Algorithm::Base,
            tasks: 1000,
            batch_size: 30,
            subsample: 1.0,
            probe_size: DEFAULT_PROBE_SIZE,
        }
    }
}

impl ContinualConfig {
    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        self.optim.validate()?;
        self.algorithm.validate()?;
        if self.arch.widths.first() != Some(&PIXELS) {
            return Err(Error::Config(format!("input width must be {PIXELS}")));
        }
        if self.arch.widths.last() != Some(&CLASSES) {
            return Err(Error::Config(format!("output width must be {CLASSES}")));
        }
        if self.tasks == 0 {
            return Err(Error::Config("tasks must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::Config(format!("subsample must be in (0,1], got {}", self.subsample)));
        }
        if self.probe_size == 0 {
            return Err(Error::Config("probe size must be >= 1".into()));
        }
        Ok(())
    }
}

/// The sequence of permuted tasks over a fixed pool of samples.
#[derive(Debug, Clone)]
pub struct TaskStream<'a> {
    dataset: &'a Dataset,
    seed: u64,
    tasks: usize,
    batch_size: usize,
    samples: Vec<usize>,
}

impl<'a> TaskStream<'a> {
    /// Uses every sample of `dataset` in every task.
    pub fn new(dataset: &'a Dataset, seed: u64, tasks: usize, batch_size: usize) -> Self {
        Self::with_samples(dataset, seed, tasks, batch_size, (0..dataset.len()).collect())
    }

    pub fn with_samples(
        dataset: &'a Dataset,
        seed: u64,
        tasks: usize,
        batch_size: usize,
        samples: Vec<usize>,
    ) -> Self {
        Self {
            dataset,
            seed,
            tasks,
            batch_size,
            samples,
        }
    }

    /// Draws `round(fraction · N)` samples once, keyed by the seed.
    pub fn subsampled(dataset: &'a Dataset, seed: u64, tasks: usize, batch_size: usize, fraction: f64) -> Self {
        let n = dataset.len();
        let keep = ((fraction * n as f64).round() as usize).clamp(1.min(n), n);
        let mut idx: Vec<usize> = (0..n).collect();
        if keep < n {
            idx.shuffle(&mut stream_rng(seed, Stream::Subsample, 0));
            idx.truncate(keep);
            idx.sort_unstable();
        }
        Self::with_samples(dataset, seed, tasks, batch_size, idx)
    }

    pub fn tasks(&self) -> usize {
        self.tasks
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn samples_per_task(&self) -> usize {
        self.samples.len()
    }

    pub fn updates_per_task(&self) -> usize {
        self.samples.len().div_ceil(self.batch_size)
    }

    pub fn dataset(&self) -> &Dataset {
        self.dataset
    }

    pub fn permutation(&self, task: usize) -> Vec<usize> {
        permutation_for_task(self.seed, task)
    }

    /// Sample order for `task`: a fresh seeded shuffle of the pool.
    pub fn order(&self, task: usize) -> Vec<usize> {
        let mut order = self.samples.clone();
        order.shuffle(&mut stream_rng(self.seed, Stream::Shuffle, task as u64));
        order
    }
}

/// Network, optimizer and intervention, plus the global update counter.
#[derive(Debug, Clone)]
pub struct Learner {
    pub net: Network,
    pub optimizer: Optimizer,
    pub intervention: Intervention,
    pub step: u64,
    rng: ChaCha8Rng,
}

impl Learner {
    pub fn new(cfg: &ContinualConfig, seed: u64) -> Result<Self> {
        let net = Network::new(&cfg.arch, seed)?;
        let optimizer = Optimizer::new(cfg.optim, &net)?;
        let intervention = Intervention::new(&cfg.algorithm, &net)?;
        Ok(Self {
            net,
            optimizer,
            intervention,
            step: 0,
            rng: stream_rng(seed, Stream::Reinit, 0),
        })
    }

    /// One update on `(x, labels)`. Returns the batch's online accuracy,
    /// measured before the update, and the mean gradient magnitude.
    pub fn update(&mut self, x: &Matrix, labels: &[u8]) -> Result<(f64, f64, f64)> {
        let targets = one_hot(labels, self.net.output_width())?;
        let out = self.net.loss_and_grad(x, &targets)?;
        let acc = accuracy(&out.predictions, labels);
        let grad_mag = out.grads.mean_abs();
        self.optimizer.step(&mut self.net, &out.grads)?;
        self.intervention.after_update(UpdateContext {
            net: &mut self.net,
            grads: &out.grads,
            cache: &out.cache,
            optimizer: &mut self.optimizer,
            step: self.step,
            rng: &mut self.rng,
        })?;
        self.step += 1;
        Ok((acc, grad_mag, out.loss))
    }
}

/// Trains on one task and returns its measurements. Dead units and stable
/// rank are taken on `probe` under the task's permutation before training on
/// it starts; weight magnitude at the end.
pub fn run_task(
    learner: &mut Learner,
    stream: &TaskStream<'_>,
    task: usize,
    probe: &Dataset,
) -> Result<MetricsRecord> {
    if task >= stream.tasks() {
        return Err(Error::Input(format!("task {task} beyond the {} in the stream", stream.tasks())));
    }
    let perm = stream.permutation(task);

    let probe_idx: Vec<usize> = (0..probe.len()).collect();
    let (probe_x, _) = probe.gather_permuted(&probe_idx, &perm);
    let (_, probe_cache) = learner.net.forward(&probe_x)?;
    let dead_unit_fraction = metrics::dead_unit_fraction_from_cache(&probe_cache);
    let stable_rank = metrics::stable_rank(probe_cache.last_hidden()).value;

    let order = stream.order(task);
    let mut acc_sum = 0.0;
    let mut updates = 0;
    let mut grads = GradMagnitude::default();
    for batch in order.chunks(stream.batch_size()) {
        let (x, y) = stream.dataset().gather_permuted(batch, &perm);
        let (acc, grad_mag, loss) = learner.update(&x, &y)?;
        if !loss.is_finite() || !grad_mag.is_finite() {
            return Err(Error::NonFinite { task });
        }
        acc_sum += acc;
        grads.push_value(grad_mag);
        updates += 1;
    }
    if !learner.net.is_finite() {
        return Err(Error::NonFinite { task });
    }
    let record = MetricsRecord {
        task,
        avg_online_accuracy: if updates == 0 { 0.0 } else { acc_sum / updates as f64 },
        dead_unit_fraction,
        avg_weight_magnitude: metrics::avg_weight_magnitude(&learner.net),
        avg_gradient_magnitude: grads.mean(),
        stable_rank,
        updates,
    };
    if !record.is_finite() {
        return Err(Error::NonFinite { task });
    }
    Ok(record)
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub records: Vec<MetricsRecord>,
    pub network: Network,
    pub config: ContinualConfig,
    pub seed: u64,
}

/// `probe_size` images drawn once from the whole training set.
pub fn draw_probe(dataset: &Dataset, seed: u64, probe_size: usize) -> Dataset {
    let n = dataset.len();
    let mut rng = stream_rng(seed, Stream::Probe, 0);
    let take = probe_size.min(n);
    let mut idx: Vec<usize> = (0..n).collect();
    // partial Fisher-Yates
    for i in 0..take {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    idx.truncate(take);
    dataset.subset(&idx)
}

pub fn run_experiment(cfg: &ContinualConfig, dataset: &Dataset, seed: u64) -> Result<RunResult> {
    run_experiment_with(cfg, dataset, seed, |_| {})
}

/// Like [`run_experiment`], calling `on_task` after each finished task.
pub fn run_experiment_with(
    cfg: &ContinualConfig,
    dataset: &Dataset,
    seed: u64,
    mut on_task: impl FnMut(&MetricsRecord),
) -> Result<RunResult> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Input("training set is empty".into()));
    }
    let stream = TaskStream::subsampled(dataset, seed, cfg.tasks, cfg.batch_size, cfg.subsample);
    let probe = draw_probe(dataset, seed, cfg.probe_size);
    let mut learner = Learner::new(cfg, seed)?;
    let mut records = Vec::with_capacity(cfg.tasks);
    for task in 0..cfg.tasks {
        let record = run_task(&mut learner, &stream, task, &probe)?;
        on_task(&record);
        records.push(record);
    }
    Ok(RunResult {
        records,
        network: learner.net,
        config: cfg.clone(),
        seed,
    })
}
