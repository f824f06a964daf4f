//! Denoiser training: draw a clean graph, a time step and a noisy copy, then
//! descend on the edge BCE toward the clean graph.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{Checkpoint, NodeProfile};
use crate::datasets::{Dataset, DatasetSpec};
use crate::denoiser::{Denoiser, DenoiserConfig, Example};
use crate::error::{invalid, Error, Result};
use crate::graph::{EdgeVector, GraphSample};
use crate::kernels::{default_schedule, sample_forward, KernelKind, NoiseSchedule};
use crate::rng::{stream_rng, RngState, StreamRng};

/// Stream ids of the trainer's generators.
const INIT_STREAM: u64 = 0x7472_6169_6e00_0001;
const TRAIN_STREAM: u64 = 0x7472_6169_6e00_0002;

/// Node profiles kept in a checkpoint for drawing sizes at sample time.
pub const MAX_NODE_PROFILES: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OptimizerKind {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    Sgd,
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub kernel: KernelKind,
    pub schedule: NoiseSchedule,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// Write a checkpoint every this many epochs; 0 disables.
    #[serde(default)]
    pub checkpoint_every: usize,
}

impl TrainConfig {
    pub fn new(kernel: KernelKind, epochs: usize, seed: u64) -> Self {
        Self {
            kernel,
            schedule: default_schedule(1000).expect("T = 1000 is valid"),
            epochs,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::default(),
            seed,
            checkpoint_every: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(invalid("batch_size must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if let OptimizerKind::Adam { beta1, beta2, eps } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || eps <= 0.0 {
                return Err(invalid("Adam needs beta1, beta2 in [0, 1) and eps > 0"));
            }
        }
        Ok(())
    }
}

/// Adam moment estimates; `step` counts applied updates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], step: 0 }
    }
}

/// One bias-corrected Adam (or plain SGD) update in place.
pub fn optimizer_step(
    kind: OptimizerKind,
    params: &mut [f64],
    grads: &[f64],
    state: &mut OptimizerState,
    lr: f64,
) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(invalid("optimizer shapes do not match"));
    }
    state.step += 1;
    match kind {
        OptimizerKind::Sgd => {
            for (p, g) in params.iter_mut().zip(grads) {
                *p -= lr * g;
            }
        }
        OptimizerKind::Adam { beta1, beta2, eps } => {
            let c1 = 1.0 - beta1.powf(state.step as f64);
            let c2 = 1.0 - beta2.powf(state.step as f64);
            for i in 0..params.len() {
                let g = grads[i];
                state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
                state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
                let mhat = state.m[i] / c1;
                let vhat = state.v[i] / c2;
                params[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
    pub batches: Vec<usize>,
    pub steps: u64,
    /// Where the final checkpoint was written, if anywhere.
    pub checkpoint: Option<String>,
}

/// Draws `t` uniformly from `{1..T}` and `x_t ~ q(x_t | x_0)`.
pub fn noisy_example<R: Rng + ?Sized>(
    kind: KernelKind,
    sched: &NoiseSchedule,
    clean: &GraphSample,
    rng: &mut R,
) -> Result<Example> {
    let t = rng.gen_range(1..=sched.steps());
    let xt = sample_forward(kind, sched, clean.edges(), t, rng)?;
    debug_assert!(reachable(kind, clean.edges(), &xt), "unreachable training pair under {kind}");
    Ok(Example { noisy: clean.with_edges(xt)?, t, target: clean.edges().clone() })
}

/// Whether `xt` can be reached from `x0` under `kind`.
pub fn reachable(kind: KernelKind, x0: &EdgeVector, xt: &EdgeVector) -> bool {
    match kind {
        KernelKind::BitFlip => true,
        KernelKind::BitOne => x0.iter().zip(xt.iter()).all(|(a, b)| !a || b),
        KernelKind::BitZero => x0.iter().zip(xt.iter()).all(|(a, b)| a || !b),
    }
}

/// Owns the model, optimizer and generator across epochs.
pub struct Trainer {
    pub model: Denoiser,
    pub config: TrainConfig,
    pub optimizer: OptimizerState,
    data: Dataset,
    rng: StreamRng,
    epoch: usize,
    profiles: Vec<NodeProfile>,
}

impl Trainer {
    pub fn new(data: DatasetSpec, model: DenoiserConfig, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let dataset = Dataset::new(data)?;
        let model = Denoiser::new(model, &mut stream_rng(config.seed, INIT_STREAM))?;
        let profiles = dataset.epoch_iter(0).take(MAX_NODE_PROFILES).map(|g| NodeProfile::of(&g)).collect();
        Ok(Self {
            optimizer: OptimizerState::new(model.num_params()),
            rng: stream_rng(config.seed, TRAIN_STREAM),
            model,
            config,
            data: dataset,
            epoch: 0,
            profiles,
        })
    }

    /// Continues from a checkpoint written by [`Trainer::checkpoint`].
    pub fn resume(ckpt: &Checkpoint) -> Result<Self> {
        let (Some(data), Some(config)) = (ckpt.dataset, ckpt.train.clone()) else {
            return Err(Error::Checkpoint("checkpoint carries no training state".into()));
        };
        let mut t = Self::new(data, ckpt.model.clone(), config)?;
        t.model = ckpt.denoiser()?;
        t.optimizer = ckpt.optimizer.clone().ok_or_else(|| Error::Checkpoint("missing optimizer state".into()))?;
        t.rng = ckpt.rng.restore()?;
        t.epoch = ckpt.epoch;
        t.profiles = ckpt.node_profiles.clone();
        Ok(t)
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.data.spec().epoch_len().div_ceil(self.config.batch_size)
    }

    /// Runs one epoch; returns the mean batch loss and the batch count.
    /// A non-finite loss aborts before that batch's update is applied.
    pub fn run_epoch(&mut self) -> Result<(f64, usize)> {
        let mut graphs = self.data.epoch(self.epoch);
        graphs.shuffle(&mut self.rng);
        let (kind, bs, lr) = (self.config.kernel, self.config.batch_size, self.config.learning_rate);
        let steps = self.config.schedule.steps();
        let mut total = 0.0;
        let mut batches = 0;
        for (b, chunk) in graphs.chunks(bs).enumerate() {
            let batch = chunk
                .iter()
                .map(|g| noisy_example(kind, &self.config.schedule, g, &mut self.rng))
                .collect::<Result<Vec<_>>>()?;
            let (loss, grads) = match self.model.loss_and_grad(&batch, steps, &mut self.rng) {
                Ok(v) => v,
                Err(Error::NumericFailure(_)) => return Err(Error::Diverged { epoch: self.epoch, batch: b, loss: f64::NAN }),
                Err(e) => return Err(e),
            };
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch: self.epoch, batch: b, loss });
            }
            self.model.params.grads = grads;
            let params = &mut self.model.params;
            optimizer_step(self.config.optimizer, &mut params.values, &params.grads, &mut self.optimizer, lr)?;
            total += loss;
            batches += 1;
        }
        self.epoch += 1;
        Ok((total / batches.max(1) as f64, batches))
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut c = Checkpoint::from_model(&self.model, self.config.kernel, self.config.schedule.clone());
        c.step = self.optimizer.step;
        c.epoch = self.epoch;
        c.rng = RngState::capture(&self.rng);
        c.optimizer = Some(self.optimizer.clone());
        c.node_profiles = self.profiles.clone();
        c.dataset = Some(*self.data.spec());
        c.train = Some(self.config.clone());
        c
    }
}

/// Trains for `config.epochs` epochs. `on_epoch` sees each epoch's log line
/// and the trainer, for periodic checkpointing.
pub fn train_with<F>(
    data: DatasetSpec,
    model: DenoiserConfig,
    config: TrainConfig,
    mut on_epoch: F,
) -> Result<(TrainReport, Checkpoint)>
where
    F: FnMut(&EpochLog, &Trainer) -> Result<()>,
{
    let mut trainer = Trainer::new(data, model, config)?;
    let mut report = TrainReport::default();
    while trainer.epoch() < trainer.config.epochs {
        let start = Instant::now();
        let (loss, batches) = trainer.run_epoch()?;
        let seconds = start.elapsed().as_secs_f64();
        let log = EpochLog { epoch: trainer.epoch(), loss, seconds };
        log::info!("epoch {} loss {:.5} ({:.1}s)", log.epoch, loss, seconds);
        on_epoch(&log, &trainer)?;
        report.epoch_losses.push(loss);
        report.epoch_seconds.push(seconds);
        report.batches.push(batches);
    }
    report.steps = trainer.optimizer.step;
    Ok((report, trainer.checkpoint()))
}

pub fn train(data: DatasetSpec, model: DenoiserConfig, config: TrainConfig) -> Result<(TrainReport, Checkpoint)> {
    train_with(data, model, config, |_, _| Ok(()))
}
