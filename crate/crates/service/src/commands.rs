//! Implementations behind the `graphguide` subcommands.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, ValueEnum};
use graphguide::checkpoint::Checkpoint;
use graphguide::datasets::{read_graphs, write_graphs, Dataset, DatasetManifest, DatasetSpec, Family};
use graphguide::denoiser::DenoiserConfig;
use graphguide::evaluation::{evaluate as evaluate_sets, EvaluationReport};
use graphguide::kernels::default_schedule;
use graphguide::sampler::{ConstraintFile, PosteriorMode, Sampler};
use graphguide::trainer::{EpochLog, OptimizerKind, TrainConfig, Trainer};
use graphguide::KernelKind;

use crate::error::{Result, ServiceError};
use crate::session::SessionManager;

fn io_err(path: &Path, e: impl std::fmt::Display) -> ServiceError {
    ServiceError::BadRequest(format!("{}: {e}", path.display()))
}

/// Sidecar path for a dataset file.
pub fn manifest_path(data: &Path) -> PathBuf {
    let mut s = data.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let bytes = serde_json::to_vec_pretty(value).map_err(|e| io_err(path, e))?;
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

#[derive(Args, Debug, Clone)]
pub struct GenDatasetArgs {
    #[arg(long)]
    pub family: Family,
    #[arg(long, default_value_t = 200)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Writes the cached dataset and its manifest.
pub fn gen_dataset(args: &GenDatasetArgs) -> Result<()> {
    let spec = DatasetSpec::cached(args.family, args.count, args.seed);
    let graphs = Dataset::new(spec)?.epoch(0);
    write_graphs(&args.out, &graphs)?;
    write_json(&manifest_path(&args.out), &DatasetManifest::new(args.family, args.seed, args.count))?;
    log::info!("wrote {} {} graphs to {}", graphs.len(), args.family, args.out.display());
    Ok(())
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelSize {
    Full,
    Desk,
    Tiny,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizerChoice {
    Adam,
    Sgd,
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    /// Family name, or a dataset file written by `gen-dataset`.
    #[arg(long)]
    pub dataset: String,
    #[arg(long)]
    pub kernel: KernelKind,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Cached dataset size for a family name.
    #[arg(long, default_value_t = 200)]
    pub cached: usize,
    /// Stream this many fresh graphs per epoch instead of a cached set.
    #[arg(long)]
    pub per_epoch: Option<usize>,
    /// Dataset seed for a family name; defaults to `--seed`.
    #[arg(long)]
    pub data_seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = ModelSize::Desk)]
    pub model: ModelSize,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub head_dim: Option<usize>,
    #[arg(long)]
    pub time_dim: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub no_spectral: bool,
    /// Diffusion steps T.
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, value_enum, default_value_t = OptimizerChoice::Adam)]
    pub optimizer: OptimizerChoice,
    /// Rewrite `--out` every this many epochs.
    #[arg(long, default_value_t = 0)]
    pub checkpoint_every: usize,
    /// Continue from a checkpoint with training state.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Training log destination; standard output when absent.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

impl TrainArgs {
    pub fn model_config(&self) -> DenoiserConfig {
        let mut c = match self.model {
            ModelSize::Full => DenoiserConfig::full(),
            ModelSize::Desk => DenoiserConfig::desk(),
            ModelSize::Tiny => DenoiserConfig::tiny(),
        };
        c.hidden_dim = self.hidden.unwrap_or(c.hidden_dim);
        c.num_layers = self.layers.unwrap_or(c.num_layers);
        c.num_heads = self.heads.unwrap_or(c.num_heads);
        c.head_dim = self.head_dim.unwrap_or(c.head_dim);
        c.time_dim = self.time_dim.unwrap_or(c.time_dim);
        c.dropout_p = self.dropout.unwrap_or(c.dropout_p);
        c.use_spectral &= !self.no_spectral;
        c
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let mut c = TrainConfig::new(self.kernel, self.epochs, self.seed);
        c.schedule = default_schedule(self.steps)?;
        c.batch_size = self.batch;
        c.learning_rate = self.lr;
        c.checkpoint_every = self.checkpoint_every;
        if self.optimizer == OptimizerChoice::Sgd {
            c.optimizer = OptimizerKind::Sgd;
        }
        Ok(c)
    }

    /// Resolves `--dataset` to a generator spec. A file must match the
    /// graphs its manifest regenerates.
    pub fn dataset_spec(&self) -> Result<DatasetSpec> {
        if let Ok(family) = self.dataset.parse::<Family>() {
            let seed = self.data_seed.unwrap_or(self.seed);
            return Ok(match self.per_epoch {
                Some(k) => DatasetSpec::streaming(family, k, seed),
                None => DatasetSpec::cached(family, self.cached, seed),
            });
        }
        let path = PathBuf::from(&self.dataset);
        let mpath = manifest_path(&path);
        let bytes = fs::read(&mpath).map_err(|e| io_err(&mpath, e))?;
        let manifest: DatasetManifest = serde_json::from_slice(&bytes).map_err(|e| io_err(&mpath, e))?;
        let spec = DatasetSpec::cached(manifest.family, manifest.count, manifest.seed);
        if read_graphs(&path)? != Dataset::new(spec)?.epoch(0) {
            return Err(ServiceError::BadRequest(format!("{} does not match its manifest", path.display())));
        }
        Ok(spec)
    }
}

/// Trains and writes the checkpoint. On divergence the last good state is
/// written next to `--out` with a `.diverged.json` suffix.
pub fn train(args: &TrainArgs) -> Result<Checkpoint> {
    let mut trainer = match &args.resume {
        Some(path) => {
            let mut t = Trainer::resume(&Checkpoint::load(path)?)?;
            t.config.epochs = args.epochs;
            t
        }
        None => Trainer::new(args.dataset_spec()?, args.model_config(), args.train_config()?)?,
    };
    let mut sink: Box<dyn Write> = match &args.log {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| io_err(p, e))?)),
        None => Box::new(io::stdout().lock()),
    };
    while trainer.epoch() < trainer.config.epochs {
        let start = Instant::now();
        let (loss, _) = match trainer.run_epoch() {
            Ok(v) => v,
            Err(e @ graphguide::Error::Diverged { .. }) => {
                let mut snap = args.out.as_os_str().to_owned();
                snap.push(".diverged.json");
                trainer.checkpoint().save(PathBuf::from(&snap))?;
                log::error!("{e}; last good state written to {}", PathBuf::from(snap).display());
                return Err(e.into());
            }
            Err(e) => return Err(e.into()),
        };
        let record = EpochLog { epoch: trainer.epoch(), loss, seconds: start.elapsed().as_secs_f64() };
        let line = serde_json::to_string(&record).map_err(|e| ServiceError::Internal(e.to_string()))?;
        writeln!(sink, "{line}").map_err(|e| ServiceError::Internal(e.to_string()))?;
        let every = trainer.config.checkpoint_every;
        if every > 0 && trainer.epoch() % every == 0 {
            trainer.checkpoint().save(&args.out)?;
        }
    }
    sink.flush().map_err(|e| ServiceError::Internal(e.to_string()))?;
    let ckpt = trainer.checkpoint();
    ckpt.save(&args.out)?;
    Ok(ckpt)
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeChoice {
    Marginal,
    Threshold,
}

#[derive(Args, Debug, Clone)]
pub struct SampleArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Constraint file; its node count fixes the graph size.
    #[arg(long)]
    pub constraints: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Record trajectories every M steps.
    #[arg(long)]
    pub record_every: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// Trajectory file; defaults to `<out>.trajectories.ndjson`.
    #[arg(long)]
    pub trajectories: Option<PathBuf>,
    /// Node count override.
    #[arg(long)]
    pub n: Option<usize>,
    /// Must match the checkpoint's kernel when given.
    #[arg(long)]
    pub kernel: Option<KernelKind>,
    #[arg(long, value_enum, default_value_t = ModeChoice::Marginal)]
    pub mode: ModeChoice,
}

pub fn load_constraints(path: &Path) -> Result<ConstraintFile> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| io_err(path, e))
}

/// Chain `i` of the batch is `Sampler::sample_one(seed, i, ..)`.
pub fn sample(args: &SampleArgs) -> Result<()> {
    let mut sampler = Sampler::new(Checkpoint::load(&args.ckpt)?)?;
    if let Some(k) = args.kernel {
        sampler.expect_kernel(k)?;
    }
    if args.mode == ModeChoice::Threshold {
        sampler.mode = PosteriorMode::Threshold;
    }
    let constraints = args.constraints.as_deref().map(load_constraints).transpose()?.map(|c| c.build()).transpose()?;
    let mut graphs = Vec::with_capacity(args.count);
    let mut trajectories = Vec::new();
    for i in 0..args.count as u64 {
        let (g, traj) = sampler.sample_one(args.seed, i, args.n, constraints.as_ref(), args.record_every)?;
        graphs.push(g);
        trajectories.extend(traj);
    }
    write_graphs(&args.out, &graphs)?;
    if args.record_every.is_some() {
        let path = args.trajectories.clone().unwrap_or_else(|| {
            let mut s = args.out.as_os_str().to_owned();
            s.push(".trajectories.ndjson");
            PathBuf::from(s)
        });
        let mut out = BufWriter::new(File::create(&path).map_err(|e| io_err(&path, e))?);
        for t in &trajectories {
            serde_json::to_writer(&mut out, t).map_err(|e| io_err(&path, e))?;
            out.write_all(b"\n").map_err(|e| io_err(&path, e))?;
        }
        out.flush().map_err(|e| io_err(&path, e))?;
    }
    log::info!("wrote {} graphs to {}", graphs.len(), args.out.display());
    Ok(())
}

#[derive(Args, Debug, Clone)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub generated: PathBuf,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub val: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn evaluate(args: &EvaluateArgs) -> Result<EvaluationReport> {
    let report = evaluate_sets(&read_graphs(&args.generated)?, &read_graphs(&args.train)?, &read_graphs(&args.val)?)?;
    write_json(&args.out, &report)?;
    Ok(report)
}

#[derive(Args, Debug, Clone)]
pub struct ServeArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
    /// Directory for per-session write-ahead event logs.
    #[arg(long)]
    pub event_log: Option<PathBuf>,
}

pub fn serve(args: &ServeArgs) -> Result<()> {
    let mut manager = SessionManager::new(Sampler::new(Checkpoint::load(&args.ckpt)?)?);
    if let Some(dir) = &args.event_log {
        manager = manager.with_event_log(dir)?;
    }
    let runtime = tokio::runtime::Runtime::new().map_err(|e| ServiceError::Internal(e.to_string()))?;
    runtime
        .block_on(crate::api::serve(manager, SocketAddr::new(args.host, args.port)))
        .map_err(|e| ServiceError::Internal(e.to_string()))
}
