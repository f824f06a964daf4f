#![allow(dead_code)]

use graphguide::checkpoint::Checkpoint;
use graphguide::datasets::{DatasetSpec, Family};
use graphguide::denoiser::DenoiserConfig;
use graphguide::kernels::default_schedule;
use graphguide::sampler::Sampler;
use graphguide::trainer::{TrainConfig, Trainer};
use graphguide::KernelKind;

pub const STEPS: usize = 40;

/// One epoch of a tiny model on a short schedule.
pub fn checkpoint(kernel: KernelKind) -> Checkpoint {
    let mut cfg = TrainConfig::new(kernel, 1, 5);
    cfg.schedule = default_schedule(STEPS).unwrap();
    let mut trainer = Trainer::new(DatasetSpec::cached(Family::Cliques, 16, 5), DenoiserConfig::tiny(), cfg).unwrap();
    trainer.run_epoch().unwrap();
    trainer.checkpoint()
}

pub fn sampler(kernel: KernelKind) -> Sampler {
    Sampler::new(checkpoint(kernel)).unwrap()
}
