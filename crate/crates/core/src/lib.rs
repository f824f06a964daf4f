//! Discrete edge diffusion for graph generation with structural constraints.

pub mod autodiff;
pub mod checkpoint;
pub mod datasets;
pub mod denoiser;
pub mod error;
pub mod evaluation;
pub mod graph;
pub mod kernels;
pub mod rng;
pub mod sampler;
pub mod spectral;
pub mod trainer;

pub use error::{Error, Result};
pub use graph::{EdgeVector, GraphRecord, GraphSample};
pub use kernels::{KernelKind, NoiseSchedule};
