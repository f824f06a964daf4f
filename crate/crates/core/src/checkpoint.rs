//! Versioned JSON checkpoints. Floats are written in shortest round-trip form,
//! so save followed by load is bit-exact.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::DatasetSpec;
use crate::denoiser::{Denoiser, DenoiserConfig, ParamLayout, Segment};
use crate::error::{Error, Result};
use crate::graph::GraphSample;
use crate::kernels::{KernelKind, NoiseSchedule};
use crate::rng::{stream_rng, RngState};
use crate::trainer::{OptimizerState, TrainConfig};

pub const FORMAT_VERSION: u32 = 1;

/// Node features of one training graph; its length is the node count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeProfile {
    pub features: Vec<f64>,
}

impl NodeProfile {
    pub fn of(g: &GraphSample) -> Self {
        Self { features: g.node_features().to_vec() }
    }

    pub fn n(&self) -> usize {
        self.features.len()
    }

    /// Edgeless graph with this profile's nodes.
    pub fn empty_graph(&self) -> GraphSample {
        let pairs = crate::graph::num_pairs(self.n());
        GraphSample::new(self.features.clone(), crate::graph::EdgeVector::zeros(pairs))
            .expect("profile lengths are consistent")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSegment {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub model: DenoiserConfig,
    pub kernel: KernelKind,
    pub schedule: NoiseSchedule,
    pub params: Vec<ParamSegment>,
    pub step: u64,
    pub epoch: usize,
    pub rng: RngState,
    #[serde(default)]
    pub optimizer: Option<OptimizerState>,
    /// Empirical node counts and features of the training data.
    #[serde(default)]
    pub node_profiles: Vec<NodeProfile>,
    #[serde(default)]
    pub dataset: Option<DatasetSpec>,
    #[serde(default)]
    pub train: Option<TrainConfig>,
}

impl Checkpoint {
    pub fn from_model(model: &Denoiser, kernel: KernelKind, schedule: NoiseSchedule) -> Self {
        let p = &model.params;
        let params = p
            .layout
            .segments
            .iter()
            .map(|s| ParamSegment { name: s.name.clone(), rows: s.rows, cols: s.cols, values: p.values[s.range()].to_vec() })
            .collect();
        Self {
            format_version: FORMAT_VERSION,
            model: model.config().clone(),
            kernel,
            schedule,
            params,
            step: 0,
            epoch: 0,
            rng: RngState::capture(&stream_rng(0, 0)),
            optimizer: None,
            node_profiles: Vec::new(),
            dataset: None,
            train: None,
        }
    }

    /// Rebuilds the network, checking every segment against the config.
    pub fn denoiser(&self) -> Result<Denoiser> {
        let mut layout = ParamLayout::default();
        let mut values = Vec::new();
        for seg in &self.params {
            if seg.values.len() != seg.rows * seg.cols {
                return Err(Error::Checkpoint(format!("segment {} has the wrong length", seg.name)));
            }
            layout.segments.push(Segment { name: seg.name.clone(), rows: seg.rows, cols: seg.cols, offset: values.len() });
            values.extend_from_slice(&seg.values);
        }
        Denoiser::from_values(self.model.clone(), &layout, values)
    }

    /// Draws a node profile uniformly; all-ones features on `fallback_n`
    /// nodes if the checkpoint has none.
    pub fn draw_profile<R: Rng + ?Sized>(&self, rng: &mut R, fallback_n: usize) -> NodeProfile {
        if self.node_profiles.is_empty() {
            NodeProfile { features: vec![1.0; fallback_n] }
        } else {
            self.node_profiles[rng.gen_range(0..self.node_profiles.len())].clone()
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::Checkpoint(format!("cannot read {}: {e}", path.display())))?;
        let ckpt: Self = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Checkpoint(format!("cannot parse {}: {e}", path.display())))?;
        if ckpt.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {} (expected {FORMAT_VERSION})",
                ckpt.format_version
            )));
        }
        ckpt.denoiser()?;
        Ok(ckpt)
    }
}
