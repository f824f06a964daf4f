//! Seeded generators for the synthetic graph families.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::{num_pairs, pair_index, pairs, EdgeVector, GraphRecord, GraphSample};
use crate::rng::{stream_rng, StreamRng, RNG_ALGORITHM};

pub const GENERATOR_VERSION: &str = "graphguide-datasets/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    CommunitySmall,
    Sbm,
    Cliques,
    MoleculeLike,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::CommunitySmall, Family::Sbm, Family::Cliques, Family::MoleculeLike];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::CommunitySmall => "community-small",
            Family::Sbm => "sbm",
            Family::Cliques => "cliques",
            Family::MoleculeLike => "molecule-like",
        }
    }

    fn tag(self) -> u64 {
        match self {
            Family::CommunitySmall => 1,
            Family::Sbm => 2,
            Family::Cliques => 3,
            Family::MoleculeLike => 4,
        }
    }

    pub fn generate<R: Rng + ?Sized>(self, rng: &mut R) -> GraphSample {
        match self {
            Family::CommunitySmall => gen_community_small(rng),
            Family::Sbm => gen_sbm(rng),
            Family::Cliques => gen_cliques(rng),
            Family::MoleculeLike => gen_molecule_like(rng),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| invalid(format!("unknown dataset family `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum DatasetMode {
    /// A fixed set of `count` graphs reused every epoch.
    Cached { count: usize },
    /// `per_epoch` fresh graphs every epoch.
    Streaming { per_epoch: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub family: Family,
    pub mode: DatasetMode,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn cached(family: Family, count: usize, seed: u64) -> Self {
        Self { family, mode: DatasetMode::Cached { count }, seed }
    }

    pub fn streaming(family: Family, per_epoch: usize, seed: u64) -> Self {
        Self { family, mode: DatasetMode::Streaming { per_epoch }, seed }
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            DatasetMode::Cached { count: 0 } => Err(invalid("cached dataset needs at least one graph")),
            DatasetMode::Streaming { per_epoch: 0 } => Err(invalid("streaming dataset needs at least one graph per epoch")),
            _ => Ok(()),
        }
    }

    /// Graphs yielded per epoch.
    pub fn epoch_len(&self) -> usize {
        match self.mode {
            DatasetMode::Cached { count } => count,
            DatasetMode::Streaming { per_epoch } => per_epoch,
        }
    }

    /// Independent generator for graph `index` of generation round `round`.
    /// The cache is round 0; streaming epoch `e` is round `e + 1`.
    pub fn graph_rng(&self, round: u64, index: u64) -> StreamRng {
        stream_rng(self.seed, (self.family.tag() << 56) | ((round & 0xff_ffff) << 32) | (index & 0xffff_ffff))
    }

    pub fn generate(&self, round: u64, index: u64) -> GraphSample {
        self.family.generate(&mut self.graph_rng(round, index))
    }
}

/// Materialized dataset; cached mode holds its graphs, streaming mode
/// regenerates per epoch.
#[derive(Clone, Debug)]
pub struct Dataset {
    spec: DatasetSpec,
    cache: Vec<GraphSample>,
}

impl Dataset {
    pub fn new(spec: DatasetSpec) -> Result<Self> {
        spec.validate()?;
        let cache = match spec.mode {
            DatasetMode::Cached { count } => (0..count as u64).map(|i| spec.generate(0, i)).collect(),
            DatasetMode::Streaming { .. } => Vec::new(),
        };
        Ok(Self { spec, cache })
    }

    pub fn spec(&self) -> &DatasetSpec {
        &self.spec
    }

    /// The graphs of epoch `epoch` (0-based), in generation order.
    pub fn epoch(&self, epoch: usize) -> Vec<GraphSample> {
        self.epoch_iter(epoch).collect()
    }

    pub fn epoch_iter(&self, epoch: usize) -> Box<dyn Iterator<Item = GraphSample> + '_> {
        match self.spec.mode {
            DatasetMode::Cached { .. } => Box::new(self.cache.iter().cloned()),
            DatasetMode::Streaming { per_epoch } => {
                let spec = self.spec;
                Box::new((0..per_epoch as u64).map(move |i| spec.generate(epoch as u64 + 1, i)))
            }
        }
    }
}

/// Iterator over one epoch of `spec`.
pub fn dataset_stream(spec: DatasetSpec, epoch: usize) -> Result<impl Iterator<Item = GraphSample>> {
    Ok(Dataset::new(spec)?.epoch(epoch).into_iter())
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

fn erdos_renyi_block<R: Rng + ?Sized>(edges: &mut EdgeVector, n: usize, nodes: &[usize], p: f64, rng: &mut R) {
    for (a, &i) in nodes.iter().enumerate() {
        for &j in &nodes[a + 1..] {
            if rng.gen_bool(p) {
                edges.set(pair_index(i.min(j), i.max(j), n), true);
            }
        }
    }
}

/// Two Erdős–Rényi(0.3) communities on `|V|` in `[12, 20]` nodes joined by
/// `round(0.05 |V|)` inter-community edges.
pub fn gen_community_small<R: Rng + ?Sized>(rng: &mut R) -> GraphSample {
    let n: usize = rng.gen_range(12..=20);
    let first = n.div_ceil(2);
    let mut edges = EdgeVector::zeros(num_pairs(n));
    let a: Vec<usize> = (0..first).collect();
    let b: Vec<usize> = (first..n).collect();
    erdos_renyi_block(&mut edges, n, &a, 0.3, rng);
    erdos_renyi_block(&mut edges, n, &b, 0.3, rng);
    let cross = a.len() * b.len();
    let k = round_half_up(0.05 * n as f64).min(cross);
    for slot in index::sample(rng, cross, k).into_vec() {
        let (i, j) = (a[slot / b.len()], b[slot % b.len()]);
        edges.set(pair_index(i, j, n), true);
    }
    GraphSample::new(vec![1.0; n], edges).expect("consistent sizes")
}

/// Stochastic block model: 2–5 blocks of 20–40 nodes, p_in = 0.3, p_out = 0.05.
pub fn gen_sbm<R: Rng + ?Sized>(rng: &mut R) -> GraphSample {
    let blocks = rng.gen_range(2..=5);
    let sizes: Vec<usize> = (0..blocks).map(|_| rng.gen_range(20..=40)).collect();
    let mut block_of = Vec::new();
    for (b, &s) in sizes.iter().enumerate() {
        block_of.extend(std::iter::repeat(b).take(s));
    }
    let n = block_of.len();
    let bits = pairs(n)
        .map(|(i, j)| rng.gen_bool(if block_of[i] == block_of[j] { 0.3 } else { 0.05 }))
        .collect();
    GraphSample::new(vec![1.0; n], bits).expect("consistent sizes")
}

/// Clique size pairs that fit on 10 nodes.
pub const CLIQUE_PAIRS: [(usize, usize); 5] = [(3, 4), (3, 5), (3, 6), (4, 5), (4, 6)];

/// Ten nodes holding two cliques of distinct sizes from {3, 4, 5, 6}; the
/// rest are singletons.
pub fn gen_cliques<R: Rng + ?Sized>(rng: &mut R) -> GraphSample {
    let n = 10;
    let (s1, s2) = CLIQUE_PAIRS[rng.gen_range(0..CLIQUE_PAIRS.len())];
    let mut edges = EdgeVector::zeros(num_pairs(n));
    for (start, size) in [(0, s1), (s1, s2)] {
        for i in start..start + size {
            for j in i + 1..start + size {
                edges.set(pair_index(i, j, n), true);
            }
        }
    }
    GraphSample::new(vec![1.0; n], edges).expect("consistent sizes")
}

pub const BACKBONE_FEATURE: f64 = 0.0;
pub const SECONDARY_FEATURE: f64 = 1.0;
const MAX_BACKBONE_DEGREE: usize = 4;

/// Molecule-like graph on 10 nodes: a ring or branched backbone of 4–6
/// nodes, 0–4 secondary leaves, and singleton padding.
pub fn gen_molecule_like<R: Rng + ?Sized>(rng: &mut R) -> GraphSample {
    let n = 10;
    let backbone = rng.gen_range(4..=6);
    let secondary = rng.gen_range(0..=4);
    let ring = rng.gen_bool(0.5);

    let mut edge_list: Vec<[usize; 2]> = Vec::new();
    let mut degree = vec![0usize; backbone];
    if ring {
        for i in 0..backbone {
            edge_list.push([i, (i + 1) % backbone]);
            degree[i] += 2;
        }
    } else {
        for new in 1..backbone {
            let open: Vec<usize> = (0..new).filter(|&v| degree[v] < MAX_BACKBONE_DEGREE).collect();
            let parent = open[rng.gen_range(0..open.len())];
            edge_list.push([parent, new]);
            degree[parent] += 1;
            degree[new] += 1;
        }
    }
    for leaf in backbone..backbone + secondary {
        let free: usize = degree.iter().map(|d| MAX_BACKBONE_DEGREE - d).sum();
        let mut slot = rng.gen_range(0..free);
        let mut host = 0;
        while slot >= MAX_BACKBONE_DEGREE - degree[host] {
            slot -= MAX_BACKBONE_DEGREE - degree[host];
            host += 1;
        }
        edge_list.push([host, leaf]);
        degree[host] += 1;
    }

    let pad = n - backbone - secondary;
    let pad_backbone = pad.div_ceil(2);
    let mut features = vec![BACKBONE_FEATURE; backbone];
    features.extend(std::iter::repeat(SECONDARY_FEATURE).take(secondary));
    features.extend(std::iter::repeat(BACKBONE_FEATURE).take(pad_backbone));
    features.extend(std::iter::repeat(SECONDARY_FEATURE).take(pad - pad_backbone));
    GraphSample::from_edge_list(features, &edge_list).expect("valid edges")
}

/// Sidecar written next to a dataset file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub family: Family,
    pub seed: u64,
    pub count: usize,
    pub generator_version: String,
    pub rng: String,
}

impl DatasetManifest {
    pub fn new(family: Family, seed: u64, count: usize) -> Self {
        Self { family, seed, count, generator_version: GENERATOR_VERSION.into(), rng: RNG_ALGORITHM.into() }
    }
}

/// Writes graphs as newline-delimited JSON records.
pub fn write_graphs(path: impl AsRef<Path>, graphs: &[GraphSample]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for g in graphs {
        serde_json::to_writer(&mut out, &g.to_record())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_graphs(path: impl AsRef<Path>) -> Result<Vec<GraphSample>> {
    let reader = BufReader::new(File::open(path)?);
    let mut graphs = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: GraphRecord = serde_json::from_str(&line)?;
        graphs.push(GraphSample::try_from(record)?);
    }
    Ok(graphs)
}
