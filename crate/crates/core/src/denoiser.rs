//! The denoising network: predicts per-edge probabilities of the clean graph
//! from a noisy graph and its diffusion time.
//!
//! Data flow for one graph with `n` nodes:
//!
//! ```text
//! base(t) = [sin(pi/2 t/T), cos(pi/2 t/T), t/T]
//! h  = relu(dense(relu(dense([dense(base(t)) ; feature]))))          n x H
//! per block:
//!   x  = [h ; dense([P h ; U])]      U: k lowest eigenvectors, P = U U^T
//!   a  = dense(concat_h softmax(Q_h K_h^T / sqrt(d) + w_h A) V_h)
//!   u  = LN(h + drop(relu(a)))
//!   u  = LN(u + drop(relu(dense(u))))   twice
//! s  = dense(relu(dense(relu(dense(u)))))                            n x 1
//! p_ij = sigmoid(s_i s_j)
//! ```
//!
//! All arithmetic is `f64`.

use std::rc::Rc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{invalid, Error, Result};
use crate::graph::{num_pairs, EdgeVector, GraphSample};
use crate::rng::StreamRng;
use crate::spectral::{spectral_features, LaplacianForm};

/// Output probabilities are kept inside `[PROB_FLOOR, 1 - PROB_FLOOR]`.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenoiserConfig {
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub head_dim: usize,
    pub dropout_p: f64,
    pub use_spectral: bool,
    pub spectral_k: usize,
    pub time_dim: usize,
    #[serde(default)]
    pub laplacian: LaplacianForm,
}

impl DenoiserConfig {
    /// Full-width network.
    pub fn full() -> Self {
        Self {
            hidden_dim: 256,
            num_layers: 5,
            num_heads: 8,
            head_dim: 32,
            dropout_p: 0.1,
            use_spectral: true,
            spectral_k: 5,
            time_dim: 256,
            laplacian: LaplacianForm::Normalized,
        }
    }

    /// Reduced width for single-machine runs.
    pub fn desk() -> Self {
        Self { hidden_dim: 64, num_layers: 3, num_heads: 4, head_dim: 16, time_dim: 64, ..Self::full() }
    }

    /// Smallest useful network, for tests and fast control runs.
    pub fn tiny() -> Self {
        Self { hidden_dim: 8, num_layers: 1, num_heads: 2, head_dim: 4, time_dim: 8, ..Self::full() }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("hidden_dim", self.hidden_dim),
            ("num_layers", self.num_layers),
            ("num_heads", self.num_heads),
            ("head_dim", self.head_dim),
            ("spectral_k", self.spectral_k),
            ("time_dim", self.time_dim),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(invalid(format!("{name} must be at least 1")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(invalid(format!("dropout_p must be in [0, 1), got {}", self.dropout_p)));
        }
        Ok(())
    }
}

impl Default for DenoiserConfig {
    fn default() -> Self {
        Self::desk()
    }
}

/// One named block of the flat parameter vector, `rows x cols` row-major.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub segments: Vec<Segment>,
}

impl ParamLayout {
    pub fn len(&self) -> usize {
        self.segments.last().map_or(0, |s| s.offset + s.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn find(&self, name: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.name == name)
    }
}

/// Trainable parameters with a paired gradient buffer of the same layout.
#[derive(Clone, Debug, PartialEq)]
pub struct DenoiserParams {
    pub layout: ParamLayout,
    pub values: Vec<f64>,
    pub grads: Vec<f64>,
}

impl DenoiserParams {
    pub fn segment(&self, name: &str) -> Option<&[f64]> {
        self.layout.find(name).map(|s| &self.values[s.range()])
    }

    pub fn zero_grads(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = 0.0);
    }
}

#[derive(Clone, Copy, Debug)]
enum Init {
    Glorot { fan_in: usize, fan_out: usize },
    Zeros,
    Ones,
}

#[derive(Clone, Copy, Debug)]
struct Dense {
    w: usize,
    b: usize,
}

#[derive(Clone, Copy, Debug)]
struct Norm {
    gain: usize,
    bias: usize,
}

#[derive(Clone, Debug)]
struct Block {
    spectral: Option<Dense>,
    query: Vec<usize>,
    key: Vec<usize>,
    value: Vec<usize>,
    edge_bias: usize,
    out: Dense,
    norm: Norm,
    ff: [(Dense, Norm); 2],
}

/// Segment indices for every weight of the network.
#[derive(Clone, Debug)]
struct Plan {
    time: Dense,
    input: [Dense; 2],
    blocks: Vec<Block>,
    head: [Dense; 2],
    readout: Dense,
}

struct LayoutBuilder {
    layout: ParamLayout,
    inits: Vec<Init>,
}

impl LayoutBuilder {
    fn add(&mut self, name: String, rows: usize, cols: usize, init: Init) -> usize {
        let offset = self.layout.len();
        self.layout.segments.push(Segment { name, rows, cols, offset });
        self.inits.push(init);
        self.layout.segments.len() - 1
    }

    fn dense(&mut self, name: &str, fan_in: usize, fan_out: usize) -> Dense {
        let w = self.add(format!("{name}.weight"), fan_in, fan_out, Init::Glorot { fan_in, fan_out });
        let b = self.add(format!("{name}.bias"), 1, fan_out, Init::Zeros);
        Dense { w, b }
    }

    fn norm(&mut self, name: &str, dim: usize) -> Norm {
        let gain = self.add(format!("{name}.gain"), 1, dim, Init::Ones);
        let bias = self.add(format!("{name}.bias"), 1, dim, Init::Zeros);
        Norm { gain, bias }
    }
}

fn build_plan(cfg: &DenoiserConfig) -> (ParamLayout, Vec<Init>, Plan) {
    let h = cfg.hidden_dim;
    let mut b = LayoutBuilder { layout: ParamLayout::default(), inits: Vec::new() };
    let time = b.dense("time", 3, cfg.time_dim);
    let input = [b.dense("input.0", cfg.time_dim + 1, h), b.dense("input.1", h, h)];
    let attn_in = if cfg.use_spectral { 2 * h } else { h };
    let mut blocks = Vec::with_capacity(cfg.num_layers);
    for l in 0..cfg.num_layers {
        let p = format!("block.{l}");
        let spectral = cfg.use_spectral.then(|| b.dense(&format!("{p}.spectral"), h + cfg.spectral_k, h));
        let mut proj = |kind: &str| -> Vec<usize> {
            (0..cfg.num_heads)
                .map(|hd| {
                    let init = Init::Glorot { fan_in: attn_in, fan_out: cfg.head_dim };
                    b.add(format!("{p}.head.{hd}.{kind}"), attn_in, cfg.head_dim, init)
                })
                .collect()
        };
        let query = proj("query");
        let key = proj("key");
        let value = proj("value");
        let edge_bias = b.add(format!("{p}.edge_bias"), 1, cfg.num_heads, Init::Glorot { fan_in: 1, fan_out: cfg.num_heads });
        let out = b.dense(&format!("{p}.out"), cfg.num_heads * cfg.head_dim, h);
        let norm = b.norm(&format!("{p}.norm"), h);
        let ff = [0, 1].map(|r| (b.dense(&format!("{p}.ff.{r}"), h, h), b.norm(&format!("{p}.ff.{r}.norm"), h)));
        blocks.push(Block { spectral, query, key, value, edge_bias, out, norm, ff });
    }
    let head = [b.dense("head.0", h, h), b.dense("head.1", h, h)];
    let readout = b.dense("readout", h, 1);
    (b.layout, b.inits, Plan { time, input, blocks, head, readout })
}

/// The `[sin, cos, linear]` time features fed to the first dense layer.
pub fn time_embedding_base(t: usize, steps: usize) -> [f64; 3] {
    let frac = t as f64 / steps as f64;
    let angle = std::f64::consts::FRAC_PI_2 * frac;
    [angle.sin(), angle.cos(), frac]
}

/// Structure-dependent constants for one forward pass.
struct GraphInputs {
    n: usize,
    features: Vec<f64>,
    adjacency: Rc<Vec<f64>>,
    /// `(P, U)` with `U` zero-padded to `spectral_k` columns.
    spectral: Option<(Vec<f64>, Vec<f64>)>,
}

impl GraphInputs {
    fn new(g: &GraphSample, cfg: &DenoiserConfig) -> Result<Self> {
        let n = g.n();
        let mut adjacency = vec![0.0; n * n];
        for [i, j] in g.edge_list() {
            adjacency[i * n + j] = 1.0;
            adjacency[j * n + i] = 1.0;
        }
        let spectral = if cfg.use_spectral {
            let f = spectral_features(g, cfg.spectral_k, cfg.laplacian)?;
            let mut basis = vec![0.0; n * cfg.spectral_k];
            for r in 0..n {
                basis[r * cfg.spectral_k..r * cfg.spectral_k + f.k].copy_from_slice(&f.basis[r * f.k..(r + 1) * f.k]);
            }
            Some((f.projector(), basis))
        } else {
            None
        };
        Ok(Self { n, features: g.node_features().to_vec(), adjacency: Rc::new(adjacency), spectral })
    }
}

struct Dropout<'r> {
    p: f64,
    rng: Option<&'r mut StreamRng>,
}

impl Dropout<'_> {
    fn apply(&mut self, tape: &mut Tape<'_>, x: Var) -> Var {
        let Some(rng) = self.rng.as_deref_mut() else { return x };
        if self.p == 0.0 {
            return x;
        }
        let (m, n) = tape.shape(x);
        let keep = 1.0 / (1.0 - self.p);
        let mask = (0..m * n).map(|_| if rng.gen::<f64>() < self.p { 0.0 } else { keep }).collect();
        tape.mask(x, mask)
    }
}

fn check_finite(tape: &Tape<'_>, v: Var, stage: &str) -> Result<()> {
    if tape.value(v).iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericFailure(format!("non-finite activation at {stage}")))
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `-[y ln sigmoid(z) + (1-y) ln(1 - sigmoid(z))]`, evaluated stably.
pub fn bce_with_logits(z: f64, y: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z
}

/// Mean edge BCE of `sigmoid(s_i s_j)` against `target`, and its gradient
/// with respect to the node scores.
pub fn edge_bce(scores: &[f64], target: &EdgeVector) -> (f64, Vec<f64>) {
    let n = scores.len();
    let pairs = num_pairs(n);
    let mut grad = vec![0.0; n];
    if pairs == 0 {
        return (0.0, grad);
    }
    let inv = 1.0 / pairs as f64;
    let mut loss = 0.0;
    let mut idx = 0;
    for i in 0..n {
        for j in i + 1..n {
            let z = scores[i] * scores[j];
            let y = if target.get(idx) { 1.0 } else { 0.0 };
            loss += bce_with_logits(z, y);
            let dz = (sigmoid(z) - y) * inv;
            grad[i] += dz * scores[j];
            grad[j] += dz * scores[i];
            idx += 1;
        }
    }
    (loss * inv, grad)
}

/// One supervised pair: the noisy graph at time `t` and its clean edges.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub noisy: GraphSample,
    pub t: usize,
    pub target: EdgeVector,
}

#[derive(Clone, Debug)]
pub struct Denoiser {
    config: DenoiserConfig,
    plan: Plan,
    pub params: DenoiserParams,
}

impl Denoiser {
    /// Glorot-uniform weights, zero biases, unit layer-norm gains.
    pub fn new<R: Rng + ?Sized>(config: DenoiserConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let (layout, inits, plan) = build_plan(&config);
        let mut values = vec![0.0; layout.len()];
        for (seg, init) in layout.segments.iter().zip(&inits) {
            let slot = &mut values[seg.range()];
            match *init {
                Init::Glorot { fan_in, fan_out } => {
                    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    slot.iter_mut().for_each(|v| *v = rng.gen_range(-limit..=limit));
                }
                Init::Zeros => {}
                Init::Ones => slot.iter_mut().for_each(|v| *v = 1.0),
            }
        }
        let grads = vec![0.0; values.len()];
        Ok(Self { config, plan, params: DenoiserParams { layout, values, grads } })
    }

    /// Every parameter zero.
    pub fn zeros(config: DenoiserConfig) -> Result<Self> {
        config.validate()?;
        let (layout, _, plan) = build_plan(&config);
        let len = layout.len();
        Ok(Self { config, plan, params: DenoiserParams { layout, values: vec![0.0; len], grads: vec![0.0; len] } })
    }

    /// Rebuilds a network from stored values; the layout must match `config`.
    pub fn from_values(config: DenoiserConfig, layout: &ParamLayout, values: Vec<f64>) -> Result<Self> {
        let mut model = Self::zeros(config)?;
        if &model.params.layout != layout {
            return Err(Error::Checkpoint("parameter layout does not match the model config".into()));
        }
        if values.len() != layout.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameter values, found {}",
                layout.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Checkpoint("non-finite parameter value".into()));
        }
        model.params.values = values;
        Ok(model)
    }

    pub fn config(&self) -> &DenoiserConfig {
        &self.config
    }

    pub fn num_params(&self) -> usize {
        self.params.values.len()
    }

    fn seg<'a>(&self, tape: &mut Tape<'a>, values: &'a [f64], idx: usize) -> Var {
        let s = &self.params.layout.segments[idx];
        tape.param(values, s.offset, s.rows, s.cols)
    }

    fn dense<'a>(&self, tape: &mut Tape<'a>, values: &'a [f64], d: Dense, x: Var) -> Var {
        let w = self.seg(tape, values, d.w);
        let b = self.seg(tape, values, d.b);
        let y = tape.matmul(x, w);
        tape.add_bias(y, b)
    }

    fn norm<'a>(&self, tape: &mut Tape<'a>, values: &'a [f64], nm: Norm, x: Var) -> Var {
        let g = self.seg(tape, values, nm.gain);
        let b = self.seg(tape, values, nm.bias);
        tape.layer_norm(x, g, b)
    }

    /// Records the network on `tape` and returns the `n x 1` node scores.
    fn record<'a>(
        &self,
        tape: &mut Tape<'a>,
        values: &'a [f64],
        inputs: &GraphInputs,
        t: usize,
        steps: usize,
        drop: &mut Dropout<'_>,
    ) -> Result<Var> {
        let n = inputs.n;
        let base = tape.constant(1, 3, time_embedding_base(t, steps).to_vec());
        let temb = self.dense(tape, values, self.plan.time, base);
        let temb = tape.repeat_rows(temb, n);
        let feat = tape.constant(n, 1, inputs.features.clone());
        let mut h = tape.concat(&[temb, feat]);
        for d in self.plan.input {
            h = self.dense(tape, values, d, h);
            h = tape.relu(h);
        }
        check_finite(tape, h, "input layers")?;

        let scale = 1.0 / (self.config.head_dim as f64).sqrt();
        for (l, block) in self.plan.blocks.iter().enumerate() {
            let x = match (&inputs.spectral, block.spectral) {
                (Some((p, u)), Some(d)) => {
                    let proj = tape.constant(n, n, p.clone());
                    let basis = tape.constant(n, self.config.spectral_k, u.clone());
                    let mixed = tape.matmul(proj, h);
                    let mixed = tape.concat(&[mixed, basis]);
                    let s = self.dense(tape, values, d, mixed);
                    tape.concat(&[h, s])
                }
                _ => h,
            };
            let edge_bias = self.seg(tape, values, block.edge_bias);
            let mut heads = Vec::with_capacity(self.config.num_heads);
            for hd in 0..self.config.num_heads {
                let wq = self.seg(tape, values, block.query[hd]);
                let wk = self.seg(tape, values, block.key[hd]);
                let wv = self.seg(tape, values, block.value[hd]);
                let q = tape.matmul(x, wq);
                let k = tape.matmul(x, wk);
                let v = tape.matmul(x, wv);
                let scores = tape.matmul_t(q, k);
                let scores = tape.scale(scores, scale);
                let scores = tape.add_pattern(scores, edge_bias, hd, inputs.adjacency.clone());
                let attn = tape.softmax_rows(scores);
                heads.push(tape.matmul(attn, v));
            }
            let cat = tape.concat(&heads);
            let a = self.dense(tape, values, block.out, cat);
            let a = tape.relu(a);
            let a = drop.apply(tape, a);
            let sum = tape.add(h, a);
            let mut u = self.norm(tape, values, block.norm, sum);
            for (d, nm) in block.ff {
                let f = self.dense(tape, values, d, u);
                let f = tape.relu(f);
                let f = drop.apply(tape, f);
                let sum = tape.add(u, f);
                u = self.norm(tape, values, nm, sum);
            }
            check_finite(tape, u, &format!("layer {l}"))?;
            h = u;
        }

        for d in self.plan.head {
            h = self.dense(tape, values, d, h);
            h = tape.relu(h);
        }
        let s = self.dense(tape, values, self.plan.readout, h);
        check_finite(tape, s, "output head")?;
        Ok(s)
    }

    /// Per-node scalar scores `s_i`.
    pub fn node_scores(
        &self,
        graph: &GraphSample,
        t: usize,
        steps: usize,
        train_mode: bool,
        rng: &mut StreamRng,
    ) -> Result<Vec<f64>> {
        self.check_time(t, steps)?;
        let inputs = GraphInputs::new(graph, &self.config)?;
        let mut tape = Tape::new();
        let mut drop = Dropout { p: self.config.dropout_p, rng: train_mode.then_some(rng) };
        let s = self.record(&mut tape, &self.params.values, &inputs, t, steps, &mut drop)?;
        Ok(tape.value(s).to_vec())
    }

    /// Edge probabilities in triangular order, length `C(n, 2)`.
    /// Dropout is active only in `train_mode`.
    pub fn forward(
        &self,
        graph: &GraphSample,
        t: usize,
        steps: usize,
        train_mode: bool,
        rng: &mut StreamRng,
    ) -> Result<Vec<f64>> {
        let s = self.node_scores(graph, t, steps, train_mode, rng)?;
        Ok(edge_probs(&s))
    }

    /// Evaluation-mode forward pass (no dropout, no randomness).
    pub fn predict(&self, graph: &GraphSample, t: usize, steps: usize) -> Result<Vec<f64>> {
        self.check_time(t, steps)?;
        let inputs = GraphInputs::new(graph, &self.config)?;
        let mut tape = Tape::new();
        let mut drop = Dropout { p: 0.0, rng: None };
        let s = self.record(&mut tape, &self.params.values, &inputs, t, steps, &mut drop)?;
        Ok(edge_probs(tape.value(s)))
    }

    fn check_time(&self, t: usize, steps: usize) -> Result<()> {
        if steps == 0 || t > steps {
            return Err(invalid(format!("time {t} outside [0, {steps}]")));
        }
        Ok(())
    }

    /// Mean BCE over edges then over graphs, with its exact gradient. Graphs
    /// with fewer than two nodes have no edges and are skipped. Dropout masks
    /// are drawn from `rng` in batch order.
    pub fn loss_and_grad(&self, batch: &[Example], steps: usize, rng: &mut StreamRng) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(invalid("empty batch"));
        }
        let mut grads = vec![0.0; self.num_params()];
        let counted = batch.iter().filter(|e| e.noisy.n() >= 2).count();
        if counted == 0 {
            return Ok((0.0, grads));
        }
        let weight = 1.0 / counted as f64;
        let mut total = 0.0;
        for ex in batch {
            if ex.target.len() != ex.noisy.edges().len() {
                return Err(invalid("target length does not match the noisy graph"));
            }
            if ex.noisy.n() < 2 {
                continue;
            }
            self.check_time(ex.t, steps)?;
            let inputs = GraphInputs::new(&ex.noisy, &self.config)?;
            let mut tape = Tape::new();
            let mut drop = Dropout { p: self.config.dropout_p, rng: Some(&mut *rng) };
            let s = self.record(&mut tape, &self.params.values, &inputs, ex.t, steps, &mut drop)?;
            let (loss, mut ds) = edge_bce(tape.value(s), &ex.target);
            total += loss * weight;
            ds.iter_mut().for_each(|d| *d *= weight);
            tape.backward(s, &ds, &mut grads);
        }
        Ok((total, grads))
    }
}

/// `sigmoid(s_i s_j)` for `i < j`, kept inside `[PROB_FLOOR, 1 - PROB_FLOOR]`.
pub fn edge_probs(scores: &[f64]) -> Vec<f64> {
    let n = scores.len();
    let mut out = Vec::with_capacity(num_pairs(n));
    for i in 0..n {
        for j in i + 1..n {
            out.push(sigmoid(scores[i] * scores[j]).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::edge_index;
    use crate::rng::stream_rng;
    use crate::spectral::{laplacian, symmetric_eigen};
    use rand::seq::SliceRandom;

    fn random_graph(n: usize, p: f64, rng: &mut StreamRng) -> GraphSample {
        let bits = (0..num_pairs(n)).map(|_| rng.gen_bool(p)).collect();
        let feats = (0..n).map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 }).collect();
        GraphSample::new(feats, bits).unwrap()
    }

    fn permuted(g: &GraphSample, perm: &[usize]) -> GraphSample {
        let n = g.n();
        let mut feats = vec![0.0; n];
        for i in 0..n {
            feats[perm[i]] = g.node_features()[i];
        }
        let edges: Vec<[usize; 2]> = g.edge_list().into_iter().map(|[i, j]| [perm[i], perm[j]]).collect();
        GraphSample::from_edge_list(feats, &edges).unwrap()
    }

    // Equivariance holds when every retained eigenvalue is simple, the retained
    // eigenspace is separated from the rest, and each eigenvector has a
    // unique largest-magnitude entry.
    fn spectral_gap_ok(g: &GraphSample, k: usize) -> bool {
        let n = g.n();
        let f = spectral_features(g, k, LaplacianForm::Normalized).unwrap();
        let (vals, _) = symmetric_eigen(&laplacian(g, LaplacianForm::Normalized), n).unwrap();
        let upto = if k < n { k + 1 } else { n };
        let simple = vals[..upto].windows(2).all(|w| (w[1] - w[0]).abs() > 1e-6);
        let pivots = (0..f.k).all(|c| {
            let mut mags: Vec<f64> = f.column(c).iter().map(|x| x.abs()).collect();
            mags.sort_by(|x, y| y.total_cmp(x));
            mags.len() < 2 || mags[0] - mags[1] > 1e-6
        });
        simple && pivots
    }

    #[test]
    fn time_embedding_on_unit_circle() {
        for t in [0, 1, 17, 500, 1000] {
            let b = time_embedding_base(t, 1000);
            assert!((b[0] * b[0] + b[1] * b[1] - 1.0).abs() < 1e-12);
            assert!(b.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn output_shape_and_range() {
        let mut rng = stream_rng(1, 0);
        let model = Denoiser::new(DenoiserConfig::tiny(), &mut rng).unwrap();
        for n in [1, 2, 5, 9] {
            let g = random_graph(n, 0.4, &mut rng);
            let p = model.predict(&g, 300, 1000).unwrap();
            assert_eq!(p.len(), num_pairs(n));
            assert!(p.iter().all(|&x| x > 0.0 && x < 1.0));
        }
    }

    #[test]
    fn zero_network_predicts_half() {
        let model = Denoiser::zeros(DenoiserConfig::tiny()).unwrap();
        let mut rng = stream_rng(2, 0);
        let g = random_graph(7, 0.5, &mut rng);
        for p in model.forward(&g, 10, 1000, true, &mut rng).unwrap() {
            assert_eq!(p, 0.5);
        }
    }

    #[test]
    fn permutation_equivariance() {
        let mut rng = stream_rng(3, 0);
        let cfg = DenoiserConfig { dropout_p: 0.0, ..DenoiserConfig::tiny() };
        let model = Denoiser::new(cfg.clone(), &mut rng).unwrap();
        let mut checked = 0;
        while checked < 100 {
            let n = rng.gen_range(3..=10);
            let g = random_graph(n, rng.gen_range(0.2..0.8), &mut rng);
            if !spectral_gap_ok(&g, cfg.spectral_k) {
                continue;
            }
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let gp = permuted(&g, &perm);
            let t = rng.gen_range(0..=1000);
            let a = model.predict(&g, t, 1000).unwrap();
            let b = model.predict(&gp, t, 1000).unwrap();
            for i in 0..n {
                for j in i + 1..n {
                    let (pi, pj) = (perm[i].min(perm[j]), perm[i].max(perm[j]));
                    let x = a[edge_index(i, j, n).unwrap()];
                    let y = b[edge_index(pi, pj, n).unwrap()];
                    assert!((x - y).abs() < 1e-9, "{x} vs {y}");
                }
            }
            checked += 1;
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let mut r1 = stream_rng(4, 0);
        let mut r2 = stream_rng(4, 0);
        let m1 = Denoiser::new(DenoiserConfig::tiny(), &mut r1).unwrap();
        let m2 = Denoiser::new(DenoiserConfig::tiny(), &mut r2).unwrap();
        assert_eq!(m1.params, m2.params);
        let g = random_graph(6, 0.5, &mut stream_rng(5, 0));
        let p1 = m1.forward(&g, 30, 100, true, &mut stream_rng(6, 0)).unwrap();
        let p2 = m2.forward(&g, 30, 100, true, &mut stream_rng(6, 0)).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn edge_bce_bound_for_confident_predictions() {
        let eps: f64 = PROB_FLOOR;
        for y in [0.0, 1.0] {
            let z = if y == 1.0 { 40.0 } else { -40.0 };
            assert!(bce_with_logits(z, y) <= -(1.0 - eps).ln());
        }
    }

    fn fd_batch(rng: &mut StreamRng) -> Vec<Example> {
        let noisy = random_graph(6, 0.5, rng);
        let target: EdgeVector = (0..num_pairs(6)).map(|_| rng.gen_bool(0.4)).collect();
        vec![Example { noisy, t: 250, target }]
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = stream_rng(7, 0);
        let cfg = DenoiserConfig { spectral_k: 3, ..DenoiserConfig::tiny() };
        let mut model = Denoiser::new(cfg, &mut rng).unwrap();
        // Nonzero biases so every segment carries signal.
        for v in model.params.values.iter_mut() {
            *v += rng.gen_range(-0.1..0.1);
        }
        let batch = fd_batch(&mut rng);
        let (_, grads) = model.loss_and_grad(&batch, 1000, &mut stream_rng(8, 0)).unwrap();

        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for _ in 0..200 {
            let i = rng.gen_range(0..model.num_params());
            let orig = model.params.values[i];
            model.params.values[i] = orig + h;
            let (lp, _) = model.loss_and_grad(&batch, 1000, &mut stream_rng(8, 0)).unwrap();
            model.params.values[i] = orig - h;
            let (lm, _) = model.loss_and_grad(&batch, 1000, &mut stream_rng(8, 0)).unwrap();
            model.params.values[i] = orig;
            let fd = (lp - lm) / (2.0 * h);
            let rel = (fd - grads[i]).abs() / fd.abs().max(grads[i].abs()).max(1e-8);
            worst = worst.max(rel);
        }
        assert!(worst < 1e-4, "max relative error {worst}");
    }

    #[test]
    fn duplicated_batch_is_invariant() {
        let mut rng = stream_rng(9, 0);
        let cfg = DenoiserConfig { dropout_p: 0.0, ..DenoiserConfig::tiny() };
        let model = Denoiser::new(cfg, &mut rng).unwrap();
        let mut batch = fd_batch(&mut rng);
        batch.extend(fd_batch(&mut rng));
        let (l1, g1) = model.loss_and_grad(&batch, 1000, &mut stream_rng(1, 1)).unwrap();
        let doubled: Vec<Example> = batch.iter().chain(batch.iter()).cloned().collect();
        let (l2, g2) = model.loss_and_grad(&doubled, 1000, &mut stream_rng(1, 1)).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn layout_is_contiguous_and_named() {
        let model = Denoiser::new(DenoiserConfig::desk(), &mut stream_rng(0, 0)).unwrap();
        let layout = &model.params.layout;
        let mut offset = 0;
        for s in &layout.segments {
            assert_eq!(s.offset, offset);
            offset += s.len();
        }
        assert_eq!(offset, model.num_params());
        assert_eq!(model.params.grads.len(), model.num_params());
        assert!(layout.find("block.2.head.3.query").is_some());
        assert!(model.params.segment("readout.weight").unwrap().len() == 64);
    }

    #[test]
    fn rejects_bad_config_and_time() {
        let cfg = DenoiserConfig { dropout_p: 1.0, ..DenoiserConfig::tiny() };
        assert!(Denoiser::zeros(cfg).is_err());
        let model = Denoiser::zeros(DenoiserConfig::tiny()).unwrap();
        assert!(model.predict(&GraphSample::empty(3), 11, 10).is_err());
    }
}
