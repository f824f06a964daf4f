//! Ancestral reverse diffusion with edge locks enforced after every step.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::denoiser::Denoiser;
use crate::error::{Error, Result};
use crate::graph::{edge_index, num_pairs, pairs, EdgeVector, GraphSample};
use crate::kernels::{forward_mass, posterior_prob, sample_prior, KernelKind, NoiseSchedule};
use crate::rng::{stream_rng, StreamRng};

/// Structural motif expanded into edge locks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Macro {
    /// Every pair within `nodes` present.
    Clique { nodes: Vec<usize> },
    /// Consecutive pairs (cyclically) present, all other pairs within the
    /// ring absent.
    Ring { nodes: Vec<usize> },
    /// No edge between different groups.
    Partition { groups: Vec<Vec<usize>> },
}

/// Edge positions that must be present or absent.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub n: usize,
    pub require: BTreeSet<usize>,
    pub forbid: BTreeSet<usize>,
    #[serde(default)]
    pub macros: Vec<Macro>,
}

impl ConstraintSet {
    pub fn new(n: usize) -> Self {
        Self { n, ..Self::default() }
    }

    pub fn is_empty(&self) -> bool {
        self.require.is_empty() && self.forbid.is_empty()
    }

    pub fn len(&self) -> usize {
        self.require.len() + self.forbid.len()
    }

    fn position(&self, i: usize, j: usize) -> Result<usize> {
        let (a, b) = (i.min(j), i.max(j));
        if a == b || b >= self.n {
            return Err(Error::InvalidConstraints(format!("pair ({i}, {j}) is not an edge of a {}-node graph", self.n)));
        }
        edge_index(a, b, self.n)
    }

    pub fn require_pair(&mut self, i: usize, j: usize) -> Result<()> {
        let pos = self.position(i, j)?;
        self.require_position(pos)
    }

    pub fn forbid_pair(&mut self, i: usize, j: usize) -> Result<()> {
        let pos = self.position(i, j)?;
        self.forbid_position(pos)
    }

    pub fn require_position(&mut self, pos: usize) -> Result<()> {
        self.check_position(pos)?;
        if self.forbid.contains(&pos) {
            return Err(Error::InvalidConstraints(format!("edge {pos} is both required and forbidden")));
        }
        self.require.insert(pos);
        Ok(())
    }

    pub fn forbid_position(&mut self, pos: usize) -> Result<()> {
        self.check_position(pos)?;
        if self.require.contains(&pos) {
            return Err(Error::InvalidConstraints(format!("edge {pos} is both required and forbidden")));
        }
        self.forbid.insert(pos);
        Ok(())
    }

    fn check_position(&self, pos: usize) -> Result<()> {
        if pos >= num_pairs(self.n) {
            return Err(Error::InvalidConstraints(format!(
                "edge position {pos} out of range for {} nodes",
                self.n
            )));
        }
        Ok(())
    }

    pub fn unlock_pair(&mut self, i: usize, j: usize) -> Result<()> {
        let pos = self.position(i, j)?;
        self.unlock_position(pos);
        Ok(())
    }

    /// Drops any lock on `pos`.
    pub fn unlock_position(&mut self, pos: usize) {
        self.require.remove(&pos);
        self.forbid.remove(&pos);
    }

    /// Union of two sets on the same node count; conflicts are rejected.
    pub fn merge(&mut self, other: &ConstraintSet) -> Result<()> {
        if other.n != self.n {
            return Err(Error::InvalidConstraints(format!("node counts differ: {} vs {}", self.n, other.n)));
        }
        let mut out = self.clone();
        for &p in &other.require {
            out.require_position(p)?;
        }
        for &p in &other.forbid {
            out.forbid_position(p)?;
        }
        out.macros.extend(other.macros.iter().cloned());
        *self = out;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(p) = self.require.intersection(&self.forbid).next() {
            return Err(Error::InvalidConstraints(format!("edge {p} is both required and forbidden")));
        }
        if let Some(&p) = self.require.iter().chain(&self.forbid).max() {
            self.check_position(p)?;
        }
        Ok(())
    }

    pub fn is_satisfied_by(&self, x: &EdgeVector) -> bool {
        self.violations(x) == 0
    }

    pub fn violations(&self, x: &EdgeVector) -> usize {
        self.require.iter().filter(|&&p| !x.get(p)).count() + self.forbid.iter().filter(|&&p| x.get(p)).count()
    }

    /// Sets required bits and clears forbidden ones; returns the number of
    /// bits changed.
    pub fn repair(&self, x: &mut EdgeVector) -> usize {
        let mut changed = 0;
        for &p in &self.require {
            if !x.get(p) {
                x.set(p, true);
                changed += 1;
            }
        }
        for &p in &self.forbid {
            if x.get(p) {
                x.set(p, false);
                changed += 1;
            }
        }
        changed
    }
}

/// `x` with every lock of `c` applied; other bits unchanged.
pub fn enforce_constraints(x: &EdgeVector, c: &ConstraintSet) -> EdgeVector {
    let mut out = x.clone();
    c.repair(&mut out);
    out
}

fn distinct_nodes(nodes: &[usize], n: usize) -> Result<()> {
    let mut seen = BTreeSet::new();
    for &v in nodes {
        if v >= n {
            return Err(Error::InvalidConstraints(format!("node {v} out of range for {n} nodes")));
        }
        if !seen.insert(v) {
            return Err(Error::InvalidConstraints(format!("node {v} listed twice")));
        }
    }
    Ok(())
}

/// Edge locks for one motif on `n` nodes.
pub fn expand_macro(m: &Macro, n: usize) -> Result<ConstraintSet> {
    let mut c = ConstraintSet::new(n);
    match m {
        Macro::Clique { nodes } => {
            distinct_nodes(nodes, n)?;
            for (a, &i) in nodes.iter().enumerate() {
                for &j in &nodes[a + 1..] {
                    c.require_pair(i, j)?;
                }
            }
        }
        Macro::Ring { nodes } => {
            distinct_nodes(nodes, n)?;
            if nodes.len() < 3 {
                return Err(Error::InvalidConstraints("a ring needs at least 3 nodes".into()));
            }
            let k = nodes.len();
            for a in 0..k {
                c.require_pair(nodes[a], nodes[(a + 1) % k])?;
            }
            for a in 0..k {
                for b in a + 2..k {
                    if !(a == 0 && b == k - 1) {
                        c.forbid_pair(nodes[a], nodes[b])?;
                    }
                }
            }
        }
        Macro::Partition { groups } => {
            let all: Vec<usize> = groups.iter().flatten().copied().collect();
            distinct_nodes(&all, n)?;
            for (g, ga) in groups.iter().enumerate() {
                for gb in &groups[g + 1..] {
                    for &i in ga {
                        for &j in gb {
                            c.forbid_pair(i, j)?;
                        }
                    }
                }
            }
        }
    }
    c.macros.push(m.clone());
    Ok(c)
}

/// On-disk constraint description.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintFile {
    pub n: usize,
    #[serde(default)]
    pub macros: Vec<Macro>,
    #[serde(default)]
    pub require: Vec<[usize; 2]>,
    #[serde(default)]
    pub forbid: Vec<[usize; 2]>,
}

impl ConstraintFile {
    pub fn build(&self) -> Result<ConstraintSet> {
        let mut c = ConstraintSet::new(self.n);
        for m in &self.macros {
            c.merge(&expand_macro(m, self.n)?)?;
        }
        for &[i, j] in &self.require {
            c.require_pair(i, j)?;
        }
        for &[i, j] in &self.forbid {
            c.forbid_pair(i, j)?;
        }
        Ok(c)
    }
}

impl From<&ConstraintSet> for ConstraintFile {
    fn from(c: &ConstraintSet) -> Self {
        let pair_of: Vec<[usize; 2]> = pairs(c.n).map(|(i, j)| [i, j]).collect();
        Self {
            n: c.n,
            macros: Vec::new(),
            require: c.require.iter().map(|&p| pair_of[p]).collect(),
            forbid: c.forbid.iter().map(|&p| pair_of[p]).collect(),
        }
    }
}

/// Anything that predicts per-edge probabilities of the clean graph.
pub trait Denoise {
    fn predict(&self, graph: &GraphSample, t: usize, steps: usize) -> Result<Vec<f64>>;
}

impl Denoise for Denoiser {
    fn predict(&self, graph: &GraphSample, t: usize, steps: usize) -> Result<Vec<f64>> {
        Denoiser::predict(self, graph, t, steps)
    }
}

/// Always predicts a fixed clean edge vector with certainty.
#[derive(Clone, Debug)]
pub struct OracleDenoiser {
    pub target: EdgeVector,
}

impl Denoise for OracleDenoiser {
    fn predict(&self, graph: &GraphSample, _t: usize, _steps: usize) -> Result<Vec<f64>> {
        if graph.edges().len() != self.target.len() {
            return Err(Error::InvalidArgument("oracle target size does not match the graph".into()));
        }
        Ok(self.target.iter().map(|b| if b { 1.0 } else { 0.0 }).collect())
    }
}

/// How the predicted clean-edge probability enters the posterior.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PosteriorMode {
    /// `p * q(.|x_t, x0=1) + (1-p) * q(.|x_t, x0=0)`.
    #[default]
    Marginal,
    /// Rounds the prediction to a bit first.
    Threshold,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryEntry {
    pub t: usize,
    pub edges: Vec<[usize; 2]>,
    /// Bits changed by constraint repair when this state was produced.
    pub repairs: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub n: usize,
    pub entries: Vec<TrajectoryEntry>,
}

/// Result of one reverse step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub t: usize,
    pub repairs: usize,
}

/// Posterior parameters for one step, indexed by `(x0, x_t)`; `None` marks
/// a pair with zero forward mass.
struct StepTable([[Option<f64>; 2]; 2]);

impl StepTable {
    fn new(kind: KernelKind, sched: &NoiseSchedule, t: usize) -> Result<Self> {
        let mut table = [[None; 2]; 2];
        for x0 in [false, true] {
            for xt in [false, true] {
                if forward_mass(kind, sched, x0, xt, t)? > 0.0 {
                    table[x0 as usize][xt as usize] = Some(posterior_prob(kind, sched, x0, xt, t)?.p());
                }
            }
        }
        Ok(Self(table))
    }

    fn param(&self, mode: PosteriorMode, p_hat: f64, xt: bool) -> Result<f64> {
        let one = self.0[1][xt as usize];
        let zero = self.0[0][xt as usize];
        match (one, zero) {
            (Some(a), Some(b)) => Ok(match mode {
                PosteriorMode::Marginal => p_hat * a + (1.0 - p_hat) * b,
                PosteriorMode::Threshold => {
                    if p_hat >= 0.5 {
                        a
                    } else {
                        b
                    }
                }
            }),
            (Some(a), None) => Ok(a),
            (None, Some(b)) => Ok(b),
            (None, None) => Err(Error::InconsistentState(format!("no clean bit can produce x_t = {}", xt as u8))),
        }
    }
}

/// One reverse-diffusion chain, advanced a step at a time. Constraints may
/// change between steps.
#[derive(Clone, Debug)]
pub struct ReverseChain {
    kernel: KernelKind,
    schedule: NoiseSchedule,
    mode: PosteriorMode,
    graph: GraphSample,
    t: usize,
    constraints: ConstraintSet,
    rng: StreamRng,
    record_every: Option<usize>,
    trajectory: Vec<TrajectoryEntry>,
    last_probs: Vec<f64>,
    prior_repairs: usize,
}

impl ReverseChain {
    /// Draws `x_T` from the prior on `template`'s nodes and applies the locks.
    pub fn new(
        kernel: KernelKind,
        schedule: NoiseSchedule,
        template: &GraphSample,
        constraints: ConstraintSet,
        mut rng: StreamRng,
    ) -> Result<Self> {
        if constraints.n != template.n() {
            return Err(Error::InvalidConstraints(format!(
                "constraints are for {} nodes but the graph has {}",
                constraints.n,
                template.n()
            )));
        }
        constraints.validate()?;
        let mut x = sample_prior(kernel, template.edges().len(), &mut rng);
        let repairs = constraints.repair(&mut x);
        let graph = template.with_edges(x)?;
        let t = schedule.steps();
        let chain = Self {
            kernel,
            schedule,
            mode: PosteriorMode::default(),
            graph,
            t,
            constraints,
            rng,
            record_every: None,
            trajectory: Vec::new(),
            last_probs: Vec::new(),
            prior_repairs: repairs,
        };
        Ok(chain)
    }

    pub fn with_mode(mut self, mode: PosteriorMode) -> Self {
        self.mode = mode;
        self
    }

    /// Records the current state, every multiple of `every`, and `t = 0`.
    pub fn with_recording(mut self, every: usize) -> Self {
        self.record_every = Some(every.max(1));
        self.trajectory.clear();
        let repairs = if self.t == self.schedule.steps() { self.prior_repairs } else { 0 };
        self.push_entry(repairs);
        self
    }

    fn push_entry(&mut self, repairs: usize) {
        self.trajectory.push(TrajectoryEntry { t: self.t, edges: self.graph.edge_list(), repairs });
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn steps(&self) -> usize {
        self.schedule.steps()
    }

    pub fn kernel(&self) -> KernelKind {
        self.kernel
    }

    pub fn is_finished(&self) -> bool {
        self.t == 0
    }

    pub fn graph(&self) -> &GraphSample {
        &self.graph
    }

    pub fn constraints(&self) -> &ConstraintSet {
        &self.constraints
    }

    /// The denoiser's most recent per-edge prediction (empty before the
    /// first step).
    pub fn last_probs(&self) -> &[f64] {
        &self.last_probs
    }

    pub fn rng(&self) -> &StreamRng {
        &self.rng
    }

    /// Replaces the lock set and repairs the current state immediately.
    /// Returns the number of bits changed.
    pub fn set_constraints(&mut self, constraints: ConstraintSet) -> Result<usize> {
        if self.is_finished() {
            return Err(Error::InconsistentState("chain already finished".into()));
        }
        if constraints.n != self.graph.n() {
            return Err(Error::InvalidConstraints("constraint node count does not match the graph".into()));
        }
        constraints.validate()?;
        self.constraints = constraints;
        Ok(self.constraints.repair(self.graph.edges_mut()))
    }

    /// Samples `x_{t-1}` and repairs it.
    pub fn step(&mut self, model: &dyn Denoise) -> Result<StepOutcome> {
        if self.is_finished() {
            return Err(Error::InconsistentState("chain already finished".into()));
        }
        let t = self.t;
        let probs = model.predict(&self.graph, t, self.schedule.steps())?;
        if probs.len() != self.graph.edges().len() {
            return Err(Error::InconsistentState("denoiser output has the wrong length".into()));
        }
        let table = StepTable::new(self.kernel, &self.schedule, t)?;
        let mut next = EdgeVector::zeros(probs.len());
        for (idx, &p_hat) in probs.iter().enumerate() {
            let xt = self.graph.edges().get(idx);
            let p = table.param(self.mode, p_hat.clamp(0.0, 1.0), xt)?;
            next.set(idx, crate::kernels::BernoulliParam::new(p)?.sample(&mut self.rng));
        }
        debug_assert!(match self.kernel {
            KernelKind::BitOne => next.iter().zip(self.graph.edges().iter()).all(|(a, b)| !a || b),
            KernelKind::BitZero => next.iter().zip(self.graph.edges().iter()).all(|(a, b)| !b || a),
            KernelKind::BitFlip => true,
        });
        let repairs = self.constraints.repair(&mut next);
        *self.graph.edges_mut() = next;
        self.t -= 1;
        self.last_probs = probs;
        if let Some(every) = self.record_every {
            if self.t == 0 || self.t % every == 0 {
                self.push_entry(repairs);
            }
        }
        Ok(StepOutcome { t: self.t, repairs })
    }

    /// Steps until `t = 0`.
    pub fn run(&mut self, model: &dyn Denoise) -> Result<&GraphSample> {
        while !self.is_finished() {
            self.step(model)?;
        }
        Ok(&self.graph)
    }

    pub fn trajectory(&self) -> Option<TrajectoryRecord> {
        self.record_every.map(|_| TrajectoryRecord { n: self.graph.n(), entries: self.trajectory.clone() })
    }

    pub fn into_graph(self) -> GraphSample {
        self.graph
    }
}

/// One full reverse chain from the prior on `template`'s nodes.
pub fn sample(
    model: &dyn Denoise,
    kernel: KernelKind,
    schedule: &NoiseSchedule,
    template: &GraphSample,
    constraints: Option<&ConstraintSet>,
    rng: StreamRng,
    record_every: Option<usize>,
) -> Result<(GraphSample, Option<TrajectoryRecord>)> {
    let c = constraints.cloned().unwrap_or_else(|| ConstraintSet::new(template.n()));
    let mut chain = ReverseChain::new(kernel, schedule.clone(), template, c, rng)?;
    if let Some(every) = record_every {
        chain = chain.with_recording(every);
    }
    chain.run(model)?;
    let traj = chain.trajectory();
    Ok((chain.into_graph(), traj))
}

/// Stream offset separating template draws from chain draws.
pub const TEMPLATE_STREAM_BASE: u64 = 1 << 32;

/// A loaded checkpoint ready for sampling.
pub struct Sampler {
    pub model: Denoiser,
    pub checkpoint: Checkpoint,
    pub mode: PosteriorMode,
}

impl Sampler {
    pub fn new(checkpoint: Checkpoint) -> Result<Self> {
        Ok(Self { model: checkpoint.denoiser()?, checkpoint, mode: PosteriorMode::default() })
    }

    pub fn kernel(&self) -> KernelKind {
        self.checkpoint.kernel
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.checkpoint.schedule
    }

    /// Generator for the node template of chain `index`.
    pub fn template_rng(seed: u64, index: u64) -> StreamRng {
        stream_rng(seed, TEMPLATE_STREAM_BASE + index)
    }

    /// Generator for the reverse steps of chain `index`.
    pub fn chain_rng(seed: u64, index: u64) -> StreamRng {
        stream_rng(seed, index)
    }

    /// Node count and features for chain `index`, drawn from the training
    /// profiles. With `n_nodes`, only profiles of that size are eligible;
    /// features default to 1 when none match.
    pub fn template(&self, seed: u64, index: u64, n_nodes: Option<usize>) -> GraphSample {
        let mut rng = Self::template_rng(seed, index);
        match n_nodes {
            Some(n) => {
                let matching: Vec<_> = self.checkpoint.node_profiles.iter().filter(|p| p.n() == n).collect();
                if matching.is_empty() {
                    GraphSample::empty(n)
                } else {
                    matching[rand::Rng::gen_range(&mut rng, 0..matching.len())].empty_graph()
                }
            }
            None => self.checkpoint.draw_profile(&mut rng, 10).empty_graph(),
        }
    }

    pub fn chain(&self, template: &GraphSample, constraints: ConstraintSet, seed: u64, index: u64) -> Result<ReverseChain> {
        Ok(ReverseChain::new(self.kernel(), self.schedule().clone(), template, constraints, Self::chain_rng(seed, index))?
            .with_mode(self.mode))
    }

    /// Chain `index` of a seeded batch, with its own template.
    pub fn sample_one(
        &self,
        seed: u64,
        index: u64,
        n_nodes: Option<usize>,
        constraints: Option<&ConstraintSet>,
        record_every: Option<usize>,
    ) -> Result<(GraphSample, Option<TrajectoryRecord>)> {
        let template = self.template(seed, index, n_nodes.or(constraints.map(|c| c.n)));
        let c = constraints.cloned().unwrap_or_else(|| ConstraintSet::new(template.n()));
        let mut chain = self.chain(&template, c, seed, index)?;
        if let Some(every) = record_every {
            chain = chain.with_recording(every);
        }
        chain.run(&self.model)?;
        let traj = chain.trajectory();
        Ok((chain.into_graph(), traj))
    }

    /// Checks that the requested kernel is the one the model was trained with.
    pub fn expect_kernel(&self, kernel: KernelKind) -> Result<()> {
        if kernel != self.kernel() {
            return Err(Error::InvalidArgument(format!(
                "checkpoint was trained with {} but {kernel} was requested",
                self.kernel()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{default_schedule, forward_prob};
    use proptest::prelude::*;

    #[test]
    fn macro_sizes() {
        let c = expand_macro(&Macro::Clique { nodes: (0..6).collect() }, 10).unwrap();
        assert_eq!((c.require.len(), c.forbid.len()), (15, 0));
        let r = expand_macro(&Macro::Ring { nodes: vec![3, 1, 4, 0, 5, 9] }, 10).unwrap();
        assert_eq!((r.require.len(), r.forbid.len()), (6, 9));
        let p = expand_macro(&Macro::Partition { groups: vec![(0..5).collect(), (5..10).collect()] }, 10).unwrap();
        assert_eq!((p.require.len(), p.forbid.len()), (0, 25));
    }

    #[test]
    fn malformed_macros_rejected() {
        assert!(expand_macro(&Macro::Clique { nodes: vec![0, 0, 1] }, 5).is_err());
        assert!(expand_macro(&Macro::Ring { nodes: vec![0, 1] }, 5).is_err());
        assert!(expand_macro(&Macro::Partition { groups: vec![vec![0, 1], vec![1, 2]] }, 5).is_err());
        assert!(expand_macro(&Macro::Clique { nodes: vec![0, 7] }, 5).is_err());
        let mut c = expand_macro(&Macro::Clique { nodes: vec![0, 1, 2] }, 5).unwrap();
        let ring = expand_macro(&Macro::Ring { nodes: vec![0, 3, 1, 4] }, 5).unwrap();
        assert!(matches!(c.merge(&ring), Err(Error::InvalidConstraints(_))));
    }

    #[test]
    fn enforce_examples() {
        let mut c = ConstraintSet::new(4);
        c.require_position(0).unwrap();
        c.require_position(3).unwrap();
        let out = enforce_constraints(&EdgeVector::zeros(6), &c);
        assert_eq!(out.iter().collect::<Vec<_>>(), vec![true, false, false, true, false, false]);
        assert_eq!(enforce_constraints(&out, &c), out);
    }

    proptest! {
        #[test]
        fn enforce_repairs_exactly_the_violations(bits in proptest::collection::vec(any::<bool>(), 28), locks in proptest::collection::vec((0usize..28, any::<bool>()), 0..30)) {
            let x = EdgeVector::from_bits(bits);
            let mut c = ConstraintSet::new(8);
            for (p, req) in locks {
                let _ = if req { c.require_position(p) } else { c.forbid_position(p) };
            }
            let violated = c.violations(&x);
            let out = enforce_constraints(&x, &c);
            prop_assert!(c.is_satisfied_by(&out));
            prop_assert_eq!(out.hamming(&x), violated);
        }
    }

    #[test]
    fn constraint_file_round_trip() {
        let file = ConstraintFile {
            n: 6,
            macros: vec![Macro::Ring { nodes: vec![0, 1, 2, 3] }],
            require: vec![[4, 5]],
            forbid: vec![[0, 5]],
        };
        let json = serde_json::to_string(&file).unwrap();
        assert!(json.contains("\"kind\":\"ring\""));
        let c = serde_json::from_str::<ConstraintFile>(&json).unwrap().build().unwrap();
        assert_eq!(c.require.len(), 5);
        assert_eq!(c.forbid.len(), 3);
        let back = ConstraintFile::from(&c).build().unwrap();
        assert_eq!((back.require, back.forbid), (c.require, c.forbid));
    }

    fn fixed_graph() -> GraphSample {
        GraphSample::from_edge_list(vec![1.0; 6], &[[0, 1], [1, 2], [2, 0], [3, 4]]).unwrap()
    }

    #[test]
    fn oracle_bit_one_recovers_target() {
        let g = fixed_graph();
        let oracle = OracleDenoiser { target: g.edges().clone() };
        let sched = default_schedule(1000).unwrap();
        for s in 0..5 {
            let (out, _) = sample(&oracle, KernelKind::BitOne, &sched, &g, None, stream_rng(s, 0), None).unwrap();
            assert_eq!(out.edges(), g.edges());
        }
    }

    #[test]
    fn single_step_schedule() {
        let g = fixed_graph();
        let oracle = OracleDenoiser { target: g.edges().clone() };
        let sched = NoiseSchedule::from_betas(vec![0.5 - 1e-6]).unwrap();
        let mut c = ConstraintSet::new(6);
        c.require_pair(4, 5).unwrap();
        c.forbid_pair(0, 1).unwrap();
        let mut chain = ReverseChain::new(KernelKind::BitFlip, sched, &g, c.clone(), stream_rng(2, 0)).unwrap();
        chain.step(&oracle).unwrap();
        assert!(chain.is_finished());
        assert!(c.is_satisfied_by(chain.graph().edges()));
        // t = 1 posterior with known x0 is x0 itself.
        let mut expect = g.edges().clone();
        c.repair(&mut expect);
        assert_eq!(chain.graph().edges(), &expect);
        assert!(chain.step(&oracle).is_err());
    }

    #[test]
    fn constraints_hold_for_every_kernel() {
        let sched = default_schedule(60).unwrap();
        let g = fixed_graph();
        let model = Denoiser::new(crate::denoiser::DenoiserConfig::tiny(), &mut stream_rng(3, 0)).unwrap();
        let mut c = ConstraintSet::new(6);
        c.merge(&expand_macro(&Macro::Ring { nodes: vec![5, 0, 2, 4] }, 6).unwrap()).unwrap();
        for kind in KernelKind::ALL {
            for s in 0..5 {
                let (out, traj) = sample(&model, kind, &sched, &g, Some(&c), stream_rng(s, 1), Some(7)).unwrap();
                assert!(c.is_satisfied_by(out.edges()));
                let traj = traj.unwrap();
                assert_eq!(traj.entries.first().unwrap().t, 60);
                assert_eq!(traj.entries.last().unwrap().t, 0);
                assert!(traj.entries.windows(2).all(|w| w[0].t > w[1].t));
                for e in &traj.entries {
                    let x = GraphSample::from_edge_list(vec![1.0; 6], &e.edges).unwrap();
                    assert!(c.is_satisfied_by(x.edges()));
                }
            }
        }
    }

    #[test]
    fn absorbing_kernels_are_monotone_without_locks() {
        let sched = default_schedule(80).unwrap();
        let g = fixed_graph();
        let model = Denoiser::new(crate::denoiser::DenoiserConfig::tiny(), &mut stream_rng(4, 0)).unwrap();
        for (kind, decreasing) in [(KernelKind::BitOne, true), (KernelKind::BitZero, false)] {
            let (_, traj) = sample(&model, kind, &sched, &g, None, stream_rng(9, 0), Some(1)).unwrap();
            let counts: Vec<usize> = traj.unwrap().entries.iter().map(|e| e.edges.len()).collect();
            for w in counts.windows(2) {
                assert!(if decreasing { w[1] <= w[0] } else { w[1] >= w[0] });
            }
        }
    }

    #[test]
    fn oracle_marginals_small() {
        // beta_T = 1/2 makes the bit-flip prior the exact forward marginal.
        let sched = NoiseSchedule::from_betas(vec![0.05, 0.1, 0.2, 0.3, 0.5]).unwrap();
        let g = fixed_graph();
        let oracle = OracleDenoiser { target: g.edges().clone() };
        let chains = 4000;
        for kind in [KernelKind::BitFlip] {
            let mut ones = vec![vec![0usize; g.edges().len()]; 6];
            for s in 0..chains {
                let mut chain = ReverseChain::new(kind, sched.clone(), &g, ConstraintSet::new(6), stream_rng(s, 7)).unwrap();
                loop {
                    for (i, b) in chain.graph().edges().iter().enumerate() {
                        ones[chain.t()][i] += b as usize;
                    }
                    if chain.is_finished() {
                        break;
                    }
                    chain.step(&oracle).unwrap();
                }
            }
            for t in 0..=5 {
                for (i, x0) in g.edges().iter().enumerate() {
                    let p = forward_prob(kind, &sched, x0, t).unwrap().p();
                    let freq = ones[t][i] as f64 / chains as f64;
                    let sigma = (p * (1.0 - p) / chains as f64).sqrt();
                    assert!((freq - p).abs() <= 3.0 * sigma + 1e-12, "{kind} t={t} bit {i}: {freq} vs {p}");
                }
            }
        }
    }

    #[test]
    fn threshold_mode_with_certain_predictions_matches_marginal() {
        let sched = default_schedule(50).unwrap();
        let g = fixed_graph();
        let oracle = OracleDenoiser { target: g.edges().clone() };
        for kind in KernelKind::ALL {
            let a = ReverseChain::new(kind, sched.clone(), &g, ConstraintSet::new(6), stream_rng(5, 5)).unwrap();
            let mut b = a.clone().with_mode(PosteriorMode::Threshold);
            let mut a = a;
            a.run(&oracle).unwrap();
            b.run(&oracle).unwrap();
            assert_eq!(a.graph(), b.graph());
        }
    }

    #[test]
    fn rejects_mismatched_constraints() {
        let sched = default_schedule(10).unwrap();
        let g = fixed_graph();
        assert!(ReverseChain::new(KernelKind::BitOne, sched, &g, ConstraintSet::new(5), stream_rng(0, 0)).is_err());
        let mut bad = ConstraintSet::new(6);
        bad.require.insert(3);
        bad.forbid.insert(3);
        assert!(bad.validate().is_err());
    }
}
