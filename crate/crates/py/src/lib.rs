//! Python bindings: graphs, kernels, training, constrained sampling and
//! evaluation.

use std::sync::Arc;

use graphguide::checkpoint::Checkpoint as CoreCheckpoint;
use graphguide::datasets::{Dataset, DatasetSpec, Family};
use graphguide::denoiser::DenoiserConfig;
use graphguide::evaluation::{self, MMDConfig, MMDReport, Statistic};
use graphguide::kernels::{self, default_schedule};
use graphguide::sampler::{ConstraintFile, Macro, ReverseChain, Sampler as CoreSampler};
use graphguide::trainer::{TrainConfig, Trainer};
use graphguide::{GraphSample, KernelKind, NoiseSchedule};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(pygraphguide, GraphGuideError, PyException);

fn to_py(e: graphguide::Error) -> PyErr {
    match e {
        graphguide::Error::InvalidArgument(m) | graphguide::Error::InvalidConstraints(m) => PyValueError::new_err(m),
        other => GraphGuideError::new_err(other.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = graphguide::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

#[pyclass(name = "Graph", module = "pygraphguide", skip_from_py_object, eq)]
#[derive(Clone, PartialEq)]
pub struct Graph {
    inner: GraphSample,
}

#[pymethods]
impl Graph {
    #[new]
    #[pyo3(signature = (node_features, edges=Vec::new()))]
    fn new(node_features: Vec<f64>, edges: Vec<[usize; 2]>) -> PyResult<Self> {
        Ok(Self { inner: GraphSample::from_edge_list(node_features, &edges).map_err(to_py)? })
    }

    #[staticmethod]
    fn empty(n: usize) -> Self {
        Self { inner: GraphSample::empty(n) }
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn node_features(&self) -> Vec<f64> {
        self.inner.node_features().to_vec()
    }

    #[getter]
    fn edge_list(&self) -> Vec<[usize; 2]> {
        self.inner.edge_list()
    }

    fn num_edges(&self) -> usize {
        self.inner.num_edges()
    }

    fn has_edge(&self, i: usize, j: usize) -> bool {
        self.inner.has_edge(i, j)
    }

    /// Upper-triangle edge bits in canonical pair order.
    fn edge_bits(&self) -> Vec<bool> {
        self.inner.edges().as_slice().to_vec()
    }

    fn adjacency(&self) -> Vec<Vec<u8>> {
        self.inner.to_adjacency()
    }

    fn degree_sequence(&self) -> Vec<usize> {
        self.inner.degree_sequence()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner.to_record()).map_err(|e| GraphGuideError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let record: graphguide::GraphRecord =
            serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self { inner: GraphSample::try_from(record).map_err(to_py)? })
    }

    fn __repr__(&self) -> String {
        format!("Graph(n={}, edges={})", self.inner.n(), self.inner.num_edges())
    }
}

fn graphs_of(list: &[PyRef<'_, Graph>]) -> Vec<GraphSample> {
    list.iter().map(|g| g.inner.clone()).collect()
}

fn wrap(graphs: Vec<GraphSample>) -> Vec<Graph> {
    graphs.into_iter().map(|inner| Graph { inner }).collect()
}

/// Per-step noise rates `beta_1..beta_T`.
#[pyclass(name = "Schedule", module = "pygraphguide", skip_from_py_object)]
#[derive(Clone)]
pub struct Schedule {
    inner: NoiseSchedule,
}

#[pymethods]
impl Schedule {
    /// Sigmoid schedule over `steps` steps.
    #[staticmethod]
    #[pyo3(name = "default", signature = (steps=1000))]
    fn default_(steps: usize) -> PyResult<Self> {
        Ok(Self { inner: default_schedule(steps).map_err(to_py)? })
    }

    #[staticmethod]
    fn from_betas(betas: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: NoiseSchedule::from_betas(betas).map_err(to_py)? })
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.steps()
    }

    #[getter]
    fn betas(&self) -> Vec<f64> {
        self.inner.betas()[1..].to_vec()
    }

    /// `P(x_t = 1 | x_0)`.
    fn forward_prob(&self, kernel: &str, x0: bool, t: usize) -> PyResult<f64> {
        Ok(kernels::forward_prob(parse(kernel)?, &self.inner, x0, t).map_err(to_py)?.p())
    }

    /// `P(x_t = 1 | x_{t-1})`.
    fn step_prob(&self, kernel: &str, x_prev: bool, t: usize) -> PyResult<f64> {
        Ok(kernels::step_prob(parse(kernel)?, &self.inner, x_prev, t).map_err(to_py)?.p())
    }

    /// `P(x_{t-1} = 1 | x_t, x_0)`.
    fn posterior_prob(&self, kernel: &str, x0: bool, xt: bool, t: usize) -> PyResult<f64> {
        Ok(kernels::posterior_prob(parse(kernel)?, &self.inner, x0, xt, t).map_err(to_py)?.p())
    }

    fn __repr__(&self) -> String {
        format!("Schedule(steps={})", self.inner.steps())
    }
}

/// Prior edge probability of a kernel's limiting distribution.
#[pyfunction]
fn prior_prob(kernel: &str) -> PyResult<f64> {
    Ok(kernels::prior_prob(parse(kernel)?))
}

/// Edge locks and motif macros.
#[pyclass(name = "Constraints", module = "pygraphguide", skip_from_py_object)]
#[derive(Clone)]
pub struct Constraints {
    inner: ConstraintFile,
}

#[pymethods]
impl Constraints {
    #[new]
    #[pyo3(signature = (n, require=Vec::new(), forbid=Vec::new()))]
    fn new(n: usize, require: Vec<[usize; 2]>, forbid: Vec<[usize; 2]>) -> PyResult<Self> {
        let c = Self { inner: ConstraintFile { n, macros: Vec::new(), require, forbid } };
        c.inner.build().map_err(to_py)?;
        Ok(c)
    }

    fn add_clique(&mut self, nodes: Vec<usize>) -> PyResult<()> {
        self.push(Macro::Clique { nodes })
    }

    fn add_ring(&mut self, nodes: Vec<usize>) -> PyResult<()> {
        self.push(Macro::Ring { nodes })
    }

    fn add_partition(&mut self, groups: Vec<Vec<usize>>) -> PyResult<()> {
        self.push(Macro::Partition { groups })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    /// Number of locked edge positions.
    fn __len__(&self) -> PyResult<usize> {
        Ok(self.inner.build().map_err(to_py)?.len())
    }

    fn violations(&self, graph: &Graph) -> PyResult<usize> {
        let set = self.inner.build().map_err(to_py)?;
        if set.n != graph.inner.n() {
            return Err(PyValueError::new_err("constraint node count does not match the graph"));
        }
        Ok(set.violations(graph.inner.edges()))
    }

    fn is_satisfied_by(&self, graph: &Graph) -> PyResult<bool> {
        Ok(self.violations(graph)? == 0)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| GraphGuideError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: ConstraintFile = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        inner.build().map_err(to_py)?;
        Ok(Self { inner })
    }
}

impl Constraints {
    fn push(&mut self, m: Macro) -> PyResult<()> {
        let mut next = self.inner.clone();
        next.macros.push(m);
        next.build().map_err(to_py)?;
        self.inner = next;
        Ok(())
    }
}

#[pyclass(name = "Checkpoint", module = "pygraphguide", skip_from_py_object)]
#[derive(Clone)]
pub struct Checkpoint {
    inner: CoreCheckpoint,
}

#[pymethods]
impl Checkpoint {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self { inner: CoreCheckpoint::load(path).map_err(to_py)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(to_py)
    }

    #[getter]
    fn kernel(&self) -> String {
        self.inner.kernel.to_string()
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.schedule.steps()
    }

    #[getter]
    fn epoch(&self) -> usize {
        self.inner.epoch
    }

    fn num_params(&self) -> usize {
        self.inner.params.iter().map(|p| p.values.len()).sum()
    }

    fn __repr__(&self) -> String {
        format!("Checkpoint(kernel={}, steps={}, epoch={})", self.inner.kernel, self.inner.schedule.steps(), self.inner.epoch)
    }
}

fn model_config(name: &str) -> PyResult<DenoiserConfig> {
    match name {
        "full" => Ok(DenoiserConfig::full()),
        "desk" => Ok(DenoiserConfig::desk()),
        "tiny" => Ok(DenoiserConfig::tiny()),
        other => Err(PyValueError::new_err(format!("unknown model size `{other}`"))),
    }
}

/// Synthetic graphs of a family, as a cached dataset would hold them.
#[pyfunction]
#[pyo3(signature = (family, count, seed=0))]
fn generate_dataset(family: &str, count: usize, seed: u64) -> PyResult<Vec<Graph>> {
    let spec = DatasetSpec::cached(parse::<Family>(family)?, count, seed);
    Ok(wrap(Dataset::new(spec).map_err(to_py)?.epoch(0)))
}

/// Trains a denoiser; returns the checkpoint and the per-epoch mean losses.
#[pyfunction]
#[pyo3(signature = (family, kernel, epochs, seed=0, model="desk", cached=200, per_epoch=None, steps=1000, batch_size=32, lr=1e-3))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    family: &str,
    kernel: &str,
    epochs: usize,
    seed: u64,
    model: &str,
    cached: usize,
    per_epoch: Option<usize>,
    steps: usize,
    batch_size: usize,
    lr: f64,
) -> PyResult<(Checkpoint, Vec<f64>)> {
    let family = parse::<Family>(family)?;
    let data = match per_epoch {
        Some(k) => DatasetSpec::streaming(family, k, seed),
        None => DatasetSpec::cached(family, cached, seed),
    };
    let mut cfg = TrainConfig::new(parse(kernel)?, epochs, seed);
    cfg.schedule = default_schedule(steps).map_err(to_py)?;
    cfg.batch_size = batch_size;
    cfg.learning_rate = lr;
    let model = model_config(model)?;
    py.detach(move || {
        let mut trainer = Trainer::new(data, model, cfg)?;
        let mut losses = Vec::with_capacity(epochs);
        while trainer.epoch() < epochs {
            losses.push(trainer.run_epoch()?.0);
        }
        Ok((Checkpoint { inner: trainer.checkpoint() }, losses))
    })
    .map_err(to_py)
}

/// A loaded model for drawing graphs.
#[pyclass(name = "Sampler", module = "pygraphguide")]
pub struct Sampler {
    inner: Arc<CoreSampler>,
}

#[pymethods]
impl Sampler {
    #[new]
    fn new(checkpoint: &Checkpoint) -> PyResult<Self> {
        Ok(Self { inner: Arc::new(CoreSampler::new(checkpoint.inner.clone()).map_err(to_py)?) })
    }

    #[getter]
    fn kernel(&self) -> String {
        self.inner.kernel().to_string()
    }

    /// Draws `count` graphs; chain `i` matches the command-line sampler.
    #[pyo3(signature = (count, seed=0, n=None, constraints=None))]
    fn sample(&self, py: Python<'_>, count: usize, seed: u64, n: Option<usize>, constraints: Option<&Constraints>) -> PyResult<Vec<Graph>> {
        let set = constraints.map(|c| c.inner.build()).transpose().map_err(to_py)?;
        let sampler = Arc::clone(&self.inner);
        let graphs = py
            .detach(move || {
                (0..count as u64)
                    .map(|i| sampler.sample_one(seed, i, n, set.as_ref(), None).map(|(g, _)| g))
                    .collect::<graphguide::Result<Vec<_>>>()
            })
            .map_err(to_py)?;
        Ok(wrap(graphs))
    }

    /// A chain to advance step by step.
    #[pyo3(signature = (seed=0, index=0, n=None, constraints=None))]
    fn chain(&self, seed: u64, index: u64, n: Option<usize>, constraints: Option<&Constraints>) -> PyResult<Chain> {
        let set = constraints.map(|c| c.inner.build()).transpose().map_err(to_py)?;
        let template = self.inner.template(seed, index, n.or(set.as_ref().map(|c| c.n)));
        let set = set.unwrap_or_else(|| graphguide::sampler::ConstraintSet::new(template.n()));
        let chain = self.inner.chain(&template, set, seed, index).map_err(to_py)?;
        Ok(Chain { chain, sampler: Arc::clone(&self.inner) })
    }
}

/// One reverse-diffusion chain whose locks may change between steps.
#[pyclass(name = "Chain", module = "pygraphguide")]
pub struct Chain {
    chain: ReverseChain,
    sampler: Arc<CoreSampler>,
}

#[pymethods]
impl Chain {
    #[getter]
    fn t(&self) -> usize {
        self.chain.t()
    }

    #[getter]
    fn finished(&self) -> bool {
        self.chain.is_finished()
    }

    #[getter]
    fn graph(&self) -> Graph {
        Graph { inner: self.chain.graph().clone() }
    }

    /// Latest predicted clean-edge probabilities, in canonical pair order.
    #[getter]
    fn probs(&self) -> Vec<f64> {
        self.chain.last_probs().to_vec()
    }

    /// Runs up to `k` steps; returns the repairs applied.
    #[pyo3(signature = (k=1))]
    fn step(&mut self, k: usize) -> PyResult<usize> {
        if self.chain.is_finished() {
            return Err(GraphGuideError::new_err("chain already finished"));
        }
        let mut repairs = 0;
        for _ in 0..k {
            if self.chain.is_finished() {
                break;
            }
            repairs += self.chain.step(&self.sampler.model).map_err(to_py)?.repairs;
        }
        Ok(repairs)
    }

    /// Replaces the locks and repairs the current state.
    fn set_constraints(&mut self, constraints: &Constraints) -> PyResult<usize> {
        let set = constraints.inner.build().map_err(to_py)?;
        self.chain.set_constraints(set).map_err(to_py)
    }
}

fn statistic(name: &str) -> PyResult<Statistic> {
    match name {
        "degree" => Ok(Statistic::Degree),
        "clustering" => Ok(Statistic::Clustering),
        "orbit" => Ok(Statistic::Orbit),
        other => Err(PyValueError::new_err(format!("unknown statistic `{other}`"))),
    }
}

/// MMD between two graph sets under one statistic.
#[pyfunction]
#[pyo3(signature = (a, b, statistic_name="degree", sigma=1.0))]
fn mmd(a: Vec<PyRef<'_, Graph>>, b: Vec<PyRef<'_, Graph>>, statistic_name: &str, sigma: f64) -> PyResult<f64> {
    let cfg = MMDConfig { sigma, ..MMDConfig::standard(statistic(statistic_name)?) };
    evaluation::mmd(&graphs_of(&a), &graphs_of(&b), &cfg).map_err(to_py)
}

/// Per-statistic MMD ratios of generated against training graphs.
#[pyfunction]
fn evaluate<'py>(
    py: Python<'py>,
    generated: Vec<PyRef<'py, Graph>>,
    train: Vec<PyRef<'py, Graph>>,
    validation: Vec<PyRef<'py, Graph>>,
) -> PyResult<Bound<'py, PyDict>> {
    let report = evaluation::evaluate(&graphs_of(&generated), &graphs_of(&train), &graphs_of(&validation)).map_err(to_py)?;
    let out = PyDict::new(py);
    let rows: [(&str, &MMDReport); 3] = [("degree", &report.degree), ("clustering", &report.clustering), ("orbit", &report.orbit)];
    for (name, r) in rows {
        let row = PyDict::new(py);
        row.set_item("mmd_gen_train", r.mmd_gen_train)?;
        row.set_item("mmd_train_val", r.mmd_train_val)?;
        row.set_item("ratio", r.ratio)?;
        out.set_item(name, row)?;
    }
    Ok(out)
}

/// Per-node counts of the 15 orbits of connected graphlets on up to four
/// nodes.
#[pyfunction]
fn orbit_counts(graph: &Graph) -> Vec<[u64; evaluation::NUM_ORBITS]> {
    evaluation::orbit_counts(&graph.inner)
}

#[pymodule]
fn pygraphguide(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("GraphGuideError", m.py().get_type::<GraphGuideError>())?;
    m.add("KERNELS", KernelKind::ALL.map(|k| k.as_str()).to_vec())?;
    m.add_class::<Graph>()?;
    m.add_class::<Schedule>()?;
    m.add_class::<Constraints>()?;
    m.add_class::<Checkpoint>()?;
    m.add_class::<Sampler>()?;
    m.add_class::<Chain>()?;
    m.add_function(wrap_pyfunction!(prior_prob, m)?)?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(mmd, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(orbit_counts, m)?)?;
    Ok(())
}
