//! Steerable reverse-diffusion sessions and their event logs.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use graphguide::sampler::{ConstraintFile, ConstraintSet, Macro, ReverseChain, Sampler, TrajectoryRecord};
use graphguide::{GraphSample, KernelKind};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};

/// Sessions are chain 0 of their seed, matching the first graph of a CLI
/// batch drawn with the same seed.
pub const SESSION_CHAIN: u64 = 0;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_features: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraints: Option<ConstraintFile>,
    /// Trajectory recording interval; every step when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_every: Option<usize>,
}

/// Incremental lock edit. Removals apply first.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintEdit {
    #[serde(default)]
    pub add_require: Vec<[usize; 2]>,
    #[serde(default)]
    pub add_forbid: Vec<[usize; 2]>,
    #[serde(default)]
    pub remove: Vec<[usize; 2]>,
    #[serde(default)]
    pub macros: Vec<Macro>,
}

impl ConstraintEdit {
    pub fn apply(&self, current: &ConstraintSet) -> graphguide::Result<ConstraintSet> {
        let mut next = current.clone();
        let n = current.n;
        for &[i, j] in &self.remove {
            next.unlock_pair(i, j)?;
        }
        let added = ConstraintFile {
            n,
            macros: self.macros.clone(),
            require: self.add_require.clone(),
            forbid: self.add_forbid.clone(),
        }
        .build()?;
        next.merge(&added)?;
        next.validate()?;
        Ok(next)
    }
}

/// One entry of a session's log, in step-index terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum SessionEvent {
    Create(CreateSession),
    Step { k: usize },
    Constraints { t: usize, edit: ConstraintEdit },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Active,
    Finished,
}

/// Graph wire form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphWire {
    pub n: usize,
    pub node_features: Vec<f64>,
    pub edge_list: Vec<[usize; 2]>,
}

impl From<&GraphSample> for GraphWire {
    fn from(g: &GraphSample) -> Self {
        Self { n: g.n(), node_features: g.node_features().to_vec(), edge_list: g.edge_list() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub id: String,
    pub seed: u64,
    pub kernel: KernelKind,
    pub steps: usize,
    pub t: usize,
    pub status: SessionStatus,
    pub graph: GraphWire,
    pub constraints: ConstraintFile,
    pub events: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub t: usize,
    pub status: SessionStatus,
    pub graph: GraphWire,
    /// Predicted clean-edge probabilities from the last step, in canonical
    /// pair order (`(0,1), (0,2), ..., (n-2,n-1)`).
    pub probs: Vec<f64>,
    /// Bits changed by constraint repair across the steps of this call.
    pub repairs: usize,
    pub steps_taken: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintUpdate {
    pub constraints: ConstraintFile,
    /// Bits changed by the immediate repair.
    pub repairs: usize,
    pub graph: GraphWire,
}

/// A live chain and the log that reproduces it.
pub struct Session {
    id: String,
    seed: u64,
    chain: ReverseChain,
    events: Vec<SessionEvent>,
}

impl Session {
    pub fn create(sampler: &Sampler, id: impl Into<String>, req: CreateSession) -> Result<Self> {
        let constraints = req.constraints.as_ref().map(ConstraintFile::build).transpose()?;
        let n = match (&req.node_features, req.n_nodes, &constraints) {
            (Some(f), Some(n), _) if f.len() != n => {
                return Err(ServiceError::BadRequest(format!("{} node features given for {n} nodes", f.len())))
            }
            (Some(f), _, _) => Some(f.len()),
            (None, n, c) => n.or(c.as_ref().map(|c| c.n)),
        };
        if n == Some(0) {
            return Err(ServiceError::BadRequest("a session needs at least one node".into()));
        }
        let template = match &req.node_features {
            Some(f) => GraphSample::new(f.clone(), graphguide::EdgeVector::zeros(graphguide::graph::num_pairs(f.len())))?,
            None => sampler.template(req.seed, SESSION_CHAIN, n),
        };
        let constraints = constraints.unwrap_or_else(|| ConstraintSet::new(template.n()));
        let chain = sampler
            .chain(&template, constraints, req.seed, SESSION_CHAIN)?
            .with_recording(req.record_every.unwrap_or(1));
        Ok(Self { id: id.into(), seed: req.seed, chain, events: vec![SessionEvent::Create(req)] })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn status(&self) -> SessionStatus {
        if self.chain.is_finished() {
            SessionStatus::Finished
        } else {
            SessionStatus::Active
        }
    }

    pub fn graph(&self) -> &GraphSample {
        self.chain.graph()
    }

    pub fn constraints(&self) -> &ConstraintSet {
        self.chain.constraints()
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.events
    }

    fn ensure_active(&self) -> Result<()> {
        match self.status() {
            SessionStatus::Active => Ok(()),
            SessionStatus::Finished => Err(ServiceError::Finished(self.id.clone())),
        }
    }

    /// Runs up to `k` reverse steps, stopping at `t = 0`.
    pub fn step(&mut self, sampler: &Sampler, k: usize) -> Result<StepResult> {
        self.ensure_active()?;
        if k == 0 {
            return Err(ServiceError::BadRequest("k must be at least 1".into()));
        }
        let mut repairs = 0;
        let mut taken = 0;
        while taken < k && !self.chain.is_finished() {
            match self.chain.step(&sampler.model) {
                Ok(out) => repairs += out.repairs,
                Err(e) => {
                    if taken > 0 {
                        self.events.push(SessionEvent::Step { k: taken });
                    }
                    return Err(e.into());
                }
            }
            taken += 1;
        }
        self.events.push(SessionEvent::Step { k: taken });
        Ok(StepResult {
            t: self.chain.t(),
            status: self.status(),
            graph: self.graph().into(),
            probs: self.chain.last_probs().to_vec(),
            repairs,
            steps_taken: taken,
        })
    }

    /// Applies `edit` atomically; a rejected edit leaves the session as is.
    pub fn update_constraints(&mut self, edit: ConstraintEdit) -> Result<ConstraintUpdate> {
        self.ensure_active()?;
        let next = edit.apply(self.chain.constraints())?;
        let repairs = self.chain.set_constraints(next)?;
        self.events.push(SessionEvent::Constraints { t: self.chain.t(), edit });
        Ok(ConstraintUpdate { constraints: self.chain.constraints().into(), repairs, graph: self.graph().into() })
    }

    pub fn state(&self) -> SessionState {
        SessionState {
            id: self.id.clone(),
            seed: self.seed,
            kernel: self.chain.kernel(),
            steps: self.chain.steps(),
            t: self.chain.t(),
            status: self.status(),
            graph: self.graph().into(),
            constraints: self.chain.constraints().into(),
            events: self.events.len(),
        }
    }

    pub fn trajectory(&self) -> TrajectoryRecord {
        self.chain.trajectory().unwrap_or_default()
    }
}

/// Rebuilds a session by re-applying its log.
pub fn replay(sampler: &Sampler, id: &str, events: &[SessionEvent]) -> Result<Session> {
    let Some((SessionEvent::Create(req), rest)) = events.split_first() else {
        return Err(ServiceError::EventLog("log must start with a create event".into()));
    };
    let mut session = Session::create(sampler, id, req.clone())?;
    for ev in rest {
        match ev {
            SessionEvent::Create(_) => return Err(ServiceError::EventLog("repeated create event".into())),
            SessionEvent::Step { k } => {
                session.step(sampler, *k)?;
            }
            SessionEvent::Constraints { t, edit } => {
                if *t != session.chain.t() {
                    return Err(ServiceError::EventLog(format!(
                        "constraint edit logged at t = {t} but replay is at t = {}",
                        session.chain.t()
                    )));
                }
                session.update_constraints(edit.clone())?;
            }
        }
    }
    Ok(session)
}

pub fn read_event_log(path: impl AsRef<Path>) -> Result<Vec<SessionEvent>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| ServiceError::EventLog(format!("{}: {e}", path.display())))?;
    let mut events = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| ServiceError::EventLog(e.to_string()))?;
        if !line.trim().is_empty() {
            events.push(serde_json::from_str(&line).map_err(|e| ServiceError::EventLog(e.to_string()))?);
        }
    }
    Ok(events)
}

/// In-memory session table over one shared checkpoint. Calls on one session
/// are serialized; different sessions proceed independently.
pub struct SessionManager {
    sampler: Arc<Sampler>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    log_dir: Option<PathBuf>,
}

impl SessionManager {
    pub fn new(sampler: Sampler) -> Self {
        Self { sampler: Arc::new(sampler), sessions: RwLock::default(), log_dir: None }
    }

    /// Appends every event to `<dir>/<id>.ndjson` as it happens.
    pub fn with_event_log(mut self, dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| ServiceError::EventLog(format!("{}: {e}", dir.display())))?;
        self.log_dir = Some(dir);
        Ok(self)
    }

    pub fn sampler(&self) -> &Sampler {
        &self.sampler
    }

    pub fn event_log_path(&self, id: &str) -> Option<PathBuf> {
        self.log_dir.as_ref().map(|d| d.join(format!("{id}.ndjson")))
    }

    fn append_events(&self, id: &str, events: &[SessionEvent]) -> Result<()> {
        let Some(path) = self.event_log_path(id) else { return Ok(()) };
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| ServiceError::EventLog(format!("{}: {e}", path.display())))?;
        for ev in events {
            let mut line = serde_json::to_vec(ev).map_err(|e| ServiceError::EventLog(e.to_string()))?;
            line.push(b'\n');
            file.write_all(&line).map_err(|e| ServiceError::EventLog(e.to_string()))?;
        }
        Ok(())
    }

    fn fresh_id(&self) -> String {
        let sessions = self.sessions.read().expect("session table poisoned");
        loop {
            let id = format!("{:016x}", rand::random::<u64>());
            if !sessions.contains_key(&id) {
                return id;
            }
        }
    }

    pub fn create(&self, req: CreateSession) -> Result<SessionState> {
        let id = self.fresh_id();
        let session = Session::create(&self.sampler, id.clone(), req)?;
        self.append_events(&id, session.events())?;
        let state = session.state();
        self.sessions.write().expect("session table poisoned").insert(id, Arc::new(Mutex::new(session)));
        Ok(state)
    }

    pub fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>> {
        self.sessions
            .read()
            .expect("session table poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }

    /// Runs `f` with the session locked and logs the events it adds.
    pub fn with_session<T>(&self, id: &str, f: impl FnOnce(&mut Session, &Sampler) -> Result<T>) -> Result<T> {
        let handle = self.get(id)?;
        let mut session = handle.lock().expect("session poisoned");
        let before = session.events.len();
        let out = f(&mut session, &self.sampler)?;
        self.append_events(id, &session.events[before..])?;
        Ok(out)
    }

    pub fn step(&self, id: &str, k: usize) -> Result<StepResult> {
        self.with_session(id, |s, sampler| s.step(sampler, k))
    }

    pub fn update_constraints(&self, id: &str, edit: ConstraintEdit) -> Result<ConstraintUpdate> {
        self.with_session(id, |s, _| s.update_constraints(edit))
    }

    pub fn state(&self, id: &str) -> Result<SessionState> {
        self.with_session(id, |s, _| Ok(s.state()))
    }

    pub fn trajectory(&self, id: &str) -> Result<TrajectoryRecord> {
        self.with_session(id, |s, _| Ok(s.trajectory()))
    }

    pub fn events(&self, id: &str) -> Result<Vec<SessionEvent>> {
        self.with_session(id, |s, _| Ok(s.events().to_vec()))
    }
}
