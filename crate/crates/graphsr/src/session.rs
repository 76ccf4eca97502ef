//! Interactive acquisition sessions: one [`SrEngine`] per session, persisted
//! as JSON after every transition.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use graphsr_core::selector::EngineSnapshot;
use graphsr_core::{Graph, IterationRecord, Kernel, LaplacianMatrix, LassoConfig, SrConfig, SrEngine, Spectrum, VertexMeta};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("unknown session {0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Schema(String),
    #[error("{0}")]
    BadRequest(String),
    #[error(transparent)]
    Core(#[from] graphsr_core::Error),
}

pub type SessionResult<T> = std::result::Result<T, SessionError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    #[default]
    Real,
    Binary,
}

/// Shape of one observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub p: usize,
    #[serde(default)]
    pub feature_names: Vec<String>,
    #[serde(default)]
    pub kind: ValueKind,
}

impl Schema {
    fn validate(&self) -> SessionResult<()> {
        if self.p == 0 {
            return Err(SessionError::BadRequest("schema.p must be at least 1".into()));
        }
        if !self.feature_names.is_empty() && self.feature_names.len() != self.p {
            return Err(SessionError::BadRequest(format!(
                "schema lists {} feature names for p={}",
                self.feature_names.len(),
                self.p
            )));
        }
        Ok(())
    }

    fn check(&self, values: &[f64]) -> SessionResult<()> {
        if values.len() != self.p {
            return Err(SessionError::Schema(format!("expected {} values, got {}", self.p, values.len())));
        }
        if let Some(x) = values.iter().find(|x| !x.is_finite()) {
            return Err(SessionError::Schema(format!("non-finite value {x}")));
        }
        if self.kind == ValueKind::Binary {
            if let Some(x) = values.iter().find(|&&x| x != 0.0 && x != 1.0) {
                return Err(SessionError::Schema(format!("binary schema accepts only 0 or 1, got {x}")));
            }
        }
        Ok(())
    }
}

/// Body of `POST /sessions`. Relative paths resolve against the data directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    pub graph: PathBuf,
    pub k: usize,
    #[serde(default = "default_xi")]
    pub xi: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub m: usize,
    pub schema: Schema,
    #[serde(default)]
    pub kernel: Kernel,
    /// JSON array with one string map per vertex.
    #[serde(default)]
    pub meta: Option<PathBuf>,
}

fn default_xi() -> f64 {
    LassoConfig::default().xi
}

fn default_alpha() -> f64 {
    1.0
}

impl CreateSession {
    pub fn config(&self) -> SrConfig {
        SrConfig {
            kernel: self.kernel,
            alpha: self.alpha,
            lasso: LassoConfig::with_xi(self.xi),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    AwaitingObservation,
    Complete,
}

/// What is written to `DIR/{id}.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionRecord {
    pub id: String,
    pub request: CreateSession,
    pub laplacian_sha256: String,
    pub status: Status,
    pub created_ms: u64,
    pub updated_ms: u64,
    pub engine: EngineSnapshot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub vertex: usize,
    pub delta: f64,
    pub vertex_meta: Option<VertexMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextView {
    pub id: String,
    pub status: Status,
    pub observed: usize,
    pub budget: usize,
    #[serde(flatten)]
    pub proposal: Option<Proposal>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserveOutcome {
    pub accepted: bool,
    pub complete: bool,
    pub next: Option<Proposal>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateView {
    pub n: usize,
    pub p: usize,
    pub feature_names: Vec<String>,
    /// Row-major N x p.
    pub estimate: Vec<Vec<f64>>,
    pub observed: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateView {
    pub id: String,
    pub status: Status,
    pub request: CreateSession,
    pub policy: Vec<usize>,
    pub observations: Vec<Vec<f64>>,
    pub utility: f64,
    pub log: Vec<IterationRecord>,
}

/// Spectra shared between sessions on the same graph, cached on disk under
/// `DIR/cache/`.
#[derive(Debug)]
pub struct SpectrumCache {
    dir: PathBuf,
    mem: Mutex<HashMap<(String, usize), Arc<Spectrum>>>,
}

impl SpectrumCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        SpectrumCache {
            dir: dir.into(),
            mem: Mutex::new(HashMap::new()),
        }
    }

    pub fn get(&self, laplacian: &LaplacianMatrix, k: usize) -> graphsr_core::Result<Arc<Spectrum>> {
        let key = (laplacian.content_hash(), k);
        if let Some(s) = self.mem.lock().expect("cache lock").get(&key) {
            return Ok(s.clone());
        }
        let path = self.dir.join(format!("{}-k{}.json", key.0, k));
        let spectrum = match Spectrum::load_cache(laplacian, &path) {
            Ok(s) if s.band() == k => s,
            _ => {
                let s = Spectrum::compute(laplacian, k)?;
                if fs::create_dir_all(&self.dir).is_ok() {
                    if let Err(e) = s.save_cache(laplacian, &path) {
                        log::warn!("could not cache spectrum: {e}");
                    }
                }
                s
            }
        };
        let spectrum = Arc::new(spectrum);
        self.mem.lock().expect("cache lock").insert(key, spectrum.clone());
        Ok(spectrum)
    }
}

#[derive(Debug, Clone)]
pub struct Session {
    record: SessionRecord,
    engine: SrEngine,
    meta: Option<Vec<VertexMeta>>,
}

struct Loaded {
    laplacian_sha256: String,
    spectrum: Arc<Spectrum>,
    meta: Option<Vec<VertexMeta>>,
}

fn resolve(data_dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        data_dir.join(p)
    }
}

fn load_inputs(req: &CreateSession, data_dir: &Path, cache: &SpectrumCache) -> SessionResult<Loaded> {
    let graph = Graph::read_grf(resolve(data_dir, &req.graph))?;
    let n = graph.n_vertices();
    if req.k == 0 || req.k > n {
        return Err(SessionError::BadRequest(format!("k={} must lie in 1..={n}", req.k)));
    }
    if req.m == 0 || req.m > n {
        return Err(SessionError::BadRequest(format!("m={} must lie in 1..={n}", req.m)));
    }
    let meta = match &req.meta {
        Some(p) => {
            let meta = graphsr_core::io::read_meta(resolve(data_dir, p))?;
            if meta.len() != n {
                return Err(SessionError::BadRequest(format!("metadata lists {} vertices, graph has {n}", meta.len())));
            }
            Some(meta)
        }
        None => None,
    };
    let laplacian = graph.laplacian();
    let spectrum = cache.get(&laplacian, req.k)?;
    Ok(Loaded {
        laplacian_sha256: laplacian.content_hash(),
        spectrum,
        meta,
    })
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

impl Session {
    pub fn create(id: String, req: CreateSession, data_dir: &Path, cache: &SpectrumCache) -> SessionResult<Self> {
        req.schema.validate()?;
        let config = req.config();
        let loaded = load_inputs(&req, data_dir, cache)?;
        let engine = SrEngine::new(loaded.spectrum, config, req.schema.p)?;
        let now = now_ms();
        let record = SessionRecord {
            id,
            request: req,
            laplacian_sha256: loaded.laplacian_sha256,
            status: Status::AwaitingObservation,
            created_ms: now,
            updated_ms: now,
            engine: engine.snapshot(),
        };
        Ok(Session {
            record,
            engine,
            meta: loaded.meta,
        })
    }

    /// Rebuilds a session from its persisted record. The graph must still
    /// hash to the recorded Laplacian.
    pub fn restore(record: SessionRecord, data_dir: &Path, cache: &SpectrumCache) -> SessionResult<Self> {
        let loaded = load_inputs(&record.request, data_dir, cache)?;
        if loaded.laplacian_sha256 != record.laplacian_sha256 {
            return Err(SessionError::Core(graphsr_core::Error::CacheMismatch {
                expected: record.laplacian_sha256.clone(),
                found: loaded.laplacian_sha256,
            }));
        }
        let engine = SrEngine::restore(loaded.spectrum, record.engine.clone())?;
        Ok(Session {
            record,
            engine,
            meta: loaded.meta,
        })
    }

    pub fn load(path: &Path, data_dir: &Path, cache: &SpectrumCache) -> SessionResult<Self> {
        let bytes = fs::read(path).map_err(|e| graphsr_core::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let record: SessionRecord = serde_json::from_slice(&bytes).map_err(graphsr_core::Error::from)?;
        Session::restore(record, data_dir, cache)
    }

    pub fn id(&self) -> &str {
        &self.record.id
    }

    pub fn status(&self) -> Status {
        self.record.status
    }

    pub fn record(&self) -> &SessionRecord {
        &self.record
    }

    pub fn engine(&self) -> &SrEngine {
        &self.engine
    }

    fn proposal(&self) -> SessionResult<Option<Proposal>> {
        if self.record.status == Status::Complete {
            return Ok(None);
        }
        let vertex = self.engine.propose()?;
        Ok(Some(Proposal {
            vertex,
            delta: self.engine.state().marginal_benefit(vertex)?,
            vertex_meta: self.meta.as_ref().map(|m| m[vertex].clone()),
        }))
    }

    pub fn next(&self) -> SessionResult<NextView> {
        Ok(NextView {
            id: self.record.id.clone(),
            status: self.record.status,
            observed: self.engine.state().policy().len(),
            budget: self.record.request.m,
            proposal: self.proposal()?,
        })
    }

    /// Accepts the observation for the pending vertex, recovers and updates.
    /// Nothing changes when an error is returned.
    pub fn observe(&mut self, vertex: usize, values: Vec<f64>) -> SessionResult<ObserveOutcome> {
        if self.record.status == Status::Complete {
            return Err(SessionError::Conflict("session is complete".into()));
        }
        let pending = self.engine.propose()?;
        if vertex != pending {
            return Err(SessionError::Conflict(format!("vertex {vertex} is not pending; awaiting {pending}")));
        }
        self.record.request.schema.check(&values)?;
        self.engine.observe(vertex, values)?;
        if self.engine.state().policy().len() >= self.record.request.m {
            self.record.status = Status::Complete;
        }
        self.record.engine = self.engine.snapshot();
        self.record.updated_ms = now_ms();
        let next = self.proposal()?;
        Ok(ObserveOutcome {
            accepted: true,
            complete: next.is_none(),
            next,
        })
    }

    pub fn estimate(&self) -> EstimateView {
        let z = self.engine.estimate();
        let n = z.nrows();
        let mut observed = vec![false; n];
        for &v in self.engine.state().policy() {
            observed[v] = true;
        }
        EstimateView {
            n,
            p: z.ncols(),
            feature_names: self.record.request.schema.feature_names.clone(),
            estimate: z.row_iter().map(|r| r.iter().copied().collect()).collect(),
            observed,
        }
    }

    pub fn state(&self) -> StateView {
        let st = self.engine.state();
        StateView {
            id: self.record.id.clone(),
            status: self.record.status,
            request: self.record.request.clone(),
            policy: st.policy().to_vec(),
            observations: st.observations().to_vec(),
            utility: st.utility(),
            log: self.engine.log().to_vec(),
        }
    }

    /// Writes `DIR/{id}.json` through a temporary file and a rename.
    pub fn persist(&self, dir: &Path) -> graphsr_core::Result<()> {
        let path = session_path(dir, &self.record.id);
        let tmp = path.with_extension("json.tmp");
        let bytes = serde_json::to_vec(&self.record)?;
        let io = |path: &Path, e| graphsr_core::Error::Io {
            path: path.to_path_buf(),
            source: e,
        };
        fs::write(&tmp, bytes).map_err(|e| io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| io(&path, e))
    }
}

pub fn session_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.json"))
}

/// Session ids: 32 lowercase hex digits.
pub fn new_id() -> String {
    uuid::Uuid::new_v4().simple().to_string()
}

fn is_session_file(path: &Path) -> bool {
    path.extension().is_some_and(|x| x == "json")
        && path
            .file_stem()
            .and_then(|s| s.to_str())
            .is_some_and(|s| s.len() == 32 && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)))
}

/// Loads every `{id}.json` session record directly under `dir`. Records that
/// fail to load are skipped with a warning.
pub fn load_all(dir: &Path, cache: &SpectrumCache) -> Vec<Session> {
    let Ok(entries) = fs::read_dir(dir) else {
        return Vec::new();
    };
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_session_file(p))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .filter_map(|p| match Session::load(&p, dir, cache) {
            Ok(s) => Some(s),
            Err(e) => {
                log::warn!("skipping {}: {e}", p.display());
                None
            }
        })
        .collect()
}
