//! Adaptive Select-and-Recover: greedy selection on leverage values, with the
//! leverage of the neighbourhood of each observed vertex damped by a diffusion
//! profile whose scale tracks the recovery misfit at that vertex.
//!
//! One iteration is
//!
//! 1. pick the unselected vertex with the largest leverage,
//! 2. observe it,
//! 3. recover the whole signal from every observation so far,
//! 4. set the scale `s = alpha * |y_v - z_v|_2`,
//! 5. subtract `eta * D_s(v, .)` from the leverage, with `eta` chosen so the
//!    observed vertex drops to zero.
//!
//! Negative entries of the truncated-band diffusion profile are dropped and the
//! leverage is clamped at zero, so leverage values never increase and never go
//! negative. The marginal benefit of a vertex is its current leverage, which
//! makes the utility (sum of leverage values at selection time) adaptive
//! monotone and adaptive submodular.

use std::sync::Arc;
use std::time::Instant;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recovery::{complete, LassoConfig, Projection};
use crate::spectral::{Kernel, SignalMatrix, Spectrum};

/// Diffusion self-energy below which `eta` is not computed.
pub const ETA_EPS: f64 = 1e-12;

/// Leverage value of a vertex at the moment it was selected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub vertex: usize,
    pub leverage: f64,
    /// `None` until the post-observation update has run.
    pub eta: Option<f64>,
}

/// Mutable state of the greedy selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionState {
    leverage: Vec<f64>,
    scale: f64,
    alpha: f64,
    policy: Vec<usize>,
    observations: Vec<Vec<f64>>,
    history: Vec<Selection>,
    #[serde(skip)]
    selected: Vec<bool>,
}

impl SelectionState {
    /// Initial leverage at scale zero, empty policy.
    pub fn new(spectrum: &Spectrum, kernel: Kernel, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidConfig(format!("alpha must be > 0, got {alpha}")));
        }
        let leverage: Vec<f64> = spectrum.leverage(kernel, 0.0).iter().map(|&x| x.max(0.0)).collect();
        let n = leverage.len();
        Ok(SelectionState {
            leverage,
            scale: 0.0,
            alpha,
            policy: Vec::new(),
            observations: Vec::new(),
            history: Vec::new(),
            selected: vec![false; n],
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.leverage.len()
    }

    pub fn leverage(&self) -> &[f64] {
        &self.leverage
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn policy(&self) -> &[usize] {
        &self.policy
    }

    /// Observations in policy order.
    pub fn observations(&self) -> &[Vec<f64>] {
        &self.observations
    }

    pub fn history(&self) -> &[Selection] {
        &self.history
    }

    /// Number of completed select/observe/update iterations.
    pub fn iteration(&self) -> usize {
        self.history.iter().filter(|h| h.eta.is_some()).count()
    }

    pub fn is_selected(&self, v: usize) -> bool {
        self.selected.get(v).copied().unwrap_or(false)
    }

    /// Sum of leverage values at selection time.
    pub fn utility(&self) -> f64 {
        self.history.iter().map(|h| h.leverage).sum()
    }

    /// Conditional marginal benefit of adding `v` to the current policy.
    pub fn marginal_benefit(&self, v: usize) -> Result<f64> {
        let n = self.n_vertices();
        if v >= n {
            return Err(Error::IndexOutOfRange { index: v, n });
        }
        if self.selected[v] {
            return Err(Error::AlreadySelected(v));
        }
        Ok(self.leverage[v])
    }

    /// Greedy choice: largest leverage among unselected vertices, lowest index
    /// on ties.
    pub fn select_next(&self) -> Result<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (v, &val) in self.leverage.iter().enumerate() {
            if self.selected[v] {
                continue;
            }
            if best.is_none_or(|(_, b)| val > b) {
                best = Some((v, val));
            }
        }
        best.map(|(v, _)| v).ok_or(Error::Exhausted)
    }

    /// Appends `v` to the policy together with its measurement. The previous
    /// selection must already have been followed by its update.
    pub fn record_observation(&mut self, v: usize, values: Vec<f64>) -> Result<()> {
        let n = self.n_vertices();
        if v >= n {
            return Err(Error::IndexOutOfRange { index: v, n });
        }
        if self.selected[v] {
            return Err(Error::AlreadySelected(v));
        }
        if let Some(last) = self.history.last() {
            if last.eta.is_none() {
                return Err(Error::InvalidConfig(format!(
                    "vertex {} is still waiting for its leverage update",
                    last.vertex
                )));
            }
        }
        if let Some(first) = self.observations.first() {
            if first.len() != values.len() {
                return Err(Error::dims(format!("{} features", first.len()), values.len().to_string()));
            }
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("observation"));
        }
        self.history.push(Selection {
            vertex: v,
            leverage: self.leverage[v],
            eta: None,
        });
        self.selected[v] = true;
        self.policy.push(v);
        self.observations.push(values);
        Ok(())
    }

    /// Scale and leverage update after observing `v` (which must be the most
    /// recent, not yet updated selection) and recovering `z_v` there.
    pub fn update_after_observation(
        &mut self,
        spectrum: &Spectrum,
        kernel: Kernel,
        v: usize,
        observed: &[f64],
        recovered: &[f64],
    ) -> Result<LeverageUpdate> {
        let pending = self.history.last().filter(|h| h.eta.is_none()).map(|h| h.vertex);
        if pending != Some(v) {
            return Err(Error::NotMostRecent { expected: pending, got: v });
        }
        if observed.len() != recovered.len() {
            return Err(Error::dims(format!("{} features", observed.len()), recovered.len().to_string()));
        }
        if spectrum.n_vertices() != self.n_vertices() {
            return Err(Error::dims(format!("{} vertices", self.n_vertices()), spectrum.n_vertices().to_string()));
        }
        let residual = observed
            .iter()
            .zip(recovered)
            .map(|(y, z)| (y - z) * (y - z))
            .sum::<f64>()
            .sqrt();
        let scale = self.alpha * residual;
        if !scale.is_finite() {
            return Err(Error::NonFinite("scale"));
        }
        let profile = spectrum.diffusion_distance(kernel, scale, v)?;
        let self_energy = profile[v];
        let eta = if self_energy > ETA_EPS {
            let eta = self.leverage[v] / self_energy;
            for (lev, &d) in self.leverage.iter_mut().zip(profile.iter()) {
                *lev = (*lev - eta * d.max(0.0)).max(0.0);
            }
            eta
        } else {
            warn!("diffusion self-energy {self_energy:e} at vertex {v} below {ETA_EPS:e}; zeroing its leverage directly");
            0.0
        };
        self.leverage[v] = 0.0;
        self.scale = scale;
        if let Some(last) = self.history.last_mut() {
            last.eta = Some(eta);
        }
        Ok(LeverageUpdate {
            scale,
            eta,
            residual,
        })
    }

    /// Rebuilds derived fields after deserialization and checks consistency.
    pub fn revalidate(&mut self) -> Result<()> {
        let n = self.n_vertices();
        if self.policy.len() != self.observations.len() || self.policy.len() != self.history.len() {
            return Err(Error::InvalidConfig("policy, observations and history lengths differ".into()));
        }
        let mut selected = vec![false; n];
        for (&v, h) in self.policy.iter().zip(&self.history) {
            if v >= n {
                return Err(Error::IndexOutOfRange { index: v, n });
            }
            if std::mem::replace(&mut selected[v], true) {
                return Err(Error::AlreadySelected(v));
            }
            if h.vertex != v {
                return Err(Error::InvalidConfig("history does not match policy".into()));
            }
        }
        if self.leverage.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
            return Err(Error::NonFinite("leverage"));
        }
        self.selected = selected;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeverageUpdate {
    pub scale: f64,
    pub eta: f64,
    /// `|y_v - z_v|_2`
    pub residual: f64,
}

/// One line of the JSON-lines audit log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub vertex: usize,
    /// Marginal benefit (leverage) of `vertex` when it was selected.
    pub delta: f64,
    pub s: f64,
    pub eta: f64,
    pub residual: f64,
    pub wall_ms: f64,
}

/// Sum of the `delta` column: the utility of the logged policy.
pub fn utility(log: &[IterationRecord]) -> f64 {
    log.iter().map(|r| r.delta).sum()
}

/// Measurement source for the selected vertices.
pub trait Oracle {
    fn observe(&mut self, vertex: usize) -> Result<Vec<f64>>;
}

/// Oracle backed by a complete N x p ground-truth matrix.
#[derive(Debug, Clone)]
pub struct GroundTruthOracle {
    truth: SignalMatrix,
}

impl GroundTruthOracle {
    pub fn new(truth: SignalMatrix) -> Self {
        GroundTruthOracle { truth }
    }

    pub fn truth(&self) -> &SignalMatrix {
        &self.truth
    }
}

impl Oracle for GroundTruthOracle {
    fn observe(&mut self, vertex: usize) -> Result<Vec<f64>> {
        if vertex >= self.truth.nrows() {
            return Err(Error::OracleFailure {
                vertex,
                reason: format!("ground truth has only {} rows", self.truth.nrows()),
            });
        }
        Ok(self.truth.row(vertex).iter().copied().collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SrConfig {
    pub kernel: Kernel,
    /// Gain from recovery misfit to diffusion scale.
    pub alpha: f64,
    pub lasso: LassoConfig,
}

impl Default for SrConfig {
    fn default() -> Self {
        SrConfig {
            kernel: Kernel::Heat,
            alpha: 1.0,
            lasso: LassoConfig::default(),
        }
    }
}

/// Step-wise driver of the select/observe/recover/update loop. The batch
/// runner and interactive sessions both go through this type.
#[derive(Debug, Clone)]
pub struct SrEngine {
    spectrum: Arc<Spectrum>,
    config: SrConfig,
    n_features: usize,
    state: SelectionState,
    estimate: SignalMatrix,
    log: Vec<IterationRecord>,
}

/// Serializable part of an [`SrEngine`]; the spectrum is supplied on restore.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineSnapshot {
    pub config: SrConfig,
    pub n_features: usize,
    pub state: SelectionState,
    pub log: Vec<IterationRecord>,
}

impl SrEngine {
    pub fn new(spectrum: Arc<Spectrum>, config: SrConfig, n_features: usize) -> Result<Self> {
        config.lasso.validate()?;
        if n_features == 0 {
            return Err(Error::InvalidConfig("need at least one feature".into()));
        }
        let state = SelectionState::new(&spectrum, config.kernel, config.alpha)?;
        let estimate = SignalMatrix::zeros(spectrum.n_vertices(), n_features);
        Ok(SrEngine {
            spectrum,
            config,
            n_features,
            state,
            estimate,
            log: Vec::new(),
        })
    }

    pub fn spectrum(&self) -> &Arc<Spectrum> {
        &self.spectrum
    }

    pub fn config(&self) -> &SrConfig {
        &self.config
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn state(&self) -> &SelectionState {
        &self.state
    }

    /// Current N x p estimate; all zeros before the first observation.
    pub fn estimate(&self) -> &SignalMatrix {
        &self.estimate
    }

    pub fn log(&self) -> &[IterationRecord] {
        &self.log
    }

    /// The vertex the greedy rule asks to observe next.
    pub fn propose(&self) -> Result<usize> {
        self.state.select_next()
    }

    /// Observes the proposed vertex: recovery with every observation so far,
    /// then the scale and leverage update.
    pub fn observe(&mut self, vertex: usize, values: Vec<f64>) -> Result<&IterationRecord> {
        let started = Instant::now();
        let proposed = self.propose()?;
        if vertex != proposed {
            return Err(Error::NotMostRecent {
                expected: Some(proposed),
                got: vertex,
            });
        }
        if values.len() != self.n_features {
            return Err(Error::dims(format!("{} features", self.n_features), values.len().to_string()));
        }
        let delta = self.state.marginal_benefit(vertex)?;

        // Recover before touching the state so a failure leaves it untouched.
        let mut policy = self.state.policy().to_vec();
        policy.push(vertex);
        let projection = Projection::new(policy, self.spectrum.n_vertices())?;
        let m = projection.len();
        let y = SignalMatrix::from_fn(m, self.n_features, |r, c| {
            if r + 1 == m {
                values[c]
            } else {
                self.state.observations()[r][c]
            }
        });
        let completion = complete(&self.spectrum, &projection, &y, &self.config.lasso)?;
        if completion.estimate.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("estimate"));
        }
        let recovered: Vec<f64> = completion.estimate.row(vertex).iter().copied().collect();

        self.state.record_observation(vertex, values.clone())?;
        let update = self
            .state
            .update_after_observation(&self.spectrum, self.config.kernel, vertex, &values, &recovered)?;
        self.estimate = completion.estimate;
        self.log.push(IterationRecord {
            iter: self.log.len() + 1,
            vertex,
            delta,
            s: update.scale,
            eta: update.eta,
            residual: update.residual,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        });
        Ok(self.log.last().expect("just pushed"))
    }

    pub fn snapshot(&self) -> EngineSnapshot {
        EngineSnapshot {
            config: self.config,
            n_features: self.n_features,
            state: self.state.clone(),
            log: self.log.clone(),
        }
    }

    /// Restores an engine; the estimate is recomputed from the stored
    /// observations.
    pub fn restore(spectrum: Arc<Spectrum>, snapshot: EngineSnapshot) -> Result<Self> {
        let EngineSnapshot {
            config,
            n_features,
            mut state,
            log,
        } = snapshot;
        state.revalidate()?;
        if state.n_vertices() != spectrum.n_vertices() {
            return Err(Error::dims(format!("{} vertices", spectrum.n_vertices()), state.n_vertices().to_string()));
        }
        let estimate = if state.policy().is_empty() {
            SignalMatrix::zeros(spectrum.n_vertices(), n_features)
        } else {
            let projection = Projection::new(state.policy().to_vec(), spectrum.n_vertices())?;
            let obs = state.observations();
            let y = SignalMatrix::from_fn(obs.len(), n_features, |r, c| obs[r][c]);
            complete(&spectrum, &projection, &y, &config.lasso)?.estimate
        };
        Ok(SrEngine {
            spectrum,
            config,
            n_features,
            state,
            estimate,
            log,
        })
    }

    /// Replays a sequence of observations from scratch, checking that each
    /// vertex is the one the greedy rule proposes.
    pub fn replay(spectrum: Arc<Spectrum>, config: SrConfig, n_features: usize, observations: &[(usize, Vec<f64>)]) -> Result<Self> {
        let mut engine = SrEngine::new(spectrum, config, n_features)?;
        for (v, y) in observations {
            engine.observe(*v, y.clone())?;
        }
        Ok(engine)
    }
}

/// Result of a batch run.
#[derive(Debug, Clone)]
pub struct SrOutcome {
    pub policy: Vec<usize>,
    /// N x p recovery from all `m` observations.
    pub estimate: SignalMatrix,
    pub log: Vec<IterationRecord>,
}

/// Runs `m` iterations against `oracle`.
pub fn run_sr(spectrum: Arc<Spectrum>, config: SrConfig, oracle: &mut dyn Oracle, m: usize) -> Result<SrOutcome> {
    let n = spectrum.n_vertices();
    if m == 0 || m > n {
        return Err(Error::InvalidConfig(format!("budget m={m} must lie in 1..={n}")));
    }
    let first = spectrum_first_vertex(&spectrum, &config)?;
    let y0 = oracle.observe(first)?;
    let mut engine = SrEngine::new(spectrum, config, y0.len())?;
    engine.observe(first, y0)?;
    continue_sr(&mut engine, oracle, m)?;
    Ok(SrOutcome {
        policy: engine.state().policy().to_vec(),
        estimate: engine.estimate().clone(),
        log: engine.log().to_vec(),
    })
}

/// Drives an existing engine until its policy holds `m` vertices. On an oracle
/// failure the engine is left at the last completed iteration, so the run can
/// be resumed.
pub fn continue_sr(engine: &mut SrEngine, oracle: &mut dyn Oracle, m: usize) -> Result<()> {
    while engine.state().policy().len() < m {
        let v = engine.propose()?;
        let y = oracle.observe(v)?;
        engine.observe(v, y)?;
    }
    Ok(())
}

fn spectrum_first_vertex(spectrum: &Spectrum, config: &SrConfig) -> Result<usize> {
    SelectionState::new(spectrum, config.kernel, config.alpha)?.select_next()
}
