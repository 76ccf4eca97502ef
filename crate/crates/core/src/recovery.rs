//! Signal recovery from partial observations: row-selection projection,
//! frequency-domain LASSO and the inverse transform back to the vertices.
//!
//! The LASSO objective carries no factor of one half,
//!
//! ```text
//! min_z  |A z - y|^2 + xi |z|_1
//! ```
//!
//! so the scalar solution is a soft threshold at `xi / 2`.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{SignalMatrix, Spectrum};

/// Ordered, duplicate-free list of observed vertices `W = (w_1, ..., w_m)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Projection {
    selected: Vec<usize>,
    n: usize,
}

impl Projection {
    pub fn new(selected: Vec<usize>, n: usize) -> Result<Self> {
        let mut seen = vec![false; n];
        for &v in &selected {
            if v >= n {
                return Err(Error::IndexOutOfRange { index: v, n });
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(Error::AlreadySelected(v));
            }
        }
        Ok(Projection { selected, n })
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    /// The explicit m x N 0/1 matrix with a single one per row at column `w_i`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let mut p = DMatrix::zeros(self.len(), self.n);
        for (row, &w) in self.selected.iter().enumerate() {
            p[(row, w)] = 1.0;
        }
        p
    }

    /// `P f`: picks the observed rows of `f`, in selection order.
    pub fn project(&self, f: &SignalMatrix) -> Result<SignalMatrix> {
        if f.nrows() != self.n {
            return Err(Error::dims(format!("{} rows", self.n), format!("{} rows", f.nrows())));
        }
        Ok(f.select_rows(&self.selected))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoConfig {
    /// Sparsity weight on the l1 term.
    pub xi: f64,
    /// Stopping tolerance on the coefficient change and on the optimality
    /// certificate.
    pub tol: f64,
    pub max_iter: usize,
    /// Monotone FISTA momentum. Plain ISTA when false.
    pub accelerated: bool,
}

impl Default for LassoConfig {
    fn default() -> Self {
        LassoConfig {
            xi: 0.01,
            tol: 1e-8,
            max_iter: 100_000,
            accelerated: true,
        }
    }
}

impl LassoConfig {
    pub fn with_xi(xi: f64) -> Self {
        LassoConfig {
            xi,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.xi >= 0.0) || !self.xi.is_finite() {
            return Err(Error::InvalidConfig(format!("xi must be >= 0, got {}", self.xi)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoSolution {
    /// k x p coefficients.
    pub coef: SignalMatrix,
    /// False when some column hit `max_iter`; `coef` then holds the best iterate.
    pub converged: bool,
    /// Iterations used per column.
    pub iterations: Vec<usize>,
}

/// Solves the LASSO column by column with proximal gradient steps of size
/// `1 / (2 sigma_max(A)^2)`.
pub fn lasso_solve(design: &DMatrix<f64>, y: &SignalMatrix, cfg: &LassoConfig) -> Result<LassoSolution> {
    cfg.validate()?;
    let (m, k) = design.shape();
    if y.nrows() != m {
        return Err(Error::dims(format!("{m} rows"), format!("{} rows", y.nrows())));
    }
    if k == 0 {
        return Err(Error::dims("k >= 1", "k = 0"));
    }
    if design.iter().chain(y.iter()).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("lasso input"));
    }
    let p = y.ncols();
    if m == 0 {
        return Ok(LassoSolution {
            coef: DMatrix::zeros(k, p),
            converged: true,
            iterations: vec![0; p],
        });
    }

    let problem = Quadratic::new(design);
    let mut coef = DMatrix::zeros(k, p);
    let mut converged = true;
    let mut iterations = Vec::with_capacity(p);
    for c in 0..p {
        let rhs = design.tr_mul(&y.column(c).into_owned());
        let (z, iters, ok) = problem.solve(&rhs, cfg);
        if !ok {
            warn!("lasso column {c} stopped after {iters} iterations without meeting tol={:e}", cfg.tol);
        }
        converged &= ok;
        iterations.push(iters);
        coef.set_column(c, &z);
    }
    Ok(LassoSolution {
        coef,
        converged,
        iterations,
    })
}

/// LASSO objective `|A z - y|^2 + xi |z|_1` for a single column.
pub fn lasso_objective(design: &DMatrix<f64>, y: &DVector<f64>, z: &DVector<f64>, xi: f64) -> f64 {
    (design * z - y).norm_squared() + xi * z.lp_norm(1)
}

/// Worst violation of the subgradient optimality conditions at `z`,
/// normalized by `1 + |A^T y|_inf`.
///
/// On the support `2 A^T (A z - y) + xi sign(z)` must vanish; off the support
/// `|2 A^T (A z - y)|` must not exceed `xi`.
pub fn optimality_violation(design: &DMatrix<f64>, y: &DVector<f64>, z: &DVector<f64>, xi: f64) -> f64 {
    let grad = 2.0 * design.tr_mul(&(design * z - y));
    let scale = 1.0 + design.tr_mul(y).amax();
    kkt_violation(&grad, z, xi) / scale
}

fn kkt_violation(grad: &DVector<f64>, z: &DVector<f64>, xi: f64) -> f64 {
    grad.iter()
        .zip(z.iter())
        .map(|(&g, &zi)| {
            if zi != 0.0 {
                (g + xi * zi.signum()).abs()
            } else {
                (g.abs() - xi).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Gram form of the least-squares term, shared across the p columns.
struct Quadratic {
    gram: DMatrix<f64>,
    step: f64,
}

impl Quadratic {
    fn new(design: &DMatrix<f64>) -> Self {
        let gram = design.tr_mul(design);
        let sigma_max_sq = gram.clone().symmetric_eigenvalues().amax();
        let lipschitz = 2.0 * sigma_max_sq;
        let step = if lipschitz > 0.0 { 1.0 / lipschitz } else { 0.0 };
        Quadratic { gram, step }
    }

    /// Objective up to the constant `y^T y`: `z^T G z - 2 b^T z + xi |z|_1`.
    fn objective(&self, rhs: &DVector<f64>, z: &DVector<f64>, xi: f64) -> f64 {
        let gz = &self.gram * z;
        z.dot(&gz) - 2.0 * rhs.dot(z) + xi * z.lp_norm(1)
    }

    fn gradient(&self, rhs: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        2.0 * (&self.gram * z - rhs)
    }

    fn prox_step(&self, rhs: &DVector<f64>, at: &DVector<f64>, xi: f64) -> DVector<f64> {
        let grad = self.gradient(rhs, at);
        let thresh = self.step * xi;
        DVector::from_fn(at.len(), |i, _| soft_threshold(at[i] - self.step * grad[i], thresh))
    }

    fn solve(&self, rhs: &DVector<f64>, cfg: &LassoConfig) -> (DVector<f64>, usize, bool) {
        let k = rhs.len();
        let mut z = DVector::zeros(k);
        if self.step == 0.0 {
            return (z, 0, true);
        }
        let cert_scale = 1.0 + rhs.amax();
        let mut f_z = self.objective(rhs, &z, cfg.xi);
        let mut look = z.clone();
        let mut momentum = 1.0_f64;
        let mut restarted = true;

        for iter in 1..=cfg.max_iter {
            let base = if cfg.accelerated { &look } else { &z };
            let cand = self.prox_step(rhs, base, cfg.xi);
            let f_cand = self.objective(rhs, &cand, cfg.xi);
            // A plain step from z never increases the objective in exact
            // arithmetic, so it is accepted even when rounding says otherwise.
            if cfg.accelerated && !restarted && f_cand > f_z {
                look = z.clone();
                momentum = 1.0;
                restarted = true;
                continue;
            }
            let prev = std::mem::replace(&mut z, cand);
            f_z = f_cand;
            if cfg.accelerated {
                let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
                look = &z + ((momentum - 1.0) / next) * (&z - &prev);
                momentum = next;
                restarted = false;
            }

            let change = (&z - &prev).amax();
            if change <= cfg.tol * z.amax().max(1.0) {
                let viol = kkt_violation(&self.gradient(rhs, &z), &z, cfg.xi) / cert_scale;
                if viol <= cfg.tol {
                    return (z, iter, true);
                }
            }
        }
        (z, cfg.max_iter, false)
    }
}

#[inline]
pub(crate) fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// `Z* = U_k Zhat`.
pub fn recover(spectrum: &Spectrum, coef: &SignalMatrix) -> Result<SignalMatrix> {
    spectrum.gft_inverse(coef)
}

/// The design matrix `P U_k` for the given observations.
pub fn design_matrix(spectrum: &Spectrum, projection: &Projection) -> Result<DMatrix<f64>> {
    if projection.n_vertices() != spectrum.n_vertices() {
        return Err(Error::dims(
            format!("projection over {} vertices", spectrum.n_vertices()),
            projection.n_vertices().to_string(),
        ));
    }
    Ok(spectrum.eigenvectors().select_rows(projection.selected()))
}

/// Result of [`complete`].
#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    /// N x p estimate on all vertices.
    pub estimate: SignalMatrix,
    /// k x p frequency-domain coefficients.
    pub coef: SignalMatrix,
    pub converged: bool,
}

/// Recovers the full signal from the observed rows `y` (in projection order).
pub fn complete(spectrum: &Spectrum, projection: &Projection, y: &SignalMatrix, cfg: &LassoConfig) -> Result<Completion> {
    let design = design_matrix(spectrum, projection)?;
    let sol = lasso_solve(&design, y, cfg)?;
    let estimate = recover(spectrum, &sol.coef)?;
    Ok(Completion {
        estimate,
        coef: sol.coef,
        converged: sol.converged,
    })
}
