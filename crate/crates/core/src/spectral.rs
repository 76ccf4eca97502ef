//! Truncated Laplacian eigenbasis, graph Fourier transform, spectral graph
//! wavelets, leverage values and diffusion-type distances.

use std::cmp::Ordering;
use std::fs;
use std::path::Path;

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::LaplacianMatrix;

/// Real N x p (or k x p) matrix of per-vertex measurements or spectral
/// coefficients.
pub type SignalMatrix = DMatrix<f64>;

/// Eigenvalues closer than this are treated as one eigenspace.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// Components below this magnitude are skipped when fixing eigenvector signs.
const SIGN_TOL: f64 = 1e-12;

/// Band-pass filter `g: R+ -> R+` evaluated on scaled eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// `g(x) = exp(-x)`
    #[default]
    Heat,
    /// `g(x) = x exp(-x)`
    MexicanHat,
}

impl Kernel {
    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Kernel::Heat => (-x).exp(),
            Kernel::MexicanHat => x * (-x).exp(),
        }
    }
}

impl std::str::FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heat" => Ok(Kernel::Heat),
            "mexican_hat" | "mexican-hat" => Ok(Kernel::MexicanHat),
            other => Err(Error::InvalidConfig(format!("unknown kernel {other:?}"))),
        }
    }
}

/// The first `k` eigenpairs of a graph Laplacian, eigenvalues ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
    /// True when the band edge cuts through a (numerically) degenerate eigenspace.
    split_eigenspace: bool,
}

impl Spectrum {
    /// Full symmetric eigendecomposition (Householder tridiagonalization and
    /// implicit QR) truncated to the lowest `k` eigenpairs.
    ///
    /// Eigenvectors are normalized so their first non-negligible component is
    /// positive; within a degenerate eigenspace they are ordered
    /// lexicographically (descending), so the output is a deterministic
    /// function of the Laplacian.
    pub fn compute(laplacian: &LaplacianMatrix, k: usize) -> Result<Self> {
        let n = laplacian.dim();
        if k == 0 || k > n {
            return Err(Error::InvalidBand { k, n });
        }
        let l = laplacian.matrix();
        if l.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("laplacian"));
        }
        let eig = SymmetricEigen::try_new(l.clone(), f64::EPSILON, 100 * n.max(1))
            .ok_or(Error::ConvergenceFailure { residual: f64::NAN })?;

        let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
            .map(|c| {
                let mut v: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.iter_mut().for_each(|x| *x /= norm);
                if let Some(first) = v.iter().find(|x| x.abs() > SIGN_TOL) {
                    if *first < 0.0 {
                        v.iter_mut().for_each(|x| *x = -*x);
                    }
                }
                (eig.eigenvalues[c], v)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

        // Reorder inside each numerically degenerate cluster.
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && pairs[end].0 - pairs[end - 1].0 < DEGENERACY_TOL {
                end += 1;
            }
            if end - start > 1 {
                pairs[start..end].sort_by(|a, b| lex_desc(&a.1, &b.1));
            }
            start = end;
        }

        let split = k < n && (pairs[k].0 - pairs[k - 1].0).abs() < DEGENERACY_TOL;
        if split {
            warn!(
                "band edge k={k} splits a degenerate eigenspace (lambda_k={:e}, lambda_k+1={:e}); \
                 leverage values depend on the basis chosen inside it",
                pairs[k - 1].0,
                pairs[k].0
            );
        }

        let eigenvalues = DVector::from_iterator(k, pairs[..k].iter().map(|p| p.0.max(0.0)));
        let eigenvectors = DMatrix::from_fn(n, k, |i, c| pairs[c].1[i]);
        let spectrum = Spectrum {
            eigenvalues,
            eigenvectors,
            split_eigenspace: split,
        };

        let tol = 1e-10 * laplacian.norm_inf().max(1.0);
        let residual = spectrum.max_residual(laplacian);
        if !(residual <= tol) {
            return Err(Error::ConvergenceFailure { residual });
        }
        Ok(spectrum)
    }

    /// Wraps precomputed eigenpairs, checking shape, finiteness and
    /// orthonormality of the columns.
    pub fn from_parts(eigenvalues: DVector<f64>, eigenvectors: DMatrix<f64>) -> Result<Self> {
        let k = eigenvalues.len();
        if k == 0 || eigenvectors.ncols() != k || eigenvectors.nrows() < k {
            return Err(Error::dims(
                format!("N x {k} eigenvectors with N >= {k}"),
                format!("{}x{}", eigenvectors.nrows(), eigenvectors.ncols()),
            ));
        }
        if eigenvalues.iter().chain(eigenvectors.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("spectrum"));
        }
        let gram = eigenvectors.tr_mul(&eigenvectors);
        let dev = (gram - DMatrix::identity(k, k)).amax();
        if dev >= 1e-8 {
            return Err(Error::InvalidConfig(format!(
                "eigenvector columns are not orthonormal (deviation {dev:e})"
            )));
        }
        Ok(Spectrum {
            eigenvalues,
            eigenvectors,
            split_eigenspace: false,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.eigenvectors.nrows()
    }

    pub fn band(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// `U_k`, one eigenvector per column.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn splits_eigenspace(&self) -> bool {
        self.split_eigenspace
    }

    /// Largest `|L chi - lambda chi|` entry over all retained columns.
    pub fn max_residual(&self, laplacian: &LaplacianMatrix) -> f64 {
        let lu = laplacian.matrix() * &self.eigenvectors;
        let mut worst: f64 = 0.0;
        for c in 0..self.band() {
            let lambda = self.eigenvalues[c];
            for i in 0..self.n_vertices() {
                worst = worst.max((lu[(i, c)] - lambda * self.eigenvectors[(i, c)]).abs());
            }
        }
        worst
    }

    /// `g(s * lambda_l)` for each retained eigenvalue.
    pub fn filter_gains(&self, kernel: Kernel, scale: f64) -> Vec<f64> {
        self.eigenvalues.iter().map(|&l| kernel.eval(scale * l)).collect()
    }

    /// Forward graph Fourier transform `U_k^T f`.
    pub fn gft_forward(&self, f: &SignalMatrix) -> Result<SignalMatrix> {
        if f.nrows() != self.n_vertices() {
            return Err(Error::dims(format!("{} rows", self.n_vertices()), format!("{} rows", f.nrows())));
        }
        Ok(self.eigenvectors.tr_mul(f))
    }

    /// Inverse graph Fourier transform `U_k fhat`.
    pub fn gft_inverse(&self, fhat: &SignalMatrix) -> Result<SignalMatrix> {
        if fhat.nrows() != self.band() {
            return Err(Error::dims(format!("{} rows", self.band()), format!("{} rows", fhat.nrows())));
        }
        Ok(&self.eigenvectors * fhat)
    }

    /// Spectral graph wavelet at scale `s` localized at vertex `n`:
    /// `psi(m) = sum_l g(s lambda_l) chi_l(n) chi_l(m)`.
    pub fn wavelet(&self, kernel: Kernel, scale: f64, vertex: usize) -> Result<DVector<f64>> {
        self.check_vertex(vertex)?;
        let gains = self.filter_gains(kernel, scale);
        Ok(DVector::from_fn(self.n_vertices(), |m, _| self.kernel_entry(&gains, vertex, m)))
    }

    /// Diffusion-type distance profile from `source`. Same formula as
    /// [`Spectrum::wavelet`].
    pub fn diffusion_distance(&self, kernel: Kernel, scale: f64, source: usize) -> Result<DVector<f64>> {
        self.wavelet(kernel, scale, source)
    }

    /// Wavelet coefficients `W_f(s, n) = sum_l g(s lambda_l) fhat(l) chi_l(n)`,
    /// column by column.
    pub fn wavelet_transform(&self, kernel: Kernel, f: &SignalMatrix, scale: f64) -> Result<SignalMatrix> {
        let mut fhat = self.gft_forward(f)?;
        let gains = self.filter_gains(kernel, scale);
        for (l, mut row) in fhat.row_iter_mut().enumerate() {
            row *= gains[l];
        }
        self.gft_inverse(&fhat)
    }

    /// Leverage values `I(n) = sum_l g(s lambda_l) chi_l(n)^2`.
    pub fn leverage(&self, kernel: Kernel, scale: f64) -> DVector<f64> {
        let gains = self.filter_gains(kernel, scale);
        DVector::from_fn(self.n_vertices(), |n, _| self.kernel_entry(&gains, n, n))
    }

    // Shared by the wavelet, diffusion and leverage paths so that
    // leverage(n) and diffusion_distance(n)(n) agree bit for bit.
    #[inline]
    fn kernel_entry(&self, gains: &[f64], a: usize, b: usize) -> f64 {
        let u = &self.eigenvectors;
        gains
            .iter()
            .enumerate()
            .fold(0.0, |acc, (l, &g)| acc + g * u[(a, l)] * u[(b, l)])
    }

    fn check_vertex(&self, vertex: usize) -> Result<()> {
        if vertex >= self.n_vertices() {
            return Err(Error::IndexOutOfRange {
                index: vertex,
                n: self.n_vertices(),
            });
        }
        Ok(())
    }

    /// Writes a JSON cache of the eigenpairs keyed by the Laplacian's content hash.
    pub fn save_cache(&self, laplacian: &LaplacianMatrix, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let cache = SpectrumCache {
            laplacian_sha256: laplacian.content_hash(),
            n: self.n_vertices(),
            k: self.band(),
            eigenvalues: self.eigenvalues.iter().copied().collect(),
            eigenvectors: self.eigenvectors.transpose().iter().copied().collect(),
            split_eigenspace: self.split_eigenspace,
        };
        let bytes = serde_json::to_vec(&cache)?;
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    /// Loads a cache written by [`Spectrum::save_cache`], rejecting it unless the
    /// hash matches `laplacian` and the eigenpairs pass the usual checks.
    pub fn load_cache(laplacian: &LaplacianMatrix, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let cache: SpectrumCache = serde_json::from_slice(&bytes)?;
        let expected = laplacian.content_hash();
        if cache.laplacian_sha256 != expected {
            return Err(Error::CacheMismatch {
                expected,
                found: cache.laplacian_sha256,
            });
        }
        if cache.n != laplacian.dim() || cache.eigenvalues.len() != cache.k || cache.eigenvectors.len() != cache.n * cache.k {
            return Err(Error::dims(
                format!("n={} k={}", laplacian.dim(), cache.k),
                format!("{} eigenvalues, {} vector entries", cache.eigenvalues.len(), cache.eigenvectors.len()),
            ));
        }
        let values = DVector::from_vec(cache.eigenvalues);
        let vectors = DMatrix::from_row_slice(cache.n, cache.k, &cache.eigenvectors);
        let mut spectrum = Spectrum::from_parts(values, vectors)?;
        let residual = spectrum.max_residual(laplacian);
        if !(residual <= 1e-8 * spectrum.eigenvalues[spectrum.band() - 1].max(1.0)) {
            return Err(Error::ConvergenceFailure { residual });
        }
        spectrum.split_eigenspace = cache.split_eigenspace;
        Ok(spectrum)
    }
}

#[derive(Serialize, Deserialize)]
struct SpectrumCache {
    laplacian_sha256: String,
    n: usize,
    k: usize,
    eigenvalues: Vec<f64>,
    /// Row-major N x k.
    eigenvectors: Vec<f64>,
    #[serde(default)]
    split_eigenspace: bool,
}

fn lex_desc(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match y.total_cmp(x) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}
