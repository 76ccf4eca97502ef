//! Synthetic instances: random geometric graphs and sparse bandlimited signals.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::spectral::{SignalMatrix, Spectrum};

const MAX_ATTEMPTS: usize = 1000;

/// Points drawn uniformly in the unit square, joined when closer than
/// `radius` with Gaussian weights `exp(-d^2 / radius^2)`. Redraws until the
/// graph is connected.
pub fn random_geometric_graph(n: usize, radius: f64, seed: u64) -> Result<(Graph, DMatrix<f64>)> {
    if n < 2 {
        return Err(Error::DegenerateInput(format!("need at least 2 vertices, got {n}")));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidConfig(format!("radius must be > 0, got {radius}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        let points = DMatrix::from_fn(n, 2, |_, _| rng.random::<f64>());
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let d2 = (points.row(i) - points.row(j)).norm_squared();
                if d2 < radius * radius {
                    edges.push((i, j, (-d2 / (radius * radius)).exp()));
                }
            }
        }
        let g = Graph::from_edges(n, &edges)?;
        if g.connected_components() == 1 {
            return Ok((g, points));
        }
    }
    Err(Error::DegenerateInput(format!(
        "no connected geometric graph with n={n}, radius={radius} after {MAX_ATTEMPTS} draws"
    )))
}

/// `p` columns, each a combination of `sparsity` randomly chosen eigenvectors
/// of the band with standard normal weights.
pub fn sparse_bandlimited(spectrum: &Spectrum, p: usize, sparsity: usize, seed: u64) -> Result<SignalMatrix> {
    let k = spectrum.band();
    if sparsity == 0 || sparsity > k {
        return Err(Error::InvalidConfig(format!("sparsity {sparsity} must lie in 1..={k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coef = SignalMatrix::zeros(k, p);
    for c in 0..p {
        for l in rand::seq::index::sample(&mut rng, k, sparsity) {
            coef[(l, c)] = StandardNormal.sample(&mut rng);
        }
    }
    spectrum.gft_inverse(&coef)
}

/// Adds white noise with standard deviation `relative` times the RMS of `f`.
pub fn add_noise(f: &SignalMatrix, relative: f64, seed: u64) -> SignalMatrix {
    let cells = (f.nrows() * f.ncols()).max(1) as f64;
    let sd = relative * f.norm() / cells.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    f.map(|x| {
        let e: f64 = StandardNormal.sample(&mut rng);
        x + sd * e
    })
}
