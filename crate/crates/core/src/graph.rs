//! Weighted undirected graphs, Gaussian-kernel graph construction and the
//! combinatorial Laplacian `L = D - A`.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Per-vertex display metadata (labels, image URLs, ...).
pub type VertexMeta = BTreeMap<String, String>;

/// An undirected edge stored once, with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

/// Weighted undirected graph without self-loops.
///
/// Edges are kept sorted by `(i, j)` with `i < j`, so two graphs built from
/// the same edge set compare equal regardless of input order.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    vertex_meta: Option<Vec<VertexMeta>>,
}

impl Graph {
    /// Builds a graph from an edge list. Repeated pairs (in either orientation)
    /// are merged when their weights agree and rejected otherwise.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::DegenerateInput("graph needs at least one vertex".into()));
        }
        let mut seen: HashMap<(usize, usize), f64> = HashMap::with_capacity(edges.len());
        for &(a, b, w) in edges {
            for idx in [a, b] {
                if idx >= n {
                    return Err(Error::IndexOutOfRange { index: idx, n });
                }
            }
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::NegativeWeight { i: a, j: b, weight: w });
            }
            let key = (a.min(b), a.max(b));
            match seen.get(&key) {
                Some(&prev) if prev != w => {
                    return Err(Error::ConflictingDuplicateEdge {
                        i: key.0,
                        j: key.1,
                        first: prev,
                        second: w,
                    })
                }
                Some(_) => {}
                None => {
                    seen.insert(key, w);
                }
            }
        }
        let mut edges: Vec<Edge> = seen.into_iter().map(|((i, j), w)| Edge { i, j, w }).collect();
        edges.sort_by_key(|e| (e.i, e.j));
        Ok(Graph {
            n,
            edges,
            vertex_meta: None,
        })
    }

    /// Gaussian-kernel similarity graph over feature vectors (one row per
    /// vertex): `w_ij = exp(-|x_i - x_j|^2 / sigma^2)`.
    pub fn from_features(features: &DMatrix<f64>, sigma: f64, knn: Option<usize>) -> Result<Self> {
        let n = features.nrows();
        if n < 2 {
            return Err(Error::DegenerateInput(format!("need at least 2 points, got {n}")));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("features"));
        }
        let sq = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                0.0
            } else {
                (features.row(i) - features.row(j)).norm_squared()
            }
        });
        kernel_graph(&sq, sigma, knn)
    }

    /// Gaussian-kernel graph from a precomputed symmetric distance matrix:
    /// `w_ij = exp(-d_ij^2 / sigma^2)`.
    pub fn from_distances(dist: &DMatrix<f64>, sigma: f64, knn: Option<usize>) -> Result<Self> {
        let n = dist.nrows();
        if dist.ncols() != n {
            return Err(Error::dims(format!("{n}x{n}"), format!("{}x{}", n, dist.ncols())));
        }
        if n < 2 {
            return Err(Error::DegenerateInput(format!("need at least 2 vertices, got {n}")));
        }
        for i in 0..n {
            for j in 0..n {
                let d = dist[(i, j)];
                if !(d >= 0.0) || !d.is_finite() {
                    return Err(Error::NegativeDistance { i, j });
                }
                if d != dist[(j, i)] {
                    return Err(Error::AsymmetricDistance { i, j });
                }
            }
            if dist[(i, i)] != 0.0 {
                return Err(Error::DegenerateInput(format!("nonzero diagonal at {i}")));
            }
        }
        let sq = dist.map(|d| d * d);
        kernel_graph(&sq, sigma, knn)
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn vertex_meta(&self) -> Option<&[VertexMeta]> {
        self.vertex_meta.as_deref()
    }

    pub fn with_vertex_meta(mut self, meta: Vec<VertexMeta>) -> Result<Self> {
        if meta.len() != self.n {
            return Err(Error::dims(format!("{} metadata entries", self.n), meta.len().to_string()));
        }
        self.vertex_meta = Some(meta);
        Ok(self)
    }

    pub fn degrees(&self) -> Vec<f64> {
        let mut deg = vec![0.0; self.n];
        for e in &self.edges {
            deg[e.i] += e.w;
            deg[e.j] += e.w;
        }
        deg
    }

    /// Dense symmetric adjacency matrix.
    pub fn adjacency(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for e in &self.edges {
            a[(e.i, e.j)] = e.w;
            a[(e.j, e.i)] = e.w;
        }
        a
    }

    /// Number of connected components, counting only edges with positive weight.
    pub fn connected_components(&self) -> usize {
        let mut adj = vec![Vec::new(); self.n];
        for e in self.edges.iter().filter(|e| e.w > 0.0) {
            adj[e.i].push(e.j);
            adj[e.j].push(e.i);
        }
        let mut seen = vec![false; self.n];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for &u in &adj[v] {
                    if !seen[u] {
                        seen[u] = true;
                        stack.push(u);
                    }
                }
            }
        }
        count
    }

    pub fn laplacian(&self) -> LaplacianMatrix {
        let n = self.n;
        let mut l = DMatrix::zeros(n, n);
        for e in &self.edges {
            l[(e.i, e.j)] = -e.w;
            l[(e.j, e.i)] = -e.w;
        }
        // Diagonal is the negated off-diagonal row sum, so every row sums to
        // exactly zero up to a single rounding of the accumulation.
        for i in 0..n {
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| l[(i, j)]).sum();
            l[(i, i)] = -off;
        }
        LaplacianMatrix(l)
    }

    /// Writes the `.grf` text format.
    pub fn write_grf(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::with_capacity(32 * (self.edges.len() + 1));
        out.push_str(&format!("N {}\n", self.n));
        for e in &self.edges {
            out.push_str(&format!("{} {} {:.16e}\n", e.i, e.j, e.w));
        }
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Reads the `.grf` text format. Vertex metadata is not part of the file.
    pub fn read_grf(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_grf(&text, path)
    }
}

fn parse_grf(text: &str, path: &Path) -> Result<Graph> {
    let mut n: Option<usize> = None;
    let mut edges = Vec::new();
    let mut first_seen: HashMap<(usize, usize), (f64, usize)> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let Some(count) = n else {
            match fields.as_slice() {
                ["N", count] => {
                    let count: usize = count
                        .parse()
                        .map_err(|_| Error::parse(path, lineno, format!("bad vertex count {count:?}")))?;
                    if count == 0 {
                        return Err(Error::parse(path, lineno, "vertex count must be positive"));
                    }
                    n = Some(count);
                    continue;
                }
                _ => return Err(Error::parse(path, lineno, "expected header `N <count>`")),
            }
        };
        let [a, b, w] = fields.as_slice() else {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected `<i> <j> <w>`, found {} field(s)", fields.len()),
            ));
        };
        let i: usize = a
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad vertex index {a:?}")))?;
        let j: usize = b
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad vertex index {b:?}")))?;
        let w: f64 = w
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad weight {w:?}")))?;
        if i >= count || j >= count {
            return Err(Error::parse(path, lineno, format!("vertex index out of range (N = {count})")));
        }
        if i == j {
            return Err(Error::parse(path, lineno, "self-loop"));
        }
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::parse(path, lineno, format!("invalid weight {w}")));
        }
        let key = (i.min(j), i.max(j));
        if let Some(&(prev, at)) = first_seen.get(&key) {
            if prev != w {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("edge conflicts with line {at} ({prev} vs {w})"),
                ));
            }
        } else {
            first_seen.insert(key, (w, lineno));
        }
        edges.push((i, j, w));
    }
    let n = n.ok_or_else(|| Error::parse(path, 0, "missing header `N <count>`"))?;
    Graph::from_edges(n, &edges)
}

fn kernel_graph(sq_dist: &DMatrix<f64>, sigma: f64, knn: Option<usize>) -> Result<Graph> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::NonPositiveSigma(sigma));
    }
    let n = sq_dist.nrows();
    let keep = match knn {
        Some(0) => return Err(Error::InvalidConfig("knn must be positive".into())),
        Some(k) => Some(knn_mask(sq_dist, k)),
        None => None,
    };
    let s2 = sigma * sigma;
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            if keep.as_ref().is_none_or(|m| m[i * n + j]) {
                edges.push((i, j, (-sq_dist[(i, j)] / s2).exp()));
            }
        }
    }
    Graph::from_edges(n, &edges)
}

/// Symmetrized k-nearest-neighbour mask: `(i, j)` is kept when either endpoint
/// nominates the other. Ties go to the lower index.
fn knn_mask(sq_dist: &DMatrix<f64>, k: usize) -> Vec<bool> {
    let n = sq_dist.nrows();
    let mut keep = vec![false; n * n];
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        order.sort_by(|&a, &b| sq_dist[(i, a)].total_cmp(&sq_dist[(i, b)]).then(a.cmp(&b)));
        for &j in order.iter().take(k) {
            keep[i * n + j] = true;
            keep[j * n + i] = true;
        }
    }
    keep
}

/// Dense combinatorial Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix(DMatrix<f64>);

impl LaplacianMatrix {
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Infinity norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        self.0
            .row_iter()
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// SHA-256 over the dimension and the little-endian bytes of every entry,
    /// row-major. Used to key spectrum caches.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let n = self.dim();
        let mut hasher = Sha256::new();
        hasher.update((n as u64).to_le_bytes());
        for i in 0..n {
            for j in 0..n {
                hasher.update(self.0[(i, j)].to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }
}
