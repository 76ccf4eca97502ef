//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use graphsr_core::Graph;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random weighted graph on `n` vertices; each pair is an edge with
/// probability `density`. With `connected`, a random spanning path is added.
pub fn random_graph(n: usize, density: f64, connected: bool, seed: u64) -> Graph {
    let mut r = rng(seed);
    let mut edges = Vec::new();
    let mut have = vec![false; n * n];
    if connected {
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = r.random_range(0..=i);
            order.swap(i, j);
        }
        for w in order.windows(2) {
            let (a, b) = (w[0].min(w[1]), w[0].max(w[1]));
            have[a * n + b] = true;
            edges.push((a, b, r.random_range(0.1..2.0)));
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if !have[i * n + j] && r.random::<f64>() < density {
                edges.push((i, j, r.random_range(0.1..2.0)));
            }
        }
    }
    Graph::from_edges(n, &edges).unwrap()
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    DMatrix::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0))
}

/// Cyclic Jacobi rotations on a dense symmetric matrix; eigenvalues ascending.
pub fn jacobi_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Connected components by union-find over positive-weight edges.
pub fn union_find_components(g: &Graph) -> usize {
    let n = g.n_vertices();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut root = x;
        while parent[root] != root {
            root = parent[root];
        }
        let mut cur = x;
        while parent[cur] != root {
            let next = parent[cur];
            parent[cur] = root;
            cur = next;
        }
        root
    }
    for e in g.edges().iter().filter(|e| e.w > 0.0) {
        let (a, b) = (find(&mut parent, e.i), find(&mut parent, e.j));
        if a != b {
            parent[a] = b;
        }
    }
    (0..n).filter(|&i| find(&mut parent, i) == i).count()
}

/// `sum_l g_l u(a, l) u(b, l)` by explicit loop.
pub fn kernel_sum(u: &DMatrix<f64>, gains: &[f64], a: usize, b: usize) -> f64 {
    let mut acc = 0.0;
    for l in 0..gains.len() {
        acc += gains[l] * u[(a, l)] * u[(b, l)];
    }
    acc
}

/// Plain proximal gradient on the raw design, no Gram caching or momentum.
pub fn proximal_oracle(a: &DMatrix<f64>, y: &DVector<f64>, xi: f64, iters: usize) -> DVector<f64> {
    let smax = a.clone().svd(false, false).singular_values.max();
    let step = 1.0 / (2.0 * smax * smax);
    let mut z = DVector::zeros(a.ncols());
    for _ in 0..iters {
        let grad = 2.0 * a.transpose() * (a * &z - y);
        let v = &z - step * grad;
        z = v.map(|x| x.signum() * (x.abs() - step * xi).max(0.0));
    }
    z
}

pub fn objective(a: &DMatrix<f64>, y: &DVector<f64>, z: &DVector<f64>, xi: f64) -> f64 {
    (a * z - y).norm_squared() + xi * z.iter().map(|x| x.abs()).sum::<f64>()
}

/// Subgradient certificate written out independently of the library.
pub fn certificate(a: &DMatrix<f64>, y: &DVector<f64>, z: &DVector<f64>, xi: f64) -> f64 {
    let g = 2.0 * a.transpose() * (a * z - y);
    let aty = (a.transpose() * y).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut worst = 0.0f64;
    for i in 0..z.len() {
        let v = if z[i] > 0.0 {
            (g[i] + xi).abs()
        } else if z[i] < 0.0 {
            (g[i] - xi).abs()
        } else {
            (g[i].abs() - xi).max(0.0)
        };
        worst = worst.max(v);
    }
    worst / (1.0 + aty)
}
