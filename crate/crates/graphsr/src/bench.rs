//! Synthetic head-to-head of adaptive and uniform-random sampling.
//!
//! Instance `seed` uses a random geometric graph drawn with `seed`, a sparse
//! bandlimited signal drawn with `1000 + seed`, noise drawn with `2000 + seed`
//! and the random policy drawn with `3000 + seed`. Errors are measured
//! against the noisy signal the oracle answers with.

use std::sync::Arc;

use graphsr_core::eval::{self, BenchRow};
use graphsr_core::synth::{add_noise, random_geometric_graph, sparse_bandlimited};
use graphsr_core::{Error, GroundTruthOracle, LassoConfig, Result, SignalMatrix, SrConfig, SrEngine, Spectrum};

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub n: usize,
    pub radius: f64,
    pub k: usize,
    pub p: usize,
    pub sparsity: usize,
    pub noise: f64,
    pub seeds: u64,
    pub ratios: Vec<f64>,
    pub threshold: f64,
    pub lasso: LassoConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            n: 200,
            radius: 0.15,
            k: 20,
            p: 5,
            sparsity: 10,
            noise: 0.01,
            seeds: 20,
            ratios: vec![0.2, 0.3, 0.4, 0.6],
            threshold: eval::LABEL_THRESHOLD,
            lasso: LassoConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub row: BenchRow,
    pub relative_error: f64,
}

pub struct Instance {
    pub spectrum: Arc<Spectrum>,
    pub truth: SignalMatrix,
}

pub fn instance(cfg: &BenchConfig, seed: u64) -> Result<Instance> {
    let (graph, _) = random_geometric_graph(cfg.n, cfg.radius, seed)?;
    let spectrum = Arc::new(Spectrum::compute(&graph.laplacian(), cfg.k)?);
    let clean = sparse_bandlimited(&spectrum, cfg.p, cfg.sparsity, 1000 + seed)?;
    let truth = add_noise(&clean, cfg.noise, 2000 + seed);
    Ok(Instance { spectrum, truth })
}

/// Observation budget for a sampling ratio.
pub fn budget(n: usize, ratio: f64) -> Result<usize> {
    let m = (ratio * n as f64).round() as usize;
    if !(ratio > 0.0) || m == 0 || m > n {
        return Err(Error::InvalidConfig(format!("sampling ratio {ratio} gives no valid budget for N={n}")));
    }
    Ok(m)
}

fn result(cfg: &BenchConfig, method: &str, seed: u64, ratio: f64, z: &SignalMatrix, truth: &SignalMatrix) -> Result<BenchResult> {
    let pred = eval::binarize(z, cfg.threshold);
    let want = eval::binarize(truth, cfg.threshold);
    Ok(BenchResult {
        row: BenchRow {
            sampling_ratio: ratio,
            method: method.into(),
            seed,
            n_errors: eval::count_errors(&pred, &want)?,
            mean_precision: eval::mean_precision(&pred, &want)?,
        },
        relative_error: eval::relative_error(z, truth)?,
    })
}

/// One SR and one random row per (seed, ratio). The SR run for a larger ratio
/// continues the run for the smaller one, which is the same as a fresh run.
pub fn run_seed(cfg: &BenchConfig, seed: u64) -> Result<Vec<BenchResult>> {
    let inst = instance(cfg, seed)?;
    let mut ratios = cfg.ratios.clone();
    ratios.sort_by(f64::total_cmp);
    let sr = SrConfig {
        lasso: cfg.lasso,
        ..SrConfig::default()
    };
    let mut engine = SrEngine::new(inst.spectrum.clone(), sr, cfg.p)?;
    let mut oracle = GroundTruthOracle::new(inst.truth.clone());
    let mut out = Vec::with_capacity(2 * ratios.len());
    for &ratio in &ratios {
        let m = budget(cfg.n, ratio)?;
        graphsr_core::selector::continue_sr(&mut engine, &mut oracle, m)?;
        out.push(result(cfg, "sr", seed, ratio, engine.estimate(), &inst.truth)?);
        let (_, z) = eval::random_baseline(&inst.spectrum, m, 3000 + seed, &mut oracle, &cfg.lasso)?;
        out.push(result(cfg, "random", seed, ratio, &z, &inst.truth)?);
    }
    Ok(out)
}

pub fn run(cfg: &BenchConfig) -> Result<Vec<BenchResult>> {
    let mut rows = Vec::new();
    for seed in 0..cfg.seeds {
        rows.extend(run_seed(cfg, seed)?);
    }
    Ok(rows)
}
