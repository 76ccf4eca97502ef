//! Recovery metrics and the uniform-random sampling baseline.

use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recovery::{complete, LassoConfig, Projection};
use crate::selector::Oracle;
use crate::spectral::{SignalMatrix, Spectrum};

/// Default binarization threshold for multi-label estimates.
pub const LABEL_THRESHOLD: f64 = 0.15;
/// Default row-mean threshold for the positive class.
pub const POSITIVITY_THRESHOLD: f64 = 1.18;

pub type BinaryMatrix = DMatrix<bool>;

/// `Z(n, j) > threshold`, strictly.
pub fn binarize(z: &SignalMatrix, threshold: f64) -> BinaryMatrix {
    z.map(|x| x > threshold)
}

/// Hamming distance over all cells.
pub fn count_errors(pred: &BinaryMatrix, truth: &BinaryMatrix) -> Result<usize> {
    same_shape(pred.shape(), truth.shape())?;
    Ok(pred.iter().zip(truth.iter()).filter(|(a, b)| a != b).count())
}

/// Unweighted mean over columns of `TP / (TP + FP)`; a column without any
/// positive prediction scores 1.0.
pub fn mean_precision(pred: &BinaryMatrix, truth: &BinaryMatrix) -> Result<f64> {
    mean_precision_with(pred, truth, 1.0)
}

/// [`mean_precision`] with an explicit score for columns that predict no positives.
pub fn mean_precision_with(pred: &BinaryMatrix, truth: &BinaryMatrix, empty_score: f64) -> Result<f64> {
    same_shape(pred.shape(), truth.shape())?;
    let p = pred.ncols();
    if p == 0 {
        return Err(Error::DegenerateInput("no categories".into()));
    }
    let total: f64 = (0..p)
        .map(|j| {
            let (mut tp, mut fp) = (0usize, 0usize);
            for (&pr, &tr) in pred.column(j).iter().zip(truth.column(j).iter()) {
                match (pr, tr) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    _ => {}
                }
            }
            if tp + fp == 0 {
                empty_score
            } else {
                tp as f64 / (tp + fp) as f64
            }
        })
        .sum();
    Ok(total / p as f64)
}

/// Column-wise `|Z_j - f_j|_2`.
pub fn per_feature_l2(z: &SignalMatrix, truth: &SignalMatrix) -> Result<Vec<f64>> {
    same_shape(z.shape(), truth.shape())?;
    Ok((z - truth).column_iter().map(|c| c.norm()).collect())
}

/// `|Z - f|_F / |f|_F`.
pub fn relative_error(z: &SignalMatrix, truth: &SignalMatrix) -> Result<f64> {
    same_shape(z.shape(), truth.shape())?;
    let denom = truth.norm();
    if denom == 0.0 {
        return Err(Error::DegenerateInput("ground truth is identically zero".into()));
    }
    Ok((z - truth).norm() / denom)
}

/// Row-mean classification: positive iff the mean over features exceeds
/// `threshold`.
pub fn classify_rows(z: &SignalMatrix, threshold: f64) -> Vec<bool> {
    z.row_iter().map(|r| r.mean() > threshold).collect()
}

/// Row-mean labels for both matrices and the fraction that agree.
pub fn amyloid_classify(z: &SignalMatrix, truth: &SignalMatrix, threshold: f64) -> Result<(Vec<bool>, f64)> {
    same_shape(z.shape(), truth.shape())?;
    let pred = classify_rows(z, threshold);
    let want = classify_rows(truth, threshold);
    Ok((pred.clone(), accuracy(&pred, &want)?))
}

pub fn accuracy(pred: &[bool], truth: &[bool]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::dims(truth.len().to_string(), pred.len().to_string()));
    }
    if pred.is_empty() {
        return Err(Error::DegenerateInput("no labels".into()));
    }
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// `m` distinct vertices drawn uniformly without replacement; a pure function
/// of `seed`.
pub fn random_policy(n: usize, m: usize, seed: u64) -> Result<Vec<usize>> {
    if m > n {
        return Err(Error::InvalidConfig(format!("cannot draw {m} of {n} vertices")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, n, m).into_vec())
}

/// Observes the vertices of `policy` through `oracle` and recovers with the
/// same solver the adaptive selector uses.
pub fn recover_with_policy(
    spectrum: &Spectrum,
    policy: &[usize],
    oracle: &mut dyn Oracle,
    lasso: &LassoConfig,
) -> Result<SignalMatrix> {
    let projection = Projection::new(policy.to_vec(), spectrum.n_vertices())?;
    let rows = policy.iter().map(|&v| oracle.observe(v)).collect::<Result<Vec<_>>>()?;
    let p = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != p) {
        return Err(Error::dims(format!("{p} features per observation"), "ragged observations"));
    }
    let y = SignalMatrix::from_fn(rows.len(), p, |r, c| rows[r][c]);
    Ok(complete(spectrum, &projection, &y, lasso)?.estimate)
}

/// Random-policy baseline with identical recovery.
pub fn random_baseline(
    spectrum: &Arc<Spectrum>,
    m: usize,
    seed: u64,
    oracle: &mut dyn Oracle,
    lasso: &LassoConfig,
) -> Result<(Vec<usize>, SignalMatrix)> {
    let policy = random_policy(spectrum.n_vertices(), m, seed)?;
    let z = recover_with_policy(spectrum, &policy, oracle, lasso)?;
    Ok((policy, z))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_errors: usize,
    pub mean_precision: f64,
    pub per_feature_l2: Vec<f64>,
    pub classification_accuracy: Option<f64>,
    pub sampling_ratio: f64,
    pub seed: u64,
}

impl EvalReport {
    /// Binarizes both matrices at `threshold` and computes every metric.
    /// `positivity_threshold` enables the row-mean classification accuracy.
    pub fn compute(
        pred: &SignalMatrix,
        truth: &SignalMatrix,
        threshold: f64,
        positivity_threshold: Option<f64>,
        sampling_ratio: f64,
        seed: u64,
    ) -> Result<Self> {
        let bp = binarize(pred, threshold);
        let bt = binarize(truth, threshold);
        let classification_accuracy = match positivity_threshold {
            Some(t) => Some(amyloid_classify(pred, truth, t)?.1),
            None => None,
        };
        Ok(EvalReport {
            n_errors: count_errors(&bp, &bt)?,
            mean_precision: mean_precision(&bp, &bt)?,
            per_feature_l2: per_feature_l2(pred, truth)?,
            classification_accuracy,
            sampling_ratio,
            seed,
        })
    }
}

/// One row of the benchmark CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub sampling_ratio: f64,
    pub method: String,
    pub seed: u64,
    pub n_errors: usize,
    pub mean_precision: f64,
}

pub fn write_bench_csv<W: Write>(out: W, rows: &[BenchRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(|e| Error::InvalidConfig(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| Error::io("<bench csv>", e))
}

fn same_shape(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::dims(format!("{}x{}", b.0, b.1), format!("{}x{}", a.0, a.1)));
    }
    Ok(())
}
