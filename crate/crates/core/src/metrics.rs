//! Clustering quality metrics and subspace similarity.

use nalgebra::{DMatrix, DVector};
use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SubspaceFeature;

/// Normalization of mutual information.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NmiNorm {
    /// `I / sqrt(H(a) H(b))`.
    #[default]
    Geometric,
    /// `2 I / (H(a) + H(b))`.
    Arithmetic,
}

/// Dense contingency table with compacted label alphabets.
struct Contingency {
    table: Vec<Vec<usize>>,
    rows: Vec<usize>,
    cols: Vec<usize>,
    n: usize,
}

fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut ids: Vec<usize> = labels.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let mapped = labels.iter().map(|l| ids.binary_search(l).unwrap()).collect();
    (mapped, ids.len())
}

fn contingency(pred: &[usize], truth: &[usize]) -> Result<Contingency> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), got: pred.len() });
    }
    if pred.is_empty() {
        return Err(Error::InvalidInput("cannot score an empty labeling".into()));
    }
    let (p, kp) = compact(pred);
    let (t, kt) = compact(truth);
    let mut table = vec![vec![0; kt]; kp];
    for (&a, &b) in p.iter().zip(&t) {
        table[a][b] += 1;
    }
    let rows = table.iter().map(|r| r.iter().sum()).collect();
    let cols = (0..kt).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    Ok(Contingency { table, rows, cols, n: pred.len() })
}

/// Best-match accuracy: the largest fraction of agreeing samples over all
/// one-to-one relabelings of `pred`, solved by optimal assignment.
pub fn clustering_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let c = contingency(pred, truth)?;
    let size = c.rows.len().max(c.cols.len());
    let weights =
        Matrix::from_fn(size, size, |(i, j)| c.table.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0) as i64);
    let (matched, _) = kuhn_munkres(&weights);
    Ok(matched as f64 / c.n as f64)
}

fn entropy(counts: &[usize], n: usize) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information (natural logs). Two single-cluster labelings
/// score 1.
pub fn nmi(pred: &[usize], truth: &[usize], norm: NmiNorm) -> Result<f64> {
    let c = contingency(pred, truth)?;
    let n = c.n as f64;
    let (ha, hb) = (entropy(&c.rows, c.n), entropy(&c.cols, c.n));
    if ha == 0.0 && hb == 0.0 {
        return Ok(1.0);
    }
    if ha == 0.0 || hb == 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (i, row) in c.table.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij > 0 {
                let nij = nij as f64;
                mi += nij / n * (n * nij / (c.rows[i] as f64 * c.cols[j] as f64)).ln();
            }
        }
    }
    let denom = match norm {
        NmiNorm::Geometric => (ha * hb).sqrt(),
        NmiNorm::Arithmetic => 0.5 * (ha + hb),
    };
    Ok((mi / denom).clamp(0.0, 1.0))
}

/// Pair-counting scores; same-cluster pairs are the positives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairScores {
    pub f1: f64,
    pub ari: f64,
    pub precision: f64,
}

fn pairs(c: usize) -> f64 {
    let c = c as f64;
    c * (c - 1.0) / 2.0
}

/// F1, adjusted Rand index and precision. With no predicted positive pairs the
/// precision and F1 are 0; a degenerate ARI denominator gives 1 for identical
/// partitions and 0 otherwise.
pub fn pairwise_scores(pred: &[usize], truth: &[usize]) -> Result<PairScores> {
    let c = contingency(pred, truth)?;
    let tp: f64 = c.table.iter().flatten().map(|&v| pairs(v)).sum();
    let pred_pos: f64 = c.rows.iter().map(|&v| pairs(v)).sum();
    let true_pos: f64 = c.cols.iter().map(|&v| pairs(v)).sum();
    let precision = if pred_pos > 0.0 { tp / pred_pos } else { 0.0 };
    let recall = if true_pos > 0.0 { tp / true_pos } else { 0.0 };
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    let total = pairs(c.n);
    let expected = if total > 0.0 { pred_pos * true_pos / total } else { 0.0 };
    let max = 0.5 * (pred_pos + true_pos);
    let ari = if max - expected != 0.0 {
        (tp - expected) / (max - expected)
    } else if tp == pred_pos && tp == true_pos {
        1.0
    } else {
        0.0
    };
    Ok(PairScores { f1, ari, precision })
}

/// `[U, mu~ / |mu~|]` with `mu~ = (I - U U^T) mu`; the offset column is skipped
/// when the mean lies in the span of `U`.
pub fn augmented_basis(f: &SubspaceFeature) -> DMatrix<f64> {
    let u = f.basis();
    let resid: DVector<f64> = f.mu() - u * (u.transpose() * f.mu());
    let norm = resid.norm();
    if norm <= 1e-12 * f.mu().norm().max(1.0) {
        return u.clone();
    }
    let mut out = u.clone().insert_column(u.ncols(), 0.0);
    out.set_column(u.ncols(), &(resid / norm));
    out
}

/// `trace(P_a P_b) / min(rank a, rank b)` over the augmented bases, in `[0, 1]`.
pub fn subspace_similarity(a: &SubspaceFeature, b: &SubspaceFeature) -> Result<f64> {
    if a.sensors() != b.sensors() {
        return Err(Error::DimensionMismatch { expected: a.sensors(), got: b.sensors() });
    }
    let (ua, ub) = (augmented_basis(a), augmented_basis(b));
    let denom = ua.ncols().min(ub.ncols());
    if denom == 0 {
        return Err(Error::InvalidInput("both subspaces are empty".into()));
    }
    // trace(Ua Ua^T Ub Ub^T) = |Ua^T Ub|_F^2
    let overlap = (ua.transpose() * ub).norm_squared();
    Ok((overlap / denom as f64).clamp(0.0, 1.0))
}
