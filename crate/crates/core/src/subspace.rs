//! Maximum-likelihood affine-subspace estimation for a fixed segmentation.
//!
//! For each segment the windowed mean and covariance are formed, the covariance is
//! eigendecomposed, the top `d_k` eigenvectors span the subspace, and the noise
//! variance is the mean of the discarded eigenvalues.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, RssSequence, Segmentation, SubspaceFeature, WindowParams};

/// Floor applied to the estimated noise variance before it enters a log.
pub const NOISE_FLOOR: f64 = 1e-12;
const MIN_WINDOW_MASS: f64 = 1e-9;

/// Windowed first and second moments of one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedStats {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub weight_sum: f64,
}

/// How many subspace dimensions each region receives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum DimPolicy {
    /// One explicit `d_k` per region.
    Explicit { dims: Vec<usize> },
    /// Same `d` for every region.
    Fixed { dim: usize },
    /// Smallest `d` whose leading eigenvalues hold `threshold` of the trace, capped.
    Energy { threshold: f64, max_dim: usize },
}

impl Default for DimPolicy {
    fn default() -> Self {
        DimPolicy::Energy { threshold: 0.97, max_dim: 3 }
    }
}

impl DimPolicy {
    /// Largest dimension this policy can hand out (`None` when data-dependent).
    pub fn max_dim(&self) -> usize {
        match self {
            DimPolicy::Explicit { dims } => dims.iter().copied().max().unwrap_or(0),
            DimPolicy::Fixed { dim } => *dim,
            DimPolicy::Energy { max_dim, .. } => *max_dim,
        }
    }

    /// Minimum segment length able to support the policy's largest dimension.
    pub fn min_segment_len(&self) -> usize {
        (self.max_dim() + 1).max(2)
    }
}

fn check_segment(seq: &RssSequence, k: usize, tau: &Segmentation) -> Result<()> {
    if tau.n() != seq.len() {
        return Err(Error::DimensionMismatch { expected: seq.len(), got: tau.n() });
    }
    if k == 0 || k > tau.k() {
        return Err(Error::InvalidInput(format!("segment {k} outside 1..={}", tau.k())));
    }
    Ok(())
}

fn segment_weights(seq: &RssSequence, k: usize, tau: &Segmentation, win: &WindowParams) -> Result<(Vec<f64>, f64)> {
    check_segment(seq, k, tau)?;
    win.validate()?;
    let w = win.weights(seq.len(), tau.tau(k - 1), tau.tau(k));
    let mass: f64 = w.iter().sum();
    if !(mass > MIN_WINDOW_MASS) {
        return Err(Error::DegenerateWindow(mass));
    }
    Ok((w, mass))
}

/// Windowed mean of segment `k` (1-based).
pub fn weighted_mean(seq: &RssSequence, k: usize, tau: &Segmentation, win: &WindowParams) -> Result<DVector<f64>> {
    let (w, mass) = segment_weights(seq, k, tau, win)?;
    Ok(mean_with(seq, &w, mass))
}

fn mean_with(seq: &RssSequence, w: &[f64], mass: f64) -> DVector<f64> {
    let mut mean = DVector::zeros(seq.dim());
    for (x, &wi) in seq.rows().zip(w) {
        if wi != 0.0 {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += wi * v;
            }
        }
    }
    mean / mass
}

/// Windowed covariance `S_k` about the supplied mean, normalized by the window mass.
pub fn weighted_cov(
    seq: &RssSequence,
    k: usize,
    tau: &Segmentation,
    win: &WindowParams,
    mu: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    if mu.len() != seq.dim() {
        return Err(Error::DimensionMismatch { expected: seq.dim(), got: mu.len() });
    }
    let (w, mass) = segment_weights(seq, k, tau, win)?;
    Ok(cov_with(seq, &w, mass, mu))
}

fn cov_with(seq: &RssSequence, w: &[f64], mass: f64, mu: &DVector<f64>) -> DMatrix<f64> {
    let d = seq.dim();
    let mut cov = DMatrix::zeros(d, d);
    let mut r = vec![0.0; d];
    for (x, &wi) in seq.rows().zip(w) {
        if wi == 0.0 {
            continue;
        }
        for (j, rj) in r.iter_mut().enumerate() {
            *rj = x[j] - mu[j];
        }
        for a in 0..d {
            let wa = wi * r[a];
            for b in a..d {
                cov[(a, b)] += wa * r[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            cov[(a, b)] = cov[(b, a)];
        }
    }
    cov / mass
}

/// Mean, covariance, and window mass for segment `k`.
pub fn weighted_stats(seq: &RssSequence, k: usize, tau: &Segmentation, win: &WindowParams) -> Result<WeightedStats> {
    let (w, mass) = segment_weights(seq, k, tau, win)?;
    let mean = mean_with(seq, &w, mass);
    let cov = cov_with(seq, &w, mass, &mean);
    Ok(WeightedStats { mean, cov, weight_sum: mass })
}

/// Eigenpairs of a symmetric matrix in descending eigenvalue order, each eigenvector
/// signed so its largest-magnitude component is positive.
pub fn sorted_eigen(s: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = (s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    // stable sort keeps solver order among exact ties
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(s.nrows(), order.len());
    for (c, &i) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        let pivot = v.iter().copied().fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            v.neg_mut();
        }
        vectors.set_column(c, &v);
    }
    (values, vectors)
}

/// Dimension picked by the energy rule from descending eigenvalues.
pub fn energy_dim(eigenvalues: &[f64], threshold: f64, max_dim: usize) -> usize {
    let clamped: Vec<f64> = eigenvalues.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    let cap = max_dim.min(eigenvalues.len().saturating_sub(1));
    if total <= 0.0 {
        return 0;
    }
    let mut acc = 0.0;
    for (d, v) in clamped.iter().enumerate() {
        if d >= cap {
            return cap;
        }
        acc += v;
        if acc / total >= threshold {
            return d + 1;
        }
    }
    cap
}

/// ML subspace feature from windowed statistics.
pub fn fit_subspace(stats: &WeightedStats, dim: usize) -> Result<SubspaceFeature> {
    let d = stats.cov.nrows();
    if stats.cov.ncols() != d || stats.mean.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: stats.cov.ncols() });
    }
    if dim >= d {
        return Err(Error::InvalidDimension { dim, sensors: d });
    }
    let scale = stats.cov.amax().max(1.0);
    let asym = (&stats.cov - stats.cov.transpose()).amax();
    if asym > 1e-9 * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let (values, vectors) = sorted_eigen(&stats.cov);
    let tail: f64 = values[dim..].iter().sum();
    let noise_var = (tail / (d - dim) as f64).max(NOISE_FLOOR);
    let sigma2 = DVector::from_iterator(dim, values[..dim].iter().map(|l| (l - noise_var).max(0.0)));
    let basis = vectors.columns(0, dim).into_owned();
    SubspaceFeature::new(stats.mean.clone(), basis, sigma2, noise_var)
}

/// Dimension for segment `k` (0-based) under `policy`.
fn resolve_dim(policy: &DimPolicy, k: usize, stats: &WeightedStats) -> Result<usize> {
    match policy {
        DimPolicy::Explicit { dims } => dims
            .get(k)
            .copied()
            .ok_or_else(|| Error::InvalidInput(format!("no explicit dimension for region {}", k + 1))),
        DimPolicy::Fixed { dim } => Ok(*dim),
        DimPolicy::Energy { threshold, max_dim } => {
            let (values, _) = sorted_eigen(&stats.cov);
            Ok(energy_dim(&values, *threshold, *max_dim))
        }
    }
}

/// Resolves a policy into concrete per-segment dimensions.
pub fn resolve_dims(
    seq: &RssSequence,
    tau: &Segmentation,
    policy: &DimPolicy,
    win: &WindowParams,
) -> Result<Vec<usize>> {
    (1..=tau.k())
        .map(|k| {
            let stats = weighted_stats(seq, k, tau, win)?;
            resolve_dim(policy, k - 1, &stats)
        })
        .collect()
}

/// `Theta(tau)`: one ML feature per segment. Segments are fitted in parallel and
/// assembled in segment order.
pub fn fit_all(seq: &RssSequence, tau: &Segmentation, dims: &DimPolicy, win: &WindowParams) -> Result<ModelParams> {
    if let DimPolicy::Explicit { dims } = dims {
        if dims.len() != tau.k() {
            return Err(Error::DimensionMismatch { expected: tau.k(), got: dims.len() });
        }
    }
    let features = (1..=tau.k())
        .into_par_iter()
        .map(|k| {
            let stats = weighted_stats(seq, k, tau, win)?;
            let dim = resolve_dim(dims, k - 1, &stats)?;
            fit_subspace(&stats, dim)
        })
        .collect::<Result<Vec<_>>>()?;
    ModelParams::new(features)
}
