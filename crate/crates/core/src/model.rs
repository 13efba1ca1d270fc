//! Domain types shared by every stage of the pipeline.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planar coordinate in meters.
pub type Point = [f64; 2];

/// Ordered RSS measurements: `n` samples (rows, collection order) by `d` sensors.
///
/// Stored row-major so that a sample is a contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct RssSequence {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl RssSequence {
    pub fn new(data: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidInput(format!(
                "sequence needs at least one sample and one sensor (got {n}x{d})"
            )));
        }
        if data.len() != n * d {
            return Err(Error::DimensionMismatch { expected: n * d, got: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("RSS sequence"));
        }
        Ok(Self { data, n, d })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: bad.len() });
        }
        Self::new(rows.concat(), rows.len(), d)
    }

    /// Sample count N.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Sensor count D.
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Sample at 0-based row `i` (1-based sample index `i + 1`).
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Copy of rows `lo..hi`.
    pub fn slice(&self, lo: usize, hi: usize) -> Result<Self> {
        if lo >= hi || hi > self.n {
            return Err(Error::InvalidInput(format!("row range {lo}..{hi} outside 0..{}", self.n)));
        }
        Self::new(self.data[lo * self.d..hi * self.d].to_vec(), hi - lo, self.d)
    }

    /// Reorders sensor columns: column `j` of the result is column `perm[j]` of `self`.
    pub fn permute_sensors(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: perm.len() });
        }
        let data = self.rows().flat_map(|r| perm.iter().map(move |&p| r[p])).collect();
        Self::new(data, self.n, self.d)
    }
}

/// Planar sensor positions, one per RSS column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorLayout {
    pub positions: Vec<Point>,
}

impl SensorLayout {
    pub fn new(positions: Vec<Point>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidInput("sensor layout is empty".into()));
        }
        if positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sensor layout"));
        }
        Ok(Self { positions })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Boundary vector `tau = (tau_1, ..., tau_{K-1})` over `n` samples.
///
/// Segment `k` (1-based) holds the 1-based sample indices `tau_{k-1} < i <= tau_k`,
/// i.e. the 0-based rows `tau_{k-1}..tau_k`, with `tau_0 = 0` and `tau_K = n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Segmentation {
    boundaries: Vec<usize>,
    n: usize,
}

impl Segmentation {
    pub fn new(boundaries: Vec<usize>, n: usize) -> Result<Self> {
        let mut prev = 0;
        for &b in &boundaries {
            if b <= prev || b >= n {
                return Err(Error::InvalidSegmentation(format!(
                    "boundaries {boundaries:?} must satisfy 0 < tau_1 < ... < tau_(K-1) < {n}"
                )));
            }
            prev = b;
        }
        if n == 0 {
            return Err(Error::InvalidSegmentation("empty sequence".into()));
        }
        Ok(Self { boundaries, n })
    }

    /// `tau_k = floor(k n / K)`.
    pub fn uniform(n: usize, k: usize) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::Infeasible(format!("cannot split {n} samples into {k} segments")));
        }
        Self::new((1..k).map(|j| j * n / k).collect(), n)
    }

    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    /// Number of segments K.
    pub fn k(&self) -> usize {
        self.boundaries.len() + 1
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `tau_j` for `j` in `0..=K`, including the implied `tau_0 = 0` and `tau_K = n`.
    pub fn tau(&self, j: usize) -> usize {
        match j {
            0 => 0,
            j if j == self.k() => self.n,
            j => self.boundaries[j - 1],
        }
    }

    /// Full vector `(0, tau_1, ..., tau_{K-1}, n)`.
    pub fn extended(&self) -> Vec<usize> {
        let mut v = Vec::with_capacity(self.k() + 1);
        v.push(0);
        v.extend_from_slice(&self.boundaries);
        v.push(self.n);
        v
    }

    /// 0-based row range of the 1-based segment `k`.
    pub fn segment(&self, k: usize) -> std::ops::Range<usize> {
        self.tau(k - 1)..self.tau(k)
    }

    pub fn segment_lengths(&self) -> Vec<usize> {
        self.extended().windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn min_segment_len(&self) -> usize {
        self.segment_lengths().into_iter().min().unwrap_or(0)
    }

    /// Per-sample 0-based cluster labels.
    pub fn labels(&self) -> Vec<usize> {
        let mut labels = Vec::with_capacity(self.n);
        for (k, len) in self.segment_lengths().into_iter().enumerate() {
            labels.extend(std::iter::repeat_n(k, len));
        }
        labels
    }
}

/// Shape of the sequential-prior window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowMode {
    Rectangle,
    Smooth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowParams {
    pub beta: f64,
    pub mode: WindowMode,
}

impl Default for WindowParams {
    fn default() -> Self {
        Self { beta: 1.0, mode: WindowMode::Smooth }
    }
}

impl WindowParams {
    pub fn smooth(beta: f64) -> Self {
        Self { beta, mode: WindowMode::Smooth }
    }

    pub fn rectangle() -> Self {
        Self { beta: 0.0, mode: WindowMode::Rectangle }
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            WindowMode::Smooth if !(self.beta > 0.0 && self.beta.is_finite()) => Err(Error::InvalidBeta(self.beta)),
            _ => Ok(()),
        }
    }
}

/// Affine-subspace feature `(U, mu, Sigma, s^2)` of one region.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceFeature {
    mu: DVector<f64>,
    basis: DMatrix<f64>,
    sigma2: DVector<f64>,
    noise_var: f64,
}

impl SubspaceFeature {
    pub fn new(mu: DVector<f64>, basis: DMatrix<f64>, sigma2: DVector<f64>, noise_var: f64) -> Result<Self> {
        let d = mu.len();
        if basis.nrows() != d {
            return Err(Error::DimensionMismatch { expected: d, got: basis.nrows() });
        }
        if sigma2.len() != basis.ncols() {
            return Err(Error::DimensionMismatch { expected: basis.ncols(), got: sigma2.len() });
        }
        if basis.ncols() > d {
            return Err(Error::InvalidDimension { dim: basis.ncols(), sensors: d });
        }
        if mu.iter().chain(basis.iter()).chain(sigma2.iter()).any(|v| !v.is_finite()) || !noise_var.is_finite() {
            return Err(Error::NonFinite("subspace feature"));
        }
        if sigma2.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidInput("subspace variances must be nonnegative".into()));
        }
        if noise_var <= 0.0 {
            return Err(Error::SingularCovariance(format!("noise variance must be positive, got {noise_var}")));
        }
        let gram = basis.transpose() * &basis;
        let dev = (gram - DMatrix::identity(basis.ncols(), basis.ncols())).amax();
        if dev > 1e-9 {
            return Err(Error::InvalidInput(format!("basis is not semi-unitary (deviation {dev:e})")));
        }
        Ok(Self { mu, basis, sigma2, noise_var })
    }

    /// Zero-dimensional feature: `x ~ N(mu, s^2 I)`.
    pub fn isotropic(mu: DVector<f64>, noise_var: f64) -> Result<Self> {
        let d = mu.len();
        Self::new(mu, DMatrix::zeros(d, 0), DVector::zeros(0), noise_var)
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn sigma2(&self) -> &DVector<f64> {
        &self.sigma2
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// Subspace dimension d_k.
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Sensor count D.
    pub fn sensors(&self) -> usize {
        self.mu.len()
    }

    /// Dense covariance `U Sigma U^T + s^2 I`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let scaled = &self.basis * DMatrix::from_diagonal(&self.sigma2);
        let mut c = scaled * self.basis.transpose();
        for i in 0..self.sensors() {
            c[(i, i)] += self.noise_var;
        }
        c
    }
}

/// Parameter collection `Theta = {U_k, Sigma_k, mu_k, s_k^2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub features: Vec<SubspaceFeature>,
}

impl ModelParams {
    pub fn new(features: Vec<SubspaceFeature>) -> Result<Self> {
        let d = features
            .first()
            .map(SubspaceFeature::sensors)
            .ok_or_else(|| Error::InvalidInput("model needs at least one feature".into()))?;
        if let Some(f) = features.iter().find(|f| f.sensors() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: f.sensors() });
        }
        Ok(Self { features })
    }

    pub fn k(&self) -> usize {
        self.features.len()
    }

    pub fn sensors(&self) -> usize {
        self.features[0].sensors()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

/// Region-based radio map: one feature per cluster, plus the physical region each
/// cluster was matched to (0-based ids; `None` until matching succeeds).
#[derive(Debug, Clone, PartialEq)]
pub struct RadioMap {
    pub model: ModelParams,
    pub region_ids: Option<Vec<usize>>,
    pub provenance: Provenance,
}

impl RadioMap {
    pub fn new(model: ModelParams, region_ids: Option<Vec<usize>>, provenance: Provenance) -> Result<Self> {
        if let Some(ids) = &region_ids {
            if ids.len() != model.k() {
                return Err(Error::DimensionMismatch { expected: model.k(), got: ids.len() });
            }
        }
        Ok(Self { model, region_ids, provenance })
    }

    /// Region id served by cluster `k`; the cluster index itself when unmatched.
    pub fn region_of(&self, k: usize) -> usize {
        self.region_ids.as_ref().map_or(k, |ids| ids[k])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segmentation_rejects_unordered_boundaries() {
        assert!(Segmentation::new(vec![3, 3], 10).is_err());
        assert!(Segmentation::new(vec![0, 4], 10).is_err());
        assert!(Segmentation::new(vec![4, 10], 10).is_err());
        assert!(Segmentation::new(vec![2, 5], 10).is_ok());
    }

    #[test]
    fn segmentation_ranges_and_labels() {
        let s = Segmentation::new(vec![2, 5], 7).unwrap();
        assert_eq!(s.k(), 3);
        assert_eq!(s.segment(1), 0..2);
        assert_eq!(s.segment(3), 5..7);
        assert_eq!(s.labels(), vec![0, 0, 1, 1, 1, 2, 2]);
        assert_eq!(s.segment_lengths(), vec![2, 3, 2]);
    }

    #[test]
    fn uniform_init_uses_floor() {
        let s = Segmentation::uniform(10, 3).unwrap();
        assert_eq!(s.boundaries(), &[3, 6]);
    }

    #[test]
    fn feature_rejects_non_orthonormal_basis() {
        let mu = DVector::zeros(3);
        let basis = DMatrix::from_column_slice(3, 1, &[1.0, 1.0, 0.0]);
        let err = SubspaceFeature::new(mu, basis, DVector::from_element(1, 1.0), 1.0);
        assert!(err.is_err());
    }

    #[test]
    fn sequence_rejects_nan() {
        assert!(RssSequence::new(vec![1.0, f64::NAN], 1, 2).is_err());
        assert!(RssSequence::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}
