//! Windowed segment costs.
//!
//! Every cost in the segmentation problem has the same shape: a pair of adjacent
//! clusters `(lo, mid]` and `(mid, hi]`, each scored by some per-sample cost against
//! its cluster model, and blended across `mid` by the sigmoid step. Only the models
//! differ: the `d = 0` cost uses the hard segment means of the current split, while
//! the general cost uses a frozen `Theta` indexed by cluster position.
//!
//! [`WindowedCost`] evaluates these in `O(D)` plus a band of `O(beta)` samples around
//! the step, using prefix sums for the rectangle part.

use nalgebra::DVector;

use crate::density::logdet_mahalanobis;
use crate::error::{Error, Result};
use crate::model::{ModelParams, RssSequence, Segmentation, WindowParams};

/// Per-cluster scoring model used by [`WindowedCost`].
pub trait SegmentModels: Send + Sync {
    type Model;

    /// Sample count N.
    fn n(&self) -> usize;

    /// Model for cluster `slot` spanning 0-based rows `lo..hi`; `None` for an empty
    /// cluster, whose cost terms are then dropped.
    fn model(&self, slot: usize, lo: usize, hi: usize) -> Option<Self::Model>;

    /// Cost of the 1-based sample `i` under `model`.
    fn sample_cost(&self, model: &Self::Model, i: usize) -> f64;

    /// Sum of [`Self::sample_cost`] over 1-based samples `lo < i <= hi`.
    fn range_cost(&self, model: &Self::Model, lo: usize, hi: usize) -> f64;
}

/// Object-safe view of a segmentation cost. All values are divided by N.
pub trait SegmentCost: Send + Sync {
    fn n(&self) -> usize;

    /// `f_k` for the cluster pair `(lo, mid]`, `(mid, hi]` whose left cluster sits at
    /// position `left_slot` (0-based). `mid == lo` is the cost of not splitting.
    fn pair(&self, left_slot: usize, lo: usize, mid: usize, hi: usize) -> f64;

    /// `f_0`: the first cluster `(0, hi]` with its lower step at 0.
    fn head(&self, hi: usize) -> f64;

    /// `f_K`: the last cluster `(lo, N]` at position `slot`, upper step at N.
    fn tail(&self, slot: usize, lo: usize) -> f64;

    /// `sum_{k=0}^{K} f_k(tau)`.
    fn total(&self, tau: &[usize]) -> f64 {
        let n = self.n();
        let k = tau.len() + 1;
        let ext: Vec<usize> = std::iter::once(0).chain(tau.iter().copied()).chain(std::iter::once(n)).collect();
        let mut sum = self.head(ext[1]) + self.tail(k - 1, ext[k - 1]);
        for j in 1..k {
            sum += self.pair(j - 1, ext[j - 1], ext[j], ext[j + 1]);
        }
        sum
    }
}

/// Generic windowed cost over a [`SegmentModels`] strategy.
pub struct WindowedCost<M> {
    models: M,
    win: WindowParams,
    band: usize,
}

impl<M: SegmentModels> WindowedCost<M> {
    pub fn new(models: M, win: WindowParams) -> Result<Self> {
        win.validate()?;
        Ok(Self { band: win.band(), models, win })
    }

    pub fn models(&self) -> &M {
        &self.models
    }

    fn cost_or_zero(&self, m: &Option<M::Model>, i: usize) -> f64 {
        m.as_ref().map_or(0.0, |m| self.models.sample_cost(m, i))
    }

    fn range_or_zero(&self, m: &Option<M::Model>, lo: usize, hi: usize) -> f64 {
        match m {
            Some(m) if hi > lo => self.models.range_cost(m, lo, hi),
            _ => 0.0,
        }
    }
}

impl<M: SegmentModels> SegmentCost for WindowedCost<M> {
    fn n(&self) -> usize {
        self.models.n()
    }

    fn pair(&self, left_slot: usize, lo: usize, mid: usize, hi: usize) -> f64 {
        debug_assert!(lo <= mid && mid <= hi);
        let left = self.models.model(left_slot, lo, mid);
        let right = self.models.model(left_slot + 1, mid, hi);
        let mut sum = self.range_or_zero(&left, lo, mid) + self.range_or_zero(&right, mid, hi);
        if self.band > 0 {
            let start = (lo + 1).max(mid.saturating_sub(self.band) + 1);
            let end = hi.min(mid + self.band);
            for i in start..=end {
                let s = self.win.step(i as i64 - mid as i64);
                let a = self.cost_or_zero(&left, i);
                let b = self.cost_or_zero(&right, i);
                if i <= mid {
                    sum += s * (b - a);
                } else {
                    sum += (1.0 - s) * (a - b);
                }
            }
        }
        sum / self.n() as f64
    }

    fn head(&self, hi: usize) -> f64 {
        let Some(m) = self.models.model(0, 0, hi) else {
            return 0.0;
        };
        let mut sum = self.models.range_cost(&m, 0, hi);
        for i in 1..=hi.min(self.band) {
            sum -= (1.0 - self.win.step(i as i64)) * self.models.sample_cost(&m, i);
        }
        sum / self.n() as f64
    }

    fn tail(&self, slot: usize, lo: usize) -> f64 {
        let n = self.n();
        let Some(m) = self.models.model(slot, lo, n) else {
            return 0.0;
        };
        let mut sum = self.models.range_cost(&m, lo, n);
        let start = (lo + 1).max((n + 1).saturating_sub(self.band));
        for i in start..=n {
            sum -= self.win.step(i as i64 - n as i64) * self.models.sample_cost(&m, i);
        }
        sum / n as f64
    }
}

/// `d = 0` models: each cluster is scored by squared distance to its own hard
/// segment mean, which is recomputed for every candidate split.
///
/// Data are centered on the global mean before the prefix sums are taken, which
/// keeps the `Q - |P|^2 / n` cancellation well conditioned for dB-scale offsets.
pub struct MeanShiftModels {
    d: usize,
    n: usize,
    centered: Vec<f64>,
    /// `(N + 1) x D` prefix sums of centered samples.
    p: Vec<f64>,
    /// `N + 1` prefix sums of squared norms of centered samples.
    q: Vec<f64>,
}

impl MeanShiftModels {
    pub fn new(seq: &RssSequence) -> Self {
        let (n, d) = (seq.len(), seq.dim());
        let mut mean = vec![0.0; d];
        for row in seq.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let centered: Vec<f64> =
            seq.rows().flat_map(|row| row.iter().zip(&mean).map(|(v, m)| v - m).collect::<Vec<_>>()).collect();
        let mut p = vec![0.0; (n + 1) * d];
        let mut q = vec![0.0; n + 1];
        for i in 0..n {
            let row = &centered[i * d..(i + 1) * d];
            let mut sq = 0.0;
            for j in 0..d {
                p[(i + 1) * d + j] = p[i * d + j] + row[j];
                sq += row[j] * row[j];
            }
            q[i + 1] = q[i] + sq;
        }
        Self { d, n, centered, p, q }
    }

    fn psum(&self, lo: usize, hi: usize) -> impl Iterator<Item = f64> + '_ {
        let a = &self.p[lo * self.d..(lo + 1) * self.d];
        let b = &self.p[hi * self.d..(hi + 1) * self.d];
        b.iter().zip(a).map(|(x, y)| x - y)
    }

    /// Sum of squared distances to the segment mean over `lo < i <= hi`.
    pub fn sse(&self, lo: usize, hi: usize) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        let norm: f64 = self.psum(lo, hi).map(|v| v * v).sum();
        (self.q[hi] - self.q[lo] - norm / (hi - lo) as f64).max(0.0)
    }
}

impl SegmentModels for MeanShiftModels {
    type Model = Vec<f64>;

    fn n(&self) -> usize {
        self.n
    }

    fn model(&self, _slot: usize, lo: usize, hi: usize) -> Option<Vec<f64>> {
        (hi > lo).then(|| {
            let len = (hi - lo) as f64;
            self.psum(lo, hi).map(|v| v / len).collect()
        })
    }

    fn sample_cost(&self, model: &Vec<f64>, i: usize) -> f64 {
        let row = &self.centered[(i - 1) * self.d..i * self.d];
        row.iter().zip(model).map(|(x, m)| (x - m) * (x - m)).sum()
    }

    fn range_cost(&self, model: &Vec<f64>, lo: usize, hi: usize) -> f64 {
        let cross: f64 = self.psum(lo, hi).zip(model).map(|(p, m)| p * m).sum();
        let norm: f64 = model.iter().map(|m| m * m).sum();
        (self.q[hi] - self.q[lo] - 2.0 * cross + (hi - lo) as f64 * norm).max(0.0)
    }
}

/// Frozen-`Theta` models: cluster at position `c` is always scored by
/// `g_c(x) = ln|C_c| + (x - mu_c)^T C_c^{-1} (x - mu_c)`.
pub struct FrozenModels {
    n: usize,
    /// Per-cluster per-sample costs, `g[c][i - 1]`.
    g: Vec<Vec<f64>>,
    /// Per-cluster prefix sums of `g`.
    prefix: Vec<Vec<f64>>,
}

impl FrozenModels {
    pub fn new(seq: &RssSequence, theta: &ModelParams) -> Result<Self> {
        if theta.sensors() != seq.dim() {
            return Err(Error::DimensionMismatch { expected: seq.dim(), got: theta.sensors() });
        }
        let g: Vec<Vec<f64>> = theta
            .features
            .iter()
            .map(|f| {
                seq.rows()
                    .map(|x| {
                        let (logdet, quad) = logdet_mahalanobis(x, f);
                        logdet + quad
                    })
                    .collect()
            })
            .collect();
        let prefix = g
            .iter()
            .map(|row| {
                let mut acc = vec![0.0; row.len() + 1];
                for (i, v) in row.iter().enumerate() {
                    acc[i + 1] = acc[i] + v;
                }
                acc
            })
            .collect();
        Ok(Self { n: seq.len(), g, prefix })
    }

    pub fn k(&self) -> usize {
        self.g.len()
    }
}

impl SegmentModels for FrozenModels {
    type Model = usize;

    fn n(&self) -> usize {
        self.n
    }

    fn model(&self, slot: usize, _lo: usize, _hi: usize) -> Option<usize> {
        (slot < self.g.len()).then_some(slot)
    }

    fn sample_cost(&self, model: &usize, i: usize) -> f64 {
        self.g[*model][i - 1]
    }

    fn range_cost(&self, model: &usize, lo: usize, hi: usize) -> f64 {
        self.prefix[*model][hi] - self.prefix[*model][lo]
    }
}

fn check_index(tau: &Segmentation, seq: &RssSequence, k: usize) -> Result<()> {
    if tau.n() != seq.len() {
        return Err(Error::DimensionMismatch { expected: seq.len(), got: tau.n() });
    }
    if k > tau.k() {
        return Err(Error::InvalidSegmentation(format!("sub-cost index {k} outside 0..={}", tau.k())));
    }
    Ok(())
}

fn select<C: SegmentCost>(cost: &C, tau: &Segmentation, k: usize) -> f64 {
    let kk = tau.k();
    match k {
        0 => cost.head(tau.tau(1)),
        k if k == kk => cost.tail(kk - 1, tau.tau(kk - 1)),
        k => cost.pair(k - 1, tau.tau(k - 1), tau.tau(k), tau.tau(k + 1)),
    }
}

/// `f_k(tau_k; tau_{-k})` of the `d = 0` problem for `k` in `0..=K`.
pub fn cost_fk_d0(seq: &RssSequence, k: usize, tau: &Segmentation, win: &WindowParams) -> Result<f64> {
    check_index(tau, seq, k)?;
    let cost = WindowedCost::new(MeanShiftModels::new(seq), *win)?;
    Ok(select(&cost, tau, k))
}

/// `F_k(Theta, tau)` of the general problem: log-determinant plus Mahalanobis cost
/// under a fixed model, for `k` in `0..=K`.
pub fn cost_fk_general(
    seq: &RssSequence,
    theta: &ModelParams,
    k: usize,
    tau: &Segmentation,
    win: &WindowParams,
) -> Result<f64> {
    check_index(tau, seq, k)?;
    if theta.k() != tau.k() {
        return Err(Error::DimensionMismatch { expected: tau.k(), got: theta.k() });
    }
    let cost = WindowedCost::new(FrozenModels::new(seq, theta)?, *win)?;
    Ok(select(&cost, tau, k))
}

/// Hard segment mean of rows `lo..hi` (the `d = 0` cluster model).
pub fn segment_mean(seq: &RssSequence, lo: usize, hi: usize) -> DVector<f64> {
    let mut m = DVector::zeros(seq.dim());
    for i in lo..hi {
        for (a, v) in m.iter_mut().zip(seq.row(i)) {
            *a += v;
        }
    }
    m / (hi - lo) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::log_density;
    use crate::model::SubspaceFeature;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_seq(seed: u64, n: usize, d: usize) -> RssSequence {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n * d).map(|_| rng.sample::<f64, _>(StandardNormal) * 3.0 - 50.0).collect();
        RssSequence::new(data, n, d).unwrap()
    }

    fn sq(a: &[f64], b: &DVector<f64>) -> f64 {
        a.iter().zip(b.iter()).map(|(x, m)| (x - m) * (x - m)).sum()
    }

    /// Literal per-sample evaluation of the sub-cost definitions.
    fn direct_fk(seq: &RssSequence, k: usize, tau: &Segmentation, win: &WindowParams) -> f64 {
        let n = seq.len();
        let kk = tau.k();
        let step = |x: i64| win.step(x);
        let mut sum = 0.0;
        if k == 0 {
            let m = segment_mean(seq, 0, tau.tau(1));
            for i in 1..=tau.tau(1) {
                sum += step(i as i64) * sq(seq.row(i - 1), &m);
            }
        } else if k == kk {
            let m = segment_mean(seq, tau.tau(kk - 1), n);
            for i in tau.tau(kk - 1) + 1..=n {
                sum += (1.0 - step(i as i64 - n as i64)) * sq(seq.row(i - 1), &m);
            }
        } else {
            let (lo, mid, hi) = (tau.tau(k - 1), tau.tau(k), tau.tau(k + 1));
            let ml = segment_mean(seq, lo, mid);
            let mr = segment_mean(seq, mid, hi);
            for i in lo + 1..=hi {
                let s = step(i as i64 - mid as i64);
                sum += (1.0 - s) * sq(seq.row(i - 1), &ml) + s * sq(seq.row(i - 1), &mr);
            }
        }
        sum / n as f64
    }

    #[test]
    fn zero_at_noiseless_true_boundary() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![if i < 8 { 1.0 } else { 5.0 }, -3.0]).collect();
        let seq = RssSequence::from_rows(&rows).unwrap();
        let tau = Segmentation::new(vec![8], 20).unwrap();
        let f = cost_fk_d0(&seq, 1, &tau, &WindowParams::smooth(1e-3)).unwrap();
        assert!(f.abs() < 1e-12, "{f}");
    }

    #[test]
    fn zero_on_constant_data() {
        let seq = RssSequence::new(vec![-42.0; 30], 15, 2).unwrap();
        let tau = Segmentation::new(vec![4, 9], 15).unwrap();
        for k in 0..=3 {
            assert!(cost_fk_d0(&seq, k, &tau, &WindowParams::default()).unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn rectangle_pair_cost_is_two_segment_sse() {
        let seq = random_seq(1, 8, 2);
        let win = WindowParams::rectangle();
        for t in 1..8 {
            let tau = Segmentation::new(vec![t], 8).unwrap();
            let ml = segment_mean(&seq, 0, t);
            let mr = segment_mean(&seq, t, 8);
            let oracle: f64 =
                (0..t).map(|i| sq(seq.row(i), &ml)).sum::<f64>() + (t..8).map(|i| sq(seq.row(i), &mr)).sum::<f64>();
            let f = cost_fk_d0(&seq, 1, &tau, &win).unwrap();
            assert!((f - oracle / 8.0).abs() < 1e-9);
        }
    }

    #[test]
    fn fast_costs_match_direct_evaluation() {
        let seq = random_seq(2, 90, 3);
        let tau = Segmentation::new(vec![5, 31, 60, 84], 90).unwrap();
        for win in [
            WindowParams::rectangle(),
            WindowParams::smooth(1e-3),
            WindowParams::smooth(1.0),
            WindowParams::smooth(2.5),
        ] {
            for k in 0..=tau.k() {
                let fast = cost_fk_d0(&seq, k, &tau, &win).unwrap();
                let slow = direct_fk(&seq, k, &tau, &win);
                assert!((fast - slow).abs() < 1e-9 * slow.abs().max(1.0), "k={k} {win:?}: {fast} vs {slow}");
            }
        }
    }

    #[test]
    fn general_cost_reduces_to_scaled_d0_cost_for_unit_isotropic_model() {
        let seq = random_seq(3, 40, 2);
        let tau = Segmentation::new(vec![17], 40).unwrap();
        let win = WindowParams::smooth(0.7);
        let means = [segment_mean(&seq, 0, 17), segment_mean(&seq, 17, 40)];
        let theta =
            ModelParams::new(means.iter().map(|m| SubspaceFeature::isotropic(m.clone(), 1.0).unwrap()).collect())
                .unwrap();
        let general = cost_fk_general(&seq, &theta, 1, &tau, &win).unwrap();
        let d0 = cost_fk_d0(&seq, 1, &tau, &win).unwrap();
        assert!((general - d0).abs() < 1e-9);
    }

    #[test]
    fn general_cost_zero_when_samples_sit_on_unit_model() {
        let mu = DVector::from_vec(vec![2.0, -1.0]);
        let rows: Vec<Vec<f64>> = (0..10).map(|_| vec![2.0, -1.0]).collect();
        let seq = RssSequence::from_rows(&rows).unwrap();
        let feat = SubspaceFeature::isotropic(mu, 1.0).unwrap();
        let theta = ModelParams::new(vec![feat.clone(), feat]).unwrap();
        let tau = Segmentation::new(vec![5], 10).unwrap();
        let v = cost_fk_general(&seq, &theta, 1, &tau, &WindowParams::default()).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn rectangle_general_cost_is_minus_two_loglik_over_the_pair() {
        let seq = random_seq(4, 30, 3);
        let tau = Segmentation::new(vec![9, 20], 30).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let theta = ModelParams::new(
            (0..3)
                .map(|_| {
                    let mu = DVector::from_fn(3, |_, _| -50.0 + rng.sample::<f64, _>(StandardNormal));
                    let axis = rng.random_range(0..3);
                    let u = nalgebra::DMatrix::from_fn(3, 1, |r, _| if r == axis { 1.0 } else { 0.0 });
                    SubspaceFeature::new(mu, u, DVector::from_element(1, 2.0), 1.5).unwrap()
                })
                .collect(),
        )
        .unwrap();
        let win = WindowParams::rectangle();
        let v = cost_fk_general(&seq, &theta, 2, &tau, &win).unwrap();
        let ll: f64 = (9..20).map(|i| log_density(seq.row(i), &theta.features[1]).unwrap()).sum::<f64>()
            + (20..30).map(|i| log_density(seq.row(i), &theta.features[2]).unwrap()).sum::<f64>();
        let mass = 21.0;
        let expected = (-2.0 * ll - 3.0 * (2.0 * std::f64::consts::PI).ln() * mass) / 30.0;
        assert!((v - expected).abs() < 1e-9, "{v} vs {expected}");
    }

    #[test]
    fn rejects_out_of_range_index() {
        let seq = random_seq(5, 10, 1);
        let tau = Segmentation::new(vec![5], 10).unwrap();
        assert!(cost_fk_d0(&seq, 3, &tau, &WindowParams::default()).is_err());
    }

    proptest! {
        #[test]
        fn total_cost_matches_direct_sum(seed in 0u64..1000, cuts in proptest::collection::btree_set(1usize..50, 1..5), beta in 0.05f64..3.0) {
            let seq = random_seq(seed, 50, 2);
            let tau = Segmentation::new(cuts.into_iter().collect(), 50).unwrap();
            let win = WindowParams::smooth(beta);
            let cost = WindowedCost::new(MeanShiftModels::new(&seq), win).unwrap();
            let fast = cost.total(tau.boundaries());
            let slow: f64 = (0..=tau.k()).map(|k| direct_fk(&seq, k, &tau, &win)).sum();
            prop_assert!((fast - slow).abs() < 1e-9 * slow.max(1.0));
        }
    }
}
