//! Deterministic proxy `F_k = E{f_k}` of the `d = 0` sub-cost.
//!
//! With noiseless per-sample means `nu_i` and isotropic noise of variance `s^2` per
//! sensor, the hard mean `m_L` of a cluster `L` with `n_L` samples satisfies
//!
//! ```text
//! E|x_i - m_L|^2 = |nu_i - mean_L(nu)|^2 + D s^2 (1 + 1/n_L - 2 [i in L] / n_L)
//! ```
//!
//! so the expectation of every windowed sub-cost is available in closed form for any
//! number of true boundaries inside the scanned interval. A Monte Carlo estimator is
//! kept alongside as an independent check.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use super::cost::{cost_fk_d0, SegmentCost, SegmentModels, WindowedCost};
use crate::error::{Error, Result};
use crate::model::{RssSequence, Segmentation, WindowParams};

/// Cluster model under the proxy: the noiseless mean of the cluster plus its extent.
#[derive(Debug, Clone)]
pub struct ProxyModel {
    mean: Vec<f64>,
    lo: usize,
    hi: usize,
}

/// [`SegmentModels`] whose costs are the expected `d = 0` costs.
pub struct ProxyModels {
    d: usize,
    n: usize,
    /// Per-sample noiseless means, row-major.
    nu: Vec<f64>,
    /// Prefix sums of `nu`.
    p: Vec<f64>,
    /// Prefix sums of `|nu_i|^2`.
    q: Vec<f64>,
    /// `D s^2`.
    noise_energy: f64,
}

impl ProxyModels {
    /// `mus[k]` is the mean of truth region `k`; `truth` holds the true boundaries.
    pub fn new(mus: &[DVector<f64>], truth: &Segmentation, noise_var: f64) -> Result<Self> {
        if mus.len() != truth.k() {
            return Err(Error::DimensionMismatch { expected: truth.k(), got: mus.len() });
        }
        if !(noise_var >= 0.0 && noise_var.is_finite()) {
            return Err(Error::InvalidInput(format!("noise variance must be finite and >= 0, got {noise_var}")));
        }
        let d = mus[0].len();
        if let Some(bad) = mus.iter().find(|m| m.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: bad.len() });
        }
        // Center on the mean of the region means to keep prefix sums well scaled.
        let center: Vec<f64> = (0..d).map(|j| mus.iter().map(|m| m[j]).sum::<f64>() / mus.len() as f64).collect();
        let n = truth.n();
        let mut nu = Vec::with_capacity(n * d);
        for label in truth.labels() {
            nu.extend(mus[label].iter().zip(&center).map(|(a, c)| a - c));
        }
        let mut p = vec![0.0; (n + 1) * d];
        let mut q = vec![0.0; n + 1];
        for i in 0..n {
            let mut sq = 0.0;
            for j in 0..d {
                let v = nu[i * d + j];
                p[(i + 1) * d + j] = p[i * d + j] + v;
                sq += v * v;
            }
            q[i + 1] = q[i] + sq;
        }
        Ok(Self { d, n, nu, p, q, noise_energy: d as f64 * noise_var })
    }

    /// Noiseless per-sample means as a sequence (in the centered frame).
    pub fn noiseless(&self) -> &[f64] {
        &self.nu
    }
}

impl SegmentModels for ProxyModels {
    type Model = ProxyModel;

    fn n(&self) -> usize {
        self.n
    }

    fn model(&self, _slot: usize, lo: usize, hi: usize) -> Option<ProxyModel> {
        (hi > lo).then(|| {
            let len = (hi - lo) as f64;
            let mean = (0..self.d).map(|j| (self.p[hi * self.d + j] - self.p[lo * self.d + j]) / len).collect();
            ProxyModel { mean, lo, hi }
        })
    }

    fn sample_cost(&self, model: &ProxyModel, i: usize) -> f64 {
        let row = &self.nu[(i - 1) * self.d..i * self.d];
        let bias: f64 = row.iter().zip(&model.mean).map(|(a, b)| (a - b) * (a - b)).sum();
        let n_l = (model.hi - model.lo) as f64;
        let inside = if model.lo < i && i <= model.hi { 2.0 / n_l } else { 0.0 };
        bias + self.noise_energy * (1.0 + 1.0 / n_l - inside)
    }

    fn range_cost(&self, model: &ProxyModel, lo: usize, hi: usize) -> f64 {
        let d = self.d;
        let cross: f64 = (0..d).map(|j| (self.p[hi * d + j] - self.p[lo * d + j]) * model.mean[j]).sum();
        let norm: f64 = model.mean.iter().map(|m| m * m).sum();
        let count = (hi - lo) as f64;
        let bias = (self.q[hi] - self.q[lo] - 2.0 * cross + count * norm).max(0.0);
        // samples of the model's own cluster inside lo..hi
        let own = (hi.min(model.hi)).saturating_sub(lo.max(model.lo)) as f64;
        let n_l = (model.hi - model.lo) as f64;
        bias + self.noise_energy * (count * (1.0 + 1.0 / n_l) - 2.0 * own / n_l)
    }
}

/// Closed-form `F_k(tau_k; tau_{-k})` for `k` in `0..=K`.
pub fn cost_fk_proxy(
    mus: &[DVector<f64>],
    truth: &Segmentation,
    noise_var: f64,
    k: usize,
    tau: &Segmentation,
    win: &WindowParams,
) -> Result<f64> {
    if tau.n() != truth.n() {
        return Err(Error::DimensionMismatch { expected: truth.n(), got: tau.n() });
    }
    if k > tau.k() {
        return Err(Error::InvalidSegmentation(format!("sub-cost index {k} outside 0..={}", tau.k())));
    }
    let cost = WindowedCost::new(ProxyModels::new(mus, truth, noise_var)?, *win)?;
    let kk = tau.k();
    Ok(match k {
        0 => cost.head(tau.tau(1)),
        k if k == kk => cost.tail(kk - 1, tau.tau(kk - 1)),
        k => cost.pair(k - 1, tau.tau(k - 1), tau.tau(k), tau.tau(k + 1)),
    })
}

/// Monte Carlo estimate of `F_k`: mean and standard error of `f_k` over `draws`
/// fresh noise realizations around the noiseless means.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo_fk<R: Rng>(
    mus: &[DVector<f64>],
    truth: &Segmentation,
    noise_var: f64,
    k: usize,
    tau: &Segmentation,
    win: &WindowParams,
    draws: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if draws < 2 {
        return Err(Error::InvalidInput("Monte Carlo needs at least two draws".into()));
    }
    let d = mus.first().map_or(0, |m| m.len());
    let labels = truth.labels();
    let s = noise_var.sqrt();
    let mut values = Vec::with_capacity(draws);
    for _ in 0..draws {
        let data: Vec<f64> = labels
            .iter()
            .flat_map(|&l| mus[l].iter().copied().collect::<Vec<_>>())
            .map(|m| m + s * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let seq = RssSequence::new(data, truth.n(), d)?;
        values.push(cost_fk_d0(&seq, k, tau, win)?);
    }
    let mean = values.iter().sum::<f64>() / draws as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (draws - 1) as f64;
    Ok((mean, (var / draws as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn means(rng: &mut ChaCha8Rng, k: usize, d: usize) -> Vec<DVector<f64>> {
        (0..k).map(|_| DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal))).collect()
    }

    #[test]
    fn zero_without_noise_at_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mus = means(&mut rng, 2, 3);
        let truth = Segmentation::new(vec![12], 30).unwrap();
        let f = cost_fk_proxy(&mus, &truth, 0.0, 1, &truth, &WindowParams::smooth(1e-3)).unwrap();
        assert!(f.abs() < 1e-12);
    }

    #[test]
    fn closed_form_agrees_with_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mus = means(&mut rng, 3, 4);
        let truth = Segmentation::new(vec![9, 17], 30).unwrap();
        let win = WindowParams::smooth(1.0);
        for (k, tau) in [(1, vec![6, 22]), (2, vec![6, 22]), (0, vec![6, 22]), (1, vec![13, 25])] {
            let tau = Segmentation::new(tau, 30).unwrap();
            let exact = cost_fk_proxy(&mus, &truth, 0.8, k, &tau, &win).unwrap();
            let (mc, se) = monte_carlo_fk(&mus, &truth, 0.8, k, &tau, &win, 4000, &mut rng).unwrap();
            assert!((exact - mc).abs() <= 4.0 * se, "k={k}: {exact} vs {mc} +- {se}");
        }
    }

    #[test]
    fn rectangle_noise_term_is_constant_in_tau() {
        // Under hard windows the noise contribution is D s^2 (n - 2) / N for any split.
        let mus = vec![DVector::from_vec(vec![0.0, 0.0]); 1];
        let truth = Segmentation::new(vec![], 20).unwrap();
        let win = WindowParams::rectangle();
        for t in 1..20 {
            let tau = Segmentation::new(vec![t], 20).unwrap();
            let f = cost_fk_proxy(&mus, &truth, 1.5, 1, &tau, &win).unwrap();
            assert!((f - 2.0 * 1.5 * 18.0 / 20.0).abs() < 1e-12);
        }
    }
}
