//! Named property checks for the segmentation cost and the route search.
//!
//! Each check draws a batch of seeded instances, evaluates one property per
//! instance, and aggregates a verdict. Checks are registered by name so the CLI
//! can run any of them with parameter overrides.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{
    brute_force_match, euclidean, matching_error, random_region_graph, viterbi_match, RegionGraph, DEFAULT_MAX_REGIONS,
};
use crate::model::{Point, RssSequence, Segmentation, WindowParams};
use crate::registry::Registry;
use crate::segment::{
    cost_tol, optimal_split, run_alg1, MeanShiftModels, ProxyModels, SegmentCost, SegmenterConfig, WindowedCost,
};
use crate::subspace::{weighted_mean, DimPolicy};
use crate::synth::{gen_layout, generate, separated_means, DimSpec, SynthSpec};

/// Optional overrides; every check fills the gaps with its own defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryParams {
    pub seeds: Option<usize>,
    /// First seed; instance `i` uses `seed + i`.
    pub seed: Option<u64>,
    pub beta: Option<f64>,
    pub samples: Option<usize>,
    pub sensors: Option<usize>,
    pub regions: Option<usize>,
    pub separation: Option<f64>,
    pub noise_var: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryRow {
    pub case: String,
    pub seed: u64,
    pub value: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub check: String,
    /// Resolved parameters.
    pub params: BTreeMap<String, f64>,
    pub rows: Vec<TheoryRow>,
    /// Aggregate statistics behind the verdict.
    pub summary: BTreeMap<String, f64>,
    pub pass: bool,
}

impl TheoryReport {
    fn new(check: &str) -> Self {
        Self { check: check.into(), params: BTreeMap::new(), rows: Vec::new(), summary: BTreeMap::new(), pass: true }
    }

    fn param(&mut self, name: &str, v: impl Into<f64>) {
        self.params.insert(name.into(), v.into());
    }

    fn stat(&mut self, name: &str, v: f64) {
        self.summary.insert(name.into(), v);
    }

    fn finish_rows(mut self) -> Self {
        self.pass &= self.rows.iter().all(|r| r.pass);
        self.stat("failures", self.rows.iter().filter(|r| !r.pass).count() as f64);
        self
    }
}

/// A named property check.
pub trait TheoryCheck: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn run(&self, params: &TheoryParams) -> Result<TheoryReport>;
}

/// Parameters after defaulting.
struct Resolved {
    seeds: usize,
    seed: u64,
    beta: f64,
    n: usize,
    d: usize,
    k: usize,
    ratio: f64,
    noise: f64,
}

impl Resolved {
    fn new(p: &TheoryParams, n: usize, d: usize, k: usize, ratio: f64, beta: f64, seeds: usize) -> Result<Self> {
        let r = Self {
            seeds: p.seeds.unwrap_or(seeds),
            seed: p.seed.unwrap_or(0),
            beta: p.beta.unwrap_or(beta),
            n: p.samples.unwrap_or(n),
            d: p.sensors.unwrap_or(d),
            k: p.regions.unwrap_or(k),
            ratio: p.separation.unwrap_or(ratio),
            noise: p.noise_var.unwrap_or(1.0),
        };
        if r.seeds == 0 {
            return Err(Error::InvalidInput("need at least one seed".into()));
        }
        WindowParams::smooth(r.beta).validate()?;
        if !(r.noise > 0.0 && r.ratio > 0.0) {
            return Err(Error::InvalidInput("noise_var and separation must be positive".into()));
        }
        Ok(r)
    }

    fn record(&self, report: &mut TheoryReport) {
        report.param("seeds", self.seeds as f64);
        report.param("seed", self.seed as f64);
        report.param("beta", self.beta);
        report.param("samples", self.n as f64);
        report.param("sensors", self.d as f64);
        report.param("regions", self.k as f64);
        report.param("separation", self.ratio);
        report.param("noise_var", self.noise);
    }

    fn win(&self) -> WindowParams {
        WindowParams::smooth(self.beta)
    }

    fn seeds(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|i| self.seed + i).collect()
    }

    fn synth(&self, seed: u64) -> SynthSpec {
        SynthSpec {
            regions: self.k,
            sensors: self.d,
            samples: self.n,
            dims: DimSpec::All(0),
            separation: self.ratio,
            noise_var: self.noise,
            seed,
            ..SynthSpec::default()
        }
    }

    /// Proxy cost for `k` separated region means with the given true boundaries.
    fn proxy(&self, seed: u64, truth: &Segmentation) -> Result<WindowedCost<ProxyModels>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mus = separated_means(&mut rng, truth.k(), self.d, self.ratio * self.noise)?;
        WindowedCost::new(ProxyModels::new(&mus, truth, self.noise)?, self.win())
    }
}

fn collect_rows<F>(seeds: Vec<u64>, f: F) -> Result<Vec<TheoryRow>>
where
    F: Fn(u64) -> Result<Vec<TheoryRow>> + Send + Sync,
{
    let nested = seeds.into_par_iter().map(f).collect::<Result<Vec<_>>>()?;
    Ok(nested.into_iter().flatten().collect())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// `F(tau) - F(tau - 1)` for `tau` in `lo + 2 ..= hi - 1`, i.e. between splits that
/// leave both clusters nonempty.
fn differences(cost: &dyn SegmentCost, lo: usize, hi: usize) -> Vec<(usize, f64)> {
    ((lo + 2)..hi).map(|t| (t, cost.pair(0, lo, t, hi) - cost.pair(0, lo, t - 1, hi))).collect()
}

/// Smoothed objective with windowed means equals half the sub-cost sum in the hard
/// limit.
pub struct Hardening;

impl TheoryCheck for Hardening {
    fn name(&self) -> &'static str {
        "hardening"
    }

    fn description(&self) -> &'static str {
        "|direct smoothed objective - half the sub-cost sum| <= 1e-6 for random boundaries at small beta"
    }

    fn run(&self, params: &TheoryParams) -> Result<TheoryReport> {
        let r = Resolved::new(params, 200, 10, 4, 2.5, 1e-4, 10)?;
        let mut report = TheoryReport::new(self.name());
        r.record(&mut report);
        let draws = 100;
        report.param("boundary_draws", draws as f64);
        let tol = 1e-6;
        let win = r.win();
        report.rows = collect_rows(r.seeds(), |seed| {
            let b = generate(&r.synth(seed))?;
            let seq = &b.sequence;
            let cost = WindowedCost::new(MeanShiftModels::new(seq), win)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
            let mut worst: f64 = 0.0;
            for _ in 0..draws {
                let mut t: Vec<usize> = sample(&mut rng, r.n - 1, r.k - 1).into_iter().map(|v| v + 1).collect();
                t.sort_unstable();
                let tau = Segmentation::new(t.clone(), r.n)?;
                let direct = smoothed_objective(seq, &tau, &win)?;
                worst = worst.max((direct - 0.5 * cost.total(&t)).abs());
            }
            Ok(vec![TheoryRow { case: "max deviation".into(), seed, value: worst, pass: worst <= tol }])
        })?;
        let max = report.rows.iter().map(|r| r.value).fold(0.0, f64::max);
        report.stat("max_deviation", max);
        Ok(report.finish_rows())
    }
}

/// `(1/N) sum_k sum_i z_i(tau_{k-1}, tau_k) |x_i - mu_k|^2` with windowed means.
pub fn smoothed_objective(seq: &RssSequence, tau: &Segmentation, win: &WindowParams) -> Result<f64> {
    let mut sum = 0.0;
    for k in 1..=tau.k() {
        let mu = weighted_mean(seq, k, tau, win)?;
        let w = win.weights(seq.len(), tau.tau(k - 1), tau.tau(k));
        for (i, wi) in w.iter().enumerate() {
            let r: f64 = seq.row(i).iter().zip(mu.iter()).map(|(x, m)| (x - m) * (x - m)).sum();
            sum += wi * r;
        }
    }
    Ok(sum / seq.len() as f64)
}

/// The empirical split converges to the proxy's minimizer as N grows.
pub struct Consistency;

pub const CONSISTENCY_SIZES: [usize; 3] = [250, 1000, 4000];

impl TheoryCheck for Consistency {
    fn name(&self) -> &'static str {
        "consistency"
    }

    fn description(&self) -> &'static str {
        "median |gamma_hat - gamma*| shrinks by >= 1.5x per quadrupling of N (250, 1000, 4000)"
    }

    fn run(&self, params: &TheoryParams) -> Result<TheoryReport> {
        // A low per-sample separation keeps the boundary error visible at every N.
        let r = Resolved::new(params, 0, 40, 2, 0.25, 1e-3, 50)?;
        let mut report = TheoryReport::new(self.name());
        r.record(&mut report);
        report.params.remove("samples");
        report.params.remove("regions");
        let gamma = 0.4;
        report.param("gamma_true", gamma);
        let factor = 1.5;
        report.param("min_factor", factor);
        let win = r.win();
        let mut medians = Vec::new();
        for &n in &CONSISTENCY_SIZES {
            let truth = Segmentation::new(vec![(gamma * n as f64).round() as usize], n)?;
            let rows = collect_rows(r.seeds(), |seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mus = separated_means(&mut rng, 2, r.d, r.ratio * r.noise)?;
                let proxy = WindowedCost::new(ProxyModels::new(&mus, &truth, r.noise)?, win)?;
                let (t_star, _) = optimal_split(&proxy, 0, 0, n, 1)?;
                let s = r.noise.sqrt();
                let data: Vec<f64> = truth
                    .labels()
                    .iter()
                    .flat_map(|&l| mus[l].iter().copied().collect::<Vec<_>>())
                    .map(|m| m + s * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let seq = RssSequence::new(data, n, r.d)?;
                let cost = WindowedCost::new(MeanShiftModels::new(&seq), win)?;
                let (t_hat, _) = optimal_split(&cost, 0, 0, n, 1)?;
                Ok(vec![TheoryRow {
                    case: format!("N={n}"),
                    seed,
                    value: (t_hat as f64 - t_star as f64).abs() / n as f64,
                    pass: true,
                }])
            })?;
            let med = median(rows.iter().map(|r| r.value).collect());
            report.stat(&format!("median_N{n}"), med);
            medians.push(med);
            report.rows.extend(rows);
        }
        for w in medians.windows(2) {
            report.pass &= w[0] > w[1] && w[0] >= factor * w[1];
        }
        Ok(report.finish_rows())
    }
}

/// One true boundary inside the merged interval: the proxy difference sequence
/// changes sign exactly once, at the boundary.
pub struct Unimodality;

impl TheoryCheck for Unimodality {
    fn name(&self) -> &'static str {
        "unimodality"
    }

    fn description(&self) -> &'static str {
        "proxy F(tau) - F(tau-1) < 0 up to the true boundary and > 0 after it"
    }

    fn run(&self, params: &TheoryParams) -> Result<TheoryReport> {
        let r = Resolved::new(params, 2000, 40, 2, 2.5, 1e-3, 50)?;
        let mut report = TheoryReport::new(self.name());
        r.record(&mut report);
        report.params.remove("regions");
        report.rows = collect_rows(r.seeds(), |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1 << 32));
            let t = rng.random_range(r.n / 5..=4 * r.n / 5);
            let truth = Segmentation::new(vec![t], r.n)?;
            let proxy = r.proxy(seed, &truth)?;
            let diffs = differences(&proxy, 0, r.n);
            let violations = diffs.iter().filter(|&&(tau, d)| if tau <= t { d >= 0.0 } else { d <= 0.0 }).count();
            let changes = diffs.windows(2).filter(|w| (w[0].1 < 0.0) != (w[1].1 < 0.0)).count();
            Ok(vec![TheoryRow {
                case: format!("t={t} sign changes={changes}"),
                seed,
                value: violations as f64,
                pass: violations == 0 && changes == 1,
            }])
        })?;
        Ok(report.finish_rows())
    }
}

/// No true boundary inside the merged interval: the proxy is nearly flat compared
/// with the same interval straddling a boundary.
pub struct Flatness;

impl TheoryCheck for Flatness {
    fn name(&self) -> &'static str {
        "flatness"
    }

    fn description(&self) -> &'static str {
        "max |dF| without a boundary <= 1e-3 x max |dF| with one boundary on matched geometry"
    }

    fn run(&self, params: &TheoryParams) -> Result<TheoryReport> {
        let r = Resolved::new(params, 2000, 40, 2, 2.5, 1e-4, 50)?;
        let mut report = TheoryReport::new(self.name());
        r.record(&mut report);
        report.params.remove("regions");
        let limit = 1e-3;
        report.param("max_ratio", limit);
        report.rows = collect_rows(r.seeds(), |seed| {
            let half = r.n / 2;
            let truth = Segmentation::new(vec![half], r.n)?;
            let proxy = r.proxy(seed, &truth)?;
            let max_abs = |v: Vec<(usize, f64)>| v.into_iter().map(|(_, d)| d.abs()).fold(0.0, f64::max);
            // same length, same means: (0, N/2) holds no boundary, (N/4, 3N/4) holds one
            let flat = max_abs(differences(&proxy, 0, half));
            let step = max_abs(differences(&proxy, half / 2, half / 2 + half));
            let ratio = if step > 0.0 { flat / step } else { f64::INFINITY };
            Ok(vec![TheoryRow { case: "flat/step".into(), seed, value: ratio, pass: ratio <= limit }])
        })?;
        Ok(report.finish_rows())
    }
}

/// Several true boundaries inside the merged interval: the proxy decreases before
/// the first, increases after the last, and its minimizer lies between them.
pub struct Monotonicity;

impl TheoryCheck for Monotonicity {
    fn name(&self) -> &'static str {
        "monotonicity"
    }

    fn description(&self) -> &'static str {
        "with two boundaries inside, dF < 0 before the first, dF > 0 after the last, argmin in between"
    }

    fn run(&self, params: &TheoryParams) -> Result<TheoryReport> {
        let r = Resolved::new(params, 600, 40, 3, 2.5, 1e-3, 50)?;
        let mut report = TheoryReport::new(self.name());
        r.record(&mut report);
        report.rows = collect_rows(r.seeds(), |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2 << 32));
            let min = r.n / (2 * r.k);
            let mut t: Vec<usize> = sample(&mut rng, r.n - r.k * min + r.k - 1, r.k - 1).into_iter().collect();
            t.sort_unstable();
            let t: Vec<usize> = t.iter().enumerate().map(|(j, &w)| (j + 1) * min + w - j).collect();
            let truth = Segmentation::new(t.clone(), r.n)?;
            let proxy = r.proxy(seed, &truth)?;
            let (first, last) = (t[0], t[t.len() - 1]);
            let diffs = differences(&proxy, 0, r.n);
            let violations =
                diffs.iter().filter(|&&(tau, d)| (tau <= first && d >= 0.0) || (tau > last && d <= 0.0)).count();
            let (argmin, _) = optimal_split(&proxy, 0, 0, r.n, 1)?;
            let inside = (first..=last).contains(&argmin);
            Ok(vec![TheoryRow {
                case: format!("t={t:?} argmin={argmin}"),
                seed,
                value: violations as f64,
                pass: violations == 0 && inside,
            }])
        })?;
        Ok(report.finish_rows())
    }
}

/// Re-splitting an interval that straddles a true boundary reduces the cost more
/// than re-splitting one inside a single region.
pub struct CostReduction;

fn split_reduction(cost: &dyn SegmentCost, lo: usize, hi: usize) -> Result<f64> {
    let (_, best) = optimal_split(cost, 0, lo, hi, 1)?;
    Ok(cost.pair(0, lo, lo, hi) - best)
}

impl TheoryCheck for CostReduction {
    fn name(&self) -> &'static str {
        "cost-reduction"
    }

    fn description(&self) -> &'static str {
        "the split reduction of an interval with a boundary exceeds that of an interval without one"
    }

    fn run(&self, params: &TheoryParams) -> Result<TheoryReport> {
        let r = Resolved::new(params, 600, 40, 2, 2.5, 1e-3, 50)?;
        let mut report = TheoryReport::new(self.name());
        r.record(&mut report);
        report.params.remove("regions");
        report.rows = collect_rows(r.seeds(), |seed| {
            let t = r.n / 3;
            let truth = Segmentation::new(vec![t], r.n)?;
            let proxy = r.proxy(seed, &truth)?;
            let with = split_reduction(&proxy, 0, 2 * t)?;
            let without = split_reduction(&proxy, 2 * t, r.n)?;
            Ok(vec![TheoryRow {
                case: format!("reduction {with:.6e} vs {without:.6e}"),
                seed,
                value: with - without,
                pass: with > without,
            }])
        })?;
        Ok(report.finish_rows())
    }
}

/// Every segmentation with segments of at least `min_len` samples.
fn for_each_segmentation(n: usize, k: usize, min_len: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(tau: &mut Vec<usize>, n: usize, k: usize, m: usize, f: &mut dyn FnMut(&[usize])) {
        let placed = tau.len();
        if placed == k - 1 {
            if n - tau.last().copied().unwrap_or(0) >= m {
                f(tau);
            }
            return;
        }
        let start = tau.last().copied().unwrap_or(0) + m;
        let remaining = k - 1 - placed;
        let end = n.saturating_sub(remaining * m);
        for t in start..=end {
            tau.push(t);
            rec(tau, n, k, m, f);
            tau.pop();
        }
    }
    rec(&mut Vec::with_capacity(k), n, k, min_len, f);
}

/// Exhaustive minimum of the total cost over all admissible segmentations.
pub fn exhaustive_minimum(cost: &dyn SegmentCost, k: usize, min_len: usize) -> (Vec<usize>, f64) {
    let mut best = (Vec::new(), f64::INFINITY);
    for_each_segmentation(cost.n(), k, min_len, &mut |tau| {
        let c = cost.total(tau);
        if c < best.1 {
            best = (tau.to_vec(), c);
        }
    });
    best
}

/// Merge-and-split reaches the exhaustive minimum on small noisy instances.
pub struct Optimality;

impl TheoryCheck for Optimality {
    fn name(&self) -> &'static str {
        "optimality"
    }

    fn description(&self) -> &'static str {
        "merge-and-split final cost equals the exhaustive minimum for N <= 40, K <= 3"
    }

    fn run(&self, params: &TheoryParams) -> Result<TheoryReport> {
        let r = Resolved::new(params, 40, 5, 3, 2.5, 1e-3, 50)?;
        if r.n > 60 {
            return Err(Error::TooLarge(format!("exhaustive search is capped at N = 60, got {}", r.n)));
        }
        let mut report = TheoryReport::new(self.name());
        r.record(&mut report);
        let win = r.win();
        report.rows = collect_rows(r.seeds(), |seed| {
            (2..=r.k)
                .map(|k| {
                    let spec = SynthSpec { regions: k, ..r.synth(seed) };
                    let b = generate(&spec)?;
                    let config = SegmenterConfig::new(k).with_window(win).with_dims(DimPolicy::Fixed { dim: 0 });
                    let (tau, _) = run_alg1(&b.sequence, &config)?;
                    let cost = WindowedCost::new(MeanShiftModels::new(&b.sequence), win)?;
                    let found = cost.total(tau.boundaries());
                    let (_, best) = exhaustive_minimum(&cost, k, config.min_segment_len());
                    let gap = found - best;
                    Ok(TheoryRow { case: format!("K={k}"), seed, value: gap, pass: gap <= cost_tol(best) })
                })
                .collect()
        })?;
        Ok(report.finish_rows())
    }
}

/// On noiseless flat data with distinct means, merge-and-split recovers the true
/// boundaries exactly.
pub struct ExactRecovery;

impl TheoryCheck for ExactRecovery {
    fn name(&self) -> &'static str {
        "exact-recovery"
    }

    fn description(&self) -> &'static str {
        "noiseless flat data, K in 2..=6, N in 60..=600: merge-and-split returns the true boundaries"
    }

    fn run(&self, params: &TheoryParams) -> Result<TheoryReport> {
        let r = Resolved::new(params, 0, 8, 0, 2.5, 1e-3, 100)?;
        let mut report = TheoryReport::new(self.name());
        r.record(&mut report);
        report.params.remove("samples");
        report.params.remove("regions");
        report.params.remove("noise_var");
        let win = r.win();
        report.rows = collect_rows(r.seeds(), |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(3 << 32));
            let k = params.regions.unwrap_or_else(|| rng.random_range(2..=6));
            let n = params.samples.unwrap_or_else(|| rng.random_range(60..=600));
            let min = n / (2 * k);
            let mut picks: Vec<usize> = sample(&mut rng, n - k * min + k - 1, k - 1).into_iter().collect();
            picks.sort_unstable();
            let t: Vec<usize> = picks.iter().enumerate().map(|(j, &w)| (j + 1) * min + w - j).collect();
            let fractions: Vec<f64> =
                Segmentation::new(t.clone(), n)?.segment_lengths().iter().map(|&l| l as f64 / n as f64).collect();
            let spec =
                SynthSpec { regions: k, samples: n, noise_var: 0.0, fractions: Some(fractions), ..r.synth(seed) };
            let b = generate(&spec)?;
            let config = SegmenterConfig::new(k).with_window(win).with_dims(DimPolicy::Fixed { dim: 0 });
            let (tau, _) = run_alg1(&b.sequence, &config)?;
            let off: usize = tau.boundaries().iter().zip(b.truth.boundaries()).map(|(a, b)| a.abs_diff(*b)).sum();
            Ok(vec![TheoryRow { case: format!("K={k} N={n}"), seed, value: off as f64, pass: off == 0 }])
        })?;
        Ok(report.finish_rows())
    }
}

fn noisy_centroids(centers: &[Point], sd: f64, rng: &mut impl Rng) -> Vec<Point> {
    centers
        .iter()
        .map(|c| [c[0] + sd * rng.sample::<f64, _>(StandardNormal), c[1] + sd * rng.sample::<f64, _>(StandardNormal)])
        .collect()
}

/// Dynamic-programming route search agrees with exhaustive enumeration.
pub struct RouteOracle;

impl TheoryCheck for RouteOracle {
    fn name(&self) -> &'static str {
        "route-oracle"
    }

    fn description(&self) -> &'static str {
        "route search cost equals brute-force cost for K <= 7 on random graphs"
    }

    fn run(&self, params: &TheoryParams) -> Result<TheoryReport> {
        let r = Resolved::new(params, 0, 0, 7, 1.0, 1.0, 100)?;
        let mut report = TheoryReport::new(self.name());
        report.param("seeds", r.seeds as f64);
        report.param("seed", r.seed as f64);
        report.param("max_regions", r.k as f64);
        let sd = 3.0;
        report.param("centroid_sd", sd);
        report.rows = collect_rows(r.seeds(), |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(4 << 32));
            let k = rng.random_range(3..=r.k.max(3));
            let spec = SynthSpec { regions: k, sensors: 1, seed, ..SynthSpec::default() };
            let (_, centers) = gen_layout(&spec)?;
            // The collection path plus every other pair with a per-instance density.
            let density: f64 = rng.random();
            let mut edges: Vec<(usize, usize)> = (1..k).map(|j| (j - 1, j)).collect();
            for a in 0..k {
                for b in a + 2..k {
                    if rng.random::<f64>() < density {
                        edges.push((a, b));
                    }
                }
            }
            let graph = RegionGraph::new(centers.clone(), edges)?;
            let centroids = noisy_centroids(&centers, sd, &mut rng);
            let a = viterbi_match(&centroids, &graph, &euclidean, DEFAULT_MAX_REGIONS)?;
            let b = brute_force_match(&centroids, &graph, &euclidean)?;
            Ok(vec![TheoryRow {
                case: format!("K={k} edges={}", graph.edge_count()),
                seed,
                value: (a.cost - b.cost).abs(),
                pass: a.cost == b.cost && a.pi == b.pi,
            }])
        })?;
        Ok(report.finish_rows())
    }
}

/// Sparser region graphs give fewer wrong matches at fixed centroid noise.
pub struct EdgeTrend;

impl TheoryCheck for EdgeTrend {
    fn name(&self) -> &'static str {
        "edge-trend"
    }

    fn description(&self) -> &'static str {
        "mean matching error with 18 edges <= mean matching error with 27 edges (10 regions)"
    }

    fn run(&self, params: &TheoryParams) -> Result<TheoryReport> {
        let r = Resolved::new(params, 0, 0, 10, 1.0, 1.0, 200)?;
        let mut report = TheoryReport::new(self.name());
        report.param("seeds", r.seeds as f64);
        report.param("seed", r.seed as f64);
        report.param("regions", r.k as f64);
        let sd = 3.0;
        report.param("centroid_sd", sd);
        let targets = [18usize, 27];
        let mut means = Vec::new();
        for target in targets {
            let rows = collect_rows(r.seeds(), |seed| {
                let spec = SynthSpec { regions: r.k, sensors: 1, seed, ..SynthSpec::default() };
                let (_, centers) = gen_layout(&spec)?;
                let graph = random_region_graph(&centers, target, seed)?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(5 << 32));
                let centroids = noisy_centroids(&centers, sd, &mut rng);
                let m = viterbi_match(&centroids, &graph, &euclidean, DEFAULT_MAX_REGIONS)?;
                let truth: Vec<usize> = (0..r.k).collect();
                Ok(vec![TheoryRow {
                    case: format!("edges={target}"),
                    seed,
                    value: matching_error(&m.pi, &truth)?,
                    pass: true,
                }])
            })?;
            let mean = rows.iter().map(|r| r.value).sum::<f64>() / rows.len() as f64;
            report.stat(&format!("mean_error_{target}"), mean);
            means.push(mean);
            report.rows.extend(rows);
        }
        report.pass = means[0] <= means[1];
        Ok(report.finish_rows())
    }
}

pub fn theory_checks() -> Registry<dyn TheoryCheck> {
    let mut r: Registry<dyn TheoryCheck> = Registry::new("theory check");
    r.register("hardening", Box::new(Hardening));
    r.register("consistency", Box::new(Consistency));
    r.register("unimodality", Box::new(Unimodality));
    r.register("flatness", Box::new(Flatness));
    r.register("monotonicity", Box::new(Monotonicity));
    r.register("cost-reduction", Box::new(CostReduction));
    r.register("optimality", Box::new(Optimality));
    r.register("exact-recovery", Box::new(ExactRecovery));
    r.register("route-oracle", Box::new(RouteOracle));
    r.register("edge-trend", Box::new(EdgeTrend));
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(seeds: usize) -> TheoryParams {
        TheoryParams { seeds: Some(seeds), ..TheoryParams::default() }
    }

    #[test]
    fn enumeration_counts_compositions() {
        // segmentations of 10 into 3 parts of length >= 2: C(10 - 6 + 2, 2) = 15
        let mut count = 0;
        for_each_segmentation(10, 3, 2, &mut |t| {
            assert!(t[0] >= 2 && t[1] - t[0] >= 2 && 10 - t[1] >= 2);
            count += 1;
        });
        assert_eq!(count, 15);
        let mut count = 0;
        for_each_segmentation(5, 2, 1, &mut |_| count += 1);
        assert_eq!(count, 4);
    }

    #[test]
    fn exhaustive_minimum_on_steps() {
        let seq =
            RssSequence::from_rows(&[0.0, 0.0, 0.0, 10.0, 10.0, 10.0, 20.0, 20.0, 20.0].map(|v| vec![v])).unwrap();
        let cost = WindowedCost::new(MeanShiftModels::new(&seq), WindowParams::smooth(1e-3)).unwrap();
        let (tau, best) = exhaustive_minimum(&cost, 3, 1);
        assert_eq!(tau, vec![3, 6]);
        assert!(best.abs() < 1e-9);
    }

    #[test]
    fn smoothed_objective_matches_a_hand_sum() {
        let seq = RssSequence::from_rows(&[vec![0.0], vec![2.0], vec![10.0], vec![14.0]]).unwrap();
        let tau = Segmentation::new(vec![2], 4).unwrap();
        let v = smoothed_objective(&seq, &tau, &WindowParams::rectangle()).unwrap();
        assert!((v - (1.0 + 1.0 + 4.0 + 4.0) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn registry_lists_every_check() {
        let r = theory_checks();
        assert_eq!(r.names().len(), 10);
        assert!(r.get("unimodality").is_ok());
        assert!(r.get("nope").is_err());
    }

    #[test]
    fn small_runs_pass() {
        let reg = theory_checks();
        for name in
            ["hardening", "unimodality", "flatness", "monotonicity", "cost-reduction", "exact-recovery", "route-oracle"]
        {
            let report = reg.get(name).unwrap().run(&quick(3)).unwrap();
            assert!(report.pass, "{name}: {report:?}");
            assert_eq!(report.rows.len(), 3, "{name}");
        }
        let opt = reg.get("optimality").unwrap().run(&quick(2)).unwrap();
        assert!(opt.pass, "{opt:?}");
    }

    #[test]
    fn reports_are_deterministic() {
        let c = Unimodality;
        assert_eq!(c.run(&quick(4)).unwrap(), c.run(&quick(4)).unwrap());
    }

    #[test]
    fn bad_params_are_rejected() {
        let p = TheoryParams { beta: Some(-1.0), ..quick(1) };
        assert!(Hardening.run(&p).is_err());
        assert!(Hardening.run(&quick(0)).is_err());
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn proxy_means_are_separated() {
        let r = Resolved::new(&quick(1), 100, 6, 3, 2.5, 1e-3, 1).unwrap();
        let truth = Segmentation::new(vec![30, 60], 100).unwrap();
        let p = r.proxy(0, &truth).unwrap();
        let (best, _) = exhaustive_minimum(&p, 3, 1);
        assert_eq!(best, vec![30, 60]);
    }
}
