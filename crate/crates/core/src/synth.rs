//! Seeded synthetic datasets with known ground truth.
//!
//! Samples follow the affine-subspace model `x = U theta + mu + eps` per region, laid
//! out as consecutive segments in collection order. Every random draw comes from one
//! of several ChaCha streams derived from the spec seed, one per purpose, so changing
//! the query count never perturbs the training sequence and so on.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{random_region_graph, RegionGraph};
use crate::model::{ModelParams, Point, RssSequence, Segmentation, SensorLayout, SubspaceFeature};
use crate::subspace::NOISE_FLOOR;

const STREAM_MODEL: u64 = 1;
const STREAM_SEQUENCE: u64 = 2;
const STREAM_LAYOUT: u64 = 3;
const STREAM_GRAPH: u64 = 4;
const STREAM_QUERIES: u64 = 5;

/// Per-region subspace dimensions: one value for all regions or one per region.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DimSpec {
    All(usize),
    PerRegion(Vec<usize>),
}

impl Default for DimSpec {
    fn default() -> Self {
        DimSpec::All(0)
    }
}

impl DimSpec {
    pub fn resolve(&self, k: usize) -> Result<Vec<usize>> {
        match self {
            DimSpec::All(d) => Ok(vec![*d; k]),
            DimSpec::PerRegion(v) if v.len() == k => Ok(v.clone()),
            DimSpec::PerRegion(v) => Err(Error::DimensionMismatch { expected: k, got: v.len() }),
        }
    }
}

/// How region means are produced.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeanModel {
    /// Gaussian means rescaled to hit the separation target exactly.
    #[default]
    Random,
    /// Log-distance path loss from each region center to each sensor, plus Gaussian
    /// shadowing. The reference power and exponent are arbitrary harness constants.
    PathLoss {
        #[serde(default = "default_ref_power")]
        ref_power: f64,
        #[serde(default = "default_exponent")]
        exponent: f64,
        #[serde(default = "default_shadowing")]
        shadowing: f64,
    },
}

fn default_ref_power() -> f64 {
    -40.0
}
fn default_exponent() -> f64 {
    3.0
}
fn default_shadowing() -> f64 {
    2.0
}

fn default_regions() -> usize {
    10
}
fn default_sensors() -> usize {
    21
}
fn default_samples() -> usize {
    2000
}
fn default_separation() -> f64 {
    2.5
}
fn default_noise_var() -> f64 {
    1.0
}
fn default_subspace_var() -> f64 {
    4.0
}
fn default_mean_scale() -> f64 {
    1.0
}
fn default_area() -> [f64; 2] {
    [30.0, 16.0]
}

/// Everything needed to regenerate a dataset bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    /// Region count K.
    pub regions: usize,
    /// Sensor count D.
    pub sensors: usize,
    /// Sample count N.
    pub samples: usize,
    #[serde(default)]
    pub dims: DimSpec,
    /// Target minimum `|mu_i - mu_j|^2 / s^2` for random means.
    #[serde(default = "default_separation")]
    pub separation: f64,
    /// Isotropic noise variance `s^2`.
    #[serde(default = "default_noise_var")]
    pub noise_var: f64,
    /// Mean subspace coordinate variance; each region draws its own within +-50%.
    #[serde(default = "default_subspace_var")]
    pub subspace_var: f64,
    /// Scale used in place of `s` for the separation target when `noise_var = 0`.
    #[serde(default = "default_mean_scale")]
    pub mean_scale: f64,
    #[serde(default)]
    pub mean_model: MeanModel,
    /// Segment length fractions; equal segments when absent.
    #[serde(default)]
    pub fractions: Option<Vec<f64>>,
    /// Samples of linear mean cross-fade centered on every true boundary.
    #[serde(default)]
    pub transition_len: usize,
    /// Width and height of the area in meters.
    #[serde(default = "default_area")]
    pub area: [f64; 2],
    /// Expected edge count of the region graph.
    #[serde(default)]
    pub target_edges: Option<usize>,
    /// Held-out samples drawn per region for localization tests.
    #[serde(default)]
    pub queries_per_region: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            regions: default_regions(),
            sensors: default_sensors(),
            samples: default_samples(),
            dims: DimSpec::default(),
            separation: default_separation(),
            noise_var: default_noise_var(),
            subspace_var: default_subspace_var(),
            mean_scale: default_mean_scale(),
            mean_model: MeanModel::default(),
            fractions: None,
            transition_len: 0,
            area: default_area(),
            target_edges: None,
            queries_per_region: 0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.regions == 0 || self.sensors == 0 {
            return bad("regions and sensors must be at least 1".into());
        }
        if self.samples < self.regions {
            return bad(format!("samples ({}) must be at least regions ({})", self.samples, self.regions));
        }
        if !(self.separation > 0.0 && self.separation.is_finite()) {
            return bad(format!("separation must be positive, got {}", self.separation));
        }
        if !(self.noise_var >= 0.0 && self.noise_var.is_finite()) {
            return bad(format!("noise_var must be >= 0, got {}", self.noise_var));
        }
        if !(self.subspace_var >= 0.0 && self.subspace_var.is_finite()) {
            return bad(format!("subspace_var must be >= 0, got {}", self.subspace_var));
        }
        if !(self.mean_scale > 0.0 && self.mean_scale.is_finite()) {
            return bad(format!("mean_scale must be positive, got {}", self.mean_scale));
        }
        if !(self.area[0] > 0.0 && self.area[1] > 0.0 && self.area.iter().all(|v| v.is_finite())) {
            return bad(format!("area must be positive, got {:?}", self.area));
        }
        let dims = self.dims.resolve(self.regions)?;
        if let Some(&d) = dims.iter().find(|&&d| d >= self.sensors) {
            return Err(Error::InvalidDimension { dim: d, sensors: self.sensors });
        }
        if let Some(f) = &self.fractions {
            if f.len() != self.regions {
                return Err(Error::DimensionMismatch { expected: self.regions, got: f.len() });
            }
            if f.iter().any(|&v| !(v > 0.0 && v.is_finite())) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return bad(format!("fractions must be positive and sum to 1, got {f:?}"));
            }
        }
        Ok(())
    }

    /// The edge-count target actually used: `2 (K - 1)` capped at the pair count
    /// unless set explicitly.
    pub fn resolved_target_edges(&self) -> usize {
        let k = self.regions;
        self.target_edges.unwrap_or_else(|| (2 * k.saturating_sub(1)).min(k * k.saturating_sub(1) / 2))
    }

    /// True boundaries `t_k`.
    pub fn truth(&self) -> Result<Segmentation> {
        let (n, k) = (self.samples, self.regions);
        match &self.fractions {
            None => Segmentation::uniform(n, k),
            Some(f) => {
                let mut acc = 0.0;
                let bounds: Vec<usize> = f[..k - 1]
                    .iter()
                    .map(|v| {
                        acc += v;
                        (acc * n as f64).round() as usize
                    })
                    .collect();
                Segmentation::new(bounds, n)
            }
        }
    }
}

fn stream(seed: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose);
    rng
}

fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Orthonormal `D x d` basis from the QR factor of a Gaussian matrix.
fn random_basis(rng: &mut impl Rng, d_sensors: usize, dim: usize) -> DMatrix<f64> {
    if dim == 0 {
        return DMatrix::zeros(d_sensors, 0);
    }
    let q = gaussian_matrix(rng, d_sensors, dim).qr().q();
    q.columns(0, dim).into_owned()
}

/// Ground-truth generative model of one dataset. `noise_var` may be zero here even
/// though fitted features always carry a positive noise floor.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthModel {
    pub means: Vec<DVector<f64>>,
    pub bases: Vec<DMatrix<f64>>,
    pub sigma2: Vec<DVector<f64>>,
    pub noise_var: f64,
}

impl TruthModel {
    pub fn k(&self) -> usize {
        self.means.len()
    }

    /// The model as radio-map features (noise variance floored to stay invertible).
    pub fn params(&self) -> Result<ModelParams> {
        let features = (0..self.k())
            .map(|k| {
                SubspaceFeature::new(
                    self.means[k].clone(),
                    self.bases[k].clone(),
                    self.sigma2[k].clone(),
                    self.noise_var.max(NOISE_FLOOR),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        ModelParams::new(features)
    }

    /// Smallest pairwise `|mu_i - mu_j|^2`.
    pub fn min_mean_gap(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.k() {
            for j in i + 1..self.k() {
                best = best.min((&self.means[i] - &self.means[j]).norm_squared());
            }
        }
        best
    }

    fn draw(&self, k: usize, mean: &DVector<f64>, rng: &mut impl Rng) -> Vec<f64> {
        let s = self.noise_var.sqrt();
        let theta = DVector::from_fn(self.sigma2[k].len(), |j, _| {
            self.sigma2[k][j].sqrt() * rng.sample::<f64, _>(StandardNormal)
        });
        let signal = &self.bases[k] * theta;
        (0..mean.len()).map(|j| mean[j] + signal[j] + s * rng.sample::<f64, _>(StandardNormal)).collect()
    }
}

/// `k` Gaussian means in `d` dimensions rescaled so the smallest pairwise squared
/// distance is exactly `min_gap`.
pub fn separated_means(rng: &mut impl Rng, k: usize, d: usize, min_gap: f64) -> Result<Vec<DVector<f64>>> {
    let raw: Vec<DVector<f64>> = (0..k).map(|_| DVector::from_fn(d, |_, _| rng.sample(StandardNormal))).collect();
    if k < 2 {
        return Ok(raw);
    }
    let mut current = f64::INFINITY;
    for i in 0..k {
        for j in i + 1..k {
            current = current.min((&raw[i] - &raw[j]).norm_squared());
        }
    }
    if !(current > 0.0) {
        return Err(Error::InvalidInput("coincident region means".into()));
    }
    let scale = (min_gap / current).sqrt();
    Ok(raw.into_iter().map(|m| m * scale).collect())
}

fn check_independent(means: &[DVector<f64>]) -> Result<()> {
    let (k, d) = (means.len(), means[0].len());
    if k > d {
        return Err(Error::InvalidInput(format!("{k} region means cannot be linearly independent in {d} sensors")));
    }
    let m = DMatrix::from_fn(d, k, |i, j| means[j][i]);
    let sv = m.singular_values();
    let max = sv.max();
    if sv.iter().any(|&v| v <= 1e-9 * max.max(1.0)) {
        return Err(Error::InvalidInput("region means are linearly dependent".into()));
    }
    Ok(())
}

/// Draws the generative model. Path-loss means need the region centers and sensor
/// positions of the layout.
pub fn gen_model(spec: &SynthSpec, layout: &SensorLayout, centers: &[Point]) -> Result<TruthModel> {
    spec.validate()?;
    let (k, d) = (spec.regions, spec.sensors);
    let dims = spec.dims.resolve(k)?;
    let mut rng = stream(spec.seed, STREAM_MODEL);

    let bases: Vec<DMatrix<f64>> = dims.iter().map(|&dim| random_basis(&mut rng, d, dim)).collect();
    let sigma2: Vec<DVector<f64>> =
        dims.iter().map(|&dim| DVector::from_fn(dim, |_, _| spec.subspace_var * rng.random_range(0.5..1.5))).collect();

    let means = match &spec.mean_model {
        MeanModel::Random => {
            let unit = if spec.noise_var > 0.0 { spec.noise_var } else { spec.mean_scale * spec.mean_scale };
            separated_means(&mut rng, k, d, spec.separation * unit)?
        }
        MeanModel::PathLoss { ref_power, exponent, shadowing } => {
            if layout.len() != d || centers.len() != k {
                return Err(Error::DimensionMismatch { expected: d, got: layout.len() });
            }
            centers
                .iter()
                .map(|o| {
                    DVector::from_fn(d, |j, _| {
                        let p = layout.positions[j];
                        let dist = ((o[0] - p[0]).powi(2) + (o[1] - p[1]).powi(2)).sqrt().max(1.0);
                        ref_power - 10.0 * exponent * dist.log10() + shadowing * rng.sample::<f64, _>(StandardNormal)
                    })
                })
                .collect()
        }
    };
    check_independent(&means)?;
    Ok(TruthModel { means, bases, sigma2, noise_var: spec.noise_var })
}

/// Draws the collection-order sequence. Inside the optional transition windows the
/// mean fades linearly from one region to the next; labels stay with the true
/// boundary, i.e. the region nearer in time.
pub fn gen_sequence(model: &TruthModel, spec: &SynthSpec) -> Result<(RssSequence, Segmentation)> {
    spec.validate()?;
    let truth = spec.truth()?;
    let mut rng = stream(spec.seed, STREAM_SEQUENCE);
    let labels = truth.labels();
    let half = spec.transition_len / 2;
    let mut data = Vec::with_capacity(spec.samples * spec.sensors);
    for (i, &k) in labels.iter().enumerate() {
        let mut mean = model.means[k].clone();
        if spec.transition_len > 0 {
            // Boundary t sits between rows t-1 and t; the window covers rows
            // t-half .. t-half+len.
            for (j, &t) in truth.boundaries().iter().enumerate() {
                let start = t.saturating_sub(half);
                if i >= start && i < start + spec.transition_len {
                    let lambda = (i - start) as f64 + 0.5;
                    let lambda = lambda / spec.transition_len as f64;
                    mean = &model.means[j] * (1.0 - lambda) + &model.means[j + 1] * lambda;
                }
            }
        }
        data.extend(model.draw(k, &mean, &mut rng));
    }
    Ok((RssSequence::new(data, spec.samples, spec.sensors)?, truth))
}

/// Region centers on a jittered grid over the area, numbered in snake order so
/// consecutive regions are neighbors, and sensors uniform over the area.
pub fn gen_layout(spec: &SynthSpec) -> Result<(SensorLayout, Vec<Point>)> {
    spec.validate()?;
    let [w, h] = spec.area;
    let k = spec.regions;
    let mut rng = stream(spec.seed, STREAM_LAYOUT);
    let cols = ((k as f64 * w / h).sqrt().ceil() as usize).clamp(1, k);
    let rows = k.div_ceil(cols);
    let (cw, ch) = (w / cols as f64, h / rows as f64);
    let centers = (0..k)
        .map(|i| {
            let (row, col) = (i / cols, i % cols);
            let col = if row % 2 == 0 { col } else { cols - 1 - col };
            let jx = rng.random_range(-0.2..0.2);
            let jy = rng.random_range(-0.2..0.2);
            [(col as f64 + 0.5 + jx) * cw, (row as f64 + 0.5 + jy) * ch]
        })
        .collect();
    let sensors = (0..spec.sensors).map(|_| [rng.random_range(0.0..w), rng.random_range(0.0..h)]).collect();
    Ok((SensorLayout::new(sensors)?, centers))
}

/// A complete synthetic dataset.
#[derive(Debug, Clone)]
pub struct SynthBundle {
    pub spec: SynthSpec,
    pub model: TruthModel,
    pub sequence: RssSequence,
    pub truth: Segmentation,
    pub layout: SensorLayout,
    pub graph: RegionGraph,
    /// Physical region visited by each segment; the identity by construction.
    pub route: Vec<usize>,
    pub queries: Vec<Vec<f64>>,
    pub query_regions: Vec<usize>,
}

/// Held-out samples, `per_region` from each region in region order.
pub fn gen_queries(model: &TruthModel, spec: &SynthSpec) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = stream(spec.seed, STREAM_QUERIES);
    let mut rows = Vec::new();
    let mut regions = Vec::new();
    for k in 0..model.k() {
        for _ in 0..spec.queries_per_region {
            rows.push(model.draw(k, &model.means[k], &mut rng));
            regions.push(k);
        }
    }
    (rows, regions)
}

pub fn generate(spec: &SynthSpec) -> Result<SynthBundle> {
    spec.validate()?;
    let (layout, centers) = gen_layout(spec)?;
    let model = gen_model(spec, &layout, &centers)?;
    let (sequence, truth) = gen_sequence(&model, spec)?;
    let graph_seed = stream(spec.seed, STREAM_GRAPH).next_u64();
    let graph = random_region_graph(&centers, spec.resolved_target_edges(), graph_seed)?;
    let (queries, query_regions) = gen_queries(&model, spec);
    Ok(SynthBundle {
        spec: spec.clone(),
        route: (0..spec.regions).collect(),
        model,
        sequence,
        truth,
        layout,
        graph,
        queries,
        query_regions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(k: usize, d: usize, n: usize, dim: usize, seed: u64) -> SynthSpec {
        SynthSpec { regions: k, sensors: d, samples: n, dims: DimSpec::All(dim), seed, ..SynthSpec::default() }
    }

    #[test]
    fn separation_is_hit_exactly() {
        for seed in 0..5 {
            let s = SynthSpec { noise_var: 0.7, ..spec(10, 40, 200, 0, seed) };
            let b = generate(&s).unwrap();
            let ratio = b.model.min_mean_gap() / 0.7;
            assert!((ratio - 2.5).abs() < 1e-9, "{ratio}");
        }
    }

    #[test]
    fn noiseless_flat_sequence_is_a_step_function() {
        let s = SynthSpec { noise_var: 0.0, ..spec(3, 5, 30, 0, 1) };
        let b = generate(&s).unwrap();
        for (i, &k) in b.truth.labels().iter().enumerate() {
            assert_eq!(b.sequence.row(i), b.model.means[k].as_slice());
        }
        let means: Vec<_> = b.model.means.iter().collect();
        assert_ne!(means[0], means[1]);
        assert!(b.model.params().unwrap().features.iter().all(|f| f.dim() == 0));
    }

    #[test]
    fn bases_are_semi_unitary() {
        let b = generate(&spec(4, 12, 100, 3, 2)).unwrap();
        for u in &b.model.bases {
            let g = u.transpose() * u;
            assert!((g - DMatrix::identity(3, 3)).amax() < 1e-12);
        }
        b.model.params().unwrap();
    }

    #[test]
    fn too_many_regions_for_the_sensors() {
        assert!(generate(&spec(6, 5, 60, 0, 0)).is_err());
        assert!(generate(&spec(3, 5, 60, 5, 0)).is_err());
    }

    #[test]
    fn deterministic_and_stream_separated() {
        let a = generate(&spec(4, 8, 80, 1, 9)).unwrap();
        let b = generate(&spec(4, 8, 80, 1, 9)).unwrap();
        assert_eq!(a.sequence, b.sequence);
        assert_eq!(a.graph, b.graph);
        let c = generate(&SynthSpec { queries_per_region: 5, ..spec(4, 8, 80, 1, 9) }).unwrap();
        assert_eq!(a.sequence, c.sequence);
        assert_eq!(c.queries.len(), 20);
        assert_ne!(a.sequence, generate(&spec(4, 8, 80, 1, 10)).unwrap().sequence);
    }

    #[test]
    fn layout_is_inside_the_area_with_distinct_centers() {
        let s = spec(10, 21, 100, 0, 4);
        let (layout, centers) = gen_layout(&s).unwrap();
        for p in centers.iter().chain(&layout.positions) {
            assert!((0.0..=30.0).contains(&p[0]) && (0.0..=16.0).contains(&p[1]));
        }
        for i in 0..10 {
            for j in i + 1..10 {
                assert!(crate::matching::euclidean(&centers[i], &centers[j]) > 0.0);
            }
        }
        let b = generate(&s).unwrap();
        assert!(b.graph.is_eligible(&b.route));
    }

    #[test]
    fn segment_means_concentrate() {
        let s = spec(3, 6, 3000, 0, 5);
        let b = generate(&s).unwrap();
        let sd = s.noise_var.sqrt();
        for k in 1..=3 {
            let r = b.truth.segment(k);
            let len = r.len() as f64;
            let m = crate::segment::cost::segment_mean(&b.sequence, r.start, r.end);
            for j in 0..6 {
                assert!((m[j] - b.model.means[k - 1][j]).abs() < 4.0 * sd / len.sqrt());
            }
        }
    }

    #[test]
    fn transitions_blend_between_neighbors() {
        let s = SynthSpec { noise_var: 0.0, transition_len: 4, ..spec(2, 3, 20, 0, 3) };
        let b = generate(&s).unwrap();
        let (m0, m1) = (&b.model.means[0], &b.model.means[1]);
        // rows 8..12 straddle the boundary at 10
        for (off, i) in (8..12).enumerate() {
            let lambda = (off as f64 + 0.5) / 4.0;
            let want = m0 * (1.0 - lambda) + m1 * lambda;
            for j in 0..3 {
                assert!((b.sequence.row(i)[j] - want[j]).abs() < 1e-12);
            }
        }
        assert_eq!(b.sequence.row(7), m0.as_slice());
        assert_eq!(b.sequence.row(12), m1.as_slice());
    }

    #[test]
    fn fractions_set_the_boundaries() {
        let s = SynthSpec { fractions: Some(vec![0.2, 0.3, 0.5]), ..spec(3, 5, 100, 0, 0) };
        assert_eq!(s.truth().unwrap().boundaries(), &[20, 50]);
        let bad = SynthSpec { fractions: Some(vec![0.2, 0.3, 0.4]), ..s };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn path_loss_means_fall_off_with_distance() {
        let s = SynthSpec {
            mean_model: MeanModel::PathLoss { ref_power: -40.0, exponent: 3.0, shadowing: 0.0 },
            ..spec(4, 12, 100, 0, 6)
        };
        let b = generate(&s).unwrap();
        let (layout, centers) = gen_layout(&s).unwrap();
        for (k, o) in centers.iter().enumerate() {
            let nearest = (0..12)
                .min_by(|&a, &c| {
                    crate::matching::euclidean(o, &layout.positions[a])
                        .total_cmp(&crate::matching::euclidean(o, &layout.positions[c]))
                })
                .unwrap();
            assert_eq!(b.model.means[k].argmax().0, nearest);
        }
    }
}
