//! Region-level localization of new RSS vectors.

use crate::density::log_density;
use crate::error::{Error, Result};
use crate::matching::{euclidean, wcl_point};
use crate::model::{Point, RadioMap, SensorLayout};
use crate::registry::Registry;

/// Log-likelihood of `x` under every region of the map, as `(region id, value)`
/// sorted by region id.
pub fn score_regions(x: &[f64], map: &RadioMap) -> Result<Vec<(usize, f64)>> {
    let mut scores = map
        .model
        .features
        .iter()
        .enumerate()
        .map(|(k, f)| Ok((map.region_of(k), log_density(x, f)?)))
        .collect::<Result<Vec<_>>>()?;
    scores.sort_by_key(|&(r, _)| r);
    Ok(scores)
}

/// Maximum-likelihood region for `x`; ties go to the lowest region id.
pub fn assign_region(x: &[f64], map: &RadioMap) -> Result<usize> {
    let scores = score_regions(x, map)?;
    let mut best = scores[0];
    for &(r, v) in &scores[1..] {
        if v > best.1 {
            best = (r, v);
        }
    }
    Ok(best.0)
}

/// Max-RSS baseline: position of the strongest sensor (lowest index on ties).
pub fn baseline_mr(x: &[f64], layout: &SensorLayout) -> Result<Point> {
    if x.len() != layout.len() {
        return Err(Error::DimensionMismatch { expected: layout.len(), got: x.len() });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("RSS vector"));
    }
    let mut best = 0;
    for (j, v) in x.iter().enumerate() {
        if *v > x[best] {
            best = j;
        }
    }
    Ok(layout.positions[best])
}

/// Single-sample weighted centroid baseline.
pub fn baseline_wcl_point(x: &[f64], layout: &SensorLayout, alpha: f64) -> Result<Point> {
    wcl_point(x, layout, alpha)
}

/// Index of the region center nearest to `p` (lowest index on ties).
pub fn snap_to_region(p: &Point, centers: &[Point]) -> Result<usize> {
    if centers.is_empty() {
        return Err(Error::InvalidInput("no region centers".into()));
    }
    let mut best = (0, euclidean(p, &centers[0]));
    for (k, c) in centers.iter().enumerate().skip(1) {
        let d = euclidean(p, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    Ok(best.0)
}

/// Mean distance between the centers of the estimated and true regions over
/// `(estimated, true)` pairs.
pub fn region_loc_error(assignments: &[(usize, usize)], centers: &[Point]) -> Result<f64> {
    if assignments.is_empty() {
        return Err(Error::InvalidInput("no assignments to score".into()));
    }
    let k = centers.len();
    let mut sum = 0.0;
    for &(est, truth) in assignments {
        if est >= k || truth >= k {
            return Err(Error::InvalidInput(format!("region id outside 0..{k}")));
        }
        sum += euclidean(&centers[est], &centers[truth]);
    }
    Ok(sum / assignments.len() as f64)
}

/// Everything a locator may consult.
pub struct LocatorContext<'a> {
    pub map: &'a RadioMap,
    pub layout: &'a SensorLayout,
    pub centers: &'a [Point],
    pub alpha: f64,
}

/// A region-level localization method selectable by name. Point-output baselines
/// are snapped to the nearest region center.
pub trait RegionLocator: Send + Sync {
    fn name(&self) -> &'static str;
    fn locate(&self, x: &[f64], ctx: &LocatorContext<'_>) -> Result<usize>;
}

pub struct MaxLikelihood;

impl RegionLocator for MaxLikelihood {
    fn name(&self) -> &'static str {
        "ml"
    }

    fn locate(&self, x: &[f64], ctx: &LocatorContext<'_>) -> Result<usize> {
        assign_region(x, ctx.map)
    }
}

pub struct MaxRss;

impl RegionLocator for MaxRss {
    fn name(&self) -> &'static str {
        "mr"
    }

    fn locate(&self, x: &[f64], ctx: &LocatorContext<'_>) -> Result<usize> {
        snap_to_region(&baseline_mr(x, ctx.layout)?, ctx.centers)
    }
}

pub struct WeightedCentroid;

impl RegionLocator for WeightedCentroid {
    fn name(&self) -> &'static str {
        "wcl"
    }

    fn locate(&self, x: &[f64], ctx: &LocatorContext<'_>) -> Result<usize> {
        snap_to_region(&baseline_wcl_point(x, ctx.layout, ctx.alpha)?, ctx.centers)
    }
}

pub fn locators() -> Registry<dyn RegionLocator> {
    let mut r: Registry<dyn RegionLocator> = Registry::new("locator");
    r.register("ml", Box::new(MaxLikelihood));
    r.register("mr", Box::new(MaxRss));
    r.register("wcl", Box::new(WeightedCentroid));
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelParams, Provenance, SubspaceFeature};
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn prov() -> Provenance {
        Provenance { config_hash: "test".into(), seed: 0 }
    }

    fn two_region_map() -> RadioMap {
        let f1 = SubspaceFeature::isotropic(DVector::zeros(3), 1.0).unwrap();
        let f2 = SubspaceFeature::isotropic(DVector::from_element(3, 10.0), 1.0).unwrap();
        RadioMap::new(ModelParams::new(vec![f1, f2]).unwrap(), None, prov()).unwrap()
    }

    #[test]
    fn nearest_mean_examples() {
        let map = two_region_map();
        assert_eq!(assign_region(&[0.0; 3], &map).unwrap(), 0);
        assert_eq!(assign_region(&[10.0; 3], &map).unwrap(), 1);
        assert_eq!(assign_region(&[5.0; 3], &map).unwrap(), 0);
        assert!(assign_region(&[f64::NAN, 0.0, 0.0], &map).is_err());
    }

    #[test]
    fn region_ids_follow_the_match() {
        let mut map = two_region_map();
        map.region_ids = Some(vec![1, 0]);
        assert_eq!(assign_region(&[0.0; 3], &map).unwrap(), 1);
        let scores = score_regions(&[0.0; 3], &map).unwrap();
        assert_eq!(scores.iter().map(|s| s.0).collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn agrees_with_dense_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let features: Vec<SubspaceFeature> = (0..4)
            .map(|_| {
                let g = DMatrix::from_fn(5, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
                let q = g.qr().q().columns(0, 2).into_owned();
                let mu = DVector::from_fn(5, |_, _| 3.0 * rng.sample::<f64, _>(StandardNormal));
                SubspaceFeature::new(mu, q, DVector::from_vec(vec![2.0, 0.5]), rng.random_range(0.3..1.5)).unwrap()
            })
            .collect();
        let map = RadioMap::new(ModelParams::new(features.clone()).unwrap(), None, prov()).unwrap();
        for _ in 0..100 {
            let x: Vec<f64> = (0..5).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
            let dense: Vec<f64> = features
                .iter()
                .map(|f| {
                    let c = f.covariance();
                    let r = DVector::from_column_slice(&x) - f.mu();
                    let q = (r.transpose() * c.clone().try_inverse().unwrap() * &r)[(0, 0)];
                    -0.5 * (c.determinant().ln() + q)
                })
                .collect();
            let want = (0..4).fold(0, |b, k| if dense[k] > dense[b] { k } else { b });
            assert_eq!(assign_region(&x, &map).unwrap(), want);
        }
    }

    #[test]
    fn max_rss_examples() {
        let layout = SensorLayout::new(vec![[0.0, 0.0], [1.0, 2.0], [5.0, 5.0]]).unwrap();
        assert_eq!(baseline_mr(&[-50.0, -40.0, -60.0], &layout).unwrap(), [1.0, 2.0]);
        assert_eq!(baseline_mr(&[-50.0; 3], &layout).unwrap(), [0.0, 0.0]);
        let single = SensorLayout::new(vec![[7.0, 1.0]]).unwrap();
        assert_eq!(baseline_mr(&[-80.0], &single).unwrap(), [7.0, 1.0]);
    }

    #[test]
    fn sharp_wcl_approaches_max_rss() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let layout =
            SensorLayout::new((0..6).map(|_| [rng.random_range(0.0..30.0), rng.random_range(0.0..16.0)]).collect())
                .unwrap();
        let x: Vec<f64> = (0..6).map(|_| rng.random_range(-90.0..-40.0)).collect();
        let mr = baseline_mr(&x, &layout).unwrap();
        let wcl = baseline_wcl_point(&x, &layout, 64.0).unwrap();
        assert!(euclidean(&mr, &wcl) < 1e-3, "{mr:?} vs {wcl:?}");
    }

    #[test]
    fn loc_error_examples() {
        let centers = [[0.0, 0.0], [3.0, 0.0]];
        assert_eq!(region_loc_error(&[(0, 0), (1, 1)], &centers).unwrap(), 0.0);
        let half = region_loc_error(&[(0, 0), (1, 0), (1, 1), (0, 1)], &centers).unwrap();
        assert!((half - 1.5).abs() < 1e-12);
        assert!(region_loc_error(&[], &centers).is_err());
        assert_eq!(snap_to_region(&[1.5, 0.0], &centers).unwrap(), 0);
    }

    #[test]
    fn constant_shift_of_log_densities_keeps_argmax() {
        let map = two_region_map();
        let x = [0.2, -0.1, 0.3];
        let a = assign_region(&x, &map).unwrap();
        let scores = score_regions(&x, &map).unwrap();
        let shifted: Vec<f64> = scores.iter().map(|s| s.1 + 123.0).collect();
        let b = (0..2).fold(0, |b, k| if shifted[k] > shifted[b] { k } else { b });
        assert_eq!(a, b);
    }
}
