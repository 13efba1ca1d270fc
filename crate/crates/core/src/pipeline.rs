//! End-to-end radio map construction from an RSS stream.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{euclidean, route_matchers, wcl_centroid, RegionGraph, RouteMatch};
use crate::model::{ModelParams, Point, Provenance, RadioMap, RssSequence, Segmentation, SensorLayout, WindowParams};
use crate::segment::{segmenters, Init, SegmentationTrace, SegmenterConfig};
use crate::subspace::{fit_all, DimPolicy};

fn default_segmenter() -> String {
    "alternating".into()
}
fn default_matcher() -> String {
    "viterbi".into()
}
fn default_alpha() -> f64 {
    1.0
}
fn default_max_iters() -> usize {
    1000
}

/// Settings for [`build`]. Strategies are chosen by registry name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildConfig {
    #[serde(default = "default_segmenter")]
    pub segmenter: String,
    #[serde(default = "default_matcher")]
    pub matcher: String,
    #[serde(default)]
    pub window: WindowParams,
    #[serde(default)]
    pub dims: DimPolicy,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_init")]
    pub init: Init,
    /// WCL weight exponent.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_init() -> Init {
    Init::Uniform
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            segmenter: default_segmenter(),
            matcher: default_matcher(),
            window: WindowParams::default(),
            dims: DimPolicy::default(),
            max_iters: default_max_iters(),
            init: default_init(),
            alpha: default_alpha(),
        }
    }
}

impl BuildConfig {
    pub fn segmenter_config(&self, k: usize) -> SegmenterConfig {
        SegmenterConfig { k, window: self.window, dims: self.dims.clone(), max_iters: self.max_iters, init: self.init }
    }
}

#[derive(Debug, Clone)]
pub struct BuildOutput {
    pub segmentation: Segmentation,
    pub trace: SegmentationTrace,
    pub centroids: Vec<Point>,
    /// `Err(NoFeasibleRoute)` when the graph admits no eligible route.
    pub route: std::result::Result<RouteMatch, Error>,
    pub map: RadioMap,
}

/// Segments the stream into one cluster per graph region, fits a feature per
/// cluster, and matches clusters to regions. A failed route search still yields a
/// map, with `region_ids` left unset.
pub fn build(
    seq: &RssSequence,
    layout: &SensorLayout,
    graph: &RegionGraph,
    config: &BuildConfig,
    provenance: Provenance,
) -> Result<BuildOutput> {
    if layout.len() != seq.dim() {
        return Err(Error::DimensionMismatch { expected: seq.dim(), got: layout.len() });
    }
    let k = graph.k();
    let seg_config = config.segmenter_config(k);
    let segmenter_registry = segmenters();
    let segmenter = segmenter_registry.get(&config.segmenter)?;
    let matcher_registry = route_matchers();
    let matcher = matcher_registry.get(&config.matcher)?;

    let result = segmenter.segment(seq, &seg_config)?;
    let model: ModelParams = match result.model {
        Some(m) => m,
        None => fit_all(seq, &result.segmentation, &config.dims, &config.window)?,
    };
    let centroids = (1..=k)
        .map(|j| wcl_centroid(seq, result.segmentation.segment(j), layout, config.alpha))
        .collect::<Result<Vec<_>>>()?;
    let route = match matcher.match_route(&centroids, graph, &euclidean) {
        Err(e) if e != Error::NoFeasibleRoute => return Err(e),
        r => r,
    };
    let ids = route.as_ref().ok().map(|r| r.pi.clone());
    let map = RadioMap::new(model, ids, provenance)?;
    Ok(BuildOutput { segmentation: result.segmentation, trace: result.trace, centroids, route, map })
}
