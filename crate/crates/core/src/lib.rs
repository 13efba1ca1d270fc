//! Region-based radio maps from unlabeled sequential RSS measurements.
//!
//! The pipeline clusters an ordered RSS stream into `K` consecutive segments
//! ([`segment`]), fits a per-region affine-subspace feature to each segment
//! ([`subspace`]), matches segments to physical regions along an adjacency graph
//! ([`matching`]), and assigns new measurements to regions by maximum likelihood
//! ([`localize`]).

// `!(x > 0.0)` is used on purpose: it rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod density;
pub mod error;
pub mod localize;
pub mod matching;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod registry;
pub mod segment;
pub mod subspace;
pub mod synth;
pub mod theory;
pub mod window;

pub use error::{Error, Result};
pub use model::{
    ModelParams, Point, Provenance, RadioMap, RssSequence, Segmentation, SensorLayout, SubspaceFeature, WindowMode,
    WindowParams,
};
