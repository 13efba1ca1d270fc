//! Clustering as sequential segmentation.

pub mod algorithms;
pub mod cost;
pub mod proxy;
pub mod search;

pub use algorithms::{
    epsilon_error, run_alg1, run_alg2, segmenters, Alternating, Init, MergeSplit, SegmentationResult, Segmenter,
    SegmenterConfig,
};
pub use cost::{cost_fk_d0, cost_fk_general, FrozenModels, MeanShiftModels, SegmentCost, SegmentModels, WindowedCost};
pub use proxy::{cost_fk_proxy, monte_carlo_fk, ProxyModels};
pub use search::{cost_tol, descend, merge_and_split_iter, optimal_split, Move, SegmentationTrace, TraceRow};
