//! Matching clusters to physical regions.

pub mod graph;
pub mod route;
pub mod wcl;

pub use graph::{edge_probabilities, random_region_graph, RegionGraph};
pub use route::{
    brute_force_match, count_eligible_routes, euclidean, matching_error, route_matchers, viterbi_match, BruteForce,
    PointCost, RouteMatch, RouteMatcher, Viterbi, DEFAULT_MAX_REGIONS,
};
pub use wcl::{wcl_centroid, wcl_point};
