//! Graph-constrained matching of clusters to physical regions.
//!
//! Cluster `k` (in collection order) is assigned region `pi[k]`; the route
//! `pi[0], pi[1], ...` must visit every region once along graph edges, and the cost
//! is `sum_k c(o_hat_k, o_{pi[k]})`.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use super::graph::RegionGraph;
use crate::error::{Error, Result};
use crate::model::Point;
use crate::registry::Registry;

/// Largest region count the exact route search accepts by default.
pub const DEFAULT_MAX_REGIONS: usize = 20;
/// Largest region count for permutation enumeration.
pub const BRUTE_FORCE_MAX_REGIONS: usize = 9;

/// Point-to-point matching cost.
pub type PointCost = dyn Fn(&Point, &Point) -> f64 + Sync;

pub fn euclidean(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Tolerance under which two route costs count as tied.
fn route_tol(x: f64) -> f64 {
    1e-9 * x.abs().max(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteMatch {
    /// `pi[k]` is the 0-based region of the `k`-th cluster.
    pub pi: Vec<usize>,
    pub cost: f64,
    /// The reversed route is eligible, distinct, and ties on cost.
    pub reversal_ambiguous: bool,
}

fn cost_matrix(centroids: &[Point], graph: &RegionGraph, cost: &PointCost) -> Result<Vec<Vec<f64>>> {
    if centroids.len() != graph.k() {
        return Err(Error::DimensionMismatch { expected: graph.k(), got: centroids.len() });
    }
    let m: Vec<Vec<f64>> = centroids.iter().map(|c| graph.centers().iter().map(|o| cost(c, o)).collect()).collect();
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("route costs"));
    }
    Ok(m)
}

fn route_cost(m: &[Vec<f64>], pi: &[usize]) -> f64 {
    pi.iter().enumerate().map(|(k, &r)| m[k][r]).sum()
}

fn finish(m: &[Vec<f64>], graph: &RegionGraph, pi: Vec<usize>) -> RouteMatch {
    let cost = route_cost(m, &pi);
    let rev: Vec<usize> = pi.iter().rev().copied().collect();
    let reversal_ambiguous =
        rev != pi && graph.is_eligible(&rev) && (route_cost(m, &rev) - cost).abs() <= route_tol(cost);
    RouteMatch { pi, cost, reversal_ambiguous }
}

/// Exact route search by dynamic programming over (visited set, last region).
///
/// Among routes whose cost is within a relative `1e-9` of the optimum, the
/// lexicographically smallest is returned.
pub fn viterbi_match(
    centroids: &[Point],
    graph: &RegionGraph,
    cost: &PointCost,
    max_regions: usize,
) -> Result<RouteMatch> {
    let k = graph.k();
    if k > max_regions || k >= usize::BITS as usize {
        return Err(Error::TooLarge(format!("{k} regions exceed the route-search cap of {max_regions}")));
    }
    let m = cost_matrix(centroids, graph, cost)?;
    let adj = graph.adjacency();
    let full = (1usize << k) - 1;
    // suffix[mask * k + last]: least cost of assigning the remaining clusters, given the
    // regions in `mask` are used by the first popcount(mask) clusters, ending at `last`.
    let mut suffix = vec![f64::INFINITY; (full + 1) * k];
    for last in 0..k {
        suffix[full * k + last] = 0.0;
    }
    for mask in (1..full).rev() {
        let step = mask.count_ones() as usize;
        for last in (0..k).filter(|&l| mask >> l & 1 == 1) {
            let mut best = f64::INFINITY;
            for next in (0..k).filter(|&r| mask >> r & 1 == 0 && adj[last][r]) {
                let v = m[step][next] + suffix[(mask | 1 << next) * k + next];
                if v < best {
                    best = v;
                }
            }
            suffix[mask * k + last] = best;
        }
    }
    let opt = (0..k).map(|r| m[0][r] + suffix[(1 << r) * k + r]).fold(f64::INFINITY, f64::min);
    if !opt.is_finite() {
        return Err(Error::NoFeasibleRoute);
    }
    let bound = opt + route_tol(opt);
    let mut pi: Vec<usize> = Vec::with_capacity(k);
    let mut mask = 0usize;
    let mut acc = 0.0;
    for step in 0..k {
        let next = (0..k)
            .filter(|&r| mask >> r & 1 == 0 && (step == 0 || adj[pi[step - 1]][r]))
            .find(|&r| acc + m[step][r] + suffix[(mask | 1 << r) * k + r] <= bound)
            .ok_or(Error::NoFeasibleRoute)?;
        acc += m[step][next];
        mask |= 1 << next;
        pi.push(next);
    }
    Ok(finish(&m, graph, pi))
}

/// Exhaustive search over all `K!` permutations, with the same tie rule as
/// [`viterbi_match`].
pub fn brute_force_match(centroids: &[Point], graph: &RegionGraph, cost: &PointCost) -> Result<RouteMatch> {
    let k = graph.k();
    if k > BRUTE_FORCE_MAX_REGIONS {
        return Err(Error::TooLarge(format!("{k} regions exceed the enumeration cap of {BRUTE_FORCE_MAX_REGIONS}")));
    }
    let m = cost_matrix(centroids, graph, cost)?;
    let eligible: Vec<(Vec<usize>, f64)> = (0..k)
        .permutations(k)
        .filter(|p| graph.is_eligible(p))
        .map(|p| {
            let c = route_cost(&m, &p);
            (p, c)
        })
        .collect();
    let opt = eligible.iter().map(|(_, c)| *c).fold(f64::INFINITY, f64::min);
    let (pi, _) = eligible.into_iter().find(|(_, c)| *c <= opt + route_tol(opt)).ok_or(Error::NoFeasibleRoute)?;
    Ok(finish(&m, graph, pi))
}

/// Number of eligible routes (enumeration; `K <= 9`).
pub fn count_eligible_routes(graph: &RegionGraph) -> Result<usize> {
    let k = graph.k();
    if k > BRUTE_FORCE_MAX_REGIONS {
        return Err(Error::TooLarge(format!("{k} regions exceed the enumeration cap")));
    }
    Ok((0..k).permutations(k).filter(|p| graph.is_eligible(p)).count())
}

/// `E_m = (1/K) sum_k [pi*(k) != pi(k)]`.
pub fn matching_error(pi: &[usize], truth: &[usize]) -> Result<f64> {
    if pi.len() != truth.len() || pi.is_empty() {
        return Err(Error::DimensionMismatch { expected: truth.len(), got: pi.len() });
    }
    let wrong = pi.iter().zip(truth).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / pi.len() as f64)
}

/// A route-matching strategy selectable by name.
pub trait RouteMatcher: Send + Sync {
    fn name(&self) -> &'static str;
    fn match_route(&self, centroids: &[Point], graph: &RegionGraph, cost: &PointCost) -> Result<RouteMatch>;
}

pub struct Viterbi {
    pub max_regions: usize,
}

impl RouteMatcher for Viterbi {
    fn name(&self) -> &'static str {
        "viterbi"
    }

    fn match_route(&self, centroids: &[Point], graph: &RegionGraph, cost: &PointCost) -> Result<RouteMatch> {
        viterbi_match(centroids, graph, cost, self.max_regions)
    }
}

pub struct BruteForce;

impl RouteMatcher for BruteForce {
    fn name(&self) -> &'static str {
        "brute-force"
    }

    fn match_route(&self, centroids: &[Point], graph: &RegionGraph, cost: &PointCost) -> Result<RouteMatch> {
        brute_force_match(centroids, graph, cost)
    }
}

pub fn route_matchers() -> Registry<dyn RouteMatcher> {
    let mut r: Registry<dyn RouteMatcher> = Registry::new("route matcher");
    r.register("viterbi", Box::new(Viterbi { max_regions: DEFAULT_MAX_REGIONS }));
    r.register("brute-force", Box::new(BruteForce));
    r
}
