//! Region adjacency graph and its random generator.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::Point;

/// Physical regions with reference centers and an undirected adjacency relation.
/// Region ids are 0-based; edges are stored as `(low, high)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionGraph {
    centers: Vec<Point>,
    edges: BTreeSet<(usize, usize)>,
}

impl RegionGraph {
    pub fn new(centers: Vec<Point>, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let k = centers.len();
        if k == 0 {
            return Err(Error::InvalidInput("region graph needs at least one region".into()));
        }
        if centers.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("region centers"));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidInput(format!("self-loop on region {}", a + 1)));
            }
            if a >= k || b >= k {
                return Err(Error::InvalidInput(format!("edge ({}, {}) outside 1..={k}", a + 1, b + 1)));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(Self { centers, edges: set })
    }

    /// Path graph `0 - 1 - ... - (K-1)`.
    pub fn path(centers: Vec<Point>) -> Result<Self> {
        let k = centers.len();
        Self::new(centers, (1..k).map(|j| (j - 1, j)))
    }

    /// Complete graph on the centers.
    pub fn complete(centers: Vec<Point>) -> Result<Self> {
        let k = centers.len();
        let edges: Vec<_> = (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).collect();
        Self::new(centers, edges)
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    /// Dense adjacency matrix.
    pub fn adjacency(&self) -> Vec<Vec<bool>> {
        let k = self.k();
        let mut adj = vec![vec![false; k]; k];
        for &(a, b) in &self.edges {
            adj[a][b] = true;
            adj[b][a] = true;
        }
        adj
    }

    /// Whether `route` is an eligible route: a permutation whose consecutive regions
    /// are adjacent.
    pub fn is_eligible(&self, route: &[usize]) -> bool {
        let k = self.k();
        if route.len() != k {
            return false;
        }
        let mut seen = vec![false; k];
        for &r in route {
            if r >= k || std::mem::replace(&mut seen[r], true) {
                return false;
            }
        }
        route.windows(2).all(|w| self.has_edge(w[0], w[1]))
    }
}

fn dist2(a: &Point, b: &Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Expected edge count for `q_jk = min(1, exp(log_c - |o_j - o_k|^2))`.
fn expected_edges(d2: &[f64], log_c: f64) -> f64 {
    d2.iter().map(|&d| (log_c - d).min(0.0).exp()).sum()
}

/// Edge probabilities `q_jk = min(1, C_e exp(-|o_j - o_k|^2))` with `C_e` chosen so the
/// expected edge count equals `target_edges`. Pairs are in `(j, k)`, `j < k` order.
pub fn edge_probabilities(centers: &[Point], target_edges: f64) -> Result<Vec<((usize, usize), f64)>> {
    let k = centers.len();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).collect();
    let max = pairs.len() as f64;
    if !(target_edges > 0.0) || target_edges > max {
        return Err(Error::Calibration(format!(
            "target of {target_edges} edges is outside (0, {max}] for {k} regions"
        )));
    }
    let d2: Vec<f64> = pairs.iter().map(|&(a, b)| dist2(&centers[a], &centers[b])).collect();
    // Bisection in log C_e: the expected count is continuous and nondecreasing.
    // At `lo` every q is below target/(e * pairs); at `hi` every q saturates at 1.
    let mut lo = d2.iter().copied().fold(f64::INFINITY, f64::min) + (target_edges / max).ln() - 1.0;
    let mut hi = d2.iter().copied().fold(0.0, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if expected_edges(&d2, mid) < target_edges {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let log_c = hi;
    let realized = expected_edges(&d2, log_c);
    if (realized - target_edges).abs() > 1e-6 * target_edges.max(1.0) {
        return Err(Error::Calibration(format!(
            "could only reach {realized:.6} expected edges for target {target_edges}"
        )));
    }
    Ok(pairs.into_iter().zip(d2).map(|(p, d)| (p, (log_c - d).min(0.0).exp())).collect())
}

/// Samples a region graph with distance-dependent edge probabilities, conditioned on
/// the collection order `0, 1, ..., K-1` being an eligible route.
///
/// Edges are independent, so redrawing until every route edge appears leaves the
/// other edges with their unconditional law; the route edges are therefore set
/// directly and only the remaining pairs are drawn. This is exact and never stalls
/// on layouts where a route edge is improbable.
pub fn random_region_graph(centers: &[Point], target_edges: usize, seed: u64) -> Result<RegionGraph> {
    let k = centers.len();
    if k < 2 {
        return RegionGraph::new(centers.to_vec(), []);
    }
    if target_edges < k - 1 {
        return Err(Error::Calibration(format!(
            "a route through {k} regions needs at least {} edges, target is {target_edges}",
            k - 1
        )));
    }
    let probs = edge_probabilities(centers, target_edges as f64)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges: Vec<(usize, usize)> = probs
        .iter()
        .filter(|((a, b), q)| {
            let draw = rng.random::<f64>();
            b - a == 1 || draw < *q
        })
        .map(|(p, _)| *p)
        .collect();
    RegionGraph::new(centers.to_vec(), edges)
}
