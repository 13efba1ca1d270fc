//! Exhaustive split scans and the merge-and-split move.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cost::SegmentCost;
use crate::error::{Error, Result};

/// Relative-plus-absolute tolerance used for cost ties and the stopping test.
pub fn cost_tol(x: f64) -> f64 {
    1e-12 * x.abs().max(1.0)
}

/// Best split of the cluster `(lo, hi]` at position `left_slot`, scanning every
/// integer `tau` in `[lo + min_len, hi - min_len]`.
///
/// Returns `(tau*, F*)`; ties go to the lowest `tau`.
pub fn optimal_split(
    cost: &dyn SegmentCost,
    left_slot: usize,
    lo: usize,
    hi: usize,
    min_len: usize,
) -> Result<(usize, f64)> {
    let min_len = min_len.max(1);
    if hi < lo + 2 * min_len {
        return Err(Error::Infeasible(format!(
            "interval ({lo}, {hi}] is too short to split into two segments of at least {min_len}"
        )));
    }
    let mut best = (lo + min_len, cost.pair(left_slot, lo, lo + min_len, hi));
    for tau in lo + min_len + 1..=hi - min_len {
        let f = cost.pair(left_slot, lo, tau, hi);
        if f < best.1 - cost_tol(best.1) {
            best = (tau, f);
        }
    }
    Ok(best)
}

/// One merge-and-split candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Move {
    /// 1-based boundary removed by the merge.
    pub merge: usize,
    /// 1-based cluster (after the merge) that was re-split.
    pub split: usize,
    /// Resulting boundaries.
    pub tau: Vec<usize>,
    /// Total cost of `tau`.
    pub cost: f64,
    /// Cost reduction of the split relative to leaving the cluster whole.
    pub reduction: f64,
}

/// One row of a segmentation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub tau: Vec<usize>,
    pub cost: f64,
    /// `(merge k, split j)` that produced `tau`; `None` for the initial row.
    pub chosen: Option<(usize, usize)>,
}

/// Per-iteration history of a segmentation run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SegmentationTrace {
    pub rows: Vec<TraceRow>,
}

impl SegmentationTrace {
    pub fn push(&mut self, tau: &[usize], cost: f64, chosen: Option<(usize, usize)>) {
        self.rows.push(TraceRow { iteration: self.rows.len(), tau: tau.to_vec(), cost, chosen });
    }

    pub fn costs(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.cost).collect()
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].cost <= w[0].cost + cost_tol(w[0].cost))
    }
}

/// Best split after merging boundary `k` (1-based) out of `tau`.
fn best_for_merge(cost: &dyn SegmentCost, tau: &[usize], k: usize, min_len: usize) -> Option<Move> {
    let n = cost.n();
    let mut merged: Vec<usize> = Vec::with_capacity(tau.len() + 1);
    merged.push(0);
    merged.extend(tau.iter().enumerate().filter(|&(i, _)| i + 1 != k).map(|(_, &t)| t));
    merged.push(n);

    let mut best: Option<(usize, usize, f64)> = None;
    for j in 1..merged.len() {
        let (lo, hi) = (merged[j - 1], merged[j]);
        if hi < lo + 2 * min_len {
            continue;
        }
        let Ok((t, f)) = optimal_split(cost, j - 1, lo, hi, min_len) else {
            continue;
        };
        let reduction = cost.pair(j - 1, lo, lo, hi) - f;
        if best.is_none_or(|(_, _, r)| reduction > r + cost_tol(r)) {
            best = Some((j, t, reduction));
        }
    }
    let (j, t, reduction) = best?;
    let mut new_tau = merged[1..merged.len() - 1].to_vec();
    new_tau.insert(j - 1, t);
    let total = cost.total(&new_tau);
    Some(Move { merge: k, split: j, tau: new_tau, cost: total, reduction })
}

/// One iteration of merge-and-split. Every merge `k` is paired with its best split
/// `j*(k)` (largest cost reduction); across merges the candidate with the lowest
/// total cost wins. Returns `None` when no candidate lowers the current total.
pub fn merge_and_split_iter(cost: &dyn SegmentCost, tau: &[usize], min_len: usize) -> Option<Move> {
    let current = cost.total(tau);
    let candidates: Vec<Option<Move>> =
        (1..=tau.len()).into_par_iter().map(|k| best_for_merge(cost, tau, k, min_len)).collect();
    let best = candidates.into_iter().flatten().fold(None::<Move>, |acc, m| match acc {
        Some(a) if m.cost >= a.cost - cost_tol(a.cost) => Some(a),
        _ => Some(m),
    })?;
    (best.cost < current - cost_tol(current)).then_some(best)
}

/// Iterates [`merge_and_split_iter`] from `tau0` until no move lowers the cost or
/// `max_iters` moves have been made.
pub fn descend(
    cost: &dyn SegmentCost,
    tau0: Vec<usize>,
    min_len: usize,
    max_iters: usize,
) -> (Vec<usize>, SegmentationTrace) {
    let mut trace = SegmentationTrace::default();
    let mut tau = tau0;
    trace.push(&tau, cost.total(&tau), None);
    for _ in 0..max_iters {
        match merge_and_split_iter(cost, &tau, min_len) {
            Some(m) => {
                trace.push(&m.tau, m.cost, Some((m.merge, m.split)));
                tau = m.tau;
            }
            None => break,
        }
    }
    (tau, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{RssSequence, WindowParams};
    use crate::segment::cost::{MeanShiftModels, WindowedCost};
    use itertools::Itertools;

    fn cost_for(values: &[f64], win: WindowParams) -> WindowedCost<MeanShiftModels> {
        let seq = RssSequence::new(values.to_vec(), values.len(), 1).unwrap();
        WindowedCost::new(MeanShiftModels::new(&seq), win).unwrap()
    }

    #[test]
    fn step_data_split_matches_enumeration() {
        let cost = cost_for(&[0.0, 0.0, 0.0, 10.0, 10.0, 10.0], WindowParams::rectangle());
        let (t, f) = optimal_split(&cost, 0, 0, 6, 1).unwrap();
        let brute = (1..6).min_by(|&a, &b| cost.pair(0, 0, a, 6).total_cmp(&cost.pair(0, 0, b, 6))).unwrap();
        assert_eq!(t, 3);
        assert_eq!(t, brute);
        assert!(f.abs() < 1e-12);
    }

    #[test]
    fn flat_cost_takes_lowest_index() {
        let cost = cost_for(&[4.0; 12], WindowParams::default());
        let (t, f) = optimal_split(&cost, 0, 0, 12, 2).unwrap();
        assert_eq!(t, 2);
        assert!((f - cost.pair(0, 0, 0, 12)).abs() < 1e-12);
    }

    #[test]
    fn short_interval_rejected() {
        let cost = cost_for(&[1.0, 2.0, 3.0], WindowParams::default());
        assert!(optimal_split(&cost, 0, 0, 3, 2).is_err());
    }

    #[test]
    fn two_boundary_interval_lands_between_them() {
        let mut v = vec![0.0; 10];
        v.extend([6.0; 10]);
        v.extend([-5.0; 10]);
        let cost = cost_for(&v, WindowParams::smooth(1e-3));
        let (t, _) = optimal_split(&cost, 0, 0, 30, 2).unwrap();
        assert!((10..=20).contains(&t), "{t}");
    }

    #[test]
    fn fixed_point_on_optimal_segmentation() {
        let v = [0.0, 0.0, 0.0, 10.0, 10.0, 10.0, 20.0, 20.0, 20.0];
        let cost = cost_for(&v, WindowParams::smooth(1e-3));
        assert!(merge_and_split_iter(&cost, &[3, 6], 2).is_none());
    }

    #[test]
    fn converges_from_uniform_to_global_optimum() {
        let v = [0.0, 0.0, 0.0, 10.0, 10.0, 10.0, 20.0, 20.0, 20.0];
        let cost = cost_for(&v, WindowParams::smooth(1e-3));
        let (tau, trace) = descend(&cost, vec![3, 6], 1, 10);
        assert_eq!(tau, vec![3, 6]);
        let brute = (1..9).combinations(2).map(|c| cost.total(&c)).fold(f64::INFINITY, f64::min);
        assert!((trace.rows.last().unwrap().cost - brute).abs() < 1e-12);

        let (tau, trace) = descend(&cost, vec![1, 2], 1, 10);
        assert_eq!(tau, vec![3, 6]);
        assert!(trace.rows.len() <= 4);
        assert!(trace.is_nonincreasing());
    }

    #[test]
    fn boundary_cluster_beats_empty_cluster_in_cost_reduction() {
        // Clusters after merge: (0, 20] holds a true boundary at 10, (20, 40] holds none.
        let mut v = vec![0.0; 10];
        v.extend([5.0; 10]);
        v.extend((0..20).map(|i| 12.0 + if i % 2 == 0 { 0.3 } else { -0.3 }));
        let cost = cost_for(&v, WindowParams::smooth(1e-3));
        let reduction = |slot: usize, lo: usize, hi: usize| {
            let (_, f) = optimal_split(&cost, slot, lo, hi, 2).unwrap();
            cost.pair(slot, lo, lo, hi) - f
        };
        assert!(reduction(0, 0, 20) > reduction(1, 20, 40));
    }
}
