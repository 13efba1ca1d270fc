//! Weighted centroid localization (WCL).

use std::ops::Range;

use crate::error::{Error, Result};
use crate::model::{Point, RssSequence, SensorLayout};

/// RSS-weighted average of sensor positions with weights `(10^{x_j / 10})^alpha`.
///
/// Weights are taken relative to the strongest sensor, which leaves the ratio
/// unchanged and keeps `10^{alpha x / 10}` inside the floating-point range.
pub fn wcl_point(x: &[f64], layout: &SensorLayout, alpha: f64) -> Result<Point> {
    if x.len() != layout.len() {
        return Err(Error::DimensionMismatch { expected: layout.len(), got: x.len() });
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidInput(format!("WCL exponent must be positive, got {alpha}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("RSS vector"));
    }
    let top = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut acc = [0.0; 2];
    let mut total = 0.0;
    for (v, z) in x.iter().zip(&layout.positions) {
        let w = 10f64.powf(alpha * (v - top) / 10.0);
        acc[0] += w * z[0];
        acc[1] += w * z[1];
        total += w;
    }
    Ok([acc[0] / total, acc[1] / total])
}

/// Reference location of a cluster: the mean of the per-sample WCL points over the
/// 0-based rows in `rows`.
pub fn wcl_centroid(seq: &RssSequence, rows: Range<usize>, layout: &SensorLayout, alpha: f64) -> Result<Point> {
    if rows.is_empty() || rows.end > seq.len() {
        return Err(Error::InvalidInput(format!("cluster rows {rows:?} are empty or out of range")));
    }
    let count = rows.len() as f64;
    let mut acc = [0.0; 2];
    for i in rows {
        let p = wcl_point(seq.row(i), layout, alpha)?;
        acc[0] += p[0];
        acc[1] += p[1];
    }
    Ok([acc[0] / count, acc[1] / count])
}
