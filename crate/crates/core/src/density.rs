//! Gaussian log-density of the affine-subspace model and the windowed log-likelihood.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{ModelParams, RssSequence, Segmentation, SubspaceFeature, WindowParams};

/// `(ln|C|, (x - mu)^T C^{-1} (x - mu))` for `C = U Sigma U^T + s^2 I`, computed from
/// the eigenstructure of `C`: eigenvalues `sigma_j^2 + s^2` on the span of `U` and
/// `s^2` on its complement.
pub(crate) fn logdet_mahalanobis(x: &[f64], feat: &SubspaceFeature) -> (f64, f64) {
    let s2 = feat.noise_var();
    let d = x.len();
    let mu = feat.mu();
    let basis = feat.basis();
    let mut resid_sq = 0.0;
    let resid: Vec<f64> = x
        .iter()
        .zip(mu.iter())
        .map(|(a, b)| {
            let r = a - b;
            resid_sq += r * r;
            r
        })
        .collect();
    let mut logdet = (d - feat.dim()) as f64 * s2.ln();
    let mut quad = 0.0;
    let mut proj_sq = 0.0;
    for (j, col) in basis.column_iter().enumerate() {
        let lambda = feat.sigma2()[j] + s2;
        let p: f64 = col.iter().zip(&resid).map(|(u, r)| u * r).sum();
        logdet += lambda.ln();
        quad += p * p / lambda;
        proj_sq += p * p;
    }
    quad += (resid_sq - proj_sq).max(0.0) / s2;
    (logdet, quad)
}

/// `log p_k(x; Theta)`.
pub fn log_density(x: &[f64], feat: &SubspaceFeature) -> Result<f64> {
    if x.len() != feat.sensors() {
        return Err(Error::DimensionMismatch { expected: feat.sensors(), got: x.len() });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("query vector"));
    }
    if !(feat.noise_var() > 0.0) {
        return Err(Error::SingularCovariance("zero noise variance".into()));
    }
    let (logdet, quad) = logdet_mahalanobis(x, feat);
    Ok(-0.5 * (x.len() as f64 * (2.0 * PI).ln() + logdet + quad))
}

/// `J(Theta, tau) = (1/N) sum_i sum_k z_i(tau_{k-1}, tau_k) log p_k(x_i)`.
pub fn log_likelihood(seq: &RssSequence, theta: &ModelParams, tau: &Segmentation, win: &WindowParams) -> Result<f64> {
    win.validate()?;
    if theta.k() != tau.k() {
        return Err(Error::DimensionMismatch { expected: tau.k(), got: theta.k() });
    }
    if tau.n() != seq.len() {
        return Err(Error::DimensionMismatch { expected: seq.len(), got: tau.n() });
    }
    let ext = tau.extended();
    let mut total = 0.0;
    for (i, x) in seq.rows().enumerate() {
        let idx = i as i64 + 1;
        for (k, feat) in theta.features.iter().enumerate() {
            let w = win.weight(idx, ext[k] as i64, ext[k + 1] as i64);
            if w != 0.0 {
                total += w * log_density(x, feat)?;
            }
        }
    }
    Ok(total / seq.len() as f64)
}
