//! Sequential-prior window functions.
//!
//! `z_i(a, b)` selects the 1-based sample indices `a < i <= b`. The smooth variant is
//! a difference of two shifted sigmoids and converges to the rectangle as the slope
//! parameter goes to zero.

use crate::error::{Error, Result};
use crate::model::{WindowMode, WindowParams};

/// Offsets beyond this many slope units leave the sigmoid within ~4e-18 of 0 or 1.
const BAND_SLOPES: f64 = 40.0;

/// `sigma_beta(x) = 1 / (1 + exp(-(x - 1/2) / beta))`, evaluated without overflow.
pub fn sigmoid(x: f64, beta: f64) -> f64 {
    let z = (x - 0.5) / beta;
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Rectangle window: 1 when `a < i <= b`.
pub fn window_rect(i: i64, a: i64, b: i64) -> Result<f64> {
    if a >= b {
        return Err(Error::InvalidWindow { a, b });
    }
    Ok(if a < i && i <= b { 1.0 } else { 0.0 })
}

/// Smooth window `sigma_beta(i - a) - sigma_beta(i - b)`.
pub fn window_smooth(i: i64, a: i64, b: i64, beta: f64) -> Result<f64> {
    if a >= b {
        return Err(Error::InvalidWindow { a, b });
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidBeta(beta));
    }
    Ok(sigmoid((i - a) as f64, beta) - sigmoid((i - b) as f64, beta))
}

impl WindowParams {
    /// Step function at integer offset `x`: `sigma_beta(x)`, or `1{x >= 1}` for the
    /// rectangle.
    pub fn step(&self, x: i64) -> f64 {
        match self.mode {
            WindowMode::Rectangle => {
                if x >= 1 {
                    1.0
                } else {
                    0.0
                }
            }
            WindowMode::Smooth => sigmoid(x as f64, self.beta),
        }
    }

    /// `z_i(a, b)` for 1-based `i`. Callers guarantee `a < b`.
    pub fn weight(&self, i: i64, a: i64, b: i64) -> f64 {
        match self.mode {
            WindowMode::Rectangle => {
                if a < i && i <= b {
                    1.0
                } else {
                    0.0
                }
            }
            WindowMode::Smooth => sigmoid((i - a) as f64, self.beta) - sigmoid((i - b) as f64, self.beta),
        }
    }

    /// Number of integer offsets on each side of a step where the step differs from
    /// the rectangle by more than roundoff. Zero for the rectangle.
    pub fn band(&self) -> usize {
        match self.mode {
            WindowMode::Rectangle => 0,
            WindowMode::Smooth => (BAND_SLOPES * self.beta).ceil() as usize + 1,
        }
    }

    /// Weights `z_i(a, b)` for every 1-based sample `i = 1..=n`.
    pub fn weights(&self, n: usize, a: usize, b: usize) -> Vec<f64> {
        (1..=n as i64).map(|i| self.weight(i, a as i64, b as i64)).collect()
    }
}
