//! α-divergence, the Bhattacharyya coefficient and the constraint constant
//! `x(α, ε)`.

use serde::Serialize;

use crate::density::{DensityModel, QuadratureGrid};
use crate::error::{Error, Result};

/// Half-width of the excluded neighbourhoods around α = 0 and α = 1.
pub const ALPHA_GUARD: f64 = 1e-6;

/// Slack below zero tolerated before a divergence is reported as negative.
const NEGATIVE_SLACK: f64 = 1e-10;

pub fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha.abs() <= ALPHA_GUARD || (alpha - 1.0).abs() <= ALPHA_GUARD {
        return Err(Error::GuardBand(alpha));
    }
    Ok(())
}

/// Divergence order, Bayesian threshold and ball radii.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DivergenceSpec {
    pub alpha: f64,
    pub rho: f64,
    pub eps0: f64,
    pub eps1: f64,
}

impl DivergenceSpec {
    pub fn new(alpha: f64, rho: f64, eps0: f64, eps1: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::InvalidArgument(format!("rho must be positive, got {rho}")));
        }
        for (name, e) in [("eps0", eps0), ("eps1", eps1)] {
            if !(e.is_finite() && e >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be nonnegative, got {e}"
                )));
            }
        }
        Ok(Self {
            alpha,
            rho,
            eps0,
            eps1,
        })
    }

    pub fn x0(&self) -> f64 {
        x_of(self.alpha, self.eps0)
    }

    pub fn x1(&self) -> f64 {
        x_of(self.alpha, self.eps1)
    }
}

/// `1 − α(1−α)ε`.
pub fn x_of(alpha: f64, eps: f64) -> f64 {
    1.0 - alpha * (1.0 - alpha) * eps
}

/// `∫ gᵅ f^{1−α} dμ` on tabulated values, evaluated in log space.
///
/// Returns `+∞` when `α < 0` and some node has `g = 0 < f`.
pub fn power_integral(g: &[f64], f: &[f64], alpha: f64, grid: &QuadratureGrid) -> Result<f64> {
    for v in [g, f] {
        if v.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: v.len(),
            });
        }
    }
    let mut total = 0.0;
    for ((&gi, &fi), &w) in g.iter().zip(f).zip(grid.weights()) {
        let term = match (gi > 0.0, fi > 0.0) {
            (true, true) => (alpha * gi.ln() + (1.0 - alpha) * fi.ln()).exp(),
            (false, false) => 0.0,
            (true, false) => {
                if alpha > 1.0 {
                    return Err(Error::SupportViolation);
                }
                0.0
            }
            (false, true) => {
                if alpha < 0.0 {
                    return Ok(f64::INFINITY);
                }
                0.0
            }
        };
        total += w * term;
    }
    Ok(total)
}

/// `D(g, f; α)` on tabulated values.
pub fn divergence_values(g: &[f64], f: &[f64], alpha: f64, grid: &QuadratureGrid) -> Result<f64> {
    check_alpha(alpha)?;
    let integral = power_integral(g, f, alpha, grid)?;
    let d = if integral.is_infinite() {
        f64::INFINITY
    } else {
        (1.0 - integral) / (alpha * (1.0 - alpha))
    };
    if d < -NEGATIVE_SLACK {
        log::warn!("alpha-divergence is negative ({d:.3e}) at alpha = {alpha}");
    }
    Ok(d)
}

/// `D(g, f; α) = (1 − ∫ gᵅ f^{1−α} dμ) / (α(1−α))`.
pub fn alpha_divergence(
    g: &DensityModel,
    f: &DensityModel,
    alpha: f64,
    grid: &QuadratureGrid,
) -> Result<f64> {
    divergence_values(&grid.tabulate(g), &grid.tabulate(f), alpha, grid)
}

/// `∫ √(f0 f1) dμ` on tabulated values.
pub fn bhattacharyya_values(f0: &[f64], f1: &[f64], grid: &QuadratureGrid) -> Result<f64> {
    power_integral(f0, f1, 0.5, grid)
}

pub fn bhattacharyya(f0: &DensityModel, f1: &DensityModel, grid: &QuadratureGrid) -> Result<f64> {
    bhattacharyya_values(&grid.tabulate(f0), &grid.tabulate(f1), grid)
}
