//! Largest admissible robustness parameters.
//!
//! The uncertainty balls touch when both least favorable densities collapse
//! onto a common density, which happens as `l_l → inf l` and `l_u → sup l`.
//! In that limit the normalization and divergence equations depend on the
//! multipliers `(λ0, λ1)` only through their direction: writing
//! `λ = t (w, 1 − w)`, the common density is
//! ```text
//! g_w ∝ (w f0^{1−α} + (1 − w) ρ^{α−1} f1^{1−α})^{1/(1−α)}
//! ```
//! and `t` follows from the normalization. Each direction `w` therefore gives
//! one boundary pair `(ε0, ε1)`. For `α = 1/2` and `ρ = 1` the boundary has a
//! closed form in the Bhattacharyya coefficient.

use rayon::prelude::*;
use serde::Serialize;

use crate::density::NominalPair;
use crate::divergence::{bhattacharyya_values, check_alpha, power_integral, DivergenceSpec};
use crate::error::{Error, Result};
use crate::numeric::{bisect, log_add_exp};

/// Range of `θ = logit(w)` searched along the boundary.
const THETA_MAX: f64 = 40.0;

/// Relative margin below which a pair counts as on the boundary.
const STRICTNESS: f64 = 1e-9;

/// Upper end of the Hellinger surface axes (`a(ε, 0) = 1 − ε/4` reaches 0).
pub const HELLINGER_EPS_EXTENT: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LimitMode {
    General,
    Hellinger,
}

/// One boundary pair with its multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub eps0: f64,
    pub eps1: f64,
    pub lambda0: f64,
    pub lambda1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfaceCell {
    pub eps0: f64,
    pub eps1: f64,
    /// Hellinger coefficient whose boundary passes through the cell; NaN where
    /// undefined or in general mode.
    pub a: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub alpha: f64,
    pub rho: f64,
    pub mode: LimitMode,
    /// Boundary pairs ordered by increasing `ε0`.
    pub pairs: Vec<(f64, f64)>,
    pub a_value: Option<f64>,
    pub lambda0: Vec<f64>,
    pub lambda1: Vec<f64>,
    pub surface: Vec<SurfaceCell>,
}

/// Outcome of [`validate_eps`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeasibilityCheck {
    pub feasible: bool,
    /// Distance from the pair to the boundary along the ray through it;
    /// negative outside.
    pub margin: f64,
    pub boundary: (f64, f64),
    /// The nominal likelihood ratio range is bounded, so the boundary only
    /// approximates the limit `inf l = 0`, `sup l = ∞`.
    pub bounded_lr: bool,
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Boundary pair for the multiplier direction `w = 1/(1 + e^{−θ})`.
pub fn boundary_point(pair: &NominalPair, alpha: f64, rho: f64, theta: f64) -> Result<BoundaryPoint> {
    check_alpha(alpha)?;
    let ln_w = -softplus(-theta);
    let ln_w1 = -softplus(theta);
    let q = 1.0 - alpha;
    let ln_rho = (alpha - 1.0) * rho.ln();
    let log_q: Vec<f64> = pair
        .f0()
        .iter()
        .zip(pair.f1())
        .map(|(&a, &b)| {
            let ta = if a > 0.0 { ln_w + q * a.ln() } else if q > 0.0 { f64::NEG_INFINITY } else { f64::INFINITY };
            let tb = if b > 0.0 {
                ln_w1 + ln_rho + q * b.ln()
            } else if q > 0.0 {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            };
            log_add_exp(ta, tb) / q
        })
        .collect();
    let top = log_q.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::NoBoundaryPoint("common density vanishes on the grid".into()));
    }
    let raw: Vec<f64> = log_q.iter().map(|&v| (v - top).exp()).collect();
    let mass = pair.grid().integrate(&raw)?;
    let g: Vec<f64> = raw.iter().map(|v| v / mass).collect();
    let grid = pair.grid();
    let x0 = power_integral(&g, pair.f0(), alpha, grid)?;
    let x1 = rho.powf(alpha) * power_integral(&g, pair.f1(), alpha, grid)?;
    let scale = alpha * (1.0 - alpha);
    let ln_t = q.abs().ln() - q * (top + mass.ln());
    let t = ln_t.exp();
    Ok(BoundaryPoint {
        eps0: (1.0 - x0) / scale,
        eps1: (1.0 - x1) / scale,
        lambda0: t * ln_w.exp(),
        lambda1: t * ln_w1.exp(),
    })
}

/// Given `ε_index = value`, the boundary value of the other radius and the
/// multipliers `(λ0, λ1)` there.
pub fn max_eps_general(
    nominals: &NominalPair,
    alpha: f64,
    rho: f64,
    fixed: (usize, f64),
) -> Result<(f64, f64, f64)> {
    let (index, value) = fixed;
    if index > 1 {
        return Err(Error::InvalidArgument(format!("radius index must be 0 or 1, got {index}")));
    }
    let coord = |b: &BoundaryPoint| if index == 0 { b.eps0 } else { b.eps1 };
    let f = |theta: f64| {
        boundary_point(nominals, alpha, rho, theta).map_or(f64::NAN, |b| coord(&b) - value)
    };
    let theta = bisect(f, -THETA_MAX, THETA_MAX, 1e-13, 300).ok_or_else(|| {
        Error::NoBoundaryPoint(format!(
            "eps{index} = {value} is outside the range reachable on the boundary"
        ))
    })?;
    let b = boundary_point(nominals, alpha, rho, theta)?;
    let other = if index == 0 { b.eps1 } else { b.eps0 };
    Ok((other, b.lambda0, b.lambda1))
}

/// Whether `(ε0, ε1)` lies strictly inside the boundary, measured along the
/// ray from the origin through the pair.
pub fn validate_eps(nominals: &NominalPair, spec: &DivergenceSpec) -> Result<FeasibilityCheck> {
    let (lo, hi) = nominals.lr_range();
    let bounded_lr = lo > 0.0 || hi.is_finite();
    let (e0, e1) = (spec.eps0, spec.eps1);
    let target = if e0 == 0.0 && e1 == 0.0 {
        std::f64::consts::FRAC_PI_4
    } else {
        e1.atan2(e0)
    };
    let angle = |theta: f64| {
        boundary_point(nominals, spec.alpha, spec.rho, theta)
            .map_or(f64::NAN, |b| b.eps1.atan2(b.eps0) - target)
    };
    let theta = match bisect(angle, -THETA_MAX, THETA_MAX, 1e-12, 300) {
        Some(t) => t,
        None => {
            // The ray misses the reachable arc: use the nearer end.
            if angle(-THETA_MAX).abs() < angle(THETA_MAX).abs() {
                -THETA_MAX
            } else {
                THETA_MAX
            }
        }
    };
    let b = boundary_point(nominals, spec.alpha, spec.rho, theta)?;
    let radius = b.eps0.hypot(b.eps1);
    let margin = radius - e0.hypot(e1);
    Ok(FeasibilityCheck {
        feasible: margin > (STRICTNESS * radius).max(1e-12),
        margin,
        boundary: (b.eps0, b.eps1),
        bounded_lr,
    })
}

/// Bhattacharyya coefficient whose Hellinger boundary passes through
/// `(ε0, ε1)`; symmetric in its arguments bit for bit.
pub fn hellinger_root_a(eps0: f64, eps1: f64) -> Result<f64> {
    let domain = |e: f64| (0.0..=8.0).contains(&e);
    if !(domain(eps0) && domain(eps1)) {
        return Err(Error::InfeasiblePair {
            eps0,
            eps1,
            a: f64::NAN,
        });
    }
    let disc = (eps0 * (eps0 - 8.0)) * (eps1 * (eps1 - 8.0));
    let a = (16.0 - 4.0 * (eps0 + eps1) + eps0 * eps1 - disc.sqrt()) / 16.0;
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::InfeasiblePair { eps0, eps1, a });
    }
    Ok(a)
}

/// Largest equal radius `4 − 2√(2(1 + a))`.
pub fn hellinger_eps_max(a: f64) -> f64 {
    4.0 - 2.0 * (2.0 * (1.0 + a)).sqrt()
}

/// Boundary value of one radius given the other, for coefficient `a`.
pub fn hellinger_other_eps(a: f64, eps_fixed: f64) -> Result<f64> {
    let b = a * (eps_fixed - 4.0) + 4.0;
    let c = 4.0 * a + eps_fixed - 4.0;
    let disc = b * b - c * c;
    if !(disc >= 0.0) || eps_fixed < 0.0 {
        return Err(Error::NoBoundaryPoint(format!(
            "eps = {eps_fixed} exceeds the Hellinger boundary for a = {a}"
        )));
    }
    Ok(b - disc.sqrt())
}

fn axis(extent: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| extent * i as f64 / (n - 1) as f64).collect()
}

/// Closed-form boundary curve and `a`-surface for `α = 1/2`, `ρ = 1`.
pub fn hellinger_report(a_nominal: Option<f64>, n: usize) -> Result<FeasibilityReport> {
    if n < 2 {
        return Err(Error::InvalidArgument("surface needs n >= 2".into()));
    }
    let mut pairs = Vec::new();
    if let Some(a) = a_nominal {
        let end = hellinger_other_eps(a, 0.0)?;
        for e0 in axis(end, n) {
            pairs.push((e0, hellinger_other_eps(a, e0).unwrap_or(0.0).max(0.0)));
        }
    }
    let ticks = axis(HELLINGER_EPS_EXTENT, n);
    let mut surface = Vec::with_capacity(n * n);
    for &e0 in &ticks {
        for &e1 in &ticks {
            let (a, defined) = match hellinger_root_a(e0, e1) {
                Ok(a) => (a, true),
                Err(_) => (f64::NAN, false),
            };
            let feasible = defined && a_nominal.is_none_or(|an| a > an);
            surface.push(SurfaceCell {
                eps0: e0,
                eps1: e1,
                a,
                feasible,
            });
        }
    }
    Ok(FeasibilityReport {
        alpha: 0.5,
        rho: 1.0,
        mode: LimitMode::Hellinger,
        pairs,
        a_value: a_nominal,
        lambda0: Vec::new(),
        lambda1: Vec::new(),
        surface,
    })
}

/// Boundary curve traced over multiplier directions plus a feasibility
/// surface, for any admissible `α` and `ρ`.
pub fn general_report(nominals: &NominalPair, alpha: f64, rho: f64, n: usize) -> Result<FeasibilityReport> {
    check_alpha(alpha)?;
    if n < 2 {
        return Err(Error::InvalidArgument("surface needs n >= 2".into()));
    }
    let thetas: Vec<f64> = (0..n)
        .map(|i| THETA_MAX - 2.0 * THETA_MAX * i as f64 / (n - 1) as f64)
        .collect();
    let points = thetas
        .par_iter()
        .map(|&t| boundary_point(nominals, alpha, rho, t))
        .collect::<Result<Vec<_>>>()?;
    let extent = points
        .iter()
        .flat_map(|b| [b.eps0, b.eps1])
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max)
        * 1.05;
    let ticks = axis(extent.max(f64::MIN_POSITIVE), n);
    let cells: Vec<(f64, f64)> = ticks
        .iter()
        .flat_map(|&e0| ticks.iter().map(move |&e1| (e0, e1)))
        .collect();
    let surface = cells
        .par_iter()
        .map(|&(e0, e1)| {
            let spec = DivergenceSpec::new(alpha, rho, e0, e1)?;
            Ok(SurfaceCell {
                eps0: e0,
                eps1: e1,
                a: f64::NAN,
                feasible: validate_eps(nominals, &spec)?.feasible,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let a_value = if alpha == 0.5 {
        Some(bhattacharyya_values(nominals.f0(), nominals.f1(), nominals.grid())?)
    } else {
        None
    };
    Ok(FeasibilityReport {
        alpha,
        rho,
        mode: LimitMode::General,
        pairs: points.iter().map(|b| (b.eps0, b.eps1)).collect(),
        a_value,
        lambda0: points.iter().map(|b| b.lambda0).collect(),
        lambda1: points.iter().map(|b| b.lambda1).collect(),
        surface,
    })
}

/// Feasibility surface: closed form for `α = 1/2` without nominals, the
/// general boundary otherwise.
pub fn eps_surface(alpha: f64, n: usize, nominals: Option<(&NominalPair, f64)>) -> Result<FeasibilityReport> {
    match nominals {
        None if alpha == 0.5 => hellinger_report(None, n),
        None => Err(Error::InvalidArgument(
            "the closed-form surface exists only for alpha = 0.5; pass nominals for other alpha".into(),
        )),
        Some((pair, rho)) if alpha == 0.5 && rho == 1.0 => {
            let a = bhattacharyya_values(pair.f0(), pair.f1(), pair.grid())?;
            hellinger_report(Some(a), n)
        }
        Some((pair, rho)) => general_report(pair, alpha, rho, n),
    }
}
