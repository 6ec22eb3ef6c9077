//! Brute-force checks on small binned problems.
//!
//! Nothing here touches thresholds, `k` or `z`. The ball maximizer is derived
//! directly from the Lagrangian of `max ⟨w, g⟩` subject to `Σ g = 1` and
//! `D(g, f; α) ≤ ε`, and the saddle point is approached by projected descent
//! on the worst-case error probability.

use serde::Serialize;

use crate::density::{NominalPair, QuadratureGrid};
use crate::divergence::{check_alpha, divergence_values, DivergenceSpec};
use crate::error::{Error, Result};
use crate::evaluation::priors;
use crate::numeric::{bisect, log_add_exp};

/// Tolerance on the active divergence constraint.
const BALL_TOL: f64 = 1e-8;

/// Initial range of `ln s` searched for the multiplier spread.
const LOG_SPREAD_MAX: f64 = 60.0;

/// Largest `ln s` tried before giving up.
const LOG_SPREAD_LIMIT: f64 = 7680.0;

/// A finitely supported binary test problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteProblem {
    pub m: usize,
    pub f0: Vec<f64>,
    pub f1: Vec<f64>,
    pub alpha: f64,
    pub rho: f64,
    pub eps0: f64,
    pub eps1: f64,
}

impl DiscreteProblem {
    pub fn new(f0: Vec<f64>, f1: Vec<f64>, spec: &DivergenceSpec) -> Result<Self> {
        if f0.len() != f1.len() {
            return Err(Error::LengthMismatch {
                expected: f0.len(),
                got: f1.len(),
            });
        }
        for v in [&f0, &f1] {
            let sum: f64 = v.iter().sum();
            if v.iter().any(|&x| !(x >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(
                    "bin vectors must be nonnegative and sum to one".into(),
                ));
            }
        }
        Ok(Self {
            m: f0.len(),
            f0,
            f1,
            alpha: spec.alpha,
            rho: spec.rho,
            eps0: spec.eps0,
            eps1: spec.eps1,
        })
    }

    /// The bins as a nominal pair on the counting measure.
    pub fn as_nominals(&self) -> Result<NominalPair> {
        NominalPair::from_values(QuadratureGrid::counting(self.m)?, self.f0.clone(), self.f1.clone())
    }

    pub fn spec(&self) -> Result<DivergenceSpec> {
        DivergenceSpec::new(self.alpha, self.rho, self.eps0, self.eps1)
    }

    /// `P_E = P(H0) ⟨δ, g0⟩ + P(H1) ⟨1 − δ, g1⟩`.
    pub fn error(&self, rule: &[f64], g0: &[f64], g1: &[f64]) -> f64 {
        let (pi0, pi1) = priors(self.rho);
        let fa: f64 = rule.iter().zip(g0).map(|(d, g)| d * g).sum();
        let miss: f64 = rule.iter().zip(g1).map(|(d, g)| (1.0 - d) * g).sum();
        pi0 * fa + pi1 * miss
    }
}

/// Cumulative trapezoid integral of `values` at every node.
fn cumulative(grid: &QuadratureGrid, values: &[f64]) -> Vec<f64> {
    let y = grid.points();
    let mut out = vec![0.0; y.len()];
    for i in 1..y.len() {
        out[i] = out[i - 1] + 0.5 * (y[i] - y[i - 1]) * (values[i] + values[i - 1]);
    }
    out
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    let j = xs.partition_point(|&p| p <= x).clamp(1, n - 1);
    let t = ((x - xs[j - 1]) / (xs[j] - xs[j - 1])).clamp(0.0, 1.0);
    ys[j - 1] + t * (ys[j] - ys[j - 1])
}

/// Bins both nominals into `m` equal-width cells spanning the grid.
pub fn discretize(nominals: &NominalPair, spec: &DivergenceSpec, m: usize) -> Result<DiscreteProblem> {
    if m < 8 {
        return Err(Error::InvalidArgument(format!("need at least 8 bins, got {m}")));
    }
    let grid = nominals.grid();
    let (lo, hi) = grid.bounds();
    let edges: Vec<f64> = (0..=m).map(|j| lo + (hi - lo) * j as f64 / m as f64).collect();
    let bin = |f: &[f64]| -> Vec<f64> {
        let cdf = cumulative(grid, f);
        let at: Vec<f64> = edges.iter().map(|&e| interp(grid.points(), &cdf, e)).collect();
        let masses: Vec<f64> = at.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect();
        let total: f64 = masses.iter().sum();
        masses.into_iter().map(|v| v / total).collect()
    };
    DiscreteProblem::new(bin(nominals.f0()), bin(nominals.f1()), spec)
}

/// Range of the weights over atoms where `f` carries mass; no `g` in the
/// family puts mass elsewhere.
fn support_range(weights: &[f64], f: &[f64]) -> (f64, f64) {
    weights
        .iter()
        .zip(f)
        .filter(|(_, &fi)| fi > 0.0)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (&w, _)| (a.min(w), b.max(w)))
}

/// Stationary point of the Lagrangian for a given spread `s > 0`.
///
/// With `p = α − 1`, the stationarity condition `w_i − μ = λ (g_i/f_i)^p/(1−α)`
/// gives `g ∝ f |w − μ|^{1/p}`, the multiplier `λ` being absorbed by the
/// normalization. `μ` sits `span/s` beyond `max w`: below it for `α > 1`,
/// where cells with `w ≤ μ` get zero mass, above it otherwise.
///
/// Takes `ln s` so that very large spreads stay representable.
fn stationary(weights: &[f64], f: &[f64], alpha: f64, ln_s: f64) -> Vec<f64> {
    let (wmin, wmax) = support_range(weights, f);
    let span = wmax - wmin;
    let p = alpha - 1.0;
    let logs: Vec<f64> = weights
        .iter()
        .zip(f)
        .map(|(&w, &fi)| {
            if fi <= 0.0 {
                return f64::NEG_INFINITY;
            }
            // ln of the distance to μ in units of span / s, exact at the top.
            let gap = (wmax - w) / span;
            let ln_d = if gap <= 0.0 {
                0.0
            } else if alpha > 1.0 {
                let x = (ln_s + gap.ln()).exp();
                if x >= 1.0 {
                    return f64::NEG_INFINITY;
                }
                (-x).ln_1p()
            } else {
                log_add_exp(0.0, ln_s + gap.ln())
            };
            fi.ln() + ln_d / p
        })
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = logs.iter().map(|&v| (v - top).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Maximizer of `⟨weights, g⟩` over the probability simplex intersected with
/// the ball `D(g, f; α) ≤ ε`, with the constraint active.
pub fn maximize_over_ball(weights: &[f64], f: &[f64], alpha: f64, eps: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    if weights.len() != f.len() {
        return Err(Error::LengthMismatch {
            expected: f.len(),
            got: weights.len(),
        });
    }
    if !(eps >= 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be >= 0, got {eps}")));
    }
    let (wmin, wmax) = support_range(weights, f);
    if eps == 0.0 || wmax - wmin <= 0.0 {
        return Ok(f.to_vec());
    }
    let grid = QuadratureGrid::counting(f.len())?;
    let div = |ln_s: f64| {
        let g = stationary(weights, f, alpha, ln_s);
        divergence_values(&g, f, alpha, &grid).map_or(f64::NAN, |d| d - eps)
    };
    // Small |α − 1| and tiny f at the top weight both need very wide spreads.
    let mut hi = LOG_SPREAD_MAX;
    while div(hi) < 0.0 {
        if hi >= LOG_SPREAD_LIMIT {
            return Err(Error::BallConstraint(format!(
                "divergence stays below {eps} along the whole multiplier path; the constraint cannot be activated"
            )));
        }
        hi *= 2.0;
    }
    let ln_s = bisect(div, -LOG_SPREAD_MAX, hi, 1e-13, 400)
        .ok_or_else(|| Error::BallConstraint("multiplier bisection lost its bracket".into()))?;
    let g = stationary(weights, f, alpha, ln_s);
    let d = divergence_values(&g, f, alpha, &grid)?;
    if d > eps + BALL_TOL {
        return Err(Error::BallConstraint(format!(
            "achieved divergence {d} exceeds the radius {eps}"
        )));
    }
    Ok(g)
}

/// Outcome of [`alternating_saddle`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SaddleResult {
    pub rule: Vec<f64>,
    pub g0: Vec<f64>,
    pub g1: Vec<f64>,
    /// Worst-case error probability after each accepted rule update.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Worst-case densities for a rule and the resulting error probability.
fn worst_case(problem: &DiscreteProblem, rule: &[f64]) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let miss: Vec<f64> = rule.iter().map(|d| 1.0 - d).collect();
    let g0 = maximize_over_ball(rule, &problem.f0, problem.alpha, problem.eps0)?;
    let g1 = maximize_over_ball(&miss, &problem.f1, problem.alpha, problem.eps1)?;
    let pe = problem.error(rule, &g0, &g1);
    Ok((g0, g1, pe))
}

/// Alternates worst-case densities for the current rule with a projected
/// descent step on the rule.
///
/// The step moves `δ` against `P(H0) g0 − P(H1) g1`, i.e. toward the
/// likelihood ratio test of `g1/g0` at `ρ`, and clips to `[0, 1]`, so cells
/// where the two weighted densities balance keep an interior randomization.
/// Steps are accepted only if the worst-case error does not increase.
pub fn alternating_saddle(problem: &DiscreteProblem, iters: usize, tol: f64) -> Result<SaddleResult> {
    let (pi0, pi1) = priors(problem.rho);
    let mut rule: Vec<f64> = problem
        .f0
        .iter()
        .zip(&problem.f1)
        .map(|(&a, &b)| {
            let (u, v) = (pi1 * b, pi0 * a);
            if u > v {
                1.0
            } else if u < v {
                0.0
            } else {
                0.5
            }
        })
        .collect();
    let (mut g0, mut g1, mut pe) = worst_case(problem, &rule)?;
    let mut trace = vec![pe];
    let mut step = 1.0 / problem.f0.iter().chain(&problem.f1).fold(0.0f64, |m, &v| m.max(v));
    let mut stall = 0;
    for it in 1..=iters {
        let candidate: Vec<f64> = rule
            .iter()
            .enumerate()
            .map(|(i, &d)| (d - step * (pi0 * g0[i] - pi1 * g1[i])).clamp(0.0, 1.0))
            .collect();
        let moved = candidate.iter().zip(&rule).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if moved == 0.0 {
            return Ok(SaddleResult { rule, g0, g1, trace, iterations: it, converged: true });
        }
        let (c0, c1, cpe) = worst_case(problem, &candidate)?;
        if cpe <= pe {
            let gain = pe - cpe;
            rule = candidate;
            (g0, g1, pe) = (c0, c1, cpe);
            trace.push(pe);
            step *= 1.5;
            stall = if gain < tol { stall + 1 } else { 0 };
            if stall >= 5 {
                return Ok(SaddleResult { rule, g0, g1, trace, iterations: it, converged: true });
            }
        } else {
            step *= 0.5;
            if step < 1e-12 {
                return Ok(SaddleResult { rule, g0, g1, trace, iterations: it, converged: true });
            }
        }
    }
    Ok(SaddleResult {
        rule,
        g0,
        g1,
        trace,
        iterations: iters,
        converged: false,
    })
}
