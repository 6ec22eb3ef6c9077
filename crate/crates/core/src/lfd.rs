//! Least favorable densities, the robust decision rule and the robust
//! likelihood ratio for α-divergence uncertainty balls.
//!
//! The design reduces to two unknown thresholds `0 < l_l ≤ 1 ≤ l_u` on the
//! nominal likelihood ratio `l = f1/f0`. Observations split into three regions
//! ```text
//! I1: l < ρ l_l        I2: ρ l_l ≤ l ≤ ρ l_u        I3: l > ρ l_u
//! ```
//! On `I1` and `I3` the least favorable densities are scaled nominals; on `I2`
//! they mix both nominals and the robust likelihood ratio is flat at `ρ`.
//! Region integrals assign each grid node to a single region and use the
//! node's quadrature weight. Every integrand is continuous across region
//! boundaries, so this keeps second-order accuracy while making the tabulated
//! outputs satisfy the discrete constraints exactly.

use serde::Serialize;

use crate::density::NominalPair;
use crate::divergence::{check_alpha, divergence_values, x_of, DivergenceSpec};
use crate::error::{Error, Result};
use crate::limits;
use crate::numeric::{bisect, solve2, solve_dense};

/// Randomization used on the null set `{l = ρ}` by the nominal test, and by
/// the robust rule when the thresholds coincide.
pub const TIE_RANDOMIZATION: f64 = 0.5;

/// Tolerance for the symmetric fast path's mirror-symmetry precondition.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Thresholds are kept inside `[e^-LOG_BOUND, e^LOG_BOUND]` even when the
/// nominal likelihood ratio range is wider.
const LOG_BOUND: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Region {
    Lower,
    Middle,
    Upper,
}

impl Region {
    /// 1, 2 or 3.
    pub fn label(self) -> u8 {
        match self {
            Region::Lower => 1,
            Region::Middle => 2,
            Region::Upper => 3,
        }
    }

    fn index(self) -> usize {
        self.label() as usize - 1
    }
}

/// Lower and upper likelihood ratio thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdPair {
    pub lower: f64,
    pub upper: f64,
}

impl ThresholdPair {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower > 0.0 && lower <= 1.0 && upper >= 1.0 && upper.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "thresholds must satisfy 0 < l_l <= 1 <= l_u < inf, got ({lower}, {upper})"
            )));
        }
        Ok(Self { lower, upper })
    }

    fn from_logs(u: f64, v: f64) -> Self {
        Self {
            lower: u.exp(),
            upper: v.exp(),
        }
    }

    fn is_degenerate(&self) -> bool {
        self.lower == self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Target Euclidean norm of the two residuals.
    pub root_tol: f64,
    pub max_iter: usize,
    /// Growth factor when bracketing one-dimensional roots.
    pub bracket_expand: f64,
    /// Reject radii outside the feasibility boundary before solving.
    pub check_feasibility: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            root_tol: 1e-10,
            max_iter: 200,
            bracket_expand: 2.0,
            check_feasibility: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveMethod {
    /// Zero radii: the nominal test.
    Nominal,
    Newton,
    NestedBisection,
    Symmetric,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub method: SolveMethod,
    pub iterations: usize,
    pub warnings: Vec<String>,
    /// `(y_l*, y_u*)` region boundaries on the observation axis, reported by
    /// the symmetric fast path.
    pub symmetric_bounds: Option<(f64, f64)>,
}

/// Nominal masses of the three regions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionMasses {
    pub f0: [f64; 3],
    pub f1: [f64; 3],
}

/// A solved robust test tabulated on the nominal grid.
#[derive(Debug, Clone)]
pub struct RobustSolution {
    pub spec: DivergenceSpec,
    pub thresholds: ThresholdPair,
    pub k: f64,
    pub z: f64,
    pub nominals: NominalPair,
    pub regions: Vec<Region>,
    pub g0_hat: Vec<f64>,
    pub g1_hat: Vec<f64>,
    pub delta_hat: Vec<f64>,
    pub l_hat: Vec<f64>,
    pub achieved_eps0: f64,
    pub achieved_eps1: f64,
    pub residual_norm: f64,
    pub region_masses: RegionMasses,
    pub diagnostics: Diagnostics,
}

impl RobustSolution {
    /// Robust decision rule at nominal likelihood ratio `l`.
    pub fn rule(&self, l: f64) -> f64 {
        robust_rule(l, self)
    }

    /// Robust likelihood ratio at nominal likelihood ratio `l`.
    pub fn lr(&self, l: f64) -> f64 {
        robust_lr(l, self)
    }

    /// Least favorable density under H0 as a tabulated model.
    pub fn g0_model(&self) -> Result<crate::DensityModel> {
        crate::DensityModel::from_grid(self.nominals.grid(), &self.g0_hat)
    }

    /// Least favorable density under H1 as a tabulated model.
    pub fn g1_model(&self) -> Result<crate::DensityModel> {
        crate::DensityModel::from_grid(self.nominals.grid(), &self.g1_hat)
    }
}

/// Region of a single likelihood ratio value; ties go to `I2`.
pub fn region_of(l: f64, rho: f64, t: ThresholdPair) -> Region {
    if l < rho * t.lower {
        Region::Lower
    } else if l > rho * t.upper {
        Region::Upper
    } else {
        Region::Middle
    }
}

pub fn partition(l_values: &[f64], rho: f64, t: ThresholdPair) -> Vec<Region> {
    l_values.iter().map(|&l| region_of(l, rho, t)).collect()
}

/// `[k^p (l_l^p − l_u^p) / (l_l^p − (k l_u)^p + (k^p − 1)(l/ρ)^p)]^{1/p}`, `p = α − 1`.
///
/// Equals 1 at `l = ρ l_l` and `k` at `l = ρ l_u`.
fn phi_scaled(l_over_rho: f64, t: ThresholdPair, k: f64, alpha: f64) -> Result<f64> {
    if t.is_degenerate() {
        return Ok(1.0);
    }
    let p = alpha - 1.0;
    let kp = k.powf(p);
    let llp = t.lower.powf(p);
    let num = kp * (llp - t.upper.powf(p));
    let den = llp - (k * t.upper).powf(p) + (kp - 1.0) * l_over_rho.powf(p);
    let ratio = num / den;
    if !(ratio.is_finite() && ratio > 0.0) {
        return Err(Error::InfeasibleForm(format!(
            "bracket {ratio:e} at l/rho = {l_over_rho}, k = {k}, thresholds ({}, {})",
            t.lower, t.upper
        )));
    }
    Ok(ratio.powf(1.0 / p))
}

/// `Φ1(l)`; continuous on `I2` with `z Φ1 = 1` at `ρ l_l` and `z Φ1 = k` at `ρ l_u`.
pub fn phi1(l: f64, t: ThresholdPair, alpha: f64, rho: f64, k: f64, z: f64) -> Result<f64> {
    Ok(phi_scaled(l / rho, t, k, alpha)? / z)
}

/// `Φ0 = Φ1 l / ρ`.
pub fn phi0(l: f64, t: ThresholdPair, alpha: f64, rho: f64, k: f64, z: f64) -> Result<f64> {
    Ok(phi1(l, t, alpha, rho, k, z)? * l / rho)
}

/// Robust decision rule at `l` for given thresholds and `k`.
pub fn rule_value(l: f64, t: ThresholdPair, k: f64, alpha: f64, rho: f64) -> f64 {
    match region_of(l, rho, t) {
        Region::Lower => 0.0,
        Region::Upper => 1.0,
        Region::Middle => {
            if t.is_degenerate() {
                return TIE_RANDOMIZATION;
            }
            if l == rho * t.lower {
                return 0.0;
            }
            if l == rho * t.upper {
                return 1.0;
            }
            let p = alpha - 1.0;
            let q = (rho * t.lower / l).powf(p);
            let den = q - (k * t.upper * rho / l).powf(p) + k.powf(p) - 1.0;
            ((q - 1.0) / den).clamp(0.0, 1.0)
        }
    }
}

pub fn robust_rule(l: f64, solution: &RobustSolution) -> f64 {
    rule_value(
        l,
        solution.thresholds,
        solution.k,
        solution.spec.alpha,
        solution.spec.rho,
    )
}

/// `l / l_l` on `I1`, `ρ` on `I2`, `l / l_u` on `I3`.
pub fn lr_value(l: f64, t: ThresholdPair, rho: f64) -> f64 {
    match region_of(l, rho, t) {
        Region::Lower => l / t.lower,
        Region::Middle => rho,
        Region::Upper => l / t.upper,
    }
}

pub fn robust_lr(l: f64, solution: &RobustSolution) -> f64 {
    lr_value(l, solution.thresholds, solution.spec.rho)
}

/// `a · e^{log_factor}` that stays zero for `a = 0`.
fn scaled(a: f64, log_factor: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a * log_factor.exp()
    }
}

/// Region bookkeeping at a candidate threshold pair.
struct Structure {
    t: ThresholdPair,
    regions: Vec<Region>,
    /// `∫_{I1} f0`, `∫_{I1} f1`, `∫_{I3} f0`, `∫_{I3} f1`.
    a0: f64,
    a1: f64,
    c0: f64,
    c1: f64,
    k: f64,
    z: f64,
    /// Scaled bracket `z Φ1` on `I2` nodes, zero elsewhere.
    phi: Vec<f64>,
}

struct Problem<'a> {
    pair: &'a NominalPair,
    alpha: f64,
    rho: f64,
    x0: f64,
    x1: f64,
    expand: f64,
}

impl<'a> Problem<'a> {
    fn new(pair: &'a NominalPair, spec: &DivergenceSpec, expand: f64) -> Self {
        Self {
            pair,
            alpha: spec.alpha,
            rho: spec.rho,
            x0: spec.x0(),
            x1: spec.x1(),
            expand,
        }
    }

    fn middle_sum(&self, regions: &[Region], t: ThresholdPair, k: f64) -> Result<f64> {
        let w = self.pair.grid().weights();
        let (l, f1) = (self.pair.l(), self.pair.f1());
        let mut total = 0.0;
        for i in 0..regions.len() {
            if regions[i] == Region::Middle && f1[i] > 0.0 {
                total += w[i] * phi_scaled(l[i] / self.rho, t, k, self.alpha)? * f1[i];
            }
        }
        Ok(total)
    }

    /// `k` balances the normalizations of both least favorable densities.
    ///
    /// With `N = ∫_{I1}(l − l_l) f0` and `D = ∫_{I3}(l_u − l) f0` it solves
    /// `N − k D + (1 − 1/ρ) ∫_{I2} z Φ1(k) f1 = 0`, which is `k = N / D` at `ρ = 1`.
    fn k_for(&self, regions: &[Region], t: ThresholdPair) -> Result<f64> {
        let w = self.pair.grid().weights();
        let (f0, f1) = (self.pair.f0(), self.pair.f1());
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..regions.len() {
            match regions[i] {
                Region::Lower => num += w[i] * (f1[i] - t.lower * f0[i]),
                Region::Upper => den += w[i] * (t.upper * f0[i] - f1[i]),
                Region::Middle => {}
            }
        }
        let literal = num / den;
        if self.rho == 1.0 {
            if !(literal.is_finite() && literal > 0.0) {
                return Err(Error::DegenerateRegion(format!(
                    "k = {num:e} / {den:e} is not positive (I1 or I3 carries no mass at thresholds ({}, {}))",
                    t.lower, t.upper
                )));
            }
            return Ok(literal);
        }
        if t.is_degenerate() {
            if literal.is_finite() && literal > 0.0 {
                return Ok(literal);
            }
            return Err(Error::DegenerateRegion(format!(
                "k = {num:e} / {den:e} is not positive at coincident thresholds"
            )));
        }
        let drift = 1.0 - 1.0 / self.rho;
        let balance = |s: f64| -> f64 {
            let k = s.exp();
            match self.middle_sum(regions, t, k) {
                Ok(j) => num - k * den + drift * j,
                Err(_) => f64::NAN,
            }
        };
        let start = if literal.is_finite() && literal > 0.0 {
            literal.ln()
        } else {
            0.0
        };
        let step = self.expand.max(1.0 + 1e-3).ln();
        let h0 = balance(start);
        if h0 == 0.0 {
            return Ok(start.exp());
        }
        let mut bracket = None;
        for j in 1..=64 {
            let reach = step * j as f64;
            for s in [start - reach, start + reach] {
                let h = balance(s);
                if h.is_finite() && h0.is_finite() && h.signum() != h0.signum() {
                    bracket = Some(if s < start { (s, start) } else { (start, s) });
                    break;
                }
            }
            if bracket.is_some() {
                break;
            }
        }
        let (lo, hi) = bracket.ok_or_else(|| {
            Error::DegenerateRegion(format!(
                "no normalizing k at thresholds ({}, {}): I3 mass balance {den:e}",
                t.lower, t.upper
            ))
        })?;
        let s = bisect(balance, lo, hi, 1e-15, 200).ok_or_else(|| {
            Error::DegenerateRegion("normalizing k could not be bracketed".into())
        })?;
        Ok(s.exp())
    }

    fn structure(&self, t: ThresholdPair) -> Result<Structure> {
        let regions = partition(self.pair.l(), self.rho, t);
        let w = self.pair.grid().weights();
        let (f0, f1) = (self.pair.f0(), self.pair.f1());
        let (mut a0, mut a1, mut c0, mut c1) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..regions.len() {
            match regions[i] {
                Region::Lower => {
                    a0 += w[i] * f0[i];
                    a1 += w[i] * f1[i];
                }
                Region::Upper => {
                    c0 += w[i] * f0[i];
                    c1 += w[i] * f1[i];
                }
                Region::Middle => {}
            }
        }
        let k = self.k_for(&regions, t)?;
        let l = self.pair.l();
        let mut phi = vec![0.0; regions.len()];
        let mut middle = 0.0;
        for i in 0..regions.len() {
            if regions[i] == Region::Middle {
                phi[i] = phi_scaled(l[i] / self.rho, t, k, self.alpha)?;
                if f1[i] > 0.0 {
                    middle += w[i] * phi[i] * f1[i];
                }
            }
        }
        let z = a1 + k * c1 + middle;
        if !(z.is_finite() && z > 0.0) {
            return Err(Error::InfeasibleForm(format!("normalizer z = {z}")));
        }
        Ok(Structure {
            t,
            regions,
            a0,
            a1,
            c0,
            c1,
            k,
            z,
            phi,
        })
    }

    /// Divergence-constraint left sides minus `x(α, ε_i)`.
    fn residuals_of(&self, s: &Structure) -> [f64; 2] {
        let w = self.pair.grid().weights();
        let (f0, f1, l) = (self.pair.f0(), self.pair.f1(), self.pair.l());
        let alpha = self.alpha;
        let lz = s.z.ln();
        let mut lhs0 = scaled(s.a0, alpha * (s.t.lower.ln() - lz))
            + scaled(s.c0, alpha * ((s.k * s.t.upper).ln() - lz));
        let mut lhs1 = scaled(s.a1, -alpha * lz) + scaled(s.c1, alpha * (s.k.ln() - lz));
        for i in 0..s.regions.len() {
            if s.regions[i] != Region::Middle {
                continue;
            }
            let lp = s.phi[i].ln() - lz;
            if f0[i] > 0.0 {
                lhs0 += w[i] * f0[i] * (alpha * (lp + (l[i] / self.rho).ln())).exp();
            }
            if f1[i] > 0.0 {
                lhs1 += w[i] * f1[i] * (alpha * lp).exp();
            }
        }
        [lhs0 - self.x0, lhs1 - self.x1]
    }

    fn eval(&self, u: f64, v: f64) -> Option<[f64; 2]> {
        let s = self.structure(ThresholdPair::from_logs(u, v)).ok()?;
        let r = self.residuals_of(&s);
        (r[0].is_finite() && r[1].is_finite()).then_some(r)
    }

    /// Box for `(ln l_l, ln l_u)`.
    fn log_box(&self) -> (f64, f64) {
        let (lo, hi) = self.pair.lr_range();
        let u_min = if lo > 0.0 { (lo / self.rho).ln() } else { -LOG_BOUND };
        let v_max = if hi.is_finite() { (hi / self.rho).ln() } else { LOG_BOUND };
        (u_min.clamp(-LOG_BOUND, 0.0), v_max.clamp(0.0, LOG_BOUND))
    }
}

fn norm2(r: [f64; 2]) -> f64 {
    r[0].hypot(r[1])
}

/// Newton iteration in `(u, v) = (ln l_l, ln l_u)` with a forward-difference
/// Jacobian, backtracking and clamping to the box.
fn newton(
    problem: &Problem,
    start: (f64, f64),
    bounds: (f64, f64),
    config: &SolverConfig,
) -> (f64, f64, f64, usize) {
    let (u_min, v_max) = bounds;
    let clamp = |u: f64, v: f64| (u.clamp(u_min, 0.0), v.clamp(0.0, v_max));
    let (mut u, mut v) = start;
    let Some(mut r) = problem.eval(u, v) else {
        return (u, v, f64::INFINITY, 0);
    };
    let mut norm = norm2(r);
    let h = 1e-7;
    for iter in 0..config.max_iter {
        if norm < config.root_tol {
            return (u, v, norm, iter);
        }
        let hu = if u + h > 0.0 { -h } else { h };
        let hv = if v + h > v_max { -h } else { h };
        let (Some(ru), Some(rv)) = (problem.eval(u + hu, v), problem.eval(u, v + hv)) else {
            return (u, v, norm, iter);
        };
        let jac = [
            [(ru[0] - r[0]) / hu, (rv[0] - r[0]) / hv],
            [(ru[1] - r[1]) / hu, (rv[1] - r[1]) / hv],
        ];
        let step = solve2(jac, [-r[0], -r[1]]).unwrap_or_else(|| {
            // Singular Jacobian: fall back to a gradient step.
            let g = [
                jac[0][0] * r[0] + jac[1][0] * r[1],
                jac[0][1] * r[0] + jac[1][1] * r[1],
            ];
            let gn = g[0].hypot(g[1]).max(f64::MIN_POSITIVE);
            [-g[0] / gn * 0.1, -g[1] / gn * 0.1]
        });
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-12 {
            let (nu, nv) = clamp(u + t * step[0], v + t * step[1]);
            if let Some(nr) = problem.eval(nu, nv) {
                let nn = norm2(nr);
                if nn < norm {
                    u = nu;
                    v = nv;
                    r = nr;
                    norm = nn;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            return (u, v, norm, iter + 1);
        }
    }
    (u, v, norm, config.max_iter)
}

/// Scan points `u_min (i/16)²` and `v_max (j/16)²`.
fn scan_start(problem: &Problem, bounds: (f64, f64)) -> Option<(f64, f64)> {
    let (u_min, v_max) = bounds;
    let mut best: Option<(f64, f64, f64)> = None;
    for i in 1..=16 {
        let u = u_min * (i as f64 / 16.0).powi(2);
        for j in 1..=16 {
            let v = v_max * (j as f64 / 16.0).powi(2);
            if let Some(r) = problem.eval(u, v) {
                let n = norm2(r);
                if best.is_none_or(|b| n < b.2) {
                    best = Some((u, v, n));
                }
            }
        }
    }
    best.map(|(u, v, _)| (u, v))
}

/// Roots of `f` at sign changes along quadratically spaced points of
/// `[0, end]`, refined by bisection, nearest to zero first.
fn scan_roots<F: FnMut(f64) -> f64>(mut f: F, end: f64, count: usize, first_only: bool) -> Vec<f64> {
    let mut roots = Vec::new();
    let mut prev_x = 0.0;
    let mut prev = f(0.0);
    for j in 1..=count {
        let x = end * (j as f64 / count as f64).powi(2);
        let val = f(x);
        if prev.is_finite() && val.is_finite() && prev.signum() != val.signum() {
            if let Some(r) = bisect(&mut f, prev_x, x, 1e-15, 200) {
                roots.push(r);
                if first_only {
                    break;
                }
            }
        }
        prev_x = x;
        prev = val;
    }
    roots
}

fn scan_root<F: FnMut(f64) -> f64>(f: F, end: f64, count: usize) -> Option<f64> {
    scan_roots(f, end, count, true).into_iter().next()
}

/// Fallback: bisect `r1` over `ln l_u`, with `ln l_l` solving `r0 = 0` inside.
///
/// The inner root may jump between branches as `l_u` varies, so every outer
/// sign change is tried and the candidate with the smallest residual wins.
fn nested_bisection(problem: &Problem, bounds: (f64, f64)) -> Option<(f64, f64)> {
    let (u_min, v_max) = bounds;
    let inner = |v: f64| -> Option<f64> {
        scan_root(
            |s| problem.eval(-s, v).map_or(f64::NAN, |r| r[0]),
            -u_min,
            48,
        )
        .map(|s| -s)
    };
    let outer = |v: f64| {
        inner(v)
            .and_then(|u| problem.eval(u, v))
            .map_or(f64::NAN, |r| r[1])
    };
    scan_roots(outer, v_max, 48, false)
        .into_iter()
        .filter_map(|v| {
            let u = inner(v)?;
            Some((u, v, norm2(problem.eval(u, v)?)))
        })
        .min_by(|a, b| a.2.total_cmp(&b.2))
        .map(|(u, v, _)| (u, v))
}

fn zero_radius_solution(pair: &NominalPair, spec: DivergenceSpec) -> RobustSolution {
    let t = ThresholdPair {
        lower: 1.0,
        upper: 1.0,
    };
    let regions = partition(pair.l(), spec.rho, t);
    let masses = region_masses(pair, &regions);
    RobustSolution {
        spec,
        thresholds: t,
        k: 1.0,
        z: 1.0,
        regions: regions.clone(),
        g0_hat: pair.f0().to_vec(),
        g1_hat: pair.f1().to_vec(),
        delta_hat: pair
            .l()
            .iter()
            .map(|&l| rule_value(l, t, 1.0, spec.alpha, spec.rho))
            .collect(),
        l_hat: pair.l().iter().map(|&l| lr_value(l, t, spec.rho)).collect(),
        achieved_eps0: 0.0,
        achieved_eps1: 0.0,
        residual_norm: 0.0,
        region_masses: masses,
        diagnostics: Diagnostics {
            method: SolveMethod::Nominal,
            iterations: 0,
            warnings: Vec::new(),
            symmetric_bounds: None,
        },
        nominals: pair.clone(),
    }
}

fn region_masses(pair: &NominalPair, regions: &[Region]) -> RegionMasses {
    let w = pair.grid().weights();
    let mut masses = RegionMasses {
        f0: [0.0; 3],
        f1: [0.0; 3],
    };
    for (i, r) in regions.iter().enumerate() {
        masses.f0[r.index()] += w[i] * pair.f0()[i];
        masses.f1[r.index()] += w[i] * pair.f1()[i];
    }
    masses
}

fn materialize(
    problem: &Problem,
    spec: DivergenceSpec,
    s: Structure,
    method: SolveMethod,
    iterations: usize,
) -> Result<RobustSolution> {
    let pair = problem.pair;
    let (f0, f1, l) = (pair.f0(), pair.f1(), pair.l());
    let (t, k, z, rho) = (s.t, s.k, s.z, spec.rho);
    let n = pair.len();
    let mut g0 = vec![0.0; n];
    let mut g1 = vec![0.0; n];
    for i in 0..n {
        match s.regions[i] {
            Region::Lower => {
                g0[i] = t.lower / z * f0[i];
                g1[i] = f1[i] / z;
            }
            Region::Middle => {
                g0[i] = s.phi[i] * f1[i] / (rho * z);
                g1[i] = s.phi[i] * f1[i] / z;
            }
            Region::Upper => {
                g0[i] = k * t.upper / z * f0[i];
                g1[i] = k / z * f1[i];
            }
        }
    }
    let mut warnings = Vec::new();
    for (name, g) in [("g0_hat", &g0), ("g1_hat", &g1)] {
        let bad = g.iter().filter(|v| !(v.is_finite() && **v >= 0.0)).count();
        if bad > 0 {
            warnings.push(format!("{name} is negative or nonfinite at {bad} grid points"));
        }
    }
    let grid = pair.grid();
    let achieved_eps0 = divergence_values(&g0, f0, spec.alpha, grid)?;
    let achieved_eps1 = divergence_values(&g1, f1, spec.alpha, grid)?;
    let residual_norm = norm2(problem.residuals_of(&s));
    let masses = region_masses(pair, &s.regions);
    if masses.f0[0] + masses.f1[0] == 0.0 || masses.f0[2] + masses.f1[2] == 0.0 {
        warnings.push("a scaled region (I1 or I3) carries no nominal mass".into());
    }
    Ok(RobustSolution {
        spec,
        thresholds: t,
        k,
        z,
        delta_hat: l.iter().map(|&li| rule_value(li, t, k, spec.alpha, rho)).collect(),
        l_hat: l.iter().map(|&li| lr_value(li, t, rho)).collect(),
        regions: s.regions,
        g0_hat: g0,
        g1_hat: g1,
        achieved_eps0,
        achieved_eps1,
        residual_norm,
        region_masses: masses,
        diagnostics: Diagnostics {
            method,
            iterations,
            warnings,
            symmetric_bounds: None,
        },
        nominals: pair.clone(),
    })
}

/// `k` at the given thresholds.
pub fn k_factor(t: ThresholdPair, nominals: &NominalPair, alpha: f64, rho: f64) -> Result<f64> {
    let spec = DivergenceSpec::new(alpha, rho, 0.0, 0.0)?;
    let problem = Problem::new(nominals, &spec, 2.0);
    problem.k_for(&partition(nominals.l(), rho, t), t)
}

/// Normalizer `z` at the given thresholds.
pub fn z_norm(t: ThresholdPair, alpha: f64, rho: f64, nominals: &NominalPair) -> Result<f64> {
    let spec = DivergenceSpec::new(alpha, rho, 0.0, 0.0)?;
    Ok(Problem::new(nominals, &spec, 2.0).structure(t)?.z)
}

/// Residuals of the two divergence constraints at `t`.
pub fn residuals(t: ThresholdPair, spec: &DivergenceSpec, nominals: &NominalPair) -> Result<(f64, f64)> {
    let problem = Problem::new(nominals, spec, 2.0);
    let r = problem.residuals_of(&problem.structure(t)?);
    Ok((r[0], r[1]))
}

/// Solves for the thresholds and materializes the robust test.
pub fn solve_thresholds(
    spec: &DivergenceSpec,
    nominals: &NominalPair,
    config: &SolverConfig,
) -> Result<RobustSolution> {
    check_alpha(spec.alpha)?;
    if spec.eps0 == 0.0 && spec.eps1 == 0.0 {
        return Ok(zero_radius_solution(nominals, *spec));
    }
    let mut warnings = Vec::new();
    if config.check_feasibility {
        let check = limits::validate_eps(nominals, spec)?;
        if !check.feasible {
            if spec.rho == 1.0 {
                return Err(Error::Infeasible {
                    eps0: spec.eps0,
                    eps1: spec.eps1,
                    margin: check.margin,
                });
            }
            warnings.push(format!(
                "radii lie outside the rho-independent feasibility boundary (margin {:.3e})",
                check.margin
            ));
        }
    }
    let problem = Problem::new(nominals, spec, config.bracket_expand);
    let bounds = problem.log_box();
    let mut best = (0.0, 0.0, f64::INFINITY, 0);
    if let Some(start) = scan_start(&problem, bounds) {
        best = newton(&problem, start, bounds, config);
    }
    let mut method = SolveMethod::Newton;
    if !(best.2 < config.root_tol) {
        if let Some((u, v)) = nested_bisection(&problem, bounds) {
            let polished = newton(&problem, (u, v), bounds, config);
            if polished.2 < best.2 {
                best = (polished.0, polished.1, polished.2, best.3 + polished.3);
                method = SolveMethod::NestedBisection;
            }
        }
    }
    let (u, v, norm, iterations) = best;
    if !(norm < config.root_tol) {
        return Err(Error::NonConvergence {
            iterations,
            residual: norm,
            lower: u.exp(),
            upper: v.exp(),
        });
    }
    let s = problem.structure(ThresholdPair::from_logs(u, v))?;
    let mut solution = materialize(&problem, *spec, s, method, iterations)?;
    solution.diagnostics.warnings.extend(warnings);
    Ok(solution)
}

/// Linear interpolation of `ys` at the point where `xs` crosses `target`.
fn inverse_interp(xs: &[f64], ys: &[f64], target: f64) -> Option<f64> {
    xs.windows(2).zip(ys.windows(2)).find_map(|(x, y)| {
        let (lo, hi) = (x[0].min(x[1]), x[0].max(x[1]));
        (target >= lo && target <= hi && x[0] != x[1])
            .then(|| y[0] + (target - x[0]) / (x[1] - x[0]) * (y[1] - y[0]))
    })
}

/// Fast path for mirror-symmetric nominals `f1(y) = f0(−y)` with a monotone
/// likelihood ratio, equal radii and `ρ = 1`.
///
/// Solves a single scalar equation in `l_u`, with `l_l = 1/l_u` and `k = l_l`.
pub fn solve_symmetric(
    eps: f64,
    alpha: f64,
    rho: f64,
    nominals: &NominalPair,
    config: &SolverConfig,
) -> Result<RobustSolution> {
    let spec = DivergenceSpec::new(alpha, rho, eps, eps)?;
    if rho != 1.0 {
        return Err(Error::Precondition(format!(
            "the symmetric fast path requires rho = 1 (got {rho}); use solve_thresholds"
        )));
    }
    if !nominals.is_mirror_symmetric(SYMMETRY_TOL) {
        return Err(Error::Precondition(
            "nominals are not mirror symmetric (f1(y) = f0(-y)) on a symmetric grid; use solve_thresholds"
                .into(),
        ));
    }
    let pair = nominals;
    let (f0, f1, l) = (pair.f0(), pair.f1(), pair.l());
    let support: Vec<usize> = (0..pair.len()).filter(|&i| f0[i] > 0.0 && f1[i] > 0.0).collect();
    let log_l: Vec<f64> = support.iter().map(|&i| l[i].ln()).collect();
    let increasing = log_l.windows(2).all(|w| w[1] > w[0]);
    let decreasing = log_l.windows(2).all(|w| w[1] < w[0]);
    if support.len() < 3 || !(increasing || decreasing) {
        return Err(Error::Precondition(
            "nominal likelihood ratio is not strictly monotone on the grid; use solve_thresholds".into(),
        ));
    }
    if eps == 0.0 {
        return Ok(zero_radius_solution(pair, spec));
    }
    if config.check_feasibility {
        let check = limits::validate_eps(pair, &spec)?;
        if !check.feasible {
            return Err(Error::Infeasible {
                eps0: eps,
                eps1: eps,
                margin: check.margin,
            });
        }
    }
    let x = x_of(alpha, eps);
    let p = alpha - 1.0;
    let w = pair.grid().weights();
    // (S_1, S_α) for l_u = e^s.
    let sums = |s: f64| -> (f64, f64) {
        let lu = s.exp();
        let lup = lu.powf(p);
        let (mut s1, mut sa) = (0.0, 0.0);
        for i in 0..pair.len() {
            if f1[i] == 0.0 {
                continue;
            }
            let li = l[i];
            let (a, b) = if li < 1.0 / lu {
                (lu, lu.powf(alpha))
            } else if li > lu {
                (1.0, 1.0)
            } else {
                let psi = ((1.0 + lup) / (1.0 + li.powf(p))).powf(1.0 / p);
                (psi, psi.powf(alpha))
            };
            s1 += w[i] * a * f1[i];
            sa += w[i] * b * f1[i];
        }
        (s1, sa)
    };
    let g = |s: f64| {
        let (s1, sa) = sums(s);
        sa - x * s1.powf(alpha)
    };
    let s_max = log_l
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .min(LOG_BOUND);
    let s = scan_root(g, s_max, 256).ok_or(Error::NonConvergence {
        iterations: 256,
        residual: f64::NAN,
        lower: f64::NAN,
        upper: f64::NAN,
    })?;
    let lu = s.exp();
    let t = ThresholdPair {
        lower: 1.0 / lu,
        upper: lu,
    };
    let (s1, _) = sums(s);
    let k = t.lower;
    let z = t.lower * s1;
    let regions = partition(l, rho, t);
    let mut phi = vec![0.0; pair.len()];
    for i in 0..pair.len() {
        if regions[i] == Region::Middle {
            phi[i] = phi_scaled(l[i], t, k, alpha)?;
        }
    }
    let (mut a0, mut a1, mut c0, mut c1) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..pair.len() {
        match regions[i] {
            Region::Lower => {
                a0 += w[i] * f0[i];
                a1 += w[i] * f1[i];
            }
            Region::Upper => {
                c0 += w[i] * f0[i];
                c1 += w[i] * f1[i];
            }
            Region::Middle => {}
        }
    }
    let structure = Structure {
        t,
        regions,
        a0,
        a1,
        c0,
        c1,
        k,
        z,
        phi,
    };
    let problem = Problem::new(pair, &spec, config.bracket_expand);
    let mut solution = materialize(&problem, spec, structure, SolveMethod::Symmetric, 0)?;
    let ys: Vec<f64> = support.iter().map(|&i| pair.grid().points()[i]).collect();
    solution.diagnostics.symmetric_bounds = inverse_interp(&log_l, &ys, -s)
        .zip(inverse_interp(&log_l, &ys, s));
    Ok(solution)
}

/// Raw multipliers and scale factors of the four-equation system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktParams {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub mu0: f64,
    pub mu1: f64,
    pub alpha: f64,
    pub rho: f64,
    pub residual_norm: f64,
}

impl KktParams {
    /// Multipliers recovered from the scale factors. With `p = α − 1`:
    /// `λ0 = (1−α)/(c1^p − c2^p)`, `λ1 = (1−α)/(c4^p − c3^p)`,
    /// `μ0 = (c1^p − 1) λ0/(1−α)`, `μ1 = (c4^p − 1) λ1/(1−α)`.
    pub fn from_scales(c: [f64; 4], alpha: f64, rho: f64) -> Self {
        let p = alpha - 1.0;
        let [c1, c2, c3, c4] = c;
        let lambda0 = (1.0 - alpha) / (c1.powf(p) - c2.powf(p));
        let lambda1 = (1.0 - alpha) / (c4.powf(p) - c3.powf(p));
        Self {
            c1,
            c2,
            c3,
            c4,
            lambda0,
            lambda1,
            mu0: (c1.powf(p) - 1.0) * lambda0 / (1.0 - alpha),
            mu1: (c4.powf(p) - 1.0) * lambda1 / (1.0 - alpha),
            alpha,
            rho,
            residual_norm: f64::NAN,
        }
    }

    /// `(c1/c3, c2/c4)`.
    pub fn thresholds(&self) -> ThresholdPair {
        ThresholdPair {
            lower: self.c1 / self.c3,
            upper: self.c2 / self.c4,
        }
    }

    fn numerator(&self) -> f64 {
        let a = self.alpha;
        -1.0 + self.lambda0 + self.lambda1 + self.mu0 + self.mu1 - a * (-1.0 + self.mu0 + self.mu1)
    }

    /// `Φ1` from the multipliers, before any reduction.
    pub fn phi1(&self, l: f64) -> f64 {
        let p = self.alpha - 1.0;
        let den = self.lambda1 + self.lambda0 * (l / self.rho).powf(p);
        (self.numerator() / den).powf(1.0 / p)
    }

    /// `Φ0` from the multipliers, before any reduction.
    pub fn phi0(&self, l: f64) -> f64 {
        let p = self.alpha - 1.0;
        let den = self.lambda0 + self.lambda1 * (l / self.rho).powf(-p);
        (self.numerator() / den).powf(1.0 / p)
    }

    /// The robust rule on `I2` from the multipliers, before any reduction.
    pub fn delta(&self, l: f64) -> f64 {
        let a = self.alpha;
        let (l0, l1, m0, m1) = (self.lambda0, self.lambda1, self.mu0, self.mu1);
        let s = (l / self.rho).powf(1.0 - a);
        let den = (a - 1.0) * (l0 + l1 * s);
        l0 * (-1.0 + a + l1 + m1 - a * m1) / den - l1 * (l0 + m0 - a * m0) * s / den
    }

    /// The four constraint residuals at these scale factors.
    pub fn constraint_residuals(&self, nominals: &NominalPair, x0: f64, x1: f64) -> Option<[f64; 4]> {
        raw_residuals([self.c1, self.c2, self.c3, self.c4], self.alpha, self.rho, x0, x1, nominals)
    }
}

fn raw_residuals(
    c: [f64; 4],
    alpha: f64,
    rho: f64,
    x0: f64,
    x1: f64,
    pair: &NominalPair,
) -> Option<[f64; 4]> {
    let params = KktParams::from_scales(c, alpha, rho);
    let t = params.thresholds();
    let w = pair.grid().weights();
    let (f0, f1, l) = (pair.f0(), pair.f1(), pair.l());
    let mut out = [-1.0, -1.0, -x0, -x1];
    for i in 0..pair.len() {
        let (r0, r1) = match region_of(l[i], rho, t) {
            Region::Lower => (c[0], c[2]),
            Region::Upper => (c[1], c[3]),
            Region::Middle => (params.phi0(l[i]), params.phi1(l[i])),
        };
        if f0[i] > 0.0 {
            out[0] += w[i] * r0 * f0[i];
            out[2] += w[i] * r0.powf(alpha) * f0[i];
        }
        if f1[i] > 0.0 {
            out[1] += w[i] * r1 * f1[i];
            out[3] += w[i] * r1.powf(alpha) * f1[i];
        }
    }
    out.iter().all(|v| v.is_finite()).then_some(out)
}

/// Solves the four normalization and divergence equations directly in the
/// scale factors `c1..c4`, using the multiplier forms of `Φ0`, `Φ1` on `I2`.
///
/// Newton in `ln c`, started from the reduced solution perturbed by about 2%.
pub fn solve_raw_kkt(
    spec: &DivergenceSpec,
    nominals: &NominalPair,
    config: &SolverConfig,
) -> Result<KktParams> {
    check_alpha(spec.alpha)?;
    if spec.eps0 == 0.0 && spec.eps1 == 0.0 {
        return Ok(KktParams {
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            c4: 1.0,
            lambda0: f64::INFINITY,
            lambda1: f64::INFINITY,
            mu0: f64::NAN,
            mu1: f64::NAN,
            alpha: spec.alpha,
            rho: spec.rho,
            residual_norm: 0.0,
        });
    }
    let reduced = solve_thresholds(spec, nominals, config)?;
    let (t, k, z) = (reduced.thresholds, reduced.k, reduced.z);
    let perturb = [1.02, 0.985, 0.98, 1.015];
    let mut x: Vec<f64> = [t.lower / z, k * t.upper / z, 1.0 / z, k / z]
        .iter()
        .zip(perturb)
        .map(|(c, f)| (c * f).ln())
        .collect();
    let (x0, x1) = (spec.x0(), spec.x1());
    let eval = |x: &[f64]| raw_residuals([x[0].exp(), x[1].exp(), x[2].exp(), x[3].exp()], spec.alpha, spec.rho, x0, x1, nominals);
    let norm = |r: &[f64; 4]| r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut r = eval(&x).ok_or_else(|| {
        Error::InfeasibleForm("raw multiplier forms are undefined at the starting point".into())
    })?;
    let mut current = norm(&r);
    let h = 1e-7;
    let mut iterations = 0;
    while current >= config.root_tol && iterations < config.max_iter {
        iterations += 1;
        let mut jac = vec![vec![0.0; 4]; 4];
        for j in 0..4 {
            let mut xp = x.clone();
            xp[j] += h;
            let rp = eval(&xp).ok_or_else(|| {
                Error::InfeasibleForm("raw multiplier forms undefined near the iterate".into())
            })?;
            for i in 0..4 {
                jac[i][j] = (rp[i] - r[i]) / h;
            }
        }
        let step = solve_dense(jac, r.iter().map(|v| -v).collect()).ok_or({
            Error::NonConvergence {
                iterations,
                residual: current,
                lower: t.lower,
                upper: t.upper,
            }
        })?;
        let mut scale = 1.0;
        let mut accepted = false;
        while scale > 1e-12 {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, d)| a + scale * d).collect();
            if let Some(tr) = eval(&trial) {
                if norm(&tr) < current {
                    x = trial;
                    r = tr;
                    current = norm(&tr);
                    accepted = true;
                    break;
                }
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let c = [x[0].exp(), x[1].exp(), x[2].exp(), x[3].exp()];
    if !(current < config.root_tol) {
        return Err(Error::NonConvergence {
            iterations,
            residual: current,
            lower: c[0] / c[2],
            upper: c[1] / c[3],
        });
    }
    let mut params = KktParams::from_scales(c, spec.alpha, spec.rho);
    params.residual_norm = current;
    Ok(params)
}
