//! Error probabilities of randomized decision rules, by quadrature or by
//! simulation, plus the sweeps used to study how robust tests behave.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::density::{likelihood_ratio, DensityModel, NominalPair, QuadratureGrid};
use crate::divergence::{divergence_values, DivergenceSpec};
use crate::error::{Error, Result};
use crate::lfd::{solve_thresholds, RobustSolution, SolverConfig, TIE_RANDOMIZATION};
use crate::numeric::bisect;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Samples per independently seeded Monte Carlo block.
const MC_BLOCK: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EvalMethod {
    Quadrature,
    /// Half-widths are 95% normal-approximation intervals.
    MonteCarlo {
        n: usize,
        seed: u64,
        half_width_false_alarm: f64,
        half_width_miss: f64,
        half_width_error: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorReport {
    pub p_false_alarm: f64,
    pub p_miss: f64,
    pub p_error: f64,
    pub method: EvalMethod,
}

/// `(P(H0), P(H1)) = (ρ/(1+ρ), 1/(1+ρ))`.
pub fn priors(rho: f64) -> (f64, f64) {
    (rho / (1.0 + rho), 1.0 / (1.0 + rho))
}

/// Quadrature error probabilities of the tabulated rule `delta` against the
/// tabulated densities `g0`, `g1`.
pub fn error_probs(
    delta: &[f64],
    g0: &[f64],
    g1: &[f64],
    rho: f64,
    grid: &QuadratureGrid,
) -> Result<ErrorReport> {
    for v in [g0, g1] {
        if v.len() != delta.len() {
            return Err(Error::LengthMismatch {
                expected: delta.len(),
                got: v.len(),
            });
        }
    }
    if delta.iter().any(|d| !(0.0..=1.0).contains(d)) {
        return Err(Error::InvalidArgument("decision rule must take values in [0, 1]".into()));
    }
    let fa: Vec<f64> = delta.iter().zip(g0).map(|(d, g)| d * g).collect();
    let miss: Vec<f64> = delta.iter().zip(g1).map(|(d, g)| (1.0 - d) * g).collect();
    let p_false_alarm = grid.integrate(&fa)?;
    let p_miss = grid.integrate(&miss)?;
    let (pi0, pi1) = priors(rho);
    Ok(ErrorReport {
        p_false_alarm,
        p_miss,
        p_error: pi0 * p_false_alarm + pi1 * p_miss,
        method: EvalMethod::Quadrature,
    })
}

/// [`error_probs`] with the densities given as models tabulated on `grid`.
pub fn error_probs_models(
    delta: &[f64],
    g0: &DensityModel,
    g1: &DensityModel,
    rho: f64,
    grid: &QuadratureGrid,
) -> Result<ErrorReport> {
    error_probs(delta, &grid.tabulate(g0), &grid.tabulate(g1), rho, grid)
}

/// `P_E(δ̂, ĝ0, ĝ1)` of a solved problem.
pub fn solution_errors(solution: &RobustSolution) -> Result<ErrorReport> {
    error_probs(
        &solution.delta_hat,
        &solution.g0_hat,
        &solution.g1_hat,
        solution.spec.rho,
        solution.nominals.grid(),
    )
}

/// Likelihood ratio test with threshold `ρ`, randomized with probability
/// one half on ties.
pub fn nominal_rule_value(l: f64, rho: f64) -> f64 {
    if l > rho {
        1.0
    } else if l < rho {
        0.0
    } else {
        TIE_RANDOMIZATION
    }
}

/// The nominal test tabulated on the nominal grid.
pub fn nominal_rule(nominals: &NominalPair, rho: f64) -> Vec<f64> {
    nominals.l().iter().map(|&l| nominal_rule_value(l, rho)).collect()
}

/// The robust rule as a function of the observation `y`.
pub fn robust_rule_fn<'a>(
    solution: &'a RobustSolution,
    f0: &'a DensityModel,
    f1: &'a DensityModel,
) -> impl Fn(f64) -> f64 + Sync + 'a {
    move |y| solution.rule(likelihood_ratio(f0, f1, y))
}

/// The nominal test as a function of the observation `y`.
pub fn nominal_rule_fn<'a>(
    f0: &'a DensityModel,
    f1: &'a DensityModel,
    rho: f64,
) -> impl Fn(f64) -> f64 + Sync + 'a {
    move |y| nominal_rule_value(likelihood_ratio(f0, f1, y), rho)
}

/// Fraction of samples from `model` for which the rule decides `H1`; the
/// randomization is realized with one uniform draw per sample.
fn decide_rate<F>(rule: &F, model: &DensityModel, n: usize, seed: u64, stream: u64) -> f64
where
    F: Fn(f64) -> f64 + Sync,
{
    let blocks = n.div_ceil(MC_BLOCK);
    let hits: usize = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(2 * b as u64 + stream);
            let count = MC_BLOCK.min(n - b * MC_BLOCK);
            model
                .sample_with(count, &mut rng)
                .into_iter()
                .filter(|&y| {
                    let u: f64 = rng.random();
                    u < rule(y)
                })
                .count()
        })
        .sum();
    hits as f64 / n as f64
}

/// Monte Carlo error probabilities of `rule` with samples drawn from
/// `model0` and `model1`. Deterministic for a given seed.
pub fn monte_carlo_errors<F>(
    rule: F,
    model0: &DensityModel,
    model1: &DensityModel,
    rho: f64,
    n: usize,
    seed: u64,
) -> Result<ErrorReport>
where
    F: Fn(f64) -> f64 + Sync,
{
    if n < 1000 {
        return Err(Error::InvalidArgument(format!(
            "Monte Carlo needs at least 1000 samples, got {n}"
        )));
    }
    let p_false_alarm = decide_rate(&rule, model0, n, seed, 0);
    let p_miss = 1.0 - decide_rate(&rule, model1, n, seed, 1);
    let var = |p: f64| p * (1.0 - p) / n as f64;
    let (pi0, pi1) = priors(rho);
    Ok(ErrorReport {
        p_false_alarm,
        p_miss,
        p_error: pi0 * p_false_alarm + pi1 * p_miss,
        method: EvalMethod::MonteCarlo {
            n,
            seed,
            half_width_false_alarm: Z95 * var(p_false_alarm).sqrt(),
            half_width_miss: Z95 * var(p_miss).sqrt(),
            half_width_error: Z95 * (pi0 * pi0 * var(p_false_alarm) + pi1 * pi1 * var(p_miss)).sqrt(),
        },
    })
}

/// A member of the α-divergence ball around `f` obtained by exponential
/// tilting, `g ∝ f e^{t h}`, with `t ≥ 0` chosen so that `D(g, f; α)`
/// equals `target`.
///
/// `h` should be bounded; the tilt keeps the support of `f`.
pub fn tilted_member(
    f: &[f64],
    h: &[f64],
    alpha: f64,
    target: f64,
    grid: &QuadratureGrid,
) -> Result<Vec<f64>> {
    if h.len() != f.len() {
        return Err(Error::LengthMismatch {
            expected: f.len(),
            got: h.len(),
        });
    }
    if !(target >= 0.0) {
        return Err(Error::InvalidArgument(format!("target divergence must be >= 0, got {target}")));
    }
    let tilt = |t: f64| -> Result<Vec<f64>> {
        let top = h.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(t * v));
        let raw: Vec<f64> = f.iter().zip(h).map(|(&fi, &hi)| fi * (t * hi - top).exp()).collect();
        let mass = grid.integrate(&raw)?;
        Ok(raw.into_iter().map(|v| v / mass).collect())
    };
    if target == 0.0 {
        return tilt(0.0);
    }
    let gap = |t: f64| {
        tilt(t)
            .and_then(|g| divergence_values(&g, f, alpha, grid))
            .map_or(f64::NAN, |d| d - target)
    };
    let mut hi = 1.0;
    while gap(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::BallConstraint(format!(
                "tilting direction cannot reach divergence {target}"
            )));
        }
    }
    let t = bisect(gap, 0.0, hi, 1e-13, 200)
        .ok_or_else(|| Error::BallConstraint("tilt bisection failed".into()))?;
    tilt(t)
}

/// One row of an α sweep; `error` is set when the solve failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaRow {
    pub alpha: f64,
    pub l_l: f64,
    pub l_u: f64,
    pub residual: f64,
    pub achieved_eps0: f64,
    pub achieved_eps1: f64,
    pub error: Option<String>,
}

/// Solves the base problem at every `α` in `alphas`, in parallel. Failures are
/// recorded per row.
pub fn alpha_sweep(
    base: &DivergenceSpec,
    alphas: &[f64],
    nominals: &NominalPair,
    config: &SolverConfig,
) -> Vec<AlphaRow> {
    alphas
        .par_iter()
        .map(|&alpha| {
            let solved = DivergenceSpec::new(alpha, base.rho, base.eps0, base.eps1)
                .and_then(|spec| solve_thresholds(&spec, nominals, config));
            match solved {
                Ok(s) => AlphaRow {
                    alpha,
                    l_l: s.thresholds.lower,
                    l_u: s.thresholds.upper,
                    residual: s.residual_norm,
                    achieved_eps0: s.achieved_eps0,
                    achieved_eps1: s.achieved_eps1,
                    error: None,
                },
                Err(e) => AlphaRow {
                    alpha,
                    l_l: f64::NAN,
                    l_u: f64::NAN,
                    residual: f64::NAN,
                    achieved_eps0: f64::NAN,
                    achieved_eps1: f64::NAN,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Nominal,
    Robust,
}

impl TestKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::Nominal => "nominal",
            Self::Robust => "robust",
        }
    }
}

/// One row of an SNR sweep. Nominal rows carry zero radii; infeasible or
/// failed robust rows carry NaN probabilities and `feasible = false`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnrRow {
    pub snr_db: f64,
    pub test: TestKind,
    pub eps0: f64,
    pub eps1: f64,
    pub p_fa: f64,
    pub p_miss: f64,
    pub feasible: bool,
}

/// Settings of an SNR sweep for `H0: Y = W` against `H1: Y = W + A`, with
/// `SNR = 20 log10(A/σ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrSweep {
    pub noise: DensityModel,
    /// Noise scale `σ` entering the SNR definition.
    pub sigma: f64,
    pub snr_db: Vec<f64>,
    pub alpha: f64,
    pub rho: f64,
    /// Robust radius pairs `(ε0, ε1)`.
    pub settings: Vec<(f64, f64)>,
    pub grid_points: usize,
}

/// Grid covering both supports with its middle node exactly at `A/2`, where
/// symmetric noise makes the likelihood ratio exactly one.
fn centered_grid(f0: &DensityModel, f1: &DensityModel, amplitude: f64, count: usize) -> Result<QuadratureGrid> {
    let (a, b) = f0.support();
    let (c, d) = f1.support();
    let center = 0.5 * amplitude;
    let half = (center - a.min(c)).max(b.max(d) - center);
    let n = count | 1;
    let mid = (n - 1) / 2;
    let points = (0..n)
        .map(|j| {
            if j == mid {
                center
            } else {
                center + half * (j as f64 - mid as f64) / mid as f64
            }
        })
        .collect();
    QuadratureGrid::trapezoid(points)
}

/// Nominal test on `(f0, f1)` and robust tests on `(ĝ0, ĝ1)` at each SNR.
pub fn snr_sweep(sweep: &SnrSweep, config: &SolverConfig) -> Result<Vec<SnrRow>> {
    let rows: Vec<Result<Vec<SnrRow>>> = sweep
        .snr_db
        .par_iter()
        .map(|&snr| {
            let amplitude = sweep.sigma * 10f64.powf(snr / 20.0);
            let f1 = DensityModel::shifted(sweep.noise.clone(), amplitude)?;
            let grid = centered_grid(&sweep.noise, &f1, amplitude, sweep.grid_points)?;
            let pair = NominalPair::tabulate(&sweep.noise, &f1, &grid);
            let nominal = error_probs(&nominal_rule(&pair, sweep.rho), pair.f0(), pair.f1(), sweep.rho, &grid)?;
            let mut out = vec![SnrRow {
                snr_db: snr,
                test: TestKind::Nominal,
                eps0: 0.0,
                eps1: 0.0,
                p_fa: nominal.p_false_alarm,
                p_miss: nominal.p_miss,
                feasible: true,
            }];
            for &(eps0, eps1) in &sweep.settings {
                let spec = DivergenceSpec::new(sweep.alpha, sweep.rho, eps0, eps1)?;
                let row = match solve_thresholds(&spec, &pair, config) {
                    Ok(s) => {
                        let r = solution_errors(&s)?;
                        (r.p_false_alarm, r.p_miss, true)
                    }
                    Err(Error::Infeasible { .. }) | Err(Error::NonConvergence { .. }) => {
                        (f64::NAN, f64::NAN, false)
                    }
                    Err(e) => return Err(e),
                };
                out.push(SnrRow {
                    snr_db: snr,
                    test: TestKind::Robust,
                    eps0,
                    eps1,
                    p_fa: row.0,
                    p_miss: row.1,
                    feasible: row.2,
                });
            }
            Ok(out)
        })
        .collect();
    let mut flat = Vec::new();
    for r in rows {
        flat.extend(r?);
    }
    Ok(flat)
}
