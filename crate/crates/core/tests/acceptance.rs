//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p robustlrt --test acceptance -- --nocapture` to see
//! the report. A criterion listed in `KNOWN_UNATTAINABLE` prints FAIL without
//! failing the test, provided every sub-check other than the unattainable
//! literal value passes.

mod common;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robustlrt::divergence::{bhattacharyya_values, divergence_values};
use robustlrt::evaluation::{
    alpha_sweep, error_probs, monte_carlo_errors, robust_rule_fn, snr_sweep, solution_errors, tilted_member, SnrSweep,
    TestKind,
};
use robustlrt::lfd::{
    k_factor, phi1, rule_value, solve_raw_kkt, solve_symmetric, solve_thresholds, Region, RobustSolution,
    SolverConfig, ThresholdPair,
};
use robustlrt::limits::{hellinger_eps_max, hellinger_other_eps, hellinger_root_a, max_eps_general, validate_eps};
use robustlrt::oracle::{alternating_saddle, discretize, maximize_over_ball};
use robustlrt::{DensityModel, DivergenceSpec, NominalPair, QuadratureGrid};

// Pinned tolerances.
const ANCHOR_TOL: f64 = 0.01;
const RESIDUAL_MAX: f64 = 1e-8;
const ANCHOR_RUNTIME: Duration = Duration::from_secs(10);
const MASS_TOL: f64 = 1e-6;
const EPS_TOL: f64 = 1e-4;
const FLAT_TOL: f64 = 1e-8;
const SYM_THRESHOLD_TOL: f64 = 1e-6;
const SYM_PRODUCT_TOL: f64 = 1e-8;
const SYM_MIRROR_TOL: f64 = 1e-6;
const HELLINGER_TOL: f64 = 1e-6;
const HELLINGER_QUAD_TOL: f64 = 1e-8;
const ROUND_TRIP_TOL: f64 = 1e-10;
const ORACLE_TOL: f64 = 1e-3;
const ORACLE_RUNTIME: Duration = Duration::from_secs(30);
const SADDLE_SLACK: f64 = 1e-6;
const STEP_TOL: f64 = 1e-3;
const MC_SIGMAS: f64 = 3.0;
const MC_MIN_AGREEING: usize = 95;
const IDENTITY_TOL: f64 = 1e-9;

/// The value stated for `hellinger_eps_max(e^{-1/2})`. The formula gives
/// 0.4149971718698646, which is 2.1e-5 away.
const STATED_EPS_MAX_MID: f64 = 0.414976;

/// Criteria whose literal target cannot be met by a correct implementation.
const KNOWN_UNATTAINABLE: &[usize] = &[5];

struct Outcome {
    pass: bool,
    /// All sub-checks except a literal value known to be unattainable.
    checks_ok: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, checks_ok: pass, detail }
    }
}

fn config() -> SolverConfig {
    SolverConfig::default()
}

fn anchor_solution(rho: f64) -> (RobustSolution, Duration) {
    let pair = common::mixture_pair();
    let spec = DivergenceSpec::new(4.0, rho, 0.02, 0.03).unwrap();
    let start = Instant::now();
    let s = solve_thresholds(&spec, &pair, &config()).unwrap();
    (s, start.elapsed())
}

fn c1_mixture_anchor() -> Outcome {
    let (s, took) = anchor_solution(1.0);
    let (ll, lu) = (s.thresholds.lower, s.thresholds.upper);
    let pass = (ll - 0.605).abs() <= ANCHOR_TOL
        && (lu - 1.618).abs() <= ANCHOR_TOL
        && s.residual_norm < RESIDUAL_MAX
        && took < ANCHOR_RUNTIME;
    Outcome::new(
        pass,
        format!("l_l = {ll:.6}, l_u = {lu:.6}, residual = {:.2e}, runtime = {took:.2?}", s.residual_norm),
    )
}

fn c2_constraint_attainment() -> Outcome {
    let (s, _) = anchor_solution(1.0);
    let grid = s.nominals.grid();
    let m0 = grid.integrate(&s.g0_hat).unwrap();
    let m1 = grid.integrate(&s.g1_hat).unwrap();
    let d0 = divergence_values(&s.g0_hat, s.nominals.f0(), 4.0, grid).unwrap();
    let d1 = divergence_values(&s.g1_hat, s.nominals.f1(), 4.0, grid).unwrap();
    let pass = (m0 - 1.0).abs() <= MASS_TOL
        && (m1 - 1.0).abs() <= MASS_TOL
        && (d0 - 0.02).abs() <= EPS_TOL
        && (d1 - 0.03).abs() <= EPS_TOL;
    Outcome::new(
        pass,
        format!("masses ({m0:.12}, {m1:.12}), divergences ({d0:.10}, {d1:.10})"),
    )
}

fn c3_rho_variant() -> Outcome {
    let (s, took) = anchor_solution(1.2);
    let n = s.regions.len();
    let mut dev_table = 0.0f64;
    let mut dev_ratio = 0.0f64;
    let mut interior = 0;
    for i in 1..n - 1 {
        if s.regions[i - 1..=i + 1].iter().all(|&r| r == Region::Middle) {
            interior += 1;
            dev_table = dev_table.max((s.l_hat[i] - 1.2).abs());
            if s.g0_hat[i] > 0.0 {
                dev_ratio = dev_ratio.max((s.g1_hat[i] / s.g0_hat[i] - 1.2).abs());
            }
        }
    }
    let pass = s.residual_norm < RESIDUAL_MAX && interior > 0 && dev_table < FLAT_TOL && dev_ratio < FLAT_TOL;
    Outcome::new(
        pass,
        format!(
            "l_l = {:.6}, l_u = {:.6}, residual = {:.2e}, {interior} interior I2 cells, max |l_hat - 1.2| = {dev_table:.1e}, max |g1/g0 - 1.2| = {dev_ratio:.1e}, runtime = {took:.2?}",
            s.thresholds.lower, s.thresholds.upper, s.residual_norm
        ),
    )
}

fn c4_symmetric_path() -> Outcome {
    let pair = common::gaussian_pair(10.0, 4001);
    let n = pair.len();
    let mut pass = true;
    let mut parts = Vec::new();
    for alpha in [-10.0, 0.01, 10.0] {
        let spec = DivergenceSpec::new(alpha, 1.0, 0.1, 0.1).unwrap();
        let sym = solve_symmetric(0.1, alpha, 1.0, &pair, &config());
        let gen = solve_thresholds(&spec, &pair, &config());
        let (sym, gen) = match (sym, gen) {
            (Ok(a), Ok(b)) => (a, b),
            (a, b) => {
                pass = false;
                parts.push(format!("alpha {alpha}: {:?} / {:?}", a.err(), b.err()));
                continue;
            }
        };
        let dt = (sym.thresholds.lower - gen.thresholds.lower)
            .abs()
            .max((sym.thresholds.upper - gen.thresholds.upper).abs());
        let prod = (sym.thresholds.lower * sym.thresholds.upper - 1.0).abs();
        let mirror = (0..n)
            .map(|i| (sym.g1_hat[i] - sym.g0_hat[n - 1 - i]).abs())
            .fold(0.0f64, f64::max);
        pass &= dt <= SYM_THRESHOLD_TOL && prod <= SYM_PRODUCT_TOL && mirror <= SYM_MIRROR_TOL;
        parts.push(format!(
            "alpha {alpha}: l_u = {:.8}, |diff| = {dt:.1e}, |l_l l_u - 1| = {prod:.1e}, mirror = {mirror:.1e}",
            sym.thresholds.upper
        ));
    }
    Outcome::new(pass, parts.join("; "))
}

fn c5_hellinger_limits() -> Outcome {
    let mid = (-0.5f64).exp();
    let exact = [(0.0, 4.0 - 2.0 * 2f64.sqrt()), (1.0, 0.0)];
    let mut checks = exact
        .iter()
        .all(|&(a, want)| (hellinger_eps_max(a) - want).abs() <= HELLINGER_TOL);

    // Quadrature reproduction: Bhattacharyya coefficient of N(-1,1), N(1,1)
    // and the diagonal boundary of the general solver at alpha = 1/2.
    let pair = common::gaussian_pair(12.0, 4001);
    let a_quad = bhattacharyya_values(pair.f0(), pair.f1(), pair.grid()).unwrap();
    let closed_mid = hellinger_eps_max(mid);
    let spec = DivergenceSpec::new(0.5, 1.0, 0.1, 0.1).unwrap();
    let diag = validate_eps(&pair, &spec).unwrap().boundary;
    let quad_gap = (hellinger_eps_max(a_quad) - closed_mid)
        .abs()
        .max((diag.0 - closed_mid).abs())
        .max((diag.1 - closed_mid).abs());
    checks &= quad_gap <= HELLINGER_QUAD_TOL;

    let top = 4.0 - 2.0 * 2f64.sqrt();
    let round_trip = (1..=20)
        .map(|i| {
            let e = top * i as f64 / 21.0;
            (hellinger_eps_max(hellinger_root_a(e, e).unwrap()) - e).abs()
        })
        .fold(0.0f64, f64::max);
    checks &= round_trip <= ROUND_TRIP_TOL;

    let end = hellinger_other_eps(a_quad, 0.0).unwrap();
    let general_gap = (1..=10)
        .map(|i| {
            let e0 = end * i as f64 / 11.0;
            let (e1, _, _) = max_eps_general(&pair, 0.5, 1.0, (0, e0)).unwrap();
            (e1 - hellinger_other_eps(a_quad, e0).unwrap()).abs()
        })
        .fold(0.0f64, f64::max);
    checks &= general_gap <= HELLINGER_TOL;

    let literal_gap = (closed_mid - STATED_EPS_MAX_MID).abs();
    let pass = checks && literal_gap <= HELLINGER_TOL;
    Outcome {
        pass,
        checks_ok: checks,
        detail: format!(
            "eps_max(e^-1/2) = {closed_mid:.10} vs stated {STATED_EPS_MAX_MID} (gap {literal_gap:.2e}); quadrature gap {quad_gap:.1e}; round trip {round_trip:.1e}; general vs closed form {general_gap:.1e}"
        ),
    }
}

fn c6_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let pair = common::mixture_pair();
    let spec = DivergenceSpec::new(4.0, 1.0, 0.02, 0.03).unwrap();
    let problem = discretize(&pair, &spec, 50).unwrap();
    let binned = solve_thresholds(&spec, &problem.as_nominals().unwrap(), &config()).unwrap();
    let g0 = maximize_over_ball(&binned.delta_hat, &problem.f0, 4.0, 0.02).unwrap();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let pf_oracle = dot(&binned.delta_hat, &g0);
    let reference = solution_errors(&binned).unwrap();
    let saddle = alternating_saddle(&problem, 2000, 1e-12).unwrap();
    let pe_saddle = *saddle.trace.last().unwrap();
    let took = start.elapsed();
    let gap_f = (pf_oracle - reference.p_false_alarm).abs();
    let gap_e = (pe_saddle - reference.p_error).abs();
    let pass = saddle.converged && gap_f <= ORACLE_TOL && gap_e <= ORACLE_TOL && took < ORACLE_RUNTIME;
    Outcome::new(
        pass,
        format!(
            "P_F oracle {pf_oracle:.8} vs {:.8} (gap {gap_f:.1e}); saddle P_E {pe_saddle:.8} vs {:.8} (gap {gap_e:.1e}) after {} iterations; runtime {took:.2?}",
            reference.p_false_alarm, reference.p_error, saddle.iterations
        ),
    )
}

/// A bounded random direction: a smooth bump or a sinusoid.
fn random_direction(rng: &mut ChaCha8Rng, ys: &[f64]) -> Vec<f64> {
    let kind: u32 = rng.random_range(0..3);
    let c: f64 = rng.random_range(-6.0..7.0);
    let w: f64 = rng.random_range(0.3..3.0);
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    ys.iter()
        .map(|&y| {
            sign * match kind {
                0 => ((y - c) / w).tanh(),
                1 => (-((y - c) / w).powi(2)).exp(),
                _ => (y / w + c).sin(),
            }
        })
        .collect()
}

fn c7_saddle_audit() -> Outcome {
    let (s, _) = anchor_solution(1.0);
    let p = &s.nominals;
    let grid = p.grid();
    let base = solution_errors(&s).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_fa = f64::NEG_INFINITY;
    let mut worst_miss = f64::NEG_INFINITY;
    // Directions whose tilt saturates below the target are redrawn.
    let member = |rng: &mut ChaCha8Rng, f: &[f64], radius: f64| loop {
        let h = random_direction(rng, grid.points());
        let target = radius * rng.random_range(0.05..=1.0);
        if let Ok(g) = tilted_member(f, &h, 4.0, target, grid) {
            break g;
        }
    };
    for _ in 0..200 {
        let g0 = member(&mut rng, p.f0(), 0.02);
        let g1 = member(&mut rng, p.f1(), 0.03);
        let r = error_probs(&s.delta_hat, &g0, &g1, 1.0, grid).unwrap();
        worst_fa = worst_fa.max(r.p_false_alarm - base.p_false_alarm);
        worst_miss = worst_miss.max(r.p_miss - base.p_miss);
    }
    let mut worst_rule = f64::INFINITY;
    for _ in 0..50 {
        let h = random_direction(&mut rng, grid.points());
        let eta: f64 = rng.random_range(0.01..0.5);
        let rule: Vec<f64> = s.delta_hat.iter().zip(&h).map(|(d, v)| (d + eta * v).clamp(0.0, 1.0)).collect();
        let r = error_probs(&rule, &s.g0_hat, &s.g1_hat, 1.0, grid).unwrap();
        worst_rule = worst_rule.min(r.p_error - base.p_error);
    }
    let pass = worst_fa <= SADDLE_SLACK && worst_miss <= SADDLE_SLACK && worst_rule >= -SADDLE_SLACK;
    Outcome::new(
        pass,
        format!(
            "max P_F gain {worst_fa:.2e}, max P_M gain {worst_miss:.2e} over 200 tilted pairs; min P_E change {worst_rule:.2e} over 50 rules"
        ),
    )
}

/// Width in `l` of the band where `0.05 < δ̂ < 0.95`.
fn transition_width(t: ThresholdPair, k: f64, alpha: f64) -> f64 {
    let n = 20001;
    let (a, b) = (t.lower, t.upper);
    let ls: Vec<f64> = (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect();
    let inside: Vec<f64> = ls
        .iter()
        .copied()
        .filter(|&l| {
            let d = rule_value(l, t, k, alpha, 1.0);
            d > 0.05 && d < 0.95
        })
        .collect();
    match (inside.first(), inside.last()) {
        (Some(x), Some(y)) => y - x,
        _ => 0.0,
    }
}

fn c8_asymptotics() -> Outcome {
    let pair = common::mixture_pair();
    let base = DivergenceSpec::new(4.0, 1.0, 0.02, 0.03).unwrap();
    let rows = alpha_sweep(&base, &[2.0, 4.0, 10.0, 50.0], &pair, &config());
    let at = |a: f64| rows.iter().find(|r| r.alpha == a).unwrap();
    let (r4, r50) = (at(4.0), at(50.0));
    let shrinks = rows.iter().all(|r| r.error.is_none())
        && (r50.l_l - 1.0).abs() < (r4.l_l - 1.0).abs()
        && (r50.l_u - 1.0).abs() < (r4.l_u - 1.0).abs();

    let t = ThresholdPair::new(0.605, 1.618).unwrap();
    let mut exact_ends = true;
    let mut form_gap = 0.0f64;
    let mut widths = Vec::new();
    for alpha in [0.01, 10.0, 100.0] {
        let k = k_factor(t, &pair, alpha, 1.0).unwrap();
        exact_ends &= rule_value(t.lower, t, k, alpha, 1.0) == 0.0 && rule_value(t.upper, t, k, alpha, 1.0) == 1.0;
        // Linear-fractional form in s = l^{1-α}.
        let p = alpha - 1.0;
        for i in 1..200 {
            let l = t.lower + (t.upper - t.lower) * i as f64 / 200.0;
            let s = l.powf(-p);
            let predicted = ((t.lower.powf(p) * s - 1.0)
                / (s * (t.lower.powf(p) - (k * t.upper).powf(p)) + k.powf(p) - 1.0))
                .clamp(0.0, 1.0);
            form_gap = form_gap.max((rule_value(l, t, k, alpha, 1.0) - predicted).abs());
        }
        widths.push(transition_width(t, k, alpha));
    }
    let steplike = widths[2] < widths[1] && widths[1] < widths[0];
    let pass = shrinks && exact_ends && form_gap <= STEP_TOL && steplike;
    Outcome::new(
        pass,
        format!(
            "|l-1| at alpha 4: ({:.4}, {:.4}), at 50: ({:.4}, {:.4}); boundary values exact: {exact_ends}; form gap {form_gap:.1e}; transition widths {:?}",
            (r4.l_l - 1.0).abs(),
            (r4.l_u - 1.0).abs(),
            (r50.l_l - 1.0).abs(),
            (r50.l_u - 1.0).abs(),
            widths.iter().map(|w| format!("{w:.4}")).collect::<Vec<_>>()
        ),
    )
}

fn c9_monte_carlo() -> Outcome {
    let f0 = DensityModel::gaussian(0.0, 1.0).unwrap();
    let f1 = DensityModel::gaussian(1.0, 1.0).unwrap();
    let grid = QuadratureGrid::uniform(-9.0, 10.0, 4001).unwrap();
    let pair = NominalPair::tabulate(&f0, &f1, &grid);
    let spec = DivergenceSpec::new(0.5, 1.0, 0.02, 0.02).unwrap();
    let s = solve_thresholds(&spec, &pair, &config()).unwrap();
    let quad = error_probs(&s.delta_hat, pair.f0(), pair.f1(), 1.0, &grid).unwrap();
    let n = 100_000;
    let se = |p: f64| (p * (1.0 - p) / n as f64).sqrt();
    let agreeing = (0..100u64)
        .filter(|&seed| {
            let mc = monte_carlo_errors(robust_rule_fn(&s, &f0, &f1), &f0, &f1, 1.0, n, seed).unwrap();
            (mc.p_false_alarm - quad.p_false_alarm).abs() < MC_SIGMAS * se(quad.p_false_alarm)
                && (mc.p_miss - quad.p_miss).abs() < MC_SIGMAS * se(quad.p_miss)
        })
        .count();

    let sweep = SnrSweep {
        noise: DensityModel::gaussian(0.0, 1.0).unwrap(),
        sigma: 1.0,
        snr_db: vec![-5.0, 0.0, 5.0, 10.0],
        alpha: 0.5,
        rho: 1.0,
        settings: vec![(0.005, 0.005), (0.02, 0.02)],
        grid_points: 4001,
    };
    let rows = snr_sweep(&sweep, &config()).unwrap();
    let mut ordered = true;
    for snr in &sweep.snr_db {
        let at: Vec<_> = rows.iter().filter(|r| r.snr_db == *snr).collect();
        let nominal = at.iter().find(|r| r.test == TestKind::Nominal).unwrap();
        let small = at.iter().find(|r| r.test == TestKind::Robust && r.eps0 == 0.005).unwrap();
        let large = at.iter().find(|r| r.test == TestKind::Robust && r.eps0 == 0.02).unwrap();
        ordered &= small.feasible && large.feasible;
        ordered &= nominal.p_fa < small.p_fa && small.p_fa < large.p_fa;
        ordered &= nominal.p_miss < small.p_miss && small.p_miss < large.p_miss;
    }
    let pass = agreeing >= MC_MIN_AGREEING && ordered;
    Outcome::new(
        pass,
        format!(
            "{agreeing}/100 seeds within 3 standard errors of quadrature (P_F {:.6}, P_M {:.6}); SNR orderings hold: {ordered}",
            quad.p_false_alarm, quad.p_miss
        ),
    )
}

fn identity_gaps(pair: &NominalPair, spec: &DivergenceSpec, seed: u64) -> Result<(f64, f64, f64), String> {
    let s = solve_thresholds(spec, pair, &config()).map_err(|e| e.to_string())?;
    let kkt = solve_raw_kkt(spec, pair, &config()).map_err(|e| e.to_string())?;
    let (t, rho, alpha) = (s.thresholds, spec.rho, spec.alpha);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phi_gap = 0.0f64;
    let mut delta_gap = 0.0f64;
    for _ in 0..100 {
        let l = rho * rng.random_range(t.lower..t.upper);
        let reduced = phi1(l, t, alpha, rho, s.k, s.z).unwrap();
        phi_gap = phi_gap.max((kkt.phi1(l) - reduced).abs() / reduced);
        delta_gap = delta_gap.max((kkt.delta(l) - rule_value(l, t, s.k, alpha, rho)).abs());
    }
    Ok((phi_gap, delta_gap, (s.z - 1.0 / kkt.c3).abs()))
}

fn c10_reduction_identities() -> Outcome {
    let problems = [
        ("mixture", common::mixture_pair(), DivergenceSpec::new(4.0, 1.0, 0.02, 0.03).unwrap()),
        ("gaussian", common::gaussian_pair(10.0, 4001), DivergenceSpec::new(2.0, 1.2, 0.05, 0.03).unwrap()),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, (name, pair, spec)) in problems.iter().enumerate() {
        match identity_gaps(pair, spec, 100 + i as u64) {
            Ok((phi, delta, z)) => {
                pass &= phi <= IDENTITY_TOL && delta <= IDENTITY_TOL;
                parts.push(format!("{name}: Phi1 rel gap {phi:.1e}, delta gap {delta:.1e}, |z - 1/c3| {z:.1e}"));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{name}: {e}"));
            }
        }
    }
    Outcome::new(pass, parts.join("; "))
}

type Criterion = (usize, &'static str, fn() -> Outcome);

/// Runs without the libtest harness so the per-criterion lines are never
/// captured.
fn main() -> std::process::ExitCode {
    let criteria: [Criterion; 10] = [
        (1, "mixture anchor", c1_mixture_anchor),
        (2, "constraint attainment", c2_constraint_attainment),
        (3, "rho variant", c3_rho_variant),
        (4, "symmetric fast path", c4_symmetric_path),
        (5, "Hellinger limits", c5_hellinger_limits),
        (6, "oracle equivalence", c6_oracle_equivalence),
        (7, "saddle audit", c7_saddle_audit),
        (8, "asymptotics", c8_asymptotics),
        (9, "Monte Carlo consistency", c9_monte_carlo),
        (10, "reduction identities", c10_reduction_identities),
    ];
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria {
        let o = run();
        let status = if o.pass { "PASS" } else { "FAIL" };
        let note = if !o.pass && KNOWN_UNATTAINABLE.contains(&id) {
            " [known unattainable literal]"
        } else {
            ""
        };
        println!("{status} criterion {id:>2} ({name}){note}: {}", o.detail);
        let tolerated = KNOWN_UNATTAINABLE.contains(&id) && o.checks_ok;
        if !o.pass && !tolerated {
            unexpected.push(id);
        }
    }
    if unexpected.is_empty() {
        println!("acceptance: no unexpected failures");
        std::process::ExitCode::SUCCESS
    } else {
        println!("acceptance: criteria failed: {unexpected:?}");
        std::process::ExitCode::FAILURE
    }
}
