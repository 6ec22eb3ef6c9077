//! Batch front end: a flat `key = value` config, command-line overrides and
//! CSV or JSON tables on output.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Parser;
use serde::Serialize;
use serde_json::json;

use crate::density::{DensityModel, NominalPair, QuadratureGrid, DEFAULT_GRID_POINTS};
use crate::divergence::{bhattacharyya_values, DivergenceSpec};
use crate::error::{Error, Result};
use crate::evaluation::{
    alpha_sweep, error_probs, monte_carlo_errors, nominal_rule, nominal_rule_fn, robust_rule_fn,
    snr_sweep, solution_errors, ErrorReport, EvalMethod, SnrSweep,
};
use crate::lfd::{solve_symmetric, solve_thresholds, RobustSolution, SolverConfig};
use crate::limits::{eps_surface, hellinger_other_eps, max_eps_general};

const MIXTURE: &str = "mixture(0.5*gaussian(-2,1)+0.5*gaussian(2,1))";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    SolveSymmetric,
    Limits,
    Surface,
    Evaluate,
    SweepAlpha,
    SweepSnr,
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "solve" => Self::Solve,
            "solve-symmetric" => Self::SolveSymmetric,
            "limits" => Self::Limits,
            "surface" => Self::Surface,
            "evaluate" => Self::Evaluate,
            "sweep-alpha" => Self::SweepAlpha,
            "sweep-snr" => Self::SweepSnr,
            other => return Err(Error::Config(format!("unknown command `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::Config(format!("unknown format `{other}` (expected csv or json)"))),
        }
    }
}

/// Which radius `limits` holds fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fixed {
    Eps0,
    Eps1,
}

/// Everything a run needs. Defaults reproduce the Gaussian mixture example:
/// `f0` a symmetric two-component mixture, `f1` the same shifted by one.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub nominal0: String,
    pub nominal1: String,
    pub alpha: f64,
    pub rho: f64,
    pub eps0: f64,
    pub eps1: f64,
    pub grid: (f64, f64, usize),
    pub mc: Option<(usize, u64)>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub fixed: Fixed,
    pub alphas: Vec<f64>,
    pub noise: String,
    pub sigma: f64,
    pub snr_db: Vec<f64>,
    pub settings: Vec<(f64, f64)>,
    pub surface_n: usize,
    /// Directory against which relative table paths resolve.
    pub base_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: Command::Solve,
            nominal0: MIXTURE.into(),
            nominal1: format!("shift({MIXTURE},1)"),
            alpha: 4.0,
            rho: 1.0,
            eps0: 0.02,
            eps1: 0.03,
            grid: (-8.0, 9.0, DEFAULT_GRID_POINTS),
            mc: None,
            out: None,
            format: Format::Csv,
            fixed: Fixed::Eps0,
            alphas: vec![0.5, 2.0, 4.0, 10.0, 50.0],
            noise: "gaussian(0,1)".into(),
            sigma: 1.0,
            snr_db: vec![-5.0, 0.0, 5.0, 10.0],
            settings: vec![(0.005, 0.005), (0.02, 0.02)],
            surface_n: 41,
            base_dir: None,
        }
    }
}

fn number<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse `{value}`: {e}")))
}

fn list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| number(key, v)).collect()
}

/// `min:max:n`.
pub fn parse_grid(value: &str) -> Result<(f64, f64, usize)> {
    let parts: Vec<&str> = value.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!("grid must be min:max:n, got `{value}`")));
    }
    let n: usize = number("grid", parts[2])?;
    if n < 3 {
        return Err(Error::Config(format!("grid needs at least 3 points, got {n}")));
    }
    Ok((number("grid", parts[0])?, number("grid", parts[1])?, n))
}

/// `n:seed`.
pub fn parse_mc(value: &str) -> Result<(usize, u64)> {
    let (n, seed) = value
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("mc must be n:seed, got `{value}`")))?;
    Ok((number("mc", n)?, number("mc", seed)?))
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "command" => self.command = value.parse()?,
            "nominal0" => self.nominal0 = value.into(),
            "nominal1" => self.nominal1 = value.into(),
            "alpha" => self.alpha = number(key, value)?,
            "rho" => self.rho = number(key, value)?,
            "eps0" => self.eps0 = number(key, value)?,
            "eps1" => self.eps1 = number(key, value)?,
            "grid" => self.grid = parse_grid(value)?,
            "mc" => self.mc = Some(parse_mc(value)?),
            "out" => self.out = Some(value.into()),
            "format" => self.format = value.parse()?,
            "fixed" => {
                self.fixed = match value {
                    "eps0" => Fixed::Eps0,
                    "eps1" => Fixed::Eps1,
                    _ => return Err(Error::Config(format!("fixed must be eps0 or eps1, got `{value}`"))),
                }
            }
            "alphas" => self.alphas = list(key, value)?,
            "noise" => self.noise = value.into(),
            "sigma" => self.sigma = number(key, value)?,
            "snr_db" => self.snr_db = list(key, value)?,
            "settings" => {
                self.settings = value
                    .split(',')
                    .map(|pair| {
                        let (a, b) = pair.split_once(':').ok_or_else(|| {
                            Error::Config(format!("settings entries must be eps0:eps1, got `{pair}`"))
                        })?;
                        Ok((number(key, a)?, number(key, b)?))
                    })
                    .collect::<Result<_>>()?
            }
            "surface_n" => self.surface_n = number(key, value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Parses a flat config: one `key = value` per line, `#` starts a comment.
    pub fn parse_text(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut config = Self {
            base_dir: base_dir.map(Path::to_path_buf),
            ..Self::default()
        };
        for (number, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", number + 1)))?;
            config.set(key, value)?;
        }
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_text(&text, path.parent())
    }

    fn model(&self, spec: &str) -> Result<DensityModel> {
        DensityModel::parse(spec, self.base_dir.as_deref())
    }

    fn nominals(&self) -> Result<(DensityModel, DensityModel, NominalPair)> {
        let f0 = self.model(&self.nominal0)?;
        let f1 = self.model(&self.nominal1)?;
        let (lo, hi, n) = self.grid;
        let grid = QuadratureGrid::uniform(lo, hi, n)?;
        let pair = NominalPair::tabulate(&f0, &f1, &grid);
        Ok((f0, f1, pair))
    }

    fn spec(&self) -> Result<DivergenceSpec> {
        DivergenceSpec::new(self.alpha, self.rho, self.eps0, self.eps1)
    }
}

/// Command-line arguments; every flag overrides the config file.
#[derive(Debug, Parser)]
#[command(name = "robustlrt", version, about = "Minimax robust likelihood ratio tests under alpha-divergence balls")]
pub struct Args {
    /// Flat key = value config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// solve, solve-symmetric, limits, surface, evaluate, sweep-alpha or sweep-snr.
    #[arg(long)]
    pub command: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub rho: Option<String>,
    #[arg(long)]
    pub eps0: Option<String>,
    #[arg(long)]
    pub eps1: Option<String>,
    /// min:max:n
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    /// n:seed
    #[arg(long)]
    pub mc: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    pub format: Option<String>,
    /// Any other config key, as key=value; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", allow_hyphen_values = true)]
    pub set: Vec<String>,
}

impl Args {
    pub fn into_config(self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        let fields = [
            ("command", self.command),
            ("alpha", self.alpha),
            ("rho", self.rho),
            ("eps0", self.eps0),
            ("eps1", self.eps1),
            ("grid", self.grid),
            ("mc", self.mc),
            ("format", self.format),
        ];
        for (key, value) in fields {
            if let Some(v) = value {
                config.set(key, &v)?;
            }
        }
        for item in &self.set {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects key=value, got `{item}`")))?;
            config.set(k, v)?;
        }
        if let Some(out) = self.out {
            config.out = Some(out);
        }
        Ok(config)
    }
}

/// Process exit status for an error: 2 for infeasible radii, 3 for solver
/// non-convergence, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Infeasible { .. } => 2,
        Error::NonConvergence { .. } => 3,
        _ => 1,
    }
}

/// Machine-readable description of an error.
pub fn error_payload(err: &Error) -> serde_json::Value {
    match err {
        Error::Infeasible { eps0, eps1, margin } => {
            json!({"error": "infeasible", "eps0": eps0, "eps1": eps1, "margin": margin, "message": err.to_string()})
        }
        Error::NonConvergence { iterations, residual, lower, upper } => json!({
            "error": "non_convergence", "iterations": iterations, "residual": residual,
            "l_l": lower, "l_u": upper, "message": err.to_string()
        }),
        _ => json!({"error": "other", "message": err.to_string()}),
    }
}

/// A table ready for emission: column names, rows and optional metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub meta: BTreeMap<String, serde_json::Value>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Num(v) if *v == 0.0 || !v.is_finite() || (1e-4..1e6).contains(&v.abs()) => write!(f, "{v}"),
            Self::Num(v) => write!(f, "{v:e}"),
            Self::Int(v) => write!(f, "{v}"),
            Self::Bool(v) => write!(f, "{v}"),
            Self::Text(v) => write!(f, "{v}"),
        }
    }
}

impl Table {
    fn new(columns: Vec<&'static str>) -> Self {
        Self {
            meta: BTreeMap::new(),
            columns,
            rows: Vec::new(),
        }
    }

    /// CSV with metadata as leading `# key=value` lines.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut out = out;
        for (k, v) in &self.meta {
            writeln!(out, "# {k}={v}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// `{"meta": {...}, "rows": [{column: value}]}`; non-finite numbers
    /// become `null`.
    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        let rows: Vec<serde_json::Map<String, serde_json::Value>> = self
            .rows
            .iter()
            .map(|row| {
                self.columns
                    .iter()
                    .zip(row)
                    .map(|(c, v)| (c.to_string(), serde_json::to_value(v).unwrap_or(serde_json::Value::Null)))
                    .collect()
            })
            .collect();
        let mut out = out;
        serde_json::to_writer_pretty(&mut out, &json!({"meta": self.meta, "rows": rows}))?;
        writeln!(out)?;
        Ok(())
    }

    pub fn write<W: Write>(&self, format: Format, out: W) -> Result<()> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Json => self.write_json(out),
        }
    }
}

fn solution_table(s: &RobustSolution) -> Table {
    let mut t = Table::new(vec!["y", "f0", "f1", "l", "g0_hat", "g1_hat", "delta_hat", "l_hat", "region"]);
    let spec = s.spec;
    for (k, v) in [
        ("alpha", spec.alpha),
        ("rho", spec.rho),
        ("eps0", spec.eps0),
        ("eps1", spec.eps1),
        ("l_l", s.thresholds.lower),
        ("l_u", s.thresholds.upper),
        ("k", s.k),
        ("z", s.z),
        ("residual_norm", s.residual_norm),
        ("achieved_eps0", s.achieved_eps0),
        ("achieved_eps1", s.achieved_eps1),
    ] {
        t.meta.insert(k.into(), json!(v));
    }
    t.meta.insert("method".into(), json!(s.diagnostics.method));
    let p = &s.nominals;
    for i in 0..p.len() {
        t.rows.push(vec![
            Cell::Num(p.grid().points()[i]),
            Cell::Num(p.f0()[i]),
            Cell::Num(p.f1()[i]),
            Cell::Num(p.l()[i]),
            Cell::Num(s.g0_hat[i]),
            Cell::Num(s.g1_hat[i]),
            Cell::Num(s.delta_hat[i]),
            Cell::Num(s.l_hat[i]),
            Cell::Int(s.regions[i].label() as i64),
        ]);
    }
    t
}

fn report_row(test: &str, densities: &str, r: &ErrorReport) -> Vec<Cell> {
    let (method, hw) = match r.method {
        EvalMethod::Quadrature => ("quadrature", (f64::NAN, f64::NAN)),
        EvalMethod::MonteCarlo {
            half_width_false_alarm,
            half_width_miss,
            ..
        } => ("monte_carlo", (half_width_false_alarm, half_width_miss)),
    };
    vec![
        Cell::Text(test.into()),
        Cell::Text(densities.into()),
        Cell::Text(method.into()),
        Cell::Num(r.p_false_alarm),
        Cell::Num(r.p_miss),
        Cell::Num(r.p_error),
        Cell::Num(hw.0),
        Cell::Num(hw.1),
    ]
}

/// Builds the output table of one run.
pub fn build_table(config: &RunConfig) -> Result<Table> {
    let solver = SolverConfig::default();
    match config.command {
        Command::Solve => {
            let (_, _, pair) = config.nominals()?;
            Ok(solution_table(&solve_thresholds(&config.spec()?, &pair, &solver)?))
        }
        Command::SolveSymmetric => {
            if config.eps0 != config.eps1 {
                return Err(Error::Config("solve-symmetric needs eps0 = eps1".into()));
            }
            let (_, _, pair) = config.nominals()?;
            Ok(solution_table(&solve_symmetric(config.eps0, config.alpha, config.rho, &pair, &solver)?))
        }
        Command::Limits => {
            let (_, _, pair) = config.nominals()?;
            let (index, value) = match config.fixed {
                Fixed::Eps0 => (0, config.eps0),
                Fixed::Eps1 => (1, config.eps1),
            };
            let mut t = Table::new(vec!["eps0", "eps1", "lambda0", "lambda1", "mode"]);
            let a = bhattacharyya_values(pair.f0(), pair.f1(), pair.grid())?;
            let (other, l0, l1, mode) = if config.alpha == 0.5 && config.rho == 1.0 {
                (hellinger_other_eps(a, value)?, f64::NAN, f64::NAN, "hellinger")
            } else {
                let (o, l0, l1) = max_eps_general(&pair, config.alpha, config.rho, (index, value))?;
                (o, l0, l1, "general")
            };
            let (e0, e1) = if index == 0 { (value, other) } else { (other, value) };
            t.meta.insert("alpha".into(), json!(config.alpha));
            t.meta.insert("rho".into(), json!(config.rho));
            t.meta.insert("bhattacharyya".into(), json!(a));
            t.rows.push(vec![Cell::Num(e0), Cell::Num(e1), Cell::Num(l0), Cell::Num(l1), Cell::Text(mode.into())]);
            Ok(t)
        }
        Command::Surface => {
            let (_, _, pair) = config.nominals()?;
            let report = eps_surface(config.alpha, config.surface_n, Some((&pair, config.rho)))?;
            let mut t = Table::new(vec!["eps0", "eps1", "a", "feasible"]);
            t.meta.insert("alpha".into(), json!(config.alpha));
            t.meta.insert("rho".into(), json!(config.rho));
            t.meta.insert("mode".into(), json!(report.mode));
            t.meta.insert("boundary".into(), json!(report.pairs));
            for c in &report.surface {
                t.rows.push(vec![Cell::Num(c.eps0), Cell::Num(c.eps1), Cell::Num(c.a), Cell::Bool(c.feasible)]);
            }
            Ok(t)
        }
        Command::Evaluate => {
            let (f0, f1, pair) = config.nominals()?;
            let s = solve_thresholds(&config.spec()?, &pair, &solver)?;
            let grid = pair.grid();
            let mut t = Table::new(vec![
                "test", "densities", "method", "p_fa", "p_miss", "p_error", "half_width_fa", "half_width_miss",
            ]);
            t.meta.insert("l_l".into(), json!(s.thresholds.lower));
            t.meta.insert("l_u".into(), json!(s.thresholds.upper));
            let nominal = nominal_rule(&pair, config.rho);
            t.rows.push(report_row("nominal", "nominal", &error_probs(&nominal, pair.f0(), pair.f1(), config.rho, grid)?));
            t.rows.push(report_row("robust", "nominal", &error_probs(&s.delta_hat, pair.f0(), pair.f1(), config.rho, grid)?));
            t.rows.push(report_row("robust", "least_favorable", &solution_errors(&s)?));
            t.rows.push(report_row("nominal", "least_favorable", &error_probs(&nominal, &s.g0_hat, &s.g1_hat, config.rho, grid)?));
            if let Some((n, seed)) = config.mc {
                let r = monte_carlo_errors(nominal_rule_fn(&f0, &f1, config.rho), &f0, &f1, config.rho, n, seed)?;
                t.rows.push(report_row("nominal", "nominal", &r));
                let r = monte_carlo_errors(robust_rule_fn(&s, &f0, &f1), &f0, &f1, config.rho, n, seed)?;
                t.rows.push(report_row("robust", "nominal", &r));
            }
            Ok(t)
        }
        Command::SweepAlpha => {
            let (_, _, pair) = config.nominals()?;
            let rows = alpha_sweep(&config.spec()?, &config.alphas, &pair, &solver);
            let mut t = Table::new(vec!["alpha", "l_l", "l_u", "residual"]);
            for r in rows {
                if let Some(e) = &r.error {
                    log::warn!("alpha = {}: {e}", r.alpha);
                }
                t.rows.push(vec![Cell::Num(r.alpha), Cell::Num(r.l_l), Cell::Num(r.l_u), Cell::Num(r.residual)]);
            }
            Ok(t)
        }
        Command::SweepSnr => {
            let sweep = SnrSweep {
                noise: config.model(&config.noise)?,
                sigma: config.sigma,
                snr_db: config.snr_db.clone(),
                alpha: config.alpha,
                rho: config.rho,
                settings: config.settings.clone(),
                grid_points: config.grid.2,
            };
            let mut t = Table::new(vec!["snr_db", "test", "eps0", "eps1", "p_fa", "p_miss"]);
            t.meta.insert("alpha".into(), json!(config.alpha));
            for r in snr_sweep(&sweep, &solver)? {
                t.rows.push(vec![
                    Cell::Num(r.snr_db),
                    Cell::Text(r.test.label().into()),
                    Cell::Num(r.eps0),
                    Cell::Num(r.eps1),
                    Cell::Num(r.p_fa),
                    Cell::Num(r.p_miss),
                ]);
            }
            Ok(t)
        }
    }
}

/// Runs the configured command, writing to `config.out` or to `stdout`.
pub fn run<W: Write>(config: &RunConfig, stdout: W) -> Result<()> {
    let table = build_table(config)?;
    match &config.out {
        Some(path) => {
            let file = std::io::BufWriter::new(std::fs::File::create(path)?);
            table.write(config.format, file)
        }
        None => table.write(config.format, stdout),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_text_and_comments() {
        let c = RunConfig::parse_text("command = limits # trailing\n\nalpha=0.5\ngrid=-5:5:101\nmc=1000:7\n", None).unwrap();
        assert_eq!(c.command, Command::Limits);
        assert_eq!(c.alpha, 0.5);
        assert_eq!(c.grid, (-5.0, 5.0, 101));
        assert_eq!(c.mc, Some((1000, 7)));
    }

    #[test]
    fn config_rejects_unknown_keys_and_tiny_grids() {
        assert!(RunConfig::parse_text("colour = red", None).is_err());
        assert!(RunConfig::parse_text("grid = 0:1:2", None).is_err());
        assert!(RunConfig::parse_text("command = fly", None).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Infeasible { eps0: 1.0, eps1: 1.0, margin: -0.1 }), 2);
        let nc = Error::NonConvergence { iterations: 1, residual: 1.0, lower: 1.0, upper: 1.0 };
        assert_eq!(exit_code(&nc), 3);
        assert_eq!(exit_code(&Error::GuardBand(1.0)), 1);
        assert_eq!(error_payload(&Error::Infeasible { eps0: 1.0, eps1: 1.0, margin: -0.1 })["margin"], -0.1);
    }

    #[test]
    fn json_writes_null_for_nan() {
        let mut t = Table::new(vec!["x"]);
        t.rows.push(vec![Cell::Num(f64::NAN)]);
        let mut buf = Vec::new();
        t.write_json(&mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert!(v["rows"][0]["x"].is_null());
    }
}
