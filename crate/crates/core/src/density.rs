//! Nominal and derived densities on a common one-dimensional grid.
//!
//! Analytic families (Gaussian, Gaussian mixture, shifted copies) are
//! evaluated in closed form; tabulated densities are piecewise linear between
//! their nodes and renormalized when constructed. Every integral in the crate
//! goes through a [`QuadratureGrid`], so region masks and divergences are
//! computed on exactly the same nodes.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};

/// Default number of nodes for a uniform grid.
pub const DEFAULT_GRID_POINTS: usize = 4001;

/// Relative density level below which analytic supports are truncated.
const SUPPORT_RELATIVE_FLOOR: f64 = 1e-16;

/// Half-width, in standard deviations, where a Gaussian falls to
/// `SUPPORT_RELATIVE_FLOOR` of its peak.
fn gaussian_half_width(stddev: f64) -> f64 {
    stddev * (-2.0 * SUPPORT_RELATIVE_FLOOR.ln()).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum QuadratureRule {
    /// Composite trapezoid over ordered nodes.
    Trapezoid,
    /// Counting measure: every node is an atom with weight one.
    Counting,
}

/// Nodes and weights realizing `∫ · dμ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureGrid {
    points: Vec<f64>,
    weights: Vec<f64>,
    rule: QuadratureRule,
}

impl QuadratureGrid {
    /// Uniform composite-trapezoid grid on `[y_min, y_max]`.
    pub fn uniform(y_min: f64, y_max: f64, count: usize) -> Result<Self> {
        if !(y_min.is_finite() && y_max.is_finite()) || y_min >= y_max {
            return Err(Error::InvalidArgument(format!(
                "grid bounds must satisfy y_min < y_max, got [{y_min}, {y_max}]"
            )));
        }
        if count < 3 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 3 points, got {count}"
            )));
        }
        let step = (y_max - y_min) / (count - 1) as f64;
        let points: Vec<f64> = (0..count)
            .map(|i| {
                if i == count - 1 {
                    y_max
                } else {
                    y_min + step * i as f64
                }
            })
            .collect();
        Self::trapezoid(points)
    }

    /// Composite trapezoid over arbitrary strictly increasing nodes.
    pub fn trapezoid(points: Vec<f64>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 3 points, got {}",
                points.len()
            )));
        }
        if points.iter().any(|p| !p.is_finite()) || points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "grid points must be finite and strictly increasing".into(),
            ));
        }
        let n = points.len();
        let mut weights = vec![0.0; n];
        for i in 0..n - 1 {
            let half = 0.5 * (points[i + 1] - points[i]);
            weights[i] += half;
            weights[i + 1] += half;
        }
        Ok(Self {
            points,
            weights,
            rule: QuadratureRule::Trapezoid,
        })
    }

    /// Counting measure on `count` atoms labelled `0, 1, ..., count - 1`.
    pub fn counting(count: usize) -> Result<Self> {
        if count < 3 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 3 points, got {count}"
            )));
        }
        Ok(Self {
            points: (0..count).map(|i| i as f64).collect(),
            weights: vec![1.0; count],
            rule: QuadratureRule::Counting,
        })
    }

    /// Uniform grid spanning the union of the models' supports.
    pub fn covering(models: &[&DensityModel], count: usize) -> Result<Self> {
        let (lo, hi) = models
            .iter()
            .map(|m| m.support())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| {
                (lo.min(a), hi.max(b))
            });
        Self::uniform(lo, hi, count)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rule(&self) -> QuadratureRule {
        self.rule
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.points[0], self.points[self.points.len() - 1])
    }

    /// Weighted sum `Σ wᵢ vᵢ`.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: values.len(),
            });
        }
        Ok(self.weighted_sum(values.iter().copied()))
    }

    pub(crate) fn weighted_sum<I: IntoIterator<Item = f64>>(&self, values: I) -> f64 {
        self.weights
            .iter()
            .zip(values)
            .map(|(w, v)| if v == 0.0 { 0.0 } else { w * v })
            .sum()
    }

    /// Density values at every node.
    pub fn tabulate(&self, model: &DensityModel) -> Vec<f64> {
        self.points.iter().map(|&y| model.evaluate(y)).collect()
    }

    /// Index `j` such that the node at `j` mirrors node `i` about zero, if the
    /// grid is symmetric.
    pub(crate) fn is_symmetric(&self, tol: f64) -> bool {
        let n = self.len();
        (0..n).all(|i| (self.points[i] + self.points[n - 1 - i]).abs() <= tol)
    }
}

/// One Gaussian component of a mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Component {
    pub weight: f64,
    pub mean: f64,
    pub stddev: f64,
}

/// Piecewise-linear density on strictly increasing nodes, normalized to unit
/// trapezoid mass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tabulated {
    points: Vec<f64>,
    values: Vec<f64>,
    #[serde(skip)]
    cdf: Vec<f64>,
}

impl Tabulated {
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn evaluate(&self, y: f64) -> f64 {
        let n = self.points.len();
        if !(y >= self.points[0] && y <= self.points[n - 1]) {
            return 0.0;
        }
        let j = self.points.partition_point(|&p| p <= y).clamp(1, n - 1);
        let (y0, y1) = (self.points[j - 1], self.points[j]);
        let t = (y - y0) / (y1 - y0);
        self.values[j - 1] + t * (self.values[j] - self.values[j - 1])
    }

    fn inverse_cdf(&self, u: f64) -> f64 {
        let n = self.cdf.len();
        let j = self.cdf.partition_point(|&c| c < u).clamp(1, n - 1);
        let (c0, c1) = (self.cdf[j - 1], self.cdf[j]);
        let (y0, y1) = (self.points[j - 1], self.points[j]);
        if c1 <= c0 {
            return y0;
        }
        y0 + (u - c0) / (c1 - c0) * (y1 - y0)
    }
}

/// A probability density on the real line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum DensityModel {
    Gaussian { mean: f64, stddev: f64 },
    Mixture(Vec<Component>),
    Shifted { base: Box<DensityModel>, shift: f64 },
    Tabulated(Tabulated),
}

fn normal_pdf(y: f64, mean: f64, stddev: f64) -> f64 {
    let z = (y - mean) / stddev;
    (-0.5 * z * z).exp() / (stddev * (2.0 * PI).sqrt())
}

fn check_gaussian(mean: f64, stddev: f64) -> Result<()> {
    if !mean.is_finite() {
        return Err(Error::InvalidModel(format!("mean must be finite, got {mean}")));
    }
    if !(stddev.is_finite() && stddev > 0.0) {
        return Err(Error::InvalidModel(format!(
            "stddev must be positive, got {stddev}"
        )));
    }
    Ok(())
}

impl DensityModel {
    pub fn gaussian(mean: f64, stddev: f64) -> Result<Self> {
        check_gaussian(mean, stddev)?;
        Ok(Self::Gaussian { mean, stddev })
    }

    /// Mixture of Gaussians from `(weight, mean, stddev)` triples. Weights are
    /// rescaled to sum to one.
    pub fn mixture(components: &[(f64, f64, f64)]) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidModel("mixture needs at least one component".into()));
        }
        let mut total = 0.0;
        for &(w, m, s) in components {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidModel(format!(
                    "mixture weights must be nonnegative, got {w}"
                )));
            }
            check_gaussian(m, s)?;
            total += w;
        }
        if total <= 0.0 {
            return Err(Error::InvalidModel("mixture weights sum to zero".into()));
        }
        Ok(Self::Mixture(
            components
                .iter()
                .map(|&(weight, mean, stddev)| Component {
                    weight: weight / total,
                    mean,
                    stddev,
                })
                .collect(),
        ))
    }

    /// Law of `Y = W + shift` where `W` follows `base`.
    pub fn shifted(base: DensityModel, shift: f64) -> Result<Self> {
        if !shift.is_finite() {
            return Err(Error::InvalidModel(format!("shift must be finite, got {shift}")));
        }
        Ok(Self::Shifted {
            base: Box::new(base),
            shift,
        })
    }

    /// Piecewise-linear density through `(points, values)`, renormalized to
    /// unit trapezoid mass.
    pub fn tabulated(points: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::LengthMismatch {
                expected: points.len(),
                got: values.len(),
            });
        }
        if points.len() < 2 {
            return Err(Error::InvalidModel("table needs at least two rows".into()));
        }
        if points.iter().any(|p| !p.is_finite()) || points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidModel(
                "table abscissae must be finite and strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidModel("table values must be finite and nonnegative".into()));
        }
        let mut cdf = Vec::with_capacity(points.len());
        cdf.push(0.0);
        for i in 1..points.len() {
            let cell = 0.5 * (values[i] + values[i - 1]) * (points[i] - points[i - 1]);
            cdf.push(cdf[i - 1] + cell);
        }
        let mass = cdf[cdf.len() - 1];
        if !(mass > 0.0) {
            return Err(Error::InvalidModel("table has zero mass".into()));
        }
        let values = values.into_iter().map(|v| v / mass).collect();
        let cdf = cdf.into_iter().map(|c| c / mass).collect();
        Ok(Self::Tabulated(Tabulated { points, values, cdf }))
    }

    /// Tabulated density sampled from a grid's nodes.
    pub fn from_grid(grid: &QuadratureGrid, values: &[f64]) -> Result<Self> {
        Self::tabulated(grid.points().to_vec(), values.to_vec())
    }

    /// Density value; zero outside the support of tabulated models.
    pub fn evaluate(&self, y: f64) -> f64 {
        match self {
            Self::Gaussian { mean, stddev } => normal_pdf(y, *mean, *stddev),
            Self::Mixture(components) => components
                .iter()
                .map(|c| c.weight * normal_pdf(y, c.mean, c.stddev))
                .sum(),
            Self::Shifted { base, shift } => base.evaluate(y - shift),
            Self::Tabulated(t) => t.evaluate(y),
        }
    }

    /// Interval outside which the density is negligible (tabulated: exact
    /// support; analytic: below 1e-16 of the peak).
    pub fn support(&self) -> (f64, f64) {
        match self {
            Self::Gaussian { mean, stddev } => {
                let h = gaussian_half_width(*stddev);
                (mean - h, mean + h)
            }
            Self::Mixture(components) => components
                .iter()
                .filter(|c| c.weight > 0.0)
                .map(|c| {
                    let h = gaussian_half_width(c.stddev);
                    (c.mean - h, c.mean + h)
                })
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| {
                    (lo.min(a), hi.max(b))
                }),
            Self::Shifted { base, shift } => {
                let (lo, hi) = base.support();
                (lo + shift, hi + shift)
            }
            Self::Tabulated(t) => (t.points[0], t.points[t.points.len() - 1]),
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Gaussian { mean, stddev } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + stddev * z
            }
            Self::Mixture(components) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut chosen = &components[components.len() - 1];
                for c in components {
                    acc += c.weight;
                    if u < acc {
                        chosen = c;
                        break;
                    }
                }
                let z: f64 = rng.sample(StandardNormal);
                chosen.mean + chosen.stddev * z
            }
            Self::Shifted { base, shift } => base.draw(rng) + shift,
            Self::Tabulated(t) => t.inverse_cdf(rng.random()),
        }
    }

    /// `n` i.i.d. draws; deterministic for a given seed.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(n, &mut rng)
    }

    pub(crate) fn sample_with<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n).map(|_| self.draw(rng)).collect()
    }

    /// Parses the density grammar used by config files:
    /// `gaussian(mu,sigma)`, `mixture(w1*gaussian(m1,s1)+...)`,
    /// `shift(<spec>,A)` and `table(<path.csv>)`. Relative table paths are
    /// resolved against `base_dir`.
    pub fn parse(spec: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut parser = SpecParser {
            src: spec,
            pos: 0,
            base_dir,
        };
        let model = parser.model()?;
        parser.skip_ws();
        if parser.pos != spec.len() {
            return Err(parser.fail("trailing characters"));
        }
        Ok(model)
    }

    /// Loads a `y,value` CSV table.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let headers = reader.headers()?.clone();
        let cols: Vec<&str> = headers.iter().map(str::trim).collect();
        if cols != ["y", "value"] {
            return Err(Error::InvalidModel(format!(
                "{}: expected header `y,value`, got `{}`",
                path.display(),
                cols.join(",")
            )));
        }
        let mut ys = Vec::new();
        let mut vs = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            let parse = |idx: usize| -> Result<f64> {
                let field = record.get(idx).unwrap_or("").trim();
                field.parse::<f64>().map_err(|_| {
                    Error::InvalidModel(format!(
                        "{}: row {}: cannot parse `{field}` as a number",
                        path.display(),
                        row + 2
                    ))
                })
            };
            ys.push(parse(0)?);
            vs.push(parse(1)?);
        }
        Self::tabulated(ys, vs)
    }
}

struct SpecParser<'a> {
    src: &'a str,
    pos: usize,
    base_dir: Option<&'a Path>,
}

impl SpecParser<'_> {
    fn fail(&self, reason: &str) -> Error {
        Error::Parse {
            spec: self.src.to_string(),
            reason: format!("{reason} at offset {}", self.pos),
        }
    }

    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(char::is_whitespace) {
            self.pos += self.src[self.pos..].chars().next().map_or(1, char::len_utf8);
        }
    }

    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, token: &str) -> Result<()> {
        if self.eat(token) {
            Ok(())
        } else {
            Err(self.fail(&format!("expected `{token}`")))
        }
    }

    fn ident(&mut self) -> Result<&str> {
        self.skip_ws();
        let start = self.pos;
        let len = self.src[start..]
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(self.src.len() - start);
        if len == 0 {
            return Err(self.fail("expected a name"));
        }
        self.pos += len;
        Ok(&self.src[start..start + len])
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[start..];
        let mut len = 0;
        for (i, c) in rest.char_indices() {
            let prev = rest[..i].chars().last();
            let ok = c.is_ascii_digit()
                || c == '.'
                || c == 'e'
                || c == 'E'
                || ((c == '-' || c == '+') && (i == 0 || matches!(prev, Some('e' | 'E'))));
            if !ok {
                break;
            }
            len = i + c.len_utf8();
        }
        let text = &rest[..len];
        let value = text
            .parse::<f64>()
            .map_err(|_| self.fail(&format!("expected a number, found `{text}`")))?;
        self.pos += len;
        Ok(value)
    }

    fn gaussian_args(&mut self) -> Result<(f64, f64)> {
        self.expect("(")?;
        let m = self.number()?;
        self.expect(",")?;
        let s = self.number()?;
        self.expect(")")?;
        Ok((m, s))
    }

    fn model(&mut self) -> Result<DensityModel> {
        let name = self.ident()?.to_ascii_lowercase();
        match name.as_str() {
            "gaussian" | "normal" => {
                let (m, s) = self.gaussian_args()?;
                DensityModel::gaussian(m, s)
            }
            "mixture" => {
                self.expect("(")?;
                let mut components = Vec::new();
                loop {
                    let w = self.number()?;
                    self.expect("*")?;
                    let kind = self.ident()?.to_ascii_lowercase();
                    if kind != "gaussian" && kind != "normal" {
                        return Err(self.fail("mixture components must be gaussian(mu,sigma)"));
                    }
                    let (m, s) = self.gaussian_args()?;
                    components.push((w, m, s));
                    if !self.eat("+") {
                        break;
                    }
                }
                self.expect(")")?;
                DensityModel::mixture(&components)
            }
            "shift" => {
                self.expect("(")?;
                let base = self.model()?;
                self.expect(",")?;
                let a = self.number()?;
                self.expect(")")?;
                DensityModel::shifted(base, a)
            }
            "table" => {
                self.expect("(")?;
                self.skip_ws();
                let start = self.pos;
                let end = self.src[start..]
                    .find(')')
                    .map(|i| start + i)
                    .ok_or_else(|| self.fail("unterminated table path"))?;
                let raw = self.src[start..end].trim();
                self.pos = end + 1;
                let path = Path::new(raw);
                let resolved = match (path.is_relative(), self.base_dir) {
                    (true, Some(dir)) => dir.join(path),
                    _ => path.to_path_buf(),
                };
                DensityModel::from_csv(&resolved)
            }
            other => Err(self.fail(&format!("unknown density family `{other}`"))),
        }
    }
}

/// `f1(y) / f0(y)` with the conventions `+∞` for `f0 = 0 < f1` and `1` for
/// `0 / 0`.
pub fn likelihood_ratio(f0: &DensityModel, f1: &DensityModel, y: f64) -> f64 {
    ratio(f1.evaluate(y), f0.evaluate(y))
}

pub(crate) fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

/// A pair of nominal densities tabulated on a grid together with their
/// likelihood ratio `l = f1 / f0` at every node.
#[derive(Debug, Clone)]
pub struct NominalPair {
    grid: QuadratureGrid,
    f0: Vec<f64>,
    f1: Vec<f64>,
    l: Vec<f64>,
}

impl NominalPair {
    pub fn tabulate(f0: &DensityModel, f1: &DensityModel, grid: &QuadratureGrid) -> Self {
        let v0 = grid.tabulate(f0);
        let v1 = grid.tabulate(f1);
        Self::from_values(grid.clone(), v0, v1).expect("tabulated lengths match the grid")
    }

    pub fn from_values(grid: QuadratureGrid, f0: Vec<f64>, f1: Vec<f64>) -> Result<Self> {
        for v in [&f0, &f1] {
            if v.len() != grid.len() {
                return Err(Error::LengthMismatch {
                    expected: grid.len(),
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::InvalidModel(
                    "nominal values must be finite and nonnegative".into(),
                ));
            }
        }
        let l = f0.iter().zip(&f1).map(|(&a, &b)| ratio(b, a)).collect();
        Ok(Self { grid, f0, f1, l })
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn f0(&self) -> &[f64] {
        &self.f0
    }

    pub fn f1(&self) -> &[f64] {
        &self.f1
    }

    pub fn l(&self) -> &[f64] {
        &self.l
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Smallest and largest likelihood ratio over nodes carrying mass.
    pub fn lr_range(&self) -> (f64, f64) {
        self.l
            .iter()
            .zip(self.f0.iter().zip(&self.f1))
            .filter(|(_, (a, b))| **a > 0.0 || **b > 0.0)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&l, _)| {
                (lo.min(l), hi.max(l))
            })
    }

    /// Whether `f1(y) = f0(-y)` within `tol` on a grid symmetric about zero.
    pub fn is_mirror_symmetric(&self, tol: f64) -> bool {
        let n = self.len();
        self.grid.rule() == QuadratureRule::Trapezoid
            && self.grid.is_symmetric(1e-9)
            && (0..n).all(|i| (self.f1[i] - self.f0[n - 1 - i]).abs() <= tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_grid() -> QuadratureGrid {
        QuadratureGrid::uniform(-10.0, 10.0, DEFAULT_GRID_POINTS).unwrap()
    }

    #[test]
    fn gaussian_peak() {
        let g = DensityModel::gaussian(0.0, 1.0).unwrap();
        assert!((g.evaluate(0.0) - 0.398_942_280_401_432_7).abs() < 1e-15);
    }

    #[test]
    fn symmetric_mixture_at_origin() {
        let m = DensityModel::mixture(&[(0.5, -2.0, 1.0), (0.5, 2.0, 1.0)]).unwrap();
        let phi2 = (-2.0f64).exp() / (2.0 * PI).sqrt();
        assert!((m.evaluate(0.0) - phi2).abs() < 1e-15);
        assert!((m.evaluate(0.0) - 0.053_990_966_513_188_06).abs() < 1e-12);
    }

    #[test]
    fn tabulated_is_zero_outside_support() {
        let t = DensityModel::tabulated(vec![0.0, 0.5, 1.0], vec![1.0, 1.0, 1.0]).unwrap();
        assert_eq!(t.evaluate(-0.1), 0.0);
        assert_eq!(t.evaluate(1.5), 0.0);
        assert!((t.evaluate(0.3) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tabulated_is_renormalized() {
        let t = DensityModel::tabulated(vec![0.0, 1.0, 2.0], vec![2.0, 2.0, 2.0]).unwrap();
        assert!((t.evaluate(1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn construction_errors() {
        assert!(DensityModel::gaussian(0.0, 0.0).is_err());
        assert!(DensityModel::gaussian(0.0, -1.0).is_err());
        assert!(DensityModel::mixture(&[(-0.1, 0.0, 1.0), (1.1, 1.0, 1.0)]).is_err());
        assert!(DensityModel::tabulated(vec![0.0, 0.0, 1.0], vec![1.0; 3]).is_err());
        assert!(DensityModel::tabulated(vec![0.0, 1.0], vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn integrate_normalization_and_mean() {
        let grid = std_grid();
        let f = DensityModel::gaussian(0.0, 1.0).unwrap();
        let v = grid.tabulate(&f);
        assert!((grid.integrate(&v).unwrap() - 1.0).abs() < 1e-8);

        let f3 = DensityModel::gaussian(3.0, 1.0).unwrap();
        let g = QuadratureGrid::uniform(-7.0, 13.0, DEFAULT_GRID_POINTS).unwrap();
        let ym: Vec<f64> = g.points().iter().map(|&y| y * f3.evaluate(y)).collect();
        assert!((g.integrate(&ym).unwrap() - 3.0).abs() < 1e-6);
    }

    #[test]
    fn integrate_constant_on_unit_interval() {
        let g = QuadratureGrid::uniform(0.0, 1.0, 11).unwrap();
        assert!((g.integrate(&[1.0; 11]).unwrap() - 1.0).abs() < 1e-15);
        let w: f64 = g.weights().iter().sum();
        assert!((w - 1.0).abs() < 1e-12);
    }

    #[test]
    fn integrate_rejects_length_mismatch() {
        let g = QuadratureGrid::uniform(0.0, 1.0, 11).unwrap();
        assert!(matches!(
            g.integrate(&[1.0; 10]),
            Err(Error::LengthMismatch { expected: 11, got: 10 })
        ));
    }

    #[test]
    fn trapezoid_exact_for_piecewise_linear() {
        let g = QuadratureGrid::trapezoid(vec![0.0, 0.3, 1.0, 2.5]).unwrap();
        let v: Vec<f64> = g.points().iter().map(|&y| 2.0 * y + 1.0).collect();
        assert!((g.integrate(&v).unwrap() - (2.5f64 * 2.5 + 2.5)).abs() < 1e-12);
    }

    #[test]
    fn likelihood_ratio_gaussian_pair() {
        let f0 = DensityModel::gaussian(-1.0, 1.0).unwrap();
        let f1 = DensityModel::gaussian(1.0, 1.0).unwrap();
        assert!((likelihood_ratio(&f0, &f1, 0.0) - 1.0).abs() < 1e-15);
        assert!((likelihood_ratio(&f0, &f1, 0.5) - 1f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn likelihood_ratio_conventions() {
        let a = DensityModel::tabulated(vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        let b = DensityModel::tabulated(vec![2.0, 3.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(likelihood_ratio(&a, &b, 2.5), f64::INFINITY);
        assert_eq!(likelihood_ratio(&a, &b, 0.5), 0.0);
        assert_eq!(likelihood_ratio(&a, &b, 10.0), 1.0);
    }

    #[test]
    fn mixture_ratio_matches_direct_quotient() {
        // f0 = ½N(-2,1)+½N(2,1), f1 = f0(· - 1) at y = -1.5
        let w = DensityModel::mixture(&[(0.5, -2.0, 1.0), (0.5, 2.0, 1.0)]).unwrap();
        let f1 = DensityModel::shifted(w.clone(), 1.0).unwrap();
        let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
        let direct = (0.5 * phi(-1.5 + 1.0) + 0.5 * phi(-1.5 - 3.0))
            / (0.5 * phi(-1.5 + 2.0) + 0.5 * phi(-1.5 - 2.0));
        let got = likelihood_ratio(&w, &f1, -1.5);
        assert!((got - direct).abs() < 1e-14);
        assert!((got - 0.997_572_664_516_210).abs() < 1e-12, "{got}");
    }

    #[test]
    fn shifted_is_exact_translation() {
        let base = DensityModel::mixture(&[(0.3, -1.0, 0.7), (0.7, 2.0, 1.3)]).unwrap();
        let s = DensityModel::shifted(base.clone(), 1.25).unwrap();
        for y in [-3.0, -0.2, 0.0, 1.7, 4.4] {
            assert_eq!(s.evaluate(y), base.evaluate(y - 1.25));
        }
    }

    #[test]
    fn gaussian_sample_mean() {
        let g = DensityModel::gaussian(0.0, 1.0).unwrap();
        let n = 100_000;
        let xs = g.sample(n, 7);
        let mean = xs.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn tabulated_uniform_sample_ks() {
        let u = DensityModel::tabulated(vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        let mut xs = u.sample(100_000, 3);
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| (x - i as f64 / n).abs().max((x - (i + 1) as f64 / n).abs()))
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "KS = {ks}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = DensityModel::mixture(&[(0.5, -2.0, 1.0), (0.5, 2.0, 1.0)]).unwrap();
        assert_eq!(m.sample(1000, 42), m.sample(1000, 42));
        assert_ne!(m.sample(1000, 42), m.sample(1000, 43));
    }

    #[test]
    fn parse_grammar() {
        let g = DensityModel::parse("gaussian(-1, 1)", None).unwrap();
        assert_eq!(g, DensityModel::gaussian(-1.0, 1.0).unwrap());
        let m = DensityModel::parse("mixture(0.5*gaussian(-2,1)+0.5*gaussian(2,1))", None).unwrap();
        assert_eq!(
            m,
            DensityModel::mixture(&[(0.5, -2.0, 1.0), (0.5, 2.0, 1.0)]).unwrap()
        );
        let s = DensityModel::parse("shift(mixture(0.5*gaussian(-2,1)+0.5*gaussian(2,1)),1e0)", None)
            .unwrap();
        assert!((s.evaluate(1.0) - m.evaluate(0.0)).abs() < 1e-15);
        assert!(DensityModel::parse("cauchy(0,1)", None).is_err());
        assert!(DensityModel::parse("gaussian(0,1) extra", None).is_err());
        assert!(DensityModel::parse("gaussian(0,-1)", None).is_err());
    }

    #[test]
    fn parse_table_from_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        std::fs::write(&path, "y,value\n0,1\n0.5,1\n1,1\n").unwrap();
        let t = DensityModel::parse("table(u.csv)", Some(dir.path())).unwrap();
        assert!((t.evaluate(0.25) - 1.0).abs() < 1e-15);

        std::fs::write(&path, "x,value\n0,1\n1,1\n").unwrap();
        assert!(DensityModel::parse("table(u.csv)", Some(dir.path())).is_err());
        std::fs::write(&path, "y,value\n0,1\n0,1\n").unwrap();
        assert!(DensityModel::parse("table(u.csv)", Some(dir.path())).is_err());
    }

    #[test]
    fn nominal_pair_symmetry_detection() {
        let grid = std_grid();
        let f0 = DensityModel::gaussian(-1.0, 1.0).unwrap();
        let f1 = DensityModel::gaussian(1.0, 1.0).unwrap();
        let pair = NominalPair::tabulate(&f0, &f1, &grid);
        assert!(pair.is_mirror_symmetric(1e-8));
        let f2 = DensityModel::gaussian(1.1, 1.0).unwrap();
        assert!(!NominalPair::tabulate(&f0, &f2, &grid).is_mirror_symmetric(1e-8));
    }
}
