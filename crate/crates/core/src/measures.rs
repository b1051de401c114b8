//! Empirical measures on the line and in `R^d`, reference distributions, and
//! the step quantile function.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rng::{substream, StreamRng};

/// Uniformly weighted point masses on the real line.
///
/// `sort_perm[r]` is the original index of the `r`-th smallest value. Ties
/// keep their original index order, so the permutation is unique.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure1D {
    values: Vec<f64>,
    sort_perm: Vec<usize>,
}

impl EmpiricalMeasure1D {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Parameter("empirical measure needs at least one point".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!("non-finite value at index {i}")));
        }
        let sort_perm = stable_argsort(&values);
        Ok(Self { values, sort_perm })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Values in original (input) order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sort_perm(&self) -> &[usize] {
        &self.sort_perm
    }

    /// The `rank`-th order statistic, 1-based as in `x_(1) <= ... <= x_(n)`.
    pub fn order_stat(&self, rank: usize) -> f64 {
        self.values[self.sort_perm[rank - 1]]
    }

    pub fn sorted(&self) -> Vec<f64> {
        self.sort_perm.iter().map(|&i| self.values[i]).collect()
    }

    /// Left-continuous quantile `F^{-1}(s) = x_(ceil(n s))`, with `F^{-1}(0)`
    /// defined as the minimum.
    pub fn quantile(&self, s: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Domain(format!("quantile level {s} outside [0, 1]")));
        }
        let n = self.len();
        let rank = ((n as f64) * s).ceil() as usize;
        Ok(self.order_stat(rank.clamp(1, n)))
    }

    pub fn mean(&self) -> f64 {
        crate::par::pairwise_sum(&self.values) / self.len() as f64
    }
}

/// Indices of `values` in non-decreasing order, ties broken by index.
pub fn stable_argsort(values: &[f64]) -> Vec<usize> {
    // sorting (value, index) pairs keeps the keys local; the index breaks ties
    let mut keyed: Vec<(f64, usize)> = values.iter().copied().zip(0..).collect();
    keyed.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, i)| i).collect()
}

/// Uniformly weighted point cloud in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasureD {
    dim: usize,
    data: Vec<f64>,
}

impl EmpiricalMeasureD {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Parameter("dimension must be at least 1".into()));
        }
        if data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(Error::Shape(format!(
                "{} coordinates do not form a non-empty set of {dim}-dimensional points",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        if let Some((i, p)) = points.iter().enumerate().find(|(_, p)| p.len() != dim) {
            return Err(Error::Shape(format!("point {i} has dimension {} but expected {dim}", p.len())));
        }
        Self::new(dim, points.concat())
    }

    /// Scalars viewed as one-dimensional points.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::new(1, values.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Pushes the cloud to the line through `x -> <phi, x>`.
    pub fn project(&self, phi: &[f64]) -> Result<EmpiricalMeasure1D> {
        if phi.len() != self.dim {
            return Err(Error::Shape(format!(
                "direction has dimension {} but points have dimension {}",
                phi.len(),
                self.dim
            )));
        }
        check_unit(phi)?;
        EmpiricalMeasure1D::new(self.points().map(|p| dot(p, phi)).collect())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn check_unit(phi: &[f64]) -> Result<()> {
    let norm = dot(phi, phi).sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::Parameter(format!("direction has norm {norm}, expected 1")));
    }
    Ok(())
}

/// Reference distributions used to draw samples.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceDistribution {
    Uniform { lo: f64, hi: f64 },
    Dirac(f64),
    Mixture(Vec<(f64, SourceDistribution)>),
    /// Uniform law on the unit sphere of `R^d`.
    UniformSphere(usize),
    /// Resamples uniformly from a fixed list of values.
    Custom(Vec<f64>),
}

/// Output of [`sample`]: one-dimensional laws give a sorted-view measure,
/// sphere laws a point cloud.
#[derive(Debug, Clone, PartialEq)]
pub enum Sample {
    Line(EmpiricalMeasure1D),
    Cloud(EmpiricalMeasureD),
}

impl Sample {
    pub fn into_line(self) -> Result<EmpiricalMeasure1D> {
        match self {
            Sample::Line(m) => Ok(m),
            Sample::Cloud(_) => Err(Error::Shape("expected a one-dimensional sample".into())),
        }
    }

    pub fn into_cloud(self) -> EmpiricalMeasureD {
        match self {
            Sample::Line(m) => EmpiricalMeasureD::new(1, m.values).expect("non-empty"),
            Sample::Cloud(c) => c,
        }
    }
}

impl SourceDistribution {
    pub fn uniform(lo: f64, hi: f64) -> Self {
        SourceDistribution::Uniform { lo, hi }
    }

    /// Checks parameters and returns the dimension of the draws.
    pub fn validate(&self) -> Result<usize> {
        match self {
            SourceDistribution::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::Parameter(format!("uniform needs a < b, got ({lo}, {hi})")));
                }
                Ok(1)
            }
            SourceDistribution::Dirac(m) => {
                if !m.is_finite() {
                    return Err(Error::Parameter("dirac location must be finite".into()));
                }
                Ok(1)
            }
            SourceDistribution::UniformSphere(d) => {
                if *d == 0 {
                    return Err(Error::Parameter("sphere dimension must be at least 1".into()));
                }
                Ok(*d)
            }
            SourceDistribution::Custom(values) => {
                if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Parameter("custom sample list must be non-empty and finite".into()));
                }
                Ok(1)
            }
            SourceDistribution::Mixture(parts) => {
                if parts.is_empty() {
                    return Err(Error::Parameter("mixture has no components".into()));
                }
                if parts.iter().any(|(w, _)| !(*w >= 0.0)) {
                    return Err(Error::Parameter("mixture weights must be non-negative".into()));
                }
                let total: f64 = parts.iter().map(|(w, _)| w).sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::Parameter(format!("mixture weights sum to {total}, expected 1")));
                }
                let dim = parts[0].1.validate()?;
                for (_, part) in &parts[1..] {
                    if part.validate()? != dim {
                        return Err(Error::Parameter("mixture components differ in dimension".into()));
                    }
                }
                Ok(dim)
            }
        }
    }

    /// Appends one draw to `out`. Parameters are assumed validated.
    pub fn draw_into(&self, rng: &mut StreamRng, out: &mut Vec<f64>) {
        match self {
            SourceDistribution::Uniform { lo, hi } => {
                let u: f64 = rng.random();
                out.push(lo + (hi - lo) * u);
            }
            SourceDistribution::Dirac(m) => out.push(*m),
            SourceDistribution::Custom(values) => out.push(values[rng.random_range(0..values.len())]),
            SourceDistribution::UniformSphere(d) => loop {
                let g: Vec<f64> = (0..*d).map(|_| rng.sample(StandardNormal)).collect();
                let norm = dot(&g, &g).sqrt();
                if norm > 0.0 {
                    out.extend(g.iter().map(|v| v / norm));
                    break;
                }
            },
            SourceDistribution::Mixture(parts) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let last = parts.len() - 1;
                for (k, (w, part)) in parts.iter().enumerate() {
                    acc += w;
                    if u < acc || k == last {
                        part.draw_into(rng, out);
                        break;
                    }
                }
            }
        }
    }

    /// `n` i.i.d. draws from a caller-held stream.
    pub fn sample_with(&self, n: usize, rng: &mut StreamRng) -> Result<Sample> {
        let dim = self.validate()?;
        if n == 0 {
            return Err(Error::Parameter("sample size must be at least 1".into()));
        }
        let mut data = Vec::with_capacity(n * dim);
        for _ in 0..n {
            self.draw_into(rng, &mut data);
        }
        if matches!(self.root_kind(), RootKind::Sphere) {
            Ok(Sample::Cloud(EmpiricalMeasureD::new(dim, data)?))
        } else {
            Ok(Sample::Line(EmpiricalMeasure1D::new(data)?))
        }
    }

    fn root_kind(&self) -> RootKind {
        match self {
            SourceDistribution::UniformSphere(_) => RootKind::Sphere,
            SourceDistribution::Mixture(parts) => parts[0].1.root_kind(),
            _ => RootKind::Line,
        }
    }
}

enum RootKind {
    Line,
    Sphere,
}

/// `n` i.i.d. draws; the output depends only on `(dist, n, seed)`.
pub fn sample(dist: &SourceDistribution, n: usize, seed: u64) -> Result<Sample> {
    dist.sample_with(n, &mut substream(seed, 0))
}

impl fmt::Display for SourceDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceDistribution::Uniform { lo, hi } => write!(f, "unif({lo},{hi})"),
            SourceDistribution::Dirac(m) => write!(f, "dirac({m})"),
            SourceDistribution::UniformSphere(d) => write!(f, "sphere({d})"),
            SourceDistribution::Custom(values) => {
                write!(f, "custom(")?;
                for (i, v) in values.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, ")")
            }
            SourceDistribution::Mixture(parts) => {
                write!(f, "mix(")?;
                for (i, (w, part)) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, "+")?;
                    }
                    write!(f, "{w}*{part}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl FromStr for SourceDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let mut parser = DistParser { src: compact.as_bytes(), pos: 0 };
        let dist = parser.dist()?;
        if parser.pos != parser.src.len() {
            return Err(parser.error("trailing input"));
        }
        dist.validate()?;
        Ok(dist)
    }
}

impl Serialize for SourceDistribution {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SourceDistribution {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

struct DistParser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl DistParser<'_> {
    fn error(&self, what: &str) -> Error {
        Error::Parse(format!("{what} at offset {} in distribution spec", self.pos))
    }

    fn eat(&mut self, byte: u8) -> Result<()> {
        if self.src.get(self.pos) == Some(&byte) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected '{}'", byte as char)))
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn ident(&mut self) -> &str {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_alphabetic()) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("")
    }

    fn number(&mut self) -> Result<f64> {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_digit() || matches!(c, b'.' | b'-' | b'e' | b'E' | b'+'))
        {
            // '+' only belongs to the number right after an exponent marker
            if self.peek() == Some(b'+') && !matches!(self.src.get(self.pos.wrapping_sub(1)), Some(b'e' | b'E')) {
                break;
            }
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        text.parse().map_err(|_| self.error(&format!("invalid number '{text}'")))
    }

    fn numbers(&mut self) -> Result<Vec<f64>> {
        self.eat(b'(')?;
        let mut out = vec![self.number()?];
        while self.peek() == Some(b',') {
            self.pos += 1;
            out.push(self.number()?);
        }
        self.eat(b')')?;
        Ok(out)
    }

    fn dist(&mut self) -> Result<SourceDistribution> {
        let name = self.ident().to_ascii_lowercase();
        match name.as_str() {
            "unif" | "uniform" => match self.numbers()?.as_slice() {
                &[lo, hi] => Ok(SourceDistribution::Uniform { lo, hi }),
                _ => Err(self.error("unif takes two arguments")),
            },
            "dirac" => match self.numbers()?.as_slice() {
                &[m] => Ok(SourceDistribution::Dirac(m)),
                _ => Err(self.error("dirac takes one argument")),
            },
            "sphere" => match self.numbers()?.as_slice() {
                &[d] if d >= 1.0 && d.fract() == 0.0 => Ok(SourceDistribution::UniformSphere(d as usize)),
                _ => Err(self.error("sphere takes one positive integer")),
            },
            "custom" => Ok(SourceDistribution::Custom(self.numbers()?)),
            "mix" => {
                self.eat(b'(')?;
                let mut parts = Vec::new();
                loop {
                    let w = self.number()?;
                    self.eat(b'*')?;
                    parts.push((w, self.dist()?));
                    if self.peek() == Some(b'+') {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                self.eat(b')')?;
                Ok(SourceDistribution::Mixture(parts))
            }
            other => Err(self.error(&format!("unknown distribution '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(values: &[f64]) -> EmpiricalMeasure1D {
        EmpiricalMeasure1D::new(values.to_vec()).unwrap()
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(line(&[3.0, 1.0, 2.0]).quantile(0.5).unwrap(), 2.0);
        assert_eq!(line(&[7.0]).quantile(1.0).unwrap(), 7.0);
        assert_eq!(line(&[1.0, 2.0, 2.0, 4.0]).quantile(0.75).unwrap(), 2.0);
        assert_eq!(line(&[3.0, 1.0, 2.0]).quantile(0.0).unwrap(), 1.0);
        assert!(matches!(line(&[1.0]).quantile(1.5), Err(Error::Domain(_))));
        assert!(matches!(line(&[1.0]).quantile(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn ties_keep_input_order() {
        let m = line(&[2.0, 1.0, 2.0, 1.0]);
        assert_eq!(m.sort_perm(), &[1, 3, 0, 2]);
    }

    #[test]
    fn projection_examples() {
        let cloud = EmpiricalMeasureD::from_points(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(cloud.project(&[1.0, 0.0]).unwrap().values(), &[1.0, 0.0]);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let single = EmpiricalMeasureD::from_points(&[vec![2.0, 2.0]]).unwrap();
        let v = single.project(&[r, r]).unwrap().values()[0];
        assert!((v - 2.0 * 2f64.sqrt()).abs() < 1e-14);
        assert!(matches!(cloud.project(&[1.0, 0.0, 0.0]), Err(Error::Shape(_))));
        assert!(matches!(cloud.project(&[1.0, 1.0]), Err(Error::Parameter(_))));
    }

    #[test]
    fn dirac_sample() {
        let m = sample(&SourceDistribution::Dirac(5.0), 3, 0).unwrap().into_line().unwrap();
        assert_eq!(m.values(), &[5.0, 5.0, 5.0]);
    }

    #[test]
    fn uniform_mean_concentrates() {
        let m = sample(&SourceDistribution::uniform(0.0, 1.0), 10_000, 1).unwrap().into_line().unwrap();
        assert!((m.mean() - 0.5).abs() <= 0.02);
    }

    #[test]
    fn mixture_atom_fraction() {
        let dist: SourceDistribution = "mix(0.75*unif(0,1)+0.25*dirac(6))".parse().unwrap();
        let m = sample(&dist, 10_000, 2).unwrap().into_line().unwrap();
        let frac = m.values().iter().filter(|&&v| v == 6.0).count() as f64 / 1e4;
        assert!((frac - 0.25).abs() <= 0.02, "{frac}");
    }

    #[test]
    fn sphere_points_have_unit_norm() {
        let c = sample(&SourceDistribution::UniformSphere(3), 50, 9).unwrap().into_cloud();
        assert_eq!(c.dim(), 3);
        for p in c.points() {
            assert!((dot(p, p) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn parse_and_display() {
        for text in ["unif(0,1)", "dirac(6)", "sphere(3)", "mix(0.75*unif(0,1)+0.25*dirac(6))", "custom(1,2.5,-3)"] {
            let d: SourceDistribution = text.parse().unwrap();
            assert_eq!(d.to_string(), text);
        }
        assert_eq!("unif(-1, 1e0)".parse::<SourceDistribution>().unwrap(), SourceDistribution::uniform(-1.0, 1.0));
    }

    #[test]
    fn invalid_parameters() {
        assert!(matches!("unif(1,0)".parse::<SourceDistribution>(), Err(Error::Parameter(_))));
        assert!(matches!("mix(0.5*unif(0,1)+0.4*dirac(1))".parse::<SourceDistribution>(), Err(Error::Parameter(_))));
        assert!(matches!("gauss(0,1)".parse::<SourceDistribution>(), Err(Error::Parse(_))));
        assert!(matches!("mix(0.5*unif(0,1)+0.5*sphere(2))".parse::<SourceDistribution>(), Err(Error::Parameter(_))));
        assert!(sample(&SourceDistribution::Dirac(1.0), 0, 0).is_err());
    }
}
