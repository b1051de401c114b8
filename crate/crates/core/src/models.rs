//! Parametric models `(theta, x) -> value` with their parameter Jacobians.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Dense row-major matrix of partial derivatives, `rows = d'`, `cols = p`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Jacobian {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "jacobian data has wrong length");
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// Entries in row-major order.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `J^T v`.
    pub fn transpose_mul(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (r, &vr) in v.iter().enumerate().take(self.rows) {
            for (o, j) in out.iter_mut().zip(self.row(r)) {
                *o += vr * j;
            }
        }
        out
    }
}

/// Which one-sided derivative to take at a kink.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A map `(theta, x) -> R^{d'}` that is differentiable in `theta` away from a
/// declared kink set.
pub trait ParamModel: Send + Sync + fmt::Debug {
    /// Parameter dimension `p`.
    fn param_dim(&self) -> usize;
    /// Input dimension `d`.
    fn input_dim(&self) -> usize;
    /// Output dimension `d'`.
    fn output_dim(&self) -> usize;

    fn eval(&self, theta: &[f64], x: &[f64]) -> Result<Vec<f64>>;

    /// Partial derivatives in `theta`; fails with [`Error::Kink`] at a
    /// declared kink instead of picking a branch.
    fn jac_theta(&self, theta: &[f64], x: &[f64]) -> Result<Jacobian>;

    /// One-sided Jacobian along `+e` (right) or `-e` (left) directions. Only
    /// meaningful for scalar `theta`; smooth models return `jac_theta`.
    fn one_sided_jac(&self, theta: &[f64], x: &[f64], _side: Side) -> Result<Jacobian> {
        self.jac_theta(theta, x)
    }

    fn eval_scalar(&self, theta: &[f64], x: &[f64]) -> Result<f64> {
        Ok(self.eval(theta, x)?[0])
    }

    /// Gradient of a scalar-output model.
    fn grad_scalar(&self, theta: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.jac_theta(theta, x)?.row(0).to_vec())
    }

    /// `acc += a * grad_scalar(theta, x)`.
    fn add_grad_scalar(&self, theta: &[f64], x: &[f64], a: f64, acc: &mut [f64]) -> Result<()> {
        for (o, g) in acc.iter_mut().zip(self.grad_scalar(theta, x)?) {
            *o += a * g;
        }
        Ok(())
    }
}

pub(crate) fn check_dims(model: &dyn ParamModel, theta: &[f64], x: &[f64]) -> Result<()> {
    if theta.len() != model.param_dim() {
        return Err(Error::Shape(format!("theta has length {} but model expects {}", theta.len(), model.param_dim())));
    }
    if x.len() != model.input_dim() {
        return Err(Error::Shape(format!("input has length {} but model expects {}", x.len(), model.input_dim())));
    }
    Ok(())
}

pub(crate) fn require_scalar_output(model: &dyn ParamModel, role: &str) -> Result<()> {
    if model.output_dim() != 1 {
        return Err(Error::Shape(format!("{role} must have scalar output, got dimension {}", model.output_dim())));
    }
    Ok(())
}

fn relu(t: f64) -> f64 {
    t.max(0.0)
}

/// Concrete models used by the objectives, experiments and CLI.
#[derive(Debug, Clone, PartialEq)]
pub enum BuiltinModel {
    /// `x + theta` in `R^dim`.
    Translation { dim: usize },
    /// `y`, ignoring a parameter of length `param_dim`.
    Identity { dim: usize, param_dim: usize },
    /// `x + relu(theta)`, scalar; kink at `theta = 0`.
    ReluShift,
    /// `x + chi(x) relu(theta) + (1 - chi(x)) theta`, scalar, where `chi` is
    /// 1 on `(-inf, 1.5]`, 0 on `[atom - 1, inf)` and affine in between.
    ChiInterpolated { atom: f64 },
    /// `A x + b` with `theta = (A row-major, b)`, `A` of shape `output x input`.
    Affine { input: usize, output: usize },
    /// `<theta, x>`.
    LinearScore { dim: usize },
    /// `((<theta, a> - b)^2) / 2` for inputs `x = (a, b)`, `a` in `R^dim`.
    SquaredLoss { dim: usize },
    /// `theta` in `R^dim` regardless of the input.
    Constant { dim: usize, input: usize },
}

impl BuiltinModel {
    /// Start of the ramp of the interpolation weight.
    pub const CHI_RAMP_START: f64 = 1.5;

    pub fn chi(atom: f64) -> Result<Self> {
        if !(atom > Self::CHI_RAMP_START + 1.0) || !atom.is_finite() {
            return Err(Error::Parameter(format!("chi model needs M > 2.5, got {atom}")));
        }
        Ok(BuiltinModel::ChiInterpolated { atom })
    }

    /// Interpolation weight of [`BuiltinModel::ChiInterpolated`].
    pub fn chi_weight(atom: f64, x: f64) -> f64 {
        let end = atom - 1.0;
        if x <= Self::CHI_RAMP_START {
            1.0
        } else if x >= end {
            0.0
        } else {
            (end - x) / (end - Self::CHI_RAMP_START)
        }
    }

    fn validate(&self) -> Result<()> {
        let dims_ok = match *self {
            BuiltinModel::Translation { dim }
            | BuiltinModel::LinearScore { dim }
            | BuiltinModel::SquaredLoss { dim } => dim > 0,
            BuiltinModel::Identity { dim, param_dim } => dim > 0 && param_dim > 0,
            BuiltinModel::Affine { input, output } => input > 0 && output > 0,
            BuiltinModel::Constant { dim, input } => dim > 0 && input > 0,
            BuiltinModel::ReluShift => true,
            BuiltinModel::ChiInterpolated { atom } => return Self::chi(atom).map(|_| ()),
        };
        if dims_ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!("model {self} has a zero dimension")))
        }
    }
}

impl ParamModel for BuiltinModel {
    fn param_dim(&self) -> usize {
        match *self {
            BuiltinModel::Translation { dim } | BuiltinModel::LinearScore { dim } | BuiltinModel::SquaredLoss { dim } => dim,
            BuiltinModel::Identity { param_dim, .. } => param_dim,
            BuiltinModel::ReluShift | BuiltinModel::ChiInterpolated { .. } => 1,
            BuiltinModel::Affine { input, output } => output * input + output,
            BuiltinModel::Constant { dim, .. } => dim,
        }
    }

    fn input_dim(&self) -> usize {
        match *self {
            BuiltinModel::Translation { dim } | BuiltinModel::Identity { dim, .. } | BuiltinModel::LinearScore { dim } => dim,
            BuiltinModel::ReluShift | BuiltinModel::ChiInterpolated { .. } => 1,
            BuiltinModel::Affine { input, .. } | BuiltinModel::Constant { input, .. } => input,
            BuiltinModel::SquaredLoss { dim } => dim + 1,
        }
    }

    fn output_dim(&self) -> usize {
        match *self {
            BuiltinModel::Translation { dim } | BuiltinModel::Identity { dim, .. } | BuiltinModel::Constant { dim, .. } => dim,
            BuiltinModel::Affine { output, .. } => output,
            BuiltinModel::ReluShift
            | BuiltinModel::ChiInterpolated { .. }
            | BuiltinModel::LinearScore { .. }
            | BuiltinModel::SquaredLoss { .. } => 1,
        }
    }

    fn eval(&self, theta: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        check_dims(self, theta, x)?;
        Ok(match *self {
            BuiltinModel::Translation { .. } => x.iter().zip(theta).map(|(a, t)| a + t).collect(),
            BuiltinModel::Identity { .. } => x.to_vec(),
            BuiltinModel::Constant { .. } => theta.to_vec(),
            BuiltinModel::Affine { input, output } => {
                let (a, b) = theta.split_at(output * input);
                (0..output)
                    .map(|r| b[r] + a[r * input..(r + 1) * input].iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
                    .collect()
            }
            _ => vec![self.eval_scalar(theta, x)?],
        })
    }

    fn eval_scalar(&self, theta: &[f64], x: &[f64]) -> Result<f64> {
        check_dims(self, theta, x)?;
        Ok(match *self {
            BuiltinModel::Translation { dim: 1 } => x[0] + theta[0],
            BuiltinModel::Identity { dim: 1, .. } => x[0],
            BuiltinModel::ReluShift => x[0] + relu(theta[0]),
            BuiltinModel::ChiInterpolated { atom } => {
                let chi = Self::chi_weight(atom, x[0]);
                x[0] + chi * relu(theta[0]) + (1.0 - chi) * theta[0]
            }
            BuiltinModel::LinearScore { .. } => theta.iter().zip(x).map(|(t, v)| t * v).sum(),
            BuiltinModel::SquaredLoss { dim } => {
                let r = theta.iter().zip(&x[..dim]).map(|(t, v)| t * v).sum::<f64>() - x[dim];
                0.5 * r * r
            }
            _ => self.eval(theta, x)?[0],
        })
    }

    fn jac_theta(&self, theta: &[f64], x: &[f64]) -> Result<Jacobian> {
        check_dims(self, theta, x)?;
        let (rows, cols) = (self.output_dim(), self.param_dim());
        Ok(match *self {
            BuiltinModel::Translation { dim } => {
                let mut j = Jacobian::zeros(dim, dim);
                for i in 0..dim {
                    j.data[i * dim + i] = 1.0;
                }
                j
            }
            BuiltinModel::Constant { dim, .. } => BuiltinModel::Translation { dim }.jac_theta(theta, theta)?,
            BuiltinModel::Identity { .. } => Jacobian::zeros(rows, cols),
            BuiltinModel::Affine { input, output } => {
                let mut j = Jacobian::zeros(rows, cols);
                for r in 0..output {
                    for c in 0..input {
                        j.data[r * cols + r * input + c] = x[c];
                    }
                    j.data[r * cols + output * input + r] = 1.0;
                }
                j
            }
            _ => Jacobian::new(1, cols, self.grad_scalar(theta, x)?),
        })
    }

    fn grad_scalar(&self, theta: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        check_dims(self, theta, x)?;
        match *self {
            BuiltinModel::ReluShift => {
                if theta[0] == 0.0 {
                    return Err(Error::Kink("relu-shift at theta = 0".into()));
                }
                Ok(vec![if theta[0] > 0.0 { 1.0 } else { 0.0 }])
            }
            BuiltinModel::ChiInterpolated { atom } => {
                let chi = Self::chi_weight(atom, x[0]);
                if theta[0] == 0.0 && chi > 0.0 {
                    return Err(Error::Kink(format!("chi model at theta = 0, x = {}", x[0])));
                }
                Ok(vec![if theta[0] > 0.0 { 1.0 } else { 1.0 - chi }])
            }
            BuiltinModel::LinearScore { .. } => Ok(x.to_vec()),
            BuiltinModel::SquaredLoss { dim } => {
                let r = theta.iter().zip(&x[..dim]).map(|(t, v)| t * v).sum::<f64>() - x[dim];
                Ok(x[..dim].iter().map(|a| r * a).collect())
            }
            _ => Ok(self.jac_theta(theta, x)?.row(0).to_vec()),
        }
    }

    fn add_grad_scalar(&self, theta: &[f64], x: &[f64], a: f64, acc: &mut [f64]) -> Result<()> {
        match *self {
            BuiltinModel::LinearScore { .. } => {
                check_dims(self, theta, x)?;
                for (o, v) in acc.iter_mut().zip(x) {
                    *o += a * v;
                }
                return Ok(());
            }
            BuiltinModel::Translation { dim: 1 } => {
                check_dims(self, theta, x)?;
                acc[0] += a;
                return Ok(());
            }
            BuiltinModel::Identity { dim: 1, .. } => return check_dims(self, theta, x),
            _ => {}
        }
        for (o, g) in acc.iter_mut().zip(self.grad_scalar(theta, x)?) {
            *o += a * g;
        }
        Ok(())
    }

    fn one_sided_jac(&self, theta: &[f64], x: &[f64], side: Side) -> Result<Jacobian> {
        check_dims(self, theta, x)?;
        let slope = match (self, side) {
            (BuiltinModel::ReluShift, Side::Left) if theta[0] == 0.0 => 0.0,
            (BuiltinModel::ReluShift, Side::Right) if theta[0] == 0.0 => 1.0,
            (BuiltinModel::ChiInterpolated { atom }, Side::Left) if theta[0] == 0.0 => 1.0 - Self::chi_weight(*atom, x[0]),
            (BuiltinModel::ChiInterpolated { .. }, Side::Right) if theta[0] == 0.0 => 1.0,
            _ => return self.jac_theta(theta, x),
        };
        Ok(Jacobian::new(1, 1, vec![slope]))
    }
}

impl fmt::Display for BuiltinModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuiltinModel::Translation { dim: 1 } => write!(f, "translate"),
            BuiltinModel::Translation { dim } => write!(f, "translate({dim})"),
            BuiltinModel::Identity { dim, param_dim } => write!(f, "identity({dim},{param_dim})"),
            BuiltinModel::ReluShift => write!(f, "relu-shift"),
            BuiltinModel::ChiInterpolated { atom } => write!(f, "chi(M={atom})"),
            BuiltinModel::Affine { input, output } => write!(f, "affine({input},{output})"),
            BuiltinModel::LinearScore { dim } => write!(f, "linear({dim})"),
            BuiltinModel::SquaredLoss { dim } => write!(f, "sqloss({dim})"),
            BuiltinModel::Constant { dim, input } => write!(f, "constant({dim},{input})"),
        }
    }
}

impl FromStr for BuiltinModel {
    type Err = Error;

    /// Accepts `translate`, `translate(d)`, `relu-shift`, `chi(M=6)`,
    /// `affine(in,out)`, `linear(d)`, `sqloss(d)`, `constant(d,in)` and
    /// `identity(d,p)`.
    fn from_str(s: &str) -> Result<Self> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let (name, args) = match s.find('(') {
            Some(open) if s.ends_with(')') => (&s[..open], s[open + 1..s.len() - 1].split(',').collect::<Vec<_>>()),
            Some(_) => return Err(Error::Parse(format!("unbalanced parentheses in model '{s}'"))),
            None => (s.as_str(), Vec::new()),
        };
        let count = |i: usize| -> Result<usize> {
            args.get(i)
                .and_then(|a| a.parse::<usize>().ok())
                .ok_or_else(|| Error::Parse(format!("model '{s}' expects an integer argument at position {}", i + 1)))
        };
        let model = match (name.to_ascii_lowercase().as_str(), args.len()) {
            ("translate", 0) => BuiltinModel::Translation { dim: 1 },
            ("translate", 1) => BuiltinModel::Translation { dim: count(0)? },
            ("relu-shift", 0) => BuiltinModel::ReluShift,
            ("chi", 0) => BuiltinModel::ChiInterpolated { atom: 6.0 },
            ("chi", 1) => {
                let raw = args[0].trim_start_matches("M=").trim_start_matches("m=");
                let atom = raw.parse().map_err(|_| Error::Parse(format!("invalid atom location '{raw}'")))?;
                BuiltinModel::ChiInterpolated { atom }
            }
            ("affine", 2) => BuiltinModel::Affine { input: count(0)?, output: count(1)? },
            ("linear", 1) => BuiltinModel::LinearScore { dim: count(0)? },
            ("sqloss", 1) => BuiltinModel::SquaredLoss { dim: count(0)? },
            ("constant", 2) => BuiltinModel::Constant { dim: count(0)?, input: count(1)? },
            ("identity", 2) => BuiltinModel::Identity { dim: count(0)?, param_dim: count(1)? },
            _ => return Err(Error::Parse(format!("unknown model '{s}'"))),
        };
        model.validate()?;
        Ok(model)
    }
}

impl Serialize for BuiltinModel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BuiltinModel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(deserializer)?.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_examples() {
        assert!((BuiltinModel::Translation { dim: 1 }.eval_scalar(&[0.3], &[0.5]).unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(BuiltinModel::ReluShift.eval_scalar(&[-1.0], &[0.5]).unwrap(), 0.5);
        let chi = BuiltinModel::chi(6.0).unwrap();
        assert!((chi.eval_scalar(&[0.1], &[6.0]).unwrap() - 6.1).abs() < 1e-15);
        assert!((chi.eval_scalar(&[-0.1], &[6.0]).unwrap() - 5.9).abs() < 1e-15);
        assert_eq!(chi.eval_scalar(&[-0.1], &[0.4]).unwrap(), 0.4);
    }

    #[test]
    fn jacobian_examples() {
        let t = BuiltinModel::Translation { dim: 1 };
        assert_eq!(t.jac_theta(&[0.7], &[-2.0]).unwrap().get(0, 0), 1.0);
        assert_eq!(BuiltinModel::ReluShift.grad_scalar(&[2.0], &[0.1]).unwrap(), vec![1.0]);
        assert_eq!(BuiltinModel::ReluShift.grad_scalar(&[-2.0], &[0.1]).unwrap(), vec![0.0]);
        let chi = BuiltinModel::chi(6.0).unwrap();
        assert_eq!(chi.grad_scalar(&[2.0], &[6.0]).unwrap(), vec![1.0]);
        assert_eq!(chi.grad_scalar(&[-2.0], &[6.0]).unwrap(), vec![1.0]);
        assert_eq!(chi.grad_scalar(&[-2.0], &[0.5]).unwrap(), vec![0.0]);
    }

    #[test]
    fn kinks_are_refused() {
        assert!(BuiltinModel::ReluShift.jac_theta(&[0.0], &[0.3]).unwrap_err().is_kink());
        let chi = BuiltinModel::chi(6.0).unwrap();
        assert!(chi.jac_theta(&[0.0], &[0.3]).unwrap_err().is_kink());
        // smooth at the atom, where chi vanishes
        assert_eq!(chi.grad_scalar(&[0.0], &[6.0]).unwrap(), vec![1.0]);
        let left = BuiltinModel::ReluShift.one_sided_jac(&[0.0], &[0.3], Side::Left).unwrap();
        let right = BuiltinModel::ReluShift.one_sided_jac(&[0.0], &[0.3], Side::Right).unwrap();
        assert_eq!((left.get(0, 0), right.get(0, 0)), (0.0, 1.0));
    }

    #[test]
    fn chi_weight_is_continuous_ramp() {
        let m = 6.0;
        assert_eq!(BuiltinModel::chi_weight(m, -0.5), 1.0);
        assert_eq!(BuiltinModel::chi_weight(m, 1.5), 1.0);
        assert_eq!(BuiltinModel::chi_weight(m, 5.0), 0.0);
        assert!((BuiltinModel::chi_weight(m, 3.25) - 0.5).abs() < 1e-15);
        for k in 0..1000 {
            let x = -1.0 + 8.0 * k as f64 / 1000.0;
            let jump = (BuiltinModel::chi_weight(m, x + 1e-9) - BuiltinModel::chi_weight(m, x)).abs();
            assert!(jump < 1e-8);
        }
        assert!(BuiltinModel::chi(2.0).is_err());
    }

    #[test]
    fn shape_errors() {
        let t = BuiltinModel::Translation { dim: 2 };
        assert!(matches!(t.eval(&[0.0], &[1.0, 2.0]), Err(Error::Shape(_))));
        assert!(matches!(t.eval(&[0.0, 0.0], &[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn parse_round_trip() {
        for text in ["translate", "translate(3)", "relu-shift", "chi(M=6)", "affine(2,2)", "linear(3)", "sqloss(2)", "constant(2,1)", "identity(1,1)"] {
            let m: BuiltinModel = text.parse().unwrap();
            assert_eq!(m.to_string(), text);
        }
        assert!("mlp(3)".parse::<BuiltinModel>().is_err());
        assert!("affine(0,2)".parse::<BuiltinModel>().is_err());
    }

    #[test]
    fn affine_layout() {
        let m = BuiltinModel::Affine { input: 2, output: 2 };
        let theta = [1.0, 2.0, 3.0, 4.0, 0.5, -0.5];
        assert_eq!(m.eval(&theta, &[1.0, 1.0]).unwrap(), vec![3.5, 6.5]);
        let j = m.jac_theta(&theta, &[3.0, 5.0]).unwrap();
        assert_eq!(j.row(0), &[3.0, 5.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(j.row(1), &[0.0, 0.0, 3.0, 5.0, 0.0, 1.0]);
        assert_eq!(j.transpose_mul(&[1.0, 0.0]), vec![3.0, 5.0, 0.0, 0.0, 1.0, 0.0]);
    }
}
