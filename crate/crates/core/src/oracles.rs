//! Envelope-formula subgradient oracles.
//!
//! Each oracle evaluates the parameter gradient of the composite cost against
//! an optimal plan of the current sample problem. In one dimension that plan
//! is the monotone coupling, so the oracles reduce to "sort, pair by rank,
//! differentiate the paired terms". Ties are broken by input index, which
//! makes every oracle a fixed measurable selection of the subdifferential.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::measures::{check_unit, dot, EmpiricalMeasure1D, EmpiricalMeasureD};
use crate::models::{require_scalar_output, ParamModel};
use crate::ot1d::{RefinementGrid, TransportPlan};
use crate::par::{self, Execution};

/// One element of a subdifferential.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Subgradient(pub Vec<f64>);

impl Subgradient {
    pub fn zeros(p: usize) -> Self {
        Subgradient(vec![0.0; p])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        dot(&self.0, &self.0).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|g| g.is_finite())
    }
}

impl Deref for Subgradient {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Subgradient {
    fn from(v: Vec<f64>) -> Self {
        Subgradient(v)
    }
}

fn axpy(acc: &mut [f64], a: f64, x: &[f64]) {
    for (o, v) in acc.iter_mut().zip(x) {
        *o += a * v;
    }
}

/// Weighting `w: [0, 1] -> R_+` of a spectral risk.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectralWeight {
    /// `w(s) = 1{s > alpha} / (1 - alpha)`: mean of the top `1 - alpha`
    /// fraction of losses.
    Superquantile { alpha: f64 },
    /// `w(s) = r s^(r - 1)`, `1 <= r < 2`.
    Extremile { r: f64 },
    /// Right-continuous step function: `w(s) = w_k` for the last `s_k <= s`,
    /// zero before the first knot.
    Table(Vec<(f64, f64)>),
}

impl SpectralWeight {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            SpectralWeight::Superquantile { alpha } => {
                if s > *alpha {
                    1.0 / (1.0 - alpha)
                } else {
                    0.0
                }
            }
            SpectralWeight::Extremile { r } => r * s.powf(r - 1.0),
            SpectralWeight::Table(knots) => knots.iter().take_while(|(k, _)| *k <= s).last().map_or(0.0, |(_, w)| *w),
        }
    }

    /// Checks parameters, then that `w` is non-negative, non-decreasing and
    /// bounded on a grid of `10^4 + 1` points.
    pub fn validate(&self) -> Result<()> {
        match self {
            SpectralWeight::Superquantile { alpha } if !(*alpha > 0.0 && *alpha < 1.0) => {
                return Err(Error::Parameter(format!("superquantile level must lie in (0, 1), got {alpha}")));
            }
            SpectralWeight::Extremile { r } if !(*r >= 1.0 && *r < 2.0) => {
                return Err(Error::Parameter(format!("extremile order must lie in [1, 2), got {r}")));
            }
            SpectralWeight::Table(knots) => {
                if knots.is_empty() || knots.windows(2).any(|w| !(w[0].0 < w[1].0)) {
                    return Err(Error::Parameter("weight table needs strictly increasing knots".into()));
                }
                if knots.iter().any(|(s, w)| !(0.0..=1.0).contains(s) || !w.is_finite()) {
                    return Err(Error::Parameter("weight table knots must lie in [0, 1] with finite values".into()));
                }
            }
            _ => {}
        }
        let grid: Vec<f64> = (0..=10_000).map(|k| self.eval(k as f64 / 1e4)).collect();
        if grid.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Parameter(format!("weight {self} is negative or unbounded")));
        }
        if grid.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Parameter(format!("weight {self} is not non-decreasing")));
        }
        Ok(())
    }
}

impl fmt::Display for SpectralWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpectralWeight::Superquantile { alpha } => write!(f, "superquantile({alpha})"),
            SpectralWeight::Extremile { r } => write!(f, "extremile({r})"),
            SpectralWeight::Table(knots) => {
                write!(f, "table(")?;
                for (i, (s, w)) in knots.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{s}:{w}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl FromStr for SpectralWeight {
    type Err = Error;

    /// `superquantile(a)` (alias `cvar(a)`), `extremile(r)`, `table(s:w,...)`.
    fn from_str(s: &str) -> Result<Self> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || Error::Parse(format!("invalid spectral weight '{s}'"));
        let open = s.find('(').ok_or_else(bad)?;
        if !s.ends_with(')') {
            return Err(bad());
        }
        let (name, body) = (&s[..open], &s[open + 1..s.len() - 1]);
        let weight = match name {
            "superquantile" | "cvar" => SpectralWeight::Superquantile { alpha: body.parse().map_err(|_| bad())? },
            "extremile" => SpectralWeight::Extremile { r: body.parse().map_err(|_| bad())? },
            "table" => SpectralWeight::Table(
                body.split(',')
                    .map(|kv| {
                        let (k, v) = kv.split_once(':').ok_or_else(bad)?;
                        Ok((k.parse().map_err(|_| bad())?, v.parse().map_err(|_| bad())?))
                    })
                    .collect::<Result<_>>()?,
            ),
            _ => return Err(bad()),
        };
        weight.validate()?;
        Ok(weight)
    }
}

impl Serialize for SpectralWeight {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SpectralWeight {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(deserializer)?.parse().map_err(serde::de::Error::custom)
    }
}

/// `sum_{(i, j, m) in plan} m * costgrad(theta, x_i, y_j)`.
///
/// A kink reported by `costgrad` is re-raised with the offending pair.
pub fn plan_weighted_grad<F>(
    costgrad: F,
    plan: &TransportPlan,
    theta: &[f64],
    xs: &EmpiricalMeasureD,
    ys: &EmpiricalMeasureD,
) -> Result<Subgradient>
where
    F: Fn(&[f64], &[f64], &[f64]) -> Result<Vec<f64>>,
{
    if plan.n != xs.len() || plan.m != ys.len() {
        return Err(Error::Shape(format!(
            "plan is {}x{} but samples have sizes {} and {}",
            plan.n,
            plan.m,
            xs.len(),
            ys.len()
        )));
    }
    let mut g = vec![0.0; theta.len()];
    for e in &plan.entries {
        let grad = costgrad(theta, xs.point(e.source), ys.point(e.target)).map_err(|err| match err {
            Error::Kink(what) => Error::Kink(format!("{what} (plan entry i={}, j={})", e.source, e.target)),
            other => other,
        })?;
        if grad.len() != theta.len() {
            return Err(Error::Shape(format!("cost gradient has length {}, expected {}", grad.len(), theta.len())));
        }
        axpy(&mut g, e.mass, &grad);
    }
    Ok(Subgradient(g))
}

/// Scalar model outputs over a sample, as a sorted-view measure.
pub(crate) fn scalar_outputs(model: &dyn ParamModel, theta: &[f64], xs: &EmpiricalMeasureD) -> Result<EmpiricalMeasure1D> {
    let values = xs.points().map(|x| model.eval_scalar(theta, x)).collect::<Result<Vec<_>>>()?;
    EmpiricalMeasure1D::new(values)
}

/// `(1/n) sum_i w(i/n) grad l_(i)(theta)` with losses sorted increasingly.
pub fn spectral_risk_oracle(
    weight: &SpectralWeight,
    loss: &dyn ParamModel,
    theta: &[f64],
    xs: &EmpiricalMeasureD,
) -> Result<Subgradient> {
    require_scalar_output(loss, "loss")?;
    let losses = scalar_outputs(loss, theta, xs)?;
    let n = xs.len() as f64;
    let mut g = vec![0.0; theta.len()];
    for (rank, &idx) in losses.sort_perm().iter().enumerate() {
        let w = weight.eval((rank + 1) as f64 / n);
        if w != 0.0 {
            loss.add_grad_scalar(theta, xs.point(idx), w / n, &mut g)?;
        }
    }
    Ok(Subgradient(g))
}

/// Gradient of the quadratic transport penalty between the score
/// distributions of two groups. Equal group sizes use the rank-paired
/// formula, unequal sizes the refinement-grid formula.
pub fn fairness_oracle(
    score: &dyn ParamModel,
    theta: &[f64],
    xs0: &EmpiricalMeasureD,
    xs1: &EmpiricalMeasureD,
) -> Result<Subgradient> {
    if xs0.len() == xs1.len() {
        fairness_oracle_balanced(score, theta, xs0, xs1)
    } else {
        fairness_oracle_unbalanced(score, theta, xs0, xs1)
    }
}

/// `(1/m) sum_i (s0_(i) - s1_(i)) (grad s0_(i) - grad s1_(i))`.
pub fn fairness_oracle_balanced(
    score: &dyn ParamModel,
    theta: &[f64],
    xs0: &EmpiricalMeasureD,
    xs1: &EmpiricalMeasureD,
) -> Result<Subgradient> {
    if xs0.len() != xs1.len() {
        return Err(Error::Shape(format!("balanced formula needs equal group sizes, got {} and {}", xs0.len(), xs1.len())));
    }
    let delta = 1.0 / xs0.len() as f64;
    fairness_accumulate(score, theta, xs0, xs1, (1..=xs0.len()).map(|i| (i, i, delta)))
}

/// Refinement-grid formula, valid for any group sizes.
pub fn fairness_oracle_unbalanced(
    score: &dyn ParamModel,
    theta: &[f64],
    xs0: &EmpiricalMeasureD,
    xs1: &EmpiricalMeasureD,
) -> Result<Subgradient> {
    let grid = RefinementGrid::new(xs0.len(), xs1.len())?;
    fairness_accumulate(score, theta, xs0, xs1, grid.cells())
}

fn fairness_accumulate(
    score: &dyn ParamModel,
    theta: &[f64],
    xs0: &EmpiricalMeasureD,
    xs1: &EmpiricalMeasureD,
    cells: impl Iterator<Item = (usize, usize, f64)>,
) -> Result<Subgradient> {
    require_scalar_output(score, "score")?;
    let (s0, s1) = (scalar_outputs(score, theta, xs0)?, scalar_outputs(score, theta, xs1)?);
    let mut g = vec![0.0; theta.len()];
    for (i, j, delta) in cells {
        let (a, b) = (s0.sort_perm()[i - 1], s1.sort_perm()[j - 1]);
        let coef = (s0.values()[a] - s1.values()[b]) * delta;
        score.add_grad_scalar(theta, xs0.point(a), coef, &mut g)?;
        score.add_grad_scalar(theta, xs1.point(b), -coef, &mut g)?;
    }
    Ok(Subgradient(g))
}

pub(crate) fn check_directions(phis: &[Vec<f64>], dim: usize) -> Result<()> {
    if phis.is_empty() {
        return Err(Error::Parameter("at least one projection direction is required".into()));
    }
    for phi in phis {
        if phi.len() != dim {
            return Err(Error::Shape(format!("direction of length {} in dimension {dim}", phi.len())));
        }
        check_unit(phi)?;
    }
    Ok(())
}

pub(crate) fn check_sliced_inputs(gen: &dyn ParamModel, xs: &EmpiricalMeasureD, ys: &EmpiricalMeasureD, phis: &[Vec<f64>]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::Shape(format!("sliced objective needs |xs| = |ys|, got {} and {}", xs.len(), ys.len())));
    }
    if ys.dim() != gen.output_dim() {
        return Err(Error::Shape(format!("targets live in R^{} but the generator outputs R^{}", ys.dim(), gen.output_dim())));
    }
    check_directions(phis, ys.dim())
}

/// Sliced quadratic transport gradient: per direction, projected generator
/// outputs and projected targets are sorted independently and paired by rank.
pub fn sliced_oracle(
    gen: &dyn ParamModel,
    theta: &[f64],
    xs: &EmpiricalMeasureD,
    ys: &EmpiricalMeasureD,
    phis: &[Vec<f64>],
    exec: Execution,
) -> Result<Subgradient> {
    check_sliced_inputs(gen, xs, ys, phis)?;
    let outputs = EmpiricalMeasureD::from_points(&xs.points().map(|x| gen.eval(theta, x)).collect::<Result<Vec<_>>>()?)?;
    let jacobians = xs.points().map(|x| gen.jac_theta(theta, x)).collect::<Result<Vec<_>>>()?;
    let per_direction = par::map_slice(exec, phis, |phi| -> Result<Vec<f64>> {
        let pf = outputs.project(phi)?;
        let py = ys.project(phi)?;
        let mut g = vec![0.0; theta.len()];
        for (&a, &b) in pf.sort_perm().iter().zip(py.sort_perm()) {
            let residual = pf.values()[a] - py.values()[b];
            axpy(&mut g, residual, &jacobians[a].transpose_mul(phi));
        }
        Ok(g)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let scale = 1.0 / (xs.len() * phis.len()) as f64;
    let mut g = par::pairwise_sum_vecs(&per_direction, theta.len());
    g.iter_mut().for_each(|v| *v *= scale);
    Ok(Subgradient(g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::BuiltinModel;
    use crate::ot1d::{monotone_plan, PlanEntry};

    fn cloud(values: &[f64]) -> EmpiricalMeasureD {
        EmpiricalMeasureD::from_scalars(values).unwrap()
    }

    #[test]
    fn weights() {
        let cvar = SpectralWeight::Superquantile { alpha: 0.5 };
        assert_eq!([0.25, 0.5, 0.75, 1.0].map(|s| cvar.eval(s)), [0.0, 0.0, 2.0, 2.0]);
        assert_eq!(SpectralWeight::Extremile { r: 1.0 }.eval(0.3), 1.0);
        let table: SpectralWeight = "table(0:1,0.5:3)".parse().unwrap();
        assert_eq!((table.eval(0.2), table.eval(0.5), table.eval(1.0)), (1.0, 3.0, 3.0));
        assert!("table(0:3,0.5:1)".parse::<SpectralWeight>().is_err());
        assert!("extremile(2.5)".parse::<SpectralWeight>().is_err());
        assert!("cvar(1)".parse::<SpectralWeight>().is_err());
        assert_eq!("cvar(0.9)".parse::<SpectralWeight>().unwrap().to_string(), "superquantile(0.9)");
    }

    #[test]
    fn plan_weighted_zero_gradient() {
        let (xs, ys) = (cloud(&[0.0, 1.0]), cloud(&[2.0, 3.0]));
        let plan = monotone_plan(&EmpiricalMeasure1D::new(vec![0.0, 1.0]).unwrap(), &EmpiricalMeasure1D::new(vec![2.0, 3.0]).unwrap()).unwrap();
        let g = plan_weighted_grad(|_, _, _| Ok(vec![0.0, 0.0]), &plan, &[0.1, 0.2], &xs, &ys).unwrap();
        assert_eq!(g.0, vec![0.0, 0.0]);
    }

    #[test]
    fn plan_weighted_translation_quadratic() {
        // C = (x + theta - y)^2 / 2, gradient x + theta - y
        let costgrad = |t: &[f64], x: &[f64], y: &[f64]| Ok(vec![x[0] + t[0] - y[0]]);
        let plan = TransportPlan { n: 1, m: 1, entries: vec![PlanEntry { source: 0, target: 0, mass: 1.0 }] };
        let g = plan_weighted_grad(costgrad, &plan, &[0.0], &cloud(&[0.0]), &cloud(&[1.0])).unwrap();
        assert_eq!(g.0, vec![-1.0]);

        // any feasible plan, here a non-monotone one
        let plan = TransportPlan {
            n: 2,
            m: 2,
            entries: vec![
                PlanEntry { source: 0, target: 1, mass: 0.3 },
                PlanEntry { source: 0, target: 0, mass: 0.2 },
                PlanEntry { source: 1, target: 0, mass: 0.3 },
                PlanEntry { source: 1, target: 1, mass: 0.2 },
            ],
        };
        let (xs, ys, theta) = (cloud(&[0.2, 0.9]), cloud(&[0.5, -0.4]), [0.7]);
        let g = plan_weighted_grad(costgrad, &plan, &theta, &xs, &ys).unwrap();
        let expected: f64 = plan.entries.iter().map(|e| e.mass * (xs.point(e.source)[0] + theta[0] - ys.point(e.target)[0])).sum();
        assert!((g[0] - expected).abs() < 1e-15);
        // finite difference of the plan-fixed cost
        let fixed = |t: f64| plan.entries.iter().map(|e| e.mass * 0.5 * (xs.point(e.source)[0] + t - ys.point(e.target)[0]).powi(2)).sum::<f64>();
        let h = 1e-6;
        assert!((g[0] - (fixed(theta[0] + h) - fixed(theta[0] - h)) / (2.0 * h)).abs() < 1e-8);
    }

    #[test]
    fn plan_weighted_reports_kink_pair() {
        let plan = TransportPlan { n: 1, m: 1, entries: vec![PlanEntry { source: 0, target: 0, mass: 1.0 }] };
        let err = plan_weighted_grad(|_, _, _| Err(Error::Kink("relu".into())), &plan, &[0.0], &cloud(&[0.0]), &cloud(&[0.0])).unwrap_err();
        assert!(err.to_string().contains("i=0, j=0"));
    }

    #[test]
    fn spectral_examples() {
        let loss = BuiltinModel::LinearScore { dim: 1 };
        // n = 1 with w(1) = 1
        let g = spectral_risk_oracle(&SpectralWeight::Extremile { r: 1.0 }, &loss, &[0.4], &cloud(&[3.0])).unwrap();
        assert_eq!(g.0, vec![3.0]);
        // w = 1 gives the mean gradient
        let xs = cloud(&[1.0, -2.0, 4.0]);
        let g = spectral_risk_oracle(&"table(0:1)".parse().unwrap(), &loss, &[0.5], &xs).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-15);
        // alpha = 0.5, n = 4: only the two largest losses, weight 2 each
        let xs = cloud(&[4.0, 1.0, 3.0, 2.0]);
        let g = spectral_risk_oracle(&SpectralWeight::Superquantile { alpha: 0.5 }, &loss, &[1.0], &xs).unwrap();
        assert!((g[0] - 0.25 * (2.0 * 3.0 + 2.0 * 4.0)).abs() < 1e-15);
    }

    #[test]
    fn fairness_examples() {
        let score = BuiltinModel::LinearScore { dim: 1 };
        let xs = cloud(&[0.3, -1.0, 2.0]);
        assert_eq!(fairness_oracle(&score, &[0.8], &xs, &xs).unwrap().0, vec![0.0]);
        let (x0, x1, t) = (0.7, -0.4, 1.3);
        let g = fairness_oracle(&score, &[t], &cloud(&[x0]), &cloud(&[x1])).unwrap();
        assert!((g[0] - (t * x0 - t * x1) * (x0 - x1)).abs() < 1e-15);
        let shift = BuiltinModel::Translation { dim: 1 };
        let g = fairness_oracle(&shift, &[0.2], &cloud(&[0.5]), &cloud(&[0.1, 0.9])).unwrap();
        assert_eq!(g.0, vec![0.0]);
    }

    #[test]
    fn fairness_grid_branch_matches_balanced_bitwise() {
        let score = BuiltinModel::LinearScore { dim: 2 };
        let xs0 = EmpiricalMeasureD::new(2, (0..14).map(|i| ((i * 37) % 11) as f64 * 0.13 - 0.4).collect()).unwrap();
        let xs1 = EmpiricalMeasureD::new(2, (0..14).map(|i| ((i * 53) % 13) as f64 * 0.07 + 0.1).collect()).unwrap();
        let a = fairness_oracle_balanced(&score, &[0.6, -1.1], &xs0, &xs1).unwrap();
        let b = fairness_oracle_unbalanced(&score, &[0.6, -1.1], &xs0, &xs1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sliced_constant_generator() {
        // f = theta in R^2, all targets at y*: gradient (1/k) sum phi phi^T (theta - y*)
        let gen = BuiltinModel::Constant { dim: 2, input: 1 };
        let xs = cloud(&[0.0, 1.0, 2.0]);
        let y = [0.5, -1.0];
        let ys = EmpiricalMeasureD::new(2, y.repeat(3)).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let phis = vec![vec![1.0, 0.0], vec![r, r], vec![0.6, -0.8]];
        let theta = [1.5, 2.0];
        let g = sliced_oracle(&gen, &theta, &xs, &ys, &phis, Execution::Sequential).unwrap();
        let d = [theta[0] - y[0], theta[1] - y[1]];
        let mut expected = [0.0; 2];
        for phi in &phis {
            let c = phi[0] * d[0] + phi[1] * d[1];
            expected[0] += c * phi[0] / 3.0;
            expected[1] += c * phi[1] / 3.0;
        }
        assert!((g[0] - expected[0]).abs() < 1e-14 && (g[1] - expected[1]).abs() < 1e-14);
    }

    #[test]
    fn sliced_matched_samples_vanish() {
        // x + theta e_1 in R^2, represented by a 2-parameter translation with theta = 0
        let gen = BuiltinModel::Translation { dim: 2 };
        let pts = EmpiricalMeasureD::new(2, vec![0.0, 1.0, 2.0, -1.0, 0.5, 0.5]).unwrap();
        let shuffled = EmpiricalMeasureD::new(2, vec![0.5, 0.5, 0.0, 1.0, 2.0, -1.0]).unwrap();
        let g = sliced_oracle(&gen, &[0.0, 0.0], &pts, &shuffled, &[vec![1.0, 0.0]], Execution::Parallel).unwrap();
        assert_eq!(g.0, vec![0.0, 0.0]);
        let err = sliced_oracle(&gen, &[0.0, 0.0], &pts, &shuffled, &[vec![1.0, 1.0]], Execution::Sequential);
        assert!(matches!(err, Err(Error::Parameter(_))));
    }
}
