//! Empirical objectives paired with their oracles, and the closed-form
//! population objectives used as references by the diagnostics.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::measures::{dot, EmpiricalMeasureD};
use crate::models::{require_scalar_output, ParamModel};
use crate::oracles::{
    check_sliced_inputs, fairness_oracle, plan_weighted_grad, scalar_outputs, sliced_oracle, spectral_risk_oracle,
    SpectralWeight, Subgradient,
};
use crate::ot1d::{min_assignment, monotone_plan, w_unequal, PlanEntry, TransportPlan, MAX_ASSIGNMENT_SIZE};
use crate::par::{self, Execution};

/// A function of the parameter with an optional subgradient oracle.
pub trait Objective: Send + Sync {
    fn name(&self) -> String;

    /// Parameter dimension `p`.
    fn dim(&self) -> usize;

    fn value(&self, theta: &[f64]) -> Result<f64>;

    fn oracle(&self, _theta: &[f64]) -> Result<Subgradient> {
        Err(Error::Capability(format!("objective {} has no oracle", self.name())))
    }
}

fn check_theta(obj: &dyn Objective, theta: &[f64]) -> Result<()> {
    if theta.len() != obj.dim() {
        return Err(Error::Shape(format!("theta has length {} but {} expects {}", theta.len(), obj.name(), obj.dim())));
    }
    Ok(())
}

/// `(1/n) sum_i w(i/n) l_(i)(theta)`.
pub fn sr_value(weight: &SpectralWeight, loss: &dyn ParamModel, theta: &[f64], xs: &EmpiricalMeasureD) -> Result<f64> {
    require_scalar_output(loss, "loss")?;
    let losses = scalar_outputs(loss, theta, xs)?;
    let n = losses.len() as f64;
    Ok((1..=losses.len()).map(|r| weight.eval(r as f64 / n) * losses.order_stat(r) / n).sum())
}

/// Half the squared 2-Wasserstein cost between the two groups' scores.
pub fn fr_value(score: &dyn ParamModel, theta: &[f64], xs0: &EmpiricalMeasureD, xs1: &EmpiricalMeasureD) -> Result<f64> {
    require_scalar_output(score, "score")?;
    let (s0, s1) = (scalar_outputs(score, theta, xs0)?, scalar_outputs(score, theta, xs1)?);
    Ok(0.5 * w_unequal(&s0, &s1, 2.0)?)
}

/// `1/(2nk) sum_j sum_i <phi_j, f_(i|phi_j)(theta) - y_(i|phi_j)>^2`.
pub fn sw_value(
    gen: &dyn ParamModel,
    theta: &[f64],
    xs: &EmpiricalMeasureD,
    ys: &EmpiricalMeasureD,
    phis: &[Vec<f64>],
    exec: Execution,
) -> Result<f64> {
    check_sliced_inputs(gen, xs, ys, phis)?;
    let outputs = EmpiricalMeasureD::from_points(&xs.points().map(|x| gen.eval(theta, x)).collect::<Result<Vec<_>>>()?)?;
    let per_direction = par::map_slice(exec, phis, |phi| -> Result<f64> {
        let (pf, py) = (outputs.project(phi)?, ys.project(phi)?);
        Ok((1..=pf.len()).map(|r| (pf.order_stat(r) - py.order_stat(r)).powi(2)).sum())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(par::pairwise_sum(&per_direction) / (2.0 * (xs.len() * phis.len()) as f64))
}

fn mean_loss(loss: &dyn ParamModel, theta: &[f64], xs: &EmpiricalMeasureD) -> Result<f64> {
    let values = xs.points().map(|x| loss.eval_scalar(theta, x)).collect::<Result<Vec<_>>>()?;
    Ok(par::pairwise_sum(&values) / values.len() as f64)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Parameter(format!("regularization weight must be >= 0, got {lambda}")));
    }
    Ok(())
}

/// Mean loss plus `lambda` times the fairness penalty.
pub fn erm_value(
    loss: &dyn ParamModel,
    score: &dyn ParamModel,
    lambda: f64,
    theta: &[f64],
    xs: &EmpiricalMeasureD,
    xs0: &EmpiricalMeasureD,
    xs1: &EmpiricalMeasureD,
) -> Result<f64> {
    check_lambda(lambda)?;
    require_scalar_output(loss, "loss")?;
    Ok(mean_loss(loss, theta, xs)? + lambda * fr_value(score, theta, xs0, xs1)?)
}

/// User-supplied unit cost `c(u, v)`.
pub type CostFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// Unit cost `c(u, v)` on model outputs.
#[derive(Clone)]
pub enum UnitCost {
    /// `scale * ||u - v||^q`.
    Power { q: f64, scale: f64 },
    /// Any cost without gradient; only usable with [`PlanMode::BruteForce`].
    Custom(CostFn),
}

impl fmt::Debug for UnitCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UnitCost::Power { q, scale } => write!(f, "Power {{ q: {q}, scale: {scale} }}"),
            UnitCost::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// How the inner transport problem is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanMode {
    /// Monotone coupling on scalar outputs; needs a power cost.
    Sorted1d,
    /// Exhaustive search over permutations, `n = m <= 8`.
    BruteForce,
}

/// `C(theta, x, y) = c(f(theta, x), g(theta, y))`.
#[derive(Debug, Clone)]
pub struct CompositeCost {
    pub source: Arc<dyn ParamModel>,
    pub target: Arc<dyn ParamModel>,
    pub unit: UnitCost,
}

impl CompositeCost {
    pub fn new(source: Arc<dyn ParamModel>, target: Arc<dyn ParamModel>, unit: UnitCost) -> Result<Self> {
        if source.param_dim() != target.param_dim() || source.output_dim() != target.output_dim() {
            return Err(Error::Shape("source and target models must share parameter and output dimensions".into()));
        }
        if let UnitCost::Power { q, scale } = unit {
            if !(q >= 1.0 && q.is_finite() && scale >= 0.0 && scale.is_finite()) {
                return Err(Error::Parameter(format!("power cost needs q >= 1 and scale >= 0, got q={q}, scale={scale}")));
            }
        }
        Ok(Self { source, target, unit })
    }

    pub fn param_dim(&self) -> usize {
        self.source.param_dim()
    }

    pub fn cost(&self, theta: &[f64], x: &[f64], y: &[f64]) -> Result<f64> {
        let (u, v) = (self.source.eval(theta, x)?, self.target.eval(theta, y)?);
        Ok(match &self.unit {
            UnitCost::Power { q, scale } => {
                let r: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - b).collect();
                scale * dot(&r, &r).sqrt().powf(*q)
            }
            UnitCost::Custom(c) => c(&u, &v),
        })
    }

    /// `grad_theta C = scale q ||r||^(q-2) (J_f - J_g)^T r` with `r = u - v`.
    pub fn grad(&self, theta: &[f64], x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let UnitCost::Power { q, scale } = self.unit else {
            return Err(Error::Capability("custom unit costs have no gradient".into()));
        };
        let (u, v) = (self.source.eval(theta, x)?, self.target.eval(theta, y)?);
        let r: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - b).collect();
        let norm = dot(&r, &r).sqrt();
        if norm == 0.0 {
            if q == 1.0 {
                return Err(Error::Kink("distance cost at coincident outputs".into()));
            }
            return Ok(vec![0.0; theta.len()]);
        }
        let coef = scale * q * norm.powf(q - 2.0);
        let (jf, jg) = (self.source.jac_theta(theta, x)?, self.target.jac_theta(theta, y)?);
        let (a, b) = (jf.transpose_mul(&r), jg.transpose_mul(&r));
        Ok(a.iter().zip(&b).map(|(a, b)| coef * (a - b)).collect())
    }
}

fn optimal_plan(cost: &CompositeCost, theta: &[f64], xs: &EmpiricalMeasureD, ys: &EmpiricalMeasureD, mode: PlanMode) -> Result<(f64, TransportPlan)> {
    match mode {
        PlanMode::Sorted1d => {
            let UnitCost::Power { q, scale } = cost.unit else {
                return Err(Error::Capability("the sorted 1D path needs a power cost |u - v|^q".into()));
            };
            if cost.source.output_dim() != 1 {
                return Err(Error::Capability("the sorted 1D path needs scalar model outputs".into()));
            }
            let u = scalar_outputs(cost.source.as_ref(), theta, xs)?;
            let v = scalar_outputs(cost.target.as_ref(), theta, ys)?;
            Ok((scale * w_unequal(&u, &v, q)?, monotone_plan(&u, &v)?))
        }
        PlanMode::BruteForce => {
            let n = xs.len();
            if n != ys.len() || n > MAX_ASSIGNMENT_SIZE {
                return Err(Error::Capability(format!(
                    "brute-force transport needs n = m <= {MAX_ASSIGNMENT_SIZE}, got {n} and {}",
                    ys.len()
                )));
            }
            let costs = xs
                .points()
                .map(|x| ys.points().map(|y| cost.cost(theta, x, y)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?;
            let (total, perm) = min_assignment(&costs);
            let mass = 1.0 / n as f64;
            let entries = perm.iter().enumerate().map(|(i, &j)| PlanEntry { source: i, target: j, mass }).collect();
            Ok((total / n as f64, TransportPlan { n, m: n, entries }))
        }
    }
}

/// Minimal coupling cost between the pushed-forward samples.
pub fn transport_value(
    cost: &CompositeCost,
    theta: &[f64],
    xs: &EmpiricalMeasureD,
    ys: &EmpiricalMeasureD,
    mode: PlanMode,
) -> Result<f64> {
    Ok(optimal_plan(cost, theta, xs, ys, mode)?.0)
}

/// Closed-form population objectives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PopulationCase {
    /// `T(theta) = relu(theta)`: shifted uniform against uniform, `W_1`.
    ReluUnif,
    /// `T(theta) = w relu(theta) + (1 - w) |2 + theta|`, valid for small `|theta|`.
    Spurious { w: f64, atom: f64 },
    /// `T(theta) = theta^2 / 2`: translated uniform against uniform, `W_2^2 / 2`.
    TranslateQuadratic,
}

fn relu(t: f64) -> f64 {
    t.max(0.0)
}

/// Subdifferential endpoints of `t -> |t|` at `t`.
fn abs_subdiff(t: f64) -> (f64, f64) {
    if t > 0.0 {
        (1.0, 1.0)
    } else if t < 0.0 {
        (-1.0, -1.0)
    } else {
        (-1.0, 1.0)
    }
}

fn relu_subdiff(t: f64) -> (f64, f64) {
    if t > 0.0 {
        (1.0, 1.0)
    } else if t < 0.0 {
        (0.0, 0.0)
    } else {
        (0.0, 1.0)
    }
}

impl PopulationCase {
    pub fn value(&self, theta: f64) -> f64 {
        match *self {
            PopulationCase::ReluUnif => relu(theta),
            PopulationCase::Spurious { w, .. } => w * relu(theta) + (1.0 - w) * (2.0 + theta).abs(),
            PopulationCase::TranslateQuadratic => 0.5 * theta * theta,
        }
    }

    /// Endpoints `[lo, hi]` of the Clarke subdifferential at `theta`.
    pub fn subdifferential(&self, theta: f64) -> (f64, f64) {
        match *self {
            PopulationCase::ReluUnif => relu_subdiff(theta),
            PopulationCase::Spurious { w, .. } => {
                let (a, b) = relu_subdiff(theta);
                let (c, d) = abs_subdiff(2.0 + theta);
                (w * a + (1.0 - w) * c, w * b + (1.0 - w) * d)
            }
            PopulationCase::TranslateQuadratic => (theta, theta),
        }
    }

    /// Subdifferential as a vertex list, one vertex where the map is smooth.
    pub fn subdifferential_vertices(&self, theta: f64) -> Vec<Vec<f64>> {
        let (lo, hi) = self.subdifferential(theta);
        if lo == hi {
            vec![vec![lo]]
        } else {
            vec![vec![lo], vec![hi]]
        }
    }

    fn validate(&self) -> Result<()> {
        if let PopulationCase::Spurious { w, atom } = *self {
            if !(w > 0.5 && w < 1.0) || !(atom > 4.0) {
                return Err(Error::Parameter(format!("spurious case needs w in (1/2, 1) and M > 4, got w={w}, M={atom}")));
            }
        }
        Ok(())
    }
}

/// Closed-form population objective value.
pub fn population_value(case: PopulationCase, theta: f64) -> Result<f64> {
    case.validate()?;
    Ok(case.value(theta))
}

impl fmt::Display for PopulationCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PopulationCase::ReluUnif => write!(f, "relu-unif"),
            PopulationCase::Spurious { w, atom } => write!(f, "spurious(w={w},M={atom})"),
            PopulationCase::TranslateQuadratic => write!(f, "translate-quadratic"),
        }
    }
}

impl FromStr for PopulationCase {
    type Err = Error;

    /// `relu-unif`, `translate-quadratic`, `spurious` or `spurious(w=0.75,M=6)`.
    fn from_str(s: &str) -> Result<Self> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let case = match s.replace('_', "-").as_str() {
            "relu-unif" => PopulationCase::ReluUnif,
            "translate-quadratic" => PopulationCase::TranslateQuadratic,
            "spurious" => PopulationCase::Spurious { w: 0.75, atom: 6.0 },
            other if other.starts_with("spurious(") && other.ends_with(')') => {
                let (mut w, mut atom) = (0.75, 6.0);
                for kv in other["spurious(".len()..other.len() - 1].split(',') {
                    let (k, v) = kv.split_once('=').ok_or_else(|| Error::Parse(format!("expected key=value in '{s}'")))?;
                    let v: f64 = v.parse().map_err(|_| Error::Parse(format!("invalid number '{v}' in '{s}'")))?;
                    match k {
                        "w" => w = v,
                        "M" | "m" => atom = v,
                        _ => return Err(Error::Parse(format!("unknown key '{k}' in '{s}'"))),
                    }
                }
                PopulationCase::Spurious { w, atom }
            }
            _ => return Err(Error::Parameter(format!("unknown population case '{s}'"))),
        };
        case.validate()?;
        Ok(case)
    }
}

impl Serialize for PopulationCase {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PopulationCase {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(deserializer)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Population objective of a [`PopulationCase`]; the oracle refuses kinks.
#[derive(Debug, Clone, Copy)]
pub struct PopulationObjective(pub PopulationCase);

impl Objective for PopulationObjective {
    fn name(&self) -> String {
        format!("population:{}", self.0)
    }

    fn dim(&self) -> usize {
        1
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        check_theta(self, theta)?;
        Ok(self.0.value(theta[0]))
    }

    fn oracle(&self, theta: &[f64]) -> Result<Subgradient> {
        check_theta(self, theta)?;
        let (lo, hi) = self.0.subdifferential(theta[0]);
        if lo != hi {
            return Err(Error::Kink(format!("{} at theta = {}", self.0, theta[0])));
        }
        Ok(Subgradient(vec![lo]))
    }
}

/// Empirical spectral risk of a scalar loss.
#[derive(Debug, Clone)]
pub struct SpectralRisk {
    pub weight: SpectralWeight,
    pub loss: Arc<dyn ParamModel>,
    pub xs: EmpiricalMeasureD,
}

impl Objective for SpectralRisk {
    fn name(&self) -> String {
        format!("spectral-risk:{}", self.weight)
    }

    fn dim(&self) -> usize {
        self.loss.param_dim()
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        sr_value(&self.weight, self.loss.as_ref(), theta, &self.xs)
    }

    fn oracle(&self, theta: &[f64]) -> Result<Subgradient> {
        spectral_risk_oracle(&self.weight, self.loss.as_ref(), theta, &self.xs)
    }
}

/// Empirical fairness penalty between two groups.
#[derive(Debug, Clone)]
pub struct FairnessPenalty {
    pub score: Arc<dyn ParamModel>,
    pub xs0: EmpiricalMeasureD,
    pub xs1: EmpiricalMeasureD,
}

impl Objective for FairnessPenalty {
    fn name(&self) -> String {
        "fairness".into()
    }

    fn dim(&self) -> usize {
        self.score.param_dim()
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        fr_value(self.score.as_ref(), theta, &self.xs0, &self.xs1)
    }

    fn oracle(&self, theta: &[f64]) -> Result<Subgradient> {
        fairness_oracle(self.score.as_ref(), theta, &self.xs0, &self.xs1)
    }
}

/// Fairness-regularized empirical risk.
#[derive(Debug, Clone)]
pub struct RegularizedErm {
    pub loss: Arc<dyn ParamModel>,
    pub lambda: f64,
    pub xs: EmpiricalMeasureD,
    pub penalty: FairnessPenalty,
}

impl Objective for RegularizedErm {
    fn name(&self) -> String {
        format!("erm(lambda={})", self.lambda)
    }

    fn dim(&self) -> usize {
        self.loss.param_dim()
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        let p = &self.penalty;
        erm_value(self.loss.as_ref(), p.score.as_ref(), self.lambda, theta, &self.xs, &p.xs0, &p.xs1)
    }

    fn oracle(&self, theta: &[f64]) -> Result<Subgradient> {
        check_lambda(self.lambda)?;
        let grads = self.xs.points().map(|x| self.loss.grad_scalar(theta, x)).collect::<Result<Vec<_>>>()?;
        let n = grads.len() as f64;
        let mut g = par::pairwise_sum_vecs(&grads, theta.len());
        let fair = self.penalty.oracle(theta)?;
        for (o, f) in g.iter_mut().zip(fair.iter()) {
            *o = *o / n + self.lambda * f;
        }
        Ok(Subgradient(g))
    }
}

/// Empirical sliced quadratic transport objective.
#[derive(Debug, Clone)]
pub struct SlicedWasserstein {
    pub gen: Arc<dyn ParamModel>,
    pub xs: EmpiricalMeasureD,
    pub ys: EmpiricalMeasureD,
    pub phis: Vec<Vec<f64>>,
    pub exec: Execution,
}

impl Objective for SlicedWasserstein {
    fn name(&self) -> String {
        format!("sliced(k={})", self.phis.len())
    }

    fn dim(&self) -> usize {
        self.gen.param_dim()
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        sw_value(self.gen.as_ref(), theta, &self.xs, &self.ys, &self.phis, self.exec)
    }

    fn oracle(&self, theta: &[f64]) -> Result<Subgradient> {
        sliced_oracle(self.gen.as_ref(), theta, &self.xs, &self.ys, &self.phis, self.exec)
    }
}

/// Generic empirical transport objective; the oracle weights the cost
/// gradient by the optimal plan of the current sample problem.
#[derive(Debug, Clone)]
pub struct TransportObjective {
    pub cost: CompositeCost,
    pub xs: EmpiricalMeasureD,
    pub ys: EmpiricalMeasureD,
    pub mode: PlanMode,
}

impl TransportObjective {
    /// Translated source against a fixed target with cost `(u - v)^2 / 2`.
    pub fn translate_quadratic(xs: &[f64], ys: &[f64]) -> Result<Self> {
        use crate::models::BuiltinModel;
        let cost = CompositeCost::new(
            Arc::new(BuiltinModel::Translation { dim: 1 }),
            Arc::new(BuiltinModel::Identity { dim: 1, param_dim: 1 }),
            UnitCost::Power { q: 2.0, scale: 0.5 },
        )?;
        Ok(Self {
            cost,
            xs: EmpiricalMeasureD::from_scalars(xs)?,
            ys: EmpiricalMeasureD::from_scalars(ys)?,
            mode: PlanMode::Sorted1d,
        })
    }

    pub fn plan(&self, theta: &[f64]) -> Result<TransportPlan> {
        Ok(optimal_plan(&self.cost, theta, &self.xs, &self.ys, self.mode)?.1)
    }
}

impl Objective for TransportObjective {
    fn name(&self) -> String {
        format!("transport({:?})", self.cost.unit)
    }

    fn dim(&self) -> usize {
        self.cost.param_dim()
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        transport_value(&self.cost, theta, &self.xs, &self.ys, self.mode)
    }

    fn oracle(&self, theta: &[f64]) -> Result<Subgradient> {
        let plan = self.plan(theta)?;
        match self.cost.unit {
            UnitCost::Power { q, scale } if self.cost.source.output_dim() == 1 => {
                scalar_plan_grad(&self.cost, q, scale, &plan, theta, &self.xs, &self.ys)
            }
            _ => plan_weighted_grad(|t, x, y| self.cost.grad(t, x, y), &plan, theta, &self.xs, &self.ys),
        }
    }
}

/// Plan-weighted gradient of `scale |f - g|^q` for scalar outputs, without
/// per-entry allocations.
fn scalar_plan_grad(
    cost: &CompositeCost,
    q: f64,
    scale: f64,
    plan: &TransportPlan,
    theta: &[f64],
    xs: &EmpiricalMeasureD,
    ys: &EmpiricalMeasureD,
) -> Result<Subgradient> {
    let mut g = vec![0.0; theta.len()];
    for e in &plan.entries {
        let (x, y) = (xs.point(e.source), ys.point(e.target));
        let r = cost.source.eval_scalar(theta, x)? - cost.target.eval_scalar(theta, y)?;
        if r == 0.0 {
            if q == 1.0 {
                return Err(Error::Kink(format!("distance cost at coincident outputs (plan entry i={}, j={})", e.source, e.target)));
            }
            continue;
        }
        let coef = e.mass * scale * q * r.abs().powf(q - 2.0) * r;
        cost.source.add_grad_scalar(theta, x, coef, &mut g)?;
        cost.target.add_grad_scalar(theta, y, -coef, &mut g)?;
    }
    Ok(Subgradient(g))
}
