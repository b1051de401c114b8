//! Set-valued first-order diagnostics: excess distances, graph excess over a
//! parameter grid, one-sided derivatives and critical sets.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{EmpiricalMeasure1D, EmpiricalMeasureD};
use crate::models::{require_scalar_output, ParamModel, Side};
use crate::objectives::Objective;
use crate::optimize::FeasibleSet;
use crate::oracles::scalar_outputs;
use crate::par::{self, Execution};

/// Densification factor of the population graph.
pub const DENSIFY: usize = 10;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `max_{a in A} min_{b in B} ||a - b||`; zero for empty `A`.
pub fn excess_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    excess_distance_with(a, b, Execution::Sequential)
}

pub fn excess_distance_with(a: &[Vec<f64>], b: &[Vec<f64>], exec: Execution) -> Result<f64> {
    if b.is_empty() {
        return Err(Error::Domain("excess distance to an empty set".into()));
    }
    let dim = b[0].len();
    if a.iter().chain(b).any(|p| p.len() != dim) {
        return Err(Error::Shape("points of different dimensions".into()));
    }
    let nearest = par::map_slice(exec, a, |p| b.iter().map(|q| sq_dist(p, q)).fold(f64::INFINITY, f64::min));
    Ok(nearest.into_iter().fold(0.0, f64::max).sqrt())
}

/// Symmetric Hausdorff distance.
pub fn hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::Domain("hausdorff distance to an empty set".into()));
    }
    Ok(excess_distance(a, b)?.max(excess_distance(b, a)?))
}

/// Finite sample of a graph `{(theta, g)}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphCloud {
    pub entries: Vec<(Vec<f64>, Vec<f64>)>,
}

impl GraphCloud {
    pub fn push(&mut self, theta: Vec<f64>, g: Vec<f64>) {
        self.entries.push((theta, g));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries as concatenated points `(theta, g)`.
    pub fn points(&self) -> Vec<Vec<f64>> {
        self.entries.iter().map(|(t, g)| t.iter().chain(g).copied().collect()).collect()
    }
}

/// One-sided derivatives of a scalar function at `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeHull {
    pub theta: f64,
    pub left: f64,
    pub right: f64,
}

impl DerivativeHull {
    pub fn lo(&self) -> f64 {
        self.left.min(self.right)
    }

    pub fn hi(&self) -> f64 {
        self.left.max(self.right)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo() <= v && v <= self.hi()
    }

    pub fn endpoints(&self) -> Vec<Vec<f64>> {
        if self.left == self.right {
            vec![vec![self.left]]
        } else {
            vec![vec![self.left], vec![self.right]]
        }
    }
}

/// Difference quotients `(f(t) - f(t - h)) / h` and `(f(t + h) - f(t)) / h`.
pub fn one_sided(f: impl Fn(f64) -> Result<f64>, theta: f64, h: f64) -> Result<DerivativeHull> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Parameter(format!("step must be > 0, got {h}")));
    }
    let mid = f(theta)?;
    let hull = DerivativeHull { theta, left: (mid - f(theta - h)?) / h, right: (f(theta + h)? - mid) / h };
    if !(hull.left.is_finite() && hull.right.is_finite()) {
        return Err(Error::Domain(format!("non-finite one-sided derivative at {theta}")));
    }
    Ok(hull)
}

/// Step used when a scalar oracle hits a kink.
fn kink_step(theta: f64) -> f64 {
    1e-6 * (1.0 + theta.abs())
}

/// Exact one-sided derivatives at `theta` of
/// `t -> (1/n) sum_i |h(t, x_(i)) - y_(i)|` with rank pairing fixed at
/// `theta`. The slopes of `h` come from [`ParamModel::one_sided_jac`], so no
/// differencing step is involved. Valid while the rank order of the model
/// outputs does not change near `theta`.
pub fn sorted_l1_one_sided(
    model: &dyn ParamModel,
    theta: f64,
    xs: &EmpiricalMeasureD,
    ys: &EmpiricalMeasure1D,
) -> Result<DerivativeHull> {
    if xs.len() != ys.len() {
        return Err(Error::Shape("one-sided derivative needs equal sample sizes".into()));
    }
    require_scalar_output(model, "model")?;
    let outputs = scalar_outputs(model, &[theta], xs)?;
    let n = xs.len() as f64;
    let (mut left, mut right) = (0.0, 0.0);
    for (&a, &b) in outputs.sort_perm().iter().zip(ys.sort_perm()) {
        let residual = outputs.values()[a] - ys.values()[b];
        let x = xs.point(a);
        let dl = model.one_sided_jac(&[theta], x, Side::Left)?.get(0, 0);
        let dr = model.one_sided_jac(&[theta], x, Side::Right)?.get(0, 0);
        // |r + d t| has slope sgn(r) d away from r = 0, and |d| t on either side at r = 0
        if residual != 0.0 {
            left += residual.signum() * dl;
            right += residual.signum() * dr;
        } else {
            left -= dl.abs();
            right += dr.abs();
        }
    }
    Ok(DerivativeHull { theta, left: left / n, right: right / n })
}

/// Points `(theta, g)` of the empirical oracle on the grid. Kinks at scalar
/// grid points contribute both one-sided derivatives; for `p > 1` they are
/// skipped with a warning.
pub fn empirical_graph(obj: &dyn Objective, grid: &[Vec<f64>], exec: Execution) -> Result<GraphCloud> {
    let per_point = par::map_slice(exec, grid, |theta| -> Result<Vec<Vec<f64>>> {
        match obj.oracle(theta) {
            Ok(g) => Ok(vec![g.into_inner()]),
            Err(e) if e.is_kink() && theta.len() == 1 => {
                let t = theta[0];
                Ok(one_sided(|s| obj.value(&[s]), t, kink_step(t))?.endpoints())
            }
            Err(e) if e.is_kink() => {
                warn!("skipping grid point {theta:?}: {e}");
                Ok(Vec::new())
            }
            Err(e) => Err(e),
        }
    });
    let mut cloud = GraphCloud::default();
    for (theta, gs) in grid.iter().zip(per_point) {
        for g in gs? {
            cloud.push(theta.clone(), g);
        }
    }
    Ok(cloud)
}

/// The grid path refined `DENSIFY` times per segment and extended by `pad`
/// beyond both ends along the end segments.
pub fn densify(grid: &[Vec<f64>], pad: f64) -> Vec<Vec<f64>> {
    let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect() };
    let mut out = Vec::with_capacity(grid.len() * DENSIFY + 1);
    if grid.len() < 2 {
        return grid.to_vec();
    }
    let extend = |from: &[f64], toward: &[f64]| -> Vec<Vec<f64>> {
        let len = sq_dist(from, toward).sqrt();
        if pad <= 0.0 || len == 0.0 {
            return Vec::new();
        }
        let step = len / DENSIFY as f64;
        let count = (pad / step).ceil() as usize;
        (1..=count).map(|j| lerp(from, toward, -((j as f64 * step).min(pad)) / len)).collect()
    };
    let mut head = extend(&grid[0], &grid[1]);
    head.reverse();
    out.extend(head);
    for pair in grid.windows(2) {
        for j in 0..DENSIFY {
            out.push(lerp(&pair[0], &pair[1], j as f64 / DENSIFY as f64));
        }
    }
    out.push(grid[grid.len() - 1].clone());
    out.extend(extend(&grid[grid.len() - 1], &grid[grid.len() - 2]));
    out
}

/// Population graph over the densified grid.
pub fn population_graph(population_grad: &(dyn Fn(&[f64]) -> Vec<Vec<f64>> + Sync), grid: &[Vec<f64>], pad: f64) -> GraphCloud {
    let mut cloud = GraphCloud::default();
    for theta in densify(grid, pad) {
        for g in population_grad(&theta) {
            cloud.push(theta.clone(), g);
        }
    }
    cloud
}

/// Excess of the empirical oracle graph over the densified population graph.
pub fn graph_excess(
    empirical: &dyn Objective,
    population_grad: &(dyn Fn(&[f64]) -> Vec<Vec<f64>> + Sync),
    grid: &[Vec<f64>],
    pad: f64,
) -> Result<f64> {
    graph_excess_with(empirical, population_grad, grid, pad, Execution::default())
}

pub fn graph_excess_with(
    empirical: &dyn Objective,
    population_grad: &(dyn Fn(&[f64]) -> Vec<Vec<f64>> + Sync),
    grid: &[Vec<f64>],
    pad: f64,
    exec: Execution,
) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::Domain("graph excess needs a non-empty grid".into()));
    }
    if !(pad >= 0.0 && pad.is_finite()) {
        return Err(Error::Parameter(format!("pad must be >= 0, got {pad}")));
    }
    let emp = empirical_graph(empirical, grid, exec)?;
    let pop = population_graph(population_grad, grid, pad);
    if pop.is_empty() {
        return Err(Error::Domain("population graph is empty".into()));
    }
    excess_distance_with(&emp.points(), &pop.points(), exec)
}

/// Evenly spaced scalar grid with `count` points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<Vec<f64>> {
    match count {
        0 => Vec::new(),
        1 => vec![vec![lo]],
        _ => (0..count).map(|i| vec![lo + (hi - lo) * i as f64 / (count - 1) as f64]).collect(),
    }
}

/// Grid points with `dist(0, G(theta) + N(theta)) <= tol`, where `G` is the
/// oracle value or, at scalar kinks, the one-sided derivative hull.
pub fn critical_set(obj: &dyn Objective, set: &FeasibleSet, grid: &[Vec<f64>], tol: f64) -> Result<Vec<Vec<f64>>> {
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!("tolerance must be > 0, got {tol}")));
    }
    let flags = par::map_slice(Execution::default(), grid, |theta| -> Result<bool> {
        let residual = match obj.oracle(theta) {
            Ok(g) => set.normal_cone_residual(theta, &g)?,
            Err(e) if e.is_kink() && theta.len() == 1 => {
                let t = theta[0];
                let hull = one_sided(|s| obj.value(&[s]), t, kink_step(t))?;
                set.interval_residual(t, hull.lo(), hull.hi())?
            }
            Err(e) if e.is_kink() => {
                warn!("skipping grid point {theta:?}: {e}");
                return Ok(false);
            }
            Err(e) => return Err(e),
        };
        Ok(residual <= tol)
    });
    let mut out = Vec::new();
    for (theta, flag) in grid.iter().zip(flags) {
        if flag? {
            out.push(theta.clone());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::BuiltinModel;
    use crate::objectives::{PopulationCase, PopulationObjective};
    use crate::oracles::Subgradient;

    fn pts(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn excess_examples() {
        let a = vec![vec![0.0, 1.0], vec![2.0, 3.0]];
        assert_eq!(excess_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(excess_distance(&[vec![0.0, 0.0]], &[vec![3.0, 4.0]]).unwrap(), 5.0);
        assert_eq!(excess_distance(&pts(&[0.0, 10.0]), &pts(&[0.0])).unwrap(), 10.0);
        assert_eq!(excess_distance(&pts(&[0.0]), &pts(&[0.0, 10.0])).unwrap(), 0.0);
        assert!(matches!(excess_distance(&pts(&[0.0]), &[]), Err(Error::Domain(_))));
    }

    #[test]
    fn one_sided_examples() {
        let abs = one_sided(|t| Ok(t.abs()), 0.0, 1e-3).unwrap();
        assert_eq!((abs.left, abs.right), (-1.0, 1.0));
        let relu = one_sided(|t| Ok(t.max(0.0)), 0.0, 1e-3).unwrap();
        assert_eq!((relu.left, relu.right), (0.0, 1.0));
        let smooth = one_sided(|t| Ok(t.sin()), 0.3, 1e-6).unwrap();
        assert!((smooth.left - smooth.right).abs() <= 1e-4 * smooth.right.abs());
    }

    #[test]
    fn analytic_relu_one_sided() {
        let xs = EmpiricalMeasureD::from_scalars(&[0.1, 0.9]).unwrap();
        let ys = EmpiricalMeasure1D::new(vec![0.2, 0.8]).unwrap();
        let hull = sorted_l1_one_sided(&BuiltinModel::ReluShift, 0.0, &xs, &ys).unwrap();
        assert_eq!((hull.left, hull.right), (0.0, 0.0));
        let xs = EmpiricalMeasureD::from_scalars(&[0.5, 0.9]).unwrap();
        let hull = sorted_l1_one_sided(&BuiltinModel::ReluShift, 0.0, &xs, &ys).unwrap();
        assert_eq!((hull.left, hull.right), (0.0, 1.0));
    }

    struct Quadratic;

    impl Objective for Quadratic {
        fn name(&self) -> String {
            "quadratic".into()
        }
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, t: &[f64]) -> Result<f64> {
            Ok(0.5 * t[0] * t[0])
        }
        fn oracle(&self, t: &[f64]) -> Result<Subgradient> {
            Ok(Subgradient(vec![t[0]]))
        }
    }

    #[test]
    fn graph_excess_against_itself_is_zero() {
        let grid = linspace(-1.0, 1.0, 21);
        let pop = |t: &[f64]| vec![vec![t[0]]];
        assert!(graph_excess(&Quadratic, &pop, &grid, 0.0).unwrap() < 1e-15);
        let relu = PopulationObjective(PopulationCase::ReluUnif);
        let pop = |t: &[f64]| PopulationCase::ReluUnif.subdifferential_vertices(t[0]);
        assert!(graph_excess(&relu, &pop, &grid, 0.0).unwrap() < 1e-9);
    }

    #[test]
    fn densify_pads_the_ends() {
        let dense = densify(&linspace(0.0, 1.0, 3), 0.1);
        assert_eq!(dense.len(), 2 * DENSIFY + 1 + 2 * 2);
        assert!((dense[0][0] + 0.1).abs() < 1e-12);
        assert!((dense[dense.len() - 1][0] - 1.1).abs() < 1e-12);
    }

    #[test]
    fn critical_set_examples() {
        let set = FeasibleSet::interval(-1.0, 1.0).unwrap();
        let grid = linspace(-1.0, 1.0, 201);
        let crit = critical_set(&Quadratic, &set, &grid, 0.02).unwrap();
        assert!(!crit.is_empty() && crit.iter().all(|t| t[0].abs() <= 0.02 + 1e-12));

        let spurious = PopulationObjective(PopulationCase::Spurious { w: 0.75, atom: 6.0 });
        assert_eq!(critical_set(&spurious, &set, &grid, 0.02).unwrap(), vec![vec![-1.0]]);
    }
}
