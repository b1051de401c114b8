//! Monte Carlo experiments on one-sided derivatives at a kink, and the
//! convergence sweep of empirical subgradient graphs.
//!
//! Trial `i` of a run with seed `s` draws from the stream `(s, i)`, and all
//! per-trial results are collected in trial order, so reports are
//! byte-identical for any thread count.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::diagnostics::{graph_excess_with, linspace, sorted_l1_one_sided, DerivativeHull};
use crate::error::{Error, Result};
use crate::measures::{EmpiricalMeasure1D, EmpiricalMeasureD, SourceDistribution};
use crate::models::{BuiltinModel, ParamModel};
use crate::objectives::{FairnessPenalty, Objective, TransportObjective};
use crate::oracles::scalar_outputs;
use crate::ot1d::w_equal;
use crate::par::{self, Execution};
use crate::rng::{derive_seed, substream, StreamRng};

/// One-sample Kolmogorov-Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max((i + 1) as f64 / n - f).max(f - i as f64 / n)
    })
}

/// CDF of the uniform law on `[lo, hi]`.
pub fn uniform_cdf(lo: f64, hi: f64) -> impl Fn(f64) -> f64 {
    move |x| ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// A table cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(u64),
    Real(f64),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            // shortest representation that round-trips
            Cell::Real(v) => write!(f, "{v:?}"),
        }
    }
}

/// Per-trial table, summary statistics and the configuration that produced
/// them.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub experiment: String,
    pub config: Value,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub summary: BTreeMap<String, Value>,
    /// `(trial, theta, value)` rows of objective curves.
    pub curves: Vec<(usize, f64, f64)>,
}

impl ExperimentReport {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(
            self.rows
                .iter()
                .map(|r| match r[idx] {
                    Cell::Int(v) => v as f64,
                    Cell::Real(v) => v,
                })
                .collect(),
        )
    }

    pub fn summary_f64(&self, key: &str) -> Option<f64> {
        self.summary.get(key).and_then(Value::as_f64)
    }

    pub fn trials_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::to_string).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn summary_json(&self) -> String {
        let doc = json!({
            "experiment": self.experiment,
            "config": self.config,
            "summary": self.summary,
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("report values are finite or null");
        s.push('\n');
        s
    }

    pub fn curves_csv(&self) -> Option<String> {
        if self.curves.is_empty() {
            return None;
        }
        let mut out = String::from("trial,theta,value\n");
        for (trial, theta, value) in &self.curves {
            out.push_str(&format!("{trial},{theta:?},{value:?}\n"));
        }
        Some(out)
    }
}

fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn check_trials(n: usize, trials: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Parameter(format!("need n >= 2 samples per trial, got {n}")));
    }
    if trials < 1 {
        return Err(Error::Parameter("need at least one trial".into()));
    }
    Ok(())
}

fn draw_line(dist: &SourceDistribution, n: usize, rng: &mut StreamRng) -> Result<EmpiricalMeasure1D> {
    dist.sample_with(n, rng)?.into_line()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReluExperimentConfig {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    #[serde(skip)]
    pub exec: Execution,
}

impl Default for ReluExperimentConfig {
    fn default() -> Self {
        Self { n: 10_000, trials: 1000, seed: 0, exec: Execution::default() }
    }
}

impl ReluExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        check_trials(self.n, self.trials)
    }
}

/// One-sided derivatives at 0 of `t -> (1/n) sum_i |x_(i) + relu(t) - y_(i)|`.
pub fn relu_trial(xs: &[f64], ys: &[f64]) -> Result<DerivativeHull> {
    let xs = EmpiricalMeasureD::from_scalars(xs)?;
    let ys = EmpiricalMeasure1D::new(ys.to_vec())?;
    sorted_l1_one_sided(&BuiltinModel::ReluShift, 0.0, &xs, &ys)
}

/// Runs the ReLU experiment on samples drawn from `Unif(0, 1)`.
pub fn run_relu(cfg: &ReluExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let unif = SourceDistribution::uniform(0.0, 1.0);
    let hulls = par::map_indexed(cfg.exec, cfg.trials, |i| {
        let mut rng = substream(cfg.seed, i as u64);
        let xs = draw_line(&unif, cfg.n, &mut rng)?;
        let ys = draw_line(&unif, cfg.n, &mut rng)?;
        relu_trial(xs.values(), ys.values())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    relu_report(cfg, &hulls)
}

/// Builds the ReLU report from given `(x, y)` samples, one pair per trial.
pub fn run_relu_on(cfg: &ReluExperimentConfig, samples: &[(Vec<f64>, Vec<f64>)]) -> Result<ExperimentReport> {
    let hulls = samples.iter().map(|(x, y)| relu_trial(x, y)).collect::<Result<Vec<_>>>()?;
    relu_report(cfg, &hulls)
}

fn relu_report(cfg: &ReluExperimentConfig, hulls: &[DerivativeHull]) -> Result<ExperimentReport> {
    let right: Vec<f64> = hulls.iter().map(|h| h.right).collect();
    let max_abs_left = hulls.iter().map(|h| h.left.abs()).fold(0.0, f64::max);
    let mut summary = BTreeMap::new();
    summary.insert("trials".into(), json!(hulls.len()));
    summary.insert("ks_right_vs_unif_pm1".into(), json!(ks_statistic(&right, uniform_cdf(-1.0, 1.0))));
    summary.insert("mean_right".into(), json!(par::pairwise_sum(&right) / right.len() as f64));
    summary.insert("max_abs_left".into(), json!(max_abs_left));
    summary.insert("frac_zero_in_hull".into(), json!(hulls.iter().filter(|h| h.contains(0.0)).count() as f64 / hulls.len() as f64));
    Ok(ExperimentReport {
        experiment: "relu".into(),
        config: serde_json::to_value(cfg).expect("config serializes"),
        columns: ["trial", "left", "right"].map(String::from).to_vec(),
        rows: hulls.iter().enumerate().map(|(i, h)| vec![Cell::Int(i as u64), Cell::Real(h.left), Cell::Real(h.right)]).collect(),
        summary,
        curves: Vec::new(),
    })
}

fn default_theta_grid() -> Vec<f64> {
    linspace(-1.0, 1.0, 41).into_iter().map(|t| t[0]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpuriousExperimentConfig {
    pub w: f64,
    #[serde(rename = "M")]
    pub atom: f64,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    /// Parameters at which objective curves are evaluated.
    pub theta_grid: Vec<f64>,
    /// Number of leading trials that also record curves.
    pub curve_trials: usize,
    #[serde(skip)]
    pub exec: Execution,
}

impl Default for SpuriousExperimentConfig {
    fn default() -> Self {
        Self {
            w: 0.75,
            atom: 6.0,
            n: 10_000,
            trials: 1000,
            seed: 0,
            theta_grid: default_theta_grid(),
            curve_trials: 3,
            exec: Execution::default(),
        }
    }
}

impl SpuriousExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        check_trials(self.n, self.trials)?;
        if !(self.w > 0.5 && self.w < 1.0) {
            return Err(Error::Parameter(format!("w must lie in (1/2, 1), got {}", self.w)));
        }
        if !(self.atom > 4.0 && self.atom.is_finite()) {
            return Err(Error::Parameter(format!("M must exceed 4, got {}", self.atom)));
        }
        if self.theta_grid.iter().any(|t| !t.is_finite()) {
            return Err(Error::Parameter("theta grid must be finite".into()));
        }
        Ok(())
    }

    /// Source law `w Unif(0, 1) + (1 - w) delta_M`.
    pub fn source(&self) -> SourceDistribution {
        SourceDistribution::Mixture(vec![(self.w, SourceDistribution::uniform(0.0, 1.0)), (1.0 - self.w, SourceDistribution::Dirac(self.atom))])
    }

    /// Target law `w Unif(0, 1) + (1 - w) delta_{M - 2}`.
    pub fn target(&self) -> SourceDistribution {
        SourceDistribution::Mixture(vec![
            (self.w, SourceDistribution::uniform(0.0, 1.0)),
            (1.0 - self.w, SourceDistribution::Dirac(self.atom - 2.0)),
        ])
    }
}

struct SpuriousTrial {
    atoms: usize,
    hull: DerivativeHull,
    curve: Vec<f64>,
}

/// `T_n(theta) = W_1(h_theta # mu_n, nu_n)`, checking that the model keeps
/// the input order so that the rank pairing is the monotone one.
fn spurious_curve(model: &dyn ParamModel, xs: &EmpiricalMeasureD, ys: &EmpiricalMeasure1D, grid: &[f64]) -> Result<Vec<f64>> {
    let order = EmpiricalMeasure1D::new(xs.as_flat().to_vec())?;
    grid.iter()
        .map(|&t| {
            let out = scalar_outputs(model, &[t], xs)?;
            let monotone = order.sort_perm().windows(2).all(|w| out.values()[w[0]] <= out.values()[w[1]]);
            if !monotone {
                return Err(Error::Domain(format!("model is not monotone in x at theta = {t}")));
            }
            w_equal(&out, ys, 1.0)
        })
        .collect()
}

/// Runs the spurious-criticality experiment.
pub fn run_spurious(cfg: &SpuriousExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let model = BuiltinModel::chi(cfg.atom)?;
    let (source, target) = (cfg.source(), cfg.target());
    let trials = par::map_indexed(cfg.exec, cfg.trials, |i| -> Result<SpuriousTrial> {
        let mut rng = substream(cfg.seed, i as u64);
        let xs = EmpiricalMeasureD::from_scalars(draw_line(&source, cfg.n, &mut rng)?.values())?;
        let ys = draw_line(&target, cfg.n, &mut rng)?;
        let atoms = xs.as_flat().iter().filter(|&&x| x == cfg.atom).count();
        let hull = sorted_l1_one_sided(&model, 0.0, &xs, &ys)?;
        let curve = if i < cfg.curve_trials { spurious_curve(&model, &xs, &ys, &cfg.theta_grid)? } else { Vec::new() };
        Ok(SpuriousTrial { atoms, hull, curve })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let count = trials.len() as f64;
    let left: Vec<f64> = trials.iter().map(|t| t.hull.left).collect();
    let right: Vec<f64> = trials.iter().map(|t| t.hull.right).collect();
    let hits = trials.iter().filter(|t| t.hull.contains(0.0)).count() as f64;
    let freq = hits / count;
    let minmax = |v: &[f64]| (v.iter().copied().fold(f64::INFINITY, f64::min), v.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let ((left_min, left_max), (right_min, right_max)) = (minmax(&left), minmax(&right));
    let w = cfg.w;

    let mut summary = BTreeMap::new();
    summary.insert("trials".into(), json!(trials.len()));
    summary.insert("freq_zero_in_hull".into(), json!(freq));
    summary.insert("freq_half_width_95".into(), json!(1.96 * (freq * (1.0 - freq) / count).sqrt()));
    summary.insert("freq_limit".into(), json!(1.0 - 1.0 / (2.0 * w)));
    summary.insert("left_mean".into(), json!(par::pairwise_sum(&left) / count));
    summary.insert("left_min".into(), json!(left_min));
    summary.insert("left_max".into(), json!(left_max));
    summary.insert("left_limit".into(), json!(1.0 - w));
    summary.insert("right_min".into(), finite_or_null(right_min));
    summary.insert("right_max".into(), finite_or_null(right_max));
    summary.insert("ks_right_vs_shifted_law".into(), json!(ks_statistic(&right, uniform_cdf(1.0 - 2.0 * w, 1.0))));
    summary.insert("ks_right_vs_unif_pm1".into(), json!(ks_statistic(&right, uniform_cdf(-1.0, 1.0))));

    let mut curves = Vec::new();
    for (i, t) in trials.iter().enumerate() {
        for (&theta, &value) in cfg.theta_grid.iter().zip(&t.curve) {
            curves.push((i, theta, value));
        }
    }
    Ok(ExperimentReport {
        experiment: "spurious".into(),
        config: serde_json::to_value(cfg).expect("config serializes"),
        columns: ["trial", "atoms", "left", "right", "zero_in_hull"].map(String::from).to_vec(),
        rows: trials
            .iter()
            .enumerate()
            .map(|(i, t)| {
                vec![
                    Cell::Int(i as u64),
                    Cell::Int(t.atoms as u64),
                    Cell::Real(t.hull.left),
                    Cell::Real(t.hull.right),
                    Cell::Int(t.hull.contains(0.0) as u64),
                ]
            })
            .collect(),
        summary,
        curves,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepCase {
    /// Translated `Unif(0, 1)` sample against another, cost `(u - v)^2 / 2`.
    TranslateQuadratic,
    /// Fairness penalty of the score `theta x` between `Unif(0, 1)` and
    /// `Unif(0.5, 1.5)` groups.
    FairnessLinear,
}

impl std::str::FromStr for SweepCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "translate_quadratic" => Ok(SweepCase::TranslateQuadratic),
            "fairness_linear" => Ok(SweepCase::FairnessLinear),
            _ => Err(Error::Parameter(format!("unknown sweep case '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub case: SweepCase,
    pub ns: Vec<usize>,
    pub seeds: Vec<u64>,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_points: usize,
    pub pad: f64,
    /// Sample size of the high-n reference runs (fairness case only).
    pub reference_n: usize,
    /// Coarse grid on which reference runs are evaluated (fairness case only).
    pub reference_points: usize,
    /// Extra independent reference runs used for the noise floor.
    pub reference_extra: usize,
    pub reference_seed: u64,
    #[serde(skip)]
    pub exec: Execution,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            case: SweepCase::TranslateQuadratic,
            ns: vec![100, 1000, 10_000],
            seeds: (0..20).collect(),
            grid_lo: -1.0,
            grid_hi: 1.0,
            grid_points: 201,
            pad: 0.0,
            reference_n: 1_000_000,
            reference_points: 21,
            reference_extra: 4,
            reference_seed: 0x5EED,
            exec: Execution::default(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ns.is_empty() || self.ns.iter().any(|&n| n < 1) {
            return Err(Error::Parameter("sweep needs at least one sample size >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Parameter("sweep needs at least one seed".into()));
        }
        if !(self.grid_lo.is_finite() && self.grid_hi.is_finite() && self.grid_lo <= self.grid_hi) || self.grid_points < 1 {
            return Err(Error::Parameter("sweep grid needs finite lo <= hi and at least one point".into()));
        }
        if !(self.pad >= 0.0) {
            return Err(Error::Parameter(format!("pad must be >= 0, got {}", self.pad)));
        }
        if self.case == SweepCase::FairnessLinear && (self.reference_points < 2 || self.reference_n < 1) {
            return Err(Error::Parameter("fairness sweep needs reference_n >= 1 and reference_points >= 2".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<Vec<f64>> {
        linspace(self.grid_lo, self.grid_hi, self.grid_points)
    }
}

/// Empirical objective of a sweep case with `n` samples per group.
pub fn sweep_objective(case: SweepCase, n: usize, rng: &mut StreamRng) -> Result<Box<dyn Objective>> {
    let unif = SourceDistribution::uniform(0.0, 1.0);
    Ok(match case {
        SweepCase::TranslateQuadratic => {
            let xs = draw_line(&unif, n, rng)?;
            let ys = draw_line(&unif, n, rng)?;
            Box::new(TransportObjective::translate_quadratic(xs.values(), ys.values())?)
        }
        SweepCase::FairnessLinear => {
            let g0 = draw_line(&unif, n, rng)?;
            let g1 = draw_line(&SourceDistribution::uniform(0.5, 1.5), n, rng)?;
            Box::new(FairnessPenalty {
                score: Arc::new(BuiltinModel::LinearScore { dim: 1 }),
                xs0: EmpiricalMeasureD::from_scalars(g0.values())?,
                xs1: EmpiricalMeasureD::from_scalars(g1.values())?,
            })
        }
    })
}

/// Piecewise-linear interpolant through `(knots[i], values[i])`, extended
/// linearly beyond the end knots.
#[derive(Debug, Clone)]
pub struct Interpolant {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl Interpolant {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 || knots.len() != values.len() || knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Parameter("interpolant needs >= 2 strictly increasing knots".into()));
        }
        Ok(Self { knots, values })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let k = &self.knots;
        let i = k.partition_point(|&x| x <= t).clamp(1, k.len() - 1);
        let (a, b) = (k[i - 1], k[i]);
        let s = (t - a) / (b - a);
        self.values[i - 1] + s * (self.values[i] - self.values[i - 1])
    }
}

/// Oracle of a scalar objective sampled on `knots` and interpolated.
fn reference_run(cfg: &SweepConfig, k: usize, knots: &[f64]) -> Result<Interpolant> {
    let mut rng = substream(derive_seed(cfg.reference_seed, k as u64), 0);
    let obj = sweep_objective(cfg.case, cfg.reference_n, &mut rng)?;
    let values = par::map_slice(cfg.exec, knots, |&t| obj.oracle(&[t]).map(|g| g[0])).into_iter().collect::<Result<Vec<_>>>()?;
    Interpolant::new(knots.to_vec(), values)
}

/// Fairness reference: the first high-n run, and the noise floor per unit
/// sample size estimated from the extra runs.
struct Reference {
    main: Interpolant,
    /// Median excess of the extra runs against the main one, times `sqrt(n_ref)`.
    scaled_noise: f64,
}

fn fairness_reference(cfg: &SweepConfig) -> Result<Reference> {
    let mut knots: Vec<f64> = linspace(cfg.grid_lo, cfg.grid_hi, cfg.reference_points).into_iter().map(|t| t[0]).collect();
    if cfg.grid_lo < 0.0 && cfg.grid_hi > 0.0 && !knots.contains(&0.0) {
        knots.push(0.0);
        knots.sort_by(f64::total_cmp);
    }
    let main = reference_run(cfg, 0, &knots)?;
    let pop = |t: &[f64]| vec![vec![main.eval(t[0])]];
    let coarse: Vec<Vec<f64>> = knots.iter().map(|&t| vec![t]).collect();
    let mut extra = Vec::with_capacity(cfg.reference_extra);
    for k in 1..=cfg.reference_extra {
        let run = reference_run(cfg, k, &knots)?;
        let points: Vec<Vec<f64>> = knots.iter().map(|&t| vec![t, run.eval(t)]).collect();
        let population = crate::diagnostics::population_graph(&pop, &coarse, cfg.pad).points();
        extra.push(crate::diagnostics::excess_distance(&points, &population)?);
    }
    let scaled_noise = if extra.is_empty() { f64::NAN } else { median(&extra) * (cfg.reference_n as f64).sqrt() };
    Ok(Reference { main, scaled_noise })
}

/// Graph excess of the empirical oracle against the population gradient
/// for every `(n, seed)` pair.
pub fn run_convergence_sweep(cfg: &SweepConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let grid = cfg.grid();
    let reference = match cfg.case {
        SweepCase::FairnessLinear => Some(fairness_reference(cfg)?),
        SweepCase::TranslateQuadratic => None,
    };
    let population = |t: &[f64]| -> Vec<Vec<f64>> {
        match &reference {
            Some(r) => vec![vec![r.main.eval(t[0])]],
            None => vec![vec![t[0]]],
        }
    };
    let pairs: Vec<(usize, u64)> = cfg.ns.iter().flat_map(|&n| cfg.seeds.iter().map(move |&s| (n, s))).collect();
    let excess = par::map_slice(cfg.exec, &pairs, |&(n, seed)| -> Result<f64> {
        let mut rng = substream(seed, n as u64);
        let obj = sweep_objective(cfg.case, n, &mut rng)?;
        graph_excess_with(obj.as_ref(), &population, &grid, cfg.pad, Execution::Sequential)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut summary = BTreeMap::new();
    let mut medians = Vec::new();
    for &n in &cfg.ns {
        let vals: Vec<f64> = pairs.iter().zip(&excess).filter(|((m, _), _)| *m == n).map(|(_, &e)| e).collect();
        let med = median(&vals);
        medians.push(json!({ "n": n, "median_excess": med }));
        if let Some(r) = &reference {
            summary.insert(format!("noise_floor_n{n}"), finite_or_null(r.scaled_noise / (n as f64).sqrt()));
        }
        summary.insert(format!("median_excess_n{n}"), json!(med));
    }
    summary.insert("medians".into(), Value::Array(medians));
    Ok(ExperimentReport {
        experiment: "sweep".into(),
        config: serde_json::to_value(cfg).expect("config serializes"),
        columns: ["n", "seed", "excess"].map(String::from).to_vec(),
        rows: pairs.iter().zip(&excess).map(|(&(n, s), &e)| vec![Cell::Int(n as u64), Cell::Int(s), Cell::Real(e)]).collect(),
        summary,
        curves: Vec::new(),
    })
}
