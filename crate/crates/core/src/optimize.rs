//! Projected subgradient method.

use std::fmt;
use std::str::FromStr;

use log::warn;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::dot;
use crate::objectives::Objective;
use crate::oracles::Subgradient;
use crate::rng::substream;

/// Oracle retries allowed per iterate before giving up on a kink.
pub const MAX_KINK_RETRIES: usize = 10;

/// Size of the random perturbation applied when the oracle hits a kink.
pub const KINK_PERTURBATION: f64 = 1e-12;

/// Convex compact parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeasibleSet {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl FeasibleSet {
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        let set = FeasibleSet::Box { lo: vec![lo], hi: vec![hi] };
        set.validate()?;
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        match self {
            FeasibleSet::Box { lo, .. } => lo.len(),
            FeasibleSet::Ball { center, .. } => center.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FeasibleSet::Box { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return Err(Error::Shape(format!("box bounds have lengths {} and {}", lo.len(), hi.len())));
                }
                if lo.iter().zip(hi).any(|(l, h)| !(l.is_finite() && h.is_finite() && l <= h)) {
                    return Err(Error::Parameter("box needs finite bounds with lo <= hi".into()));
                }
            }
            FeasibleSet::Ball { center, radius } => {
                if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::Parameter("ball center must be a non-empty finite vector".into()));
                }
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(Error::Parameter(format!("ball radius must be > 0, got {radius}")));
                }
            }
        }
        Ok(())
    }

    fn check_dim(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.dim() {
            return Err(Error::Shape(format!("point has dimension {} but the set has {}", w.len(), self.dim())));
        }
        Ok(())
    }

    /// Euclidean projection.
    pub fn project(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(w)?;
        Ok(match self {
            FeasibleSet::Box { lo, hi } => w.iter().zip(lo.iter().zip(hi)).map(|(x, (l, h))| x.clamp(*l, *h)).collect(),
            FeasibleSet::Ball { center, radius } => {
                let d: Vec<f64> = w.iter().zip(center).map(|(x, c)| x - c).collect();
                let norm = dot(&d, &d).sqrt();
                if norm <= *radius {
                    w.to_vec()
                } else {
                    center.iter().zip(&d).map(|(c, di)| c + di * radius / norm).collect()
                }
            }
        })
    }

    pub fn contains(&self, w: &[f64], tol: f64) -> bool {
        match self.project(w) {
            Ok(p) => p.iter().zip(w).all(|(a, b)| (a - b).abs() <= tol),
            Err(_) => false,
        }
    }

    /// `dist(0, g + N(theta))` for a single subgradient `g`.
    pub fn normal_cone_residual(&self, theta: &[f64], g: &[f64]) -> Result<f64> {
        self.check_dim(theta)?;
        self.check_dim(g)?;
        Ok(match self {
            FeasibleSet::Box { lo, hi } => {
                let sq: f64 = (0..g.len())
                    .map(|i| {
                        let r = box_component(theta[i], lo[i], hi[i], g[i], g[i]);
                        r * r
                    })
                    .sum();
                sq.sqrt()
            }
            FeasibleSet::Ball { center, radius } => {
                let d: Vec<f64> = theta.iter().zip(center).map(|(x, c)| x - c).collect();
                let norm = dot(&d, &d).sqrt();
                if norm < radius * (1.0 - 1e-12) {
                    dot(g, g).sqrt()
                } else {
                    // the cone is the ray along the outward normal
                    let t = (-dot(g, &d) / norm).max(0.0);
                    let r: Vec<f64> = g.iter().zip(&d).map(|(gi, di)| gi + t * di / norm).collect();
                    dot(&r, &r).sqrt()
                }
            }
        })
    }

    /// `dist(0, [lo, hi] + N(theta))` for scalar `theta`.
    pub fn interval_residual(&self, theta: f64, g_lo: f64, g_hi: f64) -> Result<f64> {
        let (lo, hi) = match self {
            FeasibleSet::Box { lo, hi } if lo.len() == 1 => (lo[0], hi[0]),
            FeasibleSet::Ball { center, radius } if center.len() == 1 => (center[0] - radius, center[0] + radius),
            _ => return Err(Error::Shape("interval residual needs a one-dimensional set".into())),
        };
        Ok(box_component(theta, lo, hi, g_lo.min(g_hi), g_lo.max(g_hi)))
    }
}

fn at_bound(x: f64, bound: f64) -> bool {
    (x - bound).abs() <= 1e-12 * (1.0 + bound.abs())
}

fn box_component(x: f64, lo: f64, hi: f64, g_lo: f64, g_hi: f64) -> f64 {
    match (at_bound(x, lo), at_bound(x, hi)) {
        (true, true) => 0.0,
        (true, false) => (-g_hi).max(0.0),
        (false, true) => g_lo.max(0.0),
        (false, false) => g_lo.max(0.0) + (-g_hi).max(0.0),
    }
}

impl fmt::Display for FeasibleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeasibleSet::Box { lo, hi } => {
                let parts: Vec<String> = lo.iter().zip(hi).map(|(l, h)| format!("{l}:{h}")).collect();
                write!(f, "box({})", parts.join(","))
            }
            FeasibleSet::Ball { center, radius } => {
                let c: Vec<String> = center.iter().map(|c| c.to_string()).collect();
                write!(f, "ball({radius};{})", c.join(","))
            }
        }
    }
}

impl FromStr for FeasibleSet {
    type Err = Error;

    /// `box(lo:hi,lo:hi,...)` or `ball(radius;c1,c2,...)`.
    fn from_str(s: &str) -> Result<Self> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let num = |t: &str| t.parse::<f64>().map_err(|_| Error::Parse(format!("invalid number '{t}' in '{s}'")));
        let set = if let Some(body) = s.strip_prefix("box(").and_then(|b| b.strip_suffix(')')) {
            let (mut lo, mut hi) = (Vec::new(), Vec::new());
            for part in body.split(',') {
                let (l, h) = part.split_once(':').ok_or_else(|| Error::Parse(format!("expected lo:hi in '{s}'")))?;
                lo.push(num(l)?);
                hi.push(num(h)?);
            }
            FeasibleSet::Box { lo, hi }
        } else if let Some(body) = s.strip_prefix("ball(").and_then(|b| b.strip_suffix(')')) {
            let (r, c) = body.split_once(';').ok_or_else(|| Error::Parse(format!("expected radius;center in '{s}'")))?;
            FeasibleSet::Ball { radius: num(r)?, center: c.split(',').map(num).collect::<Result<_>>()? }
        } else {
            return Err(Error::Parse(format!("unknown feasible set '{s}'")));
        };
        set.validate()?;
        Ok(set)
    }
}

/// Step sizes `eta_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepSchedule {
    Constant(f64),
    /// `eta_0 / sqrt(k + 1)`.
    InverseSqrt(f64),
}

impl StepSchedule {
    pub fn validate(&self) -> Result<()> {
        let (StepSchedule::Constant(eta) | StepSchedule::InverseSqrt(eta)) = *self;
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::Parameter(format!("step size must be > 0, got {eta}")));
        }
        Ok(())
    }

    pub fn step(&self, k: usize) -> f64 {
        match *self {
            StepSchedule::Constant(eta) => eta,
            StepSchedule::InverseSqrt(eta) => eta / ((k + 1) as f64).sqrt(),
        }
    }
}

impl fmt::Display for StepSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepSchedule::Constant(eta) => write!(f, "const({eta})"),
            StepSchedule::InverseSqrt(eta) => write!(f, "invsqrt({eta})"),
        }
    }
}

impl FromStr for StepSchedule {
    type Err = Error;

    /// `const(eta)` or `invsqrt(eta0)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let arg = |prefix: &str| {
            s.strip_prefix(prefix)
                .and_then(|b| b.strip_suffix(')'))
                .map(|b| b.trim().parse::<f64>().map_err(|_| Error::Parse(format!("invalid step size in '{s}'"))))
        };
        let sched = if let Some(eta) = arg("const(") {
            StepSchedule::Constant(eta?)
        } else if let Some(eta) = arg("invsqrt(") {
            StepSchedule::InverseSqrt(eta?)
        } else {
            return Err(Error::Parse(format!("unknown step schedule '{s}'")));
        };
        sched.validate()?;
        Ok(sched)
    }
}

/// `||theta - proj(theta - g)||`, the unit-step projected-gradient residual.
pub fn stationarity_residual(g: &[f64], set: &FeasibleSet, theta: &[f64]) -> Result<f64> {
    let w: Vec<f64> = theta.iter().zip(g).map(|(t, gi)| t - gi).collect();
    let p = set.project(&w)?;
    Ok(theta.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub theta: Vec<f64>,
    pub value: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Completed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
    pub status: RunStatus,
    /// Number of kink perturbations applied over the whole run.
    pub perturbations: usize,
}

impl RunTrace {
    pub fn last(&self) -> &TraceRow {
        self.rows.last().expect("a trace always holds the initial point")
    }

    /// Smallest objective value among the first `k + 1` iterates.
    pub fn best_value(&self, k: usize) -> f64 {
        self.rows.iter().take(k + 1).map(|r| r.value).fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self) -> String {
        let p = self.rows.first().map_or(0, |r| r.theta.len());
        let mut out = String::from("k");
        for i in 0..p {
            out.push_str(&format!(",theta{i}"));
        }
        out.push_str(",value,residual\n");
        for r in &self.rows {
            out.push_str(&r.k.to_string());
            for t in &r.theta {
                out.push_str(&format!(",{t:?}"));
            }
            out.push_str(&format!(",{:?},{:?}\n", r.value, r.residual));
        }
        out
    }
}

fn random_unit(rng: &mut impl rand::Rng, p: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..p).map(|_| StandardNormal.sample(rng)).collect();
        let norm = dot(&v, &v).sqrt();
        if norm > 0.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Oracle call that resolves kinks by tiny random perturbations.
fn robust_oracle(obj: &dyn Objective, theta: &[f64], seed: u64, k: usize, perturbations: &mut usize) -> Result<Subgradient> {
    match obj.oracle(theta) {
        Err(e) if e.is_kink() => {
            let mut rng = substream(seed, k as u64);
            for attempt in 1..=MAX_KINK_RETRIES {
                let u = random_unit(&mut rng, theta.len());
                let shifted: Vec<f64> = theta.iter().zip(&u).map(|(t, ui)| t + KINK_PERTURBATION * ui).collect();
                *perturbations += 1;
                match obj.oracle(&shifted) {
                    Ok(g) => {
                        warn!("iterate {k}: oracle kink resolved by perturbation (attempt {attempt})");
                        return Ok(g);
                    }
                    Err(e) if e.is_kink() => continue,
                    Err(e) => return Err(e),
                }
            }
            Err(Error::Optimization(format!("oracle kept hitting kinks at iterate {k} after {MAX_KINK_RETRIES} retries: {e}")))
        }
        other => other,
    }
}

/// Projected subgradient iteration `theta_{k+1} = proj(theta_k - eta_k g_k)`.
/// Kink perturbations draw from a fixed stream; see [`run_seeded`].
pub fn run(obj: &dyn Objective, set: &FeasibleSet, sched: StepSchedule, theta0: &[f64], iters: usize) -> Result<RunTrace> {
    run_seeded(obj, set, sched, theta0, iters, 0)
}

pub fn run_seeded(
    obj: &dyn Objective,
    set: &FeasibleSet,
    sched: StepSchedule,
    theta0: &[f64],
    iters: usize,
    seed: u64,
) -> Result<RunTrace> {
    set.validate()?;
    sched.validate()?;
    if theta0.len() != obj.dim() || theta0.len() != set.dim() {
        return Err(Error::Shape(format!(
            "theta0 has length {} but the objective has dimension {} and the set {}",
            theta0.len(),
            obj.dim(),
            set.dim()
        )));
    }
    if !set.contains(theta0, 1e-12) {
        return Err(Error::Domain("theta0 is not feasible".into()));
    }
    let mut theta = theta0.to_vec();
    let mut rows = Vec::with_capacity(iters + 1);
    let mut perturbations = 0;
    for k in 0..=iters {
        let g = robust_oracle(obj, &theta, seed, k, &mut perturbations)?;
        if !g.is_finite() {
            return Err(Error::Optimization(format!("non-finite subgradient at iterate {k}")));
        }
        let value = obj.value(&theta)?;
        let residual = stationarity_residual(&g, set, &theta)?;
        rows.push(TraceRow { k, theta: theta.clone(), value, residual });
        if k < iters {
            let eta = sched.step(k);
            let w: Vec<f64> = theta.iter().zip(g.iter()).map(|(t, gi)| t - eta * gi).collect();
            theta = set.project(&w)?;
        }
    }
    Ok(RunTrace { rows, status: RunStatus::Completed, perturbations })
}
