//! Exact optimal transport between uniform empirical measures on the line.
//!
//! For equal sizes the optimal coupling pairs order statistics by rank. For
//! sizes `n != m` both quantile functions are constant between consecutive
//! points of the merged grid `{k/n} ∪ {l/m}`, which gives the closed form
//! `sum_k |u_(ceil(n h_k)) - v_(ceil(m h_k))|^q (h_k - h_{k-1})` and the
//! explicit monotone plan built from the same grid.
//!
//! All costs are reported as `W_q^q`, never as `W_q`.

use itertools::Itertools;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::EmpiricalMeasure1D;

/// A grid point stored as the exact fraction `num / den`, where `den` is
/// one of the two sample sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Breakpoint {
    pub num: u64,
    pub den: u64,
}

impl Breakpoint {
    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `ceil(size * num / den)` in integer arithmetic.
    pub fn rank(self, size: usize) -> usize {
        let p = size as u64 * self.num;
        p.div_ceil(self.den) as usize
    }
}

/// Merged breakpoints of `{k/n}_{k=0..n}` and `{l/m}_{l=0..m}` with the
/// shared endpoints 0 and 1 kept once. Coincident interior points are kept
/// twice and produce zero increments.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementGrid {
    n: usize,
    m: usize,
    breakpoints: Vec<Breakpoint>,
    increments: Vec<f64>,
}

impl RefinementGrid {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::Parameter(format!("grid sizes must be positive, got ({n}, {m})")));
        }
        let (nu, mu) = (n as u64, m as u64);
        let mut breakpoints = Vec::with_capacity(n + m);
        breakpoints.push(Breakpoint { num: 0, den: nu });
        let (mut k, mut l) = (1u64, 1u64);
        while k < nu || l < mu {
            // k/n <= l/m  <=>  k*m <= l*n
            if l >= mu || (k < nu && k * mu <= l * nu) {
                breakpoints.push(Breakpoint { num: k, den: nu });
                k += 1;
            } else {
                breakpoints.push(Breakpoint { num: l, den: mu });
                l += 1;
            }
        }
        breakpoints.push(Breakpoint { num: nu, den: nu });
        let increments = breakpoints
            .windows(2)
            .map(|w| {
                let (a, b) = (w[1], w[0]);
                let diff = a.num * b.den - b.num * a.den;
                diff as f64 / (a.den * b.den) as f64
            })
            .collect();
        Ok(Self { n, m, breakpoints, increments })
    }

    pub fn sizes(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    pub fn breakpoints(&self) -> &[Breakpoint] {
        &self.breakpoints
    }

    pub fn breakpoint_values(&self) -> Vec<f64> {
        self.breakpoints.iter().map(|b| b.value()).collect()
    }

    /// `increments()[k - 1] = h_k - h_{k-1}`.
    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// Cells `(rank_u, rank_v, Δ)` with positive length, 1-based ranks,
    /// in increasing order of `h`.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.breakpoints[1..]
            .iter()
            .zip(&self.increments)
            .filter(|(_, &delta)| delta > 0.0)
            .map(|(h, &delta)| (h.rank(self.n), h.rank(self.m), delta))
    }
}

/// Sparse coupling between `n` source and `m` target points (0-based,
/// original sample indices).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportPlan {
    pub n: usize,
    pub m: usize,
    pub entries: Vec<PlanEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanEntry {
    pub source: usize,
    pub target: usize,
    pub mass: f64,
}

impl TransportPlan {
    pub fn row_sums(&self) -> Vec<f64> {
        let mut rows = vec![0.0; self.n];
        for e in &self.entries {
            rows[e.source] += e.mass;
        }
        rows
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut cols = vec![0.0; self.m];
        for e in &self.entries {
            cols[e.target] += e.mass;
        }
        cols
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.mass).sum()
    }

    /// Largest deviation of a row or column sum from `1/n` or `1/m`.
    pub fn marginal_error(&self) -> f64 {
        let row = self.row_sums().into_iter().map(|r| (r - 1.0 / self.n as f64).abs());
        let col = self.col_sums().into_iter().map(|c| (c - 1.0 / self.m as f64).abs());
        row.chain(col).fold(0.0, f64::max)
    }

    /// `sum gamma_ij |u_i - v_j|^q` with `u`, `v` in original order.
    pub fn cost(&self, u: &[f64], v: &[f64], q: f64) -> f64 {
        self.entries.iter().map(|e| e.mass * (u[e.source] - v[e.target]).abs().powf(q)).sum()
    }

    /// Plan as CSV with columns `i,j,mass`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,mass\n");
        for e in &self.entries {
            out.push_str(&format!("{},{},{}\n", e.source, e.target, e.mass));
        }
        out
    }
}

fn check_order(q: f64) -> Result<()> {
    if !(q >= 1.0 && q.is_finite()) {
        return Err(Error::Parameter(format!("transport order q must be >= 1, got {q}")));
    }
    Ok(())
}

/// `(1/n) sum_i |u_(i) - v_(i)|^q` for equal sizes.
pub fn w_equal(u: &EmpiricalMeasure1D, v: &EmpiricalMeasure1D, q: f64) -> Result<f64> {
    check_order(q)?;
    if u.len() != v.len() {
        return Err(Error::Shape(format!("equal-size cost needs |u| = |v|, got {} and {}", u.len(), v.len())));
    }
    let weight = 1.0 / u.len() as f64;
    Ok((1..=u.len()).map(|r| (u.order_stat(r) - v.order_stat(r)).abs().powf(q) * weight).sum())
}

/// `W_q^q` between measures of arbitrary sizes via the refinement grid.
pub fn w_unequal(u: &EmpiricalMeasure1D, v: &EmpiricalMeasure1D, q: f64) -> Result<f64> {
    check_order(q)?;
    let grid = RefinementGrid::new(u.len(), v.len())?;
    Ok(grid.cells().map(|(i, j, delta)| (u.order_stat(i) - v.order_stat(j)).abs().powf(q) * delta).sum())
}

/// The monotone (quantile) coupling, expressed in original indices.
pub fn monotone_plan(u: &EmpiricalMeasure1D, v: &EmpiricalMeasure1D) -> Result<TransportPlan> {
    let grid = RefinementGrid::new(u.len(), v.len())?;
    let entries = grid
        .cells()
        .map(|(i, j, mass)| PlanEntry { source: u.sort_perm()[i - 1], target: v.sort_perm()[j - 1], mass })
        .collect();
    Ok(TransportPlan { n: u.len(), m: v.len(), entries })
}

/// Test oracle: integrates `|F_U^{-1} - F_V^{-1}|^q` over `[0, 1]` by
/// walking both step functions in floating point, without the grid code.
pub fn oracle_quantile_integral(u: &EmpiricalMeasure1D, v: &EmpiricalMeasure1D, q: f64) -> Result<f64> {
    check_order(q)?;
    let (n, m) = (u.len(), v.len());
    let (su, sv) = (u.sorted(), v.sorted());
    let (mut i, mut j) = (1usize, 1usize);
    let mut pos = 0.0;
    let mut total = 0.0;
    while i <= n && j <= m {
        let end_u = i as f64 / n as f64;
        let end_v = j as f64 / m as f64;
        let end = end_u.min(end_v);
        total += (su[i - 1] - sv[j - 1]).abs().powf(q) * (end - pos);
        pos = end;
        if end_u <= end {
            i += 1;
        }
        if end_v <= end {
            j += 1;
        }
    }
    Ok(total)
}

/// Largest size accepted by [`oracle_assignment`].
pub const MAX_ASSIGNMENT_SIZE: usize = 8;

/// Test oracle: minimum of `(1/n) sum_i |u_i - v_pi(i)|^q` over all
/// permutations.
pub fn oracle_assignment(u: &EmpiricalMeasure1D, v: &EmpiricalMeasure1D, q: f64) -> Result<f64> {
    let n = u.len();
    if n != v.len() || n > MAX_ASSIGNMENT_SIZE {
        return Err(Error::Capability(format!(
            "exhaustive assignment needs equal sizes <= {MAX_ASSIGNMENT_SIZE}, got {n} and {}",
            v.len()
        )));
    }
    let costs: Vec<Vec<f64>> =
        u.values().iter().map(|a| v.values().iter().map(|b| (a - b).abs().powf(q)).collect()).collect();
    Ok(min_assignment(&costs).0 / n as f64)
}

/// Minimum total cost of a perfect matching on a square cost matrix by
/// exhaustive enumeration, with the minimizing permutation `i -> perm[i]`.
pub(crate) fn min_assignment(costs: &[Vec<f64>]) -> (f64, Vec<usize>) {
    let n = costs.len();
    let mut best = (f64::INFINITY, (0..n).collect::<Vec<_>>());
    for perm in (0..n).permutations(n) {
        let total: f64 = perm.iter().enumerate().map(|(i, &j)| costs[i][j]).sum();
        if total < best.0 {
            best = (total, perm);
        }
    }
    best
}
