//! Wasserstein-1 distances: exact 1D formulas, an exact transportation
//! simplex, log-domain Sinkhorn, and the fiber-constrained distance `W^μ̌`.

mod one_d;
mod simplex;
mod sinkhorn;
mod vertical;

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::Metric;
use crate::measures::EmpiricalMeasure;

pub use one_d::{wasserstein_1d, wasserstein_1d_values, LineMetric};
pub use simplex::{transport_simplex, SimplexSolution, EXACT_MAX_ATOMS};
pub use sinkhorn::{sinkhorn, SinkhornOptions, SinkhornSolution};
pub use vertical::{vertical_wasserstein, FiberBinning, VerticalOptions, VerticalReport, FIBER_TOL};

/// A transport plan stored as `(row, column, mass)` triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pub n_rows: usize,
    pub n_cols: usize,
    pub plan: Vec<(usize, usize, f64)>,
    pub cost: f64,
}

impl Coupling {
    pub fn row_sums(&self) -> Vec<f64> {
        let mut s = alloc::vec![0.0; self.n_rows];
        for &(i, _, m) in &self.plan {
            s[i] += m;
        }
        s
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = alloc::vec![0.0; self.n_cols];
        for &(_, j, m) in &self.plan {
            s[j] += m;
        }
        s
    }

    /// Largest deviation of the plan marginals from the given weights.
    pub fn marginal_error(&self, a: &[f64], b: &[f64]) -> f64 {
        let r = self.row_sums().iter().zip(a).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let c = self.col_sums().iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        r.max(c)
    }

    /// `∑ plan[i][j]·cost(i, j)`.
    pub fn evaluate(&self, cost: impl Fn(usize, usize) -> f64) -> f64 {
        crate::math::sum(self.plan.iter().map(|&(i, j, m)| m * cost(i, j)))
    }
}

/// Solver choice for [`wasserstein_discrete`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Exact,
    Sinkhorn(SinkhornOptions),
}

/// Details reported alongside the distance.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportInfo {
    /// Final regularization (Sinkhorn only).
    pub epsilon: Option<f64>,
    /// Largest marginal violation of the returned plan.
    pub marginal_violation: f64,
    pub iterations: usize,
}

/// `W₁(μ, ν)` between two atom measures under `metric`.
pub fn wasserstein_discrete(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    metric: &Metric,
    method: Method,
) -> Result<(f64, Coupling, TransportInfo)> {
    let (p, q) = (mu.points(), nu.points());
    let cost = |i: usize, j: usize| metric.distance(&p[i], &q[j]);
    match method {
        Method::Exact => {
            if p.len() > EXACT_MAX_ATOMS || q.len() > EXACT_MAX_ATOMS {
                return Err(Error::Argument(format!(
                    "exact solver supports at most {EXACT_MAX_ATOMS} atoms per side, got {} and {}",
                    p.len(),
                    q.len()
                )));
            }
            let sol = transport_simplex(mu.weights(), nu.weights(), cost)?;
            let violation = sol.coupling.marginal_error(mu.weights(), nu.weights());
            Ok((sol.coupling.cost, sol.coupling, TransportInfo { epsilon: None, marginal_violation: violation, iterations: sol.pivots }))
        }
        Method::Sinkhorn(opts) => {
            let sol = sinkhorn(mu.weights(), nu.weights(), cost, &opts)?;
            Ok((
                sol.coupling.cost,
                sol.coupling,
                TransportInfo { epsilon: Some(sol.epsilon), marginal_violation: sol.marginal_violation, iterations: sol.iterations },
            ))
        }
    }
}

/// Exact `W₁` distance only.
pub fn wasserstein_exact(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, metric: &Metric) -> Result<f64> {
    wasserstein_discrete(mu, nu, metric, Method::Exact).map(|r| r.0)
}
