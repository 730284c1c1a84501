//! Log-domain Sinkhorn iterations with an ε-scaling schedule.

use alloc::vec::Vec;

use super::Coupling;
use crate::error::{Error, Result};
use crate::math::{self, exp, ln};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornOptions {
    /// Final regularization strength.
    pub epsilon: f64,
    /// Target L¹ marginal violation at the final ε.
    pub tol: f64,
    /// Iteration budget summed over all stages.
    pub max_iter: usize,
    /// Ratio between consecutive ε in the schedule.
    pub scaling: f64,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        Self { epsilon: 1e-4, tol: 1e-9, max_iter: 200_000, scaling: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornSolution {
    /// Transport cost `⟨π, C⟩` of the regularized plan (an upper bound on the exact cost).
    pub coupling: Coupling,
    pub epsilon: f64,
    pub marginal_violation: f64,
    pub iterations: usize,
}

fn logsumexp(vals: impl Iterator<Item = f64> + Clone) -> f64 {
    let mx = vals.clone().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + ln(math::sum(vals.map(|v| exp(v - mx))))
}

/// Entropic transport between `a` and `b` with ground cost `cost`.
pub fn sinkhorn<C: Fn(usize, usize) -> f64>(a: &[f64], b: &[f64], cost: C, opts: &SinkhornOptions) -> Result<SinkhornSolution> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return Err(Error::Argument("empty marginal".into()));
    }
    if !(opts.epsilon > 0.0) || !(opts.scaling > 0.0 && opts.scaling < 1.0) {
        return Err(Error::Argument("epsilon must be positive and scaling in (0, 1)".into()));
    }
    let sa = math::sum(a.iter().copied());
    let sb = math::sum(b.iter().copied());
    let la: Vec<f64> = a.iter().map(|w| ln(w / sa)).collect();
    let lb: Vec<f64> = b.iter().map(|w| ln(w / sb)).collect();
    let c: Vec<f64> = (0..n * m).map(|k| cost(k / m, k % m)).collect();
    let cmax = c.iter().copied().fold(0.0, f64::max).max(opts.epsilon);

    let mut f = alloc::vec![0.0; n];
    let mut g = alloc::vec![0.0; m];
    let mut eps = cmax;
    let mut iterations = 0usize;
    let mut violation;
    loop {
        let last = eps <= opts.epsilon;
        let stage_tol = if last { opts.tol } else { (opts.tol * 100.0).max(1e-6) };
        loop {
            for i in 0..n {
                let row = &c[i * m..(i + 1) * m];
                f[i] = -eps * logsumexp((0..m).map(|j| (g[j] - row[j]) / eps + lb[j]));
            }
            for j in 0..m {
                g[j] = -eps * logsumexp((0..n).map(|i| (f[i] - c[i * m + j]) / eps + la[i]));
            }
            iterations += 1;
            // columns are exact after the g update; measure the row violation
            violation = 0.0;
            for i in 0..n {
                let row = &c[i * m..(i + 1) * m];
                let s = math::sum((0..m).map(|j| exp((f[i] + g[j] - row[j]) / eps + la[i] + lb[j])));
                violation += (s - exp(la[i])).abs();
            }
            if violation < stage_tol {
                break;
            }
            if iterations >= opts.max_iter {
                return Err(Error::Convergence { method: "sinkhorn", residual: violation, iterations });
            }
        }
        if last {
            break;
        }
        eps = (eps * opts.scaling).max(opts.epsilon);
    }
    let mut plan = Vec::new();
    for i in 0..n {
        for j in 0..m {
            let x = exp((f[i] + g[j] - c[i * m + j]) / eps + la[i] + lb[j]);
            if x > 0.0 {
                plan.push((i, j, x * sa));
            }
        }
    }
    let cost_total = math::sum(plan.iter().map(|&(i, j, x)| x * c[i * m + j]));
    Ok(SinkhornSolution {
        coupling: Coupling { n_rows: n, n_cols: m, plan, cost: cost_total },
        epsilon: eps,
        marginal_violation: violation,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_simple_exact_cost() {
        let xs: [f64; 2] = [0.0, 0.5];
        let ys = [0.5, 1.0];
        let sol = sinkhorn(&[0.5, 0.5], &[0.5, 0.5], |i, j| (xs[i] - ys[j]).abs(), &SinkhornOptions::default()).unwrap();
        assert!((sol.coupling.cost - 0.5).abs() < 1e-3);
        assert!(sol.marginal_violation < 1e-9);
    }

    #[test]
    fn budget_exhaustion_is_an_error() {
        let opts = SinkhornOptions { epsilon: 1e-6, tol: 1e-15, max_iter: 3, scaling: 0.5 };
        let r = sinkhorn(&[0.3, 0.7], &[0.6, 0.4], |i, j| (i as f64 - j as f64).abs() + 0.1, &opts);
        assert!(matches!(r, Err(Error::Convergence { .. })));
    }
}
