//! Lifting base invariant measures: iterate `T_*` from a section until the
//! iterates are Cauchy in the vertical Wasserstein distance.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::decay::{fit_decay, DecayFit};
use crate::error::{Error, Result};
use crate::geometry::{Point, MAX_FIBER_DIM};
use crate::measures::{EmpiricalMeasure, Space};
use crate::systems::FiberedSystem;
use crate::transport::{
    vertical_wasserstein, wasserstein_1d, wasserstein_discrete, FiberBinning, LineMetric, Method, VerticalOptions,
    EXACT_MAX_ATOMS,
};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftOptions {
    pub tol: f64,
    pub n_max: usize,
    pub binning: FiberBinning,
    pub marginal_tol: f64,
    /// Rebalance base masses cell-wise (for Monte Carlo clouds).
    pub rebalance: bool,
    /// Keep every intermediate measure.
    pub retain_trace: bool,
}

impl Default for LiftOptions {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            n_max: 100,
            binning: FiberBinning::Auto,
            marginal_tol: 1e-9,
            rebalance: false,
            retain_trace: false,
        }
    }
}

impl LiftOptions {
    fn vertical(&self) -> VerticalOptions {
        VerticalOptions { binning: self.binning, marginal_tol: self.marginal_tol, rebalance: self.rebalance }
    }
}

#[derive(Debug, Clone)]
pub struct LiftResult {
    pub lifted: EmpiricalMeasure,
    /// Number of push-forwards applied to `σ_*μ̌`.
    pub iterations: usize,
    pub converged: bool,
    /// `(n, W^μ̌(νₙ, νₙ₊₁))`.
    pub cauchy_trace: Vec<(usize, f64)>,
    pub fitted_rate: DecayFit,
    /// `W(S_*μ̌, μ̌)` on the circle.
    pub invariance_defect: f64,
    pub non_shrinking: bool,
    /// `ν₀ … ν_iterations` when trace retention is on.
    pub retained: Vec<EmpiricalMeasure>,
}

/// Lifts `base_mu` through the system's own section.
pub fn lift_measure(sys: &FiberedSystem, base_mu: &EmpiricalMeasure, opts: &LiftOptions) -> Result<LiftResult> {
    let s = sys.section_fn();
    lift_from(sys, base_mu, &*s, opts)
}

/// Lifts `base_mu` starting from `ν₀ = σ_*μ̌` for the section `y ↦ (y, s(y))`.
pub fn lift_from(
    sys: &FiberedSystem,
    base_mu: &EmpiricalMeasure,
    section: &(dyn Fn(f64) -> [f64; MAX_FIBER_DIM] + Send + Sync),
    opts: &LiftOptions,
) -> Result<LiftResult> {
    if base_mu.space() != Space::Base {
        return Err(Error::Argument("lifting needs a measure on the base".into()));
    }
    let defect = wasserstein_1d(&base_mu.push_s(sys), base_mu, LineMetric::Circle)?;
    let metric = sys.metric();
    let vopts = opts.vertical();
    let mut nu = base_mu.lift_by(|y| Point { y, z: section(y) });
    nu.validate_in(sys)?;
    let mut retained = Vec::new();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut n = 0usize;
    while n < opts.n_max {
        let next = nu.push_t(sys)?;
        let d = vertical_wasserstein(&nu, &next, &metric, &vopts)?.distance;
        trace.push((n, d));
        if opts.retain_trace {
            retained.push(nu);
        }
        nu = next;
        n += 1;
        if d < opts.tol {
            converged = true;
            break;
        }
    }
    if opts.retain_trace {
        retained.push(nu.clone());
    }
    let pts: Vec<(f64, f64)> = trace.iter().map(|&(k, d)| (k as f64, d)).collect();
    let fitted_rate = fit_decay(&pts);
    let stalled = match (trace.first(), trace.last()) {
        (Some(a), Some(b)) => !converged && b.1 >= 0.9 * a.1,
        _ => false,
    };
    Ok(LiftResult {
        lifted: nu,
        iterations: n,
        converged,
        cauchy_trace: trace,
        fitted_rate,
        invariance_defect: defect,
        non_shrinking: fitted_rate.is_non_decaying() || stalled,
        retained,
    })
}

/// Pushes `nu` forward `n` times.
pub fn iterate_measure(sys: &FiberedSystem, nu: &EmpiricalMeasure, n: usize) -> Result<EmpiricalMeasure> {
    let mut cur = nu.clone();
    for _ in 0..n {
        cur = cur.push_t(sys)?;
    }
    Ok(cur)
}

pub type Section = Arc<dyn Fn(f64) -> [f64; MAX_FIBER_DIM] + Send + Sync>;

#[derive(Debug, Clone)]
pub struct UniquenessReport {
    /// Common number of push-forwards applied from every section.
    pub iterations: usize,
    /// Whether each run met `tol` on its own.
    pub converged: Vec<bool>,
    /// `(i, j, W^μ̌)` between final iterates; an upper bound on `W`.
    pub pairwise: Vec<(usize, usize, f64)>,
    pub max_distance: f64,
    pub pass: bool,
}

/// Runs the lift from several sections for the same number of steps and
/// compares the final iterates. Passes when all pairwise distances are below `3·tol`.
pub fn check_lift_uniqueness(
    sys: &FiberedSystem,
    base_mu: &EmpiricalMeasure,
    sections: &[Section],
    opts: &LiftOptions,
) -> Result<UniquenessReport> {
    if sections.len() < 2 {
        return Err(Error::Argument("uniqueness check needs at least two sections".into()));
    }
    let quiet = LiftOptions { retain_trace: false, ..*opts };
    let runs = par::map_range(sections.len(), |i| lift_from(sys, base_mu, &*sections[i], &quiet));
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let steps = runs.iter().map(|r| r.iterations).max().unwrap_or(0);
    let finals = par::map_range(runs.len(), |i| iterate_measure(sys, &runs[i].lifted, steps - runs[i].iterations));
    let finals = finals.into_iter().collect::<Result<Vec<_>>>()?;
    let metric = sys.metric();
    let vopts = quiet.vertical();
    let mut pairwise = Vec::new();
    for i in 0..finals.len() {
        for j in i + 1..finals.len() {
            let d = vertical_wasserstein(&finals[i], &finals[j], &metric, &vopts)?.distance;
            pairwise.push((i, j, d));
        }
    }
    let max_distance = pairwise.iter().map(|p| p.2).fold(0.0, f64::max);
    Ok(UniquenessReport {
        iterations: steps,
        converged: runs.iter().map(|r| r.converged).collect(),
        pairwise,
        max_distance,
        pass: max_distance < 3.0 * opts.tol,
    })
}

#[derive(Debug, Clone)]
pub struct StableLeafReport {
    /// `(n, W(Tⁿ_*ν, lifted))` with the exact solver.
    pub distances: Vec<(usize, f64)>,
    pub fit: DecayFit,
}

/// Full (unconstrained) Wasserstein distance from `Tⁿ_*ν` to the lifted measure.
pub fn stable_leaf_experiment(
    sys: &FiberedSystem,
    nu: &EmpiricalMeasure,
    reference: &LiftResult,
    n_max: usize,
) -> Result<StableLeafReport> {
    if !reference.converged {
        return Err(Error::Argument("reference lift did not converge".into()));
    }
    if nu.len() > EXACT_MAX_ATOMS || reference.lifted.len() > EXACT_MAX_ATOMS {
        return Err(Error::Argument("stable-leaf experiment needs at most 5000 atoms per measure".into()));
    }
    let metric = sys.metric();
    let mut cur = nu.clone();
    let mut measures = Vec::with_capacity(n_max + 1);
    for _ in 0..=n_max {
        let next = cur.push_t(sys)?;
        measures.push(cur);
        cur = next;
    }
    let dist = par::map_range(measures.len(), |n| {
        wasserstein_discrete(&measures[n], &reference.lifted, &metric, Method::Exact).map(|r| r.0)
    });
    let distances = dist.into_iter().enumerate().map(|(n, d)| d.map(|d| (n, d))).collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = distances.iter().map(|&(n, d)| (n as f64, d)).collect();
    Ok(StableLeafReport { fit: fit_decay(&pts), distances })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{make_skew_product, zoo, IdentityBase};
    use crate::geometry::FiberDomain;

    #[test]
    fn dirac_at_fixed_point_lifts_to_fixed_point() {
        let sys = make_skew_product(
            "contract",
            Arc::new(IdentityBase),
            |_, z| [0.5 * z[0] + 0.25, 0.0],
            FiberDomain::Interval { lo: -1.0, hi: 1.0 },
        )
        .unwrap();
        let base = EmpiricalMeasure::dirac(Point::base(0.3), Space::Base);
        let r = lift_measure(&sys, &base, &LiftOptions { tol: 1e-10, ..Default::default() }).unwrap();
        assert!(r.converged);
        assert!((r.lifted.points()[0].z[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn identity_fiber_does_not_converge() {
        let sys = zoo::identity_fiber().with_section(|y| [if y < 0.5 { -1.0 } else { 1.0 }, 0.0]);
        let base = EmpiricalMeasure::base_grid(101).unwrap();
        let r = lift_measure(&sys, &base, &LiftOptions { n_max: 20, ..Default::default() }).unwrap();
        assert!(!r.converged);
        assert!(r.non_shrinking);
    }
}
