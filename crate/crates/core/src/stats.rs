//! Correlation estimates, Green-Kubo variances and CLT diagnostics.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

pub use crate::decay::fit_decay;
use crate::decay::DecayFit;
use crate::error::{param, Error, Result};
use crate::geometry::Point;
use crate::math::{self, abs, erf, sqrt};
use crate::measures::EmpiricalMeasure;
use crate::orbit::{checked_orbit, OrbitStart, Trajectory};
use crate::rng::{self, Rng};
use crate::systems::{FiberedSystem, ShrinkEstimate};
use crate::thermo::Potential;
use crate::transfer::{build_ulam, disintegration_via_transfer, invariant_density, sample_grid, Construction, SpectralReport, UlamOperator};
use crate::par;

/// Observables on `X`.
pub type Obs<'a> = &'a (dyn Fn(&Point) -> f64 + Sync);

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    /// Time averages along one orbit after a burn-in.
    OrbitAverage { orbit_len: usize, burn_in: usize, seed: u64 },
    /// Ulam matrix powers on the base, weighted by the invariant density.
    OperatorPowers { cells: usize },
    /// Exact sums over the atoms of a measure.
    Atoms { atoms: usize },
}

/// `Corr_n(f, g) = |∫ f∘Tⁿ·g dμ − ∫f dμ ∫g dμ|` for `n = 0..=n_max`.
#[derive(Debug, Clone)]
pub struct CorrelationTrace {
    /// `(n, Corr_n)`.
    pub values: Vec<(usize, f64)>,
    /// Signed covariances.
    pub covariances: Vec<f64>,
    /// Batch-means standard errors (zero for deterministic estimators).
    pub std_errors: Vec<f64>,
    pub estimator: Estimator,
    pub fit: DecayFit,
    pub mean_f: f64,
    pub mean_g: f64,
}

impl CorrelationTrace {
    fn from_covariances(covariances: Vec<f64>, std_errors: Vec<f64>, estimator: Estimator, mean_f: f64, mean_g: f64) -> Self {
        let values: Vec<(usize, f64)> = covariances.iter().enumerate().map(|(n, c)| (n, abs(*c))).collect();
        let pts: Vec<(f64, f64)> = values.iter().map(|&(n, v)| (n as f64, v)).collect();
        Self { fit: fit_decay(&pts), values, covariances, std_errors, estimator, mean_f, mean_g }
    }

    pub fn corr(&self, n: usize) -> f64 {
        self.values[n].1
    }
}

pub const BURN_IN: usize = 1000;
const BATCHES: usize = 50;

/// Orbit estimator: one orbit of `orbit_len + n_max` points after `BURN_IN`
/// steps from a random start. Standard errors come from 50 batch means.
pub fn correlations(sys: &FiberedSystem, f: Obs, g: Obs, n_max: usize, orbit_len: usize, seed: u64) -> Result<CorrelationTrace> {
    if orbit_len < BATCHES * 2 {
        return Err(param("orbit_len", "orbit too short for batch means"));
    }
    let pts = checked_orbit(sys, OrbitStart::Random { seed }, BURN_IN, orbit_len + n_max)?;
    let fv: Vec<f64> = pts.iter().map(f).collect();
    let gv: Vec<f64> = pts.iter().map(g).collect();
    drop(pts);
    let m = orbit_len;
    let mean_g = math::mean(&gv[..m]);
    let mean_f = math::mean(&fv[..m]);
    let batch = m / BATCHES;
    let per_lag = par::map_range(n_max + 1, |n| {
        let mf = math::mean(&fv[n..n + m]);
        let cov = math::sum((0..m).map(|k| fv[k + n] * gv[k])) / m as f64 - mf * mean_g;
        let bs: Vec<f64> = (0..BATCHES)
            .map(|b| {
                let r = b * batch..(b + 1) * batch;
                math::sum(r.map(|k| (fv[k + n] - mf) * (gv[k] - mean_g))) / batch as f64
            })
            .collect();
        let bm = math::mean(&bs);
        let var = math::sum(bs.iter().map(|x| (x - bm) * (x - bm))) / (BATCHES - 1) as f64;
        (cov, sqrt(var / BATCHES as f64))
    });
    let (cov, se): (Vec<f64>, Vec<f64>) = per_lag.into_iter().unzip();
    Ok(CorrelationTrace::from_covariances(cov, se, Estimator::OrbitAverage { orbit_len, burn_in: BURN_IN, seed }, mean_f, mean_g))
}

/// Operator estimator on the base: `∫ u∘Sⁿ·v dμ̌ = ∫ u·Ľⁿv dμ̌` with grid
/// observables and `μ̌` the Ulam invariant density.
pub fn correlations_operator(op: &UlamOperator, spectral: &SpectralReport, u: &[f64], v: &[f64], n_max: usize) -> Result<CorrelationTrace> {
    let m = op.n_cells();
    if u.len() != m || v.len() != m {
        return Err(Error::Argument(format!("grid observables must have {m} values")));
    }
    let h = spectral.density();
    let w = spectral.invariant_density.masses();
    let mu = math::sum(u.iter().zip(w).map(|(a, b)| a * b));
    let mv = math::sum(v.iter().zip(w).map(|(a, b)| a * b));
    let mut lv = v.to_vec();
    let mut cov = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        if n > 0 {
            lv = op.transfer_wrt(&h, &lv);
        }
        cov.push(math::sum(u.iter().zip(&lv).zip(w).map(|((a, b), c)| a * b * c)) - mu * mv);
    }
    Ok(CorrelationTrace::from_covariances(cov, vec![0.0; n_max + 1], Estimator::OperatorPowers { cells: m }, mu, mv))
}

/// Exact correlations of an atom measure: `∑ wᵢ f(Tⁿxᵢ) g(xᵢ) − μ(f)μ(g)`.
pub fn correlations_measure(sys: &FiberedSystem, mu: &EmpiricalMeasure, f: Obs, g: Obs, n_max: usize) -> Result<CorrelationTrace> {
    let w = mu.weights();
    let gv: Vec<f64> = mu.points().iter().map(g).collect();
    let mean_g = math::sum(gv.iter().zip(w).map(|(a, b)| a * b));
    let mean_f = mu.integrate(f);
    let mut cur = mu.clone();
    let mut cov = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        if n > 0 {
            cur = cur.push_t(sys)?;
        }
        cov.push(math::sum(cur.points().iter().zip(&gv).zip(w).map(|((p, gi), wi)| wi * f(p) * gi)) - mean_f * mean_g);
    }
    Ok(CorrelationTrace::from_covariances(cov, vec![0.0; n_max + 1], Estimator::Atoms { atoms: mu.len() }, mean_f, mean_g))
}

/// `σ² = C₀ + 2∑_{n≥1} C_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenKubo {
    pub sigma2: f64,
    pub sigma: f64,
    /// Lags included in the sum (`C₁ … C_terms`).
    pub terms: usize,
    pub noise_floor: f64,
    /// `|2∑ C_n|` over the next 10 lags after truncation.
    pub extension_change: f64,
}

/// Sums autocovariances until three consecutive terms fall below the noise
/// floor, taken as three times the median standard error.
pub fn green_kubo(trace: &CorrelationTrace) -> GreenKubo {
    let c = &trace.covariances;
    let floor = if trace.std_errors.len() > 1 { 3.0 * math::median(&trace.std_errors[1..]) } else { 0.0 };
    let floor = floor.max(1e-15 * abs(c[0]));
    let mut stop = c.len();
    for n in 1..c.len() {
        if (n..(n + 3).min(c.len())).all(|k| abs(c[k]) < floor) && n + 3 <= c.len() {
            stop = n;
            break;
        }
    }
    let sigma2 = c[0] + 2.0 * math::sum(c[1..stop].iter().copied());
    let extension_change = 2.0 * abs(math::sum(c[stop.min(c.len())..(stop + 10).min(c.len())].iter().copied()));
    GreenKubo { sigma2, sigma: sqrt(sigma2.max(0.0)), terms: stop - 1, noise_floor: floor, extension_change }
}

/// One `(k, m)` instance of `Corr_{k+m}^μ(f, g) ≤ Corr_m^μ̌(ξ(f∘Tᵏ), ξ(g)) + Hol(f)·ω(a_k)·‖g‖_{L¹(μ)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftBoundRow {
    pub k: usize,
    pub m: usize,
    pub lhs: f64,
    pub lhs_se: f64,
    pub base_corr: f64,
    pub shrink_term: f64,
    pub rhs: f64,
    /// Error proxy of the right side from the disintegration estimates.
    pub rhs_err: f64,
    pub slack: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftBoundOptions {
    pub orbit_len: usize,
    pub seed: u64,
    /// Ulam cells for the base correlations.
    pub cells: usize,
    /// Depth of the transfer-operator limit for `ξ`.
    pub xi_depth: usize,
}

impl Default for LiftBoundOptions {
    fn default() -> Self {
        Self { orbit_len: 1_000_000, seed: 0, cells: 4096, xi_depth: 8 }
    }
}

/// Evaluates both sides of the correlation-lifting inequality for each pair,
/// with one orbit shared by all left-hand sides. Passes when the slack is at
/// least `−3×(lhs_se + rhs_err)`.
pub fn correlation_lift_bound_check(
    sys: &FiberedSystem,
    f: &Potential,
    g: Obs,
    shrink: &ShrinkEstimate,
    pairs: &[(usize, usize)],
    opts: &LiftBoundOptions,
) -> Result<Vec<LiftBoundRow>> {
    let n_max = pairs.iter().map(|&(k, m)| k + m).max().unwrap_or(0);
    let k_max = pairs.iter().map(|p| p.0).max().unwrap_or(0);
    let m_max = pairs.iter().map(|p| p.1).max().unwrap_or(0);
    let fo = |x: &Point| f.eval(x);
    let lhs = correlations(sys, &fo, g, n_max, opts.orbit_len, opts.seed)?;
    let g_l1 = {
        let pts = checked_orbit(sys, OrbitStart::Random { seed: opts.seed }, BURN_IN, opts.orbit_len)?;
        math::mean(&pts.iter().map(|p| abs(g(p))).collect::<Vec<_>>())
    };
    let op = build_ulam(&**sys.base(), opts.cells, Construction::ExactBranches)?;
    let spectral = invariant_density(&op, 1e-12)?;
    let xi_g = disintegration_via_transfer(sys, &op, &spectral, g, opts.xi_depth)?;
    let mut xi_fk = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        if pairs.iter().any(|p| p.0 == k) {
            let fk = |x: &Point| f.eval(&sys.iterate(x, k));
            xi_fk.push(Some(disintegration_via_transfer(sys, &op, &spectral, &fk, opts.xi_depth)?));
        } else {
            xi_fk.push(None);
        }
    }
    let l1 = |v: &[f64]| math::sum(v.iter().zip(spectral.invariant_density.masses()).map(|(a, b)| abs(*a) * b));
    let mut rows = Vec::with_capacity(pairs.len());
    for &(k, m) in pairs {
        let u = xi_fk[k].as_ref().expect("computed above");
        let base = correlations_operator(&op, &spectral, &u.values, &xi_g.values, m_max)?;
        let a_k = shrink.a.get(k).copied().or_else(|| shrink.fit.predict(k as f64)).unwrap_or(f64::INFINITY);
        let shrink_term = f.hol_constant * f.modulus.eval(a_k) * g_l1;
        let base_corr = base.corr(m);
        let rhs = base_corr + shrink_term;
        let rhs_err = u.error_proxy() * l1(&xi_g.values) + xi_g.error_proxy() * l1(&u.values);
        let (l, se) = (lhs.corr(k + m), lhs.std_errors[k + m]);
        let slack = rhs - l;
        rows.push(LiftBoundRow {
            k,
            m,
            lhs: l,
            lhs_se: se,
            base_corr,
            shrink_term,
            rhs,
            rhs_err,
            slack,
            pass: slack >= -3.0 * (se + rhs_err),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CltOptions {
    pub n_block: usize,
    pub samples: usize,
    pub seed: u64,
    /// Orbit length and number of lags for the Green-Kubo variance.
    pub gk_orbit: usize,
    pub gk_lags: usize,
}

impl Default for CltOptions {
    fn default() -> Self {
        Self { n_block: 10_000, samples: 1000, seed: 0, gk_orbit: 1_000_000, gk_lags: 60 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CltReport {
    pub n_block: usize,
    pub samples: usize,
    /// Kolmogorov-Smirnov distance to `N(0, σ²_GK)`; 1 when degenerate.
    pub ks_statistic: f64,
    pub fitted_mean: f64,
    pub fitted_sigma: f64,
    pub green_kubo_sigma: f64,
    pub green_kubo: GreenKubo,
    /// `σ_GK` is zero within noise, so the CLT clause does not apply.
    pub degenerate: bool,
    pub block_sums: Vec<f64>,
}

/// `sup |F_n − Φ_σ|` for the sample.
pub fn ks_gaussian(sample: &[f64], mean: f64, sigma: f64) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in s.iter().enumerate() {
        let cdf = 0.5 * (1.0 + erf((x - mean) / (sigma * core::f64::consts::SQRT_2)));
        d = d.max((i + 1) as f64 / n - cdf).max(cdf - i as f64 / n);
    }
    d
}

/// Draws start points from `mu`, forms `n^{-1/2}∑_{k<n}(f(xₖ) − μ(f))` and
/// compares the sample with the Gaussian of Green-Kubo variance.
pub fn clt_diagnostic(sys: &FiberedSystem, mu: &EmpiricalMeasure, f: Obs, opts: &CltOptions) -> Result<CltReport> {
    if opts.n_block < 100 || opts.samples < 100 {
        return Err(param("n_block", "block length and sample count must be at least 100"));
    }
    let trace = correlations(sys, f, f, opts.gk_lags, opts.gk_orbit, rng::key(opts.seed, u64::MAX, 0))?;
    let gk = green_kubo(&trace);
    let center = mu.integrate(f);
    let cum: Vec<f64> = mu
        .weights()
        .iter()
        .scan(0.0, |s, w| {
            *s += w;
            Some(*s)
        })
        .collect();
    let total = *cum.last().unwrap_or(&1.0);
    let sums = par::map_range(opts.samples, |s| {
        let mut r = rng::stream(opts.seed, s as u64, 0);
        let u = r.gen::<f64>() * total;
        let idx = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
        let start = OrbitStart::Extended { point: mu.points()[idx], seed: rng::key(opts.seed, s as u64, 1) };
        let acc = math::sum(Trajectory::new(sys, start).take(opts.n_block).map(|p| f(&p) - center));
        acc / sqrt(opts.n_block as f64)
    });
    let fitted_mean = math::mean(&sums);
    let var = math::sum(sums.iter().map(|x| (x - fitted_mean) * (x - fitted_mean))) / (sums.len() - 1) as f64;
    let degenerate = !(gk.sigma2 > gk.noise_floor.max(1e-12));
    let ks = if degenerate { 1.0 } else { ks_gaussian(&sums, 0.0, gk.sigma) };
    Ok(CltReport {
        n_block: opts.n_block,
        samples: opts.samples,
        ks_statistic: ks,
        fitted_mean,
        fitted_sigma: sqrt(var),
        green_kubo_sigma: if degenerate { 0.0 } else { gk.sigma },
        green_kubo: gk,
        degenerate,
        block_sums: sums,
    })
}

/// Grid samples of a base observable, for the operator estimator.
pub fn grid_observable(m: usize, u: impl Fn(f64) -> f64) -> Vec<f64> {
    sample_grid(m, u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::zoo;

    #[test]
    fn constant_has_zero_correlations() {
        let sys = zoo::doubling();
        let t = correlations(&sys, &|_| 3.0, &|p| p.y, 5, 10_000, 1).unwrap();
        assert!(t.values.iter().all(|v| v.1 < 1e-12));
    }

    #[test]
    fn ks_of_exact_quantiles_is_small() {
        let n = 1000;
        // midpoints of equal-probability bins of N(0, 1) via bisection on erf
        let q: Vec<f64> = (0..n)
            .map(|i| {
                let p = (i as f64 + 0.5) / n as f64;
                let (mut lo, mut hi) = (-10.0, 10.0);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if 0.5 * (1.0 + erf(mid / core::f64::consts::SQRT_2)) < p {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                lo
            })
            .collect();
        assert!(ks_gaussian(&q, 0.0, 1.0) <= 0.5 / n as f64 + 1e-9);
        assert!(ks_gaussian(&q, 0.0, 2.0) > 0.1);
    }

    #[test]
    fn green_kubo_geometric() {
        let c: Vec<f64> = (0..40).map(|n| math::pow(0.5, n as f64) / 12.0).collect();
        let se = vec![1e-7; 40];
        let t = CorrelationTrace::from_covariances(c, se, Estimator::Atoms { atoms: 0 }, 0.5, 0.5);
        let gk = green_kubo(&t);
        assert!((gk.sigma2 - 0.25).abs() < 1e-5, "{gk:?}");
    }
}
