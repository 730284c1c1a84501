//! Coboundaries that make potentials constant on fibers, weighted transfer
//! operators on the base, and energy bookkeeping between `X` and `Y`.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::decay::{DecayFit, DecayModel};
use crate::error::{param, Error, Result};
use crate::geometry::Point;
use crate::math::{self, abs, exp, ln, pow};
use crate::measures::{cell_of, EmpiricalMeasure, GridMeasure};
use crate::modulus::{ModulusClass, ModulusKind};
use crate::rng::{self, Rng};
use crate::systems::{BaseMap, FiberedSystem, ShrinkEstimate};
use crate::transfer::Csr;
use crate::transport::{vertical_wasserstein, VerticalOptions};
use crate::par;

pub type Observable = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

/// A potential `φ: X → ℝ` with its modulus and constant `Hol_ω(φ)`.
#[derive(Clone)]
pub struct Potential {
    pub f: Observable,
    pub modulus: ModulusClass,
    pub hol_constant: f64,
    /// `false` when the constant was estimated (a lower bound).
    pub declared: bool,
    /// Sampled pairs violating the declared constant.
    pub violations: usize,
}

impl core::fmt::Debug for Potential {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Potential")
            .field("modulus", &self.modulus)
            .field("hol_constant", &self.hol_constant)
            .field("declared", &self.declared)
            .field("violations", &self.violations)
            .finish()
    }
}

pub const POTENTIAL_SAMPLES: usize = 10_000;

impl Potential {
    /// Potential with a declared constant, checked on `POTENTIAL_SAMPLES` pairs.
    pub fn declared(
        sys: &FiberedSystem,
        f: impl Fn(&Point) -> f64 + Send + Sync + 'static,
        modulus: ModulusClass,
        hol_constant: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(hol_constant >= 0.0) {
            return Err(param("hol_constant", "must be nonnegative"));
        }
        let f: Observable = Arc::new(f);
        let quotients = sample_quotients(sys, &f, &modulus, POTENTIAL_SAMPLES, seed);
        let violations = quotients.iter().filter(|&&q| q > hol_constant * (1.0 + 1e-9) + 1e-12).count();
        Ok(Self { f, modulus, hol_constant, declared: true, violations })
    }

    /// Potential whose constant is the largest sampled quotient.
    pub fn estimated(
        sys: &FiberedSystem,
        f: impl Fn(&Point) -> f64 + Send + Sync + 'static,
        modulus: ModulusClass,
        seed: u64,
    ) -> Self {
        let f: Observable = Arc::new(f);
        let h = sample_quotients(sys, &f, &modulus, POTENTIAL_SAMPLES, seed).into_iter().fold(0.0, f64::max);
        Self { f, modulus, hol_constant: h, declared: false, violations: 0 }
    }

    pub fn eval(&self, x: &Point) -> f64 {
        (self.f)(x)
    }
}

/// `|f(x) − f(x′)|/ω(d(x, x′))` over pairs at separations spread from 1e-6 to 1.
fn sample_quotients(sys: &FiberedSystem, f: &Observable, w: &ModulusClass, samples: usize, seed: u64) -> Vec<f64> {
    par::map_range(samples, |i| {
        let mut r = rng::stream(seed, i as u64, 0);
        let x = sys.sample_point(&mut r);
        let x2 = if i % 4 == 0 {
            sys.sample_point(&mut r)
        } else {
            let scale = pow(10.0, -6.0 * r.gen::<f64>());
            let mut p = x;
            p.y = math::frac(x.y + scale * (2.0 * r.gen::<f64>() - 1.0));
            let dir = sys.domain().sample(&mut r);
            let mix = r.gen::<f64>() * scale;
            for (c, d) in dir.iter().enumerate() {
                p.z[c] = x.z[c] + mix * (d - x.z[c]);
            }
            p
        };
        let d = sys.distance(&x, &x2);
        let om = w.eval(d);
        if om > 0.0 {
            abs(f(&x) - f(&x2)) / om
        } else {
            0.0
        }
    })
}

/// `∑_{n>N} ω(a_n)` for every `N`, under a fitted shrinking model.
struct Tail {
    modulus: ModulusClass,
    model: DecayModel,
    suffix: Vec<f64>,
    integral: f64,
}

/// Terms summed numerically before switching to the integral of the tail.
const TAIL_TERMS: usize = 100_000;

impl Tail {
    fn new(modulus: ModulusClass, fit: &DecayFit) -> Result<Self> {
        let model = fit.model;
        let (alpha, kind) = (modulus.alpha, modulus.kind);
        match (model, kind) {
            (DecayModel::Collapsed, _) => {
                return Ok(Self { modulus, model, suffix: Vec::new(), integral: 0.0 })
            }
            (DecayModel::Exponential { theta, .. }, _) if !(theta > 0.0 && theta < 1.0) => {
                return Err(Error::Infeasible(format!("shrinking ratio θ = {theta} must lie in (0, 1)")))
            }
            (DecayModel::Exponential { .. }, ModulusKind::Holder) => {
                return Ok(Self { modulus, model, suffix: Vec::new(), integral: 0.0 })
            }
            (DecayModel::Exponential { .. }, ModulusKind::LogHolder) if alpha <= 1.0 => {
                return Err(Error::Infeasible(format!(
                    "∑ ω(a_n) diverges: exponential shrinking with a log-Hölder modulus needs α > 1 (α = {alpha})"
                )))
            }
            (DecayModel::Polynomial { d, .. }, ModulusKind::Holder) if alpha * d <= 1.0 => {
                return Err(Error::Infeasible(format!(
                    "∑ ω(a_n) diverges: polynomial shrinking of degree d needs α > 1/d (α = {alpha}, d = {d}, αd = {})",
                    alpha * d
                )))
            }
            (DecayModel::Polynomial { d, .. }, ModulusKind::LogHolder) => {
                return Err(Error::Infeasible(format!(
                    "∑ ω(a_n) diverges: a log-Hölder modulus is not summable along polynomial shrinking (d = {d})"
                )))
            }
            (DecayModel::Exponential { .. }, _) | (DecayModel::Polynomial { .. }, _) => {}
            (DecayModel::NonDecaying, _) | (DecayModel::None, _) => {
                return Err(Error::Infeasible(format!("fibers are not shrinking ({} fit)", fit.label())))
            }
        }
        let a = |n: f64| match model {
            DecayModel::Exponential { theta, c } => c * pow(theta, n),
            DecayModel::Polynomial { d, c } => c * pow(n.max(1.0), -d),
            _ => 0.0,
        };
        let terms: Vec<f64> = (0..=TAIL_TERMS).map(|n| modulus.eval(a(n as f64).min(1.0))).collect();
        let mut suffix = vec![0.0; TAIL_TERMS + 2];
        for n in (0..=TAIL_TERMS).rev() {
            suffix[n] = suffix[n + 1] + terms[n];
        }
        let k = TAIL_TERMS as f64;
        let integral = match (model, kind) {
            (DecayModel::Polynomial { d, c }, ModulusKind::Holder) => pow(c, alpha) * pow(k, 1.0 - alpha * d) / (alpha * d - 1.0),
            (DecayModel::Exponential { theta, c }, ModulusKind::LogHolder) => {
                let l = -ln(theta);
                pow(ln(modulus.r_alpha / c) + k * l, 1.0 - alpha) / ((alpha - 1.0) * l)
            }
            _ => 0.0,
        };
        Ok(Self { modulus, model, suffix, integral })
    }

    /// `∑_{n>N} ω(a_n)`.
    fn after(&self, n: usize) -> f64 {
        match (self.model, self.modulus.kind) {
            (DecayModel::Collapsed, _) => 0.0,
            (DecayModel::Exponential { theta, c }, ModulusKind::Holder) => {
                let t = pow(theta, self.modulus.alpha);
                pow(c, self.modulus.alpha) * pow(t, (n + 1) as f64) / (1.0 - t)
            }
            _ => {
                if n + 1 > TAIL_TERMS {
                    self.integral
                } else {
                    self.suffix[n + 1] + self.integral
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoboundaryOptions {
    pub target_osc: f64,
    /// Base points at which the fiber oscillation is measured.
    pub fibers: usize,
    /// Grid parameter for fiber points (see `FiberDomain::grid`).
    pub fiber_grid: usize,
    pub seed: u64,
}

impl Default for CoboundaryOptions {
    fn default() -> Self {
        Self { target_osc: 1e-3, fibers: 64, fiber_grid: 8, seed: 0 }
    }
}

/// Truncated coboundary `h_N = ∑_{n≤N} (φTⁿσπ − φTⁿ)` and the projected potential.
#[derive(Clone)]
pub struct CoboundaryResult {
    sys: FiberedSystem,
    phi: Potential,
    pub n: usize,
    /// `2·Hol_ω(φ)·∑_{n>N} ω(a_n)`.
    pub truncation_bound: f64,
    /// Largest spread of `φ̂` over a sampled fiber.
    pub fiber_oscillation: f64,
    pub fibers_sampled: usize,
}

impl core::fmt::Debug for CoboundaryResult {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("CoboundaryResult")
            .field("n", &self.n)
            .field("truncation_bound", &self.truncation_bound)
            .field("fiber_oscillation", &self.fiber_oscillation)
            .finish()
    }
}

impl CoboundaryResult {
    /// Same construction with a prescribed truncation `n`.
    pub fn with_truncation(sys: &FiberedSystem, phi: &Potential, n: usize) -> Self {
        Self { sys: sys.clone(), phi: phi.clone(), n, truncation_bound: f64::NAN, fiber_oscillation: f64::NAN, fibers_sampled: 0 }
    }

    /// `h_N(x)`, with fresh orbits of `x` and `σπ(x)`.
    pub fn h(&self, x: &Point) -> f64 {
        let sys = &self.sys;
        let mut a = sys.section(sys.project(x));
        let mut b = *x;
        let mut acc = 0.0;
        for k in 0..=self.n {
            acc += self.phi.eval(&a) - self.phi.eval(&b);
            if k < self.n {
                a = sys.apply_t(&a);
                b = sys.apply_t(&b);
            }
        }
        acc
    }

    /// `φ̂ = φ + h_N − h_N∘T`.
    pub fn phi_hat(&self, x: &Point) -> f64 {
        self.phi.eval(x) + self.h(x) - self.h(&self.sys.apply_t(x))
    }

    /// `φ̌ = φ̂∘σ`.
    pub fn phi_check(&self, y: f64) -> f64 {
        self.phi_hat(&self.sys.section(y))
    }

    pub fn potential(&self) -> &Potential {
        &self.phi
    }

    /// `φ̌` at the centers of `m` cells.
    pub fn phi_check_grid(&self, m: usize) -> Vec<f64> {
        par::map_range(m, |i| self.phi_check((i as f64 + 0.5) / m as f64))
    }

    /// Largest `max φ̂ − min φ̂` over fibers above `fibers` base points.
    pub fn measure_oscillation(&self, fibers: usize, fiber_grid: usize, seed: u64) -> f64 {
        let zs = self.sys.domain().grid(fiber_grid);
        let spreads = par::map_range(fibers, |i| {
            let mut r = rng::stream(seed, i as u64, 0);
            let y = (i as f64 + r.gen::<f64>()) / fibers as f64;
            let vals: Vec<f64> = zs.iter().map(|&z| self.phi_hat(&Point::new(y, z))).collect();
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            hi - lo
        });
        spreads.into_iter().fold(0.0, f64::max)
    }
}

/// Upper limit on the truncation index.
pub const MAX_TRUNCATION: usize = TAIL_TERMS;

/// Chooses the smallest `N` with `2·Hol_ω(φ)·∑_{n>N} ω(a_n) ≤ target_osc`
/// under the fitted shrinking model and measures the fiber oscillation of `φ̂`.
pub fn build_coboundary(
    sys: &FiberedSystem,
    phi: &Potential,
    shrink: &ShrinkEstimate,
    opts: &CoboundaryOptions,
) -> Result<CoboundaryResult> {
    if !(opts.target_osc > 0.0) {
        return Err(param("target_osc", "must be positive"));
    }
    if !shrink.fit.is_decaying() {
        return Err(Error::Infeasible(format!("fibers are not shrinking ({} fit)", shrink.fit.label())));
    }
    let tail = Tail::new(phi.modulus, &shrink.fit)?;
    let bound = |n: usize| 2.0 * phi.hol_constant * tail.after(n);
    let n = (0..=MAX_TRUNCATION).find(|&n| bound(n) <= opts.target_osc).ok_or_else(|| {
        Error::Infeasible(format!(
            "target oscillation {} is not reached for N ≤ {MAX_TRUNCATION} (bound there {})",
            opts.target_osc,
            bound(MAX_TRUNCATION)
        ))
    })?;
    let mut out = CoboundaryResult::with_truncation(sys, phi, n);
    out.truncation_bound = bound(n);
    out.fiber_oscillation = out.measure_oscillation(opts.fibers, opts.fiber_grid, opts.seed);
    out.fibers_sampled = opts.fibers;
    Ok(out)
}

/// Modulus of `φ̌` predicted from the modulus of `φ`, the Hölder exponent `β`
/// of `π`, the Lipschitz constant `L` of `T` and the shrinking model.
pub fn exponent_arithmetic(alpha: f64, beta: f64, lip: f64, shrink: &DecayFit, kind: ModulusKind) -> Result<ModulusClass> {
    let infeasible = |s: String| Err(Error::Infeasible(s));
    match (kind, shrink.model) {
        (ModulusKind::Holder, DecayModel::Exponential { theta, .. }) => {
            if !(alpha > 0.0 && alpha <= 1.0) {
                return infeasible(format!("Hölder exponent needs 0 < α ≤ 1 (α = {alpha})"));
            }
            if !(beta > 0.0 && beta <= 1.0) {
                return infeasible(format!("fibration exponent needs 0 < β ≤ 1 (β = {beta})"));
            }
            if !(lip >= 1.0) {
                return infeasible(format!("Lipschitz constant needs L ≥ 1 (L = {lip})"));
            }
            if !(theta > 0.0 && theta < 1.0) {
                return infeasible(format!("shrinking ratio needs 0 < θ < 1 (θ = {theta})"));
            }
            ModulusClass::holder(alpha * beta / (1.0 - ln(lip) / ln(theta)))
        }
        (ModulusKind::Holder, DecayModel::Collapsed) => ModulusClass::holder(alpha * beta),
        (ModulusKind::Holder, DecayModel::Polynomial { d, .. }) => {
            if !(d > 0.0) {
                return infeasible(format!("polynomial degree needs d > 0 (d = {d})"));
            }
            if !(alpha > 1.0 / d) {
                return infeasible(format!("polynomial shrinking needs α > 1/d (α = {alpha}, 1/d = {})", 1.0 / d));
            }
            ModulusClass::log_holder(alpha * d - 1.0)
        }
        (ModulusKind::LogHolder, DecayModel::Exponential { .. }) | (ModulusKind::LogHolder, DecayModel::Collapsed) => {
            if !(alpha > 1.0) {
                return infeasible(format!("log-Hölder potentials need α > 1 (α = {alpha})"));
            }
            ModulusClass::log_holder((alpha - 1.0) / 2.0)
        }
        (ModulusKind::LogHolder, DecayModel::Polynomial { d, .. }) => {
            infeasible(format!("no projected modulus for log-Hölder potentials under polynomial shrinking (d = {d})"))
        }
        (_, DecayModel::NonDecaying) | (_, DecayModel::None) => {
            infeasible(format!("fibers are not shrinking ({} fit)", shrink.label()))
        }
    }
}

/// `max |φ̌(y + r) − φ̌(y)| / ω(r)` over `samples` base points, one value per scale.
pub fn holder_quotients(phi_check: &(dyn Fn(f64) -> f64 + Sync), modulus: &ModulusClass, scales: &[f64], samples: usize) -> Vec<(f64, f64)> {
    scales
        .iter()
        .map(|&r| {
            let q = par::map_range(samples, |i| {
                let y = (i as f64 + 0.5) / samples as f64;
                abs(phi_check(math::frac(y + r)) - phi_check(y)) / modulus.eval(r)
            });
            (r, q.into_iter().fold(0.0, f64::max))
        })
        .collect()
}

/// Quadrature points per target cell in the weighted operator.
const WEIGHT_QUADRATURE: usize = 8;
const WEIGHT_MAX_ITER: usize = 100_000;

/// Discretized `Ľ_φ̌ f(y) = ∑_{S(z)=y} e^{φ̌(z)} f(z)` and its normalization.
#[derive(Debug, Clone)]
pub struct WeightedTransfer {
    /// `M[j][i]`: weight carried from cell `i` to cell `j`; acts on column vectors.
    pub matrix: Csr,
    pub leading_eigenvalue: f64,
    /// `log` of the leading eigenvalue.
    pub pressure: f64,
    /// Positive right eigenvector `h` with `Mh = ρh`, mean 1.
    pub eigenfunction: Vec<f64>,
    /// `Nf = M(hf)/(ρh)`, which fixes constants.
    pub normalized: Csr,
    /// Stationary measure of the normalized operator.
    pub equilibrium: GridMeasure,
    pub iterations: usize,
}

impl WeightedTransfer {
    /// `‖N1 − 1‖_∞`.
    pub fn normalization_defect(&self) -> f64 {
        self.normalized.row_sums().iter().map(|s| abs(s - 1.0)).fold(0.0, f64::max)
    }
}

/// Builds the weighted operator on `m` cells by quadrature over each target
/// cell and preimages through the inverse branches, then normalizes it by its
/// leading eigenvalue and eigenfunction.
pub fn weighted_transfer(base: &dyn BaseMap, phi_check: &(dyn Fn(f64) -> f64 + Sync), m: usize) -> Result<WeightedTransfer> {
    if m < 2 {
        return Err(param("m", "need at least two cells"));
    }
    let branches = base
        .branches()
        .ok_or_else(|| Error::Capability(format!("map `{}` has no branch decomposition", base.name())))?;
    let q = WEIGHT_QUADRATURE as f64;
    let rows = par::map_range(m, |j| {
        let mut row = Vec::new();
        for k in 0..WEIGHT_QUADRATURE {
            let y = (j as f64 + (k as f64 + 0.5) / q) / m as f64;
            for b in &branches {
                let (ia, ib) = b.image();
                if y < ia.min(ib) || y > ia.max(ib) {
                    continue;
                }
                let z = b.inverse(y);
                row.push((cell_of(z, m), exp(phi_check(z)) / q));
            }
        }
        row
    });
    let matrix = Csr::from_rows(m, rows);
    let (rho, h, it1) = leading_right(&matrix)?;
    let rows = (0..m)
        .map(|j| matrix.row(j).map(|(i, v)| (i, v * h[i] / (rho * h[j]))).collect())
        .collect();
    let normalized = Csr::from_rows(m, rows);
    let (pi, it2) = stationary(&normalized)?;
    Ok(WeightedTransfer {
        leading_eigenvalue: rho,
        pressure: ln(rho),
        eigenfunction: h,
        equilibrium: GridMeasure::new(pi)?,
        normalized,
        matrix,
        iterations: it1 + it2,
    })
}

fn leading_right(a: &Csr) -> Result<(f64, Vec<f64>, usize)> {
    let m = a.n_rows();
    let mut v = vec![1.0; m];
    for it in 1..=WEIGHT_MAX_ITER {
        let w = a.mul_vec(&v);
        let mean = math::mean(&w);
        if !(mean > 0.0) {
            return Err(Error::Convergence { method: "weighted power iteration", residual: f64::NAN, iterations: it });
        }
        let w: Vec<f64> = w.into_iter().map(|x| x / mean).collect();
        let change = w.iter().zip(&v).map(|(a, b)| abs(a - b)).fold(0.0, f64::max);
        let rho = mean / math::mean(&v);
        v = w;
        if change < 1e-13 {
            return Ok((rho, v, it));
        }
    }
    Err(Error::Convergence { method: "weighted power iteration", residual: f64::NAN, iterations: WEIGHT_MAX_ITER })
}

fn stationary(n: &Csr) -> Result<(Vec<f64>, usize)> {
    let m = n.n_rows();
    let t = n.transpose();
    let mut p = vec![1.0 / m as f64; m];
    for it in 1..=WEIGHT_MAX_ITER {
        let w = t.mul_vec(&p);
        let s = math::sum(w.iter().copied());
        let w: Vec<f64> = w.into_iter().map(|x| x / s).collect();
        let change = math::sum(w.iter().zip(&p).map(|(a, b)| abs(a - b)));
        p = w;
        if change < 1e-14 {
            return Ok((p, it));
        }
    }
    Err(Error::Convergence { method: "stationary power iteration", residual: f64::NAN, iterations: WEIGHT_MAX_ITER })
}

/// Energy bookkeeping `μ(φ) = μ(φ̂) = μ̌(φ̌)` for an approximately invariant `μ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub mu_phi: f64,
    pub mu_phi_hat: f64,
    pub base_phi_check: f64,
    /// `|μ(φ) − μ(φ̂)| = |∫(h_N − h_N∘T) dμ|`.
    pub coboundary_term: f64,
    /// `Lip(h_N)·W^μ̌(T_*μ, μ) + 1e-12`, an upper bound for the coboundary term.
    pub cancellation_bound: f64,
    /// `|μ(φ̂) − μ̌(φ̌)|`.
    pub projection_gap: f64,
    /// `|μ(φ) − μ̌(φ̌)|`.
    pub total_gap: f64,
}

/// Compares the three energies on the lifted measure `mu` and the base
/// measure `base`. The Lipschitz bound on `h_N` uses the system's Lipschitz
/// constant (2 if undeclared) and assumes `σπ` is 1-Lipschitz.
pub fn energy_consistency(
    sys: &FiberedSystem,
    cob: &CoboundaryResult,
    mu: &EmpiricalMeasure,
    base: &EmpiricalMeasure,
) -> Result<EnergyReport> {
    let phi = cob.potential();
    let pts = mu.points();
    let w = mu.weights();
    let vals = par::map_range(pts.len(), |i| {
        let x = &pts[i];
        let h0 = cob.h(x);
        let h1 = cob.h(&sys.apply_t(x));
        (phi.eval(x), h0 - h1)
    });
    let mu_phi = math::sum(vals.iter().zip(w).map(|(v, w)| w * v.0));
    let cob_int = math::sum(vals.iter().zip(w).map(|(v, w)| w * v.1));
    let mu_phi_hat = mu_phi + cob_int;
    let bpts = base.points();
    let checks = par::map_range(bpts.len(), |i| cob.phi_check(bpts[i].y));
    let base_phi_check = math::sum(checks.iter().zip(base.weights()).map(|(v, w)| w * v));
    let pushed = mu.push_t(sys)?;
    let wv = vertical_wasserstein(mu, &pushed, &sys.metric(), &VerticalOptions { rebalance: true, ..Default::default() })?.distance;
    let lip = sys.lipschitz().unwrap_or(2.0);
    let lip_h = 2.0 * phi.hol_constant * math::sum((0..=cob.n).map(|k| pow(lip, k as f64)));
    Ok(EnergyReport {
        mu_phi,
        mu_phi_hat,
        base_phi_check,
        coboundary_term: abs(cob_int),
        cancellation_bound: lip_h * wv + 1e-12,
        projection_gap: abs(mu_phi_hat - base_phi_check),
        total_gap: abs(mu_phi - base_phi_check),
    })
}
