//! Ulam discretization of the base transfer operator.
//!
//! Convention: `P[i][j]` is the fraction of cell `i` that `S` sends into cell
//! `j`. Densities are row vectors acted on from the right (`ρ ↦ ρP`, the
//! transfer operator `Ľ`), observables are column vectors acted on from the
//! left (`f ↦ Pf`, the Koopman operator `f ↦ f∘S`). The two are dual on the
//! grid: `⟨ρP, f⟩ = ⟨ρ, Pf⟩`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::decay::{fit_decay, DecayFit};
use crate::error::{param, Error, Result};
use crate::geometry::Point;
use crate::math::{self, abs, sqrt};
use crate::measures::{cell_of, GridMeasure};
use crate::rng::{self, Rng};
use crate::systems::{BaseMap, Branch, FiberedSystem};
use crate::par;

/// Compressed sparse rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    /// Builds from per-row `(column, value)` lists; duplicate columns are summed.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows.into_iter() {
            row.sort_by_key(|e| e.0);
            for (c, v) in row {
                if cols.len() > *row_ptr.last().unwrap() && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { n_rows: row_ptr.len() - 1, n_cols, row_ptr, cols, vals }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[a..b].iter().copied().zip(self.vals[a..b].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|e| e.0 == j).map_or(0.0, |e| e.1)
    }

    pub fn transpose(&self) -> Self {
        let mut rows = vec![Vec::new(); self.n_cols];
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                rows[j].push((i, v));
            }
        }
        Self::from_rows(self.n_rows, rows)
    }

    /// `A·x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        par::map_range(self.n_rows, |i| math::sum(self.row(i).map(|(j, v)| v * x[j])))
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows).map(|i| math::sum(self.row(i).map(|e| e.1))).collect()
    }

    /// `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.n_rows).flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v))).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (i, j, v) in self.triplets() {
            d[i][j] = v;
        }
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Construction {
    /// Cell-image overlaps by interval arithmetic on monotone branches.
    ExactBranches,
    /// `samples` uniform points per cell.
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone)]
pub struct UlamOperator {
    n_cells: usize,
    p: Csr,
    pt: Csr,
    construction: Construction,
}

impl UlamOperator {
    /// Wraps an `m×m` row-substochastic matrix.
    pub fn from_matrix(p: Csr, construction: Construction) -> Result<Self> {
        if p.n_rows() != p.n_cols() || p.n_rows() < 2 {
            return Err(Error::Argument("Ulam matrix must be square with at least two cells".into()));
        }
        if p.vals.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Argument("Ulam matrix entries must be nonnegative".into()));
        }
        let pt = p.transpose();
        Ok(Self { n_cells: p.n_rows(), p, pt, construction })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }
    pub fn matrix(&self) -> &Csr {
        &self.p
    }
    pub fn construction(&self) -> Construction {
        self.construction
    }
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.p.get(i, j)
    }
    pub fn row_sums(&self) -> Vec<f64> {
        self.p.row_sums()
    }

    /// Largest deviation of a row sum from 1.
    pub fn stochasticity_defect(&self) -> f64 {
        self.row_sums().iter().map(|s| abs(s - 1.0)).fold(0.0, f64::max)
    }

    /// Binomial standard error of each entry for Monte Carlo construction.
    pub fn entry_stderr(&self, i: usize, j: usize) -> Option<f64> {
        match self.construction {
            Construction::MonteCarlo { samples, .. } => {
                let p = self.entry(i, j);
                Some(sqrt(p * (1.0 - p) / samples as f64))
            }
            Construction::ExactBranches => None,
        }
    }

    /// `ρ ↦ ρP`: the transfer operator with respect to Lebesgue, on densities.
    pub fn transfer(&self, rho: &[f64]) -> Vec<f64> {
        self.pt.mul_vec(rho)
    }

    /// `f ↦ Pf`: composition with `S` on observables.
    pub fn koopman(&self, f: &[f64]) -> Vec<f64> {
        self.p.mul_vec(f)
    }

    /// Transfer operator with respect to the measure of density `h`:
    /// `(Ľ_h f)_j = ∑_i h_i f_i P_ij / h_j`. It fixes constants when `hP = h`.
    pub fn transfer_wrt(&self, h: &[f64], f: &[f64]) -> Vec<f64> {
        let hf: Vec<f64> = h.iter().zip(f).map(|(a, b)| a * b).collect();
        let num = self.pt.mul_vec(&hf);
        num.iter().zip(h).map(|(n, &hj)| if hj > 0.0 { n / hj } else { 0.0 }).collect()
    }

    /// `|⟨Ľf, g⟩ − ∫ f·g∘S dλ|` on the grid: the matrix side uses cell-center
    /// samples, the continuous side a midpoint rule with `fine` points per cell.
    pub fn duality_defect(&self, base: &dyn BaseMap, f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64, fine: usize) -> f64 {
        let m = self.n_cells;
        let fs: Vec<f64> = (0..m).map(|i| f(center(i, m))).collect();
        let gs: Vec<f64> = (0..m).map(|i| g(center(i, m))).collect();
        let lf = self.transfer(&fs);
        let grid = math::sum(lf.iter().zip(&gs).map(|(a, b)| a * b)) / m as f64;
        let k = m * fine.max(1);
        let cont = math::sum((0..k).map(|i| {
            let y = center(i, k);
            f(y) * g(base.apply(y))
        })) / k as f64;
        abs(grid - cont)
    }
}

#[inline]
fn center(i: usize, m: usize) -> f64 {
    (i as f64 + 0.5) / m as f64
}

/// Discretizes `S` on `m` uniform cells.
pub fn build_ulam(base: &dyn BaseMap, m: usize, construction: Construction) -> Result<UlamOperator> {
    if m < 2 {
        return Err(param("m", "need at least two cells"));
    }
    let rows = match construction {
        Construction::ExactBranches => {
            let branches = base.branches().ok_or_else(|| {
                Error::Capability(format!("map `{}` has no branch decomposition; use Monte Carlo construction", base.name()))
            })?;
            par::map_range(m, |i| exact_row(&branches, i, m))
        }
        Construction::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(param("samples", "need at least one sample per cell"));
            }
            par::map_range(m, |i| {
                let mut r = rng::stream(seed, i as u64, 0);
                let mut counts = vec![0usize; m];
                for _ in 0..samples {
                    let y = (i as f64 + r.gen::<f64>()) / m as f64;
                    counts[cell_of(base.apply(y), m)] += 1;
                }
                counts
                    .into_iter()
                    .enumerate()
                    .filter(|e| e.1 > 0)
                    .map(|(j, c)| (j, c as f64 / samples as f64))
                    .collect()
            })
        }
    };
    UlamOperator::from_matrix(Csr::from_rows(m, rows), construction)
}

fn exact_row(branches: &[Branch], i: usize, m: usize) -> Vec<(usize, f64)> {
    let mf = m as f64;
    let (lo, hi) = (i as f64 / mf, (i + 1) as f64 / mf);
    let mut row = Vec::new();
    for b in branches {
        let (a, c) = (lo.max(b.lo), hi.min(b.hi));
        if c <= a {
            continue;
        }
        let fa = b.forward(a).clamp(0.0, 1.0);
        let fc = b.forward(c).clamp(0.0, 1.0);
        if fc <= fa {
            // a branch that collapses the overlap to a point carries its mass there
            row.push((cell_of(fa, m), (c - a) * mf));
            continue;
        }
        let j0 = cell_of(fa, m);
        let j1 = cell_of(fc, m).max(j0);
        // inverse images of the cell edges inside [a, c]
        let mut left = a;
        for j in j0..=j1 {
            let t1 = ((j + 1) as f64 / mf).min(fc);
            let right = if j == j1 { c } else { b.inverse(t1).clamp(left, c) };
            if right > left {
                row.push((j, (right - left) * mf));
            }
            left = right;
        }
    }
    row
}

/// Result of the density and second-eigenvalue computations.
#[derive(Debug, Clone)]
pub struct SpectralReport {
    pub leading_eigenvalue: f64,
    pub invariant_density: GridMeasure,
    /// Estimate of the largest modulus of the spectrum off the fixed density.
    pub second_modulus: f64,
    /// `1 − second_modulus`.
    pub gap: f64,
    pub second_converged: bool,
    /// Set when the gap is below `1e-3`.
    pub no_gap: bool,
    pub power_iterations: usize,
    pub restarts: usize,
}

impl SpectralReport {
    /// Density values `h_i` on the cells, normalized to Lebesgue mean 1.
    pub fn density(&self) -> Vec<f64> {
        self.invariant_density.density()
    }
}

pub const MAX_POWER_ITER: usize = 200_000;
const SECOND_RESTARTS: usize = 3;
const SECOND_MAX_ITER: usize = 20_000;
const SECOND_WINDOW: usize = 50;
const SECOND_SEED: u64 = 0x5eed_u64;

/// Power iteration on densities until the L¹ change drops below `tol`,
/// then deflated power iteration for the second modulus.
pub fn invariant_density(op: &UlamOperator, tol: f64) -> Result<SpectralReport> {
    if !(tol > 0.0) {
        return Err(param("tol", "must be positive"));
    }
    let m = op.n_cells;
    let mut rho = vec![1.0 / m as f64; m];
    let mut iterations = 0;
    let mut change = f64::INFINITY;
    let mut lead = 1.0;
    while iterations < MAX_POWER_ITER {
        let next = op.transfer(&rho);
        let total = math::sum(next.iter().copied());
        if !(total > 0.0) {
            return Err(Error::Convergence { method: "power iteration", residual: f64::NAN, iterations });
        }
        lead = total / math::sum(rho.iter().copied());
        let next: Vec<f64> = next.into_iter().map(|v| v / total).collect();
        change = math::sum(next.iter().zip(&rho).map(|(a, b)| abs(a - b)));
        rho = next;
        iterations += 1;
        if change < tol {
            break;
        }
    }
    if !(change < tol) {
        return Err(Error::Convergence { method: "power iteration", residual: change, iterations });
    }
    let density = GridMeasure::new(rho.clone())?;
    let (second, converged) = second_modulus(op, &rho);
    Ok(SpectralReport {
        leading_eigenvalue: lead,
        invariant_density: density,
        second_modulus: second,
        gap: 1.0 - second,
        second_converged: converged,
        no_gap: 1.0 - second < 1e-3,
        power_iterations: iterations,
        restarts: SECOND_RESTARTS,
    })
}

/// Power iteration on `{v : ∑v = 0}`, which `P` leaves invariant, from
/// several random starts. The growth rate is a windowed geometric mean.
fn second_modulus(op: &UlamOperator, rho: &[f64]) -> (f64, bool) {
    let m = op.n_cells;
    let deflate = |v: &mut Vec<f64>| {
        let s = math::sum(v.iter().copied());
        for (x, r) in v.iter_mut().zip(rho) {
            *x -= s * r;
        }
    };
    let norm = |v: &[f64]| sqrt(math::sum(v.iter().map(|x| x * x)));
    let mut best: f64 = 0.0;
    let mut all_converged = true;
    for restart in 0..SECOND_RESTARTS {
        let mut r = rng::stream(SECOND_SEED, restart as u64, 0);
        let mut v: Vec<f64> = (0..m).map(|_| r.gen::<f64>() - 0.5).collect();
        deflate(&mut v);
        let n0 = norm(&v);
        v.iter_mut().for_each(|x| *x /= n0);
        let mut log_cum = 0.0;
        let mut logs = Vec::new();
        let mut prev_est = f64::NAN;
        let mut estimate = f64::NAN;
        let mut converged = false;
        for it in 1..=SECOND_MAX_ITER {
            let mut w = op.transfer(&v);
            deflate(&mut w);
            let nw = norm(&w);
            if !(nw > 0.0) || log_cum + math::ln(nw) < math::ln(1e-13) {
                // the complement is annihilated: report the average rate so far
                let total = if nw > 0.0 { log_cum + math::ln(nw) } else { math::ln(1e-16) };
                estimate = math::exp(total / it as f64);
                converged = true;
                break;
            }
            log_cum += math::ln(nw);
            logs.push(math::ln(nw));
            v = w.into_iter().map(|x| x / nw).collect();
            if it % SECOND_WINDOW == 0 {
                let window = &logs[logs.len() - SECOND_WINDOW..];
                estimate = math::exp(math::mean(window));
                if abs(estimate - prev_est) < 1e-4 * estimate.max(1e-12) {
                    converged = true;
                    break;
                }
                prev_est = estimate;
            }
        }
        if estimate.is_nan() {
            estimate = math::exp(math::mean(&logs));
        }
        all_converged &= converged;
        best = best.max(estimate);
    }
    (best, all_converged)
}

/// Sup norms of `Ľⁿ_μ̌ f` for the operator normalized by the invariant density.
#[derive(Debug, Clone)]
pub struct OperatorDecay {
    /// `(n, ‖Ľⁿf‖_∞)` for `n = 0..=n_max`.
    pub norms: Vec<(usize, f64)>,
    pub fit: DecayFit,
    /// Mean removed from `f` before iterating (0 when already centered).
    pub removed_mean: f64,
    /// Grid Lipschitz constant of `Ľⁿf` divided by that of `f`.
    pub lipschitz_ratios: Vec<f64>,
}

/// `max_i |v_{i+1} − v_i|·m`, cyclically.
pub fn grid_lipschitz(v: &[f64]) -> f64 {
    let m = v.len();
    (0..m).map(|i| abs(v[(i + 1) % m] - v[i]) * m as f64).fold(0.0, f64::max)
}

/// Samples `f` at cell centers.
pub fn sample_grid(m: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
    (0..m).map(|i| f(center(i, m))).collect()
}

/// Iterates the μ̌-normalized transfer operator on a grid observable,
/// centering it against the invariant density first if needed.
pub fn operator_decay(op: &UlamOperator, spectral: &SpectralReport, f: &[f64], n_max: usize) -> Result<OperatorDecay> {
    if f.len() != op.n_cells {
        return Err(Error::Argument(format!("observable has {} values for {} cells", f.len(), op.n_cells)));
    }
    let h = spectral.density();
    let masses = spectral.invariant_density.masses();
    let mean = math::sum(f.iter().zip(masses).map(|(a, b)| a * b));
    let removed_mean = if abs(mean) < 1e-9 { 0.0 } else { mean };
    let mut g: Vec<f64> = f.iter().map(|v| v - removed_mean).collect();
    let lip0 = grid_lipschitz(&g);
    let sup = |v: &[f64]| v.iter().map(|x| abs(*x)).fold(0.0, f64::max);
    let mut norms = vec![(0, sup(&g))];
    let mut lipschitz_ratios = vec![if lip0 > 0.0 { 1.0 } else { 0.0 }];
    for n in 1..=n_max {
        g = op.transfer_wrt(&h, &g);
        norms.push((n, sup(&g)));
        lipschitz_ratios.push(if lip0 > 0.0 { grid_lipschitz(&g) / lip0 } else { 0.0 });
    }
    let pts: Vec<(f64, f64)> = norms.iter().map(|&(n, v)| (n as f64, v)).collect();
    Ok(OperatorDecay { fit: fit_decay(&pts), norms, removed_mean, lipschitz_ratios })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XiMethod {
    /// Exact inverse branches of `S` with weights from the Ulam density.
    PreimageTree,
    /// Powers of the Ulam matrix applied to cell-center samples.
    UlamPowers,
}

/// `ξ_y(f)` on cell centers via `Ľⁿ(f∘Tⁿ∘σ)`.
#[derive(Debug, Clone)]
pub struct XiEstimate {
    pub centers: Vec<f64>,
    /// `g_n` at the cell centers.
    pub values: Vec<f64>,
    /// `(k, ‖g_k − g_{k−1}‖_∞)` for `k = 1..=n`.
    pub successive: Vec<(usize, f64)>,
    pub method: XiMethod,
}

impl XiEstimate {
    pub fn error_proxy(&self) -> f64 {
        self.successive.last().map_or(f64::INFINITY, |e| e.1)
    }
}

/// Preimage trees up to this many leaves per cell are evaluated exactly.
pub const MAX_TREE_LEAVES: usize = 1 << 20;

/// Evaluates `g_n = Ľⁿ(f∘Tⁿ∘σ)` on the operator's cells, where `Ľ` is the
/// transfer operator of `(S, μ̌)` and `μ̌` has the density of `spectral`.
///
/// With a branch decomposition, `Ľⁿ` is applied exactly by walking the
/// preimage tree of each cell center: leaves are lifted by the section and
/// pushed up the tree by the fiber maps, and each level is weighted by
/// `h/|S′|` renormalized to sum 1. Otherwise the Ulam matrix is used on
/// cell-center samples, which aliases when `Tⁿσ` oscillates below the cell scale.
pub fn disintegration_via_transfer(
    sys: &FiberedSystem,
    op: &UlamOperator,
    spectral: &SpectralReport,
    f: &(dyn Fn(&Point) -> f64 + Sync),
    n: usize,
) -> Result<XiEstimate> {
    if n == 0 {
        return Err(param("n", "need at least one step"));
    }
    let m = op.n_cells;
    let h = spectral.density();
    let centers = sample_grid(m, |y| y);
    let branches = sys.base().branches();
    let tree_ok = branches
        .as_ref()
        .is_some_and(|b| math::pow(b.len() as f64, n as f64) <= MAX_TREE_LEAVES as f64 && !b.is_empty());
    let mut stages = Vec::with_capacity(n + 1);
    let method = if tree_ok {
        let branches = branches.unwrap();
        let hd = |y: f64| h[cell_of(y, m)];
        for k in 0..=n {
            stages.push(par::map_range(m, |i| tree_value(sys, &branches, &hd, f, centers[i], k)));
        }
        XiMethod::PreimageTree
    } else {
        for k in 0..=n {
            let mut g: Vec<f64> = centers.iter().map(|&y| f(&sys.iterate(&sys.section(y), k))).collect();
            for _ in 0..k {
                g = op.transfer_wrt(&h, &g);
            }
            stages.push(g);
        }
        XiMethod::UlamPowers
    };
    let successive = (1..=n)
        .map(|k| {
            let d = stages[k].iter().zip(&stages[k - 1]).map(|(a, b)| abs(a - b)).fold(0.0, f64::max);
            (k, d)
        })
        .collect();
    Ok(XiEstimate { centers, values: stages.pop().unwrap(), successive, method })
}

fn tree_value(
    sys: &FiberedSystem,
    branches: &[Branch],
    h: &dyn Fn(f64) -> f64,
    f: &(dyn Fn(&Point) -> f64 + Sync),
    y: f64,
    depth: usize,
) -> f64 {
    let mut path = Vec::with_capacity(depth + 1);
    path.push(y);
    walk(sys, branches, h, f, &mut path, depth)
}

/// Weighted average over the preimages of the last point of `path`.
fn walk(
    sys: &FiberedSystem,
    branches: &[Branch],
    h: &dyn Fn(f64) -> f64,
    f: &(dyn Fn(&Point) -> f64 + Sync),
    path: &mut Vec<f64>,
    remaining: usize,
) -> f64 {
    let y = *path.last().unwrap();
    if remaining == 0 {
        // lift the leaf and push it back up the branch to the root fiber
        let mut z = (sys.section_fn())(y);
        for w in path.windows(2).rev() {
            z = sys.apply_fiber(w[1], z);
        }
        return f(&Point::new(path[0], z));
    }
    let mut acc = 0.0;
    let mut total = 0.0;
    for b in branches {
        let (ia, ib) = b.image();
        if y < ia.min(ib) || y > ia.max(ib) {
            continue;
        }
        let pre = b.inverse(y);
        let w = h(pre) / abs(b.derivative(pre));
        if !(w > 0.0) {
            continue;
        }
        path.push(pre);
        acc += w * walk(sys, branches, h, f, path, remaining - 1);
        path.pop();
        total += w;
    }
    if total > 0.0 {
        acc / total
    } else {
        0.0
    }
}
