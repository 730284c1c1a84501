//! Atom measures on `X` or `Y`, grid histograms on `Y`, and binned disintegration.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::math::{self, ceil_sqrt};
use crate::orbit::{checked_orbit, OrbitStart};
use crate::systems::FiberedSystem;

/// Which space the atoms live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    Base,
    Total,
}

/// A finitely supported probability measure. Weights are positive and are
/// normalized to sum to 1 at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    points: Vec<Point>,
    weights: Vec<f64>,
    space: Space,
}

impl EmpiricalMeasure {
    pub fn new(points: Vec<Point>, weights: Vec<f64>, space: Space) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Argument("measure needs at least one atom".into()));
        }
        if points.len() != weights.len() {
            return Err(Error::Argument(format!("{} atoms but {} weights", points.len(), weights.len())));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::Argument(format!("weights must be positive and finite, got {w}")));
        }
        let total = math::sum(weights.iter().copied());
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { points, weights, space })
    }

    /// Equal weights on the given atoms.
    pub fn uniform(points: Vec<Point>, space: Space) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::Argument("measure needs at least one atom".into()));
        }
        Ok(Self { points, weights: alloc::vec![1.0 / n as f64; n], space })
    }

    pub fn dirac(p: Point, space: Space) -> Self {
        Self { points: alloc::vec![p], weights: alloc::vec![1.0], space }
    }

    /// Uniform measure on the base grid `{k/n}`. For odd `n` it is invariant
    /// under `y ↦ 2y mod 1`, which permutes the grid.
    pub fn base_grid(n: usize) -> Result<Self> {
        Self::uniform((0..n).map(|k| Point::base(k as f64 / n as f64)).collect(), Space::Base)
    }

    /// Base measure with atoms at the given coordinates, equal weights.
    pub fn base_points(ys: &[f64]) -> Result<Self> {
        Self::uniform(ys.iter().map(|&y| Point::base(y)).collect(), Space::Base)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn space(&self) -> Space {
        self.space
    }
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
    pub fn total_mass(&self) -> f64 {
        math::sum(self.weights.iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point, f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }

    /// `∑ wᵢ f(xᵢ)` with compensated summation.
    pub fn integrate(&self, f: impl Fn(&Point) -> f64) -> f64 {
        math::sum(self.iter().map(|(p, w)| w * f(p)))
    }

    /// Push-forward by an arbitrary map; weights are unchanged.
    pub fn pushforward(&self, f: impl Fn(&Point) -> Point, space: Space) -> Self {
        Self { points: self.points.iter().map(f).collect(), weights: self.weights.clone(), space }
    }

    /// `T_*μ`, with every image checked against the phase space.
    pub fn push_t(&self, sys: &FiberedSystem) -> Result<Self> {
        let points = self
            .points
            .iter()
            .map(|p| sys.apply_t_checked(p))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { points, weights: self.weights.clone(), space: self.space })
    }

    /// `S_*μ̌` for a base measure.
    pub fn push_s(&self, sys: &FiberedSystem) -> Self {
        self.pushforward(|p| Point::base(sys.apply_s(p.y)), Space::Base)
    }

    /// `π_*μ`.
    pub fn project(&self) -> Self {
        self.pushforward(|p| Point::base(p.y), Space::Base)
    }

    /// `σ_*μ̌` for the given section.
    pub fn lift_by(&self, section: impl Fn(f64) -> Point) -> Self {
        self.pushforward(|p| section(p.y), Space::Total)
    }

    /// Masses of the `m` uniform base cells.
    pub fn cell_masses(&self, m: usize) -> Vec<f64> {
        let m = m.max(1);
        let mut masses = alloc::vec![0.0; m];
        let mut comp = alloc::vec![0.0; m];
        for (p, w) in self.iter() {
            let c = cell_of(p.y, m);
            // Kahan per cell
            let y = w - comp[c];
            let t = masses[c] + y;
            comp[c] = (t - masses[c]) - y;
            masses[c] = t;
        }
        masses
    }

    /// Checks that every atom lies in the phase space of `sys`.
    pub fn validate_in(&self, sys: &FiberedSystem) -> Result<()> {
        for p in &self.points {
            sys.check_point(p, "measure atom")?;
        }
        Ok(())
    }
}

/// Cell index of `y` among `m` left-closed cells of `[0, 1)`; the last cell is closed.
#[inline]
pub fn cell_of(y: f64, m: usize) -> usize {
    let c = math::floor(y * m as f64);
    if c < 0.0 {
        0
    } else {
        (c as usize).min(m - 1)
    }
}

/// Default cell count `⌈√n⌉`.
pub fn default_cells(n_atoms: usize) -> usize {
    ceil_sqrt(n_atoms).max(1)
}

/// Equal-weight measure on `T^{burn_in+1}x₀ … T^{burn_in+n}x₀`.
pub fn birkhoff_measure(sys: &FiberedSystem, start: OrbitStart, burn_in: usize, n: usize) -> Result<EmpiricalMeasure> {
    if n == 0 {
        return Err(Error::Argument("birkhoff measure needs n ≥ 1".into()));
    }
    let pts = checked_orbit(sys, start, burn_in, n)?;
    let space = if sys.dim_fiber() == 0 { Space::Base } else { Space::Total };
    EmpiricalMeasure::uniform(pts, space)
}

/// Masses on `m` uniform cells of `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    masses: Vec<f64>,
}

impl GridMeasure {
    /// Normalizes nonnegative masses to total 1.
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::Argument("grid measure needs at least one cell".into()));
        }
        if masses.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(Error::Argument("grid masses must be nonnegative and finite".into()));
        }
        let total = math::sum(masses.iter().copied());
        if !(total > 0.0) {
            return Err(Error::Argument("grid measure has zero total mass".into()));
        }
        Ok(Self { masses: masses.into_iter().map(|m| m / total).collect() })
    }

    pub fn uniform(m: usize) -> Self {
        Self { masses: alloc::vec![1.0 / m.max(1) as f64; m.max(1)] }
    }

    pub fn n_cells(&self) -> usize {
        self.masses.len()
    }
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Density with respect to Lebesgue, cell by cell.
    pub fn density(&self) -> Vec<f64> {
        let m = self.masses.len() as f64;
        self.masses.iter().map(|x| x * m).collect()
    }

    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) / self.masses.len() as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.masses.len()).map(|i| self.center(i)).collect()
    }

    /// Atom measure at the cell centers (cells of zero mass dropped).
    pub fn to_empirical(&self) -> Result<EmpiricalMeasure> {
        let (pts, ws): (Vec<_>, Vec<_>) = self
            .masses
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0.0)
            .map(|(i, &m)| (Point::base(self.center(i)), m))
            .unzip();
        EmpiricalMeasure::new(pts, ws, Space::Base)
    }

    /// `∑ mass_i f(center_i)`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        math::sum(self.masses.iter().enumerate().map(|(i, m)| m * f(self.center(i))))
    }
}

/// One base cell of a disintegration.
#[derive(Debug, Clone, PartialEq)]
pub struct Bin {
    pub center: f64,
    pub mass: f64,
    /// Indices of the atoms of the original measure in this cell.
    pub atoms: Vec<usize>,
    /// Conditional weights, renormalized to sum to 1 (empty for empty cells).
    pub weights: Vec<f64>,
}

/// Atoms bucketed by base cell, with conditional measures per cell.
#[derive(Debug, Clone)]
pub struct Disintegration<'a> {
    source: &'a EmpiricalMeasure,
    pub bins: Vec<Bin>,
}

impl<'a> Disintegration<'a> {
    pub fn n_cells(&self) -> usize {
        self.bins.len()
    }

    pub fn source(&self) -> &'a EmpiricalMeasure {
        self.source
    }

    /// The conditional measure `ξ` of a cell, or `None` if it is empty.
    pub fn conditional(&self, cell: usize) -> Option<EmpiricalMeasure> {
        let bin = &self.bins[cell];
        if bin.atoms.is_empty() {
            return None;
        }
        let pts = bin.atoms.iter().map(|&i| self.source.points[i]).collect();
        Some(EmpiricalMeasure { points: pts, weights: bin.weights.clone(), space: self.source.space })
    }

    /// `ξ_cell(f)` for every cell (`NaN` for empty cells).
    pub fn cell_integrals(&self, f: impl Fn(&Point) -> f64) -> Vec<f64> {
        self.bins
            .iter()
            .map(|b| {
                if b.atoms.is_empty() {
                    f64::NAN
                } else {
                    math::sum(b.atoms.iter().zip(&b.weights).map(|(&i, w)| w * f(&self.source.points[i])))
                }
            })
            .collect()
    }

    /// `∫ ξ_y(f) dμ̌(y)`.
    pub fn integrate(&self, f: impl Fn(&Point) -> f64) -> f64 {
        let vals = self.cell_integrals(f);
        math::sum(self.bins.iter().zip(vals).filter(|(b, _)| b.mass > 0.0).map(|(b, v)| b.mass * v))
    }

    /// `∑ mass(y)·ξ_y` as an atom measure in the original atom order.
    pub fn reassemble(&self) -> EmpiricalMeasure {
        let n = self.source.len();
        let mut weights = alloc::vec![0.0; n];
        for b in &self.bins {
            for (&i, w) in b.atoms.iter().zip(&b.weights) {
                weights[i] = b.mass * w;
            }
        }
        EmpiricalMeasure { points: self.source.points.clone(), weights, space: self.source.space }
    }
}

/// Buckets the atoms of `mu` into `n_cells` uniform base cells.
pub fn disintegrate(mu: &EmpiricalMeasure, n_cells: usize) -> Disintegration<'_> {
    let m = n_cells.max(1);
    let mut bins: Vec<Bin> = (0..m)
        .map(|i| Bin { center: (i as f64 + 0.5) / m as f64, mass: 0.0, atoms: Vec::new(), weights: Vec::new() })
        .collect();
    for (i, p) in mu.points.iter().enumerate() {
        bins[cell_of(p.y, m)].atoms.push(i);
    }
    for b in &mut bins {
        b.mass = math::sum(b.atoms.iter().map(|&i| mu.weights[i]));
        if b.mass > 0.0 {
            b.weights = b.atoms.iter().map(|&i| mu.weights[i] / b.mass).collect();
        }
    }
    Disintegration { source: mu, bins }
}

/// Atoms grouped into exact fibers: runs of base coordinates within `tol`
/// after sorting. Returns `(representative y, atom indices)` in increasing `y`.
pub fn fibers_of(mu: &EmpiricalMeasure, tol: f64) -> Vec<(f64, Vec<usize>)> {
    let mut order: Vec<usize> = (0..mu.len()).collect();
    order.sort_by(|&a, &b| mu.points[a].y.total_cmp(&mu.points[b].y).then(a.cmp(&b)));
    let mut out: Vec<(f64, Vec<usize>)> = Vec::new();
    for i in order {
        let y = mu.points[i].y;
        match out.last_mut() {
            Some((y0, idx)) if y - *y0 <= tol => idx.push(i),
            _ => out.push((y, alloc::vec![i])),
        }
    }
    // merge across the circle seam 0 ≡ 1
    if out.len() > 1 {
        let first_y = out[0].0;
        let last_y = out[out.len() - 1].0;
        if first_y + 1.0 - last_y <= tol {
            let (_, tail) = out.pop().expect("nonempty");
            out[0].1.extend(tail);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::zoo;

    fn cloud() -> EmpiricalMeasure {
        let pts = (0..40).map(|i| Point::with_fiber1(((i * 7) % 40) as f64 / 40.0, (i as f64).sin())).collect();
        EmpiricalMeasure::new(pts, (1..=40).map(|i| i as f64).collect(), Space::Total).unwrap()
    }

    #[test]
    fn normalization_and_errors() {
        let mu = cloud();
        assert!((mu.total_mass() - 1.0).abs() < 1e-12);
        assert!(EmpiricalMeasure::uniform(Vec::new(), Space::Base).is_err());
        assert!(EmpiricalMeasure::new(alloc::vec![Point::base(0.1)], alloc::vec![-1.0], Space::Base).is_err());
    }

    #[test]
    fn disintegration_reassembles_exactly() {
        let mu = cloud();
        for m in [1, 3, 7, 64] {
            let d = disintegrate(&mu, m);
            let masses: f64 = d.bins.iter().map(|b| b.mass).sum();
            assert!((masses - 1.0).abs() < 1e-12);
            let back = d.reassemble();
            for (a, b) in back.weights().iter().zip(mu.weights()) {
                assert!((a - b).abs() < 1e-15);
            }
            let f = |p: &Point| p.z[0] + p.y * p.y;
            assert!((d.integrate(f) - mu.integrate(f)).abs() < 1e-12);
            let cm = mu.cell_masses(m);
            for (b, c) in d.bins.iter().zip(&cm) {
                assert!((b.mass - c).abs() < 1e-15);
            }
        }
        let one = disintegrate(&mu, 1);
        assert_eq!(one.conditional(0).unwrap(), mu);
    }

    #[test]
    fn boundary_atoms_go_right() {
        assert_eq!(cell_of(0.25, 4), 1);
        assert_eq!(cell_of(1.0, 4), 3);
        assert_eq!(cell_of(0.0, 4), 0);
    }

    #[test]
    fn product_measure_cells() {
        let mu = EmpiricalMeasure::base_grid(400).unwrap().lift_by(|y| Point::with_fiber1(y, 0.0));
        let d = disintegrate(&mu, 4);
        for b in &d.bins {
            assert!((b.mass - 0.25).abs() < 1e-12);
            assert!(b.atoms.iter().all(|&i| mu.points()[i].z[0] == 0.0));
        }
    }

    #[test]
    fn birkhoff_examples() {
        let sys = zoo::doubling();
        let dyadic = birkhoff_measure(&sys, OrbitStart::Point(Point::base(0.375)), 0, 50).unwrap();
        assert!(dyadic.points()[5..].iter().all(|p| p.y == 0.0));
        let generic = birkhoff_measure(&sys, OrbitStart::Random { seed: 11 }, 100, 100_000).unwrap();
        assert!((generic.integrate(|p| p.y) - 0.5).abs() < 0.01);
        let one = birkhoff_measure(&sys, OrbitStart::Point(Point::base(0.1)), 3, 1).unwrap();
        assert_eq!(one.len(), 1);
        assert!((one.points()[0].y - sys.iterate(&Point::base(0.1), 4).y).abs() < 1e-15);
    }

    #[test]
    fn fibers_group_equal_base_points() {
        let pts = alloc::vec![Point::with_fiber1(0.5, 0.1), Point::with_fiber1(0.2, 0.0), Point::with_fiber1(0.5, -0.1), Point::with_fiber1(1.0 - 1e-12, 0.3), Point::with_fiber1(0.0, 0.2)];
        let mu = EmpiricalMeasure::uniform(pts, Space::Total).unwrap();
        let f = fibers_of(&mu, 1e-9);
        assert_eq!(f.len(), 3);
        assert_eq!(f[0].1.len(), 2);
    }
}
