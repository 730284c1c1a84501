//! `W^μ̌(μ, ν) = ∫ W(ξ_y, ζ_y) dμ̌(y)`: transport constrained to fibers.

use alloc::format;
use alloc::vec::Vec;

use super::simplex::{transport_simplex, EXACT_MAX_ATOMS};
use crate::error::{Error, Result};
use crate::geometry::{Metric, Point};
use crate::math;
use crate::measures::{default_cells, disintegrate, fibers_of, EmpiricalMeasure};
use crate::par;

/// How atoms are grouped into fibers.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum FiberBinning {
    /// Exact fibers: atoms whose base coordinates agree within `tol`.
    /// Both measures must have the same set of fibers.
    Atoms { tol: f64 },
    /// `m` uniform base cells; transport inside a cell uses the full metric.
    Cells(usize),
    /// Exact fibers when both measures share their base atoms, otherwise
    /// `⌈√n⌉` cells.
    #[default]
    Auto,
}


/// Default tolerance for grouping atoms into exact fibers.
pub const FIBER_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerticalOptions {
    pub binning: FiberBinning,
    /// Allowed gap between the two base masses of a fiber or cell.
    pub marginal_tol: f64,
    /// Average the two base masses instead of failing when they differ.
    pub rebalance: bool,
}

impl Default for VerticalOptions {
    fn default() -> Self {
        Self { binning: FiberBinning::Auto, marginal_tol: 1e-9, rebalance: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerticalReport {
    pub distance: f64,
    /// Binning actually used (`Auto` resolved).
    pub binning: FiberBinning,
    /// Number of fibers or cells carrying mass.
    pub fibers: usize,
    /// Cells where exactly one conditional was empty (charged mass × diameter).
    pub empty_mismatch: usize,
    /// Cells where both conditionals were empty.
    pub empty_excluded: usize,
    /// Half the L¹ gap between base masses when rebalancing.
    pub rebalanced_mass: f64,
    pub worst_gap: f64,
    pub worst_cell: usize,
}

struct Group<'a> {
    pts_a: Vec<&'a Point>,
    wa: Vec<f64>,
    pts_b: Vec<&'a Point>,
    wb: Vec<f64>,
}

fn group_distance(g: &Group<'_>, metric: &Metric) -> Result<f64> {
    let (na, nb) = (g.pts_a.len(), g.pts_b.len());
    let sa = math::sum(g.wa.iter().copied());
    let sb = math::sum(g.wb.iter().copied());
    if na == 1 {
        return Ok(math::sum(g.pts_b.iter().zip(&g.wb).map(|(q, w)| w / sb * metric.distance(g.pts_a[0], q))));
    }
    if nb == 1 {
        return Ok(math::sum(g.pts_a.iter().zip(&g.wa).map(|(p, w)| w / sa * metric.distance(p, g.pts_b[0]))));
    }
    if na > EXACT_MAX_ATOMS || nb > EXACT_MAX_ATOMS {
        return Err(Error::Argument(format!("fiber with {na}×{nb} atoms exceeds the exact solver limit")));
    }
    let wa: Vec<f64> = g.wa.iter().map(|w| w / sa).collect();
    let wb: Vec<f64> = g.wb.iter().map(|w| w / sb).collect();
    let sol = transport_simplex(&wa, &wb, |i, j| metric.distance(g.pts_a[i], g.pts_b[j]))?;
    Ok(sol.coupling.cost)
}

fn same_fibers(a: &[(f64, Vec<usize>)], b: &[(f64, Vec<usize>)], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x.0 - y.0).abs() <= tol)
}

/// Fiber-constrained Wasserstein distance between two measures on `X`.
///
/// The base marginals must agree fiber by fiber (or cell by cell) within
/// `marginal_tol`; otherwise a precondition error names the worst cell,
/// unless `rebalance` is set.
pub fn vertical_wasserstein(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    metric: &Metric,
    opts: &VerticalOptions,
) -> Result<VerticalReport> {
    let mut binning = opts.binning;
    let mut atom_groups = None;
    if let FiberBinning::Auto | FiberBinning::Atoms { .. } = binning {
        let tol = match binning {
            FiberBinning::Atoms { tol } => tol,
            _ => FIBER_TOL,
        };
        let fa = fibers_of(mu, tol);
        let fb = fibers_of(nu, tol);
        if same_fibers(&fa, &fb, tol) {
            binning = FiberBinning::Atoms { tol };
            atom_groups = Some((fa, fb));
        } else if let FiberBinning::Atoms { .. } = binning {
            let worst = fa.len().min(fb.len());
            return Err(Error::Precondition {
                message: format!("base supports differ: {} fibers vs {} fibers", fa.len(), fb.len()),
                worst_cell: worst,
                gap: f64::NAN,
            });
        } else {
            binning = FiberBinning::Cells(default_cells(mu.len().max(nu.len())));
        }
    }

    // (mass_a, mass_b, group or None for an empty side)
    let mut groups: Vec<(f64, f64, Option<Group<'_>>)> = Vec::new();
    let (pa, pb) = (mu.points(), nu.points());
    let (wa, wb) = (mu.weights(), nu.weights());
    match (binning, atom_groups) {
        (FiberBinning::Atoms { .. }, Some((fa, fb))) => {
            for ((_, ia), (_, ib)) in fa.iter().zip(&fb) {
                let g = Group {
                    pts_a: ia.iter().map(|&i| &pa[i]).collect(),
                    wa: ia.iter().map(|&i| wa[i]).collect(),
                    pts_b: ib.iter().map(|&i| &pb[i]).collect(),
                    wb: ib.iter().map(|&i| wb[i]).collect(),
                };
                let ma = math::sum(g.wa.iter().copied());
                let mb = math::sum(g.wb.iter().copied());
                groups.push((ma, mb, Some(g)));
            }
        }
        (FiberBinning::Cells(m), _) => {
            let da = disintegrate(mu, m);
            let db = disintegrate(nu, m);
            for (ba, bb) in da.bins.iter().zip(&db.bins) {
                let g = if ba.atoms.is_empty() || bb.atoms.is_empty() {
                    None
                } else {
                    Some(Group {
                        pts_a: ba.atoms.iter().map(|&i| &pa[i]).collect(),
                        wa: ba.weights.clone(),
                        pts_b: bb.atoms.iter().map(|&i| &pb[i]).collect(),
                        wb: bb.weights.clone(),
                    })
                };
                groups.push((ba.mass, bb.mass, g));
            }
        }
        _ => unreachable!("binning resolved above"),
    }

    let mut worst = (0usize, 0.0f64);
    let mut rebalanced = 0.0;
    for (k, (ma, mb, _)) in groups.iter().enumerate() {
        let gap = (ma - mb).abs();
        rebalanced += 0.5 * gap;
        if gap > worst.1 {
            worst = (k, gap);
        }
    }
    if worst.1 > opts.marginal_tol && !opts.rebalance {
        return Err(Error::Precondition {
            message: "base marginals differ; vertical transport needs equal projections".into(),
            worst_cell: worst.0,
            gap: worst.1,
        });
    }

    let per_group = par::map_range(groups.len(), |k| {
        let (ma, mb, g) = &groups[k];
        let mass = if opts.rebalance { 0.5 * (ma + mb) } else { *ma };
        match g {
            Some(g) => group_distance(g, metric).map(|d| (mass * d, 0u8)),
            None if *ma == 0.0 && *mb == 0.0 => Ok((0.0, 2u8)),
            // one side empty: charge the full (normalized) diameter
            None => Ok((mass, 1u8)),
        }
    });
    let mut terms = Vec::with_capacity(per_group.len());
    let (mut mismatch, mut excluded) = (0usize, 0usize);
    for r in per_group {
        let (t, flag) = r?;
        terms.push(t);
        match flag {
            1 => mismatch += 1,
            2 => excluded += 1,
            _ => {}
        }
    }
    Ok(VerticalReport {
        distance: math::sum(terms),
        binning,
        fibers: groups.len() - excluded,
        empty_mismatch: mismatch,
        empty_excluded: excluded,
        rebalanced_mass: if opts.rebalance { rebalanced } else { 0.0 },
        worst_gap: worst.1,
        worst_cell: worst.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BaseMetric, FiberDomain};
    use crate::measures::Space;

    fn metric() -> Metric {
        Metric::new(BaseMetric::Circle, &FiberDomain::Interval { lo: -1.0, hi: 1.0 })
    }

    #[test]
    fn two_fiber_example() {
        let h = 0.6;
        let mu = EmpiricalMeasure::uniform(alloc::vec![Point::with_fiber1(0.0, 0.0), Point::with_fiber1(0.5, 0.3)], Space::Total).unwrap();
        let nu = EmpiricalMeasure::uniform(alloc::vec![Point::with_fiber1(0.0, h), Point::with_fiber1(0.5, 0.3)], Space::Total).unwrap();
        let m = metric();
        let r = vertical_wasserstein(&mu, &nu, &m, &VerticalOptions::default()).unwrap();
        assert!((r.distance - 0.5 * m.fiber_distance([0.0, 0.0], [h, 0.0])).abs() < 1e-15);
        assert!(matches!(r.binning, FiberBinning::Atoms { .. }));
        let same = vertical_wasserstein(&mu, &mu, &m, &VerticalOptions::default()).unwrap();
        assert_eq!(same.distance, 0.0);
    }

    #[test]
    fn different_marginals_are_rejected() {
        let mu = EmpiricalMeasure::uniform(alloc::vec![Point::with_fiber1(0.1, 0.0), Point::with_fiber1(0.6, 0.0)], Space::Total).unwrap();
        let nu = EmpiricalMeasure::new(alloc::vec![Point::with_fiber1(0.1, 0.0), Point::with_fiber1(0.6, 0.0)], alloc::vec![0.3, 0.7], Space::Total).unwrap();
        let opts = VerticalOptions { binning: FiberBinning::Cells(2), ..Default::default() };
        match vertical_wasserstein(&mu, &nu, &metric(), &opts) {
            Err(Error::Precondition { worst_cell, gap, .. }) => {
                assert!(worst_cell < 2);
                assert!((gap - 0.2).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        let loose = VerticalOptions { rebalance: true, ..opts };
        let r = vertical_wasserstein(&mu, &nu, &metric(), &loose).unwrap();
        assert!((r.rebalanced_mass - 0.2).abs() < 1e-12);
    }

    #[test]
    fn one_sided_empty_cells_are_charged() {
        let mu = EmpiricalMeasure::uniform(alloc::vec![Point::with_fiber1(0.1, 0.0)], Space::Total).unwrap();
        let nu = EmpiricalMeasure::uniform(alloc::vec![Point::with_fiber1(0.9, 0.0)], Space::Total).unwrap();
        let opts = VerticalOptions { binning: FiberBinning::Cells(2), marginal_tol: 1e-9, rebalance: true };
        let r = vertical_wasserstein(&mu, &nu, &metric(), &opts).unwrap();
        assert_eq!(r.empty_mismatch, 2);
        assert!((r.distance - 1.0).abs() < 1e-15);
    }
}
