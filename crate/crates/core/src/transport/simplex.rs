//! Exact transportation simplex on a spanning-tree basis.
//!
//! Rows and columns are the nodes of a bipartite graph; a basis is a spanning
//! tree with `n + m − 1` cells. The initial basis comes from the northwest
//! corner rule, node potentials are recomputed by a tree traversal after every
//! pivot, and entering cells are priced by block search with a rotating
//! starting point.

use alloc::format;
use alloc::vec::Vec;

use super::Coupling;
use crate::error::{Error, Result};
use crate::math;

/// Largest number of atoms per side accepted by the exact solver.
pub const EXACT_MAX_ATOMS: usize = 5000;

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexSolution {
    pub coupling: Coupling,
    pub pivots: usize,
}

struct Tree {
    n: usize,
    cells: Vec<(usize, usize, f64)>,
    adj: Vec<Vec<usize>>,
    pot: Vec<f64>,
    parent_edge: Vec<usize>,
    depth: Vec<usize>,
    stack: Vec<usize>,
}

const NONE: usize = usize::MAX;

impl Tree {
    fn other(&self, e: usize, node: usize) -> usize {
        let (i, j, _) = self.cells[e];
        if node == i {
            self.n + j
        } else {
            i
        }
    }

    fn recompute<C: Fn(usize, usize) -> f64>(&mut self, cost: &C) {
        for v in self.parent_edge.iter_mut() {
            *v = NONE;
        }
        self.pot[0] = 0.0;
        self.depth[0] = 0;
        self.stack.clear();
        self.stack.push(0);
        let mut seen = 1usize;
        let total = self.pot.len();
        let mut visited = alloc::vec![false; total];
        visited[0] = true;
        while let Some(u) = self.stack.pop() {
            for k in 0..self.adj[u].len() {
                let e = self.adj[u][k];
                let v = self.other(e, u);
                if visited[v] {
                    continue;
                }
                visited[v] = true;
                seen += 1;
                let (i, j, _) = self.cells[e];
                let c = cost(i, j);
                // u_i + v_j = c_ij
                self.pot[v] = c - self.pot[u];
                self.parent_edge[v] = e;
                self.depth[v] = self.depth[u] + 1;
                self.stack.push(v);
            }
        }
        debug_assert_eq!(seen, total, "basis is not a spanning tree");
    }
}

/// Solves `min ∑ x_ij c(i, j)` over couplings of `a` and `b`.
///
/// `b` is rescaled to the total mass of `a` before solving.
pub fn transport_simplex<C: Fn(usize, usize) -> f64>(a: &[f64], b: &[f64], cost: C) -> Result<SimplexSolution> {
    let (n, m) = (a.len(), b.len());
    if n.saturating_mul(m) <= DENSE_CACHE_LIMIT && n * m > 0 {
        let dense: Vec<f64> = (0..n * m).map(|k| cost(k / m, k % m)).collect();
        return solve(a, b, |i: usize, j: usize| dense[i * m + j]);
    }
    solve(a, b, cost)
}

/// Cost matrices up to this many entries are evaluated once and cached.
const DENSE_CACHE_LIMIT: usize = 16 << 20;

fn solve<C: Fn(usize, usize) -> f64>(a: &[f64], b: &[f64], cost: C) -> Result<SimplexSolution> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return Err(Error::Argument("empty marginal".into()));
    }
    if a.iter().chain(b).any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::Argument("marginals must be nonnegative and finite".into()));
    }
    let sa = math::sum(a.iter().copied());
    let sb = math::sum(b.iter().copied());
    if !(sa > 0.0 && sb > 0.0) {
        return Err(Error::Argument("marginals must have positive mass".into()));
    }
    let b: Vec<f64> = b.iter().map(|w| w * sa / sb).collect();

    // northwest corner: a staircase path, hence a spanning tree
    let mut cells = Vec::with_capacity(n + m - 1);
    let (mut i, mut j) = (0usize, 0usize);
    let (mut ra, mut rb) = (a[0], b[0]);
    loop {
        let x = ra.min(rb).max(0.0);
        let last = i == n - 1 && j == m - 1;
        cells.push((i, j, if last { ra.max(rb).max(0.0) } else { x }));
        if last {
            break;
        }
        ra -= x;
        rb -= x;
        if (ra <= rb && i < n - 1) || j == m - 1 {
            i += 1;
            ra = a[i];
        } else {
            j += 1;
            rb = b[j];
        }
    }
    let total = n + m;
    let mut adj = alloc::vec![Vec::new(); total];
    for (e, &(i, j, _)) in cells.iter().enumerate() {
        adj[i].push(e);
        adj[n + j].push(e);
    }
    let mut tree = Tree {
        n,
        cells,
        adj,
        pot: alloc::vec![0.0; total],
        parent_edge: alloc::vec![NONE; total],
        depth: alloc::vec![0; total],
        stack: Vec::new(),
    };
    tree.recompute(&cost);

    let cells_total = n * m;
    let block = math::ceil_sqrt(cells_total).max(32).min(cells_total);
    let max_pivots = 1000 * total + 100_000;
    let tol = 1e-12;
    let mut cursor = 0usize;
    let mut pivots = 0usize;
    let mut path_a: Vec<usize> = Vec::new();
    let mut path_b: Vec<usize> = Vec::new();
    let mut cycle: Vec<(usize, bool)> = Vec::new();

    loop {
        // block pricing
        let mut best = (0.0f64, NONE, NONE);
        let mut scanned = 0usize;
        while scanned < cells_total {
            let stop = (scanned + block).min(cells_total);
            while scanned < stop {
                let idx = cursor;
                cursor += 1;
                if cursor == cells_total {
                    cursor = 0;
                }
                scanned += 1;
                let (ii, jj) = (idx / m, idx % m);
                let rc = cost(ii, jj) - tree.pot[ii] - tree.pot[n + jj];
                if rc < best.0 {
                    best = (rc, ii, jj);
                }
            }
            if best.0 < -tol {
                break;
            }
        }
        if best.0 >= -tol {
            break;
        }
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::Convergence { method: "transportation simplex", residual: -best.0, iterations: pivots });
        }
        let (_, ei, ej) = best;

        // tree path between row ei and column ej
        path_a.clear();
        path_b.clear();
        let (mut u, mut v) = (ei, n + ej);
        while tree.depth[u] > tree.depth[v] {
            let e = tree.parent_edge[u];
            path_a.push(e);
            u = tree.other(e, u);
        }
        while tree.depth[v] > tree.depth[u] {
            let e = tree.parent_edge[v];
            path_b.push(e);
            v = tree.other(e, v);
        }
        while u != v {
            let e = tree.parent_edge[u];
            path_a.push(e);
            u = tree.other(e, u);
            let f = tree.parent_edge[v];
            path_b.push(f);
            v = tree.other(f, v);
        }
        // cycle in traversal order from the apex: apex → row ei, entering, column ej → apex.
        // Signs alternate starting with − on the edge at column ej.
        cycle.clear();
        let kb = path_b.len();
        for (t, &e) in path_a.iter().rev().enumerate() {
            // path_a[ka-1-t] sits at position kb + t counted from column ej
            let pos = kb + t;
            cycle.push((e, pos % 2 == 1));
        }
        cycle.push((NONE, true));
        for (t, &e) in path_b.iter().enumerate() {
            cycle.push((e, t % 2 == 1));
        }
        // pos even ⇒ minus edge
        let mut theta = f64::INFINITY;
        let mut leaving = NONE;
        for &(e, plus) in &cycle {
            if e == NONE || plus {
                continue;
            }
            let f = tree.cells[e].2;
            if f <= theta {
                theta = f;
                leaving = e;
            }
        }
        debug_assert!(leaving != NONE);
        let theta = theta.max(0.0);
        for &(e, plus) in &cycle {
            if e == NONE {
                continue;
            }
            let c = &mut tree.cells[e].2;
            if plus {
                *c += theta;
            } else {
                *c = (*c - theta).max(0.0);
            }
        }
        // swap leaving cell for entering cell
        let (li, lj, _) = tree.cells[leaving];
        tree.adj[li].retain(|&x| x != leaving);
        tree.adj[n + lj].retain(|&x| x != leaving);
        tree.cells[leaving] = (ei, ej, theta);
        tree.adj[ei].push(leaving);
        tree.adj[n + ej].push(leaving);
        tree.recompute(&cost);
    }

    let mut plan: Vec<(usize, usize, f64)> = tree.cells.iter().copied().filter(|c| c.2 > 0.0).collect();
    plan.sort_by_key(|p| (p.0, p.1));
    let cost_total = math::sum(plan.iter().map(|&(i, j, x)| x * cost(i, j)));
    if !cost_total.is_finite() {
        return Err(Error::Argument(format!("non-finite transport cost {cost_total}")));
    }
    Ok(SimplexSolution { coupling: Coupling { n_rows: n, n_cols: m, plan, cost: cost_total }, pivots })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_example() {
        let xs: [f64; 2] = [0.0, 0.5];
        let ys = [0.5, 1.0];
        let sol = transport_simplex(&[0.5, 0.5], &[0.5, 0.5], |i, j| (xs[i] - ys[j]).abs()).unwrap();
        assert!((sol.coupling.cost - 0.5).abs() < 1e-15);
        assert!(sol.coupling.marginal_error(&[0.5, 0.5], &[0.5, 0.5]) < 1e-15);
    }

    #[test]
    fn identity_has_zero_cost() {
        let xs: [f64; 4] = [0.1, 0.4, 0.9, 0.2];
        let w = [0.1, 0.2, 0.3, 0.4];
        let sol = transport_simplex(&w, &w, |i, j| (xs[i] - xs[j]).abs()).unwrap();
        assert!(sol.coupling.cost.abs() < 1e-15);
    }

    #[test]
    fn rectangular_problem() {
        let sol = transport_simplex(&[1.0], &[0.25, 0.25, 0.5], |_, j| j as f64).unwrap();
        assert!((sol.coupling.cost - 1.25).abs() < 1e-15);
        assert_eq!(sol.coupling.plan.len(), 3);
    }
}
