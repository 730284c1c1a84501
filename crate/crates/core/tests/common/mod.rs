#![allow(dead_code)]

/// Minimum cost over all vertices of the transport polytope of `a` and `b`.
///
/// A vertex is supported on a forest of cells, and for generic marginals on a
/// spanning tree of the bipartite graph on rows and columns. Each spanning
/// tree is generated exactly once through its Prüfer elimination order
/// (repeatedly remove the leaf with the smallest label), the leaf flow being
/// the leaf's residual mass. Trees that would need a negative flow are
/// discarded as soon as that happens, so the enumeration visits exactly the
/// feasible bases.
pub fn brute_force_ot(a: &[f64], b: &[f64], cost: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let m = b.len();
    let total = n + m;
    let mut st = State {
        n,
        total,
        residual: a.iter().chain(b).copied().collect(),
        active: vec![true; total],
        required: vec![false; total],
        count: vec![0; total],
        best: f64::INFINITY,
        vertices: 0,
    };
    st.rec(cost, 0.0, total);
    assert!(st.vertices > 0);
    st.best
}

/// Number of feasible bases visited by [`brute_force_ot`].
pub fn vertex_count(a: &[f64], b: &[f64]) -> usize {
    let cost: Vec<Vec<f64>> = vec![vec![0.0; b.len()]; a.len()];
    let total = a.len() + b.len();
    let mut st = State {
        n: a.len(),
        total,
        residual: a.iter().chain(b).copied().collect(),
        active: vec![true; total],
        required: vec![false; total],
        count: vec![0; total],
        best: f64::INFINITY,
        vertices: 0,
    };
    st.rec(&cost, 0.0, total);
    st.vertices
}

struct State {
    n: usize,
    total: usize,
    residual: Vec<f64>,
    active: Vec<bool>,
    required: Vec<bool>,
    count: Vec<u32>,
    best: f64,
    vertices: usize,
}

const NEG_TOL: f64 = -1e-14;

impl State {
    fn is_row(&self, k: usize) -> bool {
        k < self.n
    }

    fn edge_cost(&self, cost: &[Vec<f64>], u: usize, v: usize) -> f64 {
        if self.is_row(u) {
            cost[u][v - self.n]
        } else {
            cost[v][u - self.n]
        }
    }

    fn rec(&mut self, cost: &[Vec<f64>], acc: f64, remaining: usize) {
        if remaining == 2 {
            let mut it = (0..self.total).filter(|&k| self.active[k]);
            let (u, v) = (it.next().unwrap(), it.next().unwrap());
            if self.is_row(u) == self.is_row(v) {
                return;
            }
            let flow = self.residual[u];
            if flow < NEG_TOL || (self.residual[u] - self.residual[v]).abs() > 1e-12 {
                return;
            }
            for k in [u, v] {
                if self.required[k] && self.count[k] + 1 < 2 {
                    return;
                }
            }
            self.vertices += 1;
            let c = acc + flow.max(0.0) * self.edge_cost(cost, u, v);
            if c < self.best {
                self.best = c;
            }
            return;
        }
        for leaf in 0..self.total {
            if !self.active[leaf] {
                continue;
            }
            // the leaf's final edge is its only remaining one
            if self.required[leaf] && self.count[leaf] + 1 < 2 {
                continue;
            }
            // every smaller active line must keep degree ≥ 2 from this step on
            let newly: Vec<(usize, bool, u32)> =
                (0..leaf).filter(|&k| self.active[k]).map(|k| (k, self.required[k], self.count[k])).collect();
            for &(k, _, _) in &newly {
                self.required[k] = true;
                self.count[k] = 0;
            }
            let flow = self.residual[leaf];
            let opposite: Vec<usize> = (0..self.total)
                .filter(|&p| self.active[p] && p != leaf && self.is_row(p) != self.is_row(leaf))
                .collect();
            for p in opposite {
                let rp = self.residual[p] - flow;
                if rp < NEG_TOL {
                    continue;
                }
                let old = self.residual[p];
                self.residual[p] = rp;
                self.active[leaf] = false;
                self.count[p] += 1;
                let c = acc + flow * self.edge_cost(cost, leaf, p);
                self.rec(cost, c, remaining - 1);
                self.count[p] -= 1;
                self.active[leaf] = true;
                self.residual[p] = old;
            }
            for &(k, req, c) in &newly {
                self.required[k] = req;
                self.count[k] = c;
            }
        }
    }
}

/// Random probability vector with entries bounded away from 0.
pub fn random_weights(rng: &mut impl rand::Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| 0.05 + rng.gen::<f64>()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}
