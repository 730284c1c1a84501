mod common;

use std::time::Instant;

use common::{brute_force_ot, random_weights};
use fiberlift::geometry::{BaseMetric, FiberDomain, Metric, Point};
use fiberlift::rng::{stream, Rng};
use fiberlift::transport::{
    transport_simplex, vertical_wasserstein, wasserstein_1d_values, wasserstein_discrete, LineMetric, Method, SinkhornOptions,
    VerticalOptions,
};
use fiberlift::{EmpiricalMeasure, Space};

#[test]
fn simplex_matches_vertex_enumeration() {
    let start = Instant::now();
    for inst in 0..50 {
        let mut r = stream(101, inst, 0);
        let n = r.gen_range(1..=6);
        let m = r.gen_range(1..=6);
        let a = random_weights(&mut r, n);
        let b = random_weights(&mut r, m);
        let cost: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| r.gen::<f64>()).collect()).collect();
        let exact = transport_simplex(&a, &b, |i, j| cost[i][j]).unwrap();
        let brute = brute_force_ot(&a, &b, &cost);
        assert!((exact.coupling.cost - brute).abs() < 1e-9, "instance {inst}: {} vs {brute}", exact.coupling.cost);
        assert!(exact.coupling.marginal_error(&a, &b) < 1e-9);
    }
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn simplex_matches_quantile_formula() {
    let metric = Metric::base_only(BaseMetric::Interval);
    for inst in 0..100 {
        let mut r = stream(7, inst, 0);
        let n = r.gen_range(1..=50);
        let m = r.gen_range(1..=50);
        let xs: Vec<f64> = (0..n).map(|_| r.gen()).collect();
        let ys: Vec<f64> = (0..m).map(|_| r.gen()).collect();
        let a = random_weights(&mut r, n);
        let b = random_weights(&mut r, m);
        let mu = EmpiricalMeasure::new(xs.iter().map(|&x| Point::base(x)).collect(), a.clone(), Space::Base).unwrap();
        let nu = EmpiricalMeasure::new(ys.iter().map(|&y| Point::base(y)).collect(), b.clone(), Space::Base).unwrap();
        let (w, plan, _) = wasserstein_discrete(&mu, &nu, &metric, Method::Exact).unwrap();
        let q = wasserstein_1d_values(&xs, &a, &ys, &b, LineMetric::Interval).unwrap();
        assert!((w - q).abs() < 1e-9, "{w} vs {q}");
        assert!((plan.evaluate(|i, j| (xs[i] - ys[j]).abs()) - w).abs() < 1e-9);
        // circle version against the circle metric
        let circ = Metric::base_only(BaseMetric::Circle);
        let (wc, _, _) = wasserstein_discrete(&mu, &nu, &circ, Method::Exact).unwrap();
        let qc = wasserstein_1d_values(&xs, &a, &ys, &b, LineMetric::Circle).unwrap();
        assert!((wc - qc).abs() < 1e-9, "circle {wc} vs {qc}");
    }
}

#[test]
fn sinkhorn_close_to_exact() {
    let dom = FiberDomain::Disk { radius: 1.0 };
    let metric = Metric::new(BaseMetric::Circle, &dom);
    for inst in 0..10 {
        let mut r = stream(55, inst, 0);
        let pts = |r: &mut fiberlift::rng::Stream| (0..20).map(|_| Point::new(r.gen(), dom.sample(r))).collect::<Vec<_>>();
        let mu = EmpiricalMeasure::new(pts(&mut r), random_weights(&mut r, 20), Space::Total).unwrap();
        let nu = EmpiricalMeasure::new(pts(&mut r), random_weights(&mut r, 20), Space::Total).unwrap();
        let exact = wasserstein_discrete(&mu, &nu, &metric, Method::Exact).unwrap().0;
        let (s, _, info) = wasserstein_discrete(&mu, &nu, &metric, Method::Sinkhorn(SinkhornOptions::default())).unwrap();
        assert!((s - exact).abs() < 1e-3, "{s} vs {exact}");
        assert!(s >= exact - 1e-9);
        assert!(info.marginal_violation < 1e-8);
    }
}

#[test]
fn larger_instance_is_fast() {
    let dom = FiberDomain::Disk { radius: 1.0 };
    let metric = Metric::new(BaseMetric::Circle, &dom);
    let mut r = stream(3, 0, 0);
    let n = 800;
    let mu = EmpiricalMeasure::uniform((0..n).map(|_| Point::new(r.gen(), dom.sample(&mut r))).collect(), Space::Total).unwrap();
    let nu = EmpiricalMeasure::uniform((0..n).map(|_| Point::new(r.gen(), dom.sample(&mut r))).collect(), Space::Total).unwrap();
    let t = Instant::now();
    let (w, plan, info) = wasserstein_discrete(&mu, &nu, &metric, Method::Exact).unwrap();
    eprintln!("n={n} W={w} pivots={} in {:?}", info.iterations, t.elapsed());
    assert!(plan.marginal_error(mu.weights(), nu.weights()) < 1e-9);
}

#[test]
fn vertical_dominates_full_transport() {
    let dom = FiberDomain::Interval { lo: -1.0, hi: 1.0 };
    let metric = Metric::new(BaseMetric::Circle, &dom);
    for inst in 0..100 {
        let mut r = stream(9, inst, 0);
        let fibers = r.gen_range(1..=8);
        let ys: Vec<f64> = (0..fibers).map(|_| r.gen()).collect();
        let base_w = random_weights(&mut r, fibers);
        let make = |r: &mut fiberlift::rng::Stream| {
            let mut pts = Vec::new();
            let mut ws = Vec::new();
            for (k, &y) in ys.iter().enumerate() {
                let c = r.gen_range(1..=4);
                let cw = random_weights(r, c);
                for w in cw {
                    pts.push(Point::with_fiber1(y, dom.sample(r)[0]));
                    ws.push(base_w[k] * w);
                }
            }
            EmpiricalMeasure::new(pts, ws, Space::Total).unwrap()
        };
        let mu = make(&mut r);
        let nu = make(&mut r);
        let w = wasserstein_discrete(&mu, &nu, &metric, Method::Exact).unwrap().0;
        let v = vertical_wasserstein(&mu, &nu, &metric, &VerticalOptions::default()).unwrap();
        assert!(w <= v.distance + 1e-9, "{w} > {}", v.distance);
    }
}

#[test]
fn enumeration_counts_bases_of_small_polytopes() {
    // 2×2 with unequal masses: exactly two vertices
    assert_eq!(common::vertex_count(&[0.3, 0.7], &[0.6, 0.4]), 2);
    // 1×m: a single point
    assert_eq!(common::vertex_count(&[1.0], &[0.2, 0.3, 0.5]), 1);
}

#[test]
fn enumeration_matches_subset_search() {
    // count feasible spanning-tree bases by checking every (n+m-1)-subset of cells
    fn subset_count(a: &[f64], b: &[f64]) -> usize {
        let (n, m) = (a.len(), b.len());
        let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).collect();
        let k = n + m - 1;
        let mut count = 0;
        for mask in 0u32..(1 << cells.len()) {
            if mask.count_ones() as usize != k {
                continue;
            }
            let chosen: Vec<(usize, usize)> = cells.iter().enumerate().filter(|(c, _)| mask >> c & 1 == 1).map(|(_, &x)| x).collect();
            // peel leaves to solve flows; failure means a cycle
            let mut ra: Vec<f64> = a.to_vec();
            let mut rb: Vec<f64> = b.to_vec();
            let mut left = chosen.clone();
            let mut ok = true;
            while !left.is_empty() {
                let deg = |line: usize, row: bool, left: &[(usize, usize)]| left.iter().filter(|c| if row { c.0 == line } else { c.1 == line }).count();
                let pos = left.iter().position(|&(i, j)| deg(i, true, &left) == 1 || deg(j, false, &left) == 1);
                let Some(pos) = pos else { ok = false; break };
                let (i, j) = left.remove(pos);
                let x = if deg(i, true, &left) == 0 && left.iter().all(|c| c.0 != i) && (deg(j, false, &left) > 0 || ra[i] <= rb[j]) { ra[i] } else { rb[j] };
                ra[i] -= x;
                rb[j] -= x;
                if x < -1e-14 || ra[i] < -1e-14 || rb[j] < -1e-14 {
                    ok = false;
                    break;
                }
            }
            if ok && ra.iter().chain(&rb).all(|v| v.abs() < 1e-12) {
                count += 1;
            }
        }
        count
    }
    for inst in 0..5 {
        let mut r = stream(77, inst, 0);
        let (n, m) = (3 + (inst as usize % 2), 3 + (inst as usize / 2) % 2);
        let a = random_weights(&mut r, n);
        let b = random_weights(&mut r, m);
        assert_eq!(common::vertex_count(&a, &b), subset_count(&a, &b), "{n}x{m}");
    }
}
