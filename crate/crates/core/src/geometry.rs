//! Points, fiber domains and the normalized product metric.

use core::fmt;

use crate::math::{self, abs, hypot2, sqrt};
use rand::Rng;

/// Largest supported fiber dimension.
pub const MAX_FIBER_DIM: usize = 2;

/// A point `(y, z)` of `X = Y × Φ`. Base-only points leave `z` at zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub y: f64,
    pub z: [f64; MAX_FIBER_DIM],
}

impl Point {
    pub const fn new(y: f64, z: [f64; MAX_FIBER_DIM]) -> Self {
        Self { y, z }
    }

    pub const fn base(y: f64) -> Self {
        Self { y, z: [0.0; MAX_FIBER_DIM] }
    }

    pub const fn with_fiber1(y: f64, z: f64) -> Self {
        Self { y, z: [z, 0.0] }
    }

    pub fn is_finite(&self) -> bool {
        self.y.is_finite() && self.z.iter().all(|c| c.is_finite())
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(y={}, z=[{}, {}])", self.y, self.z[0], self.z[1])
    }
}

/// Geometry of the base `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BaseMetric {
    /// `Y = ℝ/ℤ` with the arc-length distance (diameter 1/2).
    #[default]
    Circle,
    /// `Y = [0, 1]` with `|y − y′|`.
    Interval,
}

impl BaseMetric {
    #[inline]
    pub fn distance(self, a: f64, b: f64) -> f64 {
        let d = abs(a - b);
        match self {
            BaseMetric::Interval => d,
            BaseMetric::Circle => {
                let d = d - math::floor(d);
                if d > 0.5 {
                    1.0 - d
                } else {
                    d
                }
            }
        }
    }
}

/// The fiber `Φ`: a point, a compact interval or a closed disk centred at 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FiberDomain {
    Trivial,
    Interval { lo: f64, hi: f64 },
    Disk { radius: f64 },
}

impl FiberDomain {
    pub fn dim(&self) -> usize {
        match self {
            FiberDomain::Trivial => 0,
            FiberDomain::Interval { .. } => 1,
            FiberDomain::Disk { .. } => 2,
        }
    }

    /// Euclidean diameter.
    pub fn diameter(&self) -> f64 {
        match *self {
            FiberDomain::Trivial => 0.0,
            FiberDomain::Interval { lo, hi } => hi - lo,
            FiberDomain::Disk { radius } => 2.0 * radius,
        }
    }

    pub fn center(&self) -> [f64; MAX_FIBER_DIM] {
        match *self {
            FiberDomain::Trivial | FiberDomain::Disk { .. } => [0.0; 2],
            FiberDomain::Interval { lo, hi } => [0.5 * (lo + hi), 0.0],
        }
    }

    pub fn contains(&self, z: [f64; MAX_FIBER_DIM], tol: f64) -> bool {
        match *self {
            FiberDomain::Trivial => true,
            FiberDomain::Interval { lo, hi } => z[0] >= lo - tol && z[0] <= hi + tol,
            FiberDomain::Disk { radius } => sqrt(z[0] * z[0] + z[1] * z[1]) <= radius + tol,
        }
    }

    /// Uniform sample from the fiber.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; MAX_FIBER_DIM] {
        match *self {
            FiberDomain::Trivial => [0.0; 2],
            FiberDomain::Interval { lo, hi } => [lo + (hi - lo) * rng.gen::<f64>(), 0.0],
            FiberDomain::Disk { radius } => {
                let r = radius * sqrt(rng.gen::<f64>());
                let t = math::TAU * rng.gen::<f64>();
                [r * math::cos(t), r * math::sin(t)]
            }
        }
    }

    /// Deterministic grid covering the fiber: `k` points for an interval
    /// (endpoints included), a `k × k` lattice clipped to the disk plus `4k`
    /// boundary points for a disk.
    pub fn grid(&self, k: usize) -> alloc::vec::Vec<[f64; MAX_FIBER_DIM]> {
        let k = k.max(1);
        let mut out = alloc::vec::Vec::new();
        match *self {
            FiberDomain::Trivial => out.push([0.0; 2]),
            FiberDomain::Interval { lo, hi } => {
                if k == 1 {
                    out.push([0.5 * (lo + hi), 0.0]);
                } else {
                    for i in 0..k {
                        out.push([lo + (hi - lo) * i as f64 / (k - 1) as f64, 0.0]);
                    }
                }
            }
            FiberDomain::Disk { radius } => {
                if k == 1 {
                    out.push([0.0; 2]);
                    return out;
                }
                for i in 0..k {
                    for j in 0..k {
                        let a = -radius + 2.0 * radius * i as f64 / (k - 1) as f64;
                        let b = -radius + 2.0 * radius * j as f64 / (k - 1) as f64;
                        if a * a + b * b <= radius * radius {
                            out.push([a, b]);
                        }
                    }
                }
                for i in 0..4 * k {
                    let t = math::TAU * i as f64 / (4 * k) as f64;
                    out.push([radius * math::cos(t), radius * math::sin(t)]);
                }
            }
        }
        out
    }

    /// A point on the boundary, used as an alternative section.
    pub fn boundary_point(&self) -> [f64; MAX_FIBER_DIM] {
        match *self {
            FiberDomain::Trivial => [0.0; 2],
            FiberDomain::Interval { hi, .. } => [hi, 0.0],
            FiberDomain::Disk { radius } => [radius, 0.0],
        }
    }
}

/// Product metric `max(d_Y, d_Φ / diam Φ)`; all values lie in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric {
    pub base: BaseMetric,
    /// Euclidean diameter of the fiber used for rescaling (0 for trivial fibers).
    pub fiber_diameter: f64,
}

impl Metric {
    pub fn new(base: BaseMetric, fiber: &FiberDomain) -> Self {
        Self { base, fiber_diameter: fiber.diameter() }
    }

    pub const fn base_only(base: BaseMetric) -> Self {
        Self { base, fiber_diameter: 0.0 }
    }

    #[inline]
    pub fn base_distance(&self, a: f64, b: f64) -> f64 {
        self.base.distance(a, b)
    }

    #[inline]
    pub fn fiber_distance(&self, a: [f64; MAX_FIBER_DIM], b: [f64; MAX_FIBER_DIM]) -> f64 {
        if self.fiber_diameter > 0.0 {
            hypot2(a, b) / self.fiber_diameter
        } else {
            0.0
        }
    }

    #[inline]
    pub fn distance(&self, p: &Point, q: &Point) -> f64 {
        let db = self.base_distance(p.y, q.y);
        let df = self.fiber_distance(p.z, q.z);
        if db > df {
            db
        } else {
            df
        }
    }

    /// Converts a Euclidean fiber length to metric units.
    pub fn fiber_units(&self, euclidean: f64) -> f64 {
        if self.fiber_diameter > 0.0 {
            euclidean / self.fiber_diameter
        } else {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_distance_wraps() {
        let m = BaseMetric::Circle;
        assert!((m.distance(0.05, 0.95) - 0.1).abs() < 1e-15);
        assert!((m.distance(0.0, 0.5) - 0.5).abs() < 1e-15);
        assert_eq!(BaseMetric::Interval.distance(0.0, 1.0), 1.0);
    }

    #[test]
    fn product_metric_is_normalized() {
        let dom = FiberDomain::Disk { radius: 1.0 };
        let m = Metric::new(BaseMetric::Circle, &dom);
        let p = Point::new(0.0, [1.0, 0.0]);
        let q = Point::new(0.5, [-1.0, 0.0]);
        assert_eq!(m.distance(&p, &q), 1.0);
        assert_eq!(m.fiber_units(0.5), 0.25);
    }

    #[test]
    fn disk_grid_stays_inside() {
        let dom = FiberDomain::Disk { radius: 0.7 };
        for z in dom.grid(9) {
            assert!(dom.contains(z, 1e-12));
        }
    }
}
