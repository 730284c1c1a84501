//! Long orbits.
//!
//! Iterating `y ↦ k·y mod 1` in binary floating point loses one digit per
//! step and collapses onto 0 after about 53 steps. For such maps the base
//! coordinate is kept as an integer window of `W` base-`k` digits and a fresh
//! pseudo-random digit is shifted in at every step, which is a genuine orbit
//! of a point that agrees with the start point in its leading digits.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::rng::{self, Stream};
use crate::systems::FiberedSystem;

/// How an orbit is started.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrbitStart {
    /// Plain floating-point iteration from exactly this point.
    Point(Point),
    /// Start near `point`, with the trailing digits of the base coordinate
    /// (below 2⁻⁴⁰) drawn from `seed`, and digit-stream iteration for `y ↦ ky`.
    Extended { point: Point, seed: u64 },
    /// Base point drawn uniformly from `seed`, fiber coordinate from the section.
    Random { seed: u64 },
}

// one per orbit, so the inline generator costs nothing worth boxing
#[allow(clippy::large_enum_variant)]
enum BaseState {
    Float(f64),
    Digits { window: u64, k: u64, top: u64, scale: f64, rng: Stream },
}

/// Iterator over base coordinates `y_0, y_1, …`.
pub struct BaseOrbit<'a> {
    sys: &'a FiberedSystem,
    state: BaseState,
}

fn digits_for(k: u64) -> (u32, u64) {
    let mut w = 0u32;
    let mut pow = 1u64;
    while pow.saturating_mul(k) <= 1u64 << 53 {
        pow *= k;
        w += 1;
    }
    (w, pow)
}

impl<'a> BaseOrbit<'a> {
    pub fn new(sys: &'a FiberedSystem, start: OrbitStart) -> Self {
        let digit = sys.base().digit_base().map(u64::from);
        let state = match (start, digit) {
            (OrbitStart::Point(p), _) => BaseState::Float(p.y),
            (OrbitStart::Extended { point, .. }, None) => BaseState::Float(point.y),
            (OrbitStart::Random { seed }, None) => BaseState::Float(rng::stream(seed, 0, 0).gen::<f64>()),
            (OrbitStart::Extended { point, seed }, Some(k)) => {
                let (_, full) = digits_for(k);
                let mut rng = rng::stream(seed, 0, 1);
                let mut low = 1u64;
                while low < 4096 {
                    low *= k;
                }
                let m = ((point.y.clamp(0.0, 1.0) * full as f64) as u64).min(full - 1);
                let window = (m / low) * low + rng.gen_range(0..low);
                Self::digit_state(k, window, rng)
            }
            (OrbitStart::Random { seed }, Some(k)) => {
                let (_, full) = digits_for(k);
                let mut rng = rng::stream(seed, 0, 1);
                let window = rng.gen_range(0..full);
                Self::digit_state(k, window, rng)
            }
        };
        Self { sys, state }
    }

    fn digit_state(k: u64, window: u64, rng: Stream) -> BaseState {
        let (_, full) = digits_for(k);
        BaseState::Digits { window, k, top: full / k, scale: 1.0 / full as f64, rng }
    }

    #[inline]
    pub fn current(&self) -> f64 {
        match &self.state {
            BaseState::Float(y) => *y,
            BaseState::Digits { window, scale, .. } => *window as f64 * *scale,
        }
    }

    #[inline]
    pub fn advance(&mut self) {
        match &mut self.state {
            BaseState::Float(y) => *y = self.sys.apply_s(*y),
            BaseState::Digits { window, k, top, rng, .. } => {
                *window = (*window % *top) * *k + rng.gen_range(0..*k);
            }
        }
    }
}

impl Iterator for BaseOrbit<'_> {
    type Item = f64;
    fn next(&mut self) -> Option<f64> {
        let y = self.current();
        self.advance();
        Some(y)
    }
}

/// First `n + 1` base coordinates `y_0 … y_n`.
pub fn base_orbit(sys: &FiberedSystem, start: OrbitStart, n: usize) -> Vec<f64> {
    BaseOrbit::new(sys, start).take(n + 1).collect()
}

/// Iterator over points `x_0, x_1, …` of `X`.
pub struct Trajectory<'a> {
    base: BaseOrbit<'a>,
    z: [f64; 2],
}

impl<'a> Trajectory<'a> {
    pub fn new(sys: &'a FiberedSystem, start: OrbitStart) -> Self {
        let base = BaseOrbit::new(sys, start);
        let z = match start {
            OrbitStart::Point(p) | OrbitStart::Extended { point: p, .. } => p.z,
            OrbitStart::Random { .. } => sys.section(base.current()).z,
        };
        Self { base, z }
    }
}

impl Iterator for Trajectory<'_> {
    type Item = Point;
    fn next(&mut self) -> Option<Point> {
        let y = self.base.current();
        let p = Point { y, z: self.z };
        self.z = self.base.sys.apply_fiber(y, self.z);
        self.base.advance();
        Some(p)
    }
}

/// Points `x_{burn_in+1} … x_{burn_in+n}` with a domain check at each step.
pub fn checked_orbit(sys: &FiberedSystem, start: OrbitStart, burn_in: usize, n: usize) -> Result<Vec<Point>> {
    let mut out = Vec::with_capacity(n);
    for (step, p) in Trajectory::new(sys, start).enumerate().take(burn_in + n + 1) {
        if !sys.contains(&p) {
            return Err(Error::DomainViolation { point: p, step: Some(step), context: "orbit".into() });
        }
        if step > burn_in {
            out.push(p);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::zoo;

    #[test]
    fn float_doubling_collapses_on_dyadics() {
        let sys = zoo::doubling();
        let ys = base_orbit(&sys, OrbitStart::Point(Point::base(0.375)), 5);
        assert_eq!(ys, [0.375, 0.75, 0.5, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn digit_stream_tracks_the_map() {
        let sys = zoo::doubling();
        let ys = base_orbit(&sys, OrbitStart::Extended { point: Point::base(0.3), seed: 1 }, 2000);
        assert!((ys[0] - 0.3).abs() < 1e-11);
        for w in ys.windows(2) {
            let d = crate::geometry::BaseMetric::Circle.distance(sys.apply_s(w[0]), w[1]);
            assert!(d < 1e-15, "{d}");
        }
        // still generic after many steps
        let tail = &ys[1000..];
        let m = tail.iter().sum::<f64>() / tail.len() as f64;
        assert!((m - 0.5).abs() < 0.05);
    }

    #[test]
    fn digit_stream_base_three() {
        let sys = zoo::expanding_k(3).unwrap();
        let ys = base_orbit(&sys, OrbitStart::Random { seed: 4 }, 100);
        for w in ys.windows(2) {
            let d = crate::geometry::BaseMetric::Circle.distance(sys.apply_s(w[0]), w[1]);
            assert!(d < 1e-14);
        }
    }
}
