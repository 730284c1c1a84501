//! Monochrome rasters of `Tⁿ(U)` in annulus coordinates.
//!
//! A point `(y, z)` is drawn at angle `2πy` and radius `1.5 + 0.5·t`, where
//! `t ∈ [−1, 1]` is the first fiber coordinate rescaled to the fiber domain.
//! The picture covers `[−2, 2]²`, so the annulus `1 ≤ r ≤ 2` holds every point of `X`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{param, Error, Result};
use crate::geometry::{FiberDomain, Point};
use crate::math::{cos, frac, sin, sqrt, TAU};
use crate::systems::FiberedSystem;
use crate::par;

pub const INNER_RADIUS: f64 = 1.0;
pub const OUTER_RADIUS: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Raster {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![false; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize) {
        self.bits[y * self.width + x] = true;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Lit pixels grown by one pixel in all eight directions.
    pub fn dilate(&self) -> Self {
        let mut out = Self::new(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                if !self.get(x, y) {
                    continue;
                }
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                        if nx >= 0 && ny >= 0 && (nx as usize) < self.width && (ny as usize) < self.height {
                            out.set(nx as usize, ny as usize);
                        }
                    }
                }
            }
        }
        out
    }

    /// Lit pixels of `self` that are dark in `other`.
    pub fn excess_over(&self, other: &Raster) -> usize {
        self.bits.iter().zip(&other.bits).filter(|(a, b)| **a && !**b).count()
    }

    pub fn is_subset_of(&self, other: &Raster) -> bool {
        self.width == other.width && self.height == other.height && self.excess_over(other) == 0
    }

    /// Plane coordinates of the center of pixel `(x, y)` (row 0 at the top).
    pub fn pixel_center(&self, x: usize, y: usize) -> (f64, f64) {
        let px = -OUTER_RADIUS + (x as f64 + 0.5) * 2.0 * OUTER_RADIUS / self.width as f64;
        let py = OUTER_RADIUS - (y as f64 + 0.5) * 2.0 * OUTER_RADIUS / self.height as f64;
        (px, py)
    }

    /// Lit pixels whose center is farther than one pixel from the annulus.
    pub fn outside_annulus(&self) -> usize {
        let pix = 2.0 * OUTER_RADIUS / self.width.min(self.height) as f64;
        let mut n = 0;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    let (px, py) = self.pixel_center(x, y);
                    let r = sqrt(px * px + py * py);
                    if r < INNER_RADIUS - pix || r > OUTER_RADIUS + pix {
                        n += 1;
                    }
                }
            }
        }
        n
    }

    /// Binary portable pixmap: lit pixels black on white.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(self.bits.len() * 3);
        for &b in &self.bits {
            let v = if b { 0u8 } else { 255u8 };
            out.extend_from_slice(&[v, v, v]);
        }
        out
    }

    /// 8-bit grayscale rows, lit pixels black.
    pub fn to_gray(&self) -> Vec<u8> {
        self.bits.iter().map(|&b| if b { 0 } else { 255 }).collect()
    }
}

/// Initial sample of `U`: `base` equally spaced angles (use an odd count for
/// doubling bases, which then permute the angles), each carrying `fiber`
/// fiber points from a shared low-discrepancy sequence. Neighbouring angles get
/// different fiber points, so the projection of `U` is dense at pixel scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RenderGrid {
    pub base: usize,
    pub fiber: usize,
}

impl Default for RenderGrid {
    fn default() -> Self {
        Self { base: 65_537, fiber: 8 }
    }
}

fn fiber_coordinate(domain: &FiberDomain, z: [f64; 2]) -> Result<f64> {
    match *domain {
        FiberDomain::Interval { lo, hi } => Ok(2.0 * (z[0] - lo) / (hi - lo) - 1.0),
        FiberDomain::Disk { radius } => Ok(z[0] / radius),
        FiberDomain::Trivial => Err(Error::Capability("system has no fiber to draw in annulus coordinates".into())),
    }
}

/// `n`-th point of the plastic-number (R2) sequence, mapped into the fiber.
fn fiber_sample(domain: &FiberDomain, n: usize) -> [f64; 2] {
    const A1: f64 = 0.754_877_666_246_692_7;
    const A2: f64 = 0.569_840_290_998_053_3;
    let u = frac(0.5 + A1 * n as f64);
    let v = frac(0.5 + A2 * n as f64);
    match *domain {
        FiberDomain::Interval { lo, hi } => [lo + (hi - lo) * u, 0.0],
        FiberDomain::Disk { radius } => {
            let r = radius * sqrt(u);
            [r * cos(TAU * v), r * sin(TAU * v)]
        }
        FiberDomain::Trivial => [0.0; 2],
    }
}

fn plot(r: &mut Raster, domain: &FiberDomain, p: &Point) -> Result<()> {
    let t = fiber_coordinate(domain, p.z)?.clamp(-1.0, 1.0);
    let rad = 1.5 + 0.5 * t;
    let (px, py) = (rad * cos(TAU * p.y), rad * sin(TAU * p.y));
    let scale = 2.0 * OUTER_RADIUS;
    let x = ((px + OUTER_RADIUS) / scale * r.width as f64) as i64;
    let y = ((OUTER_RADIUS - py) / scale * r.height as f64) as i64;
    if x >= 0 && y >= 0 && (x as usize) < r.width && (y as usize) < r.height {
        r.set(x as usize, y as usize);
    }
    Ok(())
}

/// Rasters of `T⁰(U), …, T^{n_max}(U)` for the sampled grid `U`.
pub fn render_sequence(sys: &FiberedSystem, n_max: usize, grid: RenderGrid, size: usize) -> Result<Vec<Raster>> {
    if size < 8 {
        return Err(param("size", "image must be at least 8 pixels wide"));
    }
    if grid.base == 0 {
        return Err(param("base", "grid needs at least one base point"));
    }
    let domain = sys.domain();
    fiber_coordinate(&domain, [0.0; 2])?;
    let per = grid.fiber.max(1);
    let chunks = par::map_range(grid.base, |i| {
        let y = i as f64 / grid.base as f64;
        let mut pts: Vec<Point> = (0..per).map(|j| Point::new(y, fiber_sample(&domain, i * per + j))).collect();
        let mut orbit = Vec::with_capacity((n_max + 1) * pts.len());
        for n in 0..=n_max {
            if n > 0 {
                for p in pts.iter_mut() {
                    *p = sys.apply_t(p);
                }
            }
            orbit.extend_from_slice(&pts);
        }
        orbit
    });
    let mut out = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let mut r = Raster::new(size, size);
        for c in &chunks {
            for p in &c[n * per..(n + 1) * per] {
                plot(&mut r, &domain, p)?;
            }
        }
        out.push(r);
    }
    Ok(out)
}

/// Raster of `Tⁿ(U)`.
pub fn render_attractor(sys: &FiberedSystem, n_iter: usize, grid: RenderGrid, size: usize) -> Result<Raster> {
    Ok(render_sequence(sys, n_iter, grid, size)?.pop().expect("n_iter + 1 rasters"))
}

/// Lit pixels of `T^{n+1}(U)` outside the one-pixel dilation of `Tⁿ(U)`, per `n`.
pub fn nesting_defects(rasters: &[Raster]) -> Vec<usize> {
    rasters.windows(2).map(|w| w[1].excess_over(&w[0].dilate())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::zoo;

    #[test]
    fn base_only_is_not_projectable() {
        let sys = zoo::doubling();
        assert!(matches!(render_attractor(&sys, 1, RenderGrid::default(), 64), Err(Error::Capability(_))));
    }

    #[test]
    fn ppm_header_and_size() {
        let mut r = Raster::new(3, 2);
        r.set(1, 1);
        let p = r.to_ppm();
        assert!(p.starts_with(b"P6\n3 2\n255\n"));
        assert_eq!(p.len(), 11 + 18);
        assert_eq!(r.dilate().count(), 6);
    }

    #[test]
    fn identity_fiber_keeps_the_band() {
        let sys = zoo::identity_fiber();
        let rs = render_sequence(&sys, 3, RenderGrid { base: 16_385, fiber: 8 }, 128).unwrap();
        for r in &rs[1..] {
            assert!(r.is_subset_of(&rs[0].dilate()) && rs[0].is_subset_of(&r.dilate()));
        }
    }

    #[test]
    fn solenoid_images_nest() {
        let sys = zoo::solenoid(0.4, 0.5).unwrap();
        let rs = render_sequence(&sys, 8, RenderGrid::default(), 256).unwrap();
        assert_eq!(nesting_defects(&rs), vec![0; 8]);
        assert!(rs.iter().all(|r| r.outside_annulus() == 0));
        assert!(rs[8].count() < rs[0].count());
    }
}
