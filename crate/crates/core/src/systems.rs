//! Fibered systems `(X, T, Y, S, π, σ)` and the built-in example zoo.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::Rng;

use crate::decay::{fit_decay, DecayFit};
use crate::error::{param, Error, Result};
use crate::geometry::{BaseMetric, FiberDomain, Metric, Point, MAX_FIBER_DIM};
use crate::math::{self, abs, frac, pow, sqrt};
use crate::{par, rng};

/// Tolerance for domain membership and conjugacy checks.
pub const DOMAIN_TOL: f64 = 1e-12;

/// Shape of one monotone increasing branch of a base map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BranchKind {
    /// `y ↦ slope·y + offset`.
    Affine { slope: f64, offset: f64 },
    /// `y ↦ (1 + (2y)^q)·y` on `[0, 1/2]`.
    PomeauLeft { q: f64 },
}

/// A monotone increasing branch on `[lo, hi]` whose image lies in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub lo: f64,
    pub hi: f64,
    pub kind: BranchKind,
}

impl Branch {
    pub fn forward(&self, y: f64) -> f64 {
        match self.kind {
            BranchKind::Affine { slope, offset } => slope * y + offset,
            BranchKind::PomeauLeft { q } => (1.0 + pow(2.0 * y, q)) * y,
        }
    }

    pub fn derivative(&self, y: f64) -> f64 {
        match self.kind {
            BranchKind::Affine { slope, .. } => slope,
            BranchKind::PomeauLeft { q } => 1.0 + (1.0 + q) * pow(2.0 * y, q),
        }
    }

    pub fn image(&self) -> (f64, f64) {
        (self.forward(self.lo), self.forward(self.hi))
    }

    /// Preimage of `t` inside `[lo, hi]`; `t` is clamped to the branch image.
    /// The Pomeau-Manneville branch is inverted by bisection to 1e-14.
    pub fn inverse(&self, t: f64) -> f64 {
        let (a, b) = self.image();
        let t = t.clamp(a, b);
        match self.kind {
            BranchKind::Affine { slope, offset } => ((t - offset) / slope).clamp(self.lo, self.hi),
            BranchKind::PomeauLeft { .. } => {
                let (mut lo, mut hi) = (self.lo, self.hi);
                while hi - lo > 1e-14 {
                    let mid = 0.5 * (lo + hi);
                    if self.forward(mid) < t {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }
}

/// A map `S: Y → Y` on the circle `[0, 1)`.
pub trait BaseMap: Send + Sync {
    fn apply(&self, y: f64) -> f64;

    fn name(&self) -> String;

    /// Monotone branch decomposition, when known.
    fn branches(&self) -> Option<Vec<Branch>> {
        None
    }

    /// `Some(k)` when the map is exactly `y ↦ k·y mod 1`.
    fn digit_base(&self) -> Option<u32> {
        None
    }

    /// `log |S′(y)|`, computed from the branches when available.
    fn log_derivative(&self, y: f64) -> Option<f64> {
        let branches = self.branches()?;
        branches
            .iter()
            .find(|b| y >= b.lo && y <= b.hi)
            .map(|b| math::ln(abs(b.derivative(y))))
    }
}

/// `y ↦ k·y mod 1`.
#[derive(Debug, Clone, Copy)]
pub struct ExpandingK {
    pub k: u32,
}

impl ExpandingK {
    pub fn new(k: u32) -> Result<Self> {
        if k < 2 {
            return Err(param("k", "expansion factor must be at least 2"));
        }
        Ok(Self { k })
    }
}

impl BaseMap for ExpandingK {
    fn apply(&self, y: f64) -> f64 {
        frac(self.k as f64 * y)
    }
    fn name(&self) -> String {
        if self.k == 2 {
            "doubling".to_string()
        } else {
            format!("expanding_k({})", self.k)
        }
    }
    fn branches(&self) -> Option<Vec<Branch>> {
        let k = self.k as f64;
        Some(
            (0..self.k)
                .map(|i| Branch {
                    lo: i as f64 / k,
                    hi: (i + 1) as f64 / k,
                    kind: BranchKind::Affine { slope: k, offset: -(i as f64) },
                })
                .collect(),
        )
    }
    fn digit_base(&self) -> Option<u32> {
        Some(self.k)
    }
}

/// The Pomeau-Manneville map `S_q`. The point `y = 1/2` belongs to the first
/// branch, whose value there is `1 ≡ 0`.
#[derive(Debug, Clone, Copy)]
pub struct PomeauManneville {
    pub q: f64,
}

pub fn pomeau_manneville(q: f64) -> Result<PomeauManneville> {
    if !(0.0..1.0).contains(&q) {
        return Err(param("q", "Pomeau-Manneville exponent must lie in [0, 1)"));
    }
    Ok(PomeauManneville { q })
}

impl BaseMap for PomeauManneville {
    fn apply(&self, y: f64) -> f64 {
        if y <= 0.5 {
            frac((1.0 + pow(2.0 * y, self.q)) * y)
        } else {
            frac(2.0 * y - 1.0)
        }
    }
    fn name(&self) -> String {
        format!("pm({})", self.q)
    }
    fn branches(&self) -> Option<Vec<Branch>> {
        Some(alloc::vec![
            Branch { lo: 0.0, hi: 0.5, kind: BranchKind::PomeauLeft { q: self.q } },
            Branch { lo: 0.5, hi: 1.0, kind: BranchKind::Affine { slope: 2.0, offset: -1.0 } },
        ])
    }
    fn digit_base(&self) -> Option<u32> {
        (self.q == 0.0).then_some(2)
    }
}

/// The identity of the circle.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityBase;

impl BaseMap for IdentityBase {
    fn apply(&self, y: f64) -> f64 {
        y
    }
    fn name(&self) -> String {
        "identity".to_string()
    }
    fn branches(&self) -> Option<Vec<Branch>> {
        Some(alloc::vec![Branch { lo: 0.0, hi: 1.0, kind: BranchKind::Affine { slope: 1.0, offset: 0.0 } }])
    }
}

/// A base map given by a closure, optionally with branches.
pub struct FnBase {
    name: String,
    f: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    branches: Option<Vec<Branch>>,
}

impl FnBase {
    pub fn new(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), f: Box::new(f), branches: None }
    }

    pub fn with_branches(mut self, branches: Vec<Branch>) -> Self {
        self.branches = Some(branches);
        self
    }
}

impl BaseMap for FnBase {
    fn apply(&self, y: f64) -> f64 {
        (self.f)(y)
    }
    fn name(&self) -> String {
        self.name.clone()
    }
    fn branches(&self) -> Option<Vec<Branch>> {
        self.branches.clone()
    }
}

pub type FiberFn = Arc<dyn Fn(f64, [f64; MAX_FIBER_DIM]) -> [f64; MAX_FIBER_DIM] + Send + Sync>;
pub type SectionFn = Arc<dyn Fn(f64) -> [f64; MAX_FIBER_DIM] + Send + Sync>;

/// A skew product `T(y, z) = (S(y), R(y, z))` on `Y × Φ` with projection
/// `π(y, z) = y` and a section `σ(y) = (y, s(y))`.
#[derive(Clone)]
pub struct FiberedSystem {
    name: String,
    base: Arc<dyn BaseMap>,
    fiber: FiberFn,
    domain: FiberDomain,
    section: SectionFn,
    metric: Metric,
    lipschitz: Option<f64>,
}

impl core::fmt::Debug for FiberedSystem {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("FiberedSystem")
            .field("name", &self.name)
            .field("base", &self.base.name())
            .field("domain", &self.domain)
            .field("metric", &self.metric)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl FiberedSystem {
    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn dim_base(&self) -> usize {
        1
    }
    pub fn dim_fiber(&self) -> usize {
        self.domain.dim()
    }
    pub fn base(&self) -> &Arc<dyn BaseMap> {
        &self.base
    }
    pub fn domain(&self) -> FiberDomain {
        self.domain
    }
    pub fn metric(&self) -> Metric {
        self.metric
    }
    /// Declared Lipschitz constant of `T`, if any.
    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Same system with a different section fiber coordinate `y ↦ s(y)`.
    pub fn with_section(mut self, s: impl Fn(f64) -> [f64; MAX_FIBER_DIM] + Send + Sync + 'static) -> Self {
        self.section = Arc::new(s);
        self
    }

    #[inline]
    pub fn apply_s(&self, y: f64) -> f64 {
        self.base.apply(y)
    }

    #[inline]
    pub fn apply_fiber(&self, y: f64, z: [f64; MAX_FIBER_DIM]) -> [f64; MAX_FIBER_DIM] {
        (self.fiber)(y, z)
    }

    #[inline]
    pub fn apply_t(&self, p: &Point) -> Point {
        Point { y: self.base.apply(p.y), z: (self.fiber)(p.y, p.z) }
    }

    /// `T` with a domain check on the image.
    pub fn apply_t_checked(&self, p: &Point) -> Result<Point> {
        let q = self.apply_t(p);
        self.check_point(&q, "T image")?;
        Ok(q)
    }

    /// `Tⁿ(p)` without checks.
    pub fn iterate(&self, p: &Point, n: usize) -> Point {
        let mut q = *p;
        for _ in 0..n {
            q = self.apply_t(&q);
        }
        q
    }

    #[inline]
    pub fn project(&self, p: &Point) -> f64 {
        p.y
    }

    #[inline]
    pub fn section(&self, y: f64) -> Point {
        Point { y, z: (self.section)(y) }
    }

    pub fn section_fn(&self) -> SectionFn {
        self.section.clone()
    }

    pub fn fiber_fn(&self) -> FiberFn {
        self.fiber.clone()
    }

    #[inline]
    pub fn distance(&self, p: &Point, q: &Point) -> f64 {
        self.metric.distance(p, q)
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.is_finite()
            && p.y >= -DOMAIN_TOL
            && p.y < 1.0 + DOMAIN_TOL
            && self.domain.contains(p.z, DOMAIN_TOL)
    }

    pub fn check_point(&self, p: &Point, context: &str) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::DomainViolation { point: *p, step: None, context: context.to_string() })
        }
    }

    /// Uniform random point of `X`.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let y = rng.gen::<f64>();
        Point { y, z: self.domain.sample(rng) }
    }
}

/// Builds `T(y, z) = (S(y), R(y, z))` after checking on a sample grid that `R`
/// maps the fiber domain into itself.
pub fn make_skew_product(
    name: impl Into<String>,
    base: Arc<dyn BaseMap>,
    fiber_map: impl Fn(f64, [f64; MAX_FIBER_DIM]) -> [f64; MAX_FIBER_DIM] + Send + Sync + 'static,
    domain: FiberDomain,
) -> Result<FiberedSystem> {
    let center = domain.center();
    let sys = FiberedSystem {
        name: name.into(),
        base,
        fiber: Arc::new(fiber_map),
        domain,
        section: Arc::new(move |_| center),
        metric: Metric::new(BaseMetric::Circle, &domain),
        lipschitz: None,
    };
    check_fiber_invariance(&sys, 257, 17)?;
    Ok(sys)
}

/// Checks `R(y, Φ) ⊆ Φ` on `ny` base points times a fiber grid of size `k`.
pub fn check_fiber_invariance(sys: &FiberedSystem, ny: usize, k: usize) -> Result<()> {
    let zs = sys.domain.grid(k);
    for i in 0..ny {
        let y = i as f64 / ny as f64;
        for &z in &zs {
            let image = sys.apply_fiber(y, z);
            let ok = image.iter().all(|c| c.is_finite()) && sys.domain.contains(image, DOMAIN_TOL);
            if !ok {
                return Err(Error::DomainViolation {
                    point: Point { y, z },
                    step: None,
                    context: format!("fiber map sends it to z=[{}, {}] outside {:?}", image[0], image[1], sys.domain),
                });
            }
        }
    }
    Ok(())
}

/// `T(y, z) = (2y mod 1, λz + offset(y))` on the solid torus with unit disk fibers.
pub fn solenoid_system(
    lambda: f64,
    offsets: impl Fn(f64) -> [f64; 2] + Send + Sync + 'static,
) -> Result<FiberedSystem> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(param("lambda", "fiber contraction must lie in (0, 1)"));
    }
    let samples = 4096;
    let mut worst = (0.0, 0.0);
    for i in 0..samples {
        let y = i as f64 / samples as f64;
        let o = offsets(y);
        let r = sqrt(o[0] * o[0] + o[1] * o[1]);
        if r > worst.1 {
            worst = (y, r);
        }
    }
    if lambda + worst.1 > 1.0 + DOMAIN_TOL {
        let o = offsets(worst.0);
        let image = [lambda + o[0], o[1]];
        return Err(Error::DomainViolation {
            point: Point { y: worst.0, z: [1.0, 0.0] },
            step: None,
            context: format!(
                "solenoid with lambda={lambda} and offset norm {} maps the disk outside itself (image z=[{}, {}])",
                worst.1, image[0], image[1]
            ),
        });
    }
    let offsets = Arc::new(offsets);
    let off = offsets.clone();
    let sys = make_skew_product(
        "solenoid",
        Arc::new(ExpandingK { k: 2 }),
        move |y, z| {
            let o = off(y);
            [lambda * z[0] + o[0], lambda * z[1] + o[1]]
        },
        FiberDomain::Disk { radius: 1.0 },
    )?;
    Ok(sys)
}

/// Smallest distance between the images of the two preimage fibers of a
/// doubling-base solenoid, minimized over `samples` base points. Positive
/// values certify injectivity on the sampled fibers.
pub fn solenoid_branch_gap(lambda: f64, offsets: impl Fn(f64) -> [f64; 2], samples: usize) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..samples {
        let y = i as f64 / samples as f64;
        let a = offsets(0.5 * y);
        let b = offsets(0.5 * y + 0.5);
        let d = math::hypot2(a, b) - 2.0 * lambda;
        best = best.min(d);
    }
    best
}

/// Empirical shrinking sequence `a_n` with its fitted model.
#[derive(Debug, Clone)]
pub struct ShrinkEstimate {
    /// `a[n]` for `n = 0..=n_max`, in metric units.
    pub a: Vec<f64>,
    pub fit: DecayFit,
    pub samples_per_fiber: usize,
    pub fibers_sampled: usize,
}

impl ShrinkEstimate {
    /// The estimate is a sampled maximum, hence a lower envelope of the true `a_n`.
    pub const LOWER_ENVELOPE: bool = true;

    pub fn is_shrinking(&self) -> bool {
        self.fit.is_decaying()
    }
}

/// Samples `fibers` base points and `pairs_per_fiber` pairs in each fiber and
/// records `a_n = max d(Tⁿx, Tⁿx′)`.
pub fn estimate_shrinking(
    sys: &FiberedSystem,
    n_max: usize,
    fibers: usize,
    pairs_per_fiber: usize,
    seed: u64,
) -> Result<ShrinkEstimate> {
    if n_max < 2 {
        return Err(param("n_max", "need at least two steps"));
    }
    if fibers == 0 || pairs_per_fiber == 0 {
        return Err(param("fibers", "need at least one fiber and one pair"));
    }
    let metric = sys.metric();
    let per_fiber = par::map_range(fibers, |f| {
        let mut r = rng::stream(seed, f as u64, 0);
        let y0 = r.gen::<f64>();
        let ys = crate::orbit::base_orbit(sys, crate::orbit::OrbitStart::Extended { point: Point::base(y0), seed: rng::key(seed, f as u64, 1) }, n_max);
        let mut a = alloc::vec![0.0f64; n_max + 1];
        for p in 0..pairs_per_fiber {
            let mut r = rng::stream(seed, f as u64, p as u64 + 2);
            let mut z1 = sys.domain.sample(&mut r);
            let mut z2 = sys.domain.sample(&mut r);
            for (n, &y) in ys.iter().enumerate().take(n_max + 1) {
                a[n] = a[n].max(metric.fiber_distance(z1, z2));
                z1 = sys.apply_fiber(y, z1);
                z2 = sys.apply_fiber(y, z2);
            }
        }
        a
    });
    let mut a = alloc::vec![0.0f64; n_max + 1];
    for row in &per_fiber {
        for (dst, &v) in a.iter_mut().zip(row) {
            *dst = dst.max(v);
        }
    }
    let pts: Vec<(f64, f64)> = a.iter().enumerate().map(|(n, &v)| (n as f64, v)).collect();
    let fit = fit_decay(&pts);
    Ok(ShrinkEstimate { a, fit, samples_per_fiber: pairs_per_fiber, fibers_sampled: fibers })
}

/// Lower bound on the Lipschitz constant of `T`: the largest ratio
/// `d(Tx, Tx′)/d(x, x′)` over sampled pairs. Pair `i` depends only on
/// `(seed, i)`, so the estimate is nondecreasing in `samples`.
pub fn estimate_lipschitz(sys: &FiberedSystem, samples: usize, seed: u64) -> Result<f64> {
    if samples < 2 {
        return Err(param("samples", "need at least two samples"));
    }
    let ratios = par::map_range(samples, |i| {
        let mut r = rng::stream(seed, i as u64, 0);
        let x = sys.sample_point(&mut r);
        // separations spread over scales 1e-6 .. 1e-1
        let scale = pow(10.0, -1.0 - 5.0 * r.gen::<f64>());
        let mut x2 = x;
        x2.y = frac(x.y + scale * (2.0 * r.gen::<f64>() - 1.0));
        let dir = sys.domain.sample(&mut r);
        let mix = r.gen::<f64>();
        for (c, d) in dir.iter().enumerate() {
            x2.z[c] = x.z[c] + mix * scale * (d - x.z[c]);
        }
        if !sys.contains(&x2) {
            x2.z = x.z;
        }
        let d = sys.distance(&x, &x2);
        if d == 0.0 {
            return 0.0;
        }
        sys.distance(&sys.apply_t(&x), &sys.apply_t(&x2)) / d
    });
    Ok(ratios.into_iter().fold(0.0, f64::max))
}

/// Largest observed `d(π(T(x)), S(π(x)))` and `d(π(σ(y)), y)` over sampled points.
pub fn conjugacy_defect(sys: &FiberedSystem, samples: usize, seed: u64) -> (f64, f64) {
    let mut conj: f64 = 0.0;
    let mut sect: f64 = 0.0;
    let mut r = rng::stream(seed, 0, 0);
    for _ in 0..samples {
        let x = sys.sample_point(&mut r);
        let d = sys.metric.base_distance(sys.project(&sys.apply_t(&x)), sys.apply_s(sys.project(&x)));
        conj = conj.max(d);
        let y = r.gen::<f64>();
        sect = sect.max(sys.metric.base_distance(sys.project(&sys.section(y)), y));
    }
    (conj, sect)
}

/// Registry of named example systems.
pub mod zoo {
    use super::*;

    /// Names accepted by [`by_name`].
    pub const NAMES: &[&str] = &[
        "doubling",
        "pm",
        "expanding_k",
        "solenoid",
        "skew",
        "toy",
        "identity_fiber",
        "pm_parabolic",
    ];

    fn get(params: &[f64], i: usize, name: &'static str, default: Option<f64>) -> Result<f64> {
        params
            .get(i)
            .copied()
            .or(default)
            .ok_or_else(|| param(name, "missing parameter"))
    }

    fn base_only(name: String, base: Arc<dyn BaseMap>) -> FiberedSystem {
        FiberedSystem {
            name,
            base,
            fiber: Arc::new(|_, z| z),
            domain: FiberDomain::Trivial,
            section: Arc::new(|_| [0.0; 2]),
            metric: Metric::base_only(BaseMetric::Circle),
            lipschitz: None,
        }
    }

    pub fn doubling() -> FiberedSystem {
        base_only("doubling".to_string(), Arc::new(ExpandingK { k: 2 })).with_lipschitz(2.0)
    }

    pub fn pm(q: f64) -> Result<FiberedSystem> {
        Ok(base_only(format!("pm({q})"), Arc::new(pomeau_manneville(q)?)))
    }

    pub fn expanding_k(k: u32) -> Result<FiberedSystem> {
        Ok(base_only(format!("expanding_k({k})"), Arc::new(ExpandingK::new(k)?)).with_lipschitz(k as f64))
    }

    /// Solenoid with offset `radius·(cos 2πy, sin 2πy)`.
    pub fn solenoid(lambda: f64, radius: f64) -> Result<FiberedSystem> {
        solenoid_system(lambda, move |y| {
            let t = math::TAU * y;
            [radius * math::cos(t), radius * math::sin(t)]
        })
        .map(|s| s.with_name(format!("solenoid({lambda}, {radius})")))
    }

    /// `R(y, z) = λz + amp·cos 2πy` on `[−1, 1]` over `S_q`.
    pub fn skew(q: f64, lambda: f64, amp: f64) -> Result<FiberedSystem> {
        let base = Arc::new(pomeau_manneville(q)?);
        make_skew_product(
            format!("skew({q}, {lambda}, {amp})"),
            base,
            move |y, z| [lambda * z[0] + amp * math::cos(math::TAU * y), 0.0],
            FiberDomain::Interval { lo: -1.0, hi: 1.0 },
        )
    }

    /// `T(y, z) = (2y, λz)` on `[−1, 1]`, the closed-form coboundary example.
    pub fn toy(lambda: f64) -> Result<FiberedSystem> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(param("lambda", "fiber contraction must lie in (0, 1)"));
        }
        make_skew_product(
            format!("toy({lambda})"),
            Arc::new(ExpandingK { k: 2 }),
            move |_, z| [lambda * z[0], 0.0],
            FiberDomain::Interval { lo: -1.0, hi: 1.0 },
        )
    }

    /// `T(y, z) = (2y, z)`: isometric fibers, the negative control.
    pub fn identity_fiber() -> FiberedSystem {
        make_skew_product(
            "identity_fiber",
            Arc::new(ExpandingK { k: 2 }),
            |_, z| z,
            FiberDomain::Interval { lo: -1.0, hi: 1.0 },
        )
        .expect("identity preserves the fiber")
    }

    /// `R(y, z) = z/(1 + z)` on `[0, 1]` over `S_q`; `a_n ≍ 1/n`.
    pub fn pm_parabolic(q: f64) -> Result<FiberedSystem> {
        make_skew_product(
            format!("pm_parabolic({q})"),
            Arc::new(pomeau_manneville(q)?),
            |_, z| [z[0] / (1.0 + z[0]), 0.0],
            FiberDomain::Interval { lo: 0.0, hi: 1.0 },
        )
    }

    /// Looks up a system by name with positional parameters.
    pub fn by_name(name: &str, params: &[f64]) -> Result<FiberedSystem> {
        match name {
            "doubling" => Ok(doubling()),
            "pm" => pm(get(params, 0, "q", None)?),
            "expanding_k" => {
                let k = get(params, 0, "k", None)?;
                if math::floor(k) != k || !(2.0..=1.0e6).contains(&k) {
                    return Err(param("k", "must be an integer ≥ 2"));
                }
                expanding_k(k as u32)
            }
            "solenoid" => solenoid(get(params, 0, "lambda", None)?, get(params, 1, "radius", Some(0.5))?),
            "skew" => skew(
                get(params, 0, "q", None)?,
                get(params, 1, "lambda", None)?,
                get(params, 2, "amp", None)?,
            ),
            "toy" => toy(get(params, 0, "lambda", None)?),
            "identity_fiber" => Ok(identity_fiber()),
            "pm_parabolic" => pm_parabolic(get(params, 0, "q", Some(0.3))?),
            other => Err(Error::Argument(format!("unknown system `{other}`; known: {}", NAMES.join(", ")))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pm_values() {
        let s0 = pomeau_manneville(0.0).unwrap();
        for &y in &[0.1, 0.3, 0.7, 0.9] {
            assert_eq!(s0.apply(y), frac(2.0 * y));
        }
        let s = pomeau_manneville(0.5).unwrap();
        assert!((s.apply(0.25) - 0.426_776_695_296_636_9).abs() < 1e-12);
        for &q in &[0.0, 0.3, 0.9] {
            assert_eq!(pomeau_manneville(q).unwrap().apply(0.75), 0.5);
        }
        assert_eq!(s.apply(0.5), 0.0);
        assert!(pomeau_manneville(1.0).is_err());
        assert!(pomeau_manneville(-0.1).is_err());
    }

    #[test]
    fn pm_branch_inverse() {
        let s = pomeau_manneville(0.3).unwrap();
        let b = s.branches().unwrap();
        for &t in &[0.0, 0.01, 0.4, 0.99, 1.0] {
            let y = b[0].inverse(t);
            assert!((b[0].forward(y) - t).abs() < 1e-12);
        }
    }

    #[test]
    fn skew_examples() {
        let base = Arc::new(ExpandingK { k: 2 });
        let sys = make_skew_product("half", base.clone(), |_, z| [0.5 * z[0], 0.0], FiberDomain::Interval { lo: -1.0, hi: 1.0 }).unwrap();
        let p = Point::with_fiber1(0.3, 0.2);
        assert_eq!(sys.project(&sys.apply_t(&p)), sys.apply_s(sys.project(&p)));
        assert!(zoo::skew(0.3, 0.4, 0.25).is_ok());
        let err = make_skew_product("double", base, |_, z| [2.0 * z[0], 0.0], FiberDomain::Interval { lo: -1.0, hi: 1.0 });
        assert!(matches!(err, Err(Error::DomainViolation { .. })));
    }

    #[test]
    fn solenoid_examples() {
        let off = |y: f64| [0.5 * math::cos(math::TAU * y), 0.5 * math::sin(math::TAU * y)];
        assert!(solenoid_system(0.4, off).is_ok());
        assert!(solenoid_branch_gap(0.4, off, 1000) >= 0.2 - 1e-12);
        assert!(matches!(solenoid_system(0.9, |_| [0.5, 0.0]), Err(Error::DomainViolation { .. })));
        let sys = zoo::solenoid(0.4, 0.5).unwrap();
        let a = Point::new(0.2, [1.0, 0.0]);
        let b = Point::new(0.2, [-1.0, 0.0]);
        let (ta, tb) = (sys.iterate(&a, 5), sys.iterate(&b, 5));
        assert!((math::hypot2(ta.z, tb.z) - 2.0 * pow(0.4, 5.0)).abs() < 1e-12);
    }

    #[test]
    fn lipschitz_examples() {
        let sys = zoo::solenoid(0.4, 0.5).unwrap();
        let l = estimate_lipschitz(&sys, 4000, 3).unwrap();
        assert!((1.9..=2.0 + 1e-9).contains(&l), "{l}");
        let contraction = make_skew_product("c", Arc::new(IdentityBase), |_, z| [0.5 * z[0], 0.0], FiberDomain::Interval { lo: -1.0, hi: 1.0 }).unwrap();
        assert!(estimate_lipschitz(&contraction, 2000, 3).unwrap() <= 1.0 + 1e-12);
        let small = estimate_lipschitz(&sys, 100, 9).unwrap();
        let large = estimate_lipschitz(&sys, 1000, 9).unwrap();
        assert!(large >= small);
    }

    #[test]
    fn zoo_rejects_unknown() {
        assert!(zoo::by_name("nope", &[]).is_err());
        for name in zoo::NAMES {
            let params: &[f64] = match *name {
                "pm" => &[0.3],
                "expanding_k" => &[3.0],
                "solenoid" => &[0.4, 0.5],
                "skew" => &[0.3, 0.4, 0.25],
                "toy" => &[0.5],
                _ => &[],
            };
            assert!(zoo::by_name(name, params).is_ok(), "{name}");
        }
    }
}
