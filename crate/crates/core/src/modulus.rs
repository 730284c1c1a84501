//! Moduli of continuity `hol_α(r) = r^α` and `holl_α(r) = 1/(log(r_α/r))^α`.

use crate::error::{param, Result};
use crate::math::{exp, ln, pow};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModulusKind {
    Holder,
    LogHolder,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulusClass {
    pub kind: ModulusKind,
    pub alpha: f64,
    /// Normalization point of the log-Hölder modulus (unused for Hölder).
    pub r_alpha: f64,
}

impl ModulusClass {
    pub fn lipschitz() -> Self {
        Self { kind: ModulusKind::Holder, alpha: 1.0, r_alpha: 0.0 }
    }

    pub fn holder(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(param("alpha", "Hölder exponent must lie in (0, 1]"));
        }
        Ok(Self { kind: ModulusKind::Holder, alpha, r_alpha: 0.0 })
    }

    /// Log-Hölder modulus with the smallest `r_α` (namely `e^{α+1}`) that keeps
    /// it concave on `(0, 1]`.
    pub fn log_holder(alpha: f64) -> Result<Self> {
        Self::log_holder_at(alpha, exp(alpha + 1.0))
    }

    pub fn log_holder_at(alpha: f64, r_alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(param("alpha", "log-Hölder exponent must be positive"));
        }
        if !(r_alpha > 1.0) {
            return Err(param("r_alpha", "normalization point must exceed 1"));
        }
        let m = Self { kind: ModulusKind::LogHolder, alpha, r_alpha };
        if !m.is_concave_on_grid(512) {
            return Err(param("r_alpha", "modulus is not concave on (0, 1]; increase r_alpha"));
        }
        Ok(m)
    }

    /// `ω(r)`; `ω(0) = 0`.
    pub fn eval(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        match self.kind {
            ModulusKind::Holder => pow(r, self.alpha),
            ModulusKind::LogHolder => pow(ln(self.r_alpha / r), -self.alpha),
        }
    }

    /// Checks concavity and monotonicity on a logarithmic grid of `(0, 1]`.
    pub fn is_concave_on_grid(&self, k: usize) -> bool {
        let k = k.max(3);
        let rs: alloc::vec::Vec<f64> = (0..k).map(|i| pow(10.0, -12.0 * (k - 1 - i) as f64 / (k - 1) as f64)).collect();
        for w in rs.windows(3) {
            let (a, b, c) = (w[0], w[1], w[2]);
            let (fa, fb, fc) = (self.eval(a), self.eval(b), self.eval(c));
            if !(fa <= fb && fb <= fc) {
                return false;
            }
            let chord = fa + (fc - fa) * (b - a) / (c - a);
            if fb < chord - 1e-12 * fc.max(1.0) {
                return false;
            }
        }
        self.eval(0.0) == 0.0
    }

    /// Smallest `D` with `ω(Lⁿ r) ≤ D nᵅ ω(r)` over the supplied grid,
    /// restricted to `Lⁿ r ≤ 1`.
    pub fn composition_constant(&self, lip: f64, n_max: usize, rs: &[f64]) -> f64 {
        let mut d: f64 = 0.0;
        for n in 1..=n_max {
            let ln_factor = pow(lip, n as f64);
            for &r in rs {
                let s = ln_factor * r;
                if s > 1.0 || r <= 0.0 {
                    continue;
                }
                let q = self.eval(s) / (pow(n as f64, self.alpha) * self.eval(r));
                d = d.max(q);
            }
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_are_enforced() {
        assert!(ModulusClass::holder(1.5).is_err());
        assert!(ModulusClass::holder(0.0).is_err());
        assert!(ModulusClass::log_holder(0.0).is_err());
        assert!(ModulusClass::log_holder_at(1.0, 2.0).is_err());
        assert!(ModulusClass::log_holder(2.0).is_ok());
    }

    #[test]
    fn values() {
        let h = ModulusClass::holder(0.5).unwrap();
        assert!((h.eval(0.25) - 0.5).abs() < 1e-15);
        let l = ModulusClass::log_holder_at(1.0, 10.0).unwrap();
        assert!((l.eval(1.0) - 1.0 / ln(10.0)).abs() < 1e-15);
        assert_eq!(l.eval(0.0), 0.0);
    }
}
