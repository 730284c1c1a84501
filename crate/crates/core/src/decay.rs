//! Exponential vs polynomial fits for positive decreasing sequences.

use alloc::vec::Vec;

use crate::math::{self, exp, ln, pow};

/// Fitted model. `Exponential` means `v_n ≈ C θⁿ`, `Polynomial` means `v_n ≈ C n^{-d}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayModel {
    Exponential { theta: f64, c: f64 },
    Polynomial { d: f64, c: f64 },
    /// Every value is exactly zero (θ = 0).
    Collapsed,
    /// The sequence does not decay.
    NonDecaying,
    /// Not enough points above the noise floor.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub model: DecayModel,
    /// Residual sum of squares of the winning log-space regression.
    pub residual: f64,
    /// Detected plateau level, if any.
    pub noise_floor: Option<f64>,
    pub points_used: usize,
}

impl DecayFit {
    /// Declared exponential model `C θⁿ` (no data behind it).
    pub fn exponential(theta: f64, c: f64) -> Self {
        Self::declared(DecayModel::Exponential { theta, c })
    }

    /// Declared polynomial model `C n^{-d}`.
    pub fn polynomial(d: f64, c: f64) -> Self {
        Self::declared(DecayModel::Polynomial { d, c })
    }

    fn declared(model: DecayModel) -> Self {
        Self { model, residual: 0.0, noise_floor: None, points_used: 0 }
    }

    pub fn theta(&self) -> Option<f64> {
        match self.model {
            DecayModel::Exponential { theta, .. } => Some(theta),
            DecayModel::Collapsed => Some(0.0),
            _ => None,
        }
    }

    pub fn degree(&self) -> Option<f64> {
        match self.model {
            DecayModel::Polynomial { d, .. } => Some(d),
            _ => None,
        }
    }

    pub fn is_decaying(&self) -> bool {
        matches!(
            self.model,
            DecayModel::Exponential { .. } | DecayModel::Polynomial { .. } | DecayModel::Collapsed
        )
    }

    pub fn is_collapsed(&self) -> bool {
        self.model == DecayModel::Collapsed
    }

    pub fn is_non_decaying(&self) -> bool {
        self.model == DecayModel::NonDecaying
    }

    /// Model value at `n` (polynomial models are evaluated at `max(n, 1)`).
    pub fn predict(&self, n: f64) -> Option<f64> {
        match self.model {
            DecayModel::Exponential { theta, c } => Some(c * pow(theta, n)),
            DecayModel::Polynomial { d, c } => Some(c * pow(n.max(1.0), -d)),
            DecayModel::Collapsed => Some(0.0),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self.model {
            DecayModel::Exponential { .. } => "exponential",
            DecayModel::Polynomial { .. } => "polynomial",
            DecayModel::Collapsed => "exact collapse",
            DecayModel::NonDecaying => "non-decaying",
            DecayModel::None => "none",
        }
    }
}

struct LogFit {
    exp: (f64, f64, f64),
    poly: (f64, f64, f64),
}

fn log_fits(points: &[(f64, f64)]) -> LogFit {
    let ns: Vec<f64> = points.iter().map(|p| p.0).collect();
    let lns: Vec<f64> = points.iter().map(|p| ln(p.0)).collect();
    let lv: Vec<f64> = points.iter().map(|p| ln(p.1)).collect();
    LogFit { exp: math::linear_fit(&ns, &lv), poly: math::linear_fit(&lns, &lv) }
}

/// Margin by which the polynomial residual must beat the exponential one.
const POLY_MARGIN: f64 = 0.95;

fn choose(fit: &LogFit) -> (DecayModel, f64) {
    let (a_e, b_e, r_e) = fit.exp;
    let (a_p, b_p, r_p) = fit.poly;
    if r_p < POLY_MARGIN * r_e {
        if b_p < 0.0 {
            (DecayModel::Polynomial { d: -b_p, c: exp(a_p) }, r_p)
        } else {
            (DecayModel::NonDecaying, r_p)
        }
    } else {
        let theta = exp(b_e);
        if theta < 1.0 {
            (DecayModel::Exponential { theta, c: exp(a_e) }, r_e)
        } else {
            (DecayModel::NonDecaying, r_e)
        }
    }
}

/// Fits `C θⁿ` and `C n^{-d}` by least squares in log space and keeps the
/// better one, preferring the exponential unless the polynomial residual is
/// below 95% of it.
///
/// Only points with `n ≥ 1` and `v > 0` enter the regression. A trailing
/// plateau (tail values well above the extrapolated fit of the head) sets a
/// noise floor equal to the median of the last 10% of `|v|`; points below
/// five times that floor are discarded. At least five usable points are
/// required.
pub fn fit_decay(values: &[(f64, f64)]) -> DecayFit {
    let none = |model| DecayFit { model, residual: 0.0, noise_floor: None, points_used: 0 };
    let pts: Vec<(f64, f64)> = values
        .iter()
        .copied()
        .filter(|&(n, v)| n >= 1.0 && v.is_finite())
        .map(|(n, v)| (n, math::abs(v)))
        .collect();
    if pts.is_empty() {
        return none(DecayModel::None);
    }
    if pts.iter().all(|p| p.1 == 0.0) {
        return DecayFit { model: DecayModel::Collapsed, residual: 0.0, noise_floor: None, points_used: pts.len() };
    }
    let first = pts.iter().find(|p| p.1 > 0.0).map(|p| p.1).unwrap_or(0.0);
    let last = pts.last().map(|p| p.1).unwrap_or(0.0);
    if pts.len() >= 3 && last >= 0.9 * first {
        return none(DecayModel::NonDecaying);
    }

    let mut floor = None;
    let tail_len = (pts.len() / 10).max(2);
    if pts.len() >= tail_len + 5 {
        let head: Vec<(f64, f64)> =
            pts[..pts.len() - tail_len].iter().copied().filter(|p| p.1 > 0.0).collect();
        let tail: Vec<f64> = pts[pts.len() - tail_len..].iter().map(|p| p.1).collect();
        let med = math::median(&tail);
        if head.len() >= 5 && med > 0.0 {
            let (model, _) = choose(&log_fits(&head));
            let n_mid = pts[pts.len() - tail_len / 2 - 1].0;
            let predicted = DecayFit::declared(model).predict(n_mid);
            let plateau = match predicted {
                Some(p) => med > 3.0 * p,
                None => true,
            };
            if plateau {
                floor = Some(med);
            }
        }
    }

    let usable: Vec<(f64, f64)> = pts
        .iter()
        .copied()
        .filter(|p| p.1 > 0.0 && floor.is_none_or(|f| p.1 > 5.0 * f))
        .collect();
    if usable.len() < 5 {
        return DecayFit { model: DecayModel::None, residual: 0.0, noise_floor: floor, points_used: usable.len() };
    }
    let (model, residual) = choose(&log_fits(&usable));
    DecayFit { model, residual, noise_floor: floor, points_used: usable.len() }
}

/// Convenience wrapper for sequences indexed from 0.
pub fn fit_sequence(values: &[f64]) -> DecayFit {
    let pts: Vec<(f64, f64)> = values.iter().enumerate().map(|(n, &v)| (n as f64, v)).collect();
    fit_decay(&pts)
}
