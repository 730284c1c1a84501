use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::measures::EmpiricalMeasure;

/// Geometry of a one-dimensional space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineMetric {
    Interval,
    /// `ℝ/ℤ`; coordinates are reduced mod 1.
    Circle,
}

/// Exact `W₁` between the base marginals (`y` coordinates) of two measures.
pub fn wasserstein_1d(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, metric: LineMetric) -> Result<f64> {
    let xs: Vec<f64> = mu.points().iter().map(|p| p.y).collect();
    let ys: Vec<f64> = nu.points().iter().map(|p| p.y).collect();
    wasserstein_1d_values(&xs, mu.weights(), &ys, nu.weights(), metric)
}

/// Exact `W₁` between `∑ a_i δ_{x_i}` and `∑ b_j δ_{y_j}` on a line or circle.
///
/// On the interval this is `∫ |F − G|`. On the circle it is
/// `min_c ∫₀¹ |F − G − c|`, whose minimizer is a weighted median of the
/// piecewise-constant function `F − G`, so no search over rotations is needed.
pub fn wasserstein_1d_values(xs: &[f64], a: &[f64], ys: &[f64], b: &[f64], metric: LineMetric) -> Result<f64> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::Argument("empty measure".into()));
    }
    if xs.len() != a.len() || ys.len() != b.len() {
        return Err(Error::Argument("coordinate and weight lengths differ".into()));
    }
    let norm_a = math::sum(a.iter().copied());
    let norm_b = math::sum(b.iter().copied());
    let reduce = |x: f64| match metric {
        LineMetric::Interval => x,
        LineMetric::Circle => math::frac(x),
    };
    // (position, signed mass): +a for mu, −b for nu
    let mut events: Vec<(f64, f64)> = xs
        .iter()
        .zip(a)
        .map(|(&x, &w)| (reduce(x), w / norm_a))
        .chain(ys.iter().zip(b).map(|(&y, &w)| (reduce(y), -w / norm_b)))
        .collect();
    events.sort_by(|p, q| p.0.total_cmp(&q.0));

    // segments of constant D = F − G between consecutive event positions
    let mut segments: Vec<(f64, f64)> = Vec::with_capacity(events.len());
    let mut d = 0.0;
    let mut comp = 0.0;
    for w in 0..events.len() {
        let yv = events[w].1 - comp;
        let t = d + yv;
        comp = (t - d) - yv;
        d = t;
        if w + 1 < events.len() {
            let len = events[w + 1].0 - events[w].0;
            if len > 0.0 {
                segments.push((d, len));
            }
        }
    }
    let shift = match metric {
        LineMetric::Interval => 0.0,
        LineMetric::Circle => {
            // D is 0 on [0, first event) and on [last event, 1)
            let outer = events[0].0 + (1.0 - events[events.len() - 1].0);
            if outer > 0.0 {
                segments.push((0.0, outer));
            }
            weighted_median(&mut segments.clone())
        }
    };
    Ok(math::sum(segments.iter().map(|&(v, len)| len * math::abs(v - shift))))
}

fn weighted_median(items: &mut [(f64, f64)]) -> f64 {
    items.sort_by(|p, q| p.0.total_cmp(&q.0));
    let total: f64 = items.iter().map(|p| p.1).sum();
    let mut acc = 0.0;
    for &(v, w) in items.iter() {
        acc += w;
        if acc >= 0.5 * total {
            return v;
        }
    }
    items.last().map(|p| p.0).unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::measures::Space;

    fn m(ys: &[f64]) -> EmpiricalMeasure {
        EmpiricalMeasure::uniform(ys.iter().map(|&y| Point::base(y)).collect(), Space::Base).unwrap()
    }

    #[test]
    fn interval_examples() {
        assert_eq!(wasserstein_1d(&m(&[0.0]), &m(&[1.0]), LineMetric::Interval).unwrap(), 1.0);
        let w = wasserstein_1d(&m(&[0.0, 0.5]), &m(&[0.5, 1.0]), LineMetric::Interval).unwrap();
        assert!((w - 0.5).abs() < 1e-15);
        let a = m(&[0.1, 0.7, 0.3]);
        assert_eq!(wasserstein_1d(&a, &a, LineMetric::Interval).unwrap(), 0.0);
        assert!(wasserstein_1d_values(&[], &[], &[0.5], &[1.0], LineMetric::Interval).is_err());
    }

    #[test]
    fn circle_wraps_around() {
        let w = wasserstein_1d(&m(&[0.05]), &m(&[0.95]), LineMetric::Circle).unwrap();
        assert!((w - 0.1).abs() < 1e-12);
        // rotating the uniform grid by a quarter step
        let a: Vec<f64> = (0..4).map(|i| i as f64 / 4.0).collect();
        let b: Vec<f64> = a.iter().map(|x| x + 0.125).collect();
        let w = wasserstein_1d(&m(&a), &m(&b), LineMetric::Circle).unwrap();
        assert!((w - 0.125).abs() < 1e-12);
    }
}
