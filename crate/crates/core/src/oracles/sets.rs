//! Projection-based convex set fixtures.

use super::{check_len, norm, sub, ConvexSetOracle};
use crate::error::{Error, Result};

/// Euclidean ball of radius `x` around a fixed center.
#[derive(Debug, Clone)]
pub struct Ball {
    center: Vec<f64>,
}

impl Ball {
    pub fn new(center: Vec<f64>) -> Self {
        Self { center }
    }
}

impl ConvexSetOracle for Ball {
    fn decision_dim(&self) -> usize {
        1
    }
    fn random_dim(&self) -> usize {
        self.center.len()
    }
    fn contains(&self, x: &[f64], z: &[f64]) -> bool {
        norm(&sub(z, &self.center)) <= x[0]
    }
    fn project(&self, x: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        let d = sub(z, &self.center);
        let n = norm(&d);
        if n <= x[0] {
            return Ok(z.to_vec());
        }
        Ok(self
            .center
            .iter()
            .zip(&d)
            .map(|(c, di)| c + di * x[0] / n)
            .collect())
    }
    fn distance(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        Ok((norm(&sub(z, &self.center)) - x[0]).max(0.0))
    }
    fn has_sensitivity(&self) -> bool {
        true
    }
    fn sq_dist_sensitivity(&self, x: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![-self.distance(x, z)?])
    }
    fn check_decision(&self, x: &[f64]) -> Result<()> {
        check_len("decision", x, 1)?;
        if x[0] <= 0.0 {
            return Err(Error::InvalidInput("ball radius must be positive".into()));
        }
        Ok(())
    }
}

const PROJECTION_NEWTON_ITERS: usize = 200;
const PROJECTION_BISECTION_ITERS: usize = 50;

/// `S(x) = {(z1+2)(z2+2) >= x, z1 >= -2, z2 >= -2}` for `x > 0`.
///
/// The projection of an exterior point lies on the branch `a1 a2 = x` with
/// `a = w + 2`. Parametrizing that branch by `t = a1` turns the KKT system
/// into the stationarity quartic `t⁴ - b1 t³ + b2 x t - x² = 0` (`b = z + 2`),
/// whose positive root is unique for exterior points since the evolute of
/// the branch lies inside the set.
#[derive(Debug, Clone, Copy, Default)]
pub struct HyperbolicSet;

impl HyperbolicSet {
    fn project_exterior(x: f64, b1: f64, b2: f64) -> Result<(f64, f64)> {
        let f = |t: f64| ((t - b1) * t * t + b2 * x) * t - x * x;
        let df = |t: f64| (4.0 * t - 3.0 * b1) * t * t + b2 * x;

        let mut lo = 1.0;
        while f(lo) >= 0.0 {
            lo *= 0.5;
            if lo < f64::MIN_POSITIVE {
                return Err(Error::ProjectionDiverged { iterations: 0 });
            }
        }
        let mut hi = 1.0f64.max(lo);
        while f(hi) <= 0.0 {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::ProjectionDiverged { iterations: 0 });
            }
        }

        let mut t = 0.5 * (lo + hi);
        for iter in 0..PROJECTION_NEWTON_ITERS + PROJECTION_BISECTION_ITERS {
            let ft = f(t);
            if ft == 0.0 {
                return Ok((t, x / t));
            }
            if ft < 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let slope = df(t);
            let newton = t - ft / slope;
            // damped: stay strictly inside the bracket, otherwise bisect
            let next = if iter < PROJECTION_NEWTON_ITERS && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - t).abs() <= 4.0 * f64::EPSILON * t || hi - lo <= 4.0 * f64::EPSILON * hi {
                return Ok((next, x / next));
            }
            t = next;
        }
        Err(Error::ProjectionDiverged {
            iterations: PROJECTION_NEWTON_ITERS,
        })
    }
}

impl ConvexSetOracle for HyperbolicSet {
    fn decision_dim(&self) -> usize {
        1
    }
    fn random_dim(&self) -> usize {
        2
    }
    fn contains(&self, x: &[f64], z: &[f64]) -> bool {
        let (a1, a2) = (z[0] + 2.0, z[1] + 2.0);
        a1 >= 0.0 && a2 >= 0.0 && a1 * a2 >= x[0]
    }
    fn project(&self, x: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        if self.contains(x, z) {
            return Ok(z.to_vec());
        }
        let (a1, a2) = Self::project_exterior(x[0], z[0] + 2.0, z[1] + 2.0)?;
        Ok(vec![a1 - 2.0, a2 - 2.0])
    }
    fn has_sensitivity(&self) -> bool {
        true
    }
    fn sq_dist_sensitivity(&self, x: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        if self.contains(x, z) {
            return Ok(vec![0.0]);
        }
        // the KKT multiplier of `x - a1 a2 <= 0`
        let p = self.project(x, z)?;
        let d = norm(&sub(z, &p));
        let (a1, a2) = (p[0] + 2.0, p[1] + 2.0);
        Ok(vec![d / a1.hypot(a2)])
    }
    fn check_decision(&self, x: &[f64]) -> Result<()> {
        check_len("decision", x, 1)?;
        if !(x[0] > 0.0 && x[0] < 4.0) {
            return Err(Error::InvalidInput(format!(
                "hyperbolic level must lie in (0, 4), got {}",
                x[0]
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dense search over the branch `a1 a2 = x`, refined by golden section.
    fn grid_projection(x: f64, z: [f64; 2]) -> [f64; 2] {
        let dist = |t: f64| {
            let p = [t - 2.0, x / t - 2.0];
            (p[0] - z[0]).hypot(p[1] - z[1])
        };
        let mut best = (f64::INFINITY, 0.0);
        let n = 200_000;
        for k in 1..n {
            let t = (-8.0 + 16.0 * k as f64 / n as f64).exp();
            let d = dist(t);
            if d < best.0 {
                best = (d, t);
            }
        }
        let (mut a, mut b) = (best.1 * 0.999, best.1 * 1.001);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if dist(c) < dist(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let t = 0.5 * (a + b);
        [t - 2.0, x / t - 2.0]
    }

    #[test]
    fn interior_point_is_fixed() {
        let s = HyperbolicSet;
        assert_eq!(s.project(&[1.0], &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn corner_projects_to_symmetric_point() {
        let p = HyperbolicSet.project(&[1.0], &[-2.0, -2.0]).unwrap();
        assert!((p[0] + 1.0).abs() < 1e-12 && (p[1] + 1.0).abs() < 1e-12, "{p:?}");
        let g = grid_projection(1.0, [-2.0, -2.0]);
        assert!((g[0] + 1.0).abs() < 1e-6 && (g[1] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn matches_grid_search() {
        let pts = [[-1.5, -1.9], [-3.0, 1.0], [2.0, -2.5], [-1.2, -1.4], [-5.0, -5.0], [0.5, -1.95]];
        for x in [0.5, 1.0, 2.0] {
            for z in pts {
                if HyperbolicSet.contains(&[x], &z) {
                    continue;
                }
                let p = HyperbolicSet.project(&[x], &z).unwrap();
                let g = grid_projection(x, z);
                assert!((p[0] - g[0]).abs() < 1e-6 && (p[1] - g[1]).abs() < 1e-6, "x={x} z={z:?} {p:?} {g:?}");
                assert!(((p[0] + 2.0) * (p[1] + 2.0) - x).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn boundary_normal_parallel_to_swapped_shift() {
        let z = [-1.7, -1.8];
        let p = HyperbolicSet.project(&[1.0], &z).unwrap();
        let r = [z[0] - p[0], z[1] - p[1]];
        let n = [p[1] + 2.0, p[0] + 2.0];
        let cross = r[0] * n[1] - r[1] * n[0];
        assert!(cross.abs() < 1e-12 * r[0].hypot(r[1]) * n[0].hypot(n[1]));
        // outward residual points against the normal (λ <= 0 in N_S)
        assert!(r[0] * n[0] + r[1] * n[1] < 0.0);
    }

    #[test]
    fn ball_projection() {
        let b = Ball::new(vec![1.0, 0.0]);
        let p = b.project(&[1.0], &[4.0, 0.0]).unwrap();
        assert_eq!(p, vec![2.0, 0.0]);
        assert_eq!(b.distance(&[1.0], &[4.0, 0.0]).unwrap(), 2.0);
        assert_eq!(b.sq_dist_sensitivity(&[1.0], &[4.0, 0.0]).unwrap(), vec![-2.0]);
    }
}
