//! Analytic inequality fixtures.

use std::sync::Arc;

use super::{check_len, dot, InequalitySystem};
use crate::error::{Error, Result};

/// `g(x, z) = ⟨a, z⟩ - level(x)`.
///
/// With `level_as_decision` the decision is the scalar level itself.
/// Otherwise the decision `x ∈ R^m` shifts the half-space and the level is
/// `1 + ⟨a, x⟩`.
#[derive(Debug, Clone)]
pub struct HalfSpace {
    normal: Vec<f64>,
    level_as_decision: bool,
}

impl HalfSpace {
    pub fn new(normal: Vec<f64>, level_as_decision: bool) -> Result<Self> {
        let n = dot(&normal, &normal).sqrt();
        if normal.is_empty() || (n - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "half-space normal must be a unit vector, got norm {n}"
            )));
        }
        Ok(Self {
            normal,
            level_as_decision,
        })
    }

    /// Unit normal `e_1` in `R^m`, decision = level.
    pub fn axis(m: usize) -> Self {
        let mut a = vec![0.0; m];
        a[0] = 1.0;
        Self {
            normal: a,
            level_as_decision: true,
        }
    }

    pub fn normal(&self) -> &[f64] {
        &self.normal
    }

    fn level(&self, x: &[f64]) -> f64 {
        if self.level_as_decision {
            x[0]
        } else {
            1.0 + dot(&self.normal, x)
        }
    }
}

impl InequalitySystem for HalfSpace {
    fn constraint_count(&self) -> usize {
        1
    }
    fn decision_dim(&self) -> usize {
        if self.level_as_decision {
            1
        } else {
            self.normal.len()
        }
    }
    fn random_dim(&self) -> usize {
        self.normal.len()
    }
    fn value(&self, _i: usize, x: &[f64], z: &[f64]) -> f64 {
        dot(&self.normal, z) - self.level(x)
    }
    fn grad_x(&self, _i: usize, _x: &[f64], _z: &[f64]) -> Vec<f64> {
        if self.level_as_decision {
            vec![-1.0]
        } else {
            self.normal.iter().map(|a| -a).collect()
        }
    }
    fn grad_z(&self, _i: usize, _x: &[f64], _z: &[f64]) -> Vec<f64> {
        self.normal.clone()
    }
}

type ScalarMap = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VectorMap = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// `g(x, z) = f(x) + ½ ln(1 + (cᵀz)²)`: quasi-convex but not convex in `z`.
#[derive(Clone)]
pub struct Slab {
    c: Vec<f64>,
    decision_dim: usize,
    f: ScalarMap,
    grad_f: VectorMap,
}

impl std::fmt::Debug for Slab {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Slab")
            .field("c", &self.c)
            .field("decision_dim", &self.decision_dim)
            .finish_non_exhaustive()
    }
}

impl Slab {
    pub fn new(c: Vec<f64>, decision_dim: usize, f: ScalarMap, grad_f: VectorMap) -> Result<Self> {
        if c.iter().all(|v| *v == 0.0) || c.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("slab vector c must be finite and nonzero".into()));
        }
        Ok(Self {
            c,
            decision_dim,
            f,
            grad_f,
        })
    }

    /// Scalar decision with `f(x) = x`.
    pub fn level(c: Vec<f64>) -> Result<Self> {
        Self::new(c, 1, Arc::new(|x: &[f64]| x[0]), Arc::new(|_: &[f64]| vec![1.0]))
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    /// `|cᵀz|` on the boundary `g = 0`: `sqrt(e^{-2 f(x)} - 1)`.
    pub fn threshold(&self, x: &[f64]) -> f64 {
        ((-2.0 * (self.f)(x)).exp() - 1.0).sqrt()
    }
}

impl InequalitySystem for Slab {
    fn constraint_count(&self) -> usize {
        1
    }
    fn decision_dim(&self) -> usize {
        self.decision_dim
    }
    fn random_dim(&self) -> usize {
        self.c.len()
    }
    fn value(&self, _i: usize, x: &[f64], z: &[f64]) -> f64 {
        let t = dot(&self.c, z);
        (self.f)(x) + 0.5 * (t * t).ln_1p()
    }
    fn grad_x(&self, _i: usize, x: &[f64], _z: &[f64]) -> Vec<f64> {
        (self.grad_f)(x)
    }
    fn grad_z(&self, _i: usize, _x: &[f64], z: &[f64]) -> Vec<f64> {
        let t = dot(&self.c, z);
        let s = t / (1.0 + t * t);
        self.c.iter().map(|c| s * c).collect()
    }
    fn check_decision(&self, x: &[f64]) -> Result<()> {
        check_len("decision", x, self.decision_dim)?;
        let fx = (self.f)(x);
        if fx >= 0.0 {
            return Err(Error::InteriorViolated { index: 0, value: fx });
        }
        Ok(())
    }
}

/// Smooth convex description of `{(z1+2)(z2+2) >= x, z1 >= -2, z2 >= -2}`:
/// `g(x, z) = ln x - ln(z1 + 2) - ln(z2 + 2)`, `+inf` off the open quadrant.
#[derive(Debug, Clone, Copy, Default)]
pub struct HyperbolicInequality;

impl InequalitySystem for HyperbolicInequality {
    fn constraint_count(&self) -> usize {
        1
    }
    fn decision_dim(&self) -> usize {
        1
    }
    fn random_dim(&self) -> usize {
        2
    }
    fn value(&self, _i: usize, x: &[f64], z: &[f64]) -> f64 {
        let (a, b) = (z[0] + 2.0, z[1] + 2.0);
        if a <= 0.0 || b <= 0.0 {
            return f64::INFINITY;
        }
        x[0].ln() - a.ln() - b.ln()
    }
    fn grad_x(&self, _i: usize, x: &[f64], _z: &[f64]) -> Vec<f64> {
        vec![1.0 / x[0]]
    }
    fn grad_z(&self, _i: usize, _x: &[f64], z: &[f64]) -> Vec<f64> {
        vec![-1.0 / (z[0] + 2.0), -1.0 / (z[1] + 2.0)]
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

/// `g ≡ -1`: every direction is infinite.
#[derive(Debug, Clone, Copy)]
pub struct InfiniteOnly {
    pub decision_dim: usize,
    pub random_dim: usize,
}

impl InequalitySystem for InfiniteOnly {
    fn constraint_count(&self) -> usize {
        1
    }
    fn decision_dim(&self) -> usize {
        self.decision_dim
    }
    fn random_dim(&self) -> usize {
        self.random_dim
    }
    fn value(&self, _i: usize, _x: &[f64], _z: &[f64]) -> f64 {
        -1.0
    }
    fn grad_x(&self, _i: usize, _x: &[f64], _z: &[f64]) -> Vec<f64> {
        vec![0.0; self.decision_dim]
    }
    fn grad_z(&self, _i: usize, _x: &[f64], _z: &[f64]) -> Vec<f64> {
        vec![0.0; self.random_dim]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halfspace_evaluation() {
        let h = HalfSpace::axis(2);
        assert_eq!(h.value(0, &[1.0], &[0.5, 123.0]), -0.5);
        assert_eq!(h.grad_z(0, &[1.0], &[0.3, 0.1]), vec![1.0, 0.0]);
        assert_eq!(h.grad_x(0, &[7.0], &[0.3, 0.1]), vec![-1.0]);
        assert!(HalfSpace::new(vec![1.0, 1.0], true).is_err());
    }

    #[test]
    fn slab_evaluation() {
        let s = Slab::level(vec![1.0, 0.0]).unwrap();
        assert_eq!(s.value(0, &[-1.0], &[0.0, 5.0]), -1.0);
        let z = [0.7, -2.0];
        let g = s.grad_z(0, &[-1.0], &z);
        assert!((g[0] - 0.7 / 1.49).abs() < 1e-15);
        assert_eq!(g[1], 0.0);
        // threshold sqrt(e^2 - 1)
        assert!((s.threshold(&[-1.0]) - 2.527_658_224_311_714_3).abs() < 1e-12);
        assert!(s.value(0, &[-1.0], &[s.threshold(&[-1.0]), 0.0]).abs() < 1e-14);
        assert!(matches!(
            s.check_decision(&[0.0]),
            Err(Error::InteriorViolated { .. })
        ));
    }

    #[test]
    fn hyperbolic_inequality_domain() {
        let h = HyperbolicInequality;
        assert!(h.value(0, &[1.0], &[0.0, 0.0]) < 0.0);
        assert_eq!(h.value(0, &[1.0], &[-2.5, 0.0]), f64::INFINITY);
        assert!(h.value(0, &[1.0], &[-1.0, -1.0]).abs() < 1e-15);
        assert!(h.check_decision(&[4.0]).is_err());
        assert!(h.check_decision(&[0.0]).is_err());
    }
}
