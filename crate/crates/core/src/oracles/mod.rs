//! Constraint abstractions.
//!
//! Two families are supported. [`InequalitySystem`] describes the feasible set
//! as `{z : g_i(x, z) <= 0 for all i}` with each `g_i` continuously
//! differentiable and quasi-convex in `z`. [`ConvexSetOracle`] describes a
//! convex body `S(x)` through membership and Euclidean projection, which is
//! all the enlarged probability `P[d(xi, S(x)) <= eps]` needs.

mod energy;
mod fixtures;
mod sets;

pub use energy::{CrossCorrelation, EnergyParams, EnergySystem};
pub use fixtures::{HalfSpace, HyperbolicInequality, InfiniteOnly, Slab};
pub use sets::{Ball, HyperbolicSet};

use serde::Serialize;

use crate::error::{Error, Result};

/// Exit of a single constraint along a ray `base + r·dir`, `r >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RayExit {
    Finite(f64),
    Infinite,
}

pub trait InequalitySystem: Sync {
    fn constraint_count(&self) -> usize;
    fn decision_dim(&self) -> usize;
    fn random_dim(&self) -> usize;

    fn value(&self, i: usize, x: &[f64], z: &[f64]) -> f64;
    fn grad_x(&self, i: usize, x: &[f64], z: &[f64]) -> Vec<f64>;
    fn grad_z(&self, i: usize, x: &[f64], z: &[f64]) -> Vec<f64>;

    /// Closed-form exit radius, when the constraint admits one. `None` makes
    /// the radial solver fall back to bracketing and bisection.
    fn ray_exit(&self, _i: usize, _x: &[f64], _base: &[f64], _dir: &[f64]) -> Option<RayExit> {
        None
    }

    /// Largest `r` for which `base + r·dir` stays inside the domain where
    /// the system is defined.
    fn ray_cap(&self, _x: &[f64], _base: &[f64], _dir: &[f64]) -> f64 {
        f64::INFINITY
    }

    /// Decision-space domain check, run before any evaluation.
    fn check_decision(&self, x: &[f64]) -> Result<()> {
        check_len("decision", x, self.decision_dim())
    }
}

pub trait ConvexSetOracle: Sync {
    fn decision_dim(&self) -> usize;
    fn random_dim(&self) -> usize;

    fn contains(&self, x: &[f64], z: &[f64]) -> bool;

    /// Euclidean projection of `z` onto `S(x)`.
    fn project(&self, x: &[f64], z: &[f64]) -> Result<Vec<f64>>;

    fn distance(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        if self.contains(x, z) {
            return Ok(0.0);
        }
        let p = self.project(x, z)?;
        Ok(norm(&sub(z, &p)))
    }

    fn has_sensitivity(&self) -> bool {
        false
    }

    /// Gradient in `x` of `½ d²(z, S(x))` at fixed `z`.
    fn sq_dist_sensitivity(&self, _x: &[f64], _z: &[f64]) -> Result<Vec<f64>> {
        Err(Error::MissingSensitivity)
    }

    fn check_decision(&self, x: &[f64]) -> Result<()> {
        check_len("decision", x, self.decision_dim())
    }
}

/// Empirical growth ratios `‖∇_x g_i‖ / ‖∇_z g_i‖` over visited boundary points.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GrowthDiagnostic {
    pub samples: usize,
    pub max_ratio: f64,
    /// `‖z‖` of the boundary point where the max ratio occurred.
    pub argmax_norm: f64,
    pub argmax_constraint: Option<usize>,
    /// Boundary points where `∇_z g_i` vanished.
    pub degenerate: usize,
}

impl GrowthDiagnostic {
    pub fn record(&mut self, i: usize, z: &[f64], grad_x: &[f64], grad_z: &[f64]) {
        let gz = norm(grad_z);
        self.samples += 1;
        if gz == 0.0 {
            self.degenerate += 1;
            return;
        }
        let ratio = norm(grad_x) / gz;
        if ratio > self.max_ratio || self.argmax_constraint.is_none() {
            self.max_ratio = ratio;
            self.argmax_norm = norm(z);
            self.argmax_constraint = Some(i);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.degenerate == 0 && self.max_ratio.is_finite()
    }
}

/// Forwards every call except [`InequalitySystem::ray_exit`], forcing the
/// generic root search. Useful to cross-check closed forms.
pub struct GenericSearch<'a, S: ?Sized>(pub &'a S);

impl<S: InequalitySystem + ?Sized> InequalitySystem for GenericSearch<'_, S> {
    fn constraint_count(&self) -> usize {
        self.0.constraint_count()
    }
    fn decision_dim(&self) -> usize {
        self.0.decision_dim()
    }
    fn random_dim(&self) -> usize {
        self.0.random_dim()
    }
    fn value(&self, i: usize, x: &[f64], z: &[f64]) -> f64 {
        self.0.value(i, x, z)
    }
    fn grad_x(&self, i: usize, x: &[f64], z: &[f64]) -> Vec<f64> {
        self.0.grad_x(i, x, z)
    }
    fn grad_z(&self, i: usize, x: &[f64], z: &[f64]) -> Vec<f64> {
        self.0.grad_z(i, x, z)
    }
    fn ray_cap(&self, x: &[f64], base: &[f64], dir: &[f64]) -> f64 {
        self.0.ray_cap(x, base, dir)
    }
    fn check_decision(&self, x: &[f64]) -> Result<()> {
        self.0.check_decision(x)
    }
}

pub(crate) fn check_len(what: &str, v: &[f64], expected: usize) -> Result<()> {
    if v.len() != expected {
        return Err(Error::InvalidInput(format!(
            "{what} vector has length {}, expected {expected}",
            v.len()
        )));
    }
    if v.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidInput(format!("{what} vector has non-finite entries")));
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}
