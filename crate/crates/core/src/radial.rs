//! Radial functions along rays `mean + r·L·v`.
//!
//! For each constraint the exit radius is the supremum of the feasible part
//! of the ray. Quasi-convexity (or convexity of the distance function for
//! set oracles) makes the feasible part an interval starting at 0, so a
//! doubling scan from `r = 1` followed by bisection finds it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian_radial::GaussianModel;
use crate::oracles::{dot, norm, sub, ConvexSetOracle, InequalitySystem, RayExit};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RootOptions {
    pub g_tol: f64,
    pub d_tol: f64,
    pub tie_rel: f64,
    pub tie_abs: f64,
    /// Radial cutoff; `None` uses the chi quantile at `1 - 1e-12`.
    pub r_max: Option<f64>,
    pub max_bracket_doublings: usize,
    pub max_bisections: usize,
    pub newton_polish: bool,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            g_tol: 1e-10,
            d_tol: 1e-10,
            tie_rel: 1e-7,
            tie_abs: 1e-9,
            r_max: None,
            max_bracket_doublings: 64,
            max_bisections: 200,
            newton_polish: true,
        }
    }
}

impl RootOptions {
    pub fn validate(&self) -> Result<()> {
        let tols = [self.g_tol, self.d_tol, self.tie_rel, self.tie_abs];
        if tols.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::InvalidInput("root tolerances must be positive".into()));
        }
        if let Some(r) = self.r_max {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidInput("r_max must be positive".into()));
            }
        }
        if self.max_bisections == 0 || self.max_bracket_doublings == 0 {
            return Err(Error::InvalidInput("iteration limits must be positive".into()));
        }
        Ok(())
    }

    pub fn cutoff(&self, model: &GaussianModel) -> f64 {
        self.r_max.unwrap_or_else(|| model.radial_law().cutoff())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionClass {
    Finite,
    Infinite,
}

/// First-order data at the exit point for one active constraint.
#[derive(Debug, Clone, PartialEq)]
pub enum NormalData {
    /// Inequality mode: `(∇_x g_i, ∇_z g_i)` at the boundary point.
    Gradients {
        index: usize,
        grad_x: Vec<f64>,
        grad_z: Vec<f64>,
    },
    /// Set mode: `z - P_{S_i(x)}(z)` at the boundary point, of norm `eps`.
    Residual { index: usize, residual: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialHit {
    /// `+inf` for infinite directions.
    pub rho: f64,
    pub finite: bool,
    /// Constraints attaining the minimal radius within the tie band.
    pub active: Vec<usize>,
    /// The ray left the system's domain before any constraint boundary.
    pub capped: bool,
    pub radii: Vec<f64>,
    pub boundary_point: Option<Vec<f64>>,
    pub normal_data: Vec<NormalData>,
}

impl RadialHit {
    fn infinite(radii: Vec<f64>) -> Self {
        Self {
            rho: f64::INFINITY,
            finite: false,
            active: Vec::new(),
            capped: false,
            radii,
            boundary_point: None,
            normal_data: Vec::new(),
        }
    }

    pub fn is_tie(&self) -> bool {
        self.active.len() > 1
    }
}

pub fn classify_direction(hit: &RadialHit) -> DirectionClass {
    if hit.finite {
        DirectionClass::Finite
    } else {
        DirectionClass::Infinite
    }
}

/// Require `g_i(x, mean) < 0` for every constraint.
pub fn check_interior(sys: &dyn InequalitySystem, x: &[f64], model: &GaussianModel) -> Result<()> {
    if sys.random_dim() != model.dim() {
        return Err(Error::InvalidInput(format!(
            "system random dimension {} does not match model dimension {}",
            sys.random_dim(),
            model.dim()
        )));
    }
    sys.check_decision(x)?;
    for i in 0..sys.constraint_count() {
        let value = sys.value(i, x, model.mean());
        if !(value < 0.0) {
            return Err(Error::InteriorViolated { index: i, value });
        }
    }
    Ok(())
}

/// Require `mean ∈ S_i(x)` for every set.
pub fn check_interior_sets(
    sets: &[&dyn ConvexSetOracle],
    x: &[f64],
    model: &GaussianModel,
) -> Result<()> {
    if sets.is_empty() {
        return Err(Error::InvalidInput("empty set family".into()));
    }
    for (i, s) in sets.iter().enumerate() {
        if s.random_dim() != model.dim() {
            return Err(Error::InvalidInput(format!(
                "set {i} random dimension {} does not match model dimension {}",
                s.random_dim(),
                model.dim()
            )));
        }
        s.check_decision(x)?;
        if !s.contains(x, model.mean()) {
            return Err(Error::InteriorViolated {
                index: i,
                value: s.distance(x, model.mean()).unwrap_or(f64::NAN),
            });
        }
    }
    Ok(())
}

/// Exit radius of a scalar function `h` with `h(0) < 0` along `[0, r_max]`.
///
/// Returns `Ok(None)` when `h` stays negative up to `r_max`.
fn exit_radius(
    mut h: impl FnMut(f64) -> Result<f64>,
    mut slope: impl FnMut(f64) -> Result<f64>,
    r_max: f64,
    opts: &RootOptions,
    index: usize,
) -> Result<Option<f64>> {
    let feasible = |v: f64| v < 0.0;
    let mut lo = 0.0;
    let mut hi = r_max.min(1.0);
    let mut doublings = 0;
    loop {
        if !feasible(h(hi)?) {
            break;
        }
        if hi >= r_max || doublings >= opts.max_bracket_doublings {
            return Ok(None);
        }
        lo = hi;
        hi = (2.0 * hi).min(r_max);
        doublings += 1;
    }
    if hi < r_max && feasible(h(r_max)?) {
        return Err(Error::BracketFailure { index });
    }
    for _ in 0..opts.max_bisections {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if feasible(h(mid)?) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut root = lo;
    if opts.newton_polish && lo > 0.0 {
        let (hl, s) = (h(lo)?, slope(lo)?);
        if s > 0.0 && hl.is_finite() {
            let cand = lo - hl / s;
            if cand >= lo && cand <= hi && h(cand)?.abs() <= hl.abs() {
                root = cand;
            }
        }
    }
    Ok(Some(root))
}

fn tie_band(rho: f64, opts: &RootOptions) -> f64 {
    rho * (1.0 + opts.tie_rel) + opts.tie_abs
}

/// Radial function of an inequality system at `(x, v)`.
pub fn radial_root_inequality(
    sys: &dyn InequalitySystem,
    x: &[f64],
    v: &[f64],
    model: &GaussianModel,
    opts: &RootOptions,
) -> Result<RadialHit> {
    check_interior(sys, x, model)?;
    let r_max = opts.cutoff(model);
    hit_inequality(sys, x, v, model, opts, r_max)
}

/// As [`radial_root_inequality`] with the interior check and cutoff done by the caller.
pub(crate) fn hit_inequality(
    sys: &dyn InequalitySystem,
    x: &[f64],
    v: &[f64],
    model: &GaussianModel,
    opts: &RootOptions,
    r_max: f64,
) -> Result<RadialHit> {
    let mean = model.mean();
    let dir = model.scaled_direction(v);
    let s = sys.constraint_count();
    let mut radii = Vec::with_capacity(s);
    for i in 0..s {
        let exit = match sys.ray_exit(i, x, mean, &dir) {
            Some(RayExit::Finite(r)) if r < r_max => Some(r),
            Some(_) => None,
            None => exit_radius(
                |r| Ok(sys.value(i, x, &model.ray_point(r, &dir))),
                |r| Ok(dot(&sys.grad_z(i, x, &model.ray_point(r, &dir)), &dir)),
                r_max,
                opts,
                i,
            )?,
        };
        radii.push(exit.unwrap_or(f64::INFINITY));
    }
    let rho_g = radii.iter().copied().fold(f64::INFINITY, f64::min);
    let cap = sys.ray_cap(x, mean, &dir);

    if cap < r_max && cap <= tie_band(rho_g, opts) {
        // the domain boundary is reached first (or together with a root)
        return Ok(RadialHit {
            rho: cap,
            finite: true,
            active: Vec::new(),
            capped: true,
            radii,
            boundary_point: Some(model.ray_point(cap, &dir)),
            normal_data: Vec::new(),
        });
    }
    if !rho_g.is_finite() {
        return Ok(RadialHit::infinite(radii));
    }
    let band = tie_band(rho_g, opts);
    let active: Vec<usize> = (0..s).filter(|&i| radii[i] <= band).collect();
    let z = model.ray_point(rho_g, &dir);
    let normal_data = active
        .iter()
        .map(|&i| NormalData::Gradients {
            index: i,
            grad_x: sys.grad_x(i, x, &z),
            grad_z: sys.grad_z(i, x, &z),
        })
        .collect();
    Ok(RadialHit {
        rho: rho_g,
        finite: true,
        active,
        capped: false,
        radii,
        boundary_point: Some(z),
        normal_data,
    })
}

/// Radial function of the `eps`-enlargement of a family of convex sets.
/// `eps = 0` gives the radial function of the sets themselves, found by
/// bisection on membership.
pub fn radial_root_enlarged(
    sets: &[&dyn ConvexSetOracle],
    x: &[f64],
    v: &[f64],
    eps: f64,
    model: &GaussianModel,
    opts: &RootOptions,
) -> Result<RadialHit> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::InvalidInput(format!("enlargement must be >= 0, got {eps}")));
    }
    check_interior_sets(sets, x, model)?;
    let r_max = opts.cutoff(model);
    hit_enlarged(sets, x, v, eps, model, opts, r_max)
}

pub(crate) fn hit_enlarged(
    sets: &[&dyn ConvexSetOracle],
    x: &[f64],
    v: &[f64],
    eps: f64,
    model: &GaussianModel,
    opts: &RootOptions,
    r_max: f64,
) -> Result<RadialHit> {
    let dir = model.scaled_direction(v);
    let mut radii = Vec::with_capacity(sets.len());
    for (i, set) in sets.iter().enumerate() {
        let exit = if eps > 0.0 {
            exit_radius(
                |r| Ok(set.distance(x, &model.ray_point(r, &dir))? - eps),
                |r| {
                    let z = model.ray_point(r, &dir);
                    let u = sub(&z, &set.project(x, &z)?);
                    let n = norm(&u);
                    Ok(if n > 0.0 { dot(&u, &dir) / n } else { 0.0 })
                },
                r_max,
                opts,
                i,
            )?
        } else {
            exit_radius(
                |r| Ok(if set.contains(x, &model.ray_point(r, &dir)) { -1.0 } else { 1.0 }),
                |_| Ok(0.0),
                r_max,
                &RootOptions {
                    newton_polish: false,
                    ..*opts
                },
                i,
            )?
        };
        radii.push(exit.unwrap_or(f64::INFINITY));
    }
    let rho = radii.iter().copied().fold(f64::INFINITY, f64::min);
    if !rho.is_finite() {
        return Ok(RadialHit::infinite(radii));
    }
    let band = tie_band(rho, opts);
    let active: Vec<usize> = (0..sets.len()).filter(|&i| radii[i] <= band).collect();
    let z = model.ray_point(rho, &dir);
    let mut normal_data = Vec::with_capacity(active.len());
    for &i in &active {
        let p = sets[i].project(x, &z)?;
        normal_data.push(NormalData::Residual {
            index: i,
            residual: sub(&z, &p),
        });
    }
    Ok(RadialHit {
        rho,
        finite: true,
        active,
        capped: false,
        radii,
        boundary_point: Some(z),
        normal_data,
    })
}
