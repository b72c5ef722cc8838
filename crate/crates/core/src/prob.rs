//! Probability values and gradients assembled from per-direction radial hits.
//!
//! With `R` chi-distributed and `v` uniform on the sphere,
//! `φ(x) = E_v[F_chi(ρ(x, v))]` and, away from ties,
//! `∇φ(x) = -E_v[f_chi(ρ) ∇_x g_i / ⟨∇_z g_i, L v⟩]` at the exit point.
//! A fixed [`DirectionSet`] makes both a deterministic smooth function of
//! `x`, which the solver relies on.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian_radial::{DirectionSet, GaussianModel, RadialLaw, SamplingMethod};
use crate::oracles::{dot, norm, ConvexSetOracle, GrowthDiagnostic, InequalitySystem};
use crate::radial::{
    check_interior, check_interior_sets, hit_enlarged, hit_inequality, NormalData, RadialHit,
    RootOptions,
};

/// Floor on the transversality denominator `⟨normal, L v⟩`.
pub const SLOPE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    /// Uniform weights over the active constraints.
    #[default]
    Average,
    /// All weight on the smallest active index.
    #[serde(alias = "min-index")]
    MinIndex,
}

impl std::str::FromStr for TiePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" => Ok(TiePolicy::Average),
            "min_index" | "min-index" => Ok(TiePolicy::MinIndex),
            other => Err(Error::InvalidInput(format!("unknown tie policy `{other}`"))),
        }
    }
}

/// Which feasible set the probability is taken over.
#[derive(Clone, Copy)]
pub enum Constraints<'a> {
    Inequality(&'a dyn InequalitySystem),
    /// `{z : d(z, S_i(x)) <= eps for all i}`; `eps = 0` is the sets themselves.
    Enlarged {
        sets: &'a [&'a dyn ConvexSetOracle],
        eps: f64,
    },
}

impl Constraints<'_> {
    pub fn decision_dim(&self) -> usize {
        match self {
            Constraints::Inequality(s) => s.decision_dim(),
            Constraints::Enlarged { sets, .. } => sets.first().map_or(0, |s| s.decision_dim()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionRecord {
    pub index: usize,
    pub hit: RadialHit,
    /// `e(x, v) = F_chi(ρ)`, 1 on infinite directions.
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbEstimate {
    pub value: f64,
    /// Sample standard deviation of contributions over `sqrt(N)`; reported
    /// for Monte Carlo direction sets only.
    pub std_error: Option<f64>,
    /// The same statistic regardless of the sampling method.
    pub crude_std_error: f64,
    pub per_direction: Vec<DirectionRecord>,
    pub n_infinite: usize,
    pub n_ties: usize,
    pub n_capped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradEstimate {
    pub gradient: Vec<f64>,
    pub tie_fraction: f64,
    /// Per-direction terms `w(v)`; the gradient is their weighted sum.
    pub per_direction: Vec<Vec<f64>>,
    /// Componentwise sample standard error of the terms.
    pub crude_std_error: Vec<f64>,
    pub value: f64,
}

/// Fixed evaluation context: constraints, law, direction set and options.
pub struct Evaluator<'a> {
    constraints: Constraints<'a>,
    model: &'a GaussianModel,
    dirs: &'a DirectionSet,
    opts: RootOptions,
    r_max: f64,
    law: RadialLaw,
}

impl<'a> Evaluator<'a> {
    pub fn new(
        constraints: Constraints<'a>,
        model: &'a GaussianModel,
        dirs: &'a DirectionSet,
        opts: RootOptions,
    ) -> Result<Self> {
        opts.validate()?;
        if dirs.is_empty() {
            return Err(Error::InvalidInput("empty direction set".into()));
        }
        if dirs.dim() != model.dim() {
            return Err(Error::InvalidInput(format!(
                "directions live in R^{} but the model in R^{}",
                dirs.dim(),
                model.dim()
            )));
        }
        if let Constraints::Enlarged { eps, .. } = constraints {
            if !(eps >= 0.0 && eps.is_finite()) {
                return Err(Error::InvalidInput(format!("enlargement must be >= 0, got {eps}")));
            }
        }
        Ok(Self {
            constraints,
            model,
            dirs,
            r_max: opts.cutoff(model),
            opts,
            law: model.radial_law(),
        })
    }

    pub fn model(&self) -> &GaussianModel {
        self.model
    }

    pub fn directions(&self) -> &DirectionSet {
        self.dirs
    }

    pub fn constraints(&self) -> Constraints<'a> {
        self.constraints
    }

    pub fn cutoff(&self) -> f64 {
        self.r_max
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        match self.constraints {
            Constraints::Inequality(sys) => check_interior(sys, x, self.model),
            Constraints::Enlarged { sets, .. } => check_interior_sets(sets, x, self.model),
        }
    }

    fn hit(&self, x: &[f64], k: usize) -> Result<RadialHit> {
        let v = self.dirs.direction(k);
        match self.constraints {
            Constraints::Inequality(sys) => hit_inequality(sys, x, v, self.model, &self.opts, self.r_max),
            Constraints::Enlarged { sets, eps } => {
                hit_enlarged(sets, x, v, eps, self.model, &self.opts, self.r_max)
            }
        }
    }

    fn hits(&self, x: &[f64]) -> Result<Vec<RadialHit>> {
        self.check(x)?;
        (0..self.dirs.len())
            .into_par_iter()
            .map(|k| self.hit(x, k))
            .collect()
    }

    fn contribution(&self, hit: &RadialHit) -> f64 {
        if hit.finite {
            self.law.cdf(hit.rho)
        } else {
            1.0
        }
    }

    /// `φ(x)` (or `φ_eps(x)`) with per-direction records.
    pub fn value(&self, x: &[f64]) -> Result<ProbEstimate> {
        let hits = self.hits(x)?;
        let contributions: Vec<f64> = hits.iter().map(|h| self.contribution(h)).collect();
        let (value, crude) = weighted_mean_and_se(&contributions, self.dirs.weights());
        let n_infinite = hits.iter().filter(|h| !h.finite).count();
        let n_ties = hits.iter().filter(|h| h.is_tie()).count();
        let n_capped = hits.iter().filter(|h| h.capped).count();
        let per_direction = hits
            .into_iter()
            .zip(contributions)
            .enumerate()
            .map(|(index, (hit, contribution))| DirectionRecord {
                index,
                hit,
                contribution,
            })
            .collect();
        Ok(ProbEstimate {
            value: value.clamp(0.0, 1.0),
            std_error: (self.dirs.method() == SamplingMethod::MonteCarlo).then_some(crude),
            crude_std_error: crude,
            per_direction,
            n_infinite,
            n_ties,
            n_capped,
        })
    }

    /// Scalar `φ(x)` without records.
    pub fn probability(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let contributions: Vec<f64> = (0..self.dirs.len())
            .into_par_iter()
            .map(|k| self.hit(x, k).map(|h| self.contribution(&h)))
            .collect::<Result<_>>()?;
        Ok(weighted_mean_and_se(&contributions, self.dirs.weights()).0.clamp(0.0, 1.0))
    }

    /// Gradient (or, with ties, an element of the subdifferential estimate).
    pub fn gradient(&self, x: &[f64], tie_policy: TiePolicy) -> Result<GradEstimate> {
        if let Constraints::Enlarged { sets, eps } = self.constraints {
            if eps <= 0.0 {
                return Err(Error::InvalidInput(
                    "gradient of a set-oracle probability needs eps > 0".into(),
                ));
            }
            if sets.iter().any(|s| !s.has_sensitivity()) {
                return Err(Error::MissingSensitivity);
            }
        }
        let n = self.constraints.decision_dim();
        let hits = self.hits(x)?;
        let terms: Vec<Vec<f64>> = hits
            .par_iter()
            .enumerate()
            .map(|(k, hit)| self.term(x, k, hit, tie_policy, n))
            .collect::<Result<_>>()?;
        let w = self.dirs.weights();
        let mut gradient = vec![0.0; n];
        let mut crude_std_error = vec![0.0; n];
        let mut column = vec![0.0; terms.len()];
        for j in 0..n {
            column.iter_mut().zip(&terms).for_each(|(c, t)| *c = t[j]);
            let (mean, se) = weighted_mean_and_se(&column, w);
            gradient[j] = mean;
            crude_std_error[j] = se;
        }
        let contributions: Vec<f64> = hits.iter().map(|h| self.contribution(h)).collect();
        let ties = hits.iter().filter(|h| h.is_tie()).count();
        Ok(GradEstimate {
            gradient,
            tie_fraction: ties as f64 / hits.len() as f64,
            per_direction: terms,
            crude_std_error,
            value: weighted_mean_and_se(&contributions, w).0.clamp(0.0, 1.0),
        })
    }

    fn term(&self, x: &[f64], k: usize, hit: &RadialHit, tie: TiePolicy, n: usize) -> Result<Vec<f64>> {
        let mut w = vec![0.0; n];
        if !hit.finite || hit.capped || hit.normal_data.is_empty() {
            return Ok(w);
        }
        let dir = self.model.scaled_direction(self.dirs.direction(k));
        let density = self.law.pdf(hit.rho);
        let chosen: &[NormalData] = match tie {
            TiePolicy::Average => &hit.normal_data,
            TiePolicy::MinIndex => &hit.normal_data[..1],
        };
        let lambda = 1.0 / chosen.len() as f64;
        for nd in chosen {
            let (slope, sensitivity) = match nd {
                NormalData::Gradients { grad_x, grad_z, .. } => (dot(grad_z, &dir), grad_x.clone()),
                NormalData::Residual { index, residual } => {
                    let Constraints::Enlarged { sets, .. } = self.constraints else {
                        unreachable!("residual data only arises from set oracles")
                    };
                    let z = hit.boundary_point.as_deref().expect("finite hit has a boundary point");
                    (dot(residual, &dir), sets[*index].sq_dist_sensitivity(x, z)?)
                }
            };
            if !(slope > SLOPE_FLOOR) {
                return Err(Error::TransversalityBreakdown { direction: k, slope });
            }
            let scale = -lambda * density / slope;
            w.iter_mut().zip(&sensitivity).for_each(|(wi, s)| *wi += scale * s);
        }
        Ok(w)
    }

    /// Growth ratios at every finite, uncapped boundary point (inequality mode).
    pub fn growth(&self, x: &[f64]) -> Result<GrowthDiagnostic> {
        if !matches!(self.constraints, Constraints::Inequality(_)) {
            return Err(Error::InvalidInput("growth diagnostics need an inequality system".into()));
        }
        let hits = self.hits(x)?;
        let mut diag = GrowthDiagnostic::default();
        for hit in hits.iter().filter(|h| h.finite && !h.capped) {
            let z = hit.boundary_point.as_deref().expect("finite hit has a boundary point");
            for nd in &hit.normal_data {
                if let NormalData::Gradients { index, grad_x, grad_z } = nd {
                    diag.record(*index, z, grad_x, grad_z);
                }
            }
        }
        Ok(diag)
    }

    /// Central finite differences of the fixed-direction estimator.
    pub fn fd_gradient(&self, x: &[f64], rel_step: f64) -> Result<Vec<f64>> {
        let mut g = vec![0.0; x.len()];
        let mut xp = x.to_vec();
        for j in 0..x.len() {
            let h = rel_step * x[j].abs().max(1.0);
            xp[j] = x[j] + h;
            let up = self.probability(&xp)?;
            xp[j] = x[j] - h;
            let down = self.probability(&xp)?;
            xp[j] = x[j];
            g[j] = (up - down) / (2.0 * h);
        }
        Ok(g)
    }
}

/// `‖a - b‖_∞ / max(‖b‖_∞, floor)`.
pub fn relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = b.iter().map(|y| y.abs()).fold(0.0, f64::max).max(floor);
    diff / scale
}

fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Weighted mean and `sample std / sqrt(N)`.
fn weighted_mean_and_se(values: &[f64], weights: &[f64]) -> (f64, f64) {
    let products: Vec<f64> = values.iter().zip(weights).map(|(v, w)| v * w).collect();
    let mean = pairwise_sum(&products);
    let n = values.len();
    if n < 2 {
        return (mean, f64::NAN);
    }
    let plain = pairwise_sum(values) / n as f64;
    let sq: Vec<f64> = values.iter().map(|v| (v - plain).powi(2)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub fn prob_value(
    constraints: Constraints<'_>,
    x: &[f64],
    model: &GaussianModel,
    dirs: &DirectionSet,
    opts: &RootOptions,
) -> Result<ProbEstimate> {
    Evaluator::new(constraints, model, dirs, *opts)?.value(x)
}

pub fn prob_gradient(
    sys: &dyn InequalitySystem,
    x: &[f64],
    model: &GaussianModel,
    dirs: &DirectionSet,
    opts: &RootOptions,
    tie_policy: TiePolicy,
) -> Result<GradEstimate> {
    Evaluator::new(Constraints::Inequality(sys), model, dirs, *opts)?.gradient(x, tie_policy)
}

pub fn prob_gradient_enlarged(
    sets: &[&dyn ConvexSetOracle],
    x: &[f64],
    eps: f64,
    model: &GaussianModel,
    dirs: &DirectionSet,
    opts: &RootOptions,
) -> Result<GradEstimate> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("enlargement must be positive, got {eps}")));
    }
    Evaluator::new(Constraints::Enlarged { sets, eps }, model, dirs, *opts)?
        .gradient(x, TiePolicy::Average)
}

pub fn growth_report(
    sys: &dyn InequalitySystem,
    x: &[f64],
    dirs: &DirectionSet,
    model: &GaussianModel,
) -> Result<GrowthDiagnostic> {
    Evaluator::new(Constraints::Inequality(sys), model, dirs, RootOptions::default())?.growth(x)
}

/// Upper bound on per-direction gradient term norms seen at `x`.
pub fn max_term_norm(grad: &GradEstimate) -> f64 {
    grad.per_direction.iter().map(|t| norm(t)).fold(0.0, f64::max)
}
