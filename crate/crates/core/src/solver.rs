//! Trust-region sequential linear programming for
//!
//! ```text
//! min cᵀx  s.t.  φ(x) >= p,  lower <= x <= upper
//! ```
//!
//! `φ` and its gradient come from a fixed direction set, so the iteration is
//! deterministic. Steps are accepted on an ℓ1 merit function
//! `cᵀx + μ max(0, p - φ(x))`; once an iterate is feasible (to `infeas_tol`)
//! no accepted step leaves the feasible region again.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian_radial::{DirectionSet, GaussianModel, SamplingMethod};
use crate::lp::{solve_penalized, solve_single_cut};
use crate::oracles::InequalitySystem;
use crate::prob::{Constraints, Evaluator, TiePolicy};
use crate::radial::RootOptions;

pub struct ChanceProblem<'a> {
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub p_level: f64,
    pub system: &'a dyn InequalitySystem,
    pub model: &'a GaussianModel,
    pub eval_dirs: DirectionSet,
    pub validate_dirs: DirectionSet,
}

impl ChanceProblem<'_> {
    pub fn check(&self) -> Result<()> {
        let n = self.system.decision_dim();
        if self.cost.len() != n || self.lower.len() != n || self.upper.len() != n {
            return Err(Error::InvalidInput("cost/bounds length differs from decision dimension".into()));
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidInput("lower bound exceeds upper bound".into()));
        }
        if !(self.p_level > 0.0 && self.p_level < 1.0) {
            return Err(Error::InvalidInput("probability level must lie in (0, 1)".into()));
        }
        if self.eval_dirs.seed() == self.validate_dirs.seed()
            && self.eval_dirs.method() == self.validate_dirs.method()
        {
            return Err(Error::InvalidInput("evaluation and validation seeds must differ".into()));
        }
        Ok(())
    }

    fn objective(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub initial_radius: f64,
    pub max_radius: f64,
    pub min_radius: f64,
    pub infeas_tol: f64,
    pub step_tol: f64,
    pub prob_tol: f64,
    /// Accept when actual merit reduction exceeds this fraction of the predicted one.
    pub accept_ratio: f64,
    pub feasibility_steps: usize,
    /// Required probability surplus before leaving the feasibility phase.
    pub feasibility_margin: f64,
    pub second_order_correction: bool,
    pub tie_policy: TiePolicy,
    pub root: RootOptions,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            initial_radius: 1.0,
            max_radius: 10.0,
            min_radius: 1e-9,
            infeas_tol: 1e-3,
            step_tol: 1e-4,
            prob_tol: 5e-3,
            accept_ratio: 0.1,
            feasibility_steps: 500,
            feasibility_margin: 1e-3,
            second_order_correction: true,
            tie_policy: TiePolicy::Average,
            root: RootOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    IterationLimit,
    RadiusCollapsed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub x: Vec<f64>,
    pub cost: f64,
    pub phi: f64,
    pub trial_phi: Option<f64>,
    pub step_norm: f64,
    pub radius: f64,
    pub accepted: bool,
    /// The accepted point came from a second-order correction.
    pub corrected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub records: Vec<IterationRecord>,
    pub feasibility_steps: usize,
    pub status: SolveStatus,
}

impl SolveTrace {
    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Validation {
    pub value: f64,
    pub std_error: f64,
    pub directions: usize,
    pub seed: u64,
}

fn clip(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, l), h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(*l, *h);
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c.abs()).fold(0.0, f64::max)
}

/// Evaluate, mapping a violated interior condition to probability 0.
fn phi_or_zero(ev: &Evaluator<'_>, x: &[f64]) -> Result<f64> {
    match ev.probability(x) {
        Err(Error::InteriorViolated { .. }) => Ok(0.0),
        other => other,
    }
}

/// Projected gradient ascent on `φ` until `φ >= p + margin`.
fn feasibility_phase(
    problem: &ChanceProblem<'_>,
    ev: &Evaluator<'_>,
    x: &mut Vec<f64>,
    opts: &SolverOptions,
) -> Result<(f64, usize)> {
    let target = problem.p_level + opts.feasibility_margin;
    let mut phi = phi_or_zero(ev, x)?;
    let mut step = opts.initial_radius;
    for k in 0..opts.feasibility_steps {
        if phi >= target {
            return Ok((phi, k));
        }
        let grad = match ev.gradient(x, opts.tie_policy) {
            Ok(g) => g.gradient,
            Err(Error::InteriorViolated { .. }) => {
                return Err(Error::NoFeasibleStart {
                    best: phi,
                    target: problem.p_level,
                })
            }
            Err(e) => return Err(e),
        };
        let gn = inf_norm(&grad);
        if gn == 0.0 {
            break;
        }
        let mut trial: Vec<f64> = x.iter().zip(&grad).map(|(v, g)| v + step * g / gn).collect();
        clip(&mut trial, &problem.lower, &problem.upper);
        let trial_phi = phi_or_zero(ev, &trial)?;
        if trial_phi > phi {
            *x = trial;
            phi = trial_phi;
            step *= 1.5;
        } else {
            step *= 0.5;
            if step < opts.min_radius {
                break;
            }
        }
    }
    if phi >= target {
        Ok((phi, opts.feasibility_steps))
    } else {
        Err(Error::NoFeasibleStart {
            best: phi,
            target: problem.p_level,
        })
    }
}

pub fn solve(
    problem: &ChanceProblem<'_>,
    x0: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolveTrace)> {
    problem.check()?;
    let ev = Evaluator::new(
        Constraints::Inequality(problem.system),
        problem.model,
        &problem.eval_dirs,
        opts.root,
    )?;
    let n = problem.cost.len();
    let mut x = x0.to_vec();
    if x.len() != n {
        return Err(Error::InvalidInput("starting point has wrong length".into()));
    }
    clip(&mut x, &problem.lower, &problem.upper);

    let p = problem.p_level;
    let (_, feas_steps) = feasibility_phase(problem, &ev, &mut x, opts)?;

    let mut radius = opts.initial_radius;
    let mut penalty = 1.0f64;
    let mut records = Vec::new();
    let mut status = SolveStatus::IterationLimit;
    let mut cached: Option<(f64, Vec<f64>)> = None;

    for iteration in 0..opts.max_iterations {
        let (phi, grad) = match cached.take() {
            Some(c) => c,
            None => {
                let g = ev.gradient(&x, opts.tie_policy)?;
                (g.value, g.gradient)
            }
        };
        let feasible = phi >= p - opts.infeas_tol;

        let lo: Vec<f64> = (0..n).map(|j| (problem.lower[j] - x[j]).max(-radius)).collect();
        let hi: Vec<f64> = (0..n).map(|j| (problem.upper[j] - x[j]).min(radius)).collect();
        let lp = match solve_single_cut(&problem.cost, &grad, p - phi, &lo, &hi) {
            Ok(s) => {
                penalty = penalty.max(2.0 * s.multiplier + 1.0);
                s
            }
            Err(Error::LpInfeasible { .. }) => {
                solve_penalized(&problem.cost, &grad, p - phi, &lo, &hi, f64::INFINITY)?
            }
            Err(e) => return Err(e),
        };
        let d = lp.step;
        let step_norm = inf_norm(&d);
        let cost = problem.objective(&x);

        let stationary = lp.cut_slack > 1e-12 || (phi - p).abs() <= opts.prob_tol;
        if step_norm <= opts.step_tol && feasible && stationary {
            records.push(IterationRecord {
                iteration,
                x: x.clone(),
                cost,
                phi,
                trial_phi: None,
                step_norm,
                radius,
                accepted: false,
                corrected: false,
            });
            status = SolveStatus::Converged;
            break;
        }

        let merit = |c: f64, ph: f64| c + penalty * (p - ph).max(0.0);
        let lin_phi = phi + grad.iter().zip(&d).map(|(g, s)| g * s).sum::<f64>();
        let predicted = merit(cost, phi) - merit(cost + lp.objective, lin_phi);

        let trial: Vec<f64> = {
            let mut t: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
            clip(&mut t, &problem.lower, &problem.upper);
            t
        };
        let trial_eval = match ev.gradient(&trial, opts.tie_policy) {
            Ok(g) => Some((g.value, g.gradient)),
            Err(Error::InteriorViolated { .. }) => None,
            Err(e) => return Err(e),
        };
        let acceptable = |pt: &[f64], tp: f64| {
            let actual = merit(cost, phi) - merit(problem.objective(pt), tp);
            (!feasible || tp >= p - opts.infeas_tol) && predicted > 0.0 && actual >= opts.accept_ratio * predicted
        };
        let mut trial = trial;
        let mut trial_eval = trial_eval;
        let mut accepted = matches!(&trial_eval, Some((tp, _)) if acceptable(&trial, *tp));
        let mut corrected = false;
        // Second-order correction: pull a rejected, infeasible trial back onto
        // the level set along its own gradient.
        if !accepted && opts.second_order_correction {
            if let Some((tp, tg)) = &trial_eval {
                let gg: f64 = tg.iter().map(|g| g * g).sum();
                if *tp < p && gg > 0.0 {
                    let t = (p - tp) / gg;
                    let mut soc: Vec<f64> = trial.iter().zip(tg).map(|(a, g)| a + t * g).collect();
                    clip(&mut soc, &problem.lower, &problem.upper);
                    match ev.gradient(&soc, opts.tie_policy) {
                        Ok(g) if acceptable(&soc, g.value) => {
                            trial = soc;
                            trial_eval = Some((g.value, g.gradient));
                            accepted = true;
                            corrected = true;
                        }
                        Ok(_) | Err(Error::InteriorViolated { .. }) => {}
                        Err(e) => return Err(e),
                    }
                }
            }
        }
        let trial_phi = trial_eval.as_ref().map(|t| t.0);

        records.push(IterationRecord {
            iteration,
            x: x.clone(),
            cost,
            phi,
            trial_phi,
            step_norm,
            radius,
            accepted,
            corrected,
        });

        if accepted {
            x = trial;
            cached = trial_eval;
            if step_norm >= 0.99 * radius {
                radius = (2.0 * radius).min(opts.max_radius);
            }
        } else {
            radius = 0.5 * step_norm.min(radius);
            cached = Some((phi, grad));
            if radius < opts.min_radius {
                status = SolveStatus::RadiusCollapsed;
                break;
            }
        }
    }

    Ok((
        x,
        SolveTrace {
            records,
            feasibility_steps: feas_steps,
            status,
        },
    ))
}

/// Independent estimate of `φ(x)` on the validation direction set.
pub fn validate(x: &[f64], problem: &ChanceProblem<'_>, root: &RootOptions) -> Result<Validation> {
    let ev = Evaluator::new(
        Constraints::Inequality(problem.system),
        problem.model,
        &problem.validate_dirs,
        *root,
    )?;
    let est = ev.value(x)?;
    Ok(Validation {
        value: est.value,
        std_error: est.crude_std_error,
        directions: problem.validate_dirs.len(),
        seed: problem.validate_dirs.seed(),
    })
}

/// Stationarity residual of `c = λ ∇φ` with `λ >= 0` over the components not
/// held at a bound, relative to `‖c‖∞`. Returns `(residual, λ)`.
pub fn kkt_residual(cost: &[f64], grad: &[f64], x: &[f64], lower: &[f64], upper: &[f64]) -> (f64, f64) {
    let tol = 1e-9;
    let free: Vec<usize> = (0..cost.len())
        .filter(|&j| {
            let at_lo = x[j] <= lower[j] + tol && cost[j] >= 0.0;
            let at_hi = x[j] >= upper[j] - tol && cost[j] <= 0.0;
            !(at_lo || at_hi)
        })
        .collect();
    let cg: f64 = free.iter().map(|&j| cost[j] * grad[j]).sum();
    let gg: f64 = free.iter().map(|&j| grad[j] * grad[j]).sum();
    let lambda = if gg > 0.0 { (cg / gg).max(0.0) } else { 0.0 };
    let scale = inf_norm(cost).max(f64::MIN_POSITIVE);
    let res = free
        .iter()
        .map(|&j| (cost[j] - lambda * grad[j]).abs())
        .fold(0.0, f64::max);
    (res / scale, lambda)
}

/// Default validation set: Monte Carlo, ten times the evaluation budget.
pub fn validation_directions(dim: usize, n_eval: usize, seed: u64) -> Result<DirectionSet> {
    DirectionSet::sample(dim, 10 * n_eval, seed, SamplingMethod::MonteCarlo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::{HalfSpace, Slab};
    use statrs::distribution::{ContinuousCDF, Normal};

    fn problem<'a>(
        sys: &'a dyn InequalitySystem,
        model: &'a GaussianModel,
        cost: f64,
        lo: f64,
        hi: f64,
        p: f64,
    ) -> ChanceProblem<'a> {
        let m = model.dim();
        ChanceProblem {
            cost: vec![cost],
            lower: vec![lo],
            upper: vec![hi],
            p_level: p,
            system: sys,
            model,
            eval_dirs: DirectionSet::sample(m, 4000, 11, SamplingMethod::Qmc).unwrap(),
            validate_dirs: validation_directions(m, 4000, 12).unwrap(),
        }
    }

    #[test]
    fn halfspace_level_hits_normal_quantile() {
        let sys = HalfSpace::axis(3);
        let model = GaussianModel::standard(3).unwrap();
        let prob = problem(&sys, &model, 1.0, 0.05, 5.0, 0.8);
        let (x, trace) = solve(&prob, &[5.0], &SolverOptions::default()).unwrap();
        assert_eq!(trace.status, SolveStatus::Converged);
        let exact = Normal::standard().inverse_cdf(0.8);
        assert!((x[0] - exact).abs() < 2e-3, "{} vs {exact}", x[0]);
    }

    #[test]
    fn slab_level_hits_closed_form() {
        let sys = Slab::level(vec![1.0, 0.0]).unwrap();
        let model = GaussianModel::standard(2).unwrap();
        // maximize x subject to 2Φ(τ(x)) - 1 >= 0.5
        let prob = problem(&sys, &model, -1.0, -3.0, -1e-3, 0.5);
        let (x, trace) = solve(&prob, &[-3.0], &SolverOptions::default()).unwrap();
        assert_eq!(trace.status, SolveStatus::Converged);
        let tau = Normal::standard().inverse_cdf(0.75);
        let exact = -0.5 * (1.0 + tau * tau).ln();
        assert!((x[0] - exact).abs() < 2e-3, "{} vs {exact}", x[0]);
    }

    #[test]
    fn inactive_constraint_lands_on_box_vertex() {
        let sys = HalfSpace::axis(2);
        let model = GaussianModel::standard(2).unwrap();
        let prob = problem(&sys, &model, 1.0, 2.0, 6.0, 0.8);
        let (x, trace) = solve(&prob, &[6.0], &SolverOptions::default()).unwrap();
        assert_eq!(trace.status, SolveStatus::Converged);
        assert_eq!(x, vec![2.0]);
    }

    #[test]
    fn unreachable_level_reports_best_probability() {
        let sys = HalfSpace::axis(2);
        let model = GaussianModel::standard(2).unwrap();
        let prob = problem(&sys, &model, 1.0, 0.1, 1.0, 0.95);
        match solve(&prob, &[0.5], &SolverOptions::default()) {
            Err(Error::NoFeasibleStart { best, target }) => {
                assert_eq!(target, 0.95);
                assert!((best - Normal::standard().cdf(1.0)).abs() < 1e-3);
            }
            other => panic!("expected NoFeasibleStart, got {other:?}"),
        }
    }

    #[test]
    fn runs_are_bit_identical() {
        let sys = HalfSpace::axis(2);
        let model = GaussianModel::standard(2).unwrap();
        let prob = problem(&sys, &model, 1.0, 0.05, 5.0, 0.9);
        let a = solve(&prob, &[4.0], &SolverOptions::default()).unwrap();
        let b = solve(&prob, &[4.0], &SolverOptions::default()).unwrap();
        assert_eq!(a.1.to_jsonl(), b.1.to_jsonl());
        assert_eq!(a.0, b.0);
    }

    #[test]
    fn rejects_shared_seeds() {
        let sys = HalfSpace::axis(2);
        let model = GaussianModel::standard(2).unwrap();
        let mut prob = problem(&sys, &model, 1.0, 0.05, 5.0, 0.9);
        prob.validate_dirs = prob.eval_dirs.clone();
        assert!(matches!(prob.check(), Err(Error::InvalidInput(_))));
    }
}
