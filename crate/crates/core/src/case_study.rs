//! Built-in fixtures by name, and the wind/load dispatch case study with its
//! persisted artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{Fixture, RunConfig};
use crate::error::{Error, Result};
use crate::gaussian_radial::{DirectionSet, GaussianModel, SamplingMethod};
use crate::oracles::{
    Ball, ConvexSetOracle, EnergyParams, EnergySystem, HalfSpace, HyperbolicInequality, HyperbolicSet,
    InequalitySystem, InfiniteOnly, Slab,
};
use crate::prob::{relative_error, Constraints, Evaluator, TiePolicy};
use crate::radial::RootOptions;
use crate::solver::{kkt_residual, solve, validate, ChanceProblem, SolveStatus, SolveTrace, SolverOptions, Validation};

pub const TOOL: &str = "probfn";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Relative tolerance of the CRN finite-difference check at a solution.
pub const STATIONARITY_FD_TOL: f64 = 1e-4;
/// Relative tolerance on `c = λ ∇φ` over the free components.
pub const STATIONARITY_KKT_TOL: f64 = 1e-2;

enum Body {
    Inequality(Box<dyn InequalitySystem>),
    Set(Box<dyn ConvexSetOracle>),
}

/// A named fixture: constraints, Gaussian law and a default decision.
pub struct FixtureInstance {
    pub fixture: Fixture,
    pub model: GaussianModel,
    pub eps: f64,
    pub default_x: Vec<f64>,
    body: Body,
}

impl FixtureInstance {
    pub fn build(cfg: &RunConfig) -> Result<Self> {
        let m = cfg.dim;
        let std = |m| GaussianModel::standard(m);
        let (model, body, default_x): (GaussianModel, Body, Vec<f64>) = match cfg.fixture {
            Fixture::Halfspace => (std(m)?, Body::Inequality(Box::new(HalfSpace::axis(m))), vec![1.0]),
            Fixture::Slab => {
                let mut c = vec![0.0; m];
                c[0] = 1.0;
                (std(m)?, Body::Inequality(Box::new(Slab::level(c)?)), vec![-1.0])
            }
            Fixture::Hyperbolic if cfg.eps == 0.0 => {
                (std(2)?, Body::Inequality(Box::new(HyperbolicInequality)), vec![1.0])
            }
            Fixture::Hyperbolic | Fixture::HyperbolicSet => {
                (std(2)?, Body::Set(Box::new(HyperbolicSet)), vec![1.0])
            }
            Fixture::Ball => (std(m)?, Body::Set(Box::new(Ball::new(vec![0.0; m]))), vec![1.0]),
            Fixture::Infinite => (
                std(m)?,
                Body::Inequality(Box::new(InfiniteOnly {
                    decision_dim: 1,
                    random_dim: m,
                })),
                vec![0.0],
            ),
            Fixture::Energy => {
                let p = &cfg.energy;
                let model = p.model()?;
                let mut x = vec![0.35; p.periods];
                x.extend(std::iter::repeat_n(11.2, p.periods));
                (model, Body::Inequality(Box::new(EnergySystem::new(p.clone())?)), x)
            }
        };
        if cfg.eps > 0.0 && matches!(body, Body::Inequality(_)) {
            return Err(Error::InvalidInput(format!(
                "fixture '{}' has no enlarged form; eps must be 0",
                cfg.fixture
            )));
        }
        Ok(Self {
            fixture: cfg.fixture,
            model,
            eps: cfg.eps,
            default_x,
            body,
        })
    }

    pub fn decision_dim(&self) -> usize {
        match &self.body {
            Body::Inequality(s) => s.decision_dim(),
            Body::Set(s) => s.decision_dim(),
        }
    }

    /// The configured decision, or the fixture default; length-checked.
    pub fn decision(&self, cfg: &RunConfig) -> Result<Vec<f64>> {
        let x = cfg.x.clone().unwrap_or_else(|| self.default_x.clone());
        if x.len() != self.decision_dim() {
            return Err(Error::InvalidInput(format!(
                "fixture '{}' takes a decision of length {}, got {}",
                self.fixture,
                self.decision_dim(),
                x.len()
            )));
        }
        Ok(x)
    }

    pub fn inequality(&self) -> Option<&dyn InequalitySystem> {
        match &self.body {
            Body::Inequality(s) => Some(s.as_ref()),
            Body::Set(_) => None,
        }
    }

    /// Run `f` with an evaluator over `dirs`.
    pub fn with_evaluator<T>(
        &self,
        dirs: &DirectionSet,
        opts: RootOptions,
        f: impl FnOnce(&Evaluator<'_>) -> Result<T>,
    ) -> Result<T> {
        match &self.body {
            Body::Inequality(s) => f(&Evaluator::new(Constraints::Inequality(s.as_ref()), &self.model, dirs, opts)?),
            Body::Set(s) => {
                let sets = [s.as_ref()];
                let ev = Evaluator::new(
                    Constraints::Enlarged {
                        sets: &sets,
                        eps: self.eps,
                    },
                    &self.model,
                    dirs,
                    opts,
                )?;
                f(&ev)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Stationarity {
    pub fd_rel_err: f64,
    pub kkt_residual: f64,
    pub multiplier: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct EnergyRun {
    pub params: EnergyParams,
    pub n: usize,
    pub seed: u64,
    pub validate_seed: u64,
    pub method: SamplingMethod,
    pub x: Vec<f64>,
    pub cost: f64,
    pub phi: f64,
    pub trace: SolveTrace,
    pub validation: Validation,
    pub stationarity: Stationarity,
}

impl EnergyRun {
    pub fn status(&self) -> SolveStatus {
        self.trace.status
    }
}

/// Start at zero wind, full conventional generation.
pub fn energy_start(params: &EnergyParams) -> Vec<f64> {
    let t = params.periods;
    let mut x = vec![0.0; 2 * t];
    x[t..].fill(params.generation_upper);
    x
}

pub fn run_energy(cfg: &RunConfig) -> Result<EnergyRun> {
    let params = cfg.energy.clone();
    let system = EnergySystem::new(params.clone())?;
    let model = params.model()?;
    let m = model.dim();
    let problem = ChanceProblem {
        cost: params.cost(),
        lower: params.lower(),
        upper: params.upper(),
        p_level: params.p_level,
        system: &system,
        model: &model,
        eval_dirs: DirectionSet::sample(m, cfg.n, cfg.seed, cfg.method)?,
        validate_dirs: DirectionSet::sample(m, 10 * cfg.n, cfg.validate_seed, SamplingMethod::MonteCarlo)?,
    };
    let opts = SolverOptions {
        tie_policy: cfg.tie_policy,
        root: cfg.root,
        ..cfg.solver
    };
    let x0 = cfg.x.clone().unwrap_or_else(|| energy_start(&params));
    let (x, trace) = solve(&problem, &x0, &opts)?;
    let validation = validate(&x, &problem, &cfg.root)?;

    let ev = Evaluator::new(Constraints::Inequality(&system), &model, &problem.eval_dirs, cfg.root)?;
    let grad = ev.gradient(&x, TiePolicy::Average)?;
    let fd = ev.fd_gradient(&x, cfg.fd_step)?;
    let fd_rel_err = relative_error(&grad.gradient, &fd, 1e-12);
    let (kkt, multiplier) = kkt_residual(&problem.cost, &fd, &x, &problem.lower, &problem.upper);

    Ok(EnergyRun {
        cost: problem.cost.iter().zip(&x).map(|(c, v)| c * v).sum(),
        phi: grad.value,
        n: cfg.n,
        seed: cfg.seed,
        validate_seed: cfg.validate_seed,
        method: cfg.method,
        params,
        x,
        trace,
        validation,
        stationarity: Stationarity {
            fd_rel_err,
            kkt_residual: kkt,
            multiplier,
            passed: fd_rel_err <= STATIONARITY_FD_TOL && kkt <= STATIONARITY_KKT_TOL,
        },
    })
}

#[derive(Serialize)]
struct Provenance<'a> {
    tool: &'static str,
    version: &'static str,
    seed: u64,
    validate_seed: u64,
    method: &'a str,
    n: usize,
}

impl EnergyRun {
    fn provenance(&self) -> Provenance<'_> {
        Provenance {
            tool: TOOL,
            version: VERSION,
            seed: self.seed,
            validate_seed: self.validate_seed,
            method: self.method.as_str(),
            n: self.n,
        }
    }

    pub fn solution_json(&self) -> String {
        #[derive(Serialize)]
        struct Solution<'a> {
            #[serde(flatten)]
            provenance: Provenance<'a>,
            status: SolveStatus,
            iterations: usize,
            feasibility_steps: usize,
            x: &'a [f64],
            p_wind: &'a [f64],
            p_generation: &'a [f64],
            cost: f64,
            phi: f64,
            stationarity: &'a Stationarity,
            params: &'a EnergyParams,
        }
        let t = self.params.periods;
        let rec = Solution {
            provenance: self.provenance(),
            status: self.trace.status,
            iterations: self.trace.records.len(),
            feasibility_steps: self.trace.feasibility_steps,
            x: &self.x,
            p_wind: &self.x[..t],
            p_generation: &self.x[t..],
            cost: self.cost,
            phi: self.phi,
            stationarity: &self.stationarity,
            params: &self.params,
        };
        serde_json::to_string_pretty(&rec).expect("solution serializes") + "\n"
    }

    pub fn validation_json(&self) -> String {
        #[derive(Serialize)]
        struct Record<'a> {
            #[serde(flatten)]
            provenance: Provenance<'a>,
            x: &'a [f64],
            p_level: f64,
            value: f64,
            std_error: f64,
            directions: usize,
        }
        let rec = Record {
            provenance: self.provenance(),
            x: &self.x,
            p_level: self.params.p_level,
            value: self.validation.value,
            std_error: self.validation.std_error,
            directions: self.validation.directions,
        };
        serde_json::to_string_pretty(&rec).expect("validation serializes") + "\n"
    }

    /// Header line with provenance, then one record per iteration.
    pub fn trace_jsonl(&self) -> String {
        serde_json::to_string(&self.provenance()).expect("header serializes") + "\n" + &self.trace.to_jsonl()
    }

    /// `iteration,cost,phi,accepted` for plotting; provenance in a `#` comment.
    pub fn convergence_csv(&self) -> String {
        let p = self.provenance();
        let mut out = format!(
            "# {} {} seed={} method={} n={}\niteration,cost,phi,accepted\n",
            p.tool, p.version, p.seed, p.method, p.n
        );
        for r in &self.trace.records {
            out.push_str(&format!("{},{},{},{}\n", r.iteration, r.cost, r.phi, r.accepted));
        }
        out
    }

    /// Write the four artifacts into `dir`; returns their paths.
    pub fn write_artifacts(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let files = [
            ("solution.json", self.solution_json()),
            ("trace.jsonl", self.trace_jsonl()),
            ("validation.json", self.validation_json()),
            ("convergence.csv", self.convergence_csv()),
        ];
        files
            .into_iter()
            .map(|(name, body)| {
                let path = dir.join(name);
                fs::write(&path, body)?;
                Ok(path)
            })
            .collect()
    }
}
