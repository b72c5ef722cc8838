use std::fmt;
use std::fs;
use std::path::Path;

use serde::Serialize;

use probfn::case_study::{run_energy, FixtureInstance, TOOL, VERSION};
use probfn::config::RunConfig;
use probfn::gaussian_radial::DirectionSet;
use probfn::prob::{relative_error, DirectionRecord};
use probfn::verify::{render_table, run_all, CheckResult, VerifyOptions};
use probfn::Error;

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(String),
    Solver(String),
    Verify(String),
    Io(String),
}

impl Failure {
    pub const CONFIG: u8 = 2;

    pub fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => Self::CONFIG,
            Failure::Numerical(_) => 3,
            Failure::Solver(_) => 4,
            Failure::Verify(_) => 5,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m)
            | Failure::Numerical(m)
            | Failure::Solver(m)
            | Failure::Verify(m)
            | Failure::Io(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::InvalidInput(_)
            | Error::NotPositiveDefinite { .. }
            | Error::InteriorViolated { .. }
            | Error::MissingSensitivity => Failure::Config(msg),
            Error::BracketFailure { .. }
            | Error::ProjectionDiverged { .. }
            | Error::TransversalityBreakdown { .. } => Failure::Numerical(msg),
            Error::NoFeasibleStart { .. } | Error::LpInfeasible { .. } => Failure::Solver(msg),
        }
    }
}

fn io(e: std::io::Error) -> Failure {
    Failure::Io(e.to_string())
}

#[derive(Serialize)]
struct Header<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    fixture: &'a str,
    x: &'a [f64],
    eps: f64,
    n: usize,
    seed: u64,
    method: &'static str,
}

fn header<'a>(cfg: &'a RunConfig, command: &'static str, x: &'a [f64]) -> Header<'a> {
    Header {
        tool: TOOL,
        version: VERSION,
        command,
        fixture: cfg.fixture.as_str(),
        x,
        eps: cfg.eps,
        n: cfg.n,
        seed: cfg.seed,
        method: cfg.method.as_str(),
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("records serialize") + "\n"
}

fn write(dir: &Path, name: &str, body: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(io)?;
    fs::write(dir.join(name), body).map_err(io)
}

fn join_indices(v: &[usize]) -> String {
    v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";")
}

fn directions_csv(records: &[DirectionRecord], terms: Option<&[Vec<f64>]>) -> String {
    let width = terms.and_then(|t| t.first()).map_or(0, Vec::len);
    let mut out = String::from("index,rho,contribution,active,capped");
    for j in 0..width {
        out.push_str(&format!(",term_{j}"));
    }
    out.push('\n');
    for (k, r) in records.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{}",
            r.index,
            r.hit.rho,
            r.contribution,
            join_indices(&r.hit.active),
            r.hit.capped
        ));
        if let Some(t) = terms {
            for c in &t[k] {
                out.push_str(&format!(",{c}"));
            }
        }
        out.push('\n');
    }
    out
}

fn setup(cfg: &RunConfig) -> Result<(FixtureInstance, Vec<f64>, DirectionSet), Failure> {
    let inst = FixtureInstance::build(cfg)?;
    let x = inst.decision(cfg)?;
    let dirs = DirectionSet::sample(inst.model.dim(), cfg.n, cfg.seed, cfg.method)?;
    Ok((inst, x, dirs))
}

pub fn eval(cfg: &RunConfig) -> Result<(), Failure> {
    #[derive(Serialize)]
    struct Record<'a> {
        #[serde(flatten)]
        header: Header<'a>,
        value: f64,
        std_error: Option<f64>,
        crude_std_error: f64,
        n_infinite: usize,
        n_ties: usize,
        n_capped: usize,
    }
    let (inst, x, dirs) = setup(cfg)?;
    let est = inst.with_evaluator(&dirs, cfg.root, |ev| ev.value(&x))?;
    let json = to_json(&Record {
        header: header(cfg, "eval", &x),
        value: est.value,
        std_error: est.std_error,
        crude_std_error: est.crude_std_error,
        n_infinite: est.n_infinite,
        n_ties: est.n_ties,
        n_capped: est.n_capped,
    });
    print!("{json}");
    if let Some(out) = &cfg.out {
        let dir = Path::new(out);
        write(dir, "eval.json", &json)?;
        write(dir, "directions.csv", &directions_csv(&est.per_direction, None))?;
    }
    Ok(())
}

pub fn grad(cfg: &RunConfig) -> Result<(), Failure> {
    #[derive(Serialize)]
    struct FdCheck {
        fd_step: f64,
        fd_gradient: Vec<f64>,
        fd_rel_err: f64,
    }
    #[derive(Serialize)]
    struct Record<'a> {
        #[serde(flatten)]
        header: Header<'a>,
        tie_policy: probfn::prob::TiePolicy,
        value: f64,
        gradient: &'a [f64],
        crude_std_error: &'a [f64],
        tie_fraction: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        fd_check: Option<FdCheck>,
    }
    let (inst, x, dirs) = setup(cfg)?;
    let (g, records, fd) = inst.with_evaluator(&dirs, cfg.root, |ev| {
        let g = ev.gradient(&x, cfg.tie_policy)?;
        let records = match cfg.out {
            Some(_) => Some(ev.value(&x)?.per_direction),
            None => None,
        };
        let fd = if cfg.check_fd {
            let fd = ev.fd_gradient(&x, cfg.fd_step)?;
            Some(FdCheck {
                fd_step: cfg.fd_step,
                fd_rel_err: relative_error(&g.gradient, &fd, 1e-12),
                fd_gradient: fd,
            })
        } else {
            None
        };
        Ok((g, records, fd))
    })?;
    let json = to_json(&Record {
        header: header(cfg, "grad", &x),
        tie_policy: cfg.tie_policy,
        value: g.value,
        gradient: &g.gradient,
        crude_std_error: &g.crude_std_error,
        tie_fraction: g.tie_fraction,
        fd_check: fd,
    });
    print!("{json}");
    if let (Some(out), Some(records)) = (&cfg.out, records) {
        let dir = Path::new(out);
        write(dir, "grad.json", &json)?;
        write(dir, "directions.csv", &directions_csv(&records, Some(&g.per_direction)))?;
    }
    Ok(())
}

pub fn solve_energy(cfg: &RunConfig) -> Result<(), Failure> {
    let run = run_energy(cfg)?;
    let json = run.solution_json();
    print!("{json}");
    if let Some(out) = &cfg.out {
        run.write_artifacts(Path::new(out)).map_err(io)?;
    }
    Ok(())
}

pub fn verify(cfg: &RunConfig) -> Result<(), Failure> {
    #[derive(Serialize)]
    struct Report<'a> {
        tool: &'static str,
        version: &'static str,
        seed: u64,
        n: usize,
        quick: bool,
        checks: &'a [CheckResult],
    }
    let opts = VerifyOptions {
        quick: cfg.quick,
        n: cfg.n,
        seed: cfg.seed,
    };
    let results = run_all(&opts);
    print!("{}", render_table(&results));
    if let Some(out) = &cfg.out {
        let report = Report {
            tool: TOOL,
            version: VERSION,
            seed: cfg.seed,
            n: cfg.n,
            quick: cfg.quick,
            checks: &results,
        };
        write(Path::new(out), "verify.json", &to_json(&report))?;
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verify(format!("failed checks: {}", failed.join(", "))))
    }
}
