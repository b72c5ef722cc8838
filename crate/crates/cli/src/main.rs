use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use probfn::config::{parse_vector, Fixture, RunConfig};
use probfn::gaussian_radial::SamplingMethod;
use probfn::prob::TiePolicy;

mod commands;

use commands::Failure;

#[derive(Parser, Debug)]
#[command(name = "probfn", version, about = "Gaussian probability functions and their gradients")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate φ(x) for a fixture.
    Eval(Flags),
    /// Estimate ∇φ(x) for a fixture.
    Grad(Flags),
    /// Solve the wind/load dispatch problem and write its artifacts.
    SolveEnergy(Flags),
    /// Run the self-check suite.
    Verify(Flags),
}

/// Keeps clap from treating the vector as a multi-valued flag.
#[derive(Debug, Clone)]
struct Decision(Vec<f64>);

#[derive(Args, Debug, Default)]
struct Flags {
    #[arg(long, value_parser = |s: &str| s.parse::<Fixture>().map_err(|e| e.to_string()))]
    fixture: Option<Fixture>,
    /// Comma-separated decision vector.
    #[arg(long, value_parser = |s: &str| parse_vector(s).map(Decision).map_err(|e| e.to_string()), allow_hyphen_values = true)]
    x: Option<Decision>,
    #[arg(long)]
    eps: Option<f64>,
    /// Number of directions.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = |s: &str| s.parse::<SamplingMethod>().map_err(|e| e.to_string()))]
    method: Option<SamplingMethod>,
    #[arg(long, value_parser = |s: &str| s.parse::<TiePolicy>().map_err(|e| e.to_string()))]
    tie_policy: Option<TiePolicy>,
    /// Append a finite-difference cross-check (grad).
    #[arg(long)]
    check_fd: bool,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
    /// Reduced, tolerance-widened suite (verify).
    #[arg(long)]
    quick: bool,
}

impl Flags {
    fn apply(self, cfg: &mut RunConfig) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { cfg.$f = v; } )* };
        }
        set!(fixture, eps, n, seed, method, tie_policy);
        if let Some(Decision(x)) = self.x {
            cfg.x = Some(x);
        }
        if self.out.is_some() {
            cfg.out = self.out;
        }
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        cfg.check_fd |= self.check_fd;
        cfg.quick |= self.quick;
    }
}

fn load_config(path: Option<&PathBuf>, flags: Flags) -> Result<RunConfig, Failure> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure::Config(format!("cannot read {}: {e}", p.display())))?;
            RunConfig::from_toml(&text).map_err(|e| Failure::Config(e.to_string()))?
        }
        None => RunConfig::default(),
    };
    flags.apply(&mut cfg);
    cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (flags, cmd): (Flags, fn(&RunConfig) -> Result<(), Failure>) = match cli.command {
        Command::Eval(f) => (f, commands::eval),
        Command::Grad(f) => (f, commands::grad),
        Command::SolveEnergy(f) => (f, commands::solve_energy),
        Command::Verify(f) => (f, commands::verify),
    };
    let cfg = load_config(cli.config.as_ref(), flags)?;
    if let Some(t) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Config(format!("thread pool: {e}")))?;
    }
    cmd(&cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let help = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return ExitCode::from(if help { 0 } else { Failure::CONFIG });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
