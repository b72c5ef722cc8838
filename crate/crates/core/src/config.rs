//! Run configuration: a TOML file whose keys mirror the command-line flags.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian_radial::SamplingMethod;
use crate::oracles::EnergyParams;
use crate::prob::TiePolicy;
use crate::radial::RootOptions;
use crate::solver::SolverOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Fixture {
    #[default]
    Halfspace,
    Slab,
    /// Inequality form; switches to the set form when `eps > 0`.
    Hyperbolic,
    HyperbolicSet,
    Ball,
    Infinite,
    Energy,
}

impl Fixture {
    pub const ALL: [Fixture; 7] = [
        Fixture::Halfspace,
        Fixture::Slab,
        Fixture::Hyperbolic,
        Fixture::HyperbolicSet,
        Fixture::Ball,
        Fixture::Infinite,
        Fixture::Energy,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Fixture::Halfspace => "halfspace",
            Fixture::Slab => "slab",
            Fixture::Hyperbolic => "hyperbolic",
            Fixture::HyperbolicSet => "hyperbolic-set",
            Fixture::Ball => "ball",
            Fixture::Infinite => "infinite",
            Fixture::Energy => "energy",
        }
    }
}

impl fmt::Display for Fixture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Fixture {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Fixture::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown fixture '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub fixture: Fixture,
    /// Random dimension for the halfspace, slab, ball and infinite fixtures.
    pub dim: usize,
    /// Decision vector; each fixture has its own default.
    pub x: Option<Vec<f64>>,
    pub eps: f64,
    pub n: usize,
    pub seed: u64,
    /// Seed of the independent validation set used by `solve-energy`.
    pub validate_seed: u64,
    pub method: SamplingMethod,
    pub tie_policy: TiePolicy,
    pub check_fd: bool,
    pub fd_step: f64,
    pub out: Option<String>,
    pub threads: Option<usize>,
    pub quick: bool,
    pub root: RootOptions,
    pub solver: SolverOptions,
    pub energy: EnergyParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            fixture: Fixture::default(),
            dim: 2,
            x: None,
            eps: 0.0,
            n: 10_000,
            seed: 2024,
            validate_seed: 2025,
            method: SamplingMethod::default(),
            tie_policy: TiePolicy::default(),
            check_fd: false,
            fd_step: 1e-6,
            out: None,
            threads: None,
            quick: false,
            root: RootOptions::default(),
            solver: SolverOptions::default(),
            energy: EnergyParams::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::InvalidInput(format!("config: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidInput("dim must be positive".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidInput("n must be positive".into()));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidInput(format!("eps must be finite and >= 0, got {}", self.eps)));
        }
        if !(self.fd_step > 0.0 && self.fd_step < 1.0) {
            return Err(Error::InvalidInput("fd_step must lie in (0, 1)".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidInput("threads must be positive".into()));
        }
        if let Some(x) = &self.x {
            if x.is_empty() || x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("x must be a nonempty finite vector".into()));
            }
        }
        if self.seed == self.validate_seed {
            return Err(Error::InvalidInput("seed and validate_seed must differ".into()));
        }
        self.root.validate()?;
        self.energy.validate()
    }
}

/// Parse a comma-separated list of reals such as `"1,-2.5, 3e-1"`.
pub fn parse_vector(s: &str) -> Result<Vec<f64>> {
    let out = s
        .split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::InvalidInput(format!("not a finite number: '{t}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(out)
}
