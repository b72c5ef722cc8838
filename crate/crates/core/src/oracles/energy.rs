//! Wind/load dispatch system.
//!
//! Decision `x = (p^w_1..p^w_T, p^g_1..p^g_T)`, random vector
//! `z = (wind speed_1..T, load_1..T)`. Constraint `t` (wind) reads
//! `p^w_t - c (z^1_t)^3 <= 0`, constraint `T + t` (load) reads
//! `z^2_t - p^w_t - p^g_t <= 0`. Wind speed positivity is a ray-domain cap.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{check_len, InequalitySystem, RayExit};
use crate::error::{Error, Result};
use crate::gaussian_radial::GaussianModel;

/// How the wind/load cross-correlation block is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CrossCorrelation {
    /// `C12[i,j] = rho_cross · C11[i,j] · C22[i,j]`.
    #[default]
    ElementwiseProduct,
    /// `C12 = rho_cross · I`.
    Diagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyParams {
    pub periods: usize,
    /// Cubic wind power coefficient `c` in `p^w <= c v^3`.
    pub wind_coefficient: f64,
    pub mu_wind: f64,
    pub mu_load: f64,
    pub rho_wind: f64,
    pub rho_load: f64,
    pub rho_cross: f64,
    pub var_wind: f64,
    pub var_load: f64,
    pub cross_correlation: CrossCorrelation,
    pub generation_cost: f64,
    pub wind_upper: f64,
    pub generation_upper: f64,
    pub p_level: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            periods: 4,
            wind_coefficient: 0.032,
            mu_wind: 4.23,
            mu_load: 10.0,
            rho_wind: 0.96,
            rho_load: 0.8,
            rho_cross: -0.3,
            var_wind: 1.54,
            var_load: 1.0,
            cross_correlation: CrossCorrelation::ElementwiseProduct,
            generation_cost: 5.0,
            wind_upper: 8.0,
            generation_upper: 20.0,
            p_level: 0.8,
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidInput(format!("energy parameters: {msg}")));
        let finite = [
            self.wind_coefficient,
            self.mu_wind,
            self.mu_load,
            self.rho_wind,
            self.rho_load,
            self.rho_cross,
            self.var_wind,
            self.var_load,
            self.generation_cost,
            self.wind_upper,
            self.generation_upper,
            self.p_level,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("non-finite value");
        }
        if self.periods == 0 || self.periods > 64 {
            return bad("periods must lie in 1..=64");
        }
        if self.wind_coefficient <= 0.0 || self.mu_wind <= 0.0 {
            return bad("wind coefficient and mean wind speed must be positive");
        }
        if self.var_wind <= 0.0 || self.var_load <= 0.0 {
            return bad("variances must be positive");
        }
        if [self.rho_wind, self.rho_load, self.rho_cross]
            .iter()
            .any(|r| r.abs() >= 1.0)
        {
            return bad("correlation coefficients must lie in (-1, 1)");
        }
        if self.wind_upper < 0.0 || self.generation_upper < 0.0 {
            return bad("upper bounds must be nonnegative");
        }
        if !(self.p_level > 0.0 && self.p_level < 1.0) {
            return bad("probability level must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn decision_dim(&self) -> usize {
        2 * self.periods
    }

    /// Assemble `D^{1/2} C D^{1/2}` and factor it.
    pub fn model(&self) -> Result<GaussianModel> {
        self.validate()?;
        let t = self.periods;
        let mut cov = DMatrix::<f64>::zeros(2 * t, 2 * t);
        let (sw, sl) = (self.var_wind.sqrt(), self.var_load.sqrt());
        for i in 0..t {
            for j in 0..t {
                let lag = i.abs_diff(j) as i32;
                let cw = self.rho_wind.powi(lag);
                let cl = self.rho_load.powi(lag);
                let cross = match self.cross_correlation {
                    CrossCorrelation::ElementwiseProduct => self.rho_cross * cw * cl,
                    CrossCorrelation::Diagonal if i == j => self.rho_cross,
                    CrossCorrelation::Diagonal => 0.0,
                };
                cov[(i, j)] = self.var_wind * cw;
                cov[(t + i, t + j)] = self.var_load * cl;
                cov[(i, t + j)] = sw * sl * cross;
                cov[(t + j, i)] = sw * sl * cross;
            }
        }
        let mut mean = vec![self.mu_wind; t];
        mean.extend(std::iter::repeat_n(self.mu_load, t));
        GaussianModel::new(mean, cov)
    }

    pub fn cost(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.periods];
        c.extend(std::iter::repeat_n(self.generation_cost, self.periods));
        c
    }

    pub fn lower(&self) -> Vec<f64> {
        vec![0.0; 2 * self.periods]
    }

    pub fn upper(&self) -> Vec<f64> {
        let mut u = vec![self.wind_upper; self.periods];
        u.extend(std::iter::repeat_n(self.generation_upper, self.periods));
        u
    }
}

#[derive(Debug, Clone)]
pub struct EnergySystem {
    params: EnergyParams,
}

impl EnergySystem {
    pub fn new(params: EnergyParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    pub fn params(&self) -> &EnergyParams {
        &self.params
    }

    fn periods(&self) -> usize {
        self.params.periods
    }

    /// Wind speed at which period `t` exactly delivers `p^w_t`.
    fn wind_threshold(&self, pw: f64) -> f64 {
        (pw / self.params.wind_coefficient).cbrt()
    }
}

impl InequalitySystem for EnergySystem {
    fn constraint_count(&self) -> usize {
        2 * self.periods()
    }
    fn decision_dim(&self) -> usize {
        2 * self.periods()
    }
    fn random_dim(&self) -> usize {
        2 * self.periods()
    }

    fn value(&self, i: usize, x: &[f64], z: &[f64]) -> f64 {
        let t = self.periods();
        if i < t {
            x[i] - self.params.wind_coefficient * z[i].powi(3)
        } else {
            let k = i - t;
            z[i] - x[k] - x[t + k]
        }
    }

    fn grad_x(&self, i: usize, _x: &[f64], _z: &[f64]) -> Vec<f64> {
        let t = self.periods();
        let mut g = vec![0.0; 2 * t];
        if i < t {
            g[i] = 1.0;
        } else {
            g[i - t] = -1.0;
            g[i] = -1.0;
        }
        g
    }

    fn grad_z(&self, i: usize, _x: &[f64], z: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; 2 * self.periods()];
        if i < self.periods() {
            g[i] = -3.0 * self.params.wind_coefficient * z[i] * z[i];
        } else {
            g[i] = 1.0;
        }
        g
    }

    fn ray_exit(&self, i: usize, x: &[f64], base: &[f64], dir: &[f64]) -> Option<RayExit> {
        let t = self.periods();
        let (b, s) = (base[i], dir[i]);
        let exit = if i < t {
            // wind speed must stay above the threshold; only a decreasing ray leaves
            let threshold = self.wind_threshold(x[i]);
            if s >= 0.0 {
                RayExit::Infinite
            } else {
                RayExit::Finite(((b - threshold) / -s).max(0.0))
            }
        } else {
            let supply = x[i - t] + x[i];
            if s <= 0.0 {
                RayExit::Infinite
            } else {
                RayExit::Finite(((supply - b) / s).max(0.0))
            }
        };
        Some(exit)
    }

    fn ray_cap(&self, _x: &[f64], base: &[f64], dir: &[f64]) -> f64 {
        (0..self.periods())
            .filter(|&k| dir[k] < 0.0)
            .map(|k| (base[k] / -dir[k]).max(0.0))
            .fold(f64::INFINITY, f64::min)
    }

    fn check_decision(&self, x: &[f64]) -> Result<()> {
        check_len("decision", x, self.decision_dim())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_period_covariance() {
        let p = EnergyParams {
            periods: 1,
            ..EnergyParams::default()
        };
        let m = p.model().unwrap();
        let c = m.covariance();
        let off = -0.3 * 1.54f64.sqrt();
        assert!((c[(0, 0)] - 1.54).abs() < 1e-15);
        assert!((c[(1, 1)] - 1.0).abs() < 1e-15);
        assert!((c[(0, 1)] - off).abs() < 1e-15);
        assert!((c[(1, 0)] - off).abs() < 1e-15);
    }

    #[test]
    fn default_covariance_diagonal_and_definiteness() {
        let m = EnergyParams::default().model().unwrap();
        let diag: Vec<f64> = (0..8).map(|i| m.covariance()[(i, i)]).collect();
        assert_eq!(diag, vec![1.54, 1.54, 1.54, 1.54, 1.0, 1.0, 1.0, 1.0]);
        let eig = m.covariance().clone().symmetric_eigen();
        assert!(eig.eigenvalues.min() > 0.0);
    }

    #[test]
    fn wind_bound_and_load_margin() {
        let p = EnergyParams::default();
        let bound = p.wind_coefficient * p.mu_wind.powi(3);
        assert!((bound - 2.421_982_944).abs() < 1e-6);
        let sys = EnergySystem::new(p.clone()).unwrap();
        let m = p.model().unwrap();
        let mut x = vec![0.0; 8];
        x[4..].fill(20.0);
        for t in 0..4 {
            assert_eq!(sys.value(4 + t, &x, m.mean()), -10.0);
        }
        let g = sys.grad_x(5, &x, m.mean());
        assert_eq!(g, vec![0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0]);
    }

    #[test]
    fn indefinite_assembly_rejected() {
        let p = EnergyParams {
            rho_cross: -0.99,
            rho_wind: 0.2,
            rho_load: 0.99,
            cross_correlation: CrossCorrelation::Diagonal,
            ..EnergyParams::default()
        };
        assert!(matches!(p.model(), Err(Error::NotPositiveDefinite { .. })));
    }
}
