//! Gaussian model, chi radial law and deterministic sphere sampling.
//!
//! A Gaussian vector `xi ~ N(mean, L Lᵀ)` is written `mean + R·L·v` with `v`
//! uniform on the unit sphere and `R` chi-distributed with `m` degrees of
//! freedom, independent of `v`. Probabilities of star-shaped regions around
//! the mean therefore reduce to an average over directions of the chi CDF
//! evaluated at the ray exit radius.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Error, Result};

/// Tail mass ignored beyond the radial cutoff.
pub const RADIAL_TAIL: f64 = 1e-12;

const SYMMETRY_TOL: f64 = 1e-10;

/// The law of the random vector: mean, covariance and its lower Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    factor: DMatrix<f64>,
}

impl GaussianModel {
    /// Factor `covariance = L Lᵀ`. The covariance must be symmetric within
    /// `1e-10` (relative to its largest entry) and positive definite.
    pub fn new(mean: Vec<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let m = mean.len();
        if m == 0 {
            return Err(Error::InvalidInput("empty mean vector".into()));
        }
        if covariance.nrows() != m || covariance.ncols() != m {
            return Err(Error::InvalidInput(format!(
                "covariance is {}x{}, expected {m}x{m}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if mean.iter().chain(covariance.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite model entry".into()));
        }
        let scale = 1.0 + covariance.amax();
        for i in 0..m {
            for j in 0..i {
                if (covariance[(i, j)] - covariance[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::InvalidInput(format!(
                        "covariance not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let factor = cholesky_lower(&covariance)?;
        Ok(Self {
            mean: DVector::from_vec(mean),
            covariance,
            factor,
        })
    }

    pub fn standard(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim], DMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// `L v` for a direction `v`.
    pub fn scaled_direction(&self, v: &[f64]) -> Vec<f64> {
        let m = self.dim();
        let mut out = vec![0.0; m];
        for (i, o) in out.iter_mut().enumerate() {
            // L is lower triangular
            *o = (0..=i).map(|j| self.factor[(i, j)] * v[j]).sum();
        }
        out
    }

    /// `mean + r·d` for a precomputed scaled direction `d = L v`.
    pub fn ray_point(&self, r: f64, scaled: &[f64]) -> Vec<f64> {
        self.mean
            .iter()
            .zip(scaled)
            .map(|(mu, d)| mu + r * d)
            .collect()
    }

    pub fn radial_law(&self) -> RadialLaw {
        RadialLaw::new(self.dim())
    }
}

/// Plain Cholesky–Banachiewicz; a nonpositive pivot rejects the matrix.
fn cholesky_lower(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum();
            if i == j {
                let pivot = a[(i, i)] - s;
                if pivot <= 0.0 || !pivot.is_finite() {
                    return Err(Error::NotPositiveDefinite { row: i, pivot });
                }
                l[(i, i)] = pivot.sqrt();
            } else {
                l[(i, j)] = (a[(i, j)] - s) / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Chi law with `dim` degrees of freedom: the norm of a standard Gaussian in `R^dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RadialLaw {
    dim: usize,
}

impl RadialLaw {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "radial law needs at least one degree of freedom");
        Self { dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn half_dim(&self) -> f64 {
        self.dim as f64 / 2.0
    }

    /// `P[R <= r]`, the regularized lower incomplete gamma at `(m/2, r²/2)`.
    /// `+inf` maps to 1.
    pub fn cdf(&self, r: f64) -> f64 {
        debug_assert!(r >= 0.0 || r.is_nan());
        if r <= 0.0 {
            return 0.0;
        }
        if r.is_infinite() {
            return 1.0;
        }
        gamma_lr(self.half_dim(), 0.5 * r * r).clamp(0.0, 1.0)
    }

    /// `P[R > r]`, computed directly from the upper incomplete gamma.
    pub fn survival(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 1.0;
        }
        if r.is_infinite() {
            return 0.0;
        }
        gamma_ur(self.half_dim(), 0.5 * r * r).clamp(0.0, 1.0)
    }

    /// `2^{1-m/2} r^{m-1} e^{-r²/2} / Γ(m/2)`.
    pub fn pdf(&self, r: f64) -> f64 {
        if r < 0.0 || r.is_infinite() {
            return 0.0;
        }
        let k = self.half_dim();
        if r == 0.0 {
            return if self.dim == 1 {
                (2.0 / std::f64::consts::PI).sqrt()
            } else {
                0.0
            };
        }
        let log = (1.0 - k) * std::f64::consts::LN_2 + (self.dim as f64 - 1.0) * r.ln()
            - 0.5 * r * r
            - ln_gamma(k);
        log.exp()
    }

    /// Smallest `r` with `cdf(r) >= p`, by bisection on the tail so that
    /// probabilities extremely close to 1 stay resolvable.
    pub fn quantile(&self, p: f64) -> f64 {
        assert!((0.0..1.0).contains(&p), "quantile level must lie in [0, 1)");
        if p == 0.0 {
            return 0.0;
        }
        let tail = 1.0 - p;
        let mut hi = 1.0;
        while self.survival(hi) > tail {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.survival(mid) > tail {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    /// Radius beyond which the remaining mass is at most [`RADIAL_TAIL`].
    pub fn cutoff(&self) -> f64 {
        self.quantile(1.0 - RADIAL_TAIL)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMethod {
    #[serde(rename = "mc", alias = "monte_carlo")]
    MonteCarlo,
    #[default]
    Qmc,
}

impl SamplingMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            SamplingMethod::MonteCarlo => "mc",
            SamplingMethod::Qmc => "qmc",
        }
    }
}

impl std::str::FromStr for SamplingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mc" | "monte_carlo" => Ok(SamplingMethod::MonteCarlo),
            "qmc" => Ok(SamplingMethod::Qmc),
            other => Err(Error::InvalidInput(format!("unknown sampling method `{other}`"))),
        }
    }
}

/// Equally weighted points on the unit sphere `S^{m-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSet {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
    seed: u64,
    method: SamplingMethod,
}

impl DirectionSet {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn method(&self) -> SamplingMethod {
        self.method
    }

    pub fn direction(&self, k: usize) -> &[f64] {
        &self.coords[k * self.dim..(k + 1) * self.dim]
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// Build from explicit directions; each is normalized, weights are uniform.
    pub fn from_directions(dirs: Vec<Vec<f64>>) -> Result<Self> {
        let dim = dirs.first().map(Vec::len).unwrap_or(0);
        if dim == 0 {
            return Err(Error::InvalidInput("empty direction set".into()));
        }
        let n = dirs.len();
        let mut coords = Vec::with_capacity(n * dim);
        for d in dirs {
            if d.len() != dim {
                return Err(Error::InvalidInput("ragged direction set".into()));
            }
            let norm = d.iter().map(|c| c * c).sum::<f64>().sqrt();
            if norm == 0.0 || !norm.is_finite() {
                return Err(Error::InvalidInput("zero or non-finite direction".into()));
            }
            coords.extend(d.iter().map(|c| c / norm));
        }
        Ok(Self {
            dim,
            coords,
            weights: vec![1.0 / n as f64; n],
            seed: 0,
            method: SamplingMethod::MonteCarlo,
        })
    }

    /// Deterministic sample of `n` directions in `R^m`. When `n` is even the
    /// points come in antithetic pairs `(v, -v)` at indices `2j, 2j+1`.
    pub fn sample(m: usize, n: usize, seed: u64, method: SamplingMethod) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidInput("sphere dimension must be positive".into()));
        }
        if n == 0 {
            return Err(Error::InvalidInput("direction budget must be positive".into()));
        }
        let antithetic = n.is_multiple_of(2);
        let bases = if antithetic { n / 2 } else { n };
        let mut coords = Vec::with_capacity(n * m);
        let mut gen = BaseGenerator::new(m, seed, method);
        for j in 0..bases {
            let v = gen.unit(j);
            coords.extend_from_slice(&v);
            if antithetic {
                coords.extend(v.iter().map(|c| -c));
            }
        }
        Ok(Self {
            dim: m,
            coords,
            weights: vec![1.0 / n as f64; n],
            seed,
            method,
        })
    }
}

enum BaseGenerator {
    MonteCarlo { dim: usize, seed: u64 },
    Qmc(ScrambledHalton),
}

impl BaseGenerator {
    fn new(dim: usize, seed: u64, method: SamplingMethod) -> Self {
        match method {
            SamplingMethod::MonteCarlo => BaseGenerator::MonteCarlo { dim, seed },
            SamplingMethod::Qmc => BaseGenerator::Qmc(ScrambledHalton::new(dim, seed)),
        }
    }

    fn gaussian(&mut self, j: usize) -> Vec<f64> {
        match self {
            BaseGenerator::MonteCarlo { dim, seed } => {
                // one ChaCha stream per point index
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(j as u64);
                (0..*dim).map(|_| StandardNormal.sample(&mut rng)).collect()
            }
            BaseGenerator::Qmc(h) => {
                let std = Normal::standard();
                h.point(j as u64).into_iter().map(|u| std.inverse_cdf(u)).collect()
            }
        }
    }

    fn unit(&mut self, j: usize) -> Vec<f64> {
        let mut g = self.gaussian(j);
        let norm = g.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 0.0 && norm.is_finite() {
            g.iter_mut().for_each(|c| *c /= norm);
            g
        } else {
            // measure-zero event; fall back to a coordinate axis
            let mut e = vec![0.0; g.len()];
            e[j % g.len()] = 1.0;
            e
        }
    }
}

/// Halton sequence with independent random digit permutations per
/// (coordinate, digit position).
struct ScrambledHalton {
    bases: Vec<u64>,
    perms: Vec<Vec<Vec<u64>>>,
}

impl ScrambledHalton {
    fn new(dim: usize, seed: u64) -> Self {
        use rand::seq::SliceRandom;
        let bases = first_primes(dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::MAX);
        let perms = bases
            .iter()
            .map(|&b| {
                let depth = (53.0 / (b as f64).log2()).ceil() as usize;
                (0..depth)
                    .map(|_| {
                        let mut p: Vec<u64> = (0..b).collect();
                        p.shuffle(&mut rng);
                        p
                    })
                    .collect()
            })
            .collect();
        Self { bases, perms }
    }

    fn point(&self, index: u64) -> Vec<f64> {
        self.bases
            .iter()
            .zip(&self.perms)
            .map(|(&b, perms)| {
                let inv_b = 1.0 / b as f64;
                let mut scale = inv_b;
                let mut k = index;
                let mut u = 0.0;
                for perm in perms {
                    let digit = k % b;
                    k /= b;
                    u += perm[digit as usize] as f64 * scale;
                    scale *= inv_b;
                }
                u.clamp(f64::EPSILON, 1.0 - f64::EPSILON)
            })
            .collect()
    }
}

fn first_primes(n: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(n);
    let mut c = 2u64;
    while primes.len() < n {
        if primes.iter().take_while(|&&p| p * p <= c).all(|&p| !c.is_multiple_of(p)) {
            primes.push(c);
        }
        c += 1;
    }
    primes
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_diagonal_factors() {
        let m = GaussianModel::standard(2).unwrap();
        assert_eq!(m.factor(), &DMatrix::<f64>::identity(2, 2));
        let m = GaussianModel::new(vec![0.0, 0.0], DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]))
            .unwrap();
        assert_eq!(m.factor()[(0, 0)], 2.0);
        assert_eq!(m.factor()[(1, 1)], 1.0);
        assert_eq!(m.factor()[(1, 0)], 0.0);
    }

    #[test]
    fn indefinite_covariance_rejected() {
        // eigenvalues of [[1, 1.00001], [1.00001, 1]] are 2.00001 and -1e-5
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 1.00001, 1.00001, 1.0]);
        let err = GaussianModel::new(vec![0.0; 2], cov).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { row: 1, .. }));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(
            GaussianModel::new(vec![0.0; 2], asym),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn factor_reproduces_covariance() {
        let cov = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, -0.4, 0.3, 1.5, 0.2, -0.4, 0.2, 1.0]);
        let m = GaussianModel::new(vec![1.0, 2.0, 3.0], cov.clone()).unwrap();
        let l = m.factor();
        let err = (l * l.transpose() - &cov).amax();
        assert!(err <= 1e-10 * (1.0 + cov.amax()));
        for i in 0..3 {
            for j in i + 1..3 {
                assert_eq!(l[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn chi_values() {
        let law = RadialLaw::new(2);
        assert!((law.cdf(1.0) - (1.0 - (-0.5f64).exp())).abs() < 1e-12);
        assert!((law.pdf(1.0) - (-0.5f64).exp()).abs() < 1e-12);
        for m in 1..6 {
            assert_eq!(RadialLaw::new(m).cdf(0.0), 0.0);
        }
        assert!((RadialLaw::new(1).pdf(0.0) - 0.797_884_560_802_865_4).abs() < 1e-12);
        assert_eq!(RadialLaw::new(3).pdf(0.0), 0.0);
    }

    #[test]
    fn cutoff_leaves_tiny_tail() {
        for m in [1, 2, 5, 8, 16] {
            let law = RadialLaw::new(m);
            let r = law.cutoff();
            assert!(law.cdf(r) >= 1.0 - 1e-12, "m={m}");
            assert!(law.survival(r) <= RADIAL_TAIL * (1.0 + 1e-9));
            assert!(law.survival(r * (1.0 - 1e-6)) > RADIAL_TAIL);
        }
    }

    #[test]
    fn antithetic_pairs_and_unit_norm() {
        for method in [SamplingMethod::MonteCarlo, SamplingMethod::Qmc] {
            let d = DirectionSet::sample(2, 4, 11, method).unwrap();
            assert_eq!(d.len(), 4);
            for j in 0..2 {
                let a = d.direction(2 * j);
                let b = d.direction(2 * j + 1);
                assert!(a.iter().zip(b).all(|(x, y)| *x == -*y));
            }
            for v in d.iter() {
                let n: f64 = v.iter().map(|c| c * c).sum::<f64>().sqrt();
                assert!((n - 1.0).abs() <= 1e-12);
            }
            assert!((d.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn odd_counts_are_not_paired() {
        let d = DirectionSet::sample(3, 5, 3, SamplingMethod::MonteCarlo).unwrap();
        assert_eq!(d.len(), 5);
        assert!(d.direction(0) != d.direction(1).iter().map(|c| -c).collect::<Vec<_>>().as_slice());
    }

    #[test]
    fn zero_budget_rejected() {
        assert!(DirectionSet::sample(2, 0, 1, SamplingMethod::Qmc).is_err());
        assert!(DirectionSet::sample(0, 4, 1, SamplingMethod::Qmc).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        for method in [SamplingMethod::MonteCarlo, SamplingMethod::Qmc] {
            let a = DirectionSet::sample(5, 101, 42, method).unwrap();
            let b = DirectionSet::sample(5, 101, 42, method).unwrap();
            let bits = |d: &DirectionSet| d.coords.iter().map(|c| c.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a), bits(&b));
            let c = DirectionSet::sample(5, 101, 43, method).unwrap();
            assert_ne!(bits(&a), bits(&c));
        }
    }

    #[test]
    fn primes() {
        assert_eq!(first_primes(6), vec![2, 3, 5, 7, 11, 13]);
    }
}
