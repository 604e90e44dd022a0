//! Synthetic source/target covariances, Gaussian samples, noise and masks.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{haar_frame, orthocomplement_frame, CovarianceMatrix, Frame};
use crate::losses::DomainCollection;
use crate::rng::{Rng, Seed};
use crate::scalar::Real;

/// Shared eigenvalues are drawn from `U[SHARED_LOW, SHARED_HIGH]`.
const SHARED_LOW: f64 = 0.1;
const SHARED_HIGH: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub p: usize,
    pub domains: usize,
    pub shared_rank: usize,
    pub specific_rank: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Draw the domain-specific eigenvalues separately for every domain.
    pub per_domain_gammas: bool,
    pub seed: Seed,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            p: 20,
            domains: 5,
            shared_rank: 5,
            specific_rank: 5,
            alpha: 0.1,
            beta: 1.0,
            per_domain_gammas: false,
            seed: Seed::default(),
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.domains == 0 {
            return bad("at least one domain is required".into());
        }
        if self.shared_rank == 0 || self.specific_rank == 0 {
            return bad("shared and specific ranks must be positive".into());
        }
        if self.shared_rank + self.specific_rank > self.p {
            return bad(format!(
                "shared_rank + specific_rank = {} exceeds p = {}",
                self.shared_rank + self.specific_rank,
                self.p
            ));
        }
        if !(self.alpha.is_finite() && self.beta.is_finite() && 0.0 <= self.alpha && self.alpha < self.beta) {
            return bad(format!("need 0 <= alpha < beta, got ({}, {})", self.alpha, self.beta));
        }
        Ok(())
    }
}

/// Every ingredient of one draw of source covariances.
///
/// `Σ_e = (shared_component + V_e diag(γ_e) V_eᵀ) / normalizers[e]`.
#[derive(Debug, Clone)]
pub struct SourceModel<T: Real> {
    pub shared_frame: Frame<T>,
    pub shared_eigenvalues: Vec<T>,
    /// `V diag(λ) Vᵀ`, built once and reused for every domain.
    pub shared_component: DMatrix<T>,
    pub specific_frames: Vec<Frame<T>>,
    pub specific_eigenvalues: Vec<Vec<T>>,
    pub normalizers: Vec<T>,
    pub domains: DomainCollection<T>,
}

fn uniform_vec<T: Real>(n: usize, low: f64, high: f64, rng: &mut Rng) -> Vec<T> {
    (0..n).map(|_| T::cast(rng.random_range(low..high))).collect()
}

fn low_rank<T: Real>(frame: &Frame<T>, eigenvalues: &[T]) -> DMatrix<T> {
    let v = frame.matrix();
    let scaled = v * DMatrix::from_diagonal(&DVector::from_column_slice(eigenvalues));
    scaled * v.transpose()
}

pub fn sample_source_model<T: Real>(cfg: &GenConfig) -> Result<SourceModel<T>> {
    cfg.validate()?;
    let mut rng = cfg.seed.rng();
    let shared_eigenvalues = uniform_vec::<T>(cfg.shared_rank, SHARED_LOW, SHARED_HIGH, &mut rng);
    let shared_frame = haar_frame::<T>(cfg.p, cfg.shared_rank, &mut rng)?;
    let shared_component = low_rank(&shared_frame, &shared_eigenvalues);
    let shared_sum = shared_eigenvalues.iter().fold(T::zero(), |a, b| a + *b);

    let common_gammas = uniform_vec::<T>(cfg.specific_rank, cfg.alpha, cfg.beta, &mut rng);
    let mut specific_frames = Vec::with_capacity(cfg.domains);
    let mut specific_eigenvalues = Vec::with_capacity(cfg.domains);
    let mut normalizers = Vec::with_capacity(cfg.domains);
    let mut covariances = Vec::with_capacity(cfg.domains);
    for _ in 0..cfg.domains {
        let gammas = if cfg.per_domain_gammas {
            uniform_vec::<T>(cfg.specific_rank, cfg.alpha, cfg.beta, &mut rng)
        } else {
            common_gammas.clone()
        };
        let frame = orthocomplement_frame(&shared_frame, cfg.specific_rank, &mut rng)?;
        let norm = shared_sum + gammas.iter().fold(T::zero(), |a, b| a + *b);
        let sigma = (&shared_component + low_rank(&frame, &gammas)) / norm;
        covariances.push(CovarianceMatrix::new(sigma)?);
        specific_frames.push(frame);
        specific_eigenvalues.push(gammas);
        normalizers.push(norm);
    }
    Ok(SourceModel {
        shared_frame,
        shared_eigenvalues,
        shared_component,
        specific_frames,
        specific_eigenvalues,
        normalizers,
        domains: DomainCollection::from_covariances(covariances)?,
    })
}

/// Trace-one source covariances of rank `shared_rank + specific_rank`.
pub fn sample_source_covariances<T: Real>(cfg: &GenConfig) -> Result<DomainCollection<T>> {
    Ok(sample_source_model::<T>(cfg)?.domains)
}

/// Uniform draw from the probability simplex (normalized i.i.d. exponentials).
pub fn sample_simplex<T: Real>(dim: usize, rng: &mut Rng) -> Vec<T> {
    let raw: Vec<f64> = (0..dim).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| T::cast(x / total)).collect()
}

/// `Σ_e w_e Σ_e` for arbitrary nonnegative weights.
pub fn convex_combination<T: Real>(sources: &DomainCollection<T>, weights: &[T]) -> Result<CovarianceMatrix<T>> {
    if weights.len() != sources.len() {
        return Err(Error::InvalidInput(format!(
            "{} weights for {} sources",
            weights.len(),
            sources.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= T::zero())) {
        return Err(Error::InvalidInput("convex weights must be nonnegative".into()));
    }
    let p = sources.p();
    let sum = sources
        .covariances()
        .zip(weights)
        .fold(DMatrix::<T>::zeros(p, p), |acc, (c, w)| acc + c.matrix() * *w);
    Ok(CovarianceMatrix::from_psd_unchecked(sum))
}

/// Uniformly weighted member of the convex hull of the sources.
pub fn sample_target_covariance<T: Real>(sources: &DomainCollection<T>, seed: Seed) -> Result<CovarianceMatrix<T>> {
    let w = sample_simplex::<T>(sources.len(), &mut seed.rng());
    convex_combination(sources, &w)
}

/// `n` rows `z Σ^{1/2}` with `z` standard Gaussian.
pub fn sample_gaussian_rows<T: Real>(sigma: &CovarianceMatrix<T>, n: usize, seed: Seed) -> Result<DMatrix<T>> {
    let root = sigma.sqrt()?;
    let z = gaussian_rows::<T>(n, sigma.dim(), &mut seed.rng());
    Ok(z * root)
}

fn gaussian_rows<T: Real>(n: usize, p: usize, rng: &mut Rng) -> DMatrix<T> {
    // Row-major fill so that each row consumes consecutive draws.
    let data: Vec<T> = (0..n * p)
        .map(|_| T::cast(StandardNormal.sample(rng)))
        .collect();
    DMatrix::from_row_slice(n, p, &data)
}

/// `rows + σ ε` with i.i.d. standard Gaussian `ε`.
pub fn add_heterogeneous_noise<T: Real>(rows: &DMatrix<T>, sigma_noise: T, seed: Seed) -> Result<DMatrix<T>> {
    if !(sigma_noise >= T::zero()) || !sigma_noise.is_finite() {
        return Err(Error::InvalidInput(format!("noise level must be nonnegative, got {sigma_noise}")));
    }
    if sigma_noise == T::zero() {
        return Ok(rows.clone());
    }
    let eps = gaussian_rows::<T>(rows.nrows(), rows.ncols(), &mut seed.rng());
    Ok(rows + eps * sigma_noise)
}

/// Per-domain noise levels drawn i.i.d. from `U[0, max]`.
pub fn sample_noise_levels(count: usize, max: f64, seed: Seed) -> Result<Vec<f64>> {
    if !(max >= 0.0) || !max.is_finite() {
        return Err(Error::InvalidInput(format!("noise bound must be nonnegative, got {max}")));
    }
    let mut rng = seed.rng();
    Ok((0..count).map(|_| rng.random::<f64>() * max).collect())
}

/// Number of masked entries per row for a missing fraction.
pub fn masked_per_row(p: usize, missing_frac: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&missing_frac) {
        return Err(Error::InvalidInput(format!("missing fraction must lie in [0, 1), got {missing_frac}")));
    }
    let m = (missing_frac * p as f64).round() as usize;
    if m >= p {
        return Err(Error::InvalidInput(format!(
            "masking {m} of {p} entries would leave rows unobserved"
        )));
    }
    Ok(m)
}

/// Observation mask (`true` = observed) with exactly `round(missing_frac·p)`
/// entries hidden in every row, chosen uniformly at random.
pub fn sample_masks(n: usize, p: usize, missing_frac: f64, seed: Seed) -> Result<DMatrix<bool>> {
    let m = masked_per_row(p, missing_frac)?;
    let mut rng = seed.rng();
    let mut mask = DMatrix::from_element(n, p, true);
    for i in 0..n {
        for j in rand::seq::index::sample(&mut rng, p, m) {
            mask[(i, j)] = false;
        }
    }
    Ok(mask)
}
