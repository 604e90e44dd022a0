//! The six loss functionals, in covariance form, and their worst-case
//! aggregation over a collection of domains.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, CovarianceMatrix, Frame};
use crate::scalar::Real;

/// Weights must sum to one within this tolerance for pooling.
pub const WEIGHT_SUM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LossKind {
    Var,
    NormVar,
    #[serde(rename = "RCS")]
    Rcs,
    #[serde(rename = "NormRCS")]
    NormRcs,
    Reg,
    NormReg,
}

impl LossKind {
    pub const ALL: [LossKind; 6] = [
        LossKind::Var,
        LossKind::NormVar,
        LossKind::Rcs,
        LossKind::NormRcs,
        LossKind::Reg,
        LossKind::NormReg,
    ];

    /// Variance kinds are maximized, so their worst case is a minimum.
    pub fn is_variance(self) -> bool {
        matches!(self, LossKind::Var | LossKind::NormVar)
    }

    pub fn is_normalized(self) -> bool {
        matches!(self, LossKind::NormVar | LossKind::NormRcs | LossKind::NormReg)
    }

    pub fn is_regret(self) -> bool {
        matches!(self, LossKind::Reg | LossKind::NormReg)
    }

    pub fn unnormalized(self) -> LossKind {
        match self {
            LossKind::NormVar => LossKind::Var,
            LossKind::NormRcs => LossKind::Rcs,
            LossKind::NormReg => LossKind::Reg,
            other => other,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Var => "Var",
            LossKind::NormVar => "NormVar",
            LossKind::Rcs => "RCS",
            LossKind::NormRcs => "NormRCS",
            LossKind::Reg => "Reg",
            LossKind::NormReg => "NormReg",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidKind(s.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct DomainSpec<T: Real> {
    pub id: String,
    pub covariance: CovarianceMatrix<T>,
    pub weight: T,
    pub n: Option<usize>,
}

impl<T: Real> DomainSpec<T> {
    pub fn new(id: impl Into<String>, covariance: CovarianceMatrix<T>, weight: T) -> Self {
        Self {
            id: id.into(),
            covariance,
            weight,
            n: None,
        }
    }

    pub fn with_samples(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }
}

/// Nonempty ordered set of domains sharing a dimension, each with positive
/// trace and positive weight.
#[derive(Debug, Clone)]
pub struct DomainCollection<T: Real> {
    domains: Vec<DomainSpec<T>>,
    p: usize,
}

impl<T: Real> DomainCollection<T> {
    pub fn new(domains: Vec<DomainSpec<T>>) -> Result<Self> {
        let first = domains
            .first()
            .ok_or_else(|| Error::InvalidInput("domain collection is empty".into()))?;
        let p = first.covariance.dim();
        for d in &domains {
            if d.covariance.dim() != p {
                return Err(Error::InvalidInput(format!(
                    "domain '{}' has dimension {}, expected {p}",
                    d.id,
                    d.covariance.dim()
                )));
            }
            let tr = d.covariance.trace();
            if !(tr > T::zero()) {
                return Err(Error::ZeroTrace(tr.as_f64()));
            }
            if !(d.weight > T::zero()) {
                return Err(Error::InvalidWeights(d.weight.as_f64()));
            }
        }
        Ok(Self { domains, p })
    }

    /// Equal weights, ids `domain1`, `domain2`, ….
    pub fn from_covariances(covs: Vec<CovarianceMatrix<T>>) -> Result<Self> {
        let w = T::one() / T::cast(covs.len().max(1) as f64);
        Self::new(
            covs.into_iter()
                .enumerate()
                .map(|(i, c)| DomainSpec::new(format!("domain{}", i + 1), c, w))
                .collect(),
        )
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.domains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }

    pub fn domains(&self) -> &[DomainSpec<T>] {
        &self.domains
    }

    pub fn get(&self, e: usize) -> &DomainSpec<T> {
        &self.domains[e]
    }

    pub fn iter(&self) -> impl Iterator<Item = &DomainSpec<T>> {
        self.domains.iter()
    }

    pub fn covariances(&self) -> impl Iterator<Item = &CovarianceMatrix<T>> {
        self.domains.iter().map(|d| &d.covariance)
    }

    /// Same domains with every covariance divided by its trace.
    pub fn normalized(&self) -> Result<Self> {
        let domains = self
            .domains
            .iter()
            .map(|d| {
                Ok(DomainSpec {
                    covariance: d.covariance.normalized()?,
                    ..d.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(domains)
    }

    /// Same domains with equal weights `1/E`.
    pub fn with_equal_weights(&self) -> Self {
        let w = T::one() / T::cast(self.len() as f64);
        Self {
            domains: self
                .domains
                .iter()
                .map(|d| DomainSpec { weight: w, ..d.clone() })
                .collect(),
            p: self.p,
        }
    }
}

/// Memoized top-`k` eigenvalue sums keyed by `(domain id, k)`.
#[derive(Debug, Default, Clone)]
pub struct BaselineCache<T: Real> {
    sums: HashMap<(String, usize), T>,
}

impl<T: Real> BaselineCache<T> {
    pub fn new() -> Self {
        Self {
            sums: HashMap::new(),
        }
    }

    pub fn get_or_compute(&mut self, domain: &DomainSpec<T>, k: usize) -> Result<T> {
        if let Some(v) = self.sums.get(&(domain.id.clone(), k)) {
            return Ok(*v);
        }
        let v = top_k_eigensum(&domain.covariance, k)?;
        self.sums.insert((domain.id.clone(), k), v);
        Ok(v)
    }
}

/// `Σᵢ₌₁ᵏ λᵢ(Σ)`, the largest explained variance any rank-`k` frame attains.
pub fn top_k_eigensum<T: Real>(sigma: &CovarianceMatrix<T>, k: usize) -> Result<T> {
    Ok(sym_eigen(sigma)?.top_sum(k))
}

fn check_shape<T: Real>(v: &Frame<T>, sigma: &CovarianceMatrix<T>) -> Result<()> {
    if v.p() != sigma.dim() {
        return Err(Error::InvalidInput(format!(
            "frame has {} rows but covariance is {}x{}",
            v.p(),
            sigma.dim(),
            sigma.dim()
        )));
    }
    Ok(())
}

/// Loss of frame `v` on covariance `sigma`.
pub fn loss<T: Real>(kind: LossKind, v: &Frame<T>, sigma: &CovarianceMatrix<T>) -> Result<T> {
    let baseline = if kind.is_regret() {
        Some(top_k_eigensum(sigma, v.k())?)
    } else {
        None
    };
    loss_with_baseline(kind, v, sigma, baseline)
}

/// As [`loss`], with the regret baseline `Σᵢ₌₁ᵏ λᵢ(Σ)` supplied by the caller.
pub fn loss_with_baseline<T: Real>(
    kind: LossKind,
    v: &Frame<T>,
    sigma: &CovarianceMatrix<T>,
    topk: Option<T>,
) -> Result<T> {
    check_shape(v, sigma)?;
    let tr = sigma.trace();
    if kind.is_normalized() && !(tr > T::zero()) {
        return Err(Error::ZeroTrace(tr.as_f64()));
    }
    let var = v.explained(sigma);
    let topk = || match topk {
        Some(s) => Ok(s),
        None => top_k_eigensum(sigma, v.k()),
    };
    Ok(match kind {
        LossKind::Var => var,
        LossKind::NormVar => var / tr,
        LossKind::Rcs => tr - var,
        LossKind::NormRcs => (tr - var) / tr,
        LossKind::Reg => topk()? - var,
        LossKind::NormReg => (topk()? - var) / tr,
    })
}

/// `(offset, scale)` with `loss(kind, V; Σ) = offset + scale · Tr(VᵀΣV)`.
/// Every kind is affine in the explained variance.
pub(crate) fn affine_coefficients<T: Real>(kind: LossKind, trace: T, topk: T) -> (T, T) {
    let one = T::one();
    match kind {
        LossKind::Var => (T::zero(), one),
        LossKind::NormVar => (T::zero(), one / trace),
        LossKind::Rcs => (trace, -one),
        LossKind::NormRcs => (one, -one / trace),
        LossKind::Reg => (topk, -one),
        LossKind::NormReg => (topk / trace, -one / trace),
    }
}

/// Worst-case value over domains and the domain attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct WorstCase<T: Real> {
    pub value: T,
    /// Smallest index attaining the extremum.
    pub domain: usize,
    pub per_domain: Vec<T>,
}

impl<T: Real> WorstCase<T> {
    /// Indices whose loss lies within `tol` of the worst case.
    pub fn active(&self, tol: T) -> Vec<usize> {
        self.per_domain
            .iter()
            .enumerate()
            .filter(|(_, l)| (**l - self.value).abs() <= tol)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Index of the worst entry: minimum for variance kinds, maximum otherwise;
/// ties go to the smallest index.
pub(crate) fn worst_index<T: Real>(kind: LossKind, values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        let worse = if kind.is_variance() {
            *v < values[best]
        } else {
            *v > values[best]
        };
        if worse {
            best = i;
        }
    }
    best
}

pub fn per_domain_losses<T: Real>(
    kind: LossKind,
    v: &Frame<T>,
    domains: &DomainCollection<T>,
    mut cache: Option<&mut BaselineCache<T>>,
) -> Result<Vec<T>> {
    domains
        .iter()
        .map(|d| {
            let baseline = match (kind.is_regret(), cache.as_deref_mut()) {
                (true, Some(c)) => Some(c.get_or_compute(d, v.k())?),
                _ => None,
            };
            loss_with_baseline(kind, v, &d.covariance, baseline)
        })
        .collect()
}

/// Minimum over domains for variance kinds, maximum for the others.
pub fn worst_case<T: Real>(
    kind: LossKind,
    v: &Frame<T>,
    domains: &DomainCollection<T>,
    cache: Option<&mut BaselineCache<T>>,
) -> Result<WorstCase<T>> {
    if domains.is_empty() {
        return Err(Error::InvalidInput("domain collection is empty".into()));
    }
    let per_domain = per_domain_losses(kind, v, domains, cache)?;
    let domain = worst_index(kind, &per_domain);
    Ok(WorstCase {
        value: per_domain[domain],
        domain,
        per_domain,
    })
}

/// `Σ_e w_e Σ_e`.
pub fn pooled_covariance<T: Real>(domains: &DomainCollection<T>) -> Result<CovarianceMatrix<T>> {
    let total: T = domains.iter().fold(T::zero(), |acc, d| acc + d.weight);
    if (total - T::one()).abs() > T::cast(WEIGHT_SUM_TOL) {
        return Err(Error::InvalidWeights(total.as_f64()));
    }
    let p = domains.p();
    let sum = domains
        .iter()
        .fold(DMatrix::<T>::zeros(p, p), |acc, d| acc + d.covariance.matrix() * d.weight);
    Ok(CovarianceMatrix::from_psd_unchecked(sum))
}

/// `(1/E) Σ_e Σ_e`, ignoring weights.
pub fn average_covariance<T: Real>(domains: &DomainCollection<T>) -> CovarianceMatrix<T> {
    let p = domains.p();
    let sum = domains
        .iter()
        .fold(DMatrix::<T>::zeros(p, p), |acc, d| acc + d.covariance.matrix());
    CovarianceMatrix::from_psd_unchecked(sum / T::cast(domains.len() as f64))
}
