//! Baseline PCA variants and the projected-gradient worst-case solvers.
//!
//! Every worst-case objective is affine in the explained variance of each
//! domain, so all solvers here reduce to one engine that minimizes a maximum
//! (or maximizes a minimum) of affine functions of `Tr(VᵀA_eV)` over the
//! Stiefel manifold. The engine runs Adam in the ambient `p × k` space, steps
//! along the gradient of the single active term, projects back with the polar
//! factor, and keeps the best iterate. When the best value stalls for
//! `plateau_window` iterations the learning rate is halved, up to ten times,
//! and the run restarts from the best iterate; the next stall ends the run.

mod pgd;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_rank, complement_basis, orthocomplement_frame, top_k_frame, Frame};
use crate::losses::{
    affine_coefficients, average_covariance, pooled_covariance, top_k_eigensum, worst_case, DomainCollection,
    LossKind,
};
use crate::rng::Seed;
use crate::scalar::Real;

pub(crate) use pgd::{adam_options, tangent, AffineProblem, AffineTerm};

/// Domains within this distance of the worst-case value count as active.
pub const ACTIVE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub step_size: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub restarts: usize,
    /// Minimum improvement of the best objective over `plateau_window` iterations.
    pub tol_objective: f64,
    pub plateau_window: usize,
    pub seed: Seed,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            step_size: 1e-2,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            restarts: 5,
            tol_objective: 1e-8,
            plateau_window: 50,
            seed: Seed::default(),
        }
    }
}

impl SolverConfig {
    pub fn with_seed(mut self, seed: Seed) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1");
        }
        if self.plateau_window == 0 {
            return bad("plateau_window must be at least 1");
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return bad("step_size must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(self.adam_eps > 0.0) || !(self.tol_objective >= 0.0) {
            return bad("adam_eps must be positive and tol_objective nonnegative");
        }
        Ok(())
    }
}

/// Which estimator produced a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Pool,
    Sep,
    AvgCov,
    WorstCase(LossKind),
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::Pool,
        Method::Sep,
        Method::AvgCov,
        Method::WorstCase(LossKind::Var),
        Method::WorstCase(LossKind::NormVar),
        Method::WorstCase(LossKind::Rcs),
        Method::WorstCase(LossKind::NormRcs),
        Method::WorstCase(LossKind::Reg),
        Method::WorstCase(LossKind::NormReg),
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pool => "pool",
            Method::Sep => "sep",
            Method::AvgCov => "avgcov",
            Method::WorstCase(LossKind::Var) => "min",
            Method::WorstCase(LossKind::NormVar) => "norm-min",
            Method::WorstCase(LossKind::Rcs) => "max-rcs",
            Method::WorstCase(LossKind::NormRcs) => "norm-max-rcs",
            Method::WorstCase(LossKind::Reg) => "max-regret",
            Method::WorstCase(LossKind::NormReg) => "norm-max-regret",
        }
    }

    pub fn kind(self) -> Option<LossKind> {
        match self {
            Method::WorstCase(k) => Some(k),
            _ => None,
        }
    }

    /// Variance criterion whose prefixes [`order_basis`] should optimize.
    pub fn ordering_kind(self) -> LossKind {
        match self.kind() {
            Some(k) if k.is_normalized() => LossKind::NormVar,
            _ => LossKind::Var,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown objective '{s}'")))
    }
}

#[derive(Debug, Clone)]
pub struct FitResult<T: Real> {
    pub method: Method,
    pub frame: Frame<T>,
    /// Worst-case loss for worst-case methods. Pooled, own-domain or
    /// average-covariance explained variance for the baselines.
    pub objective: T,
    pub active_domains: Vec<usize>,
    pub iterations_used: usize,
    pub restart_index: usize,
    /// Final objective of every restart, in restart order.
    pub restart_objectives: Vec<T>,
}

impl<T: Real> FitResult<T> {
    fn closed_form(method: Method, frame: Frame<T>, objective: T, active_domains: Vec<usize>) -> Self {
        Self {
            method,
            frame,
            objective,
            active_domains,
            iterations_used: 0,
            restart_index: 0,
            restart_objectives: vec![objective],
        }
    }
}

fn var_active<T: Real>(frame: &Frame<T>, domains: &DomainCollection<T>) -> Result<Vec<usize>> {
    Ok(worst_case(LossKind::Var, frame, domains, None)?.active(T::cast(ACTIVE_TOL)))
}

/// PCA on `Σ_e w_e Σ_e`. The objective is the pooled explained variance.
pub fn pool_pca<T: Real>(domains: &DomainCollection<T>, k: usize) -> Result<FitResult<T>> {
    let pooled = pooled_covariance(domains)?;
    let frame = top_k_frame(&pooled, k)?;
    let objective = frame.explained(&pooled);
    let active = var_active(&frame, domains)?;
    Ok(FitResult::closed_form(Method::Pool, frame, objective, active))
}

/// PCA on the unweighted mean covariance.
pub fn avgcov_pca<T: Real>(domains: &DomainCollection<T>, k: usize) -> Result<FitResult<T>> {
    let avg = average_covariance(domains);
    let frame = top_k_frame(&avg, k)?;
    let objective = frame.explained(&avg);
    let active = var_active(&frame, domains)?;
    Ok(FitResult::closed_form(Method::AvgCov, frame, objective, active))
}

/// Top-`k` PCA of the domain whose own optimal explained variance is
/// smallest (smallest index on ties).
pub fn sep_pca<T: Real>(domains: &DomainCollection<T>, k: usize) -> Result<FitResult<T>> {
    check_rank(k, domains.p())?;
    let own = domains
        .iter()
        .map(|d| top_k_eigensum(&d.covariance, k))
        .collect::<Result<Vec<T>>>()?;
    let mut e0 = 0;
    for (e, v) in own.iter().enumerate() {
        if *v < own[e0] {
            e0 = e;
        }
    }
    let frame = top_k_frame(&domains.get(e0).covariance, k)?;
    Ok(FitResult::closed_form(Method::Sep, frame, own[e0], vec![e0]))
}

/// Dispatch on `method`.
pub fn fit<T: Real>(method: Method, domains: &DomainCollection<T>, k: usize, cfg: &SolverConfig) -> Result<FitResult<T>> {
    match method {
        Method::Pool => pool_pca(domains, k),
        Method::Sep => sep_pca(domains, k),
        Method::AvgCov => avgcov_pca(domains, k),
        Method::WorstCase(kind) => solve_wcpca(kind, domains, k, cfg),
    }
}

/// Solve the worst-case problem for `kind` by projected Adam with restarts.
///
/// Hitting `max_iters` is not an error: the best iterate is returned and
/// `iterations_used` equals the budget.
pub fn solve_wcpca<T: Real>(
    kind: LossKind,
    domains: &DomainCollection<T>,
    k: usize,
    cfg: &SolverConfig,
) -> Result<FitResult<T>> {
    check_rank(k, domains.p())?;
    let terms = domains
        .iter()
        .map(|d| {
            let sigma = &d.covariance;
            let topk = if kind.is_regret() {
                top_k_eigensum(sigma, k)?
            } else {
                T::zero()
            };
            let (offset, scale) = affine_coefficients(kind, sigma.trace(), topk);
            Ok(AffineTerm {
                offset,
                scale,
                matrix: sigma.matrix().clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let problem = AffineProblem::new(terms, kind.is_variance())?;
    let out = pgd::solve(&problem, k, cfg)?;
    let wc = worst_case(kind, &out.frame, domains, None)?;
    Ok(FitResult {
        method: Method::WorstCase(kind),
        active_domains: wc.active(T::cast(ACTIVE_TOL)),
        objective: wc.value,
        frame: out.frame,
        iterations_used: out.iterations,
        restart_index: out.restart_index,
        restart_objectives: out.restart_values,
    })
}

fn variance_kind(kind: LossKind) -> Result<()> {
    if kind.is_variance() {
        Ok(())
    } else {
        Err(Error::InvalidKind(format!("{kind} (expected Var or NormVar)")))
    }
}

fn normalizers<T: Real>(kind: LossKind, domains: &DomainCollection<T>) -> Vec<T> {
    domains
        .iter()
        .map(|d| {
            if kind.is_normalized() {
                T::one() / d.covariance.trace()
            } else {
                T::one()
            }
        })
        .collect()
}

/// Directions chosen one at a time, each maximizing the worst-case
/// cumulative explained variance in the complement of its predecessors.
#[derive(Debug, Clone)]
pub struct SequentialFit<T: Real> {
    /// Column `j` is the `j`-th chosen direction.
    pub directions: Frame<T>,
    /// Worst-case cumulative value after each step.
    pub step_values: Vec<T>,
}

pub fn sequential_minpca<T: Real>(
    kind: LossKind,
    domains: &DomainCollection<T>,
    k: usize,
    cfg: &SolverConfig,
) -> Result<SequentialFit<T>> {
    variance_kind(kind)?;
    let p = domains.p();
    check_rank(k, p)?;
    let scales = normalizers(kind, domains);
    let mut cumulative = vec![T::zero(); domains.len()];
    let mut chosen: Vec<nalgebra::DVector<T>> = Vec::with_capacity(k);
    let mut step_values = Vec::with_capacity(k);

    for j in 0..k {
        let step_seed = cfg.seed.derive(j as u64);
        let basis = if chosen.is_empty() {
            DMatrix::<T>::identity(p, p)
        } else {
            let prev = Frame::from_orthonormal_unchecked(DMatrix::from_columns(&chosen));
            orthocomplement_frame(&prev, p - j, &mut step_seed.rng())?.into_matrix()
        };
        let terms = domains
            .iter()
            .zip(&scales)
            .zip(&cumulative)
            .map(|((d, s), c)| AffineTerm {
                offset: *c * *s,
                scale: *s,
                matrix: d.covariance.compress(&basis).into_matrix(),
            })
            .collect();
        let problem = AffineProblem::new(terms, true)?;
        let out = pgd::solve(&problem, 1, &cfg.with_seed(step_seed))?;
        let v = &basis * out.frame.column(0);
        let v = &v / v.norm();
        for (c, d) in cumulative.iter_mut().zip(domains.iter()) {
            *c += (d.covariance.matrix() * &v).dot(&v);
        }
        let worst = cumulative
            .iter()
            .zip(&scales)
            .map(|(c, s)| *c * *s)
            .fold(None, |acc: Option<T>, x| Some(acc.map_or(x, |a| a.min(x))))
            .expect("nonempty collection");
        step_values.push(worst);
        chosen.push(v);
    }
    let directions = Frame::new(DMatrix::from_columns(&chosen))?;
    Ok(SequentialFit {
        directions,
        step_values,
    })
}

/// Reorder a basis of `span(frame)` so that column prefixes carry the most
/// worst-case explained variance.
///
/// Starting from the full span, repeatedly remove the unit direction whose
/// removal leaves the largest worst-case explained variance. The result lists
/// the last remaining direction first, followed by the removed directions in
/// reverse order of removal, so the first column is the best single
/// direction found in the span.
pub fn order_basis<T: Real>(
    kind: LossKind,
    frame: &Frame<T>,
    domains: &DomainCollection<T>,
    cfg: &SolverConfig,
) -> Result<Frame<T>> {
    variance_kind(kind)?;
    if frame.p() != domains.p() {
        return Err(Error::InvalidInput(format!(
            "frame has {} rows but domains have dimension {}",
            frame.p(),
            domains.p()
        )));
    }
    let k = frame.k();
    if k == 1 {
        return Ok(frame.clone());
    }
    let scales = normalizers(kind, domains);
    let mut span = frame.matrix().clone();
    let mut removed = Vec::with_capacity(k - 1);

    for i in 0..k - 1 {
        let terms = domains
            .iter()
            .zip(&scales)
            .map(|(d, s)| {
                let a = d.covariance.compress(&span).into_matrix();
                AffineTerm {
                    offset: a.trace() * *s,
                    scale: -*s,
                    matrix: a,
                }
            })
            .collect();
        let problem = AffineProblem::new(terms, true)?;
        let out = pgd::solve(&problem, 1, &cfg.with_seed(cfg.seed.derive(i as u64)))?;
        let u = out.frame.into_matrix();
        removed.push(&span * &u);
        span = &span * complement_basis(&u)?;
    }
    let mut columns = vec![span.column(0).into_owned()];
    columns.extend(removed.iter().rev().map(|v| v.column(0).into_owned()));
    Frame::new(DMatrix::from_columns(&columns))
}
