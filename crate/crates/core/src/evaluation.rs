//! Average and worst-case metrics over source domains and their convex hull.
//!
//! Every loss is affine in the covariance for a fixed frame, so the extremum
//! over the hull of the sources sits at a vertex. Regret is concave in the
//! covariance, and there the vertex maximum is an upper bound. All hull
//! quantities here are computed at the vertices.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::completion::{reconstruct_rows, CompletionModel, MaskedDataset};
use crate::datagen::{sample_gaussian_rows, sample_source_covariances, GenConfig};
use crate::error::{Error, Result};
use crate::linalg::{CovarianceMatrix, Frame};
use crate::losses::{average_covariance, loss, worst_case, BaselineCache, DomainCollection, DomainSpec, LossKind};
use crate::scalar::Real;
use crate::solvers::{solve_wcpca, FitResult, SolverConfig};

/// Factor applied to completion deltas in reports.
pub const MC_REPORT_SCALE: f64 = 1e4;

/// Worst case of an unnormalized loss over `conv(sources)`.
pub fn hull_supremum<T: Real>(kind: LossKind, v: &Frame<T>, sources: &DomainCollection<T>) -> Result<T> {
    if kind.is_normalized() {
        return Err(Error::InvalidKind(format!("{} (normalized)", kind.name())));
    }
    Ok(worst_case(kind, v, sources, Some(&mut BaselineCache::new()))?.value)
}

/// Worst case of a normalized loss over the hull of the trace-normalized sources.
pub fn hull_supremum_normalized<T: Real>(kind: LossKind, v: &Frame<T>, sources: &DomainCollection<T>) -> Result<T> {
    if !kind.is_normalized() {
        return Err(Error::InvalidKind(format!("{} (unnormalized)", kind.name())));
    }
    let normalized = sources.normalized()?;
    Ok(worst_case(kind.unnormalized(), v, &normalized, Some(&mut BaselineCache::new()))?.value)
}

/// Hull worst case for any kind.
pub fn hull_worst_case<T: Real>(kind: LossKind, v: &Frame<T>, sources: &DomainCollection<T>) -> Result<T> {
    if kind.is_normalized() {
        hull_supremum_normalized(kind, v, sources)
    } else {
        hull_supremum(kind, v, sources)
    }
}

/// Unweighted mean of the per-domain losses.
pub fn average_loss<T: Real>(kind: LossKind, v: &Frame<T>, sources: &DomainCollection<T>) -> Result<T> {
    let per = worst_case(kind, v, sources, Some(&mut BaselineCache::new()))?.per_domain;
    Ok(per.iter().fold(T::zero(), |a, b| a + *b) / T::cast(per.len() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeDeltas {
    pub average: f64,
    pub worst_case: f64,
}

/// Reconstruction-error differences of `method` against `baseline`, both
/// divided by the baseline's error on the unweighted mean covariance.
pub fn relative_deltas<T: Real>(
    method: &FitResult<T>,
    baseline: &FitResult<T>,
    sources: &DomainCollection<T>,
) -> Result<RelativeDeltas> {
    relative_deltas_frames(&method.frame, &baseline.frame, sources)
}

pub fn relative_deltas_frames<T: Real>(
    method: &Frame<T>,
    baseline: &Frame<T>,
    sources: &DomainCollection<T>,
) -> Result<RelativeDeltas> {
    let mean = average_covariance(sources);
    let denom = loss(LossKind::Rcs, baseline, &mean)?;
    if !(denom.as_f64() > 1e-14 * mean.trace().as_f64()) {
        return Err(Error::DegenerateBaseline);
    }
    let avg = loss(LossKind::Rcs, method, &mean)? - denom;
    let wc = hull_supremum(LossKind::Rcs, method, sources)? - hull_supremum(LossKind::Rcs, baseline, sources)?;
    Ok(RelativeDeltas {
        average: (avg / denom).as_f64(),
        worst_case: (wc / denom).as_f64(),
    })
}

/// Per-entry mean squared error `‖X_e − X̂_e‖²/(n_e p)` of inductive
/// reconstructions from observed entries, measured on all entries.
pub fn per_entry_errors<T: Real>(r: &Frame<T>, test: &MaskedDataset<T>) -> Result<Vec<T>> {
    test.domains()
        .iter()
        .map(|d| {
            if d.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "test domain '{}' must be complete to score reconstructions",
                    d.id
                )));
            }
            let recon = reconstruct_rows(&d.data, &d.mask, r)?;
            let size = T::cast((d.data.nrows() * d.data.ncols()) as f64);
            Ok((&d.data - recon).norm_squared() / size)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McMetrics {
    pub errors_a: Vec<f64>,
    pub errors_b: Vec<f64>,
    /// Mean over domains of `L_e(a) − L_e(b)`.
    pub delta_average: f64,
    /// `max_e L_e(a) − max_e L_e(b)`.
    pub delta_worst_case: f64,
}

impl McMetrics {
    pub fn scaled_average(&self) -> f64 {
        self.delta_average * MC_REPORT_SCALE
    }

    pub fn scaled_worst_case(&self) -> f64 {
        self.delta_worst_case * MC_REPORT_SCALE
    }
}

/// Test-set comparison of two completion models (typically max against pool).
pub fn mc_metrics<T: Real>(
    model_a: &CompletionModel<T>,
    model_b: &CompletionModel<T>,
    test: &MaskedDataset<T>,
) -> Result<McMetrics> {
    mc_metrics_frames(&model_a.right_factor, &model_b.right_factor, test)
}

pub fn mc_metrics_frames<T: Real>(a: &Frame<T>, b: &Frame<T>, test: &MaskedDataset<T>) -> Result<McMetrics> {
    let ea: Vec<f64> = per_entry_errors(a, test)?.iter().map(|v| v.as_f64()).collect();
    let eb: Vec<f64> = per_entry_errors(b, test)?.iter().map(|v| v.as_f64()).collect();
    let e = ea.len() as f64;
    let delta_average = ea.iter().zip(&eb).map(|(x, y)| x - y).sum::<f64>() / e;
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(McMetrics {
        delta_worst_case: max(&ea) - max(&eb),
        delta_average,
        errors_a: ea,
        errors_b: eb,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SampleSize {
    Finite(usize),
    /// Population covariances passed in place of empirical ones.
    Population,
}

impl std::fmt::Display for SampleSize {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SampleSize::Finite(n) => write!(f, "{n}"),
            SampleSize::Population => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyPoint {
    pub replicate: usize,
    pub n: SampleSize,
    /// Hull worst-case loss of the empirical solution minus that of the
    /// population solution, oriented so positive means the empirical one is worse.
    pub difference: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Summary {
            count: v.len(),
            median: quantile(&v, 0.5),
            q25: quantile(&v, 0.25),
            q75: quantile(&v, 0.75),
        })
    }
}

/// Linear-interpolation quantile of sorted values.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> f64 {
    Summary::of(values).map_or(f64::NAN, |s| s.median)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyTable {
    pub points: Vec<ConsistencyPoint>,
    pub summaries: Vec<(SampleSize, Summary)>,
}

fn oriented_gap<T: Real>(kind: LossKind, estimate: &Frame<T>, optimum: &Frame<T>, sources: &DomainCollection<T>) -> Result<f64> {
    let a = hull_worst_case(kind, estimate, sources)?.as_f64();
    let b = hull_worst_case(kind, optimum, sources)?.as_f64();
    Ok(if kind.is_variance() { b - a } else { a - b })
}

/// Empirical covariances `XᵀX/n` of `n` Gaussian rows per source domain.
pub fn empirical_sources<T: Real>(sources: &DomainCollection<T>, n: usize, seed: crate::Seed) -> Result<DomainCollection<T>> {
    let domains = sources
        .iter()
        .enumerate()
        .map(|(e, d)| {
            let x: DMatrix<T> = sample_gaussian_rows(&d.covariance, n, seed.derive(e as u64))?;
            Ok(DomainSpec::new(d.id.clone(), CovarianceMatrix::from_data(&x)?, d.weight).with_samples(n))
        })
        .collect::<Result<Vec<_>>>()?;
    DomainCollection::new(domains)
}

/// One replicate of the consistency study: a fresh source draw, its
/// population solution, and the gap of the empirical solution at each size.
pub fn consistency_replicate(
    gen: &GenConfig,
    kind: LossKind,
    k: usize,
    n_grid: &[SampleSize],
    replicate: usize,
    cfg: &SolverConfig,
) -> Result<Vec<ConsistencyPoint>> {
    let seed = gen.seed.derive(replicate as u64);
    let sources = sample_source_covariances::<f64>(&GenConfig { seed, ..*gen })?;
    let population = solve_wcpca(kind, &sources, k, &cfg.with_seed(seed.derive(0)))?;
    n_grid
        .iter()
        .enumerate()
        .map(|(g, &n)| {
            let grid_seed = seed.derive(1 + g as u64);
            let empirical = match n {
                SampleSize::Finite(n) => empirical_sources(&sources, n, grid_seed)?,
                SampleSize::Population => sources.clone(),
            };
            let fit = solve_wcpca(kind, &empirical, k, &cfg.with_seed(grid_seed))?;
            Ok(ConsistencyPoint {
                replicate,
                n,
                difference: oriented_gap(kind, &fit.frame, &population.frame, &sources)?,
            })
        })
        .collect()
}

pub fn consistency_curve(
    gen: &GenConfig,
    kind: LossKind,
    k: usize,
    n_grid: &[SampleSize],
    replicates: usize,
    cfg: &SolverConfig,
) -> Result<ConsistencyTable> {
    if replicates == 0 || n_grid.is_empty() {
        return Err(Error::InvalidConfig("need at least one replicate and one sample size".into()));
    }
    let mut points = Vec::with_capacity(replicates * n_grid.len());
    for rep in 0..replicates {
        points.extend(consistency_replicate(gen, kind, k, n_grid, rep, cfg)?);
    }
    Ok(ConsistencyTable {
        summaries: summarize_by_size(&points),
        points,
    })
}

/// Distribution summary of the differences at each sample size, in grid order.
pub fn summarize_by_size(points: &[ConsistencyPoint]) -> Vec<(SampleSize, Summary)> {
    let mut sizes: Vec<SampleSize> = Vec::new();
    for p in points {
        if !sizes.contains(&p.n) {
            sizes.push(p.n);
        }
    }
    sizes
        .into_iter()
        .filter_map(|n| {
            let vals: Vec<f64> = points.iter().filter(|p| p.n == n).map(|p| p.difference).collect();
            Summary::of(&vals).map(|s| (n, s))
        })
        .collect()
}

/// Per-domain normalized explained variance of each column prefix:
/// entry `[j][e]` uses the first `j + 1` columns on domain `e`.
pub fn explained_variance_prefixes<T: Real>(frame: &Frame<T>, domains: &DomainCollection<T>) -> Result<Vec<Vec<T>>> {
    (1..=frame.k())
        .map(|j| {
            let prefix = frame.prefix(j)?;
            domains
                .iter()
                .map(|d| loss(LossKind::NormVar, &prefix, &d.covariance))
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodEvaluation {
    pub method: String,
    pub average: f64,
    pub worst_case: f64,
    pub per_domain: Vec<f64>,
    pub deltas: Option<RelativeDeltas>,
    pub explained: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub kind: LossKind,
    pub methods: Vec<MethodEvaluation>,
}

/// Evaluate fits under `kind`; deltas are against `fits[baseline]` when given.
pub fn evaluate(
    kind: LossKind,
    fits: &[FitResult<f64>],
    sources: &DomainCollection<f64>,
    baseline: Option<usize>,
    with_explained: bool,
) -> Result<EvalReport> {
    if let Some(b) = baseline {
        if b >= fits.len() {
            return Err(Error::InvalidInput(format!("baseline index {b} out of range")));
        }
    }
    let methods = fits
        .iter()
        .map(|f| {
            let wc = worst_case(kind, &f.frame, sources, Some(&mut BaselineCache::new()))?;
            let n = wc.per_domain.len() as f64;
            Ok(MethodEvaluation {
                method: f.method.name().to_string(),
                average: wc.per_domain.iter().sum::<f64>() / n,
                worst_case: hull_worst_case(kind, &f.frame, sources)?,
                per_domain: wc.per_domain,
                deltas: baseline
                    .map(|b| relative_deltas(f, &fits[b], sources))
                    .transpose()?,
                explained: if with_explained {
                    Some(explained_variance_prefixes(&f.frame, sources)?)
                } else {
                    None
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport { kind, methods })
}

/// Everything the command line reports about one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub method: String,
    pub k: usize,
    pub p: usize,
    pub objective: f64,
    pub domain_ids: Vec<String>,
    pub active_domains: Vec<usize>,
    /// Per-domain losses keyed by kind name.
    pub losses: BTreeMap<String, Vec<f64>>,
    /// Hull worst case keyed by kind name.
    pub worst_case: BTreeMap<String, f64>,
    pub iterations_used: usize,
    pub restart_index: usize,
    pub restart_objectives: Vec<f64>,
}

pub fn fit_report(fit: &FitResult<f64>, domains: &DomainCollection<f64>) -> Result<FitReport> {
    let mut losses = BTreeMap::new();
    let mut worst = BTreeMap::new();
    let mut cache = BaselineCache::new();
    for kind in LossKind::ALL {
        let wc = worst_case(kind, &fit.frame, domains, Some(&mut cache))?;
        losses.insert(kind.name().to_string(), wc.per_domain);
        worst.insert(kind.name().to_string(), hull_worst_case(kind, &fit.frame, domains)?);
    }
    Ok(FitReport {
        method: fit.method.name().to_string(),
        k: fit.frame.k(),
        p: fit.frame.p(),
        objective: fit.objective,
        domain_ids: domains.iter().map(|d| d.id.clone()).collect(),
        active_domains: fit.active_domains.clone(),
        losses,
        worst_case: worst,
        iterations_used: fit.iterations_used,
        restart_index: fit.restart_index,
        restart_objectives: fit.restart_objectives.clone(),
    })
}
