//! The simulation studies.
//!
//! Each study is split into units of work (a replicate, or a replicate and a
//! heterogeneity setting). Units run on a worker pool, but rows are emitted
//! in unit order and flushed after every batch, so the output is identical
//! for any number of workers.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use wcpca::completion::{fit_max_mc, fit_pool_mc, McConfig, MaskedDataset, MaskedDomain};
use wcpca::datagen::{
    add_heterogeneous_noise, sample_gaussian_rows, sample_masks, sample_noise_levels, sample_source_covariances,
    sample_target_covariance, GenConfig,
};
use wcpca::evaluation::{empirical_sources, hull_supremum, mc_metrics, relative_deltas};
use wcpca::linalg::{CovarianceMatrix, Frame};
use wcpca::losses::{average_covariance, loss, DomainCollection, LossKind};
use wcpca::preprocess::format_f64;
use wcpca::solvers::{pool_pca, solve_wcpca, Method, SolverConfig};
use wcpca::{Error, Result, Seed};

pub const CSV_HEADER: &str = "replicate,condition,method,metric,value";

/// Heterogeneity settings swept by the comparison studies.
pub const HETEROGENEITY_GRID: [(f64, f64); 4] = [(0.1, 0.5), (0.5, 1.0), (1.0, 2.0), (2.0, 5.0)];
pub const FINITE_SAMPLE_GRID: [usize; 6] = [100, 250, 500, 1000, 2000, 5000];
pub const HULL_TARGETS: usize = 50;
pub const NOISE_BOUND: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    HullBound,
    AvgVsWc,
    FiniteSample,
    HetNoise,
    McObserved,
    McMasked,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::HullBound,
        Experiment::AvgVsWc,
        Experiment::FiniteSample,
        Experiment::HetNoise,
        Experiment::McObserved,
        Experiment::McMasked,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::HullBound => "hull-bound",
            Experiment::AvgVsWc => "avg-vs-wc",
            Experiment::FiniteSample => "finite-sample",
            Experiment::HetNoise => "het-noise",
            Experiment::McObserved => "mc-observed",
            Experiment::McMasked => "mc-masked",
        }
    }

    fn is_completion(self) -> bool {
        matches!(self, Experiment::McObserved | Experiment::McMasked)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
                Error::InvalidConfig(format!("unknown experiment '{s}'; expected one of {}", names.join(", ")))
            })
    }
}

/// User-facing settings; `None` selects the study's default.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub replicates: Option<usize>,
    pub p: Option<usize>,
    pub domains: Option<usize>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    /// Sample sizes; the first entry is used by studies with a single size.
    pub n: Vec<usize>,
    pub k: Option<usize>,
    pub missing_frac: Option<f64>,
    pub paper_scale: bool,
    pub seed: u64,
    pub jobs: usize,
    /// Fixed source covariances replacing the random draw (hull-bound only).
    pub sources: Option<DomainCollection<f64>>,
    pub solver: SolverConfig,
    pub completion: McConfig,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            replicates: None,
            p: None,
            domains: None,
            alpha: None,
            beta: None,
            n: Vec::new(),
            k: None,
            missing_frac: None,
            paper_scale: false,
            seed: 0,
            jobs: 1,
            sources: None,
            solver: SolverConfig::default(),
            completion: McConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub replicate: usize,
    pub condition: String,
    pub method: String,
    pub metric: String,
    pub value: f64,
}

impl Row {
    fn new(replicate: usize, condition: impl Into<String>, method: &str, metric: &str, value: f64) -> Self {
        Self {
            replicate,
            condition: condition.into(),
            method: method.to_string(),
            metric: metric.to_string(),
            value,
        }
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.replicate,
            quote(&self.condition),
            self.method,
            self.metric,
            format_f64(self.value)
        )
    }
}

fn quote(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Settings after defaults are applied.
#[derive(Debug, Clone)]
struct Plan {
    experiment: Experiment,
    replicates: usize,
    gen: GenConfig,
    heterogeneity: Vec<(f64, f64)>,
    n: Vec<usize>,
    ks: Vec<usize>,
    missing_frac: f64,
    seed: Seed,
    sources: Option<DomainCollection<f64>>,
    solver: SolverConfig,
    completion: McConfig,
}

#[derive(Debug, Clone, Copy)]
struct Unit {
    replicate: usize,
    condition: usize,
}

impl Plan {
    fn resolve(cfg: &ExperimentConfig) -> Result<Plan> {
        let exp = cfg.experiment;
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if cfg.jobs == 0 {
            return bad("--jobs must be at least 1".into());
        }
        if cfg.sources.is_some() && exp != Experiment::HullBound {
            return bad(format!("fixed source covariances are only supported by hull-bound, not {exp}"));
        }
        let replicates = cfg.replicates.unwrap_or(if exp == Experiment::HullBound { 1 } else { 25 });
        if replicates == 0 {
            return bad("--replicates must be at least 1".into());
        }
        let default_p = match (exp.is_completion(), cfg.paper_scale) {
            (true, true) => 500,
            (true, false) => 60,
            _ => 20,
        };
        let p = cfg
            .sources
            .as_ref()
            .map(|s| s.p())
            .or(cfg.p)
            .unwrap_or(default_p);
        let gen = GenConfig {
            p,
            domains: cfg.domains.unwrap_or(5),
            per_domain_gammas: exp == Experiment::HetNoise,
            seed: Seed(cfg.seed),
            ..GenConfig::default()
        };
        let heterogeneity = match (cfg.alpha, cfg.beta) {
            (None, None) if matches!(exp, Experiment::HullBound | Experiment::HetNoise) => vec![(gen.alpha, gen.beta)],
            (None, None) => HETEROGENEITY_GRID.to_vec(),
            (a, b) => vec![(a.unwrap_or(gen.alpha), b.unwrap_or(gen.beta))],
        };
        if cfg.sources.is_none() {
            for &(alpha, beta) in &heterogeneity {
                GenConfig { alpha, beta, ..gen }.validate()?;
            }
        }
        let n = if !cfg.n.is_empty() {
            cfg.n.clone()
        } else {
            match exp {
                Experiment::FiniteSample => FINITE_SAMPLE_GRID.to_vec(),
                Experiment::HetNoise => vec![2000],
                Experiment::McObserved | Experiment::McMasked if cfg.paper_scale => vec![1000],
                Experiment::McObserved | Experiment::McMasked => vec![200],
                _ => Vec::new(),
            }
        };
        if n.contains(&0) {
            return bad("sample sizes must be positive".into());
        }
        let ks = match (cfg.k, exp) {
            (Some(k), _) => vec![k],
            (None, Experiment::HetNoise) => vec![10, 5],
            (None, e) if e.is_completion() => vec![2],
            (None, _) => vec![5.min(p.saturating_sub(1)).max(1)],
        };
        for &k in &ks {
            if k == 0 || k >= p {
                return Err(Error::InvalidRank { k, p });
            }
        }
        let missing_frac = cfg.missing_frac.unwrap_or(0.9);
        if exp.is_completion() {
            wcpca::datagen::masked_per_row(p, missing_frac).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        }
        cfg.solver.validate()?;
        cfg.completion.validate()?;
        Ok(Plan {
            experiment: exp,
            replicates,
            gen,
            heterogeneity,
            n,
            ks,
            missing_frac,
            seed: Seed(cfg.seed),
            sources: cfg.sources.clone(),
            solver: cfg.solver,
            completion: cfg.completion,
        })
    }

    fn units(&self) -> Vec<Unit> {
        let conditions = match self.experiment {
            Experiment::AvgVsWc | Experiment::FiniteSample | Experiment::McObserved | Experiment::McMasked => {
                self.heterogeneity.len()
            }
            Experiment::HullBound | Experiment::HetNoise => 1,
        };
        (0..self.replicates)
            .flat_map(|replicate| (0..conditions).map(move |condition| Unit { replicate, condition }))
            .collect()
    }

    fn unit_seed(&self, u: Unit) -> Seed {
        self.seed.derive(u.replicate as u64).derive(u.condition as u64)
    }

    fn gen_for(&self, u: Unit) -> GenConfig {
        let (alpha, beta) = self.heterogeneity[u.condition.min(self.heterogeneity.len() - 1)];
        GenConfig {
            alpha,
            beta,
            seed: self.unit_seed(u).derive(0),
            ..self.gen
        }
    }

    fn heterogeneity_label(&self, u: Unit) -> String {
        let (a, b) = self.heterogeneity[u.condition.min(self.heterogeneity.len() - 1)];
        format!("alpha={a},beta={b}")
    }

    fn solve(&self, kind: LossKind, d: &DomainCollection<f64>, k: usize, seed: Seed) -> Result<Frame<f64>> {
        Ok(solve_wcpca(kind, d, k, &self.solver.with_seed(seed))?.frame)
    }

    fn run_unit(&self, u: Unit) -> Result<Vec<Row>> {
        match self.experiment {
            Experiment::HullBound => self.hull_bound(u),
            Experiment::AvgVsWc => self.avg_vs_wc(u),
            Experiment::FiniteSample => self.finite_sample(u),
            Experiment::HetNoise => self.het_noise(u),
            Experiment::McObserved => self.completion(u, false),
            Experiment::McMasked => self.completion(u, true),
        }
    }

    fn hull_bound(&self, u: Unit) -> Result<Vec<Row>> {
        let seed = self.unit_seed(u);
        let sources = match &self.sources {
            Some(s) => s.clone(),
            None => sample_source_covariances(&self.gen_for(u))?,
        };
        let k = self.ks[0];
        let rep = u.replicate + 1;
        let pool = pool_pca(&sources.with_equal_weights(), k)?.frame;
        let max = self.solve(LossKind::Rcs, &sources, k, seed.derive(1))?;
        let mut rows = vec![Row::new(rep, "bound", "max-rcs", "m_star", hull_supremum(LossKind::Rcs, &max, &sources)?)];
        let mut emit = |label: String, sigma: &CovarianceMatrix<f64>| -> Result<()> {
            rows.push(Row::new(rep, label.clone(), "pool", "rcs", loss(LossKind::Rcs, &pool, sigma)?));
            rows.push(Row::new(rep, label, "max-rcs", "rcs", loss(LossKind::Rcs, &max, sigma)?));
            Ok(())
        };
        for (e, d) in sources.iter().enumerate() {
            emit(format!("source{}", e + 1), &d.covariance)?;
        }
        for t in 0..HULL_TARGETS {
            let target = sample_target_covariance(&sources, seed.derive(100 + t as u64))?;
            emit(format!("target{}", t + 1), &target)?;
        }
        Ok(rows)
    }

    fn avg_vs_wc(&self, u: Unit) -> Result<Vec<Row>> {
        let seed = self.unit_seed(u);
        let sources = sample_source_covariances(&self.gen_for(u))?;
        let k = self.ks[0];
        let rep = u.replicate + 1;
        let label = self.heterogeneity_label(u);
        let pool = pool_pca(&sources.with_equal_weights(), k)?;
        let max = solve_wcpca(LossKind::Rcs, &sources, k, &self.solver.with_seed(seed.derive(1)))?;
        let deltas = relative_deltas(&max, &pool, &sources)?;
        let mean = average_covariance(&sources);
        let mut rows = Vec::new();
        for (name, frame) in [("pool", &pool.frame), ("max-rcs", &max.frame)] {
            rows.push(Row::new(rep, label.clone(), name, "avg_rcs", loss(LossKind::Rcs, frame, &mean)?));
            rows.push(Row::new(rep, label.clone(), name, "wc_rcs", hull_supremum(LossKind::Rcs, frame, &sources)?));
        }
        rows.push(Row::new(rep, label.clone(), "max-rcs", "delta_avg", deltas.average));
        rows.push(Row::new(rep, label, "max-rcs", "delta_wc", deltas.worst_case));
        Ok(rows)
    }

    fn finite_sample(&self, u: Unit) -> Result<Vec<Row>> {
        let seed = self.unit_seed(u);
        let sources = sample_source_covariances(&self.gen_for(u))?;
        let k = self.ks[0];
        let rep = u.replicate + 1;
        let population = self.solve(LossKind::Rcs, &sources, k, seed.derive(1))?;
        let optimum = hull_supremum(LossKind::Rcs, &population, &sources)?;
        let mut rows = Vec::new();
        for (g, &n) in self.n.iter().enumerate() {
            let grid_seed = seed.derive(10 + g as u64);
            let empirical = empirical_sources(&sources, n, grid_seed.derive(0))?;
            let max = self.solve(LossKind::Rcs, &empirical, k, grid_seed.derive(1))?;
            let pool = pool_pca(&empirical.with_equal_weights(), k)?.frame;
            let wc_max = hull_supremum(LossKind::Rcs, &max, &sources)?;
            let wc_pool = hull_supremum(LossKind::Rcs, &pool, &sources)?;
            let label = format!("{},n={n}", self.heterogeneity_label(u));
            rows.push(Row::new(rep, label.clone(), "max-rcs", "diff_in_rcs", wc_max - optimum));
            rows.push(Row::new(rep, label, "max-rcs", "rel_error_fs", wc_max - wc_pool));
        }
        Ok(rows)
    }

    fn het_noise(&self, u: Unit) -> Result<Vec<Row>> {
        let seed = self.unit_seed(u);
        let sources = sample_source_covariances(&self.gen_for(u))?;
        let n = self.n[0];
        let rep = u.replicate + 1;
        let sigmas = sample_noise_levels(sources.len(), NOISE_BOUND, seed.derive(1))?;
        let mut clean = Vec::new();
        let mut noisy = Vec::new();
        let mut test = Vec::new();
        for (e, d) in sources.iter().enumerate() {
            let e = e as u64;
            let x = sample_gaussian_rows(&d.covariance, n, seed.derive(10 + e))?;
            let z = add_heterogeneous_noise(&x, sigmas[e as usize], seed.derive(20 + e))?;
            let t = sample_gaussian_rows(&d.covariance, n, seed.derive(30 + e))?;
            clean.push(CovarianceMatrix::from_data(&x)?);
            noisy.push(CovarianceMatrix::from_data(&z)?);
            test.push(CovarianceMatrix::from_data(&t)?);
        }
        let clean = DomainCollection::from_covariances(clean)?;
        let noisy = DomainCollection::from_covariances(noisy)?;
        let test = DomainCollection::from_covariances(test)?;
        let mut rows = Vec::new();
        for (ki, &k) in self.ks.iter().enumerate() {
            for (ni, (noise, train)) in [("clean", &clean), ("noisy", &noisy)].into_iter().enumerate() {
                for (mi, kind) in [LossKind::Rcs, LossKind::Reg].into_iter().enumerate() {
                    let s = seed.derive(100 + (ki * 4 + ni * 2 + mi) as u64);
                    let v = self.solve(kind, train, k, s)?;
                    rows.push(Row::new(
                        rep,
                        format!("k={k},noise={noise}"),
                        Method::WorstCase(kind).name(),
                        "wc_rcs_test",
                        hull_supremum(LossKind::Rcs, &v, &test)?,
                    ));
                }
            }
        }
        Ok(rows)
    }

    fn completion(&self, u: Unit, masked_sources: bool) -> Result<Vec<Row>> {
        let seed = self.unit_seed(u);
        let sources = sample_source_covariances(&self.gen_for(u))?;
        let n = self.n[0];
        let p = self.gen.p;
        let k = self.ks[0];
        let rep = u.replicate + 1;
        let source_frac = if masked_sources { self.missing_frac } else { 0.0 };
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (e, d) in sources.iter().enumerate() {
            let e64 = e as u64;
            let x: DMatrix<f64> = sample_gaussian_rows(&d.covariance, n, seed.derive(10 + e64))?;
            train.push(MaskedDomain {
                id: d.id.clone(),
                mask: sample_masks(n, p, source_frac, seed.derive(20 + e64))?,
                data: x,
            });
            let t = sample_gaussian_rows(&d.covariance, n, seed.derive(30 + e64))?;
            test.push(MaskedDomain {
                id: d.id.clone(),
                mask: sample_masks(n, p, self.missing_frac, seed.derive(40 + e64))?,
                data: t,
            });
        }
        let train = MaskedDataset::new(train)?;
        let test = MaskedDataset::new(test)?;
        let pool = fit_pool_mc(&train, k, &self.completion)?;
        let max = fit_max_mc(&train, k, &self.completion)?;
        let m = mc_metrics(&max, &pool, &test)?;
        let label = format!("{},missing={}", self.heterogeneity_label(u), self.missing_frac);
        let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let wc = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(vec![
            Row::new(rep, label.clone(), "pool-mc", "avg_error", avg(&m.errors_b)),
            Row::new(rep, label.clone(), "pool-mc", "wc_error", wc(&m.errors_b)),
            Row::new(rep, label.clone(), "max-mc", "avg_error", avg(&m.errors_a)),
            Row::new(rep, label.clone(), "max-mc", "wc_error", wc(&m.errors_a)),
            Row::new(rep, label.clone(), "max-mc", "delta_avg_1e4", m.scaled_average()),
            Row::new(rep, label, "max-mc", "delta_wc_1e4", m.scaled_worst_case()),
        ])
    }
}

/// Run a study, handing every row to `sink` in replicate order. Rows of
/// completed batches are delivered before an error is returned.
pub fn run_with<F>(cfg: &ExperimentConfig, mut sink: F) -> Result<()>
where
    F: FnMut(&[Row]) -> Result<()>,
{
    let plan = Plan::resolve(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start {} workers: {e}", cfg.jobs)))?;
    let units = plan.units();
    for batch in units.chunks(cfg.jobs) {
        let results: Vec<Result<Vec<Row>>> = pool.install(|| batch.par_iter().map(|u| plan.run_unit(*u)).collect());
        for r in results {
            sink(&r?)?;
        }
    }
    Ok(())
}

pub fn collect_rows(cfg: &ExperimentConfig) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    run_with(cfg, |batch| {
        rows.extend_from_slice(batch);
        Ok(())
    })?;
    Ok(rows)
}

/// Write the long-format table with a header, flushing after every batch.
pub fn write_csv<W: Write>(cfg: &ExperimentConfig, out: &mut W, label: &str) -> Result<()> {
    let io = |e| Error::io(label, e);
    writeln!(out, "{CSV_HEADER}").map_err(io)?;
    run_with(cfg, |rows| {
        for r in rows {
            writeln!(out, "{}", r.to_csv()).map_err(io)?;
        }
        out.flush().map_err(io)
    })
}

/// Values of one (condition, method, metric) cell across replicates.
pub fn values<'a>(rows: &'a [Row], condition: &'a str, method: &'a str, metric: &'a str) -> impl Iterator<Item = f64> + 'a {
    rows.iter()
        .filter(move |r| r.condition == condition && r.method == method && r.metric == metric)
        .map(|r| r.value)
}
