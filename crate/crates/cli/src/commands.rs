use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{json, Value};
use wcpca::completion::{fit_mc, incoherence, reconstruct_rows, McConfig, McMethod, MaskedDataset, MaskedDomain};
use wcpca::datagen::sample_masks;
use wcpca::evaluation::fit_report;
use wcpca::losses::DomainCollection;
use wcpca::preprocess::{
    explained_variance_table, export_covariances, format_f64, import_covariances, load_csv, load_masked_csv,
    preprocess_with, write_matrix_csv, Weighting,
};
use wcpca::solvers::{fit, order_basis, Method, SolverConfig};
use wcpca::{Error, Result, Seed};

use crate::experiments::{self, Experiment, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "wcpca", version, about = "Worst-case PCA and matrix completion across domains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a frame to multi-domain data or covariance files.
    Fit(FitArgs),
    /// Run one of the simulation studies and write a long-format CSV.
    Simulate(SimulateArgs),
    /// Fit a low-rank completion model to partially observed domains.
    Complete(CompleteArgs),
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub step_size: Option<f64>,
}

impl SolverArgs {
    fn config(&self, seed: u64) -> SolverConfig {
        let mut cfg = SolverConfig::default().with_seed(Seed(seed));
        if let Some(r) = self.restarts {
            cfg.restarts = r;
        }
        if let Some(m) = self.max_iters {
            cfg.max_iters = m;
        }
        if let Some(s) = self.step_size {
            cfg.step_size = s;
        }
        cfg
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Data table with a header and a domain label column.
    #[arg(long, conflicts_with = "from_cov", required_unless_present = "from_cov")]
    pub csv: Option<PathBuf>,
    /// Covariance input: a directory with a manifest, a manifest file, or one CSV per domain.
    #[arg(long, num_args = 1.., conflicts_with = "csv")]
    pub from_cov: Vec<PathBuf>,
    #[arg(long, default_value = "domain")]
    pub domain_col: String,
    /// Comma-separated feature columns; all other columns are ignored.
    #[arg(long, value_delimiter = ',')]
    pub features: Vec<String>,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value = "max-rcs")]
    pub objective: String,
    /// Also write the frame with its columns ordered by worst-case explained variance.
    #[arg(long)]
    pub order: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Weight domains equally instead of by sample count.
    #[arg(long)]
    pub equal_weights: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// One of hull-bound, avg-vs-wc, finite-sample, het-noise, mc-observed, mc-masked.
    pub experiment: String,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Sample size, or a comma-separated grid for finite-sample.
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub domains: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub missing_frac: Option<f64>,
    /// Use the published problem sizes for the completion studies.
    #[arg(long)]
    pub paper_scale: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Fixed source covariances for hull-bound.
    #[arg(long, num_args = 1..)]
    pub from_cov: Vec<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompleteArgs {
    /// One data CSV per domain; empty, NA and NaN cells are unobserved.
    #[arg(long, required = true)]
    pub csv: Vec<PathBuf>,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value = "max")]
    pub objective: String,
    /// Hide this fraction of every row in addition to the missing cells.
    #[arg(long)]
    pub missing_frac: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Rows to reconstruct with the fitted right factor.
    #[arg(long)]
    pub predict: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NumericalFailure(_) => 1,
        Error::InvalidConfig(_) | Error::InvalidRank { .. } | Error::InvalidKind(_) => 3,
        _ => 2,
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(a) => cmd_fit(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Complete(a) => cmd_complete(&a),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    // Round-tripping through `Value` sorts object keys.
    let v = serde_json::to_value(value).map_err(|e| Error::InvalidInput(format!("serializing report: {e}")))?;
    let text = serde_json::to_string_pretty(&v).map_err(|e| Error::InvalidInput(format!("serializing report: {e}")))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

struct FitInput {
    columns: Vec<String>,
    domains: DomainCollection<f64>,
    info: Value,
}

fn load_fit_input(a: &FitArgs) -> Result<FitInput> {
    if let Some(csv) = &a.csv {
        let features = (!a.features.is_empty()).then_some(a.features.as_slice());
        let raw = load_csv(csv, &a.domain_col, features)?;
        let weighting = if a.equal_weights { Weighting::Equal } else { Weighting::SampleCounts };
        let pre = preprocess_with(&raw, weighting)?;
        let info = json!({
            "source": "csv",
            "path": csv.display().to_string(),
            "domain_column": a.domain_col,
            "dropped_rows": pre.dropped_rows,
            "counts": pre.counts(),
            "weighting": if a.equal_weights { "equal" } else { "sample-counts" },
        });
        return Ok(FitInput {
            columns: pre.columns,
            domains: pre.domains,
            info,
        });
    }
    let import = import_covariances(&a.from_cov)?;
    let domains = if a.equal_weights {
        import.domains.with_equal_weights()
    } else {
        import.domains
    };
    let paths: Vec<String> = a.from_cov.iter().map(|p| p.display().to_string()).collect();
    Ok(FitInput {
        columns: import.columns,
        domains,
        info: json!({ "source": "covariances", "paths": paths }),
    })
}

pub fn cmd_fit(a: &FitArgs) -> Result<()> {
    let method: Method = a.objective.parse()?;
    let cfg = a.solver.config(a.seed);
    cfg.validate()?;
    let input = load_fit_input(a)?;
    let result = fit(method, &input.domains, a.k, &cfg)?;
    create_dir(&a.out)?;
    write_matrix_csv(a.out.join("frame.csv"), result.frame.matrix())?;

    let mut report = json!({
        "fit": fit_report(&result, &input.domains)?,
        "columns": input.columns,
        "explained": explained_variance_table(&result.frame, &input.domains)?,
        "input": input.info,
        "solver": cfg,
    });
    if a.order {
        let ordered = order_basis(method.ordering_kind(), &result.frame, &input.domains, &cfg)?;
        write_matrix_csv(a.out.join("frame_ordered.csv"), ordered.matrix())?;
        report["explained_ordered"] = serde_json::to_value(explained_variance_table(&ordered, &input.domains)?)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
    }
    if a.csv.is_some() {
        export_covariances(a.out.join("covariances"), &input.domains, &input.columns)?;
    }
    write_json(&a.out.join("report.json"), &report)
}

pub fn experiment_config(a: &SimulateArgs) -> Result<ExperimentConfig> {
    let experiment: Experiment = a.experiment.parse()?;
    let sources = if a.from_cov.is_empty() {
        None
    } else {
        Some(import_covariances(&a.from_cov)?.domains)
    };
    Ok(ExperimentConfig {
        experiment,
        replicates: a.replicates,
        p: a.p,
        domains: a.domains,
        alpha: a.alpha,
        beta: a.beta,
        n: a.n.clone(),
        k: a.k,
        missing_frac: a.missing_frac,
        paper_scale: a.paper_scale,
        seed: a.seed,
        jobs: a.jobs,
        sources,
        solver: a.solver.config(a.seed),
        completion: McConfig::default(),
    })
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let cfg = experiment_config(a)?;
    match &a.out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                create_dir(dir)?;
            }
            let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
            experiments::write_csv(&cfg, &mut BufWriter::new(file), &path.display().to_string())
        }
        None => experiments::write_csv(&cfg, &mut io::stdout().lock(), "<stdout>"),
    }
}

/// Replace unobserved cells by zero so they cannot leak into any product.
fn zero_unobserved(d: &mut MaskedDomain<f64>) {
    for (v, &m) in d.data.iter_mut().zip(d.mask.iter()) {
        if !m {
            *v = 0.0;
        }
    }
}

fn file_id(path: &Path, index: usize) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| format!("domain{}", index + 1))
}

pub fn cmd_complete(a: &CompleteArgs) -> Result<()> {
    let method: McMethod = a.objective.parse()?;
    let cfg = McConfig::default();
    let mut columns: Option<Vec<String>> = None;
    let mut domains = Vec::new();
    for (e, path) in a.csv.iter().enumerate() {
        let (cols, mut d) = load_masked_csv(path, file_id(path, e))?;
        match &columns {
            Some(c) if *c != cols => {
                return Err(Error::Schema(format!("{} has columns {cols:?}, expected {c:?}", path.display())));
            }
            Some(_) => {}
            None => columns = Some(cols),
        }
        if let Some(frac) = a.missing_frac {
            let extra = sample_masks(d.data.nrows(), d.data.ncols(), frac, Seed(a.seed).derive(e as u64))
                .map_err(|err| Error::InvalidConfig(err.to_string()))?;
            d.mask.zip_apply(&extra, |m, x| *m = *m && x);
        }
        zero_unobserved(&mut d);
        domains.push(d);
    }
    let columns = columns.unwrap_or_default();
    let data = MaskedDataset::new(domains)?;
    let model = fit_mc(method, &data, a.k, &cfg)?;
    create_dir(&a.out)?;
    write_matrix_csv(a.out.join("right_factor.csv"), model.right_factor.matrix())?;

    let ids: Vec<&str> = data.domains().iter().map(|d| d.id.as_str()).collect();
    let observed: Vec<usize> = data.domains().iter().map(|d| d.mask.iter().filter(|m| **m).count()).collect();
    let unidentified: Vec<&str> = model
        .unidentified_columns
        .iter()
        .map(|&j| columns.get(j).map(String::as_str).unwrap_or(""))
        .collect();
    let mut report = json!({
        "method": method.name(),
        "k": a.k,
        "p": data.p(),
        "columns": columns,
        "domain_ids": ids,
        "observed_entries": observed,
        "objective": model.objective(),
        "objective_trace": model.objective_trace,
        "domain_errors": model.domain_errors,
        "rounds": model.rounds(),
        "unidentified_columns": unidentified,
        "incoherence": incoherence(&model.right_factor),
        "config": cfg,
        "seed": a.seed,
        "missing_frac": a.missing_frac,
    });

    if let Some(path) = &a.predict {
        let (cols, mut d) = load_masked_csv(path, "predict")?;
        if cols != columns {
            return Err(Error::Schema(format!("{} has columns {cols:?}, expected {columns:?}", path.display())));
        }
        zero_unobserved(&mut d);
        let recon = reconstruct_rows(&d.data, &d.mask, &model.right_factor)?;
        write_predictions(&a.out.join("predictions.csv"), &columns, &recon)?;
        report["predicted_rows"] = json!(recon.nrows());
    }
    write_json(&a.out.join("report.json"), &report)
}

fn write_predictions(path: &Path, columns: &[String], m: &DMatrix<f64>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", columns.join(",")).map_err(io)?;
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format_f64(*v)).collect();
        writeln!(w, "{}", cells.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}
