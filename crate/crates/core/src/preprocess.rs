//! CSV ingestion, per-domain centering with pooled standardization, and
//! covariance import/export.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::completion::{Mask, MaskedDomain};
use crate::error::{Error, Result};
use crate::evaluation::explained_variance_prefixes;
use crate::linalg::{CovarianceMatrix, Frame};
use crate::losses::{DomainCollection, DomainSpec};

/// Rows of a multi-domain table after dropping rows with non-finite features.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub columns: Vec<String>,
    pub domain_col: String,
    /// Domain ids in order of first appearance.
    pub domain_ids: Vec<String>,
    /// Index into `domain_ids` for every kept row.
    pub labels: Vec<usize>,
    pub rows: DMatrix<f64>,
    pub dropped_rows: usize,
}

impl RawTable {
    pub fn domain_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.domain_ids.len()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Rows belonging to domain `e`, in file order.
    pub fn block(&self, e: usize) -> DMatrix<f64> {
        let idx: Vec<usize> = (0..self.labels.len()).filter(|&i| self.labels[i] == e).collect();
        self.rows.select_rows(idx.iter())
    }
}

pub fn load_csv(path: impl AsRef<Path>, domain_col: &str, feature_cols: Option<&[String]>) -> Result<RawTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::Schema(format!("cannot open {}: {e}", path.display())))?;
    parse_csv(file, domain_col, feature_cols)
}

fn parse_cell(cell: &str) -> Option<f64> {
    let t = cell.trim();
    if t.is_empty() {
        return Some(f64::NAN);
    }
    t.parse::<f64>().ok()
}

pub fn parse_csv<R: Read>(reader: R, domain_col: &str, feature_cols: Option<&[String]>) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Schema(format!("unreadable header: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))
    };
    let label_idx = find(domain_col)?;
    let feature_idx: Vec<usize> = match feature_cols {
        Some(cols) => cols.iter().map(|c| find(c)).collect::<Result<_>>()?,
        None => (0..header.len()).filter(|&i| i != label_idx).collect(),
    };
    if feature_idx.len() < 2 {
        return Err(Error::Schema(format!(
            "need at least two numeric columns besides '{domain_col}', found {}",
            feature_idx.len()
        )));
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut domain_ids: Vec<String> = Vec::new();
    let mut lookup: HashMap<String, usize> = HashMap::new();
    let mut dropped = 0;
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Schema(format!("data row {}: {e}", line + 1)))?;
        let mut row = Vec::with_capacity(feature_idx.len());
        for &j in &feature_idx {
            let cell = record.get(j).unwrap_or("");
            let v = parse_cell(cell).ok_or_else(|| {
                Error::Schema(format!("data row {}, column '{}': '{cell}' is not numeric", line + 1, header[j]))
            })?;
            row.push(v);
        }
        if row.iter().any(|v| !v.is_finite()) {
            dropped += 1;
            continue;
        }
        let label = record.get(label_idx).unwrap_or("").trim().to_string();
        let next = domain_ids.len();
        let id = *lookup.entry(label.clone()).or_insert_with(|| {
            domain_ids.push(label);
            next
        });
        labels.push(id);
        values.extend(row);
    }
    if labels.is_empty() {
        return Err(Error::EmptyData(if dropped > 0 {
            format!("all {dropped} data rows had non-finite features")
        } else {
            "no data rows".into()
        }));
    }
    let table = RawTable {
        columns: feature_idx.iter().map(|&j| header[j].clone()).collect(),
        domain_col: domain_col.to_string(),
        rows: DMatrix::from_row_slice(labels.len(), feature_idx.len(), &values),
        domain_ids,
        labels,
        dropped_rows: dropped,
    };
    for (id, n) in table.domain_ids.iter().zip(table.domain_counts()) {
        if n < 2 {
            return Err(Error::Schema(format!("domain '{id}' has {n} row(s); at least 2 are required")));
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Weighting {
    /// `w_e = n_e / n`.
    #[default]
    SampleCounts,
    Equal,
}

#[derive(Debug, Clone)]
pub struct PreprocessedCollection {
    pub columns: Vec<String>,
    pub domain_ids: Vec<String>,
    /// Centered and standardized rows per domain.
    pub blocks: Vec<DMatrix<f64>>,
    /// Per-domain column means removed before scaling.
    pub means: Vec<Vec<f64>>,
    /// Pooled column standard deviations (1/n convention) after centering.
    pub stds: Vec<f64>,
    pub dropped_rows: usize,
    pub domains: DomainCollection<f64>,
}

impl PreprocessedCollection {
    pub fn counts(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.nrows()).collect()
    }

    pub fn explained_variance_table(&self, frame: &Frame<f64>) -> Result<ExplainedVarianceTable> {
        explained_variance_table(frame, &self.domains)
    }
}

pub fn preprocess(raw: &RawTable) -> Result<PreprocessedCollection> {
    preprocess_with(raw, Weighting::SampleCounts)
}

pub fn preprocess_with(raw: &RawTable, weighting: Weighting) -> Result<PreprocessedCollection> {
    let p = raw.rows.ncols();
    let n = raw.rows.nrows();
    let mut blocks = Vec::with_capacity(raw.domain_ids.len());
    let mut means = Vec::with_capacity(raw.domain_ids.len());
    for e in 0..raw.domain_ids.len() {
        let mut b = raw.block(e);
        let mu: Vec<f64> = (0..p).map(|j| b.column(j).mean()).collect();
        for (j, m) in mu.iter().enumerate() {
            b.column_mut(j).add_scalar_mut(-m);
        }
        blocks.push(b);
        means.push(mu);
    }
    let mut stds = vec![0.0; p];
    for (j, s) in stds.iter_mut().enumerate() {
        let ss: f64 = blocks.iter().map(|b| b.column(j).norm_squared()).sum();
        *s = (ss / n as f64).sqrt();
        let scale = raw.rows.column(j).amax().max(f64::MIN_POSITIVE);
        if *s <= 1e-12 * scale {
            return Err(Error::ConstantColumn(raw.columns[j].clone()));
        }
    }
    for b in blocks.iter_mut() {
        for (j, s) in stds.iter().enumerate() {
            b.column_mut(j).unscale_mut(*s);
        }
    }
    let e = blocks.len() as f64;
    let specs = blocks
        .iter()
        .zip(&raw.domain_ids)
        .map(|(b, id)| {
            let w = match weighting {
                Weighting::SampleCounts => b.nrows() as f64 / n as f64,
                Weighting::Equal => 1.0 / e,
            };
            Ok(DomainSpec::new(id.clone(), CovarianceMatrix::from_data(b)?, w).with_samples(b.nrows()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PreprocessedCollection {
        columns: raw.columns.clone(),
        domain_ids: raw.domain_ids.clone(),
        blocks,
        means,
        stds,
        dropped_rows: raw.dropped_rows,
        domains: DomainCollection::new(specs)?,
    })
}

/// Row `j` holds each domain's explained-variance proportion for the first
/// `j + 1` columns of `frame`. Columns are taken in the order given, so the
/// table is most useful for ordered frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainedVarianceTable {
    pub domain_ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn explained_variance_table(frame: &Frame<f64>, domains: &DomainCollection<f64>) -> Result<ExplainedVarianceTable> {
    Ok(ExplainedVarianceTable {
        domain_ids: domains.iter().map(|d| d.id.clone()).collect(),
        rows: explained_variance_prefixes(frame, domains)?,
    })
}

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestDomain {
    pub id: String,
    pub file: String,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default)]
    pub columns: Vec<String>,
    pub domains: Vec<ManifestDomain>,
}

/// Format a float with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write a headerless numeric CSV.
pub fn write_matrix_csv(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for i in 0..m.nrows() {
        let line: Vec<String> = m.row(i).iter().map(|v| format_f64(*v)).collect();
        writeln!(w, "{}", line.join(",")).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Read a headerless numeric CSV; every row must have the same length.
pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::Schema(format!("cannot open {}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(file);
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Schema(format!("{} row {}: {e}", path.display(), i + 1)))?;
        if *cols.get_or_insert(record.len()) != record.len() {
            return Err(Error::Schema(format!("{} row {} has {} fields", path.display(), i + 1, record.len())));
        }
        for cell in record.iter() {
            let v = cell
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Schema(format!("{} row {}: '{cell}' is not a finite number", path.display(), i + 1)))?;
            values.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::EmptyData(format!("{} is empty", path.display())))?;
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

/// Write one CSV per domain covariance plus a JSON manifest into `dir`.
pub fn export_covariances(dir: impl AsRef<Path>, domains: &DomainCollection<f64>, columns: &[String]) -> Result<Manifest> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(domains.len());
    for (e, d) in domains.iter().enumerate() {
        let file = format!("cov_{e}.csv");
        write_matrix_csv(dir.join(&file), d.covariance.matrix())?;
        entries.push(ManifestDomain {
            id: d.id.clone(),
            file,
            n: d.n,
            weight: Some(d.weight),
        });
    }
    let manifest = Manifest {
        columns: columns.to_vec(),
        domains: entries,
    };
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&serde_json::to_value(&manifest).expect("manifest serializes"))
        .expect("value serializes");
    std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Covariances read back from disk with the column names they were built from.
#[derive(Debug, Clone)]
pub struct CovarianceImport {
    pub columns: Vec<String>,
    pub domains: DomainCollection<f64>,
}

/// Load covariances from a manifest (or a directory containing one), or from
/// plain covariance CSV files given directly. Domains without weights get
/// equal weights; ids default to file stems.
pub fn import_covariances(paths: &[PathBuf]) -> Result<CovarianceImport> {
    let manifest_path = match paths {
        [] => return Err(Error::Schema("no covariance files given".into())),
        [one] if one.is_dir() => Some(one.join(MANIFEST_FILE)),
        [one] if one.extension().is_some_and(|x| x == "json") => Some(one.clone()),
        _ => None,
    };
    let (base, manifest) = match manifest_path {
        Some(m) => {
            let text = std::fs::read_to_string(&m).map_err(|e| Error::Schema(format!("cannot read {}: {e}", m.display())))?;
            let manifest: Manifest =
                serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", m.display())))?;
            (m.parent().map(Path::to_path_buf).unwrap_or_default(), manifest)
        }
        None => (
            PathBuf::new(),
            Manifest {
                columns: Vec::new(),
                domains: paths
                    .iter()
                    .map(|p| ManifestDomain {
                        id: p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
                        file: p.display().to_string(),
                        n: None,
                        weight: None,
                    })
                    .collect(),
            },
        ),
    };
    if manifest.domains.is_empty() {
        return Err(Error::Schema("manifest lists no domains".into()));
    }
    let all_weighted = manifest.domains.iter().all(|d| d.weight.is_some());
    let equal = 1.0 / manifest.domains.len() as f64;
    let specs = manifest
        .domains
        .iter()
        .map(|d| {
            let m = read_matrix_csv(base.join(&d.file))?;
            let cov = CovarianceMatrix::new(m).map_err(|e| Error::Schema(format!("{}: {e}", d.file)))?;
            let w = if all_weighted { d.weight.expect("checked") } else { equal };
            let spec = DomainSpec::new(d.id.clone(), cov, w);
            Ok(match d.n {
                Some(n) => spec.with_samples(n),
                None => spec,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let domains = DomainCollection::new(specs)?;
    if !manifest.columns.is_empty() && manifest.columns.len() != domains.p() {
        return Err(Error::Schema(format!(
            "manifest names {} columns but covariances are {}×{}",
            manifest.columns.len(),
            domains.p(),
            domains.p()
        )));
    }
    let columns = if manifest.columns.is_empty() {
        (1..=domains.p()).map(|j| format!("x{j}")).collect()
    } else {
        manifest.columns
    };
    Ok(CovarianceImport { columns, domains })
}

/// A data CSV with a header where empty, `NA` or `NaN` cells are unobserved.
pub fn load_masked_csv(path: impl AsRef<Path>, id: impl Into<String>) -> Result<(Vec<String>, MaskedDomain<f64>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::Schema(format!("cannot open {}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let columns: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let p = columns.len();
    let mut values = Vec::new();
    let mut observed = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Schema(format!("{} row {}: {e}", path.display(), i + 1)))?;
        if record.len() != p {
            return Err(Error::Schema(format!("{} row {} has {} fields, expected {p}", path.display(), i + 1, record.len())));
        }
        for cell in record.iter() {
            let t = cell.trim();
            let v = if t.is_empty() || t.eq_ignore_ascii_case("na") {
                f64::NAN
            } else {
                t.parse::<f64>()
                    .map_err(|_| Error::Schema(format!("{} row {}: '{t}' is not numeric", path.display(), i + 1)))?
            };
            observed.push(v.is_finite());
            values.push(v);
        }
    }
    if values.is_empty() {
        return Err(Error::EmptyData(format!("{} has no data rows", path.display())));
    }
    let n = values.len() / p;
    let data = DMatrix::from_row_slice(n, p, &values);
    let mask: Mask = DMatrix::from_row_slice(n, p, &observed);
    Ok((
        columns,
        MaskedDomain {
            id: id.into(),
            data,
            mask,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::pooled_covariance;
    use approx::assert_abs_diff_eq;

    fn parse(text: &str) -> Result<RawTable> {
        parse_csv(text.as_bytes(), "domain", None)
    }

    #[test]
    fn lone_row_domain_is_rejected_by_name() {
        let err = parse("domain,a,b\nx,1,2\nx,3,4\ny,5,6\n").unwrap_err();
        match err {
            Error::Schema(msg) => assert!(msg.contains("'y'"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_only_is_empty() {
        assert!(matches!(parse("domain,a,b\n"), Err(Error::EmptyData(_))));
        assert!(matches!(parse("domain,a,b\nx,NaN,1\n"), Err(Error::EmptyData(_))));
    }

    #[test]
    fn non_finite_rows_are_dropped_and_counted() {
        let t = parse("domain,a,b\nx,1,2\nx,NaN,4\nx,3,1\ny,5,6\ny,,1\ny,2,2\n").unwrap();
        assert_eq!(t.dropped_rows, 2);
        assert_eq!(t.domain_counts(), vec![2, 2]);
        assert_eq!(t.domain_ids, vec!["x", "y"]);
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(parse_csv("d,a,b\nx,1,2\n".as_bytes(), "domain", None), Err(Error::Schema(_))));
        assert!(matches!(parse("domain,a\nx,1\nx,2\n"), Err(Error::Schema(_))));
        assert!(matches!(parse("domain,a,b\nx,1,oops\nx,2,3\n"), Err(Error::Schema(_))));
        let cols = vec!["a".to_string(), "zz".to_string()];
        assert!(matches!(
            parse_csv("domain,a,b\nx,1,2\n".as_bytes(), "domain", Some(&cols)),
            Err(Error::Schema(_))
        ));
        assert!(matches!(load_csv("/nonexistent/file.csv", "domain", None), Err(Error::Schema(_))));
    }

    #[test]
    fn feature_selection_ignores_other_columns() {
        let cols = vec!["c".to_string(), "a".to_string()];
        let t = parse_csv("a,domain,b,c\n1,x,zzz,3\n2,x,yyy,5\n".as_bytes(), "domain", Some(&cols)).unwrap();
        assert_eq!(t.columns, cols);
        assert_eq!(t.rows, DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 5.0, 2.0]));
    }

    fn two_domain_table(shift: f64) -> RawTable {
        let mut text = String::from("domain,a,b,c\n");
        let rows = [[1.0, 2.0, 0.5], [2.0, -1.0, 1.5], [0.0, 0.5, 2.5], [3.0, 1.0, -1.0]];
        for r in rows {
            text += &format!("x,{},{},{}\n", r[0], r[1], r[2]);
        }
        for r in rows.iter().take(3) {
            text += &format!("y,{},{},{}\n", r[0] * 2.0 + shift, r[2] - shift, r[1]);
        }
        parse(&text).unwrap()
    }

    #[test]
    fn preprocessing_invariants() {
        let pre = preprocess(&two_domain_table(0.0)).unwrap();
        for b in &pre.blocks {
            for j in 0..3 {
                assert!(b.column(j).sum().abs() < 1e-10);
            }
        }
        let n: usize = pre.counts().iter().sum();
        for j in 0..3 {
            let ss: f64 = pre.blocks.iter().map(|b| b.column(j).norm_squared()).sum();
            assert_abs_diff_eq!((ss / n as f64).sqrt(), 1.0, epsilon = 1e-10);
        }
        let stacked = DMatrix::from_rows(
            &pre.blocks.iter().flat_map(|b| b.row_iter().map(|r| r.into_owned()).collect::<Vec<_>>()).collect::<Vec<_>>(),
        );
        let direct = stacked.tr_mul(&stacked) / n as f64;
        let pooled = pooled_covariance(&pre.domains).unwrap();
        assert!((direct - pooled.matrix()).amax() < 1e-10);
        assert_abs_diff_eq!(pre.domains.get(0).weight, 4.0 / 7.0, epsilon = 1e-15);

        let equal = preprocess_with(&two_domain_table(0.0), Weighting::Equal).unwrap();
        assert_eq!(equal.domains.get(1).weight, 0.5);
    }

    #[test]
    fn domain_shifts_do_not_change_the_covariances() {
        let a = preprocess(&two_domain_table(0.0)).unwrap();
        let b = preprocess(&two_domain_table(10.0)).unwrap();
        for (x, y) in a.domains.covariances().zip(b.domains.covariances()) {
            assert!((x.matrix() - y.matrix()).amax() < 1e-10);
        }
    }

    #[test]
    fn preprocessing_is_idempotent() {
        let first = preprocess(&two_domain_table(1.0)).unwrap();
        let again = RawTable {
            rows: DMatrix::from_rows(
                &first.blocks.iter().flat_map(|b| b.row_iter().map(|r| r.into_owned()).collect::<Vec<_>>()).collect::<Vec<_>>(),
            ),
            ..two_domain_table(1.0)
        };
        let second = preprocess(&again).unwrap();
        for (x, y) in first.blocks.iter().zip(&second.blocks) {
            assert!((x - y).amax() < 1e-10);
        }
    }

    #[test]
    fn constant_column_is_named() {
        match preprocess(&parse("domain,a,b\nx,1,5\nx,2,5\ny,3,5\ny,1,5\n").unwrap()) {
            Err(Error::ConstantColumn(c)) => assert_eq!(c, "b"),
            other => panic!("unexpected {other:?}"),
        }
        // Constant within each domain but different across domains is also constant after centering.
        assert!(matches!(
            preprocess(&parse("domain,a,b\nx,1,5\nx,2,5\ny,3,7\ny,1,7\n").unwrap()),
            Err(Error::ConstantColumn(_))
        ));
    }

    #[test]
    fn covariance_round_trip() {
        let pre = preprocess(&two_domain_table(0.3)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        export_covariances(dir.path(), &pre.domains, &pre.columns).unwrap();
        let back = import_covariances(&[dir.path().to_path_buf()]).unwrap();
        assert_eq!(back.columns, pre.columns);
        for (x, y) in pre.domains.iter().zip(back.domains.iter()) {
            assert_eq!(x.id, y.id);
            assert_eq!(x.n, y.n);
            assert_eq!(x.weight, y.weight);
            assert!((x.covariance.matrix() - y.covariance.matrix()).amax() <= 1e-15);
        }
        let via_json = import_covariances(&[dir.path().join(MANIFEST_FILE)]).unwrap();
        assert_eq!(via_json.domains.len(), 2);
    }

    #[test]
    fn plain_covariance_files_get_equal_weights() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("first.csv");
        let b = dir.path().join("second.csv");
        std::fs::write(&a, "0.9,0,0\n0,0.1,0\n0,0,0\n").unwrap();
        std::fs::write(&b, "0,0,0\n0,0.4,0\n0,0,0.6\n").unwrap();
        let imp = import_covariances(&[a, b]).unwrap();
        assert_eq!(imp.domains.get(0).id, "first");
        assert_eq!(imp.domains.get(1).weight, 0.5);
        assert_eq!(imp.columns, vec!["x1", "x2", "x3"]);
        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "1,2\n3\n").unwrap();
        assert!(matches!(import_covariances(&[bad]), Err(Error::Schema(_))));
    }

    #[test]
    fn explained_table_examples() {
        let d = DomainCollection::from_covariances(vec![
            CovarianceMatrix::from_diagonal(&[0.9, 0.1, 0.0]).unwrap(),
            CovarianceMatrix::from_diagonal(&[0.0, 0.4, 0.6]).unwrap(),
        ])
        .unwrap();
        let v = Frame::from_direction(&[2f64.sqrt(), 0.0, 3f64.sqrt()]).unwrap();
        let t = explained_variance_table(&v, &d).unwrap();
        assert_abs_diff_eq!(t.rows[0][0], 0.36, epsilon = 1e-12);
        assert_abs_diff_eq!(t.rows[0][1], 0.36, epsilon = 1e-12);

        let single = DomainCollection::from_covariances(vec![CovarianceMatrix::from_diagonal(&[4.0, 3.0, 2.0, 1.0]).unwrap()]).unwrap();
        let pca = Frame::<f64>::identity_block(4, 4).unwrap();
        let t = explained_variance_table(&pca, &single).unwrap();
        let expected = [0.4, 0.7, 0.9, 1.0];
        for (row, want) in t.rows.iter().zip(expected) {
            assert_abs_diff_eq!(row[0], want, epsilon = 1e-14);
        }
    }

    #[test]
    fn masked_csv_marks_missing_cells() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "a,b,c\n1,,3\nNA,2,NaN\n").unwrap();
        let (cols, d) = load_masked_csv(&path, "d").unwrap();
        assert_eq!(cols, vec!["a", "b", "c"]);
        assert_eq!(d.mask, DMatrix::from_row_slice(2, 3, &[true, false, true, false, true, false]));
        assert_eq!(d.data[(0, 2)], 3.0);
    }

    #[test]
    fn matrix_csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = DMatrix::from_row_slice(2, 2, &[0.1, 1.0 / 3.0, -2.5e-17, std::f64::consts::PI]);
        write_matrix_csv(&path, &m).unwrap();
        assert_eq!(read_matrix_csv(&path).unwrap(), m);
    }
}
