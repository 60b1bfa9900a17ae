//! Datasets, column typing, standardization and CSV ingestion.
//!
//! Covariates are held column-major so samplers can sweep one covariate at a
//! time without strided access. The outcome is never transformed here.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Internal,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

impl Column {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        Column {
            name: name.into(),
            kind,
        }
    }
}

/// A complete-case regression dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    role: Role,
    outcome: String,
    columns: Vec<Column>,
    /// n × K, column-major.
    x: Vec<f64>,
    y: Vec<f64>,
    standardization: Option<StandardizationMap>,
}

impl Dataset {
    /// Builds a dataset from column-major covariates.
    pub fn new(
        name: impl Into<String>,
        role: Role,
        outcome: impl Into<String>,
        columns: Vec<Column>,
        x_col_major: Vec<f64>,
        y: Vec<f64>,
    ) -> Result<Self> {
        let n = y.len();
        let k = columns.len();
        if k == 0 {
            return Err(Error::InvalidInput("dataset needs at least one covariate".into()));
        }
        if n < 2 {
            return Err(Error::TooFewRows(n));
        }
        if x_col_major.len() != n * k {
            return Err(Error::InvalidInput(format!(
                "covariate buffer has {} values, expected {n}×{k}",
                x_col_major.len()
            )));
        }
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate column `{}`", c.name)));
            }
        }
        if x_col_major.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("dataset contains non-finite values".into()));
        }
        for (j, c) in columns.iter().enumerate() {
            if c.kind == ColumnKind::Binary
                && x_col_major[j * n..(j + 1) * n].iter().any(|&v| v != 0.0 && v != 1.0)
            {
                return Err(Error::InvalidInput(format!(
                    "binary column `{}` holds values other than 0/1",
                    c.name
                )));
            }
        }
        Ok(Dataset {
            name: name.into(),
            role,
            outcome: outcome.into(),
            columns,
            x: x_col_major,
            y,
            standardization: None,
        })
    }

    /// Builds a dataset from row-major covariate rows.
    pub fn from_rows(
        name: impl Into<String>,
        role: Role,
        outcome: impl Into<String>,
        columns: Vec<Column>,
        rows: &[Vec<f64>],
        y: Vec<f64>,
    ) -> Result<Self> {
        let k = columns.len();
        if rows.len() != y.len() || rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidInput("ragged covariate rows".into()));
        }
        let n = rows.len();
        let mut x = vec![0.0; n * k];
        for (i, r) in rows.iter().enumerate() {
            for (j, v) in r.iter().enumerate() {
                x[j * n + i] = *v;
            }
        }
        Dataset::new(name, role, outcome, columns, x, y)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn outcome_name(&self) -> &str {
        &self.outcome
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn k(&self) -> usize {
        self.columns.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.n();
        &self.x[j * n..(j + 1) * n]
    }

    pub fn x_col_major(&self) -> &[f64] {
        &self.x
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.x[col * self.n() + row]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// The map this dataset was standardized with, if any.
    pub fn standardization(&self) -> Option<&StandardizationMap> {
        self.standardization.as_ref()
    }

    /// Same covariates, new outcome vector.
    pub fn with_outcome(&self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.n() {
            return Err(Error::InvalidInput(format!(
                "outcome length {} does not match {} rows",
                y.len(),
                self.n()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("outcome contains non-finite values".into()));
        }
        let mut out = self.clone();
        out.y = y;
        Ok(out)
    }

    pub fn with_role(&self, role: Role) -> Self {
        let mut out = self.clone();
        out.role = role;
        out
    }

    /// Reorders (or subsets) covariates by name.
    pub fn select_columns(&self, names: &[String]) -> Result<Self> {
        let n = self.n();
        let mut cols = Vec::with_capacity(names.len());
        let mut x = Vec::with_capacity(n * names.len());
        for name in names {
            let j = self
                .column_index(name)
                .ok_or_else(|| Error::SchemaMismatch(format!("column `{name}` not present")))?;
            cols.push(self.columns[j].clone());
            x.extend_from_slice(self.column(j));
        }
        let mut out = Dataset::new(&self.name, self.role, &self.outcome, cols, x, self.y.clone())?;
        out.standardization = self.standardization.clone();
        Ok(out)
    }

    /// Row-stacks two datasets with identical schemas.
    pub fn stack(&self, other: &Dataset, name: impl Into<String>) -> Result<Self> {
        check_same_schema(&[self, other])?;
        let (n1, n2) = (self.n(), other.n());
        let mut x = Vec::with_capacity((n1 + n2) * self.k());
        for j in 0..self.k() {
            x.extend_from_slice(self.column(j));
            x.extend_from_slice(other.column(j));
        }
        let mut y = self.y.clone();
        y.extend_from_slice(&other.y);
        Dataset::new(name, self.role, &self.outcome, self.columns.clone(), x, y)
    }

    /// Writes header + rows (outcome first). Floats use shortest round-trip
    /// formatting, so re-ingestion is lossless.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![self.outcome.clone()];
        header.extend(self.column_names());
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec = vec![self.y[i].to_string()];
            rec.extend((0..self.k()).map(|j| self.value(i, j).to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// Outcome of CSV ingestion besides the dataset itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestReport {
    pub dropped_rows: usize,
}

fn is_missing(cell: &str) -> bool {
    matches!(cell.trim(), "" | "NA" | "N/A" | "na" | "NaN" | "nan" | "null" | "NULL")
}

/// Reads a comma-delimited file with a header row.
///
/// Rows with any missing cell are dropped (complete-case analysis). Column
/// kinds are inferred (all values in {0, 1} means binary) unless overridden.
pub fn ingest_csv(
    path: impl AsRef<Path>,
    outcome_column: &str,
    role: Role,
    column_kinds: Option<&HashMap<String, ColumnKind>>,
) -> Result<(Dataset, IngestReport)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    ingest_reader(file, &name, outcome_column, role, column_kinds)
}

/// As [`ingest_csv`], from any reader.
pub fn ingest_reader<R: std::io::Read>(
    reader: R,
    name: &str,
    outcome_column: &str,
    role: Role,
    column_kinds: Option<&HashMap<String, ColumnKind>>,
) -> Result<(Dataset, IngestReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let outcome_idx = header
        .iter()
        .position(|h| h == outcome_column)
        .ok_or_else(|| Error::MissingOutcome(outcome_column.to_string()))?;
    let covariate_idx: Vec<usize> = (0..header.len()).filter(|&j| j != outcome_idx).collect();
    if covariate_idx.is_empty() {
        return Err(Error::InvalidInput("no covariate columns besides the outcome".into()));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut y = Vec::new();
    let mut dropped = 0;
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.iter().any(is_missing) {
            dropped += 1;
            continue;
        }
        let parse = |j: usize| -> Result<f64> {
            let cell = &rec[j];
            cell.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::NonNumeric {
                    column: header[j].clone(),
                    row: r + 1,
                    value: cell.to_string(),
                })
        };
        y.push(parse(outcome_idx)?);
        rows.push(covariate_idx.iter().map(|&j| parse(j)).collect::<Result<_>>()?);
    }
    if rows.len() < 2 {
        return Err(Error::TooFewRows(rows.len()));
    }

    let columns = covariate_idx
        .iter()
        .enumerate()
        .map(|(c, &j)| {
            let inferred = if rows.iter().all(|r| r[c] == 0.0 || r[c] == 1.0) {
                ColumnKind::Binary
            } else {
                ColumnKind::Continuous
            };
            let kind = column_kinds
                .and_then(|m| m.get(&header[j]).copied())
                .unwrap_or(inferred);
            Column::new(header[j].clone(), kind)
        })
        .collect();
    let ds = Dataset::from_rows(name, role, outcome_column, columns, &rows, y)?;
    Ok((ds, IngestReport { dropped_rows: dropped }))
}

pub(crate) fn check_same_schema(datasets: &[&Dataset]) -> Result<()> {
    let Some(first) = datasets.first() else {
        return Err(Error::InvalidInput("no datasets given".into()));
    };
    for ds in &datasets[1..] {
        if ds.columns != first.columns {
            let a: BTreeMap<_, _> = first.columns.iter().map(|c| (&c.name, c.kind)).collect();
            let b: BTreeMap<_, _> = ds.columns.iter().map(|c| (&c.name, c.kind)).collect();
            let mut offending: Vec<String> = a
                .keys()
                .filter(|k| b.get(*k) != a.get(*k))
                .chain(b.keys().filter(|k| !a.contains_key(*k)))
                .map(|s| s.to_string())
                .collect();
            offending.sort();
            offending.dedup();
            let detail = if offending.is_empty() {
                "column order differs".to_string()
            } else {
                format!("offending columns: {}", offending.join(", "))
            };
            return Err(Error::SchemaMismatch(format!(
                "`{}` and `{}` differ; {detail}",
                first.name, ds.name
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StandardizationPolicy {
    #[default]
    Pooled,
    PerDataset,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleEntry {
    pub column: String,
    pub center: f64,
    pub scale: f64,
    pub policy: StandardizationPolicy,
    /// Set only under the per-dataset policy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
}

/// Center/scale per continuous column. Binary columns never appear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StandardizationMap {
    entries: Vec<ScaleEntry>,
}

impl StandardizationMap {
    pub fn entries(&self) -> &[ScaleEntry] {
        &self.entries
    }

    fn entry_for(&self, dataset: &str, column: &str) -> Option<&ScaleEntry> {
        self.entries
            .iter()
            .find(|e| e.column == column && e.dataset.as_deref().is_none_or(|d| d == dataset))
    }

    /// Per-column scale used to move coefficients between scales, 1 for
    /// binary or unmapped columns.
    pub fn scales_for(&self, ds: &Dataset) -> Vec<f64> {
        ds.columns()
            .iter()
            .map(|c| self.entry_for(ds.name(), &c.name).map_or(1.0, |e| e.scale))
            .collect()
    }

    /// Converts a coefficient from the standardized to the original scale.
    pub fn coefficient_to_original(&self, ds: &Dataset, beta_std: &[f64]) -> Vec<f64> {
        self.scales_for(ds)
            .iter()
            .zip(beta_std)
            .map(|(s, b)| b / s)
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let map: StandardizationMap = serde_json::from_str(s)?;
        if let Some(e) = map.entries.iter().find(|e| !(e.scale > 0.0) || !e.center.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "column `{}` has a non-positive scale",
                e.column
            )));
        }
        Ok(map)
    }
}

fn mean_sd(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let ss: f64 = values.map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Estimates center/scale per continuous column.
///
/// Pooled: moments over every row of every dataset (n − 1 denominator).
/// Per-dataset: one entry per (dataset, column). None: identity entries.
pub fn fit_standardization(
    datasets: &[&Dataset],
    policy: StandardizationPolicy,
) -> Result<StandardizationMap> {
    check_same_schema(datasets)?;
    let first = datasets[0];
    let mut entries = Vec::new();
    for (j, col) in first.columns().iter().enumerate() {
        if col.kind == ColumnKind::Binary {
            continue;
        }
        match policy {
            StandardizationPolicy::None => entries.push(ScaleEntry {
                column: col.name.clone(),
                center: 0.0,
                scale: 1.0,
                policy,
                dataset: None,
            }),
            StandardizationPolicy::Pooled => {
                let values = datasets.iter().flat_map(|d| d.column(j).iter().copied());
                let (center, scale) = mean_sd(values);
                if !(scale > 0.0) {
                    return Err(Error::ZeroVariance(col.name.clone()));
                }
                entries.push(ScaleEntry {
                    column: col.name.clone(),
                    center,
                    scale,
                    policy,
                    dataset: None,
                });
            }
            StandardizationPolicy::PerDataset => {
                for d in datasets {
                    let (center, scale) = mean_sd(d.column(j).iter().copied());
                    if !(scale > 0.0) {
                        return Err(Error::ZeroVariance(format!("{} in {}", col.name, d.name())));
                    }
                    entries.push(ScaleEntry {
                        column: col.name.clone(),
                        center,
                        scale,
                        policy,
                        dataset: Some(d.name().to_string()),
                    });
                }
            }
        }
    }
    Ok(StandardizationMap { entries })
}

/// Replaces each continuous column x by (x − center)/scale and records the map.
pub fn apply_standardization(ds: &Dataset, map: &StandardizationMap) -> Result<Dataset> {
    let n = ds.n();
    let mut x = ds.x.clone();
    let mut used = Vec::new();
    for (j, col) in ds.columns().iter().enumerate() {
        if col.kind == ColumnKind::Binary {
            continue;
        }
        let e = map.entry_for(ds.name(), &col.name).ok_or_else(|| {
            Error::SchemaMismatch(format!("standardization map lacks column `{}`", col.name))
        })?;
        for v in &mut x[j * n..(j + 1) * n] {
            *v = (*v - e.center) / e.scale;
        }
        used.push(e.clone());
    }
    let mut out = ds.clone();
    out.x = x;
    out.standardization = Some(StandardizationMap { entries: used });
    Ok(out)
}

/// Undoes [`apply_standardization`] using the recorded map.
pub fn invert_standardization(ds: &Dataset) -> Result<Dataset> {
    let Some(map) = ds.standardization() else {
        return Ok(ds.clone());
    };
    let n = ds.n();
    let mut x = ds.x.clone();
    for (j, col) in ds.columns().iter().enumerate() {
        if col.kind == ColumnKind::Binary {
            continue;
        }
        let e = map.entry_for(ds.name(), &col.name).ok_or_else(|| {
            Error::SchemaMismatch(format!("recorded map lacks column `{}`", col.name))
        })?;
        for v in &mut x[j * n..(j + 1) * n] {
            *v = *v * e.scale + e.center;
        }
    }
    let mut out = ds.clone();
    out.x = x;
    out.standardization = None;
    Ok(out)
}
