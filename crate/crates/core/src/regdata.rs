//! Count-response datasets and their design matrices.
//!
//! Numeric covariates pass through unchanged; a categorical covariate with
//! `L` observed levels becomes `L - 1` indicator columns measured against a
//! reference level. An intercept column of ones leads the design matrix.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const INTERCEPT_NAME: &str = "(Intercept)";

/// Relative singular-value cutoff used by [`validate_full_rank`].
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

/// How one input column enters the design.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_level: Option<String>,
}

impl ColumnSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Numeric,
            reference_level: None,
        }
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Categorical,
            reference_level: None,
        }
    }

    pub fn with_reference(mut self, level: impl Into<String>) -> Self {
        self.reference_level = Some(level.into());
        self
    }
}

/// Parses `name:kind[:reference]`, e.g. `bap:categorical:2.2` or `pho:numeric`.
impl FromStr for ColumnSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.splitn(3, ':');
        let name = parts.next().filter(|n| !n.is_empty());
        let kind = parts.next();
        let reference = parts.next();
        let bad = || Error::Domain(format!("covariate spec `{s}` is not name:kind[:ref]"));
        let name = name.ok_or_else(bad)?;
        let spec = match kind {
            Some("numeric") | Some("num") => {
                if reference.is_some() {
                    return Err(Error::Domain(format!(
                        "numeric covariate `{name}` cannot take a reference level"
                    )));
                }
                ColumnSpec::numeric(name)
            }
            Some("categorical") | Some("cat") => {
                let spec = ColumnSpec::categorical(name);
                match reference {
                    Some(r) => spec.with_reference(r),
                    None => spec,
                }
            }
            _ => return Err(bad()),
        };
        Ok(spec)
    }
}

impl fmt::Display for ColumnSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ColumnKind::Numeric => "numeric",
            ColumnKind::Categorical => "categorical",
        };
        write!(f, "{}:{kind}", self.name)?;
        if let Some(r) = &self.reference_level {
            write!(f, ":{r}")?;
        }
        Ok(())
    }
}

/// A resolved column encoding: the levels of a factor are fixed once data
/// has been seen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnEncoding {
    Numeric {
        name: String,
    },
    Categorical {
        name: String,
        /// Levels in order of first appearance.
        levels: Vec<String>,
        reference: String,
    },
}

impl ColumnEncoding {
    pub fn name(&self) -> &str {
        match self {
            ColumnEncoding::Numeric { name } | ColumnEncoding::Categorical { name, .. } => name,
        }
    }

    fn design_names(&self) -> Vec<String> {
        match self {
            ColumnEncoding::Numeric { name } => vec![name.clone()],
            ColumnEncoding::Categorical {
                name,
                levels,
                reference,
            } => levels
                .iter()
                .filter(|l| *l != reference)
                .map(|l| format!("{name}:{l}"))
                .collect(),
        }
    }

    fn encode_into(&self, raw: &str, line: usize, out: &mut Vec<f64>) -> Result<()> {
        match self {
            ColumnEncoding::Numeric { name } => {
                let v: f64 = raw.trim().parse().map_err(|_| Error::InvalidValue {
                    column: name.clone(),
                    value: raw.to_string(),
                    line,
                })?;
                if !v.is_finite() {
                    return Err(Error::InvalidValue {
                        column: name.clone(),
                        value: raw.to_string(),
                        line,
                    });
                }
                out.push(v);
            }
            ColumnEncoding::Categorical {
                name,
                levels,
                reference,
            } => {
                let raw = raw.trim();
                if !levels.iter().any(|l| l == raw) {
                    return Err(Error::Levels {
                        column: name.clone(),
                        reason: format!("level `{raw}` was not seen when the design was built"),
                    });
                }
                out.extend(
                    levels
                        .iter()
                        .filter(|l| *l != reference)
                        .map(|l| if l == raw { 1.0 } else { 0.0 }),
                );
            }
        }
        Ok(())
    }
}

/// Everything needed to turn raw covariate values into a design row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignSchema {
    pub intercept: bool,
    pub columns: Vec<ColumnEncoding>,
}

impl DesignSchema {
    pub fn design_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        if self.intercept {
            names.push(INTERCEPT_NAME.to_string());
        }
        for c in &self.columns {
            names.extend(c.design_names());
        }
        names
    }

    /// Encodes one profile given raw values keyed by column name.
    pub fn encode(&self, values: &BTreeMap<String, String>) -> Result<Vec<f64>> {
        let mut row = Vec::new();
        if self.intercept {
            row.push(1.0);
        }
        for c in &self.columns {
            let raw = values
                .get(c.name())
                .ok_or_else(|| Error::MissingColumn(c.name().to_string()))?;
            c.encode_into(raw, 0, &mut row)?;
        }
        Ok(row)
    }
}

/// Responses plus a row-major design matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    response_name: String,
    y: Vec<u32>,
    x: Vec<f64>,
    column_names: Vec<String>,
    n_trials: u32,
    intercept: bool,
    schema: Option<DesignSchema>,
    dropped_rows: usize,
}

/// Compact description of a dataset, emitted alongside results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n: usize,
    pub k: usize,
    #[serde(rename = "N")]
    pub n_trials: u32,
    pub columns: Vec<String>,
    pub dropped_rows: usize,
}

fn missing(field: &str) -> bool {
    let t = field.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan")
}

fn parse_count(raw: &str, line: usize) -> Result<u32> {
    let bad = |reason: &str| Error::InvalidResponse {
        value: raw.to_string(),
        line,
        reason: reason.to_string(),
    };
    let t = raw.trim();
    if let Ok(v) = t.parse::<u32>() {
        return Ok(v);
    }
    let v: f64 = t.parse().map_err(|_| bad("not a number"))?;
    if v < 0.0 {
        return Err(bad("negative count"));
    }
    if v.fract() != 0.0 || v > u32::MAX as f64 {
        return Err(bad("not an integer count"));
    }
    Ok(v as u32)
}

impl Dataset {
    /// Builds a dataset from responses and already-encoded design rows.
    ///
    /// With `intercept`, a leading column of ones is prepended and named
    /// [`INTERCEPT_NAME`]. `n_trials` defaults to `max(y)` (at least 1) and
    /// must not be below it.
    pub fn from_rows(
        y: Vec<u32>,
        rows: &[Vec<f64>],
        column_names: Vec<String>,
        intercept: bool,
        n_trials: Option<u32>,
    ) -> Result<Self> {
        if rows.len() != y.len() {
            return Err(Error::Domain(format!(
                "{} responses but {} design rows",
                y.len(),
                rows.len()
            )));
        }
        let width = column_names.len();
        let mut x = Vec::with_capacity(rows.len() * (width + intercept as usize));
        for row in rows {
            if row.len() != width {
                return Err(Error::Domain(format!(
                    "design row has {} entries, expected {width}",
                    row.len()
                )));
            }
            if intercept {
                x.push(1.0);
            }
            x.extend_from_slice(row);
        }
        let mut names = Vec::with_capacity(width + 1);
        if intercept {
            names.push(INTERCEPT_NAME.to_string());
        }
        names.extend(column_names);
        Self::assemble("y".into(), y, x, names, intercept, n_trials, None, 0)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        response_name: String,
        y: Vec<u32>,
        x: Vec<f64>,
        column_names: Vec<String>,
        intercept: bool,
        n_trials: Option<u32>,
        schema: Option<DesignSchema>,
        dropped_rows: usize,
    ) -> Result<Self> {
        let max_y = y.iter().copied().max().unwrap_or(0);
        let n_trials = match n_trials {
            Some(n) if n < max_y => return Err(Error::ResponseExceedsTrials { y: max_y, n }),
            Some(0) => return Err(Error::Domain("N must be at least 1".into())),
            Some(n) => n,
            None => max_y.max(1),
        };
        let ds = Dataset {
            response_name,
            y,
            x,
            column_names,
            n_trials,
            intercept,
            schema,
            dropped_rows,
        };
        if !ds.is_empty() {
            validate_full_rank(&ds.design_matrix(), &ds.column_names)?;
        }
        Ok(ds)
    }

    pub fn response_name(&self) -> &str {
        &self.response_name
    }

    pub fn y(&self) -> &[u32] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Number of design columns, intercept included.
    pub fn ncols(&self) -> usize {
        self.column_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.ncols();
        &self.x[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.len()).map(move |i| self.row(i))
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn n_trials(&self) -> u32 {
        self.n_trials
    }

    pub fn has_intercept(&self) -> bool {
        self.intercept
    }

    pub fn schema(&self) -> Option<&DesignSchema> {
        self.schema.as_ref()
    }

    pub fn dropped_rows(&self) -> usize {
        self.dropped_rows
    }

    pub fn design_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.len(), self.ncols(), &self.x)
    }

    /// Same design and schema, with `N` replaced.
    pub fn with_trials(mut self, n_trials: u32) -> Result<Self> {
        let max_y = self.y.iter().copied().max().unwrap_or(0);
        if n_trials < max_y || n_trials == 0 {
            return Err(Error::ResponseExceedsTrials { y: max_y, n: n_trials });
        }
        self.n_trials = n_trials;
        Ok(self)
    }

    /// Rows at `indices`, keeping `N` and the schema. The rank check is not
    /// repeated, so small pieces of a dataset are allowed.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut out = Dataset {
            y: Vec::with_capacity(indices.len()),
            x: Vec::with_capacity(indices.len() * self.ncols()),
            ..self.clone()
        };
        for &i in indices {
            out.y.push(self.y[i]);
            out.x.extend_from_slice(self.row(i));
        }
        out
    }

    pub fn summary(&self) -> DatasetSummary {
        DatasetSummary {
            n: self.len(),
            k: self.ncols() - self.intercept as usize,
            n_trials: self.n_trials,
            columns: self.column_names.clone(),
            dropped_rows: self.dropped_rows,
        }
    }

    /// SHA-256 over a canonical rendering of the parsed data, so formatting
    /// differences in the source file do not change it.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("N={};cols={};", self.n_trials, self.column_names.join("\u{1f}")));
        for (i, y) in self.y.iter().enumerate() {
            h.update(format!("{y}"));
            for v in self.row(i) {
                h.update(format!(",{:?}", v));
            }
            h.update(";");
        }
        hex::encode(h.finalize())
    }

    /// Writes the response and every non-intercept design column; values use
    /// the shortest representation that parses back to the same `f64`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let skip = self.intercept as usize;
        let mut header = vec![self.response_name.clone()];
        header.extend(self.column_names[skip..].iter().cloned());
        w.write_record(&header)?;
        for (i, y) in self.y.iter().enumerate() {
            let mut rec = vec![y.to_string()];
            rec.extend(self.row(i)[skip..].iter().map(|v| format!("{v:?}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads a CSV file with a header row and builds the design.
///
/// Rows with a missing field (empty, `NA` or `NaN`) in any used column are
/// dropped and counted. `n_trials` overrides the default `N = max(y)`.
pub fn load_csv(
    path: impl AsRef<Path>,
    response: &str,
    specs: &[ColumnSpec],
    n_trials: Option<u32>,
) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_csv(file, response, specs, n_trials)
}

pub fn read_csv<R: Read>(
    reader: R,
    response: &str,
    specs: &[ColumnSpec],
    n_trials: Option<u32>,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let position = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let y_at = position(response)?;
    let at: Vec<usize> = specs.iter().map(|s| position(&s.name)).collect::<Result<_>>()?;

    let mut y = Vec::new();
    let mut raw_rows: Vec<(usize, Vec<String>)> = Vec::new();
    let mut dropped = 0usize;
    for (idx, record) in rdr.records().enumerate() {
        let record = record?;
        let line = idx + 2;
        let y_raw = record.get(y_at).unwrap_or("");
        let fields: Vec<&str> = at.iter().map(|&j| record.get(j).unwrap_or("")).collect();
        if missing(y_raw) || fields.iter().any(|f| missing(f)) {
            dropped += 1;
            continue;
        }
        y.push(parse_count(y_raw, line)?);
        raw_rows.push((line, fields.into_iter().map(str::to_string).collect()));
    }
    if dropped > 0 {
        log::info!("dropped {dropped} rows with missing values");
    }

    let mut encodings = Vec::with_capacity(specs.len());
    for (j, spec) in specs.iter().enumerate() {
        encodings.push(match spec.kind {
            ColumnKind::Numeric => ColumnEncoding::Numeric {
                name: spec.name.clone(),
            },
            ColumnKind::Categorical => {
                let mut levels: Vec<String> = Vec::new();
                for (_, fields) in &raw_rows {
                    if !levels.contains(&fields[j]) {
                        levels.push(fields[j].clone());
                    }
                }
                if levels.len() < 2 {
                    return Err(Error::Levels {
                        column: spec.name.clone(),
                        reason: format!("needs at least 2 observed levels, found {}", levels.len()),
                    });
                }
                let reference = match &spec.reference_level {
                    Some(r) if levels.contains(r) => r.clone(),
                    Some(r) => {
                        return Err(Error::Levels {
                            column: spec.name.clone(),
                            reason: format!("reference level `{r}` never occurs in the data"),
                        })
                    }
                    None => levels[0].clone(),
                };
                ColumnEncoding::Categorical {
                    name: spec.name.clone(),
                    levels,
                    reference,
                }
            }
        });
    }
    let schema = DesignSchema {
        intercept: true,
        columns: encodings,
    };

    let names = schema.design_names();
    let mut x = Vec::with_capacity(raw_rows.len() * names.len());
    for (line, fields) in &raw_rows {
        x.push(1.0);
        for (enc, raw) in schema.columns.iter().zip(fields) {
            enc.encode_into(raw, *line, &mut x)?;
        }
    }
    Dataset::assemble(
        response.to_string(),
        y,
        x,
        names,
        true,
        n_trials,
        Some(schema),
        dropped,
    )
}

/// Checks that the design has full column rank.
///
/// A column is dependent when the singular value is below
/// [`RANK_TOLERANCE`] times the largest one; the columns carrying weight in
/// the corresponding null vector are named in the error.
pub fn validate_full_rank(x: &DMatrix<f64>, names: &[String]) -> Result<()> {
    let cols = x.ncols();
    if cols == 0 {
        return Ok(());
    }
    // Pad short designs with zero rows so the SVD exposes every right
    // singular vector.
    let padded;
    let x = if x.nrows() < cols {
        padded = x.clone().resize_vertically(cols, 0.0);
        &padded
    } else {
        x
    };
    let svd = x.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let s_max = svd.singular_values.max();
    let cutoff = RANK_TOLERANCE * s_max;
    let small: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| !(svd.singular_values[i] > cutoff))
        .collect();
    if small.is_empty() {
        return Ok(());
    }
    let mut involved = vec![false; cols];
    for &i in &small {
        let v = v_t.row(i);
        let scale = v.amax();
        for j in 0..cols {
            if v[j].abs() > 1e-8 * scale {
                involved[j] = true;
            }
        }
    }
    Err(Error::RankDeficient {
        rank: cols - small.len(),
        columns: cols,
        involved: involved
            .iter()
            .zip(names)
            .filter(|(b, _)| **b)
            .map(|(_, n)| n.clone())
            .collect(),
    })
}
