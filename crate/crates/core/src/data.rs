//! Dataset containers, CSV ingestion and run configuration.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, UqError};

/// Which data model a paired dataset belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    /// Measured pairs (Xᵢ, Yᵢ).
    Experimental,
    /// Computer-model evaluations (Xᵢ, m(Xᵢ)).
    Simulated,
}

/// A row-major block of input points, `len()` rows of `dim()` columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSample {
    dim: usize,
    data: Vec<f64>,
}

impl InputSample {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(UqError::InvalidData("input dimension must be at least 1".into()));
        }
        if data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(UqError::InvalidData(format!(
                "{} values do not form rows of width {dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(UqError::InvalidData(format!(
                "non-finite value at row {}, column {}",
                pos / dim + 1,
                pos % dim + 1
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
            return Err(UqError::DimensionMismatch {
                expected: dim,
                got: rows[bad].len(),
            });
        }
        Self::new(dim, rows.concat())
    }

    /// One-dimensional sample.
    pub fn from_column(values: Vec<f64>) -> Result<Self> {
        Self::new(1, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Rows selected by index, in the given order (duplicates allowed).
    pub fn select(&self, indices: &[usize]) -> InputSample {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        InputSample { dim: self.dim, data }
    }
}

/// Input/output pairs, either measured or simulated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedDataset {
    pub inputs: InputSample,
    pub outputs: Vec<f64>,
    pub kind: DatasetKind,
}

impl PairedDataset {
    pub fn new(inputs: InputSample, outputs: Vec<f64>, kind: DatasetKind) -> Result<Self> {
        if inputs.len() != outputs.len() {
            return Err(UqError::DimensionMismatch {
                expected: inputs.len(),
                got: outputs.len(),
            });
        }
        if let Some(i) = outputs.iter().position(|v| !v.is_finite()) {
            return Err(UqError::InvalidData(format!("non-finite output at row {}", i + 1)));
        }
        Ok(Self {
            inputs,
            outputs,
            kind,
        })
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.dim()
    }

    /// Sub-dataset of the given rows (duplicates allowed).
    pub fn select(&self, indices: &[usize]) -> PairedDataset {
        PairedDataset {
            inputs: self.inputs.select(indices),
            outputs: indices.iter().map(|&i| self.outputs[i]).collect(),
            kind: self.kind,
        }
    }
}

/// Which CSV columns hold the inputs (in order) and the output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub inputs: Vec<String>,
    pub output: String,
}

impl ColumnSpec {
    pub fn new<S: Into<String>>(inputs: impl IntoIterator<Item = S>, output: impl Into<String>) -> Self {
        Self {
            inputs: inputs.into_iter().map(Into::into).collect(),
            output: output.into(),
        }
    }

    /// All columns but the last are inputs; the last is the output.
    pub fn last_is_output(header: &[String]) -> Option<Self> {
        let (output, inputs) = header.split_last()?;
        if inputs.is_empty() {
            return None;
        }
        Some(Self::new(inputs.iter().cloned(), output.clone()))
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn read_table(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path).map_err(|source| UqError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let format_err = |message: String| UqError::Format {
        path: path.to_path_buf(),
        message,
    };
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| format_err(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(format_err("empty file: missing header row".into()));
    }
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row_no = idx + 1;
        let record = record.map_err(|e| format_err(format!("row {row_no}: {e}")))?;
        if record.len() != header.len() {
            return Err(UqError::Parse {
                path: path.to_path_buf(),
                row: row_no,
                column: format!("{} fields", record.len()),
                message: format!("expected {} fields", header.len()),
            });
        }
        let mut values = Vec::with_capacity(record.len());
        for (col, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| UqError::Parse {
                path: path.to_path_buf(),
                row: row_no,
                column: header[col].clone(),
                message: format!("non-numeric value {cell:?}"),
            })?;
            if !value.is_finite() {
                return Err(UqError::Parse {
                    path: path.to_path_buf(),
                    row: row_no,
                    column: header[col].clone(),
                    message: format!("non-finite value {cell:?}"),
                });
            }
            values.push(value);
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(format_err("empty file: no data rows".into()));
    }
    Ok(Table { header, rows })
}

/// Read the header of a CSV file.
pub fn read_header(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|source| UqError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let first = text.lines().next().unwrap_or("");
    if first.trim().is_empty() {
        return Err(UqError::Format {
            path: path.to_path_buf(),
            message: "empty file: missing header row".into(),
        });
    }
    Ok(first.split(',').map(|s| s.trim().to_string()).collect())
}

/// Parse a CSV file with a header row into a validated paired dataset.
pub fn parse_dataset(path: &Path, schema: &ColumnSpec, kind: DatasetKind) -> Result<PairedDataset> {
    let table = read_table(path)?;
    let locate = |name: &str| {
        table
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| UqError::Format {
                path: path.to_path_buf(),
                message: format!("column {name:?} not found in header"),
            })
    };
    if schema.inputs.is_empty() {
        return Err(UqError::Format {
            path: path.to_path_buf(),
            message: "schema names no input columns".into(),
        });
    }
    let input_cols = schema
        .inputs
        .iter()
        .map(|c| locate(c))
        .collect::<Result<Vec<_>>>()?;
    let output_col = locate(&schema.output)?;
    let mut inputs = Vec::with_capacity(table.rows.len() * input_cols.len());
    let mut outputs = Vec::with_capacity(table.rows.len());
    for row in &table.rows {
        inputs.extend(input_cols.iter().map(|&c| row[c]));
        outputs.push(row[output_col]);
    }
    PairedDataset::new(InputSample::new(input_cols.len(), inputs)?, outputs, kind)
}

/// Read every column of a headed CSV file as an input sample.
pub fn read_input_sample(path: &Path) -> Result<InputSample> {
    let table = read_table(path)?;
    let dim = table.header.len();
    InputSample::new(dim, table.rows.concat())
}

/// Read the named columns, in the given order, as an input sample.
pub fn read_columns(path: &Path, names: &[String]) -> Result<InputSample> {
    if names.is_empty() {
        return Err(UqError::Format {
            path: path.to_path_buf(),
            message: "no columns selected".into(),
        });
    }
    let table = read_table(path)?;
    let cols = names
        .iter()
        .map(|name| {
            table.header.iter().position(|h| h == name).ok_or_else(|| UqError::Format {
                path: path.to_path_buf(),
                message: format!("column {name:?} not found in header"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let data = table.rows.iter().flat_map(|r| cols.iter().map(|&c| r[c])).collect();
    InputSample::new(cols.len(), data)
}

fn write_text(path: &Path, text: String) -> Result<()> {
    fs::write(path, text).map_err(|source| UqError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Render rows as CSV. `{}` formatting of f64 is the shortest string that
/// reparses to the same bits.
pub fn csv_string(header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_dataset(path: &Path, data: &PairedDataset, schema: &ColumnSpec) -> Result<()> {
    if schema.inputs.len() != data.dim() {
        return Err(UqError::DimensionMismatch {
            expected: data.dim(),
            got: schema.inputs.len(),
        });
    }
    let mut header = schema.inputs.clone();
    header.push(schema.output.clone());
    let rows = data.inputs.rows().zip(&data.outputs).map(|(x, &y)| {
        let mut r = x.to_vec();
        r.push(y);
        r
    });
    write_text(path, csv_string(&header, rows))
}

pub fn write_input_sample(path: &Path, sample: &InputSample, header: Option<&[String]>) -> Result<()> {
    let header: Vec<String> = match header {
        Some(h) => h.to_vec(),
        None => (1..=sample.dim()).map(|j| format!("x{j}")).collect(),
    };
    write_text(path, csv_string(&header, sample.rows().map(<[f64]>::to_vec)))
}

/// Default column names `x1..xd, y`.
pub fn default_schema(dim: usize) -> ColumnSpec {
    ColumnSpec::new((1..=dim).map(|j| format!("x{j}")), "y")
}

/// Seed and sample sizes for a run, plus opaque per-method settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Lₙ: computer-model evaluations used to fit the surrogate.
    #[serde(default = "default_l")]
    pub l_n: usize,
    /// N₁,ₙ: additional inputs for the weighted residual fit.
    #[serde(default = "default_n1")]
    pub n1: usize,
    /// N₂,ₙ: additional inputs for density and quantile estimation.
    #[serde(default = "default_n2")]
    pub n2: usize,
    /// Method-specific blocks, keyed by method name.
    #[serde(flatten)]
    pub methods: BTreeMap<String, serde_json::Value>,
}

fn default_l() -> usize {
    500
}
fn default_n1() -> usize {
    1000
}
fn default_n2() -> usize {
    100_000
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            l_n: default_l(),
            n1: default_n1(),
            n2: default_n2(),
            methods: BTreeMap::new(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| UqError::Config(vec![e.to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| UqError::Io {
            path: PathBuf::from(path),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Check every field and report all offending ones together.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for (name, value) in [("l_n", self.l_n), ("n1", self.n1), ("n2", self.n2)] {
            if value == 0 {
                problems.push(format!("{name} must be at least 1"));
            }
        }
        for (name, block) in &self.methods {
            if !block.is_object() {
                problems.push(format!("method block {name:?} must be a JSON object"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(UqError::Config(problems))
        }
    }

    pub fn method(&self, name: &str) -> Option<&serde_json::Value> {
        self.methods.get(name)
    }
}
