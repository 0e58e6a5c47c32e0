//! Survey ingestion, feature encoding, stratified cross-validation folds,
//! subgroup filtering, and synthetic data generation.
//!
//! The input format is a UTF-8 comma-separated table with a header row. A
//! [`Schema`] (JSON on disk) declares the feature columns and their kinds,
//! the count-valued target column, and optional expansion-weight and
//! projected-coordinate columns. Targets are daily trip counts and must be
//! integers in `[0, 25]`; rows outside that band are rejected with their
//! row numbers. Missing numeric cells are imputed with the column median
//! and flagged on the resulting [`Dataset`].

mod matrix;
mod synth;

pub use matrix::{FeatureGroup, FeatureMatrix, GroupKind};
pub use synth::{synth_generate, ClusterSpec, CountMechanism, FeatureDist, SynthColumn, SynthConfig};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

/// Upper bound on daily trip counts; rows above it are rejected at load.
pub const TARGET_MAX: u32 = 25;

/// Errors raised by dataset construction, ingestion, and partitioning.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid schema: {0}")]
    SchemaInvalid(String),
    #[error("column '{column}' declared in schema but missing from input")]
    MissingColumn { column: String },
    #[error("unparseable cell at data row {row}, column '{column}': '{value}'")]
    UnparseableCell { row: usize, column: String, value: String },
    #[error("target out of [0, {max}] at data row(s) {rows:?}")]
    TargetOutOfBounds { rows: Vec<usize>, max: u32 },
    #[error("non-positive weight at data row {row}")]
    NonPositiveWeight { row: usize },
    #[error("column '{column}' is entirely missing; cannot impute a median")]
    AllMissing { column: String },
    #[error("unknown column '{column}' in predicate")]
    UnknownColumn { column: String },
    #[error("category '{value}' in column '{column}' is not listed in the schema")]
    UnseenCategory { column: String, value: String },
    #[error("stratum '{stratum}' has {size} rows, fewer than k = {k}")]
    StratumTooSmall { stratum: String, size: usize, k: usize },
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// Kind of a feature column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Binary,
    Nominal { categories: Vec<String> },
    /// Ordered bands treated as a plain numeric feature.
    OrdinalAsNumeric,
}

impl ColumnKind {
    /// Width the column occupies after encoding.
    pub fn encoded_width(&self) -> usize {
        match self {
            ColumnKind::Nominal { categories } => categories.len(),
            _ => 1,
        }
    }
}

/// One declared feature column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

/// Declares the feature columns, the count target, and the optional weight
/// and coordinate columns of a survey table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<ColumnSpec>,
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<String>,
    /// (x, y) column names, both in projected meters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coordinates: Option<(String, String)>,
}

impl Schema {
    /// Checks name uniqueness and per-kind requirements.
    pub fn validate(&self) -> Result<(), DataError> {
        if self.columns.is_empty() {
            return Err(DataError::SchemaInvalid("no feature columns".into()));
        }
        let mut seen = HashSet::new();
        let mut all_names: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        all_names.push(&self.target);
        if let Some(w) = &self.weight {
            all_names.push(w);
        }
        if let Some((x, y)) = &self.coordinates {
            all_names.push(x);
            all_names.push(y);
        }
        for name in all_names {
            if !seen.insert(name) {
                return Err(DataError::SchemaInvalid(format!("duplicate column name '{name}'")));
            }
        }
        for col in &self.columns {
            if let ColumnKind::Nominal { categories } = &col.kind {
                if categories.len() < 2 {
                    return Err(DataError::SchemaInvalid(format!(
                        "nominal column '{}' must list at least 2 categories",
                        col.name
                    )));
                }
                let mut cats = HashSet::new();
                for c in categories {
                    if !cats.insert(c) {
                        return Err(DataError::SchemaInvalid(format!(
                            "nominal column '{}' lists duplicate category '{c}'",
                            col.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path)?;
        let schema: Schema = serde_json::from_str(&text)
            .map_err(|e| DataError::SchemaInvalid(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn to_json_file(&self, path: &Path) -> Result<(), DataError> {
        let text = serde_json::to_string_pretty(self).expect("schema serializes");
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.name == name)
    }
}

/// Storage for one feature column, parallel to the schema's declaration.
#[derive(Clone, Debug, PartialEq)]
pub enum ColumnData {
    /// Numeric or ordinal-as-numeric values, finite after imputation.
    Numeric(Vec<f64>),
    Binary(Vec<u8>),
    /// Raw category labels; membership in the schema list is enforced at
    /// encoding time.
    Nominal(Vec<String>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Binary(v) => v.len(),
            ColumnData::Nominal(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A validated survey table: typed feature columns, integer trip counts in
/// `[0, TARGET_MAX]`, and optional weights and home coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    schema: Schema,
    features: Vec<ColumnData>,
    target: Vec<u32>,
    weights: Option<Vec<f64>>,
    coords: Option<Vec<(f64, f64)>>,
    /// (data row, column name) cells median-imputed at load.
    imputed: Vec<(usize, String)>,
}

impl Dataset {
    /// Builds a dataset from already-parsed columns, enforcing the schema
    /// kinds, target bounds, and weight positivity.
    pub fn from_parts(
        schema: Schema,
        features: Vec<ColumnData>,
        target: Vec<u32>,
        weights: Option<Vec<f64>>,
        coords: Option<Vec<(f64, f64)>>,
    ) -> Result<Self, DataError> {
        schema.validate()?;
        if features.len() != schema.columns.len() {
            return Err(DataError::ShapeMismatch(format!(
                "{} feature columns supplied for {} declared",
                features.len(),
                schema.columns.len()
            )));
        }
        let n = target.len();
        for (spec, data) in schema.columns.iter().zip(&features) {
            if data.len() != n {
                return Err(DataError::ShapeMismatch(format!(
                    "column '{}' has {} rows, target has {n}",
                    spec.name,
                    data.len()
                )));
            }
            let kind_ok = matches!(
                (&spec.kind, data),
                (ColumnKind::Numeric, ColumnData::Numeric(_))
                    | (ColumnKind::OrdinalAsNumeric, ColumnData::Numeric(_))
                    | (ColumnKind::Binary, ColumnData::Binary(_))
                    | (ColumnKind::Nominal { .. }, ColumnData::Nominal(_))
            );
            if !kind_ok {
                return Err(DataError::ShapeMismatch(format!(
                    "column '{}' storage does not match its declared kind",
                    spec.name
                )));
            }
            if let ColumnData::Numeric(vals) = data {
                if let Some(i) = vals.iter().position(|v| !v.is_finite()) {
                    return Err(DataError::UnparseableCell {
                        row: i + 1,
                        column: spec.name.clone(),
                        value: "non-finite".into(),
                    });
                }
            }
        }
        let bad: Vec<usize> = target
            .iter()
            .enumerate()
            .filter(|(_, &t)| t > TARGET_MAX)
            .map(|(i, _)| i + 1)
            .collect();
        if !bad.is_empty() {
            return Err(DataError::TargetOutOfBounds { rows: bad, max: TARGET_MAX });
        }
        if let Some(w) = &weights {
            if w.len() != n {
                return Err(DataError::ShapeMismatch("weight length mismatch".into()));
            }
            if let Some(i) = w.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
                return Err(DataError::NonPositiveWeight { row: i + 1 });
            }
        }
        if let Some(c) = &coords {
            if c.len() != n {
                return Err(DataError::ShapeMismatch("coordinate length mismatch".into()));
            }
        }
        Ok(Dataset { schema, features, target, weights, coords, imputed: Vec::new() })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn target(&self) -> &[u32] {
        &self.target
    }

    pub fn target_f64(&self) -> Vec<f64> {
        self.target.iter().map(|&t| t as f64).collect()
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn coordinates(&self) -> Option<&[(f64, f64)]> {
        self.coords.as_deref()
    }

    /// Cells that were median-imputed at load, as (data row, column).
    pub fn imputed_cells(&self) -> &[(usize, String)] {
        &self.imputed
    }

    pub fn column(&self, name: &str) -> Option<&ColumnData> {
        let idx = self.schema.columns.iter().position(|c| c.name == name)?;
        Some(&self.features[idx])
    }

    /// Reads a comma-separated table with a header row and validates it
    /// against `schema`.
    ///
    /// Data rows are numbered from 1 (header excluded). All rows with a
    /// target outside `[0, TARGET_MAX]` are collected and reported
    /// together. Missing numeric cells (empty strings) are imputed with
    /// the column median and recorded in [`Dataset::imputed_cells`].
    pub fn load_survey(path: &Path, schema: &Schema) -> Result<Self, DataError> {
        schema.validate()?;
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        let headers: Vec<String> = reader.headers()?.iter().map(String::from).collect();
        let locate = |name: &str| -> Result<usize, DataError> {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| DataError::MissingColumn { column: name.to_string() })
        };

        let feature_idx: Vec<usize> = schema
            .columns
            .iter()
            .map(|c| locate(&c.name))
            .collect::<Result<_, _>>()?;
        let target_idx = locate(&schema.target)?;
        let weight_idx = schema.weight.as_deref().map(locate).transpose()?;
        let coord_idx = match &schema.coordinates {
            Some((x, y)) => Some((locate(x)?, locate(y)?)),
            None => None,
        };

        let mut features: Vec<ColumnData> = schema
            .columns
            .iter()
            .map(|c| match c.kind {
                ColumnKind::Numeric | ColumnKind::OrdinalAsNumeric => {
                    ColumnData::Numeric(Vec::new())
                }
                ColumnKind::Binary => ColumnData::Binary(Vec::new()),
                ColumnKind::Nominal { .. } => ColumnData::Nominal(Vec::new()),
            })
            .collect();
        let mut target: Vec<u32> = Vec::new();
        let mut bad_target_rows: Vec<usize> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        let mut coords: Vec<(f64, f64)> = Vec::new();
        let mut missing_numeric: Vec<(usize, usize)> = Vec::new(); // (row-1, column pos)

        for (row_i, record) in reader.records().enumerate() {
            let record = record?;
            let row_no = row_i + 1;
            let cell = |idx: usize| record.get(idx).unwrap_or("").trim();

            for (pos, (spec, &idx)) in schema.columns.iter().zip(&feature_idx).enumerate() {
                let raw = cell(idx);
                match (&spec.kind, &mut features[pos]) {
                    (ColumnKind::Numeric | ColumnKind::OrdinalAsNumeric, ColumnData::Numeric(v)) => {
                        if raw.is_empty() {
                            missing_numeric.push((row_i, pos));
                            v.push(f64::NAN);
                        } else {
                            let parsed: f64 = raw.parse().map_err(|_| DataError::UnparseableCell {
                                row: row_no,
                                column: spec.name.clone(),
                                value: raw.to_string(),
                            })?;
                            if !parsed.is_finite() {
                                return Err(DataError::UnparseableCell {
                                    row: row_no,
                                    column: spec.name.clone(),
                                    value: raw.to_string(),
                                });
                            }
                            v.push(parsed);
                        }
                    }
                    (ColumnKind::Binary, ColumnData::Binary(v)) => match raw {
                        "0" => v.push(0),
                        "1" => v.push(1),
                        _ => {
                            return Err(DataError::UnparseableCell {
                                row: row_no,
                                column: spec.name.clone(),
                                value: raw.to_string(),
                            })
                        }
                    },
                    (ColumnKind::Nominal { .. }, ColumnData::Nominal(v)) => {
                        if raw.is_empty() {
                            return Err(DataError::UnparseableCell {
                                row: row_no,
                                column: spec.name.clone(),
                                value: raw.to_string(),
                            });
                        }
                        v.push(raw.to_string());
                    }
                    _ => unreachable!("storage matches kind by construction"),
                }
            }

            let traw = cell(target_idx);
            let tval: f64 = traw.parse().map_err(|_| DataError::UnparseableCell {
                row: row_no,
                column: schema.target.clone(),
                value: traw.to_string(),
            })?;
            if !tval.is_finite() || tval.fract() != 0.0 || tval < 0.0 {
                return Err(DataError::UnparseableCell {
                    row: row_no,
                    column: schema.target.clone(),
                    value: traw.to_string(),
                });
            }
            if tval > TARGET_MAX as f64 {
                bad_target_rows.push(row_no);
                target.push(0); // placeholder, load fails below
            } else {
                target.push(tval as u32);
            }

            if let Some(widx) = weight_idx {
                let wraw = cell(widx);
                let w: f64 = wraw.parse().map_err(|_| DataError::UnparseableCell {
                    row: row_no,
                    column: schema.weight.clone().unwrap(),
                    value: wraw.to_string(),
                })?;
                if !(w > 0.0) || !w.is_finite() {
                    return Err(DataError::NonPositiveWeight { row: row_no });
                }
                weights.push(w);
            }
            if let Some((xi, yi)) = coord_idx {
                let (xn, yn) = schema.coordinates.clone().unwrap();
                let parse_coord = |raw: &str, name: &str| -> Result<f64, DataError> {
                    let v: f64 = raw.parse().map_err(|_| DataError::UnparseableCell {
                        row: row_no,
                        column: name.to_string(),
                        value: raw.to_string(),
                    })?;
                    if !v.is_finite() {
                        return Err(DataError::UnparseableCell {
                            row: row_no,
                            column: name.to_string(),
                            value: raw.to_string(),
                        });
                    }
                    Ok(v)
                };
                coords.push((parse_coord(cell(xi), &xn)?, parse_coord(cell(yi), &yn)?));
            }
        }

        if !bad_target_rows.is_empty() {
            return Err(DataError::TargetOutOfBounds { rows: bad_target_rows, max: TARGET_MAX });
        }

        // Median-impute missing numeric cells, flagging each one.
        let mut imputed = Vec::new();
        for (row_i, pos) in missing_numeric {
            let name = schema.columns[pos].name.clone();
            let median = match &features[pos] {
                ColumnData::Numeric(v) => {
                    let mut present: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
                    if present.is_empty() {
                        return Err(DataError::AllMissing { column: name });
                    }
                    present.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    let m = present.len();
                    if m % 2 == 1 {
                        present[m / 2]
                    } else {
                        0.5 * (present[m / 2 - 1] + present[m / 2])
                    }
                }
                _ => unreachable!(),
            };
            if let ColumnData::Numeric(v) = &mut features[pos] {
                v[row_i] = median;
            }
            imputed.push((row_i + 1, name));
        }

        let mut ds = Dataset::from_parts(
            schema.clone(),
            features,
            target,
            if weight_idx.is_some() { Some(weights) } else { None },
            if coord_idx.is_some() { Some(coords) } else { None },
        )?;
        ds.imputed = imputed;
        Ok(ds)
    }

    /// One-hot encodes nominal columns and passes numeric and binary
    /// columns through unchanged (no normalization or standardization).
    ///
    /// Category order is fixed by the schema; a category not listed there
    /// is an error.
    pub fn encode(&self) -> Result<FeatureMatrix, DataError> {
        let n = self.n_rows();
        let mut names: Vec<String> = Vec::new();
        let mut groups: Vec<FeatureGroup> = Vec::new();
        let mut width = 0usize;
        for spec in &self.schema.columns {
            let w = spec.kind.encoded_width();
            let kind = match &spec.kind {
                ColumnKind::Numeric | ColumnKind::OrdinalAsNumeric => GroupKind::Numeric,
                ColumnKind::Binary => GroupKind::Binary,
                ColumnKind::Nominal { categories } => {
                    for cat in categories {
                        names.push(format!("{}={}", spec.name, cat));
                    }
                    GroupKind::Nominal { categories: categories.clone() }
                }
            };
            if !matches!(spec.kind, ColumnKind::Nominal { .. }) {
                names.push(spec.name.clone());
            }
            groups.push(FeatureGroup { name: spec.name.clone(), start: width, width: w, kind });
            width += w;
        }

        let mut data = vec![0.0f64; n * width];
        for (pos, spec) in self.schema.columns.iter().enumerate() {
            let group = &groups[pos];
            match (&spec.kind, &self.features[pos]) {
                (ColumnKind::Numeric | ColumnKind::OrdinalAsNumeric, ColumnData::Numeric(v)) => {
                    for (i, &x) in v.iter().enumerate() {
                        data[i * width + group.start] = x;
                    }
                }
                (ColumnKind::Binary, ColumnData::Binary(v)) => {
                    for (i, &x) in v.iter().enumerate() {
                        data[i * width + group.start] = x as f64;
                    }
                }
                (ColumnKind::Nominal { categories }, ColumnData::Nominal(v)) => {
                    for (i, label) in v.iter().enumerate() {
                        let slot = categories.iter().position(|c| c == label).ok_or_else(|| {
                            DataError::UnseenCategory {
                                column: spec.name.clone(),
                                value: label.clone(),
                            }
                        })?;
                        data[i * width + group.start + slot] = 1.0;
                    }
                }
                _ => unreachable!(),
            }
        }
        Ok(FeatureMatrix::new(names, data, n, width, groups))
    }

    /// Stratified k-fold assignment on the binary "any transit trip"
    /// indicator (`target > 0`).
    ///
    /// Each stratum is shuffled with a seeded generator and dealt
    /// round-robin, so per-stratum fold sizes differ by at most one and
    /// the assignment is a pure function of (dataset, k, seed).
    pub fn stratified_kfold(&self, k: usize, seed: u64) -> Result<FoldAssignment, DataError> {
        if k < 2 {
            return Err(DataError::BadConfig(format!("k must be >= 2, got {k}")));
        }
        let positives: Vec<usize> =
            (0..self.n_rows()).filter(|&i| self.target[i] > 0).collect();
        let zeros: Vec<usize> = (0..self.n_rows()).filter(|&i| self.target[i] == 0).collect();
        for (label, stratum) in [("zero", &zeros), ("positive", &positives)] {
            if stratum.len() < k {
                return Err(DataError::StratumTooSmall {
                    stratum: label.to_string(),
                    size: stratum.len(),
                    k,
                });
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fold_of = vec![0usize; self.n_rows()];
        for stratum in [&zeros, &positives] {
            let mut order = stratum.clone();
            order.shuffle(&mut rng);
            for (j, &row) in order.iter().enumerate() {
                fold_of[row] = j % k;
            }
        }
        let stratum: Vec<bool> = self.target.iter().map(|&t| t > 0).collect();
        Ok(FoldAssignment { k, fold_of, stratum })
    }

    /// Keeps only the rows satisfying every condition. The schema is
    /// unchanged; an empty result is valid and reported via the flag.
    pub fn filter_subset(&self, conditions: &[Condition]) -> Result<Filtered, DataError> {
        for cond in conditions {
            if self.schema.column(cond.column()).is_none() {
                return Err(DataError::UnknownColumn { column: cond.column().to_string() });
            }
        }
        let keep: Vec<usize> = (0..self.n_rows())
            .filter(|&i| conditions.iter().all(|c| self.row_matches(i, c)))
            .collect();
        let dataset = self.take_rows(&keep);
        let empty = dataset.is_empty();
        Ok(Filtered { dataset, empty })
    }

    fn row_matches(&self, row: usize, cond: &Condition) -> bool {
        let pos = self
            .schema
            .columns
            .iter()
            .position(|c| c.name == cond.column())
            .expect("validated");
        let data = &self.features[pos];
        match cond {
            Condition::Eq { value, .. } => match data {
                ColumnData::Numeric(v) => value.parse::<f64>().is_ok_and(|t| v[row] == t),
                ColumnData::Binary(v) => value.parse::<u8>().is_ok_and(|t| v[row] == t),
                ColumnData::Nominal(v) => v[row] == *value,
            },
            Condition::Le { value, .. } => numeric_at(data, row).is_some_and(|x| x <= *value),
            Condition::Lt { value, .. } => numeric_at(data, row).is_some_and(|x| x < *value),
            Condition::Ge { value, .. } => numeric_at(data, row).is_some_and(|x| x >= *value),
            Condition::Gt { value, .. } => numeric_at(data, row).is_some_and(|x| x > *value),
        }
    }

    /// Copies the given rows into a new dataset (schema shared).
    pub fn take_rows(&self, rows: &[usize]) -> Dataset {
        let features = self
            .features
            .iter()
            .map(|col| match col {
                ColumnData::Numeric(v) => {
                    ColumnData::Numeric(rows.iter().map(|&i| v[i]).collect())
                }
                ColumnData::Binary(v) => ColumnData::Binary(rows.iter().map(|&i| v[i]).collect()),
                ColumnData::Nominal(v) => {
                    ColumnData::Nominal(rows.iter().map(|&i| v[i].clone()).collect())
                }
            })
            .collect();
        Dataset {
            schema: self.schema.clone(),
            features,
            target: rows.iter().map(|&i| self.target[i]).collect(),
            weights: self.weights.as_ref().map(|w| rows.iter().map(|&i| w[i]).collect()),
            coords: self.coords.as_ref().map(|c| rows.iter().map(|&i| c[i]).collect()),
            imputed: Vec::new(),
        }
    }

    /// Writes the table back out as CSV (features, target, then optional
    /// weight and coordinate columns), mirroring the load format.
    pub fn write_csv(&self, path: &Path) -> Result<(), DataError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        let mut header: Vec<String> =
            self.schema.columns.iter().map(|c| c.name.clone()).collect();
        header.push(self.schema.target.clone());
        if let Some(w) = &self.schema.weight {
            header.push(w.clone());
        }
        if let Some((x, y)) = &self.schema.coordinates {
            header.push(x.clone());
            header.push(y.clone());
        }
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.n_rows() {
            let mut cells: Vec<String> = Vec::with_capacity(header.len());
            for col in &self.features {
                cells.push(match col {
                    ColumnData::Numeric(v) => format!("{}", v[i]),
                    ColumnData::Binary(v) => format!("{}", v[i]),
                    ColumnData::Nominal(v) => v[i].clone(),
                });
            }
            cells.push(format!("{}", self.target[i]));
            if let Some(w) = &self.weights {
                cells.push(format!("{}", w[i]));
            }
            if let Some(c) = &self.coords {
                cells.push(format!("{}", c[i].0));
                cells.push(format!("{}", c[i].1));
            }
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

fn numeric_at(data: &ColumnData, row: usize) -> Option<f64> {
    match data {
        ColumnData::Numeric(v) => Some(v[row]),
        ColumnData::Binary(v) => Some(v[row] as f64),
        ColumnData::Nominal(_) => None,
    }
}

/// Row filter condition; `eq` compares text for nominal columns and parsed
/// numbers for numeric ones, the ordered variants apply to numeric and
/// binary columns only.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Condition {
    Eq { column: String, value: String },
    Lt { column: String, value: f64 },
    Le { column: String, value: f64 },
    Gt { column: String, value: f64 },
    Ge { column: String, value: f64 },
}

impl Condition {
    pub fn column(&self) -> &str {
        match self {
            Condition::Eq { column, .. }
            | Condition::Lt { column, .. }
            | Condition::Le { column, .. }
            | Condition::Gt { column, .. }
            | Condition::Ge { column, .. } => column,
        }
    }
}

/// Result of [`Dataset::filter_subset`].
#[derive(Clone, Debug)]
pub struct Filtered {
    pub dataset: Dataset,
    /// Set when the predicate matched no rows.
    pub empty: bool,
}

/// A stratified fold assignment: fold index per row plus the stratum label
/// (`target > 0`) the stratification used.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldAssignment {
    k: usize,
    fold_of: Vec<usize>,
    stratum: Vec<bool>,
}

impl FoldAssignment {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn fold_of(&self) -> &[usize] {
        &self.fold_of
    }

    pub fn stratum(&self) -> &[bool] {
        &self.stratum
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != fold).collect()
    }

    /// Two-column export: `row_id,fold`.
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("row_id,fold\n");
        for (i, f) in self.fold_of.iter().enumerate() {
            s.push_str(&format!("{i},{f}\n"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn simple_schema() -> Schema {
        Schema {
            columns: vec![
                ColumnSpec { name: "age".into(), kind: ColumnKind::Numeric },
                ColumnSpec { name: "gender".into(), kind: ColumnKind::Binary },
                ColumnSpec {
                    name: "parking".into(),
                    kind: ColumnKind::Nominal {
                        categories: vec!["yes".into(), "no".into(), "na".into()],
                    },
                },
            ],
            target: "trips".into(),
            weight: None,
            coordinates: None,
        }
    }

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_survey_three_rows() {
        let f = write_temp("age,gender,parking,trips\n30,1,yes,2\n45,0,no,0\n61,1,na,5\n");
        let ds = Dataset::load_survey(f.path(), &simple_schema()).unwrap();
        assert_eq!(ds.n_rows(), 3);
        assert_eq!(ds.target(), &[2, 0, 5]);
    }

    #[test]
    fn load_survey_rejects_target_over_bound_naming_row() {
        let f = write_temp("age,gender,parking,trips\n30,1,yes,2\n45,0,no,26\n61,1,na,5\n");
        let err = Dataset::load_survey(f.path(), &simple_schema()).unwrap_err();
        match err {
            DataError::TargetOutOfBounds { rows, .. } => assert_eq!(rows, vec![2]),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn load_survey_missing_declared_column() {
        let f = write_temp("age,parking,trips\n30,yes,2\n");
        let err = Dataset::load_survey(f.path(), &simple_schema()).unwrap_err();
        match err {
            DataError::MissingColumn { column } => assert_eq!(column, "gender"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn load_survey_reports_unparseable_cell() {
        let f = write_temp("age,gender,parking,trips\n30,1,yes,2\nforty,0,no,1\n");
        let err = Dataset::load_survey(f.path(), &simple_schema()).unwrap_err();
        match err {
            DataError::UnparseableCell { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "age");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn load_survey_imputes_missing_numeric_with_median() {
        let f = write_temp("age,gender,parking,trips\n20,1,yes,2\n,0,no,1\n40,1,na,0\n30,0,yes,3\n");
        let ds = Dataset::load_survey(f.path(), &simple_schema()).unwrap();
        assert_eq!(ds.imputed_cells(), &[(2, "age".to_string())]);
        match ds.column("age").unwrap() {
            ColumnData::Numeric(v) => assert_eq!(v[1], 30.0), // median of 20, 40, 30
            _ => panic!(),
        }
    }

    #[test]
    fn encode_widths_and_one_hot() {
        let f = write_temp("age,gender,parking,trips\n30,1,yes,2\n45,0,no,0\n");
        let ds = Dataset::load_survey(f.path(), &simple_schema()).unwrap();
        let x = ds.encode().unwrap();
        // numeric(1) + binary(1) + nominal(3)
        assert_eq!(x.n_cols(), 5);
        assert_eq!(
            x.names(),
            &["age", "gender", "parking=yes", "parking=no", "parking=na"]
        );
        assert_eq!(x.row_slice(0), &[30.0, 1.0, 1.0, 0.0, 0.0]);
        assert_eq!(x.row_slice(1), &[45.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn encode_rejects_unseen_category() {
        let schema = simple_schema();
        let ds = Dataset::from_parts(
            schema,
            vec![
                ColumnData::Numeric(vec![30.0]),
                ColumnData::Binary(vec![1]),
                ColumnData::Nominal(vec!["other".into()]),
            ],
            vec![1],
            None,
            None,
        )
        .unwrap();
        match ds.encode().unwrap_err() {
            DataError::UnseenCategory { column, value } => {
                assert_eq!(column, "parking");
                assert_eq!(value, "other");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn encode_all_binary_passthrough() {
        let schema = Schema {
            columns: (0..5)
                .map(|i| ColumnSpec { name: format!("b{i}"), kind: ColumnKind::Binary })
                .collect(),
            target: "y".into(),
            weight: None,
            coordinates: None,
        };
        let cols: Vec<ColumnData> =
            (0..5).map(|i| ColumnData::Binary(vec![i as u8 % 2, 1, 0])).collect();
        let ds = Dataset::from_parts(schema, cols, vec![0, 1, 2], None, None).unwrap();
        let x = ds.encode().unwrap();
        assert_eq!(x.n_cols(), 5);
        assert_eq!(x.row_slice(0), &[0.0, 1.0, 0.0, 1.0, 0.0]);
        assert_eq!(x.row_slice(1), &[1.0; 5]);
    }

    #[test]
    fn encode_decode_round_trips_nominal() {
        let f = write_temp("age,gender,parking,trips\n30,1,yes,2\n45,0,na,0\n50,1,no,1\n");
        let ds = Dataset::load_survey(f.path(), &simple_schema()).unwrap();
        let x = ds.encode().unwrap();
        let group = x.group("parking").unwrap().clone();
        for (i, expected) in ["yes", "na", "no"].iter().enumerate() {
            assert_eq!(x.nominal_label(i, &group).unwrap(), *expected);
        }
    }

    fn count_dataset(n_pos: usize, n_zero: usize) -> Dataset {
        let n = n_pos + n_zero;
        let schema = Schema {
            columns: vec![ColumnSpec { name: "x".into(), kind: ColumnKind::Numeric }],
            target: "y".into(),
            weight: None,
            coordinates: None,
        };
        let target: Vec<u32> = (0..n).map(|i| if i < n_pos { 1 } else { 0 }).collect();
        Dataset::from_parts(
            schema,
            vec![ColumnData::Numeric((0..n).map(|i| i as f64).collect())],
            target,
            None,
            None,
        )
        .unwrap()
    }

    #[test]
    fn kfold_exact_divisibility() {
        let ds = count_dataset(30, 70);
        let folds = ds.stratified_kfold(10, 7).unwrap();
        for f in 0..10 {
            let test = folds.test_indices(f);
            assert_eq!(test.len(), 10);
            let pos = test.iter().filter(|&&i| ds.target()[i] > 0).count();
            assert_eq!(pos, 3);
        }
    }

    #[test]
    fn kfold_pigeonhole_sizes() {
        let ds = count_dataset(41, 60);
        let folds = ds.stratified_kfold(10, 3).unwrap();
        let mut total = 0;
        for f in 0..10 {
            let sz = folds.test_indices(f).len();
            assert!(sz == 10 || sz == 11, "fold size {sz}");
            total += sz;
        }
        assert_eq!(total, 101);
    }

    #[test]
    fn kfold_deterministic_and_partition() {
        let ds = count_dataset(25, 40);
        let a = ds.stratified_kfold(5, 42).unwrap();
        let b = ds.stratified_kfold(5, 42).unwrap();
        assert_eq!(a, b);
        let c = ds.stratified_kfold(5, 43).unwrap();
        assert_ne!(a.fold_of(), c.fold_of());
        // Folds partition the index set.
        let mut seen = vec![false; ds.n_rows()];
        for f in 0..5 {
            for i in a.test_indices(f) {
                assert!(!seen[i]);
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn kfold_rejects_small_stratum() {
        let ds = count_dataset(4, 50);
        match ds.stratified_kfold(10, 0).unwrap_err() {
            DataError::StratumTooSmall { stratum, size, k } => {
                assert_eq!(stratum, "positive");
                assert_eq!(size, 4);
                assert_eq!(k, 10);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn kfold_ratio_within_one_record() {
        let ds = count_dataset(37, 113);
        let folds = ds.stratified_kfold(7, 11).unwrap();
        let global = 37.0 / 150.0;
        for f in 0..7 {
            let test = folds.test_indices(f);
            let pos = test.iter().filter(|&&i| ds.target()[i] > 0).count() as f64;
            assert!((pos - global * test.len() as f64).abs() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn filter_subset_semantics() {
        let schema = Schema {
            columns: vec![
                ColumnSpec { name: "veh".into(), kind: ColumnKind::Numeric },
                ColumnSpec { name: "x".into(), kind: ColumnKind::Numeric },
            ],
            target: "y".into(),
            weight: None,
            coordinates: None,
        };
        let ds = Dataset::from_parts(
            schema,
            vec![
                ColumnData::Numeric(vec![0.0, 1.0, 0.0, 2.0]),
                ColumnData::Numeric(vec![1.0, 2.0, 3.0, 4.0]),
            ],
            vec![1, 2, 3, 4],
            None,
            None,
        )
        .unwrap();
        let cond = Condition::Eq { column: "veh".into(), value: "0".into() };
        let out = ds.filter_subset(&[cond]).unwrap();
        assert!(!out.empty);
        assert_eq!(out.dataset.n_rows(), 2);
        assert_eq!(out.dataset.target(), &[1, 3]);

        let none = ds
            .filter_subset(&[Condition::Gt { column: "veh".into(), value: 10.0 }])
            .unwrap();
        assert!(none.empty);
        assert_eq!(none.dataset.n_rows(), 0);

        let err = ds
            .filter_subset(&[Condition::Eq { column: "absent".into(), value: "0".into() }])
            .unwrap_err();
        assert!(matches!(err, DataError::UnknownColumn { .. }));
    }

    #[test]
    fn schema_rejects_duplicates_and_thin_nominal() {
        let mut s = simple_schema();
        s.columns.push(ColumnSpec { name: "age".into(), kind: ColumnKind::Numeric });
        assert!(s.validate().is_err());

        let s2 = Schema {
            columns: vec![ColumnSpec {
                name: "c".into(),
                kind: ColumnKind::Nominal { categories: vec!["only".into()] },
            }],
            target: "y".into(),
            weight: None,
            coordinates: None,
        };
        assert!(s2.validate().is_err());
    }

    #[test]
    fn schema_json_round_trip() {
        let s = simple_schema();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("schema.json");
        s.to_json_file(&path).unwrap();
        let back = Schema::from_json_file(&path).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn fold_csv_export_shape() {
        let ds = count_dataset(10, 10);
        let folds = ds.stratified_kfold(2, 1).unwrap();
        let csv = folds.to_csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "row_id,fold");
        assert_eq!(lines.len(), 21);
    }
}
