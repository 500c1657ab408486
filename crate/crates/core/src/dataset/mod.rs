//! Tabular datasets with a binary label and a protected-group annotation.

mod encode;
mod resample;
mod schema;
mod split;

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use encode::{encode, EncodedColumn, EncodedDataset, Encoder, RawValue, SourceEncoding};
pub use resample::{balanced_indices, oversample, ResampleAxis};
pub use schema::{ColumnKind, ColumnRole, ColumnSpec, FeatureSchema};
pub use split::{split, SplitBundle};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureValues {
    Continuous(Vec<f64>),
    Categorical { levels: Vec<String>, codes: Vec<usize> },
}

impl FeatureValues {
    fn len(&self) -> usize {
        match self {
            FeatureValues::Continuous(v) => v.len(),
            FeatureValues::Categorical { codes, .. } => codes.len(),
        }
    }

    fn select(&self, idx: &[usize]) -> FeatureValues {
        match self {
            FeatureValues::Continuous(v) => {
                FeatureValues::Continuous(idx.iter().map(|&i| v[i]).collect())
            }
            FeatureValues::Categorical { levels, codes } => FeatureValues::Categorical {
                levels: levels.clone(),
                codes: idx.iter().map(|&i| codes[i]).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub name: String,
    pub values: FeatureValues,
}

impl FeatureColumn {
    pub fn continuous(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            values: FeatureValues::Continuous(values),
        }
    }

    pub fn categorical(name: impl Into<String>, levels: Vec<String>, codes: Vec<usize>) -> Self {
        Self {
            name: name.into(),
            values: FeatureValues::Categorical { levels, codes },
        }
    }
}

/// Validated tabular data: feature columns (label and group excluded),
/// one binary label and one group index per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Vec<FeatureColumn>,
    labels: Vec<u8>,
    groups: Vec<usize>,
    group_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        features: Vec<FeatureColumn>,
        labels: Vec<u8>,
        groups: Vec<usize>,
        group_names: Vec<String>,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if groups.len() != n {
            return Err(Error::InvalidArgument(format!(
                "{} group ids for {n} rows",
                groups.len()
            )));
        }
        for col in &features {
            if col.values.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "column `{}` has {} values for {n} rows",
                    col.name,
                    col.values.len()
                )));
            }
            if let FeatureValues::Categorical { levels, codes } = &col.values {
                if levels.is_empty() {
                    return Err(Error::InvalidSchema(format!(
                        "categorical column `{}` has no levels",
                        col.name
                    )));
                }
                if let Some(row) = codes.iter().position(|&c| c >= levels.len()) {
                    return Err(Error::InvalidArgument(format!(
                        "column `{}` row {row}: level code out of range",
                        col.name
                    )));
                }
            }
        }
        if let Some(row) = labels.iter().position(|&y| y > 1) {
            return Err(Error::InvalidArgument(format!("row {row}: label must be 0 or 1")));
        }
        if let Some(row) = groups.iter().position(|&g| g >= group_names.len()) {
            return Err(Error::UnknownGroupLabel {
                row,
                label: groups[row].to_string(),
            });
        }
        Ok(Self {
            features,
            labels,
            groups,
            group_names,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn features(&self) -> &[FeatureColumn] {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn groups(&self) -> &[usize] {
        &self.groups
    }

    pub fn group_names(&self) -> &[String] {
        &self.group_names
    }

    pub fn n_groups(&self) -> usize {
        self.group_names.len()
    }

    /// Rows at `idx`, in order; indices may repeat.
    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: self
                .features
                .iter()
                .map(|c| FeatureColumn {
                    name: c.name.clone(),
                    values: c.values.select(idx),
                })
                .collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            groups: idx.iter().map(|&i| self.groups[i]).collect(),
            group_names: self.group_names.clone(),
        }
    }

    /// Raw feature values of one row, in column order.
    pub fn raw_row(&self, i: usize) -> Vec<RawValue> {
        self.features
            .iter()
            .map(|c| match &c.values {
                FeatureValues::Continuous(v) => RawValue::Number(v[i]),
                FeatureValues::Categorical { levels, codes } => {
                    RawValue::Level(levels[codes[i]].clone())
                }
            })
            .collect()
    }
}

/// Reads a headered, comma-separated UTF-8 file according to `schema`.
pub fn load_dataset(csv_path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Dataset> {
    let path = csv_path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(file, schema)
}

pub fn read_dataset<R: std::io::Read>(reader: R, schema: &FeatureSchema) -> Result<Dataset> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: HashMap<String, usize> = rdr
        .headers()?
        .iter()
        .enumerate()
        .map(|(i, h)| (h.to_string(), i))
        .collect();
    let position = |name: &str| {
        header
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let label_spec = schema.label_column();
    let group_spec = schema.group_column();
    let label_pos = position(&label_spec.name)?;
    let group_pos = position(&group_spec.name)?;
    let feature_specs: Vec<&ColumnSpec> = schema.feature_columns().collect();
    let feature_pos = feature_specs
        .iter()
        .map(|c| position(&c.name))
        .collect::<Result<Vec<_>>>()?;

    let mut raw_features: Vec<Vec<String>> = vec![Vec::new(); feature_specs.len()];
    let mut numeric: Vec<Vec<f64>> = vec![Vec::new(); feature_specs.len()];
    let mut labels = Vec::new();
    let mut group_cells = Vec::new();

    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let cell = |pos: usize| record.get(pos).unwrap_or("");
        let unparseable = |column: &str, value: &str| Error::UnparseableValue {
            row,
            column: column.to_string(),
            value: value.to_string(),
        };

        let label_cell = cell(label_pos);
        let y = match &label_spec.positive {
            _ if label_cell.is_empty() => return Err(unparseable(&label_spec.name, label_cell)),
            Some(pos) => u8::from(label_cell == pos),
            None => parse_binary(label_cell).ok_or_else(|| unparseable(&label_spec.name, label_cell))?,
        };
        labels.push(y);

        let group_cell = cell(group_pos);
        if group_cell.is_empty() {
            return Err(unparseable(&group_spec.name, group_cell));
        }
        group_cells.push(group_cell.to_string());

        for (j, (spec, &pos)) in feature_specs.iter().zip(&feature_pos).enumerate() {
            let v = cell(pos);
            if v.is_empty() {
                return Err(unparseable(&spec.name, v));
            }
            match spec.kind {
                ColumnKind::Continuous => {
                    let x: f64 = v.parse().map_err(|_| unparseable(&spec.name, v))?;
                    if !x.is_finite() {
                        return Err(unparseable(&spec.name, v));
                    }
                    numeric[j].push(x);
                }
                ColumnKind::Categorical => raw_features[j].push(v.to_string()),
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let group_names: Vec<String> = match &group_spec.levels {
        Some(levels) => levels.clone(),
        None => group_cells
            .iter()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
    };
    let group_index: HashMap<&str, usize> = group_names
        .iter()
        .enumerate()
        .map(|(i, g)| (g.as_str(), i))
        .collect();
    let groups = group_cells
        .iter()
        .enumerate()
        .map(|(row, g)| {
            group_index
                .get(g.as_str())
                .copied()
                .ok_or_else(|| Error::UnknownGroupLabel {
                    row,
                    label: g.clone(),
                })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut features = Vec::with_capacity(feature_specs.len());
    for (j, spec) in feature_specs.iter().enumerate() {
        let col = match spec.kind {
            ColumnKind::Continuous => {
                FeatureColumn::continuous(spec.name.clone(), std::mem::take(&mut numeric[j]))
            }
            ColumnKind::Categorical => {
                let cells = std::mem::take(&mut raw_features[j]);
                let levels: Vec<String> = match &spec.levels {
                    Some(l) => l.clone(),
                    None => cells.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect(),
                };
                let index: HashMap<&str, usize> = levels
                    .iter()
                    .enumerate()
                    .map(|(i, l)| (l.as_str(), i))
                    .collect();
                let codes = cells
                    .iter()
                    .enumerate()
                    .map(|(row, c)| {
                        index.get(c.as_str()).copied().ok_or_else(|| {
                            Error::UnparseableValue {
                                row,
                                column: spec.name.clone(),
                                value: c.clone(),
                            }
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                FeatureColumn::categorical(spec.name.clone(), levels, codes)
            }
        };
        features.push(col);
    }
    Dataset::new(features, labels, groups, group_names)
}

fn parse_binary(s: &str) -> Option<u8> {
    match s {
        "0" | "0.0" | "false" | "False" => Some(0),
        "1" | "1.0" | "true" | "True" => Some(1),
        _ => None,
    }
}
