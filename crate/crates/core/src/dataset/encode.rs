use serde::{Deserialize, Serialize};

use super::{Dataset, FeatureValues};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RawValue {
    Number(f64),
    Level(String),
}

/// How one source column maps into the encoded feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SourceEncoding {
    Continuous { offset: usize, mean: f64, std: f64 },
    OneHot { offset: usize, levels: Vec<String> },
}

impl SourceEncoding {
    fn width(&self) -> usize {
        match self {
            SourceEncoding::Continuous { .. } => 1,
            SourceEncoding::OneHot { levels, .. } => levels.len(),
        }
    }
}

/// One encoded feature column and the source column it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedColumn {
    pub name: String,
    pub source: usize,
    /// Level index for one-hot columns.
    pub level: Option<usize>,
}

/// Fitted one-hot + standardization transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    sources: Vec<SourceEncoding>,
    columns: Vec<EncodedColumn>,
}

impl Encoder {
    /// Fits standardization parameters on the rows in `fit_on` only.
    /// Returns the encoder and any zero-variance warnings.
    pub fn fit(dataset: &Dataset, fit_on: &[usize]) -> Result<(Self, Vec<String>)> {
        if fit_on.is_empty() {
            return Err(Error::InvalidArgument("encode: fit_on is empty".into()));
        }
        let mut sources = Vec::new();
        let mut columns = Vec::new();
        let mut warnings = Vec::new();
        let mut offset = 0;
        for (source, col) in dataset.features().iter().enumerate() {
            let enc = match &col.values {
                FeatureValues::Continuous(v) => {
                    let n = fit_on.len() as f64;
                    let mean = fit_on.iter().map(|&i| v[i]).sum::<f64>() / n;
                    let var = fit_on.iter().map(|&i| (v[i] - mean).powi(2)).sum::<f64>() / n;
                    let mut std = var.sqrt();
                    if !(std > 1e-12 * mean.abs().max(1.0)) {
                        let msg = format!(
                            "column `{}` has zero variance on the fit rows; using stddev 1",
                            col.name
                        );
                        log::warn!("{msg}");
                        warnings.push(msg);
                        std = 1.0;
                    }
                    columns.push(EncodedColumn {
                        name: col.name.clone(),
                        source,
                        level: None,
                    });
                    SourceEncoding::Continuous { offset, mean, std }
                }
                FeatureValues::Categorical { levels, .. } => {
                    for (l, level) in levels.iter().enumerate() {
                        columns.push(EncodedColumn {
                            name: format!("{}={}", col.name, level),
                            source,
                            level: Some(l),
                        });
                    }
                    SourceEncoding::OneHot {
                        offset,
                        levels: levels.clone(),
                    }
                }
            };
            offset += enc.width();
            sources.push(enc);
        }
        Ok((Self { sources, columns }, warnings))
    }

    pub fn n_encoded(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[EncodedColumn] {
        &self.columns
    }

    pub fn sources(&self) -> &[SourceEncoding] {
        &self.sources
    }

    pub fn transform(&self, dataset: &Dataset) -> Result<Matrix> {
        if dataset.features().len() != self.sources.len() {
            return Err(Error::SchemaMismatch {
                expected: self.sources.len(),
                actual: dataset.features().len(),
            });
        }
        let n = dataset.n_rows();
        let mut x = Matrix::zeros(n, self.n_encoded());
        for (col, enc) in dataset.features().iter().zip(&self.sources) {
            match (&col.values, enc) {
                (FeatureValues::Continuous(v), SourceEncoding::Continuous { offset, mean, std }) => {
                    for (i, &vi) in v.iter().enumerate() {
                        x.set(i, *offset, (vi - mean) / std);
                    }
                }
                (
                    FeatureValues::Categorical { levels, codes },
                    SourceEncoding::OneHot {
                        offset,
                        levels: fitted,
                    },
                ) => {
                    if levels != fitted {
                        return Err(Error::InvalidArgument(format!(
                            "column `{}` level set differs from the fitted encoder",
                            col.name
                        )));
                    }
                    for (i, &c) in codes.iter().enumerate() {
                        x.set(i, offset + c, 1.0);
                    }
                }
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "column `{}` kind differs from the fitted encoder",
                        col.name
                    )))
                }
            }
        }
        Ok(x)
    }

    pub fn encode_row(&self, raw: &[RawValue]) -> Result<Vec<f64>> {
        if raw.len() != self.sources.len() {
            return Err(Error::SchemaMismatch {
                expected: self.sources.len(),
                actual: raw.len(),
            });
        }
        let mut out = vec![0.0; self.n_encoded()];
        for (v, enc) in raw.iter().zip(&self.sources) {
            match (v, enc) {
                (RawValue::Number(x), SourceEncoding::Continuous { offset, mean, std }) => {
                    out[*offset] = (x - mean) / std;
                }
                (RawValue::Level(l), SourceEncoding::OneHot { offset, levels }) => {
                    let pos = levels
                        .iter()
                        .position(|x| x == l)
                        .ok_or_else(|| Error::InvalidArgument(format!("unknown level `{l}`")))?;
                    out[offset + pos] = 1.0;
                }
                _ => return Err(Error::InvalidArgument("raw value kind mismatch".into())),
            }
        }
        Ok(out)
    }

    /// Inverse transform: undoes standardization and maps each one-hot block
    /// back to its level (argmax, first on ties).
    pub fn decode_row(&self, encoded: &[f64]) -> Result<Vec<RawValue>> {
        if encoded.len() != self.n_encoded() {
            return Err(Error::SchemaMismatch {
                expected: self.n_encoded(),
                actual: encoded.len(),
            });
        }
        Ok(self
            .sources
            .iter()
            .map(|enc| match enc {
                SourceEncoding::Continuous { offset, mean, std } => {
                    RawValue::Number(encoded[*offset] * std + mean)
                }
                SourceEncoding::OneHot { offset, levels } => {
                    let block = &encoded[*offset..offset + levels.len()];
                    let mut best = 0;
                    for (i, &v) in block.iter().enumerate() {
                        if v > block[best] {
                            best = i;
                        }
                    }
                    RawValue::Level(levels[best].clone())
                }
            })
            .collect())
    }
}

/// Numeric feature matrix with labels, groups, and the fitted encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedDataset {
    pub x: Matrix,
    pub labels: Vec<u8>,
    pub groups: Vec<usize>,
    pub group_names: Vec<String>,
    /// Encoded columns present in `x` (a subset of the encoder's columns
    /// after feature filtering).
    pub columns: Vec<EncodedColumn>,
    pub encoder: Encoder,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl EncodedDataset {
    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_groups(&self) -> usize {
        self.group_names.len()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn select_rows(&self, idx: &[usize]) -> EncodedDataset {
        EncodedDataset {
            x: self.x.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            groups: idx.iter().map(|&i| self.groups[i]).collect(),
            group_names: self.group_names.clone(),
            columns: self.columns.clone(),
            encoder: self.encoder.clone(),
            warnings: self.warnings.clone(),
        }
    }

    pub fn select_features(&self, idx: &[usize]) -> EncodedDataset {
        EncodedDataset {
            x: self.x.select_cols(idx),
            labels: self.labels.clone(),
            groups: self.groups.clone(),
            group_names: self.group_names.clone(),
            columns: idx.iter().map(|&j| self.columns[j].clone()).collect(),
            encoder: self.encoder.clone(),
            warnings: self.warnings.clone(),
        }
    }
}

/// One-hot encodes categorical columns and standardizes continuous ones,
/// with parameters fit on `fit_on` rows only. Label and group columns are
/// never part of the feature matrix.
pub fn encode(dataset: &Dataset, fit_on: &[usize]) -> Result<EncodedDataset> {
    let (encoder, warnings) = Encoder::fit(dataset, fit_on)?;
    let x = encoder.transform(dataset)?;
    Ok(EncodedDataset {
        x,
        labels: dataset.labels().to_vec(),
        groups: dataset.groups().to_vec(),
        group_names: dataset.group_names().to_vec(),
        columns: encoder.columns().to_vec(),
        encoder,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FeatureColumn;
    use proptest::prelude::*;

    fn toy() -> Dataset {
        Dataset::new(
            vec![
                FeatureColumn::continuous("a", vec![1.0, 2.0, 3.0, 4.0]),
                FeatureColumn::categorical(
                    "c",
                    vec!["a".into(), "b".into(), "c".into()],
                    vec![1, 0, 2, 1],
                ),
            ],
            vec![0, 1, 0, 1],
            vec![0, 0, 1, 1],
            vec!["g0".into(), "g1".into()],
        )
        .unwrap()
    }

    #[test]
    fn one_hot_block() {
        let enc = encode(&toy(), &[0, 1, 2, 3]).unwrap();
        assert_eq!(enc.n_features(), 4);
        assert_eq!(&enc.x.row(0)[1..], &[0.0, 1.0, 0.0]);
        for r in enc.x.rows_iter() {
            assert_eq!(r[1..].iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn all_continuous_keeps_width() {
        let ds = Dataset::new(
            vec![
                FeatureColumn::continuous("a", vec![1.0, 2.0]),
                FeatureColumn::continuous("b", vec![0.0, 5.0]),
            ],
            vec![0, 1],
            vec![0, 1],
            vec!["x".into(), "y".into()],
        )
        .unwrap();
        assert_eq!(encode(&ds, &[0, 1]).unwrap().n_features(), 2);
    }

    #[test]
    fn standardization_uses_fit_rows_only() {
        let enc = encode(&toy(), &[0, 1]).unwrap();
        // mean 1.5, population std 0.5 from rows 0 and 1
        assert!((enc.x.get(3, 0) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_warns_and_uses_unit_std() {
        let ds = Dataset::new(
            vec![FeatureColumn::continuous("k", vec![3.0, 3.0, 3.0])],
            vec![0, 1, 0],
            vec![0, 0, 0],
            vec!["g".into()],
        )
        .unwrap();
        let enc = encode(&ds, &[0, 1, 2]).unwrap();
        assert_eq!(enc.warnings.len(), 1);
        assert_eq!(enc.x.column(0), vec![0.0, 0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn standardized_moments_and_round_trip(
            vals in proptest::collection::vec(-1e3f64..1e3, 3..60),
            codes in proptest::collection::vec(0usize..3, 60),
        ) {
            let n = vals.len();
            prop_assume!(vals.iter().any(|v| (v - vals[0]).abs() > 1e-3));
            let ds = Dataset::new(
                vec![
                    FeatureColumn::continuous("v", vals.clone()),
                    FeatureColumn::categorical("c", vec!["p".into(), "q".into(), "r".into()], codes[..n].to_vec()),
                ],
                vec![0; n],
                vec![0; n],
                vec!["g".into()],
            ).unwrap();
            let all: Vec<usize> = (0..n).collect();
            let enc = encode(&ds, &all).unwrap();
            let col = enc.x.column(0);
            let m = col.iter().sum::<f64>() / n as f64;
            let v = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
            prop_assert!(m.abs() < 1e-9);
            prop_assert!((v - 1.0).abs() < 1e-9);
            for i in 0..n {
                let decoded = enc.encoder.decode_row(enc.x.row(i)).unwrap();
                let raw = ds.raw_row(i);
                match (&decoded[0], &raw[0]) {
                    (RawValue::Number(a), RawValue::Number(b)) => prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0)),
                    _ => prop_assert!(false),
                }
                prop_assert_eq!(&decoded[1], &raw[1]);
                prop_assert_eq!(enc.encoder.encode_row(&raw).unwrap(), enc.x.row(i).to_vec());
            }
        }
    }
}
