//! Synthetic two-group datasets with known structure.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::dataset::{ColumnSpec, Dataset, FeatureColumn, FeatureSchema, FeatureValues};
use crate::error::{Error, Result};
use crate::rng;

pub const SYNTHETIC_NAMES: [&str; 5] = ["two_region", "linear", "xor", "categorical", "imbalanced"];

pub fn generate(name: &str, n: usize, seed: u64) -> Result<Dataset> {
    match name {
        "two_region" => two_region(n, seed),
        "linear" => linear_separable(n, 10, seed),
        "xor" => xor_groups(n, seed),
        "categorical" => categorical_mix(n, seed),
        "imbalanced" => imbalanced(n, seed),
        other => Err(Error::InvalidArgument(format!(
            "unknown synthetic dataset `{other}` (expected one of {})",
            SYNTHETIC_NAMES.join(", ")
        ))),
    }
}

fn names(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("g{i}")).collect()
}

fn normal(r: &mut rng::Rng) -> f64 {
    StandardNormal.sample(r)
}

/// Group is the sign of `x1`, with a gap of 2 between the groups. Labels
/// are linear in (`x2`, `x3`) for group 0. For group 1 they follow
/// `sin(4 x2) sin(4 x3) > c` with `c = 0.3` where `x2 < 0` (isolated
/// positive islands) and `c = -0.3` elsewhere (isolated negative holes), so
/// many group-1 points disagree with most of their neighbourhood. `x4`, `x5`
/// are noise.
pub fn two_region(n: usize, seed: u64) -> Result<Dataset> {
    let mut r = rng::seeded(seed);
    let spread = Normal::<f64>::new(0.0, 0.5).expect("valid normal");
    let mut cols: Vec<Vec<f64>> = (0..5).map(|_| Vec::with_capacity(n)).collect();
    let mut labels = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    for _ in 0..n {
        let g = r.random_range(0..2usize);
        let side = if g == 0 { -1.0 } else { 1.0 };
        let x1 = side * (1.0 + spread.sample(&mut r).abs());
        let x2 = r.random_range(-1.5..1.5);
        let x3 = r.random_range(-1.5..1.5);
        let y = if g == 0 {
            x2 + x3 > 0.0
        } else {
            f64::sin(4.0 * x2) * f64::sin(4.0 * x3) > if x2 < 0.0 { 0.3 } else { -0.3 }
        };
        let row = [x1, x2, x3, normal(&mut r), normal(&mut r)];
        for (c, v) in cols.iter_mut().zip(row) {
            c.push(v);
        }
        labels.push(u8::from(y));
        groups.push(g);
    }
    let features = cols
        .into_iter()
        .enumerate()
        .map(|(j, v)| FeatureColumn::continuous(format!("x{}", j + 1), v))
        .collect();
    Dataset::new(features, labels, groups, names(2))
}

/// Gaussian features with labels given by a fixed hyperplane (no label
/// noise) and groups by a fair coin.
pub fn linear_separable(n: usize, d: usize, seed: u64) -> Result<Dataset> {
    let mut r = rng::seeded(seed);
    let w: Vec<f64> = (0..d).map(|j| if j % 2 == 0 { 1.0 } else { -0.5 } / (1.0 + j as f64 / 4.0)).collect();
    let mut cols = vec![Vec::with_capacity(n); d];
    let mut labels = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..d).map(|_| normal(&mut r)).collect();
        let s: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
        for (c, v) in cols.iter_mut().zip(&x) {
            c.push(*v);
        }
        labels.push(u8::from(s > 0.0));
        groups.push(r.random_range(0..2usize));
    }
    let features = cols
        .into_iter()
        .enumerate()
        .map(|(j, v)| FeatureColumn::continuous(format!("x{}", j + 1), v))
        .collect();
    Dataset::new(features, labels, groups, names(2))
}

/// XOR of two features' signs, 10% label noise, group correlated with a
/// third feature.
pub fn xor_groups(n: usize, seed: u64) -> Result<Dataset> {
    let mut r = rng::seeded(seed);
    let mut cols: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(n)).collect();
    let mut labels = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    for _ in 0..n {
        let a = normal(&mut r);
        let b = normal(&mut r);
        let c = normal(&mut r);
        let mut y = (a > 0.0) != (b > 0.0);
        if r.random::<f64>() < 0.1 {
            y = !y;
        }
        let g = usize::from(c + 0.5 * normal(&mut r) > 0.0);
        for (col, v) in cols.iter_mut().zip([a, b, c]) {
            col.push(v);
        }
        labels.push(u8::from(y));
        groups.push(g);
    }
    let features = cols
        .into_iter()
        .enumerate()
        .map(|(j, v)| FeatureColumn::continuous(format!("x{}", j + 1), v))
        .collect();
    Dataset::new(features, labels, groups, names(2))
}

/// Two continuous features plus a three-level categorical whose level
/// frequencies differ by group.
pub fn categorical_mix(n: usize, seed: u64) -> Result<Dataset> {
    let mut r = rng::seeded(seed);
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    let mut codes = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    let level_effect = [-1.0, 0.0, 1.2];
    for _ in 0..n {
        let g = r.random_range(0..2usize);
        let u: f64 = r.random();
        let code = match (g, u) {
            (0, u) if u < 0.6 => 0,
            (0, u) if u < 0.9 => 1,
            (1, u) if u < 0.2 => 0,
            (1, u) if u < 0.5 => 1,
            _ => 2,
        };
        let x = normal(&mut r);
        let z = normal(&mut r);
        let logit = 1.5 * x - 0.8 * z * z + level_effect[code] + 0.5;
        let y = r.random::<f64>() < crate::linalg::sigmoid(2.0 * logit);
        a.push(x);
        b.push(z);
        codes.push(code);
        labels.push(u8::from(y));
        groups.push(g);
    }
    Dataset::new(
        vec![
            FeatureColumn::continuous("x1", a),
            FeatureColumn::continuous("x2", b),
            FeatureColumn::categorical("level", vec!["a".into(), "b".into(), "c".into()], codes),
        ],
        labels,
        groups,
        names(2),
    )
}

/// 85/15 group split; the minority follows a different decision rule.
pub fn imbalanced(n: usize, seed: u64) -> Result<Dataset> {
    let mut r = rng::seeded(seed);
    let mut cols: Vec<Vec<f64>> = (0..4).map(|_| Vec::with_capacity(n)).collect();
    let mut labels = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    for _ in 0..n {
        let g = usize::from(r.random::<f64>() < 0.15);
        let x: Vec<f64> = (0..4).map(|_| normal(&mut r)).collect();
        let shifted = x[0] + if g == 1 { 1.0 } else { 0.0 };
        let y = if g == 0 {
            x[0] - x[1] > 0.0
        } else {
            x[1] * x[2] + 0.3 * x[3] > 0.0
        };
        let row = [shifted, x[1], x[2], x[3]];
        for (c, v) in cols.iter_mut().zip(row) {
            c.push(v);
        }
        labels.push(u8::from(y));
        groups.push(g);
    }
    let features = cols
        .into_iter()
        .enumerate()
        .map(|(j, v)| FeatureColumn::continuous(format!("x{}", j + 1), v))
        .collect();
    Dataset::new(features, labels, groups, names(2))
}

/// Schema describing a dataset written by [`write_csv`].
pub fn schema_for(ds: &Dataset) -> FeatureSchema {
    let mut columns: Vec<ColumnSpec> = ds
        .features()
        .iter()
        .map(|c| match &c.values {
            FeatureValues::Continuous(_) => ColumnSpec::continuous(&c.name),
            FeatureValues::Categorical { .. } => ColumnSpec::categorical(&c.name),
        })
        .collect();
    columns.push(ColumnSpec::label("label"));
    let mut group = ColumnSpec::group("group");
    group.levels = Some(ds.group_names().to_vec());
    columns.push(group);
    FeatureSchema::new(columns).expect("generated schema is valid")
}

/// Writes the dataset as CSV with `label` and `group` columns last, and
/// its schema as JSON.
pub fn write_csv(ds: &Dataset, csv_path: impl AsRef<Path>, schema_path: impl AsRef<Path>) -> Result<()> {
    let csv_path = csv_path.as_ref();
    let mut w = csv::Writer::from_path(csv_path)?;
    let mut header: Vec<String> = ds.features().iter().map(|c| c.name.clone()).collect();
    header.push("label".into());
    header.push("group".into());
    w.write_record(&header)?;
    for i in 0..ds.n_rows() {
        let mut rec: Vec<String> = ds
            .features()
            .iter()
            .map(|c| match &c.values {
                FeatureValues::Continuous(v) => v[i].to_string(),
                FeatureValues::Categorical { levels, codes } => levels[codes[i]].clone(),
            })
            .collect();
        rec.push(ds.labels()[i].to_string());
        rec.push(ds.group_names()[ds.groups()[i]].clone());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(csv_path, e))?;
    let schema_path = schema_path.as_ref();
    let text = serde_json::to_string_pretty(&schema_for(ds))?;
    std::fs::write(schema_path, text).map_err(|e| Error::io(schema_path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::load_dataset;

    #[test]
    fn every_generator_is_deterministic_and_two_group() {
        for name in SYNTHETIC_NAMES {
            let a = generate(name, 300, 4).unwrap();
            let b = generate(name, 300, 4).unwrap();
            assert_eq!(a, b, "{name}");
            assert_eq!(a.n_groups(), 2);
            assert!(a.groups().contains(&0) && a.groups().contains(&1), "{name}");
            assert!(a.labels().contains(&0) && a.labels().contains(&1), "{name}");
        }
        assert!(generate("nope", 10, 0).is_err());
    }

    #[test]
    fn two_region_group_is_sign_of_first_feature() {
        let ds = two_region(500, 1).unwrap();
        let FeatureValues::Continuous(x1) = &ds.features()[0].values else {
            panic!("continuous expected")
        };
        for (v, &g) in x1.iter().zip(ds.groups()) {
            assert_eq!(usize::from(*v > 0.0), g);
            assert!(v.abs() >= 1.0);
        }
    }

    #[test]
    fn csv_export_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let ds = categorical_mix(120, 3).unwrap();
        let csv = dir.path().join("d.csv");
        let schema = dir.path().join("d.json");
        write_csv(&ds, &csv, &schema).unwrap();
        let back = load_dataset(&csv, &FeatureSchema::from_json_file(&schema).unwrap()).unwrap();
        assert_eq!(back, ds);
    }
}
