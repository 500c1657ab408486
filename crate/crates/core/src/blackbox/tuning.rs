use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train, Blackbox, MlpConfig, ModelConfig, Predictor};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::metrics::auroc;
use crate::rng;

/// Fold id per row: a seeded shuffle dealt round-robin into `k` folds.
pub fn kfold_assignments(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::seeded(seed));
    let mut out = vec![0; n];
    for (pos, &i) in idx.iter().enumerate() {
        out[i] = pos % k;
    }
    out
}

/// 25 evenly spaced L2 strengths from 1e-5 to 1.
pub fn logistic_grid() -> Vec<ModelConfig> {
    let (lo, hi) = (1e-5, 1.0);
    (0..25)
        .map(|i| ModelConfig::Logistic {
            l2: lo + (hi - lo) * i as f64 / 24.0,
        })
        .collect()
}

/// Hidden widths 50, 100, 200 with default optimizer settings.
pub fn mlp_grid() -> Vec<ModelConfig> {
    [50, 100, 200]
        .into_iter()
        .map(|h| {
            ModelConfig::Mlp(MlpConfig {
                hidden_units: h,
                ..MlpConfig::default()
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub predictor: Predictor,
    pub best_index: usize,
    pub best_config: ModelConfig,
    /// Mean validation AUROC per grid entry; `None` when no fold had both classes.
    pub cv_auroc: Vec<Option<f64>>,
}

/// Picks the grid entry with the highest mean k-fold validation AUROC
/// (smallest index on ties) and retrains it on all rows.
pub fn grid_search(
    grid: &[ModelConfig],
    x: &Matrix,
    labels: &[u8],
    folds: usize,
    seed: u64,
) -> Result<GridSearchResult> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty hyperparameter grid".into()));
    }
    let n = x.nrows();
    if grid.len() == 1 {
        let predictor = train(&grid[0], x, labels, seed)?;
        return Ok(GridSearchResult {
            predictor,
            best_index: 0,
            best_config: grid[0].clone(),
            cv_auroc: vec![None],
        });
    }
    if folds < 2 || folds > n {
        return Err(Error::InvalidArgument(format!("cannot run {folds}-fold CV on {n} rows")));
    }
    let assignment = kfold_assignments(n, folds, seed);
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|c| (0..folds).map(move |f| (c, f)))
        .collect();
    let scores: Vec<Result<Option<f64>>> = jobs
        .par_iter()
        .map(|&(c, f)| {
            let train_idx: Vec<usize> = (0..n).filter(|&i| assignment[i] != f).collect();
            let valid_idx: Vec<usize> = (0..n).filter(|&i| assignment[i] == f).collect();
            let y_train: Vec<u8> = train_idx.iter().map(|&i| labels[i]).collect();
            let model = train(&grid[c], &x.select_rows(&train_idx), &y_train, seed)?;
            let scores: Vec<f64> = valid_idx.iter().map(|&i| model.predict_proba(x.row(i))).collect();
            let y_valid: Vec<u8> = valid_idx.iter().map(|&i| labels[i]).collect();
            Ok(auroc(&scores, &y_valid).ok())
        })
        .collect();
    let mut cv_auroc = Vec::with_capacity(grid.len());
    for c in 0..grid.len() {
        let mut sum = 0.0;
        let mut count = 0;
        for f in 0..folds {
            if let Some(v) = scores[c * folds + f].as_ref().map_err(clone_err)? {
                sum += v;
                count += 1;
            }
        }
        cv_auroc.push((count > 0).then(|| sum / count as f64));
    }
    let mut best_index = 0;
    let mut best = f64::NEG_INFINITY;
    for (i, s) in cv_auroc.iter().enumerate() {
        let v = s.unwrap_or(f64::NEG_INFINITY);
        if v > best {
            best = v;
            best_index = i;
        }
    }
    let predictor = train(&grid[best_index], x, labels, seed)?;
    Ok(GridSearchResult {
        predictor,
        best_index,
        best_config: grid[best_index].clone(),
        cv_auroc,
    })
}

fn clone_err(e: &Error) -> Error {
    match e {
        Error::SingleClass => Error::SingleClass,
        other => Error::InvalidArgument(other.to_string()),
    }
}
