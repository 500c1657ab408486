//! Global surrogates fit over a whole split: a depth-limited tree and a
//! binned additive model.

pub mod additive;
pub mod tree;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub use additive::{
    fit_additive, fit_additive_surrogate, AdditiveConfig, AdditiveSurrogate, AdditiveTarget, ShapeFunction,
};
pub use tree::{
    fit_tree, fit_tree_surrogate, tune_tree_depth, DepthSelection, TreeNode, TreeSurrogate, DEFAULT_MIN_LEAF,
    DEPTH_GRID,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "surrogate", rename_all = "snake_case")]
pub enum GlobalSurrogate {
    Tree(TreeSurrogate),
    Additive(AdditiveSurrogate),
}

impl GlobalSurrogate {
    pub fn n_features(&self) -> usize {
        match self {
            GlobalSurrogate::Tree(t) => t.n_features,
            GlobalSurrogate::Additive(a) => a.shapes.len(),
        }
    }
}

pub fn surrogate_predict(surrogate: &GlobalSurrogate, x: &Matrix) -> Result<Vec<f64>> {
    if x.ncols() != surrogate.n_features() {
        return Err(Error::SchemaMismatch {
            expected: surrogate.n_features(),
            actual: x.ncols(),
        });
    }
    Ok(match surrogate {
        GlobalSurrogate::Tree(t) => x.rows_iter().map(|r| t.predict_row(r)).collect(),
        GlobalSurrogate::Additive(a) => x.rows_iter().map(|r| a.predict_row(r)).collect(),
    })
}

pub fn surrogate_to_json(s: &GlobalSurrogate) -> Result<String> {
    Ok(serde_json::to_string_pretty(s)?)
}

pub fn surrogate_from_json(text: &str) -> Result<GlobalSurrogate> {
    Ok(serde_json::from_str(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blackbox::FnBlackbox;
    use crate::linalg::sigmoid;

    fn x() -> Matrix {
        Matrix::from_rows(&(0..60).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()]).collect::<Vec<_>>())
            .unwrap()
    }

    #[test]
    fn schema_mismatch_detected() {
        let bb = FnBlackbox::new(2, |r: &[f64]| sigmoid(r[0]));
        let t = GlobalSurrogate::Tree(fit_tree_surrogate(&bb, &x(), Some(2), 5).unwrap());
        let wrong = Matrix::zeros(3, 5);
        assert!(matches!(
            surrogate_predict(&t, &wrong),
            Err(Error::SchemaMismatch { expected: 2, actual: 5 })
        ));
    }

    #[test]
    fn dumps_round_trip_and_predictions_match() {
        let bb = FnBlackbox::new(2, |r: &[f64]| sigmoid(3.0 * r[0] - r[1]));
        let xs = x();
        for s in [
            GlobalSurrogate::Tree(fit_tree_surrogate(&bb, &xs, Some(3), 5).unwrap()),
            GlobalSurrogate::Additive(fit_additive_surrogate(&bb, &xs, &AdditiveConfig::default()).unwrap()),
        ] {
            let back = surrogate_from_json(&surrogate_to_json(&s).unwrap()).unwrap();
            let a = surrogate_predict(&s, &xs).unwrap();
            let b = surrogate_predict(&back, &xs).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn predictions_invariant_to_row_order() {
        let bb = FnBlackbox::new(2, |r: &[f64]| sigmoid(r[0] * r[1] * 4.0));
        let xs = x();
        let s = GlobalSurrogate::Additive(fit_additive_surrogate(&bb, &xs, &AdditiveConfig::default()).unwrap());
        let fwd = surrogate_predict(&s, &xs).unwrap();
        let rev_idx: Vec<usize> = (0..xs.nrows()).rev().collect();
        let mut rev = surrogate_predict(&s, &xs.select_rows(&rev_idx)).unwrap();
        rev.reverse();
        assert_eq!(fwd, rev);
    }
}
