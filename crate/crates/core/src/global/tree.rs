use serde::{Deserialize, Serialize};

use crate::blackbox::Blackbox;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::metrics::auroc;
use crate::metrics::fidelity::threshold;

pub const DEFAULT_MIN_LEAF: usize = 5;
pub const DEPTH_GRID: [usize; 8] = [3, 4, 5, 6, 7, 8, 9, 10];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        /// Fraction of positive blackbox labels among training rows here.
        probability: f64,
        class: u8,
        n: usize,
    },
    Split {
        feature: usize,
        /// Rows with `x[feature] <= threshold` go left.
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { probability, .. } => return *probability,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] <= *threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSurrogate {
    pub root: TreeNode,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub n_features: usize,
}

impl TreeSurrogate {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.root.predict(x)
    }
}

impl Blackbox for TreeSurrogate {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba(&self, x: &[f64]) -> f64 {
        self.predict_row(x)
    }
}

fn leaf(labels: &[u8], idx: &[usize]) -> TreeNode {
    let pos = idx.iter().filter(|&&i| labels[i] == 1).count();
    let probability = if idx.is_empty() {
        0.0
    } else {
        pos as f64 / idx.len() as f64
    };
    TreeNode::Leaf {
        probability,
        class: threshold(probability),
        n: idx.len(),
    }
}

fn gini_mass(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    // n times the Gini impurity
    n as f64 * 2.0 * p * (1.0 - p)
}

struct Best {
    decrease: f64,
    feature: usize,
    threshold: f64,
}

fn best_split(x: &Matrix, labels: &[u8], idx: &[usize], min_leaf: usize) -> Option<Best> {
    let n = idx.len();
    let total_pos = idx.iter().filter(|&&i| labels[i] == 1).count();
    let parent = gini_mass(total_pos, n);
    let mut best: Option<Best> = None;
    let mut order = idx.to_vec();
    for j in 0..x.ncols() {
        order.sort_by(|&a, &b| x.get(a, j).total_cmp(&x.get(b, j)).then(a.cmp(&b)));
        let mut left_pos = 0;
        for cut in 1..n {
            left_pos += usize::from(labels[order[cut - 1]] == 1);
            let lo = x.get(order[cut - 1], j);
            let hi = x.get(order[cut], j);
            if lo == hi || cut < min_leaf || n - cut < min_leaf {
                continue;
            }
            let decrease = parent - gini_mass(left_pos, cut) - gini_mass(total_pos - left_pos, n - cut);
            let better = match &best {
                None => true,
                Some(b) => decrease > b.decrease + 1e-12,
            };
            if better {
                best = Some(Best {
                    decrease,
                    feature: j,
                    threshold: lo + (hi - lo) / 2.0,
                });
            }
        }
    }
    best
}

fn grow(x: &Matrix, labels: &[u8], idx: Vec<usize>, depth: usize, max_depth: Option<usize>, min_leaf: usize) -> TreeNode {
    let pos = idx.iter().filter(|&&i| labels[i] == 1).count();
    let pure = pos == 0 || pos == idx.len();
    if pure || max_depth.is_some_and(|m| depth >= m) || idx.len() < 2 * min_leaf {
        return leaf(labels, &idx);
    }
    let Some(b) = best_split(x, labels, &idx, min_leaf) else {
        return leaf(labels, &idx);
    };
    let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x.get(i, b.feature) <= b.threshold);
    TreeNode::Split {
        feature: b.feature,
        threshold: b.threshold,
        left: Box::new(grow(x, labels, l, depth + 1, max_depth, min_leaf)),
        right: Box::new(grow(x, labels, r, depth + 1, max_depth, min_leaf)),
    }
}

/// Greedy CART on binary labels minimizing Gini impurity. Splits are
/// midpoints between consecutive distinct values; an impure node takes the
/// best split even when it does not lower impurity. Ties keep the first
/// candidate in (feature, threshold) order.
pub fn fit_tree(x: &Matrix, labels: &[u8], max_depth: Option<usize>, min_leaf: usize) -> Result<TreeSurrogate> {
    if x.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    if labels.len() != x.nrows() {
        return Err(Error::InvalidArgument("label count differs from row count".into()));
    }
    let min_leaf = min_leaf.max(1);
    let root = grow(x, labels, (0..x.nrows()).collect(), 0, max_depth, min_leaf);
    Ok(TreeSurrogate {
        root,
        max_depth,
        min_leaf,
        n_features: x.ncols(),
    })
}

/// Tree imitating the blackbox's thresholded outputs on `x`.
pub fn fit_tree_surrogate(
    model: &dyn Blackbox,
    x: &Matrix,
    max_depth: Option<usize>,
    min_leaf: usize,
) -> Result<TreeSurrogate> {
    let labels: Vec<u8> = model.predict_batch(x).into_iter().map(threshold).collect();
    fit_tree(x, &labels, max_depth, min_leaf)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthSelection {
    pub depth: usize,
    pub depths: Vec<usize>,
    /// Validation fidelity per depth: AUROC against the thresholded
    /// blackbox, or accuracy when the validation labels are one class.
    pub scores: Vec<f64>,
}

/// Fits one tree per candidate depth and keeps the one with the best
/// validation fidelity; ties go to the shallower tree.
pub fn tune_tree_depth(
    model: &dyn Blackbox,
    train_x: &Matrix,
    valid_x: &Matrix,
    depths: &[usize],
    min_leaf: usize,
) -> Result<(TreeSurrogate, DepthSelection)> {
    if depths.is_empty() {
        return Err(Error::InvalidArgument("empty depth grid".into()));
    }
    let train_labels: Vec<u8> = model.predict_batch(train_x).into_iter().map(threshold).collect();
    let valid_labels: Vec<u8> = model.predict_batch(valid_x).into_iter().map(threshold).collect();
    let mut best: Option<(f64, TreeSurrogate, usize)> = None;
    let mut scores = Vec::with_capacity(depths.len());
    for &d in depths {
        let tree = fit_tree(train_x, &train_labels, Some(d), min_leaf)?;
        let probs: Vec<f64> = valid_x.rows_iter().map(|r| tree.predict_row(r)).collect();
        let score = match auroc(&probs, &valid_labels) {
            Ok(a) => a,
            Err(_) => {
                let hits = probs.iter().zip(&valid_labels).filter(|(p, y)| threshold(**p) == **y).count();
                hits as f64 / valid_labels.len().max(1) as f64
            }
        };
        scores.push(score);
        if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
            best = Some((score, tree, d));
        }
    }
    let (_, tree, depth) = best.expect("nonempty grid");
    Ok((
        tree,
        DepthSelection {
            depth,
            depths: depths.to_vec(),
            scores,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blackbox::FnBlackbox;
    use crate::rng;
    use rand::Rng;

    fn random_x(n: usize, d: usize, seed: u64) -> Matrix {
        let mut r = rng::seeded(seed);
        Matrix::from_vec(n, d, (0..n * d).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn train_accuracy(t: &TreeSurrogate, x: &Matrix, y: &[u8]) -> f64 {
        x.rows_iter().zip(y).filter(|(r, &l)| threshold(t.predict_row(r)) == l).count() as f64 / y.len() as f64
    }

    #[test]
    fn memorizes_unique_rows() {
        let x = random_x(200, 3, 1);
        let mut r = rng::seeded(2);
        let y: Vec<u8> = (0..200).map(|_| r.random_range(0..2)).collect();
        let t = fit_tree(&x, &y, None, 1).unwrap();
        assert_eq!(train_accuracy(&t, &x, &y), 1.0);
    }

    #[test]
    fn threshold_blackbox_recovered_at_depth_one() {
        let x = random_x(300, 5, 3);
        let bb = FnBlackbox::new(5, |r: &[f64]| f64::from(u8::from(r[3] > 0.0)));
        let t = fit_tree_surrogate(&bb, &x, Some(1), 5).unwrap();
        match &t.root {
            TreeNode::Split { feature, .. } => assert_eq!(*feature, 3),
            _ => panic!("expected a split"),
        }
        for r in x.rows_iter() {
            assert_eq!(t.predict_row(r), bb.predict_proba(r));
        }
    }

    #[test]
    fn fidelity_non_decreasing_in_depth() {
        let x = random_x(400, 4, 4);
        let y: Vec<u8> = x.rows_iter().map(|r| u8::from((r[0] * 3.0).sin() * r[1] + r[2] * r[2] > 0.3)).collect();
        let mut prev = 0.0;
        for d in 0..=10 {
            let acc = train_accuracy(&fit_tree(&x, &y, Some(d), 5).unwrap(), &x, &y);
            assert!(acc >= prev - 1e-12, "depth {d}: {acc} < {prev}");
            prev = acc;
        }
    }

    #[test]
    fn depth_limit_and_leaf_probabilities() {
        let x = random_x(300, 3, 5);
        let y: Vec<u8> = x.rows_iter().map(|r| u8::from(r[0] * r[1] > 0.0)).collect();
        let t = fit_tree(&x, &y, Some(3), 5).unwrap();
        assert!(t.root.depth() <= 3);
        for r in x.rows_iter() {
            assert!((0.0..=1.0).contains(&t.predict_row(r)));
        }
    }

    #[test]
    fn xor_needs_a_zero_gain_first_split() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 2) as f64, ((i / 2) % 2) as f64]).collect();
        let y: Vec<u8> = rows.iter().map(|r| u8::from(r[0] != r[1])).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let t = fit_tree(&x, &y, Some(2), 1).unwrap();
        assert_eq!(train_accuracy(&t, &x, &y), 1.0);
    }

    #[test]
    fn pure_leaf_probability_is_binary_and_json_round_trips() {
        let x = random_x(100, 2, 6);
        let bb = FnBlackbox::new(2, |r: &[f64]| if r[0] > 0.2 { 0.9 } else { 0.1 });
        let t = fit_tree_surrogate(&bb, &x, Some(4), 5).unwrap();
        for r in x.rows_iter() {
            let p = t.predict_row(r);
            assert!(p == 0.0 || p == 1.0);
        }
        let back: TreeSurrogate = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn tuning_prefers_shallow_on_ties() {
        let x = random_x(300, 3, 7);
        let v = random_x(100, 3, 8);
        let bb = FnBlackbox::new(3, |r: &[f64]| f64::from(u8::from(r[1] > 0.1)));
        let (t, sel) = tune_tree_depth(&bb, &x, &v, &DEPTH_GRID, 5).unwrap();
        assert_eq!(sel.depth, 3);
        assert_eq!(t.max_depth, Some(3));
        assert_eq!(sel.scores.len(), 8);
    }
}
