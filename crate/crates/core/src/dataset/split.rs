use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Four disjoint index sets covering every row: 50% blackbox training,
/// 30% explainer training, 10% explainer validation, remainder test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitBundle {
    pub blackbox_train: Vec<usize>,
    pub explainer_train: Vec<usize>,
    pub explainer_valid: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

pub const MIN_SPLIT_ROWS: usize = 10;

/// Shuffles row indices under `seed`, floors the first three shares and
/// assigns the remainder to test. Depends only on `n_rows` and `seed`.
pub fn split(n_rows: usize, seed: u64) -> Result<SplitBundle> {
    if n_rows < MIN_SPLIT_ROWS {
        return Err(Error::DatasetTooSmall {
            n: n_rows,
            min: MIN_SPLIT_ROWS,
        });
    }
    let mut idx: Vec<usize> = (0..n_rows).collect();
    idx.shuffle(&mut rng::seeded(seed));
    let n_bb = n_rows / 2;
    let n_tr = n_rows * 3 / 10;
    let n_va = n_rows / 10;
    let test = idx.split_off(n_bb + n_tr + n_va);
    let explainer_valid = idx.split_off(n_bb + n_tr);
    let explainer_train = idx.split_off(n_bb);
    Ok(SplitBundle {
        blackbox_train: idx,
        explainer_train,
        explainer_valid,
        test,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn thousand_rows() {
        let s = split(1000, 3).unwrap();
        assert_eq!(
            (s.blackbox_train.len(), s.explainer_train.len(), s.explainer_valid.len(), s.test.len()),
            (500, 300, 100, 100)
        );
    }

    #[test]
    fn deterministic_under_seed() {
        assert_eq!(split(257, 11).unwrap(), split(257, 11).unwrap());
        assert_ne!(split(257, 11).unwrap(), split(257, 12).unwrap());
    }

    #[test]
    fn too_small() {
        assert!(matches!(split(9, 0), Err(Error::DatasetTooSmall { n: 9, .. })));
    }

    proptest! {
        #[test]
        fn partition_and_proportions(n in 10usize..3000, seed in any::<u64>()) {
            let s = split(n, seed).unwrap();
            let mut all: Vec<usize> = s.blackbox_train.iter()
                .chain(&s.explainer_train)
                .chain(&s.explainer_valid)
                .chain(&s.test)
                .copied()
                .collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            // each floored share is short by less than one row, and the
            // shortfall (under 3 rows in total) lands in test
            let shares = [
                (s.blackbox_train.len(), 0.5),
                (s.explainer_train.len(), 0.3),
                (s.explainer_valid.len(), 0.1),
            ];
            let mut shortfall = 0.0;
            for (len, p) in shares {
                let d = p * n as f64 - len as f64;
                prop_assert!((-1e-9..1.0).contains(&d));
                shortfall += d;
            }
            prop_assert!(shortfall < 3.0);
            prop_assert!((s.test.len() as f64 - 0.1 * n as f64 - shortfall).abs() < 1e-6);
        }
    }
}
