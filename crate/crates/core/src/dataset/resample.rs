use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleAxis {
    Class,
    Group,
}

impl ResampleAxis {
    fn name(self) -> &'static str {
        match self {
            ResampleAxis::Class => "class",
            ResampleAxis::Group => "group",
        }
    }
}

/// Row indices that balance `strata`: every original index once, followed by
/// uniform with-replacement draws from each minority stratum until all
/// present strata match the largest one.
pub fn balanced_indices(strata: &[usize], seed: u64, what: &'static str) -> Result<Vec<usize>> {
    let n_strata = strata.iter().copied().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_strata];
    for (i, &s) in strata.iter().enumerate() {
        members[s].push(i);
    }
    let present: Vec<&Vec<usize>> = members.iter().filter(|m| !m.is_empty()).collect();
    if present.len() < 2 {
        return Err(Error::SingleStratum(what));
    }
    let target = present.iter().map(|m| m.len()).max().unwrap_or(0);
    let mut out: Vec<usize> = (0..strata.len()).collect();
    let mut rng = rng::seeded(seed);
    for m in present {
        for _ in m.len()..target {
            out.push(m[rng.random_range(0..m.len())]);
        }
    }
    Ok(out)
}

/// Randomly duplicates minority-class or minority-group rows until every
/// stratum has the majority's count.
pub fn oversample(dataset: &Dataset, axis: ResampleAxis, seed: u64) -> Result<Dataset> {
    let strata: Vec<usize> = match axis {
        ResampleAxis::Class => dataset.labels().iter().map(|&y| y as usize).collect(),
        ResampleAxis::Group => dataset.groups().to_vec(),
    };
    let idx = balanced_indices(&strata, seed, axis.name())?;
    Ok(dataset.select(&idx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FeatureColumn, RawValue};

    fn with_groups(groups: Vec<usize>) -> Dataset {
        let n = groups.len();
        Dataset::new(
            vec![FeatureColumn::continuous("x", (0..n).map(|i| i as f64).collect())],
            (0..n).map(|i| (i % 2) as u8).collect(),
            groups,
            vec!["a".into(), "b".into()],
        )
        .unwrap()
    }

    fn counts(v: &[usize], k: usize) -> Vec<usize> {
        (0..k).map(|s| v.iter().filter(|&&x| x == s).count()).collect()
    }

    #[test]
    fn thirty_ten_becomes_thirty_thirty() {
        let mut g = vec![0; 30];
        g.extend(vec![1; 10]);
        let ds = with_groups(g);
        let out = oversample(&ds, ResampleAxis::Group, 5).unwrap();
        assert_eq!(counts(out.groups(), 2), vec![30, 30]);
        assert_eq!(out.n_rows(), 60);
        // appended rows are duplicates of minority rows
        let originals: Vec<Vec<RawValue>> = (0..ds.n_rows()).map(|i| ds.raw_row(i)).collect();
        for i in 40..60 {
            assert_eq!(out.groups()[i], 1);
            assert!(originals.contains(&out.raw_row(i)));
        }
    }

    #[test]
    fn balanced_is_fixed_point() {
        let ds = with_groups(vec![0, 1, 0, 1]);
        assert_eq!(oversample(&ds, ResampleAxis::Group, 1).unwrap(), ds);
    }

    #[test]
    fn class_axis_95_5() {
        let n = 200;
        let labels: Vec<u8> = (0..n).map(|i| u8::from(i % 20 == 0)).collect();
        let ds = Dataset::new(
            vec![FeatureColumn::continuous("x", (0..n).map(|i| i as f64).collect())],
            labels,
            vec![0; n],
            vec!["g".into()],
        )
        .unwrap();
        let out = oversample(&ds, ResampleAxis::Class, 9).unwrap();
        let pos = out.labels().iter().filter(|&&y| y == 1).count();
        assert_eq!(pos, out.n_rows() - pos);
        assert_eq!(pos, 190);
    }

    #[test]
    fn single_stratum_rejected() {
        let ds = with_groups(vec![1, 1, 1]);
        assert!(matches!(
            oversample(&ds, ResampleAxis::Group, 0),
            Err(Error::SingleStratum("group"))
        ));
    }
}
