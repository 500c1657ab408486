use serde::{Deserialize, Serialize};

use super::Blackbox;
use crate::dataset::EncodedDataset;
use crate::error::{Error, Result};
use crate::metrics::fidelity::{gap_report, threshold, FidelityMetric, FidelityPairs};
use crate::metrics::auroc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPerformance {
    pub group: usize,
    pub name: String,
    pub n: usize,
    /// `None` when the group holds a single class.
    pub auroc: Option<f64>,
    pub accuracy: Option<f64>,
    pub positive_rate: Option<f64>,
}

/// Groundtruth performance of a blackbox on labeled rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceReport {
    pub n: usize,
    pub auroc: Option<f64>,
    pub accuracy: f64,
    pub brier: f64,
    pub per_group: Vec<GroupPerformance>,
    /// Largest difference in positive-prediction rate between present groups.
    pub dp_gap: f64,
    pub accuracy_max_gap: Option<f64>,
    pub accuracy_mean_pairwise_gap: Option<f64>,
    pub degenerate_groups: Vec<usize>,
}

pub fn eval_blackbox(model: &dyn Blackbox, data: &EncodedDataset) -> Result<PerformanceReport> {
    let n = data.n_rows();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let probs = model.predict_batch(&data.x);
    let labels = &data.labels;
    let correct = |i: usize| f64::from(u8::from(threshold(probs[i]) == labels[i]));
    let accuracy = (0..n).map(correct).sum::<f64>() / n as f64;
    let brier = (0..n)
        .map(|i| (probs[i] - f64::from(labels[i])).powi(2))
        .sum::<f64>()
        / n as f64;

    let mut per_group = Vec::new();
    let mut degenerate_groups = Vec::new();
    let mut rates = Vec::new();
    for g in 0..data.n_groups() {
        let idx: Vec<usize> = (0..n).filter(|&i| data.groups[i] == g).collect();
        let m = idx.len();
        let (acc, pos) = if m == 0 {
            (None, None)
        } else {
            let acc = idx.iter().map(|&i| correct(i)).sum::<f64>() / m as f64;
            let pos = idx.iter().map(|&i| f64::from(threshold(probs[i]))).sum::<f64>() / m as f64;
            rates.push(pos);
            (Some(acc), Some(pos))
        };
        let s: Vec<f64> = idx.iter().map(|&i| probs[i]).collect();
        let y: Vec<u8> = idx.iter().map(|&i| labels[i]).collect();
        let a = auroc(&s, &y).ok();
        if a.is_none() {
            log::debug!("group {g} has a single class; AUROC left undefined");
            degenerate_groups.push(g);
        }
        per_group.push(GroupPerformance {
            group: g,
            name: data.group_names[g].clone(),
            n: m,
            auroc: a,
            accuracy: acc,
            positive_rate: pos,
        });
    }
    let dp_gap = match (
        rates.iter().copied().reduce(f64::max),
        rates.iter().copied().reduce(f64::min),
    ) {
        (Some(hi), Some(lo)) => hi - lo,
        _ => 0.0,
    };

    // Groundtruth accuracy gaps reuse the fidelity machinery with the labels
    // standing in for the reference outputs.
    let pairs = FidelityPairs::new(
        labels.iter().map(|&y| f64::from(y)).collect(),
        probs.clone(),
        data.groups.clone(),
    )?;
    let gaps = gap_report(&pairs, data.n_groups(), FidelityMetric::Accuracy);

    Ok(PerformanceReport {
        n,
        auroc: auroc(&probs, labels).ok(),
        accuracy,
        brier,
        per_group,
        dp_gap,
        accuracy_max_gap: gaps.max_gap,
        accuracy_mean_pairwise_gap: gaps.mean_pairwise_gap,
        degenerate_groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blackbox::FnBlackbox;
    use crate::dataset::{encode, Dataset, FeatureColumn};

    /// Feature 0 carries the label itself so closures can act as oracles.
    fn data() -> EncodedDataset {
        let labels: Vec<u8> = vec![1, 0, 1, 0, 1, 1, 0, 0];
        let groups = vec![0, 0, 0, 0, 1, 1, 1, 1];
        let ds = Dataset::new(
            vec![FeatureColumn::continuous(
                "y",
                labels.iter().map(|&y| f64::from(y)).collect(),
            )],
            labels,
            groups,
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        encode(&ds, &(0..8).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn oracle_predictor_is_perfect() {
        let d = data();
        let oracle = FnBlackbox::new(1, |x: &[f64]| if x[0] > 0.0 { 1.0 } else { 0.0 });
        let r = eval_blackbox(&oracle, &d).unwrap();
        assert_eq!(r.auroc, Some(1.0));
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.brier, 0.0);
        assert_eq!(r.accuracy_mean_pairwise_gap, Some(0.0));
    }

    #[test]
    fn anti_oracle_brier_is_one() {
        let d = data();
        let anti = FnBlackbox::new(1, |x: &[f64]| if x[0] > 0.0 { 0.0 } else { 1.0 });
        let r = eval_blackbox(&anti, &d).unwrap();
        assert_eq!(r.brier, 1.0);
        assert_eq!(r.accuracy, 0.0);
    }

    #[test]
    fn constant_predictor_has_no_dp_gap() {
        let d = data();
        let r = eval_blackbox(&FnBlackbox::new(1, |_: &[f64]| 0.5), &d).unwrap();
        assert_eq!(r.dp_gap, 0.0);
        assert_eq!(r.auroc, Some(0.5));
        for g in &r.per_group {
            assert!((0.0..=1.0).contains(&g.accuracy.unwrap()));
        }
    }

    #[test]
    fn single_class_group_recorded_not_thrown() {
        let labels: Vec<u8> = vec![1, 0, 1, 0, 1, 1, 1, 1];
        let ds = Dataset::new(
            vec![FeatureColumn::continuous("v", (0..8).map(f64::from).collect())],
            labels,
            vec![0, 0, 0, 0, 1, 1, 1, 1],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let d = encode(&ds, &(0..8).collect::<Vec<_>>()).unwrap();
        let r = eval_blackbox(&FnBlackbox::new(1, |x: &[f64]| if x[0] > 0.0 { 0.9 } else { 0.1 }), &d).unwrap();
        assert_eq!(r.degenerate_groups, vec![1]);
        assert!(r.per_group[1].auroc.is_none());
        assert!(r.per_group[0].auroc.is_some());
    }
}
