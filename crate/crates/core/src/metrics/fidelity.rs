use serde::{Deserialize, Serialize};

use super::auroc::auroc;
use crate::error::{Error, Result};

/// Decision threshold applied to blackbox and explanation outputs.
pub const THRESHOLD: f64 = 0.5;

#[inline]
pub fn threshold(p: f64) -> u8 {
    u8::from(p >= THRESHOLD)
}

/// How agreement between explanation and blackbox is scored. For
/// `Accuracy` and `Auroc` the thresholded blackbox output is the label and
/// the explanation output is the prediction (thresholded) or the score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FidelityMetric {
    Accuracy,
    Auroc,
    MeanError,
}

impl FidelityMetric {
    pub const ALL: [FidelityMetric; 3] = [Self::Accuracy, Self::Auroc, Self::MeanError];

    pub fn name(self) -> &'static str {
        match self {
            Self::Accuracy => "accuracy",
            Self::Auroc => "auroc",
            Self::MeanError => "mean_error",
        }
    }
}

impl std::str::FromStr for FidelityMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accuracy" => Ok(Self::Accuracy),
            "auroc" => Ok(Self::Auroc),
            "mean_error" => Ok(Self::MeanError),
            other => Err(Error::InvalidArgument(format!("unknown metric `{other}`"))),
        }
    }
}

/// Per-point blackbox outputs, explanation outputs and group ids.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FidelityPairs {
    pub blackbox: Vec<f64>,
    pub explanation: Vec<f64>,
    pub groups: Vec<usize>,
}

impl FidelityPairs {
    pub fn new(blackbox: Vec<f64>, explanation: Vec<f64>, groups: Vec<usize>) -> Result<Self> {
        if blackbox.len() != explanation.len() || blackbox.len() != groups.len() {
            return Err(Error::InvalidArgument(format!(
                "fidelity pairs have mismatched lengths ({}, {}, {})",
                blackbox.len(),
                explanation.len(),
                groups.len()
            )));
        }
        Ok(Self {
            blackbox,
            explanation,
            groups,
        })
    }

    pub fn len(&self) -> usize {
        self.blackbox.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blackbox.is_empty()
    }

    /// Residuals `E(x) - B(x)`.
    pub fn residuals(&self) -> Vec<f64> {
        self.explanation
            .iter()
            .zip(&self.blackbox)
            .map(|(e, b)| e - b)
            .collect()
    }

    fn group_subset(&self, g: usize) -> (Vec<f64>, Vec<f64>) {
        let mut b = Vec::new();
        let mut e = Vec::new();
        for i in 0..self.len() {
            if self.groups[i] == g {
                b.push(self.blackbox[i]);
                e.push(self.explanation[i]);
            }
        }
        (b, e)
    }
}

pub fn fidelity_values(blackbox: &[f64], explanation: &[f64], metric: FidelityMetric) -> Result<f64> {
    if blackbox.is_empty() {
        return Err(Error::DegenerateMetric("no evaluation points".into()));
    }
    if blackbox.len() != explanation.len() {
        return Err(Error::InvalidArgument("blackbox/explanation length mismatch".into()));
    }
    let n = blackbox.len() as f64;
    match metric {
        FidelityMetric::Accuracy => Ok(blackbox
            .iter()
            .zip(explanation)
            .filter(|(b, e)| threshold(**b) == threshold(**e))
            .count() as f64
            / n),
        FidelityMetric::Auroc => {
            let labels: Vec<u8> = blackbox.iter().map(|&b| threshold(b)).collect();
            auroc(explanation, &labels).map_err(|e| match e {
                Error::SingleClass => Error::DegenerateMetric(
                    "AUROC needs both thresholded blackbox classes".into(),
                ),
                other => other,
            })
        }
        FidelityMetric::MeanError => {
            Ok(explanation.iter().zip(blackbox).map(|(e, b)| e - b).sum::<f64>() / n)
        }
    }
}

/// Fidelity of the explanation over all points in `pairs`.
pub fn fidelity(pairs: &FidelityPairs, metric: FidelityMetric) -> Result<f64> {
    fidelity_values(&pairs.blackbox, &pairs.explanation, metric)
}

/// Per-group fidelity; `None` where the metric is undefined for the group
/// (no points, or a single thresholded class under AUROC).
pub fn group_fidelities(pairs: &FidelityPairs, n_groups: usize, metric: FidelityMetric) -> Vec<Option<f64>> {
    (0..n_groups)
        .map(|g| {
            let (b, e) = pairs.group_subset(g);
            fidelity_values(&b, &e, metric).ok()
        })
        .collect()
}

/// Worst-group shortfall from the overall fidelity, and the group attaining
/// it (lowest id on ties). Groups with an undefined metric are skipped.
pub fn max_gap_from_average(
    pairs: &FidelityPairs,
    n_groups: usize,
    metric: FidelityMetric,
) -> Result<(f64, usize)> {
    let overall = fidelity(pairs, metric)?;
    max_gap_from(overall, &group_fidelities(pairs, n_groups, metric))
}

fn max_gap_from(overall: f64, per_group: &[Option<f64>]) -> Result<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for (g, f) in per_group.iter().enumerate() {
        if let Some(f) = f {
            let gap = overall - f;
            if best.is_none_or(|(b, _)| gap > b) {
                best = Some((gap, g));
            }
        }
    }
    best.ok_or(Error::AllGroupsDegenerate)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairwiseGap {
    pub value: f64,
    /// Number of groups with a defined metric that entered the average.
    pub groups_used: usize,
}

/// Mean absolute fidelity difference over unordered pairs of groups with a
/// defined metric.
pub fn mean_pairwise_gap(
    pairs: &FidelityPairs,
    n_groups: usize,
    metric: FidelityMetric,
) -> Result<PairwiseGap> {
    mean_pairwise_from(&group_fidelities(pairs, n_groups, metric))
}

pub fn mean_pairwise_from(per_group: &[Option<f64>]) -> Result<PairwiseGap> {
    let defined: Vec<f64> = per_group.iter().flatten().copied().collect();
    let g = defined.len();
    if g < 2 {
        return Err(Error::FewerThanTwoGroups);
    }
    let mut total = 0.0;
    for k in 0..g {
        for j in k + 1..g {
            total += (defined[k] - defined[j]).abs();
        }
    }
    Ok(PairwiseGap {
        value: 2.0 * total / (g * (g - 1)) as f64,
        groups_used: g,
    })
}

/// Overall, per-group and gap values for one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub metric: FidelityMetric,
    pub overall: Option<f64>,
    pub per_group: Vec<Option<f64>>,
    pub group_sizes: Vec<usize>,
    pub max_gap: Option<f64>,
    pub max_gap_group: Option<usize>,
    pub mean_pairwise_gap: Option<f64>,
    pub groups_used: usize,
    pub excluded_groups: Vec<usize>,
}

pub fn gap_report(pairs: &FidelityPairs, n_groups: usize, metric: FidelityMetric) -> GapReport {
    let overall = fidelity(pairs, metric).ok();
    let per_group = group_fidelities(pairs, n_groups, metric);
    let group_sizes = (0..n_groups)
        .map(|g| pairs.groups.iter().filter(|&&x| x == g).count())
        .collect();
    let (max_gap, max_gap_group) = match overall.map(|o| max_gap_from(o, &per_group)) {
        Some(Ok((v, g))) => (Some(v), Some(g)),
        _ => (None, None),
    };
    let pairwise = mean_pairwise_from(&per_group).ok();
    let excluded_groups = per_group
        .iter()
        .enumerate()
        .filter(|(_, f)| f.is_none())
        .map(|(g, _)| g)
        .collect();
    GapReport {
        metric,
        overall,
        group_sizes,
        max_gap,
        max_gap_group,
        mean_pairwise_gap: pairwise.map(|p| p.value),
        groups_used: pairwise.map_or(per_group.iter().flatten().count(), |p| p.groups_used),
        excluded_groups,
        per_group,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairs(b: &[f64], e: &[f64], g: &[usize]) -> FidelityPairs {
        FidelityPairs::new(b.to_vec(), e.to_vec(), g.to_vec()).unwrap()
    }

    #[test]
    fn identity_accuracy_is_one() {
        let b = [0.1, 0.7, 0.4, 0.9];
        assert_eq!(fidelity(&pairs(&b, &b, &[0; 4]), FidelityMetric::Accuracy).unwrap(), 1.0);
    }

    #[test]
    fn direct_count_accuracy() {
        let p = pairs(&[0.9, 0.8, 0.1, 0.2], &[0.9, 0.2, 0.1, 0.3], &[0; 4]);
        assert_eq!(fidelity(&p, FidelityMetric::Accuracy).unwrap(), 0.75);
    }

    #[test]
    fn signed_mean_error() {
        let p = pairs(&[0.6, 0.4], &[0.7, 0.5], &[0, 0]);
        assert!((fidelity(&p, FidelityMetric::MeanError).unwrap() - 0.10).abs() < 1e-12);
    }

    #[test]
    fn auroc_single_class_is_degenerate() {
        let p = pairs(&[0.9, 0.8], &[0.1, 0.2], &[0, 0]);
        assert!(matches!(
            fidelity(&p, FidelityMetric::Auroc),
            Err(Error::DegenerateMetric(_))
        ));
    }

    /// Ten points per group; group 0 agrees on 9, group 1 on 8.
    fn two_groups_09_08() -> FidelityPairs {
        let mut b = Vec::new();
        let mut e = Vec::new();
        let mut g = Vec::new();
        for (grp, wrong) in [(0usize, 1usize), (1, 2)] {
            for i in 0..10 {
                b.push(0.9);
                e.push(if i < wrong { 0.1 } else { 0.9 });
                g.push(grp);
            }
        }
        pairs(&b, &e, &g)
    }

    #[test]
    fn max_gap_two_equal_groups() {
        let p = two_groups_09_08();
        let (gap, arg) = max_gap_from_average(&p, 2, FidelityMetric::Accuracy).unwrap();
        assert!((gap - 0.05).abs() < 1e-12);
        assert_eq!(arg, 1);
        let pw = mean_pairwise_gap(&p, 2, FidelityMetric::Accuracy).unwrap();
        assert!((pw.value - 0.10).abs() < 1e-12);
    }

    #[test]
    fn three_group_pairwise_enumeration() {
        // (0.9, 0.8, 0.7): |.1| + |.2| + |.1| over 3 pairs
        let pw = mean_pairwise_from(&[Some(0.9), Some(0.8), Some(0.7)]).unwrap();
        assert!((pw.value - 0.4 / 3.0).abs() < 1e-12);
        assert_eq!(pw.groups_used, 3);
    }

    #[test]
    fn identical_groups_have_zero_gaps() {
        let p = pairs(&[0.9, 0.1, 0.9, 0.1], &[0.8, 0.2, 0.8, 0.2], &[0, 0, 1, 1]);
        for m in FidelityMetric::ALL {
            let r = gap_report(&p, 2, m);
            assert_eq!(r.mean_pairwise_gap, Some(0.0));
            assert!(r.max_gap.unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_groups_excluded() {
        // group 2 has a single thresholded class
        let p = pairs(
            &[0.9, 0.1, 0.9, 0.1, 0.9, 0.8],
            &[0.8, 0.2, 0.3, 0.6, 0.7, 0.9],
            &[0, 0, 1, 1, 2, 2],
        );
        let r = gap_report(&p, 3, FidelityMetric::Auroc);
        assert_eq!(r.excluded_groups, vec![2]);
        assert_eq!(r.groups_used, 2);
        assert_eq!(r.per_group[2], None);
        assert!(matches!(
            mean_pairwise_gap(&pairs(&[0.9, 0.8], &[0.1, 0.2], &[0, 1]), 2, FidelityMetric::Auroc),
            Err(Error::FewerThanTwoGroups)
        ));
    }

    fn arb_pairs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<usize>)> {
        (2usize..60).prop_flat_map(|n| {
            (
                proptest::collection::vec(0.0f64..1.0, n),
                proptest::collection::vec(-0.2f64..1.2, n),
                proptest::collection::vec(0usize..3, n),
            )
        })
    }

    proptest! {
        #[test]
        fn gaps_invariant_under_group_relabeling((b, e, g) in arb_pairs()) {
            let p = pairs(&b, &e, &g);
            let perm = [2usize, 0, 1];
            let q = pairs(&b, &e, &g.iter().map(|&x| perm[x]).collect::<Vec<_>>());
            for m in FidelityMetric::ALL {
                let r1 = gap_report(&p, 3, m);
                let r2 = gap_report(&q, 3, m);
                match (r1.max_gap, r2.max_gap) {
                    (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
                    (a, b) => prop_assert_eq!(a.is_some(), b.is_some()),
                }
                match (r1.mean_pairwise_gap, r2.mean_pairwise_gap) {
                    (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
                    (a, b) => prop_assert_eq!(a.is_some(), b.is_some()),
                }
            }
        }

        #[test]
        fn accuracy_max_gap_nonnegative((b, e, g) in arb_pairs()) {
            let r = gap_report(&pairs(&b, &e, &g), 3, FidelityMetric::Accuracy);
            prop_assert!(r.max_gap.unwrap() >= -1e-12);
            if let Some(v) = r.mean_pairwise_gap { prop_assert!(v >= 0.0); }
        }

        #[test]
        fn two_equal_groups_half_relation(
            b in proptest::collection::vec(0.0f64..1.0, 40),
            e in proptest::collection::vec(-0.2f64..1.2, 40),
        ) {
            let g: Vec<usize> = (0..40).map(|i| i % 2).collect();
            let p = pairs(&b, &e, &g);
            for m in [FidelityMetric::Accuracy, FidelityMetric::MeanError] {
                let r = gap_report(&p, 2, m);
                prop_assert!((r.max_gap.unwrap() - r.mean_pairwise_gap.unwrap() / 2.0).abs() < 1e-12);
            }
        }

        #[test]
        fn zero_pairwise_iff_equal(vals in proptest::collection::vec(0.0f64..1.0, 2..6), equal in any::<bool>()) {
            let per: Vec<Option<f64>> = if equal {
                vec![Some(vals[0]); vals.len()]
            } else {
                vals.iter().map(|&v| Some(v)).collect()
            };
            let gap = mean_pairwise_from(&per).unwrap().value;
            let all_equal = per.iter().all(|v| v == &per[0]);
            prop_assert_eq!(gap.abs() < 1e-12, all_equal);
        }
    }
}
