use serde::{Deserialize, Serialize};

use super::fidelity::FidelityPairs;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParityGap {
    /// `mean(out | g = 1) - mean(out | g = 0)`
    pub signed: f64,
    pub abs: f64,
}

fn check_binary(groups: &[usize]) -> Result<()> {
    if let Some(i) = groups.iter().position(|&g| g > 1) {
        return Err(Error::InvalidArgument(format!(
            "binary group ids expected, found {} at position {i}",
            groups[i]
        )));
    }
    Ok(())
}

fn group_means(values: &[f64], groups: &[usize]) -> Result<(f64, f64)> {
    if values.len() != groups.len() {
        return Err(Error::InvalidArgument("values/groups length mismatch".into()));
    }
    check_binary(groups)?;
    let (mut s, mut n) = ([0.0; 2], [0usize; 2]);
    for (&v, &g) in values.iter().zip(groups) {
        s[g] += v;
        n[g] += 1;
    }
    if n[0] == 0 || n[1] == 0 {
        return Err(Error::SingleGroup);
    }
    Ok((s[1] / n[1] as f64, s[0] / n[0] as f64))
}

/// Demographic parity gap of probabilistic or binary outputs between group
/// 1 and group 0.
pub fn demographic_parity_gap(outputs: &[f64], groups: &[usize]) -> Result<ParityGap> {
    let (m1, m0) = group_means(outputs, groups)?;
    let signed = m1 - m0;
    Ok(ParityGap {
        signed,
        abs: signed.abs(),
    })
}

/// Both sides of the fairness-preservation identity: the change in DP gap
/// from blackbox to explanation, and the group difference in mean residual
/// `E(x) - B(x)`. They agree for every input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreservationCheck {
    pub dp_blackbox: f64,
    pub dp_explanation: f64,
    /// `dp_explanation - dp_blackbox`
    pub lhs: f64,
    /// `mean(eps | g = 1) - mean(eps | g = 0)`
    pub rhs: f64,
    pub abs_diff: f64,
}

pub fn preservation_check(pairs: &FidelityPairs, groups: &[usize]) -> Result<PreservationCheck> {
    if groups.len() != pairs.len() {
        return Err(Error::InvalidArgument("pairs/groups length mismatch".into()));
    }
    let dp_b = demographic_parity_gap(&pairs.blackbox, groups)?.signed;
    let dp_e = demographic_parity_gap(&pairs.explanation, groups)?.signed;
    let (r1, r0) = group_means(&pairs.residuals(), groups)?;
    let lhs = dp_e - dp_b;
    let rhs = r1 - r0;
    Ok(PreservationCheck {
        dp_blackbox: dp_b,
        dp_explanation: dp_e,
        lhs,
        rhs,
        abs_diff: (lhs - rhs).abs(),
    })
}

/// One-vs-rest preservation check for group `target` among many groups.
pub fn preservation_check_one_vs_rest(pairs: &FidelityPairs, target: usize) -> Result<PreservationCheck> {
    let binary: Vec<usize> = pairs.groups.iter().map(|&g| usize::from(g == target)).collect();
    preservation_check(pairs, &binary)
}
