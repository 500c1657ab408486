use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::auroc::average_ranks;

/// Largest number of nonzero samples for which the null distribution is
/// enumerated exactly.
pub const EXACT_MAX_N: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    pub p_value: f64,
    /// Sum of ranks of positive samples.
    pub w_plus: f64,
    /// Samples remaining after dropping exact zeros.
    pub n_used: usize,
    pub exact: bool,
}

/// One-sided Wilcoxon signed-rank test of median > 0. Exact zeros are
/// dropped; ties in |x| get average ranks. For up to 25 nonzero samples the
/// permutation distribution of the positive rank sum is computed exactly,
/// otherwise a continuity-corrected normal approximation with tie
/// correction is used. All-zero input yields p = 1.
pub fn wilcoxon_one_sided(samples: &[f64]) -> WilcoxonResult {
    let nz: Vec<f64> = samples.iter().copied().filter(|&x| x != 0.0).collect();
    let n = nz.len();
    if n == 0 {
        return WilcoxonResult {
            p_value: 1.0,
            w_plus: 0.0,
            n_used: 0,
            exact: true,
        };
    }
    let abs: Vec<f64> = nz.iter().map(|x| x.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = ranks
        .iter()
        .zip(&nz)
        .filter(|(_, &x)| x > 0.0)
        .map(|(r, _)| r)
        .sum();

    if n <= EXACT_MAX_N {
        // Doubled ranks are integers even with half-rank ties.
        let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
        let max_sum: usize = doubled.iter().sum();
        let mut counts = vec![0u64; max_sum + 1];
        counts[0] = 1;
        let mut reach = 0;
        for &r in &doubled {
            for s in (0..=reach).rev() {
                if counts[s] != 0 {
                    counts[s + r] += counts[s];
                }
            }
            reach += r;
        }
        let observed = (w_plus * 2.0).round() as usize;
        let tail: u64 = counts[observed..].iter().sum();
        let total = 2f64.powi(n as i32);
        return WilcoxonResult {
            p_value: tail as f64 / total,
            w_plus,
            n_used: n,
            exact: true,
        };
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = abs.clone();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let z = (w_plus - mean - 0.5) / var.sqrt();
    let normal = Normal::standard();
    WilcoxonResult {
        p_value: normal.sf(z),
        w_plus,
        n_used: n,
        exact: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    /// Full enumeration of the 2^n sign assignments over the observed ranks.
    fn enumerate_p(samples: &[f64]) -> f64 {
        let nz: Vec<f64> = samples.iter().copied().filter(|&x| x != 0.0).collect();
        let n = nz.len();
        if n == 0 {
            return 1.0;
        }
        // rank |x| with average ties, computed independently by counting
        let ranks: Vec<f64> = nz
            .iter()
            .map(|x| {
                let less = nz.iter().filter(|y| y.abs() < x.abs()).count() as f64;
                let eq = nz.iter().filter(|y| y.abs() == x.abs()).count() as f64;
                less + (eq + 1.0) / 2.0
            })
            .collect();
        let observed: f64 = ranks.iter().zip(&nz).filter(|(_, &x)| x > 0.0).map(|(r, _)| r).sum();
        let mut hits = 0u64;
        for mask in 0u64..(1 << n) {
            let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            if w >= observed - 1e-9 {
                hits += 1;
            }
        }
        hits as f64 / (1u64 << n) as f64
    }

    #[test]
    fn five_positive_distinct() {
        let r = wilcoxon_one_sided(&[0.1, 0.2, 0.3, 0.4, 0.5]);
        assert_eq!(r.p_value, 1.0 / 32.0);
        assert!(r.exact);
    }

    #[test]
    fn all_zero_is_one() {
        assert_eq!(wilcoxon_one_sided(&[0.0, 0.0, 0.0]).p_value, 1.0);
        assert_eq!(wilcoxon_one_sided(&[]).p_value, 1.0);
    }

    #[test]
    fn random_small_samples_match_enumeration() {
        let mut r = rng::seeded(17);
        for _ in 0..200 {
            let n = r.random_range(1..=10);
            // coarse grid produces ties and zeros
            let xs: Vec<f64> = (0..n).map(|_| r.random_range(-4i32..=6) as f64 / 2.0).collect();
            assert_eq!(wilcoxon_one_sided(&xs).p_value, enumerate_p(&xs), "{xs:?}");
        }
    }

    #[test]
    fn normal_approximation_tracks_exact_tail() {
        // tie-free n = 30: exact tail by counting subsets of {1..30} per rank sum
        let xs: Vec<f64> = (1..=30).map(|i| if i % 3 == 0 { -(i as f64) } else { i as f64 }).collect();
        let approx = wilcoxon_one_sided(&xs);
        assert!(!approx.exact);
        let mut counts = vec![0f64; 466];
        counts[0] = 1.0;
        for r in 1..=30usize {
            for s in (0..=465 - r).rev() {
                counts[s + r] += counts[s];
            }
        }
        let exact = counts[approx.w_plus as usize..].iter().sum::<f64>() / 2f64.powi(30);
        assert!((approx.p_value - exact).abs() < 2e-3, "{} vs {exact}", approx.p_value);
    }

    proptest! {
        #[test]
        fn shifting_up_never_raises_p(
            xs in proptest::collection::vec(-10.0f64..10.0, 1..12),
            shift in 0.01f64..5.0,
        ) {
            // a shift that lands on zero or ties two magnitudes changes the
            // null distribution, so only the generic case is monotone
            let ys: Vec<f64> = xs.iter().map(|v| v + shift).collect();
            let generic = |v: &[f64]| {
                let mut a: Vec<f64> = v.iter().map(|x| x.abs()).collect();
                a.sort_by(f64::total_cmp);
                a[0] > 0.0 && a.windows(2).all(|w| w[0] < w[1])
            };
            prop_assume!(generic(&xs) && generic(&ys));
            prop_assert!(wilcoxon_one_sided(&ys).p_value <= wilcoxon_one_sided(&xs).p_value);
        }
    }
}
