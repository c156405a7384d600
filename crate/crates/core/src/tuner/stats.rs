//! Rank statistics for racing.

use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF, StudentsT};

/// Ranks one block of scores (lower is better), averaging ties. Ranks start at 1.
pub fn block_ranks(scores: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Outcome of a Friedman test with its rank-sum post-hoc comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct FriedmanOutcome {
    pub statistic: f64,
    pub p_value: f64,
    pub rank_sums: Vec<f64>,
    /// Rank-sum distance beyond which a treatment differs from the best.
    pub critical_difference: f64,
}

/// Friedman test over `blocks` (each block holds one score per treatment).
/// The post-hoc critical difference uses the Student quantile at `alpha`.
pub fn friedman(blocks: &[Vec<f64>], alpha: f64) -> Option<FriedmanOutcome> {
    let n = blocks.len();
    let k = blocks.first()?.len();
    if n < 2 || k < 2 {
        return None;
    }
    let mut rank_sums = vec![0.0; k];
    let mut a = 0.0;
    for block in blocks {
        for (j, r) in block_ranks(block).into_iter().enumerate() {
            rank_sums[j] += r;
            a += r * r;
        }
    }
    let (nf, kf) = (n as f64, k as f64);
    let c = nf * kf * (kf + 1.0).powi(2) / 4.0;
    let expected = nf * (kf + 1.0) / 2.0;
    let spread: f64 = rank_sums.iter().map(|r| (r - expected).powi(2)).sum();
    let denom = a - c;
    let (statistic, p_value) = if denom <= 1e-12 {
        (0.0, 1.0)
    } else {
        let t = (kf - 1.0) * spread / denom;
        let chi = ChiSquared::new(kf - 1.0).ok()?;
        (t, 1.0 - chi.cdf(t))
    };
    let df = (nf - 1.0) * (kf - 1.0);
    let residual = (a - rank_sums.iter().map(|r| r * r).sum::<f64>() / nf).max(0.0);
    let t_crit = StudentsT::new(0.0, 1.0, df).ok()?.inverse_cdf(1.0 - alpha / 2.0);
    let critical_difference = t_crit * (2.0 * nf * residual / df).sqrt();
    Some(FriedmanOutcome { statistic, p_value, rank_sums, critical_difference })
}

/// One-sided paired sign test that `a` scores lower than `b`. Ties are dropped.
pub fn sign_test(a: &[f64], b: &[f64]) -> f64 {
    let (mut wins, mut n) = (0u64, 0u64);
    for (x, y) in a.iter().zip(b) {
        if x != y {
            n += 1;
            if x < y {
                wins += 1;
            }
        }
    }
    if n == 0 || wins == 0 {
        return 1.0;
    }
    let binom = Binomial::new(0.5, n).expect("valid binomial");
    1.0 - binom.cdf(wins - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ties_share_average_rank() {
        assert_eq!(block_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn sign_test_all_wins() {
        let p = sign_test(&[10.0; 5], &[20.0; 5]);
        assert!((p - 1.0 / 32.0).abs() < 1e-12);
        assert_eq!(sign_test(&[1.0; 5], &[1.0; 5]), 1.0);
        assert!((sign_test(&[1.0, 1.0, 3.0], &[2.0, 2.0, 2.0]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn friedman_matches_hand_computation() {
        // Three treatments, four blocks; treatment 0 always best, 2 always worst.
        let blocks = vec![vec![1.0, 2.0, 3.0]; 4];
        let f = friedman(&blocks, 0.05).unwrap();
        assert_eq!(f.rank_sums, vec![4.0, 8.0, 12.0]);
        // Classic formula 12/(n k (k+1)) Σ R² − 3 n (k+1) = 12/48·224 − 48 = 8.
        assert!((f.statistic - 8.0).abs() < 1e-12);
        assert!((f.p_value - (-4.0f64).exp()).abs() < 1e-9);
        assert_eq!(f.critical_difference, 0.0);
    }

    #[test]
    fn identical_treatments_are_not_rejected() {
        let f = friedman(&vec![vec![5.0; 4]; 6], 0.05).unwrap();
        assert_eq!(f.p_value, 1.0);
    }

    proptest! {
        #[test]
        fn ranks_sum_to_triangular(scores in prop::collection::vec(0u8..5, 1..12)) {
            let s: Vec<f64> = scores.iter().map(|&v| v as f64).collect();
            let k = s.len() as f64;
            let total: f64 = block_ranks(&s).iter().sum();
            prop_assert!((total - k * (k + 1.0) / 2.0).abs() < 1e-9);
        }

        #[test]
        fn friedman_p_in_unit_interval(raw in prop::collection::vec(prop::collection::vec(0u8..4, 4), 2..8)) {
            let blocks: Vec<Vec<f64>> = raw.iter().map(|b| b.iter().map(|&v| v as f64).collect()).collect();
            let f = friedman(&blocks, 0.05).unwrap();
            prop_assert!((0.0..=1.0).contains(&f.p_value));
            prop_assert!(f.critical_difference >= 0.0);
        }
    }
}
