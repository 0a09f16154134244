//! Error metrics and the Wilcoxon rank-sum test.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

/// Mean squared elementwise difference.
pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::InvalidArgument("mse of empty sequences".into()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
}

/// Elementwise squared errors, the samples fed to the rank-sum test.
pub fn squared_errors(pred: &[f64], truth: &[f64]) -> Result<Vec<f64>> {
    if pred.len() != truth.len() {
        return Err(Error::InvalidArgument(format!("length mismatch: {} vs {}", pred.len(), truth.len())));
    }
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSumResult {
    pub z: f64,
    pub p: f64,
    pub significant: bool,
    pub rank_sum_x: f64,
    pub rank_sum_y: f64,
    pub tie_corrected: bool,
}

impl RankSumResult {
    /// `{z, p, significant}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "z": self.z, "p": self.p, "significant": self.significant })
    }
}

/// Midranks (1-based) of `values`, plus the tie term `sum(t^3 - t)`.
pub fn midranks(values: &[f64]) -> (Vec<f64>, f64) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && values[idx[j]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = r;
        }
        let t = (j - i) as f64;
        ties += t * t * t - t;
        i = j;
    }
    (ranks, ties)
}

/// Two-sided rank-sum test, normal approximation with tie-corrected variance
/// and no continuity correction. `z > 0` when `x` tends to be larger.
pub fn wilcoxon_rank_sum(x: &[f64], y: &[f64]) -> Result<RankSumResult> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidArgument("rank-sum test needs two nonempty samples".into()));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("NaN in rank-sum sample".into()));
    }
    let n = x.len() as f64;
    let m = y.len() as f64;
    let total = n + m;
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let rank_sum_x: f64 = ranks[..x.len()].iter().sum();
    let rank_sum_y: f64 = ranks[x.len()..].iter().sum();

    let mean = n * (total + 1.0) / 2.0;
    let var = n * m / 12.0 * ((total + 1.0) - ties / (total * (total - 1.0)));
    let (z, p) = if var > 0.0 {
        let z = (rank_sum_x - mean) / var.sqrt();
        (z, erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0))
    } else {
        (0.0, 1.0)
    };
    Ok(RankSumResult {
        z,
        p,
        significant: p < SIGNIFICANCE_LEVEL,
        rank_sum_x,
        rank_sum_y,
        tie_corrected: ties > 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mse(&[], &[]).is_err());
    }

    #[test]
    fn hand_computed_example() {
        let r = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.rank_sum_x, 6.0);
        assert_eq!(r.rank_sum_y, 15.0);
        // (6 - 10.5) / sqrt(5.25)
        assert!((r.z - (-1.963961012123931)).abs() < 1e-12);
        assert!((r.p - 0.04953461343).abs() < 1e-8);
        assert!(r.significant && !r.tie_corrected);
    }

    #[test]
    fn identical_samples() {
        let x = [1.0, 2.0, 2.0, 5.0];
        let r = wilcoxon_rank_sum(&x, &x).unwrap();
        assert_eq!(r.z, 0.0);
        assert_eq!(r.p, 1.0);
        assert!(r.tie_corrected && !r.significant);
    }

    #[test]
    fn all_tied() {
        let r = wilcoxon_rank_sum(&[3.0; 4], &[3.0; 2]).unwrap();
        assert_eq!((r.z, r.p), (0.0, 1.0));
    }

    #[test]
    fn midrank_values() {
        let (r, t) = midranks(&[10.0, 20.0, 20.0, 5.0]);
        assert_eq!(r, vec![2.0, 3.5, 3.5, 1.0]);
        assert_eq!(t, 6.0);
    }

    #[test]
    fn empty_sample_rejected() {
        assert!(wilcoxon_rank_sum(&[], &[1.0]).is_err());
        assert!(wilcoxon_rank_sum(&[1.0], &[]).is_err());
    }

    #[test]
    fn json_shape() {
        let r = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        let v = r.to_json();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys, vec!["p", "significant", "z"]);
    }

    #[test]
    fn shift_drives_p_to_zero() {
        let x: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = (0..30).map(|i| (i as f64 * 0.71).cos()).collect();
        let shifted: Vec<f64> = x.iter().map(|v| v + 100.0).collect();
        let r = wilcoxon_rank_sum(&shifted, &y).unwrap();
        // every x ranks above every y: z is at its maximum
        let zmax = (30.0 * 30.0 / 2.0) / (30.0 * 30.0 * 61.0 / 12.0f64).sqrt();
        assert!((r.z - zmax).abs() < 1e-12);
        assert!(r.p < 1e-9);
    }

    fn sample() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec((0i32..12).prop_map(|v| v as f64), 1..15)
    }

    proptest! {
        #[test]
        fn antisymmetric(x in sample(), y in sample()) {
            let a = wilcoxon_rank_sum(&x, &y).unwrap();
            let b = wilcoxon_rank_sum(&y, &x).unwrap();
            prop_assert!((a.z + b.z).abs() < 1e-12);
            prop_assert!((a.p - b.p).abs() < 1e-12);
        }

        #[test]
        fn rank_sums_total(x in sample(), y in sample()) {
            let r = wilcoxon_rank_sum(&x, &y).unwrap();
            let n = (x.len() + y.len()) as f64;
            prop_assert_eq!(r.rank_sum_x + r.rank_sum_y, n * (n + 1.0) / 2.0);
            prop_assert!((0.0..=1.0).contains(&r.p));
        }

        #[test]
        fn mse_matches_loop(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..50)) {
            let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let mut acc = 0.0;
            for i in 0..a.len() {
                let d = a[i] - b[i];
                acc += d * d;
            }
            let want = acc / a.len() as f64;
            prop_assert!((mse(&a, &b).unwrap() - want).abs() <= 1e-12 * want.max(1.0));
        }
    }
}
