use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::{Error, Result};

/// Largest number of nonzero differences handled by exact enumeration.
pub const EXACT_LIMIT: usize = 20;
pub const MIN_NONZERO: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    /// `a` tends to exceed `b`.
    Greater,
    Less,
    TwoSided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of the ranks of positive differences `a − b`.
    pub statistic: f64,
    pub p_value: f64,
    pub side: Alternative,
    pub n_nonzero: usize,
    pub exact: bool,
}

/// Mid-ranks of `values` (1-based), ties sharing the average rank.
fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Counts of sign assignments by doubled positive-rank sum.
fn exact_counts(doubled: &[usize]) -> Vec<f64> {
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0.0; max + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in doubled {
        for s in (0..=reach).rev() {
            if counts[s] > 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

/// Wilcoxon signed-rank test on paired samples.
///
/// Zero differences are dropped and tied magnitudes get mid-ranks. Up to
/// [`EXACT_LIMIT`] nonzero differences the p-value comes from the exact
/// permutation distribution; above that a normal approximation with tie and
/// continuity corrections is used.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64], side: Alternative) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("paired samples of lengths {} and {}", a.len(), b.len())));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidArgument("non-finite difference".into()));
    }
    let n = diffs.len();
    if n == 0 {
        return Err(Error::InvalidArgument("all paired differences are zero".into()));
    }
    if n < MIN_NONZERO {
        return Err(Error::InvalidArgument(format!(
            "{n} nonzero differences; at least {MIN_NONZERO} are required"
        )));
    }
    let magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = mid_ranks(&magnitudes);
    let statistic: f64 = ranks.iter().zip(&diffs).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();

    let (p_greater, p_less, exact) = if n <= EXACT_LIMIT {
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let counts = exact_counts(&doubled);
        let observed = (2.0 * statistic).round() as usize;
        let total = 2f64.powi(n as i32);
        let upper: f64 = counts[observed..].iter().sum();
        let lower: f64 = counts[..=observed].iter().sum();
        (upper / total, lower / total, true)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let mut tie_term = 0.0;
        let mut sorted = magnitudes.clone();
        sorted.sort_by(f64::total_cmp);
        let mut i = 0;
        while i < sorted.len() {
            let mut j = i + 1;
            while j < sorted.len() && sorted[j] == sorted[i] {
                j += 1;
            }
            let t = (j - i) as f64;
            tie_term += t * t * t - t;
            i = j;
        }
        let sd = (nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0).sqrt();
        let normal = Normal::standard();
        let p_greater = normal.sf((statistic - mean - 0.5) / sd);
        let p_less = normal.cdf((statistic - mean + 0.5) / sd);
        (p_greater, p_less, false)
    };
    let p_value = match side {
        Alternative::Greater => p_greater,
        Alternative::Less => p_less,
        Alternative::TwoSided => (2.0 * p_greater.min(p_less)).min(1.0),
    };
    Ok(WilcoxonResult {
        statistic,
        p_value,
        side,
        n_nonzero: n,
        exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_positive_five() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [0.0; 5];
        let r = wilcoxon_signed_rank(&a, &b, Alternative::Greater).unwrap();
        assert_eq!(r.p_value, 1.0 / 32.0);
        assert_eq!(r.statistic, 15.0);
        assert!(r.exact);
        assert_eq!(wilcoxon_signed_rank(&a, &b, Alternative::Less).unwrap().p_value, 1.0);
    }

    #[test]
    fn symmetric_differences() {
        let d = [1.0, -1.0, 2.0, -2.0, 3.0, -3.0];
        let r = wilcoxon_signed_rank(&d, &[0.0; 6], Alternative::TwoSided).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.statistic, 10.5);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(wilcoxon_signed_rank(&[1.0; 6], &[1.0; 6], Alternative::TwoSided).is_err());
        assert!(wilcoxon_signed_rank(&[1.0, 2.0], &[0.0; 2], Alternative::TwoSided).is_err());
        assert!(wilcoxon_signed_rank(&[1.0, 2.0], &[0.0; 3], Alternative::TwoSided).is_err());
    }

    #[test]
    fn normal_branch_is_close_to_exact_at_the_boundary() {
        let a: Vec<f64> = (0..20).map(|i| if i % 3 == 0 { -(i as f64) - 1.0 } else { i as f64 + 1.0 }).collect();
        let b = vec![0.0; 20];
        let exact = wilcoxon_signed_rank(&a, &b, Alternative::Greater).unwrap();
        let mut more = a.clone();
        more.push(0.5);
        let approx = wilcoxon_signed_rank(&more, &[0.0; 21], Alternative::Greater).unwrap();
        assert!(!approx.exact);
        assert!((exact.p_value - approx.p_value).abs() < 0.01, "{} vs {}", exact.p_value, approx.p_value);
    }
}
