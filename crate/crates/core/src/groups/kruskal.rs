use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

pub const MIN_GROUP_SIZE: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KruskalWallis {
    /// Tie-corrected H statistic.
    pub h: f64,
    pub p: f64,
    pub df: usize,
    pub n: usize,
}

/// Mid-ranks (1-based) of `values`, ties sharing their average rank.
/// Also returns `sum(t^3 - t)` over tie groups.
pub fn midranks(values: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        let t = (j - i) as f64;
        ties += t * t * t - t;
        i = j;
    }
    (ranks, ties)
}

/// Kruskal-Wallis H test across groups, p from the chi-squared
/// distribution with `groups - 1` degrees of freedom.
pub fn kruskal_wallis(groups: &[&[f64]]) -> Result<KruskalWallis> {
    if let Some(g) = groups.iter().find(|g| g.len() < MIN_GROUP_SIZE) {
        return Err(Error::TooFewSamples {
            required: MIN_GROUP_SIZE,
            got: g.len(),
        });
    }
    kruskal_wallis_unchecked(groups)
}

/// Same statistic without the minimum group size; the chi-squared p value
/// is a poor approximation for groups smaller than five.
pub fn kruskal_wallis_unchecked(groups: &[&[f64]]) -> Result<KruskalWallis> {
    if groups.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 groups, got {}",
            groups.len()
        )));
    }
    if groups.iter().any(|g| g.is_empty()) {
        return Err(Error::TooFewSamples {
            required: 1,
            got: 0,
        });
    }
    let all: Vec<f64> = groups.iter().flat_map(|g| g.iter().copied()).collect();
    if all.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidParameter("NaN value".into()));
    }
    let n = all.len();
    let df = groups.len() - 1;
    let nf = n as f64;
    let (ranks, ties) = midranks(&all);
    let correction = 1.0 - ties / (nf * nf * nf - nf);
    if correction <= 0.0 {
        return Ok(KruskalWallis {
            h: 0.0,
            p: 1.0,
            df,
            n,
        });
    }
    let mut start = 0;
    let mut s = 0.0;
    for g in groups {
        let r: f64 = ranks[start..start + g.len()].iter().sum();
        s += r * r / g.len() as f64;
        start += g.len();
    }
    let h = ((12.0 / (nf * (nf + 1.0)) * s - 3.0 * (nf + 1.0)) / correction).max(0.0);
    let chi = ChiSquared::new(df as f64).expect("positive degrees of freedom");
    let p = chi.sf(h).clamp(0.0, 1.0);
    Ok(KruskalWallis { h, p, df, n })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_ranked_groups_of_three() {
        // ranks equal the values: R = 6, 15, 24, N = 9
        // H = 12/(9*10) * (36 + 225 + 576)/3 - 3*10 = 7.2
        let r = kruskal_wallis_unchecked(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], &[7.0, 8.0, 9.0]])
            .unwrap();
        assert!((r.h - 7.2).abs() < 1e-12);
        assert!((r.p - (-3.6f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn hand_ranked_groups_of_five() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [6.0, 7.0, 8.0, 9.0, 10.0];
        let c = [11.0, 12.0, 13.0, 14.0, 15.0];
        let r = kruskal_wallis(&[&a, &b, &c]).unwrap();
        // ranks 1..15, R = 15, 40, 65, N = 15
        let expected = 12.0 / (15.0 * 16.0) * (225.0 + 1600.0 + 4225.0) / 5.0 - 48.0;
        assert!((r.h - expected).abs() < 1e-12);
        assert!((r.h - 12.5).abs() < 1e-12);
        assert_eq!(r.df, 2);
    }

    #[test]
    fn identical_values_give_h_zero() {
        let a = [3.0; 6];
        let r = kruskal_wallis(&[&a, &a]).unwrap();
        assert_eq!((r.h, r.p), (0.0, 1.0));
    }

    #[test]
    fn small_groups_are_rejected() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!(matches!(
            kruskal_wallis(&[&a, &b]),
            Err(Error::TooFewSamples { got: 4, .. })
        ));
        assert!(kruskal_wallis(&[&b]).is_err());
    }

    #[test]
    fn midranks_average_ties() {
        let (r, ties) = midranks(&[10.0, 20.0, 10.0, 30.0, 20.0, 20.0]);
        assert_eq!(r, vec![1.5, 4.0, 1.5, 6.0, 4.0, 4.0]);
        assert_eq!(ties, 6.0 + 24.0);
    }
}
