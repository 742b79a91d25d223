use std::ops::RangeInclusive;

use crate::error::{Error, Result};

/// Linearly weighted Cohen's kappa, with disagreement weight `|i - j| / (c - 1)`.
///
/// When both raters put every item in one shared category the expected
/// disagreement is zero as well, and agreement is reported as perfect (1).
pub fn weighted_kappa(a: &[u32], b: &[u32], categories: RangeInclusive<u32>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!("{} ratings against {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (lo, hi) = (*categories.start(), *categories.end());
    if hi <= lo {
        return Err(Error::InvalidArgument("need at least two categories".into()));
    }
    let c = (hi - lo + 1) as usize;
    let idx = |r: u32| {
        if categories.contains(&r) {
            Ok((r - lo) as usize)
        } else {
            Err(Error::InvalidArgument(format!("rating {r} outside {lo}..={hi}")))
        }
    };
    let w = |i: usize, j: usize| i.abs_diff(j) as f64 / (c - 1) as f64;
    let n = a.len() as f64;
    let mut pa = vec![0.0; c];
    let mut pb = vec![0.0; c];
    let mut observed = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let (i, j) = (idx(x)?, idx(y)?);
        pa[i] += 1.0 / n;
        pb[j] += 1.0 / n;
        observed += w(i, j) / n;
    }
    let mut expected = 0.0;
    for i in 0..c {
        for j in 0..c {
            expected += pa[i] * pb[j] * w(i, j);
        }
    }
    if expected == 0.0 {
        return Ok(if observed == 0.0 { 1.0 } else { 0.0 });
    }
    Ok(1.0 - observed / expected)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        assert_eq!(weighted_kappa(&[1, 1], &[5, 5], 1..=5).unwrap(), 0.0);
        assert_eq!(weighted_kappa(&[1, 2, 3], &[1, 2, 3], 1..=5).unwrap(), 1.0);
        assert_eq!(weighted_kappa(&[3, 3], &[3, 3], 1..=5).unwrap(), 1.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(weighted_kappa(&[1], &[1, 2], 1..=5).is_err());
        assert!(weighted_kappa(&[6], &[1], 1..=5).is_err());
        assert!(weighted_kappa(&[1], &[1], 1..=1).is_err());
    }
}
