//! Detection metrics over scores where higher means more in-distribution.

use crate::error::{Error, Result};

fn check_scores(scores: &[f64], what: &str) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::invalid(format!("{what} scores are empty")));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid(format!("{what} scores contain NaN")));
    }
    Ok(())
}

/// Probability that a random ID score exceeds a random OOD score, ties
/// counting one half. Computed from tie groups of the merged ranking.
pub fn auroc(id_scores: &[f64], ood_scores: &[f64]) -> Result<f64> {
    check_scores(id_scores, "ID")?;
    check_scores(ood_scores, "OOD")?;
    let mut merged: Vec<(f64, bool)> = id_scores
        .iter()
        .map(|&s| (s, true))
        .chain(ood_scores.iter().map(|&s| (s, false)))
        .collect();
    merged.sort_by(|a, b| a.0.total_cmp(&b.0));

    // twice the Mann-Whitney U statistic, kept integral
    let mut twice_wins: u128 = 0;
    let mut ood_below: u128 = 0;
    let mut start = 0;
    while start < merged.len() {
        let mut end = start;
        while end < merged.len() && merged[end].0 == merged[start].0 {
            end += 1;
        }
        let id_here = merged[start..end].iter().filter(|e| e.1).count() as u128;
        let ood_here = (end - start) as u128 - id_here;
        twice_wins += 2 * id_here * ood_below + id_here * ood_here;
        ood_below += ood_here;
        start = end;
    }
    let pairs = 2 * id_scores.len() as u128 * ood_scores.len() as u128;
    Ok(twice_wins as f64 / pairs as f64)
}

/// Smallest `count` such that `count >= x`, ignoring float noise below 1e-9.
fn ceil_count(x: f64) -> usize {
    (x - 1e-9).ceil().max(0.0) as usize
}

/// Threshold admitting `tpr` of the ID scores: the `⌈(1 − tpr) · n⌉`-th
/// smallest score (at least the first).
pub fn percentile_threshold(id_scores: &[f64], tpr: f64) -> Result<f64> {
    check_scores(id_scores, "ID")?;
    let mut sorted = id_scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ceil_count(sorted.len() as f64 * (1.0 - tpr)).clamp(1, sorted.len());
    Ok(sorted[rank - 1])
}

/// Minimum number of ID scores for the 95% TPR threshold to be meaningful.
pub const MIN_ID_FOR_FPR95: usize = 20;

/// Fraction of OOD scores at or above the 5th-percentile ID score.
pub fn fpr_at_95_tpr(id_scores: &[f64], ood_scores: &[f64]) -> Result<f64> {
    if id_scores.len() < MIN_ID_FOR_FPR95 {
        return Err(Error::invalid(format!(
            "FPR95 needs at least {MIN_ID_FOR_FPR95} ID scores, got {}",
            id_scores.len()
        )));
    }
    check_scores(ood_scores, "OOD")?;
    let lambda = percentile_threshold(id_scores, 0.95)?;
    let accepted = ood_scores.iter().filter(|&&s| s >= lambda).count();
    Ok(accepted as f64 / ood_scores.len() as f64)
}

/// Largest threshold λ such that at least `target_tpr` of `id_scores` are `>= λ`.
pub fn calibrate_lambda(id_scores: &[f64], target_tpr: f64) -> Result<f64> {
    check_scores(id_scores, "ID")?;
    if !(target_tpr > 0.0 && target_tpr <= 1.0) {
        return Err(Error::invalid(format!("target TPR {target_tpr} outside (0, 1]")));
    }
    let mut sorted = id_scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // λ = j-th smallest keeps n − j + 1 scores; the largest admissible j
    let dropped = (n as f64 * (1.0 - target_tpr) + 1e-9).floor() as usize;
    Ok(sorted[dropped.min(n - 1)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[3.0, 1.0], &[2.0, 0.0]).unwrap(), 0.75);
        assert_eq!(auroc(&[5.0, 6.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(auroc(&[1.0, 2.0, 2.0], &[2.0, 1.0, 2.0]).unwrap(), 0.5);
        assert!(auroc(&[], &[1.0]).is_err());
        assert!(auroc(&[1.0], &[f64::NAN]).is_err());
    }

    #[test]
    fn fpr_examples() {
        let id: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile_threshold(&id, 0.95).unwrap(), 5.0);
        let fpr = fpr_at_95_tpr(&id, &[0.5, 5.5, 200.0]).unwrap();
        assert!((fpr - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(fpr_at_95_tpr(&id, &[-1.0, 0.0, 0.99]).unwrap(), 0.0);
        assert_eq!(fpr_at_95_tpr(&id, &[101.0, 500.0]).unwrap(), 1.0);
        assert!(fpr_at_95_tpr(&id[..19], &[1.0]).is_err());
    }

    #[test]
    fn calibration_examples() {
        let id: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(calibrate_lambda(&id, 0.95).unwrap(), 2.0);
        assert_eq!(calibrate_lambda(&id, 1.0).unwrap(), 1.0);
        assert_eq!(calibrate_lambda(&[4.2], 0.95).unwrap(), 4.2);
        assert!(calibrate_lambda(&[], 0.95).is_err());
    }

    #[test]
    fn calibrated_lambda_is_maximal() {
        let id: Vec<f64> = (0..37).map(|i| ((i * 13) % 37) as f64 * 0.5).collect();
        for target in [0.5, 0.8, 0.9, 0.95, 0.99, 1.0] {
            let lambda = calibrate_lambda(&id, target).unwrap();
            let frac = |l: f64| id.iter().filter(|&&s| s >= l).count() as f64 / id.len() as f64;
            assert!(frac(lambda) >= target);
            let next = id.iter().copied().filter(|&s| s > lambda).fold(f64::INFINITY, f64::min);
            if next.is_finite() {
                assert!(frac(next) < target);
            }
        }
    }
}
