use serde::{Deserialize, Serialize};

use super::{check_samples, FitError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailStats {
    pub skewness: f64,
    pub cv: f64,
    pub p90_over_p50: f64,
    pub p99_over_p50: f64,
    /// Share of the total held by the largest ⌈0.1 n⌉ samples.
    pub top10_share: f64,
}

/// Nearest-rank quantile: the `⌈p·n⌉`-th smallest element of `sorted`.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn tail_stats(samples: &[f64]) -> Result<TailStats, FitError> {
    check_samples(samples, 10)?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let m2 = sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m3 = sorted.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
    // relative guard so float noise on constant data reads as zero spread
    let spread = m2 > (1e-12 * mean).powi(2);
    let skewness = if spread { m3 / m2.powf(1.5) } else { 0.0 };
    let cv = if spread { m2.sqrt() / mean } else { 0.0 };
    let p50 = nearest_rank(&sorted, 0.5);
    let top_k = (0.1 * n).ceil() as usize;
    let top: f64 = sorted[sorted.len() - top_k..].iter().sum();
    let total: f64 = sorted.iter().sum();
    Ok(TailStats {
        skewness,
        cv,
        p90_over_p50: nearest_rank(&sorted, 0.9) / p50,
        p99_over_p50: nearest_rank(&sorted, 0.99) / p50,
        top10_share: top / total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailLawFit {
    /// Estimated exponent in `P(L > n) ∝ n^{−α}`.
    pub alpha_hat: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_tail_points: usize,
}

const MIN_TAIL_POINTS: usize = 5;
/// Evaluation points per decade of `n`.
const POINTS_PER_DECADE: f64 = 10.0;
/// Survival counts below this are too noisy to regress on.
const MIN_TAIL_COUNT: usize = 50;
pub const MIN_TAIL_SAMPLES: usize = 10_000;

/// Least-squares fit of `ln S = intercept − α ln n` to `(n, S(n))` points.
pub fn fit_loglog(points: &[(f64, f64)]) -> Result<TailLawFit, FitError> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(n, s)| *n > 0.0 && *s > 0.0)
        .map(|(n, s)| (n.ln(), s.ln()))
        .collect();
    if pts.len() < MIN_TAIL_POINTS {
        return Err(FitError::InsufficientTail { usable: pts.len() });
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(TailLawFit { alpha_hat: -slope, intercept, r_squared, n_tail_points: pts.len() })
}

/// Empirical survival `S(n) = #{L > n}/N` at log-spaced `n ≥ n_min`
/// (while at least 50 lengths exceed `n`), regressed on log-log axes.
pub fn fit_tail_slope(lengths: &[u64], n_min: u64) -> Result<TailLawFit, FitError> {
    if lengths.len() < MIN_TAIL_SAMPLES {
        return Err(FitError::InsufficientData { needed: MIN_TAIL_SAMPLES, got: lengths.len() });
    }
    if n_min < 1 {
        return Err(FitError::Domain("n_min must be ≥ 1".into()));
    }
    let mut sorted = lengths.to_vec();
    sorted.sort_unstable();
    let total = sorted.len();
    let mut points = Vec::new();
    let mut last = 0u64;
    for k in 0.. {
        let n = (n_min as f64 * 10f64.powf(k as f64 / POINTS_PER_DECADE)).round() as u64;
        if n == last {
            continue;
        }
        last = n;
        let above = total - sorted.partition_point(|&l| l <= n);
        if above < MIN_TAIL_COUNT {
            break;
        }
        points.push((n as f64, above as f64 / total as f64));
    }
    fit_loglog(&points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_data() {
        let s = tail_stats(&[7.0; 20]).unwrap();
        assert_eq!(s.skewness, 0.0);
        assert_eq!(s.cv, 0.0);
        assert_eq!(s.p90_over_p50, 1.0);
        assert_eq!(s.p99_over_p50, 1.0);
        assert!((s.top10_share - 0.1).abs() < 1e-12);
    }

    #[test]
    fn hand_arithmetic_top_share() {
        let mut xs = vec![1.0; 9];
        xs.push(91.0);
        let s = tail_stats(&xs).unwrap();
        assert!((s.top10_share - 0.91).abs() < 1e-12);
    }

    #[test]
    fn tail_stats_needs_ten() {
        assert!(matches!(tail_stats(&[1.0; 9]), Err(FitError::InsufficientData { .. })));
    }

    #[test]
    fn nearest_rank_definition() {
        let xs: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(nearest_rank(&xs, 0.5), 5.0);
        assert_eq!(nearest_rank(&xs, 0.9), 9.0);
        assert_eq!(nearest_rank(&xs, 0.91), 10.0);
        assert_eq!(nearest_rank(&xs, 0.0), 1.0);
    }

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = (0..30).map(|k| {
            let n = 10f64.powf(1.0 + k as f64 / 10.0);
            (n, n.powi(-2))
        }).collect();
        let f = fit_loglog(&pts).unwrap();
        assert!((f.alpha_hat - 2.0).abs() < 1e-6);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_tail_points() {
        assert!(matches!(fit_loglog(&[(1.0, 0.5), (2.0, 0.25)]), Err(FitError::InsufficientTail { usable: 2 })));
        // all mass at 1: nothing survives past n_min
        assert!(matches!(fit_tail_slope(&vec![1u64; 10_000], 1), Err(FitError::InsufficientTail { .. })));
        assert!(matches!(fit_tail_slope(&[5u64; 10], 1), Err(FitError::InsufficientData { .. })));
    }
}
