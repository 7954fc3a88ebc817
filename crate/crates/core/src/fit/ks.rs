use serde::{Deserialize, Serialize};

use super::FitError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    /// `D = sup |F_n − F|`
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

impl KsResult {
    /// Fit accepted at the 5% level.
    pub fn passes(&self) -> bool {
        self.p_value > 0.05
    }
}

const SERIES_TERMS: usize = 100;
const SERIES_EPS: f64 = 1e-12;

/// Kolmogorov survival function `Q(λ) = P(K > λ)`.
///
/// Uses the alternating series `2 Σ (−1)^{k−1} e^{−2k²λ²}` for `λ ≥ 1.18`
/// and the equivalent theta-function form
/// `1 − √(2π)/λ · Σ e^{−(2k−1)²π²/(8λ²)}` below that, where the
/// alternating series converges too slowly.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    let q = if lambda < 1.18 {
        let mut s = 0.0;
        for k in 1..=SERIES_TERMS {
            let m = (2 * k - 1) as f64;
            let term = (-m * m * pi2 / (8.0 * lambda * lambda)).exp();
            s += term;
            if term < SERIES_EPS * s {
                break;
            }
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s
    } else {
        let mut s = 0.0;
        let mut sign = 1.0;
        for k in 1..=SERIES_TERMS {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            s += sign * term;
            sign = -sign;
            if term < SERIES_EPS {
                break;
            }
        }
        2.0 * s
    };
    q.clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov test of `samples` against `cdf`.
///
/// The p-value uses the asymptotic Kolmogorov distribution at
/// `λ = (√n + 0.12 + 0.11/√n) · D`.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<KsResult, FitError> {
    if samples.len() < 5 {
        return Err(FitError::InsufficientData { needed: 5, got: samples.len() });
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(FitError::Domain("NaN sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        let above = (i + 1) as f64 / n - f;
        let below = f - i as f64 / n;
        d = d.max(above).max(below);
    }
    let d = d.clamp(0.0, 1.0);
    let sn = n.sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    Ok(KsResult { statistic: d, p_value: kolmogorov_survival(lambda), n: sorted.len() })
}
