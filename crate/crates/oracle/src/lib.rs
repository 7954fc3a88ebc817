//! Reference computations used by tests to check the production code.
//!
//! Everything here takes a different numerical route from the library:
//! adaptive Gauss–Kronrod quadrature instead of Monte Carlo partial
//! expectations, `statrs` special functions instead of the in-house
//! incomplete beta, and `rand_distr::StudentT` instead of the ratio sampler.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StudentT};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (val, err) = gk15(f, a, b);
    if err <= tol || depth == 0 {
        return val;
    }
    let m = 0.5 * (a + b);
    adapt(f, a, m, 0.5 * tol, depth - 1) + adapt(f, m, b, 0.5 * tol, depth - 1)
}

/// Adaptive Gauss–Kronrod (7/15) on a finite interval.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    adapt(&f, a, b, tol, 40)
}

/// `∫_{-∞}^{b} f` via `y = b − t/(1 − t)`.
pub fn integrate_to<F: Fn(f64) -> f64>(f: F, b: f64, tol: f64) -> f64 {
    let g = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let y = b - t / (1.0 - t);
        let v = f(y) / ((1.0 - t) * (1.0 - t));
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate(g, 0.0, 1.0, tol)
}

/// `∫_{a}^{∞} f` via `y = a + t/(1 − t)`.
pub fn integrate_from<F: Fn(f64) -> f64>(f: F, a: f64, tol: f64) -> f64 {
    integrate_to(|y| f(-y), -a, tol)
}

/// `∫_ℝ f`.
pub fn integrate_real_line<F: Fn(f64) -> f64>(f: F, tol: f64) -> f64 {
    integrate_to(&f, 0.0, 0.5 * tol) + integrate_from(&f, 0.0, 0.5 * tol)
}

/// Student-t density evaluated straight from the formula with `statrs`'
/// log-gamma.
pub fn t_pdf_ref(y: f64, nu: f64) -> f64 {
    let ln = ln_gamma(0.5 * (nu + 1.0))
        - ln_gamma(0.5 * nu)
        - 0.5 * (nu * std::f64::consts::PI).ln()
        - 0.5 * (nu + 1.0) * (1.0 + y * y / nu).ln();
    ln.exp()
}

pub fn t_cdf_ref(y: f64, nu: f64) -> f64 {
    StudentsT::new(0.0, 1.0, nu).unwrap().cdf(y)
}

pub fn t_quantile_ref(p: f64, nu: f64) -> f64 {
    StudentsT::new(0.0, 1.0, nu).unwrap().inverse_cdf(p)
}

/// `E[min(X, x_max)]` by quadrature of `∫_{-∞}^{y_max} e^{μ+σy} t_ν(y) dy`
/// plus the censored mass.
pub fn censored_expectation_quad(mu: f64, sigma: f64, nu: f64, x_max: f64) -> f64 {
    let y_max = (x_max.ln() - mu) / sigma;
    let body = integrate_to(|y| (mu + sigma * y).exp() * t_pdf_ref(y, nu), y_max, 1e-10 * x_max);
    body + x_max * (1.0 - t_cdf_ref(y_max, nu))
}

/// Independent brute-force CVaR: draws `n` censored lengths with a
/// different generator and estimates `E[X̃ 1{X̃ ≥ v_α}] / (1 − α)`.
pub fn censored_cvar_brute_mc(
    mu: f64,
    sigma: f64,
    nu: f64,
    x_max: f64,
    alpha: f64,
    n: usize,
    seed: u64,
) -> f64 {
    let v_alpha = (mu + sigma * t_quantile_ref(alpha, nu)).exp().min(x_max);
    let dist = StudentT::new(nu).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut acc = 0.0;
    for _ in 0..n {
        let y: f64 = dist.sample(&mut rng);
        let x = (mu + sigma * y).exp().min(x_max);
        if x >= v_alpha {
            acc += x;
        }
    }
    acc / n as f64 / (1.0 - alpha)
}

/// Brute-force `E[min(X, x_max)]` with its standard error.
pub fn censored_expectation_brute_mc(mu: f64, sigma: f64, nu: f64, x_max: f64, n: usize, seed: u64) -> (f64, f64) {
    let dist = StudentT::new(nu).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        let y: f64 = dist.sample(&mut rng);
        let x = (mu + sigma * y).exp().min(x_max);
        s += x;
        s2 += x * x;
    }
    let m = s / n as f64;
    let var = (s2 / n as f64 - m * m).max(0.0);
    (m, (var / n as f64).sqrt())
}

/// Minimum mean completion time of `jobs` on one server by exhaustive
/// permutation search (Heap's algorithm). `n ≤ 8`.
pub fn best_mean_flow_time(jobs: &[f64]) -> f64 {
    assert!(jobs.len() <= 8);
    let mut order: Vec<usize> = (0..jobs.len()).collect();
    let eval = |o: &[usize]| {
        let mut t = 0.0;
        let mut total = 0.0;
        for &i in o {
            t += jobs[i];
            total += t;
        }
        total / jobs.len() as f64
    };
    let mut best = eval(&order);
    let n = order.len();
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                order.swap(0, i);
            } else {
                order.swap(c[i], i);
            }
            best = best.min(eval(&order));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}
