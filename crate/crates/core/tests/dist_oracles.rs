use proptest::prelude::*;
use tailsched::dist::*;
use tailsched_oracle as oracle;

#[test]
fn oracle_quadrature_of_gaussian() {
    let v = oracle::integrate_real_line(|x| (-0.5 * x * x).exp(), 1e-12);
    assert!((v - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-9);
}

#[test]
fn oracle_permutation_search() {
    // SPT order 1, 2, 3 → completions 1, 3, 6
    assert!((oracle::best_mean_flow_time(&[3.0, 1.0, 2.0]) - 10.0 / 3.0).abs() < 1e-12);
}

#[test]
fn t_pdf_matches_direct_formula() {
    let got = t_pdf(1.0, 3.5).unwrap();
    let want = oracle::t_pdf_ref(1.0, 3.5);
    assert!((got - want).abs() < 1e-14, "{got} vs {want}");
}

#[test]
fn t_cdf_matches_quadrature() {
    let quad = 0.5 + oracle::integrate(|y| oracle::t_pdf_ref(y, 3.5), 0.0, 2.0, 1e-13);
    let got = t_cdf(2.0, 3.5).unwrap();
    assert!((got - quad).abs() < 1e-10, "{got} vs {quad}");
}

#[test]
fn t_cdf_matches_statrs_on_grid() {
    for &nu in &[0.5, 1.0, 2.0, 3.5, 10.0, 100.0] {
        for i in -40..=40 {
            let y = i as f64 * 0.5;
            let d = (t_cdf(y, nu).unwrap() - oracle::t_cdf_ref(y, nu)).abs();
            assert!(d < 1e-12, "nu={nu} y={y} diff={d}");
        }
    }
}

#[test]
fn t_pdf_integrates_to_one() {
    for &nu in &[1.0, 2.0, 3.5, 10.0] {
        let v = oracle::integrate_real_line(|y| t_pdf(y, nu).unwrap(), 1e-10);
        assert!((v - 1.0).abs() < 1e-6, "nu={nu}: {v}");
    }
}

#[test]
fn logt_pdf_integrates_to_one() {
    let p = LogTParams::new(4.0, 0.8, 3.5).unwrap();
    // integrate over u = ln x: f(e^u) e^u
    let v = oracle::integrate_real_line(
        |u| {
            let x = u.exp();
            if x > 0.0 && x.is_finite() {
                logt_pdf(x, &p).unwrap() * x
            } else {
                0.0
            }
        },
        1e-10,
    );
    assert!((v - 1.0).abs() < 1e-6, "{v}");
}

#[test]
fn logt_pdf_change_of_variables() {
    let p = LogTParams::new(4.0, 0.8, 3.5).unwrap();
    let z = (100f64.ln() - 4.0) / 0.8;
    let want = oracle::t_pdf_ref(z, 3.5) / (0.8 * 100.0);
    let got = logt_pdf(100.0, &p).unwrap();
    assert!(((got - want) / want).abs() < 1e-13);
}

#[test]
fn t_quantile_matches_statrs() {
    for &nu in &[1.0, 3.5, 10.0] {
        for &p in &[0.001, 0.05, 0.3, 0.9, 0.999] {
            let d = (t_quantile(p, nu).unwrap() - oracle::t_quantile_ref(p, nu)).abs();
            assert!(d < 1e-7, "nu={nu} p={p} diff={d}");
        }
    }
}

#[test]
fn psi_at_infinity_matches_fresh_monte_carlo() {
    let p = LogTParams::new(0.0, 0.3, 3.5).unwrap();
    let mc = McContext::with_defaults(3.5).unwrap();
    let got = psi(f64::INFINITY, &p, &mc).unwrap();
    // x_max far out so censoring is negligible
    let (want, se) = oracle::censored_expectation_brute_mc(0.0, 0.3, 3.5, 1e12, 200_000, 777);
    // the two estimates carry independent errors of similar size
    let combined = (se * se + (se * (200_000f64 / 10_000.0).sqrt()).powi(2)).sqrt();
    assert!((got - want).abs() < 3.0 * combined, "{got} vs {want} ± {combined}");
}

#[test]
fn censored_expectation_matches_quadrature() {
    let mc = McContext::with_defaults(3.5).unwrap();
    let c = CensoredLogT::new(LogTParams::new(4.0, 0.8, 3.5).unwrap(), 512.0).unwrap();
    let got = censored_expectation(&c, &mc).unwrap();
    let want = oracle::censored_expectation_quad(4.0, 0.8, 3.5, 512.0);
    assert!(((got - want) / want).abs() < 0.01, "{got} vs {want}");
}

#[test]
fn censored_cvar_matches_brute_force() {
    let mc = McContext::with_defaults(3.5).unwrap();
    let c = CensoredLogT::new(LogTParams::new(4.0, 0.8, 3.5).unwrap(), 512.0).unwrap();
    let got = censored_cvar(&c, 0.9, &mc).unwrap();
    let want = oracle::censored_cvar_brute_mc(4.0, 0.8, 3.5, 512.0, 0.9, 10_000_000, 99);
    assert!(((got - want) / want).abs() < 0.02, "{got} vs {want}");
}

#[test]
fn cvar_monotone_in_level() {
    let mc = McContext::with_defaults(3.5).unwrap();
    for &(mu, s, x) in &[(2.0, 0.3, 256.0), (4.0, 0.8, 512.0), (6.0, 1.5, 2048.0), (3.0, 1.2, 2048.0)] {
        let c = CensoredLogT::new(LogTParams::new(mu, s, 3.5).unwrap(), x).unwrap();
        let e = censored_expectation(&c, &mc).unwrap();
        let mut prev = censored_cvar(&c, 0.0, &mc).unwrap();
        assert_eq!(prev, e);
        for i in 1..100 {
            let v = censored_cvar(&c, i as f64 / 100.0, &mc).unwrap();
            assert!(v >= prev, "({mu},{s},{x}) alpha={} {v} < {prev}", i as f64 / 100.0);
            assert!(v >= e && v <= x);
            prev = v;
        }
    }
}

proptest! {
    #[test]
    fn t_cdf_reflection(y in -50.0f64..50.0, nu in 0.5f64..30.0) {
        let s = t_cdf(y, nu).unwrap() + t_cdf(-y, nu).unwrap();
        prop_assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn t_cdf_non_decreasing(y in -50.0f64..50.0, dy in 0.0f64..5.0, nu in 0.5f64..30.0) {
        prop_assert!(t_cdf(y, nu).unwrap() <= t_cdf(y + dy, nu).unwrap());
    }

    // For larger ν the far tail is too flat for double precision to pin y.
    #[test]
    fn quantile_inverts_cdf(y in -10.0f64..10.0, nu in 0.5f64..10.0) {
        let p = t_cdf(y, nu).unwrap();
        prop_assume!(p > 0.0 && p < 1.0);
        let back = t_quantile(p, nu).unwrap();
        prop_assert!((back - y).abs() < 1e-8, "y={} back={}", y, back);
    }

    #[test]
    fn quantile_residual(p in 1e-6f64..(1.0 - 1e-6), nu in 0.5f64..30.0) {
        let y = t_quantile(p, nu).unwrap();
        prop_assert!((t_cdf(y, nu).unwrap() - p).abs() <= 1e-10);
    }

    #[test]
    fn censored_bounds(mu in 0.0f64..8.0, sigma in 0.05f64..2.0, x_max in 16.0f64..4096.0, alpha in 0.0f64..0.99) {
        let mc = McContext::student_t(3.5, 2_000, 42).unwrap();
        let c = CensoredLogT::new(LogTParams::new(mu, sigma, 3.5).unwrap(), x_max).unwrap();
        let e = censored_expectation(&c, &mc).unwrap();
        let v = censored_cvar(&c, alpha, &mc).unwrap();
        prop_assert!(e > 0.0 && e <= x_max);
        prop_assert!(v >= e && v <= x_max);
    }
}
