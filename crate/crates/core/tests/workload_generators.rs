use tailsched::fit::{fit_tail_slope, tail_stats};
use tailsched::workload::*;

#[test]
fn tail_slope_recovers_alpha_1_5() {
    let ls = gen_termination_mixture(&TailLawSpec { alpha: 1.5, n: 1_000_000, seed: 3 }).unwrap();
    let fit = fit_tail_slope(&ls, 10).unwrap();
    assert!((1.35..=1.65).contains(&fit.alpha_hat), "{fit:?}");
    assert!(fit.r_squared > 0.99);
}

#[test]
fn tail_constant_at_alpha_one() {
    // P(L > n) = α B(α, n + 1) → n/(n + 1) · n^{-1}; n^α S(n) → Γ(2) = 1
    let ls = gen_termination_mixture(&TailLawSpec { alpha: 1.0, n: 1_000_000, seed: 4 }).unwrap();
    let s = ls.iter().filter(|&&l| l > 100).count() as f64 / ls.len() as f64;
    let scaled = 100.0 * s;
    assert!((scaled - 1.0).abs() < 0.2, "{scaled}");
}

#[test]
fn termination_rates_follow_beta_alpha_one() {
    for &alpha in &[0.5, 1.0, 2.0] {
        let ts = gen_trajectories(&TailLawSpec { alpha, n: 1_000_000, seed: 5 }).unwrap();
        let mean = ts.iter().map(|t| t.rate).sum::<f64>() / ts.len() as f64;
        let want = alpha / (alpha + 1.0);
        assert!(((mean - want) / want).abs() < 0.01, "alpha {alpha}: {mean} vs {want}");
        assert!(ts.iter().all(|t| t.length >= 1 && t.rate > 0.0 && t.rate <= 1.0));
    }
}

#[test]
fn mixture_is_seed_deterministic() {
    let spec = TailLawSpec { alpha: 1.2, n: 1000, seed: 11 };
    assert_eq!(gen_termination_mixture(&spec).unwrap(), gen_termination_mixture(&spec).unwrap());
}

#[test]
fn pooled_workload_is_heavy_tailed() {
    let spec = WorkloadSpec {
        n_requests: 100_000,
        mu_range: (3.0, 5.0),
        sigma_range: (0.5, 1.2),
        nu: 3.5,
        seed: 1,
        ..Default::default()
    };
    let w = gen_logt_workload(&spec).unwrap();
    let lens: Vec<f64> = w.iter().map(|r| r.true_output_tokens as f64).collect();
    assert!(tail_stats(&lens).unwrap().cv > 1.0);
    assert!(w.windows(2).all(|p| p[0].arrival_s <= p[1].arrival_s));
    assert!(w.iter().all(|r| r.true_output_tokens >= 1 && r.arrival_s >= 0.0));
    assert!(w.iter().all(|r| (16..=512).contains(&r.prompt_tokens)));
}

#[test]
fn poisson_mean_gap() {
    let a = poisson_arrivals(100.0, 100_000, 8).unwrap();
    let mean_gap = a.last().unwrap() / a.len() as f64;
    assert!((mean_gap - 0.01).abs() < 0.0005, "{mean_gap}");
}

#[test]
fn trace_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.jsonl");
    let w = gen_logt_workload(&WorkloadSpec { n_requests: 3, seed: 2, ..Default::default() }).unwrap();
    save_trace(&w, &path).unwrap();
    assert_eq!(load_trace(&path, None, 0).unwrap(), w);
    let bytes = std::fs::read(&path).unwrap();
    assert!(bytes.ends_with(b"\n"));
    assert!(!bytes.contains(&b'\r'));
}
