use std::path::Path;
use std::process::{Command, Output};

fn tailsched(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tailsched"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn invalid_alpha_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tailsched(&["tail-check", "--alpha", "0"], tmp.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha"));
}

#[test]
fn failed_tail_check_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tailsched(&["tail-check", "--alpha", "4", "--n", "10000"], tmp.path());
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn passing_tail_check_writes_summary_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tailsched(&["tail-check", "--alpha", "1.5", "--n", "200000"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let s: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("tail_check.json")).unwrap()).unwrap();
    assert_eq!(s["passed"], true);
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("run.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "tail-check");
    assert_eq!(m["config_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn missing_trace_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tailsched(&["simulate", "--trace", "/nonexistent/trace.jsonl"], tmp.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn unknown_override_path_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tailsched(&["simulate", "--set", "engine.no_such_field=1"], tmp.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn repeat_sweep_requires_the_baseline() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tailsched(&["repeat-sweep", "--reps", "5,10"], tmp.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn simulate_writes_report_events_and_heatmap() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tailsched(
        &["simulate", "--policy", "fcfs", "--svg", "--set", "workload.n_requests=100", "--set", "workload.rps=5"],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["report.json", "events.csv", "heatmap.csv", "heatmap.svg", "run.json"] {
        assert!(tmp.path().join(f).is_file(), "missing {f}");
    }
    let events = std::fs::read_to_string(tmp.path().join("events.csv")).unwrap();
    assert_eq!(events.lines().count(), 101);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["policy"], "fcfs");
    assert_eq!(report["n_completed"], 100);
}

#[test]
fn fit_reads_long_form_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("lengths.csv");
    let mut csv = String::from("prompt_id,length\n");
    for p in ["a", "b"] {
        for i in 1..=60u64 {
            // deterministic spread over two decades
            let x = (10.0 * (i as f64 / 61.0 * 4.6).exp()).round() as u64;
            csv.push_str(&format!("{p},{x}\n"));
        }
    }
    std::fs::write(&input, csv).unwrap();
    let out = tmp.path().join("out");
    let o = tailsched(&["fit", input.to_str().unwrap(), "--family", "all"], &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let lines = std::fs::read_to_string(out.join("fit.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 8);
    assert!(String::from_utf8_lossy(&o.stdout).contains("lognormal"));

    let single = tmp.path().join("single");
    let o = tailsched(&["fit", input.to_str().unwrap()], &single);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("KS pass rate (p > 0.05)"));
}

#[test]
fn empty_fit_input_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("empty.jsonl");
    std::fs::write(&input, "").unwrap();
    let o = tailsched(&["fit", input.to_str().unwrap()], &tmp.path().join("out"));
    assert_eq!(code(&o), 2);
}
