use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use desync::trace::{read_trace, TraceFormat};
use tempfile::TempDir;

fn desync(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_desync"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scenario(dir: &Path, name: &str, extra: &str) -> String {
    let path = dir.join(name);
    let body = format!(
        "schema_version = 1\nn = 5\nl = 0.85\nomega = 6.283185307179586\nseed = 7\ninitial_phases = \"uniform_random\"\n{extra}"
    );
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_is_byte_identical_across_invocations() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario(dir.path(), "a.toml", "");
    for (format, ext) in [("table", "csv"), ("objects", "jsonl")] {
        let a = dir.path().join(format!("a.{ext}"));
        let b = dir.path().join(format!("b.{ext}"));
        for out in [&a, &b] {
            let o = desync(&["run", "--config", &cfg, "--out", s(out), "--format", format]);
            assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        }
        let (a, b) = (fs::read(a).unwrap(), fs::read(b).unwrap());
        assert!(!a.is_empty());
        assert_eq!(a, b);
    }
}

#[test]
fn summary_reports_convergence() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario(dir.path(), "a.toml", "");
    let out = dir.path().join("t.csv");
    let o = desync(&["run", "--config", &cfg, "--out", s(&out), "--summary"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(text.contains("converged: yes"), "{text}");
    assert!(text.contains("events: "));
    assert!(text.contains("final P: "));
    assert!(text.contains("wall time: "));

    let records = read_trace(fs::File::open(&out).unwrap(), TraceFormat::Table).unwrap();
    assert!(records.last().unwrap().p_after <= 1e-6);
}

#[test]
fn trace_goes_to_stdout_without_out() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario(dir.path(), "a.toml", "");
    let o = desync(&["run", "--config", &cfg, "--format", "objects"]);
    assert_eq!(o.status.code(), Some(0));
    let records = read_trace(o.stdout.as_slice(), TraceFormat::Objects).unwrap();
    assert!(!records.is_empty());
}

#[test]
fn zero_budget_is_non_convergence() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario(dir.path(), "a.toml", "max_events = 0\n");
    let out = dir.path().join("t.csv");
    let o = desync(&["run", "--config", &cfg, "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    let records = read_trace(fs::File::open(&out).unwrap(), TraceFormat::Table).unwrap();
    assert!(records.is_empty());
}

#[test]
fn invalid_config_exits_2_naming_the_field() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario(dir.path(), "a.toml", "").replace("a.toml", "b.toml");
    fs::write(
        &cfg,
        "schema_version = 1\nn = 3\nl = 1.5\nomega = 1.0\nseed = 1\ninitial_phases = \"evenly_spaced\"\n",
    )
    .unwrap();
    let o = desync(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("l:"));
}

#[test]
fn missing_file_exits_4() {
    let o = desync(&["run", "--config", "/nonexistent/scenario.toml"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn single_cell_sweep_matches_run() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario(dir.path(), "a.toml", "");
    let run_out = dir.path().join("run.csv");
    assert_eq!(desync(&["run", "--config", &cfg, "--out", s(&run_out)]).status.code(), Some(0));

    let sweep = dir.path().join("sweep.toml");
    fs::write(
        &sweep,
        "schema_version = 1\nn_values = [5]\nl_values = [0.85]\nseeds = [7]\ninitial_phases = \"uniform_random\"\n",
    )
    .unwrap();
    let out_dir = dir.path().join("grid");
    let o = desync(&["sweep", "--config", s(&sweep), "--out", s(&out_dir)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let cell = fs::read(out_dir.join("trace_n5_l0.85_seed7.csv")).unwrap();
    assert_eq!(cell, fs::read(&run_out).unwrap());
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert!(summary.starts_with("n,l,seed,events,events_to_converge,final_p,converged,error\n"));
    assert!(summary.lines().nth(1).unwrap().starts_with("5,0.85,7,"));
}

#[test]
fn weak_coupling_sweep_converges_with_larger_budget() {
    let dir = TempDir::new().unwrap();
    let sweep = dir.path().join("sweep.toml");
    fs::write(
        &sweep,
        "schema_version = 1\nn_values = [3, 4, 5, 6, 7, 8, 9, 10]\nl_values = [0.1, 0.5, 0.85]\n\
         seeds = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19]\n\
         initial_phases = \"uniform_random\"\nmax_events = 10000\n",
    )
    .unwrap();
    let out_dir = dir.path().join("grid");
    let o = desync(&["sweep", "--config", s(&sweep), "--out", s(&out_dir)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("480 of 480 cells converged"));
}

#[test]
fn verify_passes_on_small_corpus() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("report.json");
    let o = desync(&["verify", "--seeds", "48", "--out", s(&report)]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert!(text.lines().all(|l| l.starts_with("PASS") || l.starts_with("coverage:")));
    let json: serde_json::Value = serde_json::from_slice(&fs::read(report).unwrap()).unwrap();
    assert_eq!(json["passed"], true);
    assert_eq!(json["runs"], 48);
}

#[test]
fn flipped_response_fails_order_invariance() {
    let o = desync(&["verify", "--seeds", "48", "--inject-flipped-prc"]);
    assert_eq!(o.status.code(), Some(3));
    let text = String::from_utf8(o.stdout).unwrap();
    let line = text
        .lines()
        .find(|l| l.contains("firing_order_invariance"))
        .unwrap();
    assert!(line.starts_with("FAIL"), "{line}");
    assert!(line.contains("seed ") && line.contains("event "), "{line}");
}
