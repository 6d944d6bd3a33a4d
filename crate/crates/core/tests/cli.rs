use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "\
n_bs = 8
m_ue = 8
k_ris_elems = 16
k_bar = 4
n_tx = 6
m_rx = 6
n_grid = 16
";

fn bdris(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bdris"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("small.cfg");
    std::fs::write(&path, format!("{SMALL}{extra}")).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = dir.path().join("snr.csv");
    let o = bdris(&[
        "sweep-snr", "--config", &cfg, "--values", "-10,0,10", "--trials", "3", "--methods", "storm,star",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + 3 * 2);
    assert_eq!(
        lines[0],
        "sweep_value,method,n_trials,nmse_mean,nmse_db,nmse_std,support_rate,t_stage1_s,t_stage2_s"
    );
    assert!(lines[1].starts_with("-10,storm,3,"));
}

#[test]
fn trial_prints_json_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "methods = storm, oracle_ls\n");
    let o = bdris(&["trial", "--config", &cfg, "--format", "json", "--noiseless", "--seed", "9"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["trials"].as_array().unwrap().len(), 2);
    assert_eq!(v["spec"]["master_seed"], 9);
    assert!(v["cells"][0]["nmse_mean"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn paths_and_meas_sweeps_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "trials = 2\n");
    for (cmd, values) in [("sweep-paths", "1,2"), ("sweep-meas", "0.5,0.75")] {
        let o = bdris(&[cmd, "--config", &cfg, "--values", values, "--ris-constraint", "unconstrained"]);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 1 + 2 * 3);
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let bad_cfg = dir.path().join("bad.cfg");
    std::fs::write(&bad_cfg, "k_bar = 3\n").unwrap();
    let cases: [(Vec<&str>, i32); 5] = [
        (vec!["trial", "--config", bad_cfg.to_str().unwrap()], 2),
        (vec!["trial", "--config", &cfg, "--ris-constraint", "lossy"], 2),
        (vec!["trial", "--methods", "vectorized_cs"], 3),
        (vec!["trial", "--config", "/nonexistent/cfg"], 4),
        (vec!["trial", "--config", &cfg, "--out", "/nonexistent/dir/out.csv"], 4),
    ];
    for (args, code) in cases {
        let o = bdris(&args);
        assert_eq!(o.status.code(), Some(code), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn timing_sweep_reports_stage_times() {
    let o = bdris(&["timing", "--trials", "1", "--values", "4,8"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8_lossy(&o.stdout);
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert!(cols[7].parse::<f64>().unwrap() > 0.0);
        assert!(cols[8].parse::<f64>().unwrap() > 0.0);
    }
}
