use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;
use urnlab::cli::{execute, shell_split};
use urnlab::error::{EXIT_RESOURCE, EXIT_VALIDATION};
use urnlab::io::find_replay;

fn run(args: &[&str]) {
    let mut v = vec!["urnlab".to_string()];
    v.extend(args.iter().map(|s| s.to_string()));
    execute(&v).unwrap_or_else(|e| panic!("{args:?}: {e}"));
}

fn run_to(dir: &Path, name: &str, args: &[&str]) -> String {
    let path = dir.join(name);
    let mut v = args.to_vec();
    let p = path.to_str().unwrap().to_string();
    v.extend(["--out", &p]);
    run(&v);
    fs::read_to_string(path).unwrap()
}

fn replay_to(dir: &Path, src: &str, name: &str) -> String {
    let out = dir.join(name);
    run(&["replay", dir.join(src).to_str().unwrap(), "--out", out.to_str().unwrap()]);
    fs::read_to_string(out).unwrap()
}

fn assert_replays(args: &[&str]) {
    let dir = tempfile::tempdir().unwrap();
    let first = run_to(dir.path(), "first", args);
    let second = replay_to(dir.path(), "first", "second");
    assert_eq!(first, second, "replay of {args:?} differs");
}

#[test]
fn replay_reproduces_urn_run() {
    assert_replays(&["urn-run", "--a", "1", "--b", "2", "--x0", "40", "--y0", "17", "--seed", "9"]);
}

#[test]
fn replay_reproduces_graph() {
    assert_replays(&["graph", "--n", "30", "--d", "3", "--seed", "4", "--policy", "uniform"]);
}

#[test]
fn replay_reproduces_figure_with_overlay() {
    assert_replays(&["figure", "--n", "200", "--d", "4", "--replicates", "3", "--points", "50", "--seed", "2"]);
}

#[test]
fn replay_reproduces_mc_commands() {
    assert_replays(&[
        "mc", "estimate", "--a", "1", "--b", "2", "--x0", "50", "--y0", "50", "--event", "k", "--t", "2", "--eps", "0.3",
        "--event", "r", "--replicates", "500", "--seed", "11", "--format", "json",
    ]);
    assert_replays(&[
        "mc", "ensemble", "--a", "1", "--b", "2", "--x0", "30", "--y0", "30", "--replicates", "20", "--seed", "3",
    ]);
}

#[test]
fn missing_seed_is_injected_into_replay_line() {
    let dir = tempfile::tempdir().unwrap();
    let text = run_to(dir.path(), "g", &["graph", "--n", "10", "--d", "3"]);
    let line = find_replay(&text).unwrap();
    let args = shell_split(&line);
    let pos = args.iter().position(|a| a == "--seed").expect("seed injected");
    assert!(args[pos + 1].parse::<u64>().is_ok());
    assert!(!args.iter().any(|a| a == "--out"));
    assert_eq!(replay_to(dir.path(), "g", "g2"), text);
}

#[test]
fn urn_exact_reports_certain_r_on_small_instance() {
    let dir = tempfile::tempdir().unwrap();
    let text = run_to(
        dir.path(),
        "e.json",
        &["urn-exact", "--a", "1", "--b", "2", "--x0", "2", "--y0", "1", "--event", "r", "--format", "json"],
    );
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["exact_arithmetic"], true);
    let ev = &v["events"][0];
    assert_eq!(ev["exact"], "1/1");
    assert_eq!(ev["probability"], 1.0);
    assert_eq!(v["martingale"]["max_abs_defect"], 0.0);
}

#[test]
fn csv_headers() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let first_data_line = |text: &str| text.lines().find(|l| !l.starts_with('#')).unwrap().to_string();

    let urn = run_to(d, "u", &["urn-run", "--a", "1", "--b", "2", "--x0", "6", "--y0", "3", "--seed", "1"]);
    assert_eq!(first_data_line(&urn), "n,x,y,draw,k,l,x_pred,y_pred");
    assert!(urn.starts_with("# urnlab "));

    let ens = run_to(d, "e", &["mc", "ensemble", "--a", "1", "--b", "2", "--x0", "6", "--y0", "3", "--replicates", "5", "--seed", "1"]);
    assert_eq!(first_data_line(&ens), "n,k_mean,k_q05,k_q50,k_q95,l_mean,l_q05,l_q50,l_q95,x_pred,y_pred");

    let traj = d.join("traj");
    run(&["graph", "--n", "8", "--d", "3", "--seed", "1", "--out", d.join("g").to_str().unwrap(), "--trajectory-out", traj.to_str().unwrap()]);
    let traj = fs::read_to_string(traj).unwrap();
    assert_eq!(first_data_line(&traj), "k,a,i,x_urn,y_urn");
    let edges = fs::read_to_string(d.join("g")).unwrap();
    let edge_lines: Vec<&str> = edges.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(edge_lines.len(), 12);

    let b = run_to(d, "b", &["bounds", "--a", "1", "--b", "2", "--x0", "100", "--y0", "100", "--format", "csv"]);
    assert_eq!(first_data_line(&b), "name,value,clamped_value,domain_ok");
}

#[test]
fn figure_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let text = run_to(dir.path(), "f", &["figure", "--n", "1000", "--d", "5", "--points", "10"]);
    let rows: Vec<Vec<&str>> = text.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').collect()).collect();
    let first = &rows[0];
    let last = rows.last().unwrap();
    assert_eq!(first[0], "0");
    assert_eq!(first[1].parse::<f64>().unwrap(), 0.0);
    assert!(first[2].parse::<f64>().unwrap() < 0.01);
    assert_eq!(first[3].parse::<f64>().unwrap(), 1.0);
    assert_eq!(last[1].parse::<f64>().unwrap(), 1.0);
    assert_eq!(last[2].parse::<f64>().unwrap(), 0.0);
    assert!(rows.iter().all(|r| r[4].is_empty()));
}

fn binary(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_urnlab")).args(args).output().unwrap()
}

#[test]
fn exit_codes_and_error_records() {
    let ok = binary(&["bounds", "--a", "1", "--b", "2", "--x0", "10", "--y0", "10"]);
    assert!(ok.status.success());

    let bad = binary(&["urn-run", "--a", "3", "--b", "2", "--x0", "10", "--y0", "10", "--seed", "1"]);
    assert_eq!(bad.status.code(), Some(EXIT_VALIDATION));
    let rec: Value = serde_json::from_slice(bad.stderr.trim_ascii()).unwrap();
    assert_eq!(rec["error"], "validation");
    assert_eq!(rec["exit_code"], EXIT_VALIDATION);

    let unknown = binary(&["urn-run", "--bogus"]);
    assert_eq!(unknown.status.code(), Some(EXIT_VALIDATION));

    let cap = binary(&["urn-exact", "--a", "1", "--b", "2", "--x0", "500", "--y0", "500", "--event", "r", "--horizon-cap", "100"]);
    assert_eq!(cap.status.code(), Some(EXIT_RESOURCE));
    let rec: Value = serde_json::from_slice(cap.stderr.trim_ascii()).unwrap();
    assert_eq!(rec["error"], "resource_cap");
}

#[test]
fn unseeded_run_logs_seed() {
    let out = binary(&["urn-run", "--a", "1", "--b", "2", "--x0", "4", "--y0", "1", "--summary-only"]);
    assert!(out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("using seed"), "{err}");
}
