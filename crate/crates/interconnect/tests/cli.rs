use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_interconnect")).args(args).output().unwrap()
}

fn guard(store: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_guard"))
        .arg("--store")
        .arg(store)
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn golden(name: &str) -> String {
    format!("{}/tests/golden/{name}.trace", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn run_matches_golden() {
    let o = ic(&["run", "fig12-scale", "--golden", &golden("fig12-scale")]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("golden match"));
}

#[test]
fn tampered_golden_fails_with_small_diff() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.trace");
    let text = fs::read_to_string(golden("fig9-nwdaf-pair")).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.remove(3);
    fs::write(&g, lines.join("\n") + "\n").unwrap();
    let o = ic(&["run", "fig9-nwdaf-pair", "--golden", g.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.starts_with('+')).count(), 1, "{out}");
    assert!(String::from_utf8_lossy(&o.stderr).contains("1 lines"));
}

#[test]
fn bless_writes_trace_and_exports() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("m.trace");
    let t = dir.path().join("out.trace");
    let log = dir.path().join("audit.log");
    let ex = dir.path().join("export");
    let o = ic(&[
        "run",
        "mapek-congestion",
        "--seed",
        "0",
        "--golden",
        g.to_str().unwrap(),
        "--bless",
        "--trace",
        t.to_str().unwrap(),
        "--audit-log",
        log.to_str().unwrap(),
        "--export",
        ex.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(&g).unwrap(), fs::read(golden("mapek-congestion")).unwrap());
    assert_eq!(fs::read(&g).unwrap(), fs::read(&t).unwrap());
    assert!(ex.join("mapek.loop.json").exists());

    let q = ic(&["audit", "--log", log.to_str().unwrap(), "--op", "execute"]);
    assert_eq!(q.status.code(), Some(0));
    let rows = stdout(&q);
    assert!(!rows.is_empty());
    assert!(rows.lines().all(|l| l.split('|').nth(2) == Some("execute")), "{rows}");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(ic(&["run", "no-such-scenario"]).status.code(), Some(2));
    assert_eq!(ic(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(ic(&["run", "fig7-decompose", "--bless"]).status.code(), Some(2));
    assert_eq!(ic(&["audit", "--log", "/nonexistent/log"]).status.code(), Some(2));
    assert_eq!(ic(&["audit", "--log", "x", "--op", "teleport"]).status.code(), Some(2));
}

#[test]
fn registry_validate() {
    let dir = tempfile::tempdir().unwrap();
    let ok = format!("{}/../../docs/examples/nwdaf-gpt.model.json", env!("CARGO_MANIFEST_DIR"));
    let o = ic(&["registry", "validate", &ok]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("valid nwdaf-gpt 2.1.0"));
    let bad = dir.path().join("bad.model.json");
    fs::write(&bad, r#"{"modelId": "x", "modelType": "gpt"}"#).unwrap();
    let o = ic(&["registry", "validate", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing-field"));
}

#[test]
fn ticket_lifecycle() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("t.json");
    let o = guard(&store, &["tickets", "open", "tune-cell-1"]);
    assert_eq!(o.status.code(), Some(0));
    let id = stdout(&o).trim().to_string();
    assert_eq!(id, "hitl-1");
    let o = guard(&store, &["tickets", "open", "plan-4", "--reason", "high-impact"]);
    assert_eq!(stdout(&o).trim(), "hitl-2");
    assert_eq!(guard(&store, &["tickets", "approve", &id, "--note", "ok"]).status.code(), Some(0));
    assert_eq!(guard(&store, &["tickets", "deny", "hitl-2"]).status.code(), Some(2));
    assert_eq!(guard(&store, &["tickets", "deny", "hitl-2", "--note", "too broad"]).status.code(), Some(0));
    assert_eq!(guard(&store, &["tickets", "deny", &id, "--note", "late"]).status.code(), Some(1));
    assert_eq!(guard(&store, &["tickets", "approve", "nope"]).status.code(), Some(2));
    let list = stdout(&guard(&store, &["tickets", "list"]));
    assert!(list.contains("hitl-1 Approved program:tune-cell-1 Manual ok"), "{list}");
    assert!(list.contains("hitl-2 Denied plan-4 HighImpact too broad"), "{list}");
}
