use std::path::PathBuf;
use std::process::{Command, Output};

fn data(rel: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/data")
        .join(rel)
        .display()
        .to_string()
}

fn gsr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gsr")).args(args).env_remove("GSR_CATALOG").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn check_valid_diagram_is_silent() {
    let o = gsr(&["check", &data("diagrams/two_robot_drop.gsr")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty() && o.stderr.is_empty());
}

#[test]
fn check_reports_diagnostics_with_exit_1() {
    let o = gsr(&["check", &data("invalid/v02_no_starter.gsr")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("V2:"), "{}", stderr(&o));
}

#[test]
fn check_json_output() {
    let o = gsr(&["--format", "json", "check", &data("invalid/v07_logical_cycle.gsr")]);
    assert_eq!(o.status.code(), Some(1));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["is_valid"], false);
    assert_eq!(doc["diagnostics"][0]["code"], "V7");
}

#[test]
fn sim_matches_golden_from_diagram_and_from_net() {
    let dir = tempfile::tempdir().unwrap();
    let golden = std::fs::read_to_string(data("golden/drop_stuck.jsonl")).unwrap();
    let script = data("scripts/drop_stuck.json");
    let o = gsr(&["sim", "--diagram", &data("diagrams/two_robot_drop.gsr"), "--script", &script]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), golden);

    let net = dir.path().join("net.json");
    let trace = dir.path().join("trace.jsonl");
    let o = gsr(&["compile", &data("diagrams/two_robot_drop.gsr"), "-o", net.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let o = gsr(&["sim", "--net", net.to_str().unwrap(), "--script", &script, "--trace", trace.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(trace).unwrap(), golden);
}

#[test]
fn sim_max_ticks_truncates() {
    let o = gsr(&[
        "sim",
        "--diagram",
        &data("diagrams/progress_trigger.gsr"),
        "--script",
        &data("scripts/progress_nominal.json"),
        "--max-ticks",
        "5",
    ]);
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 5);
    assert!(out.lines().last().unwrap().contains("\"truncated\":true"));
}

#[test]
fn gen_then_instantiate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tpl");
    let o = gsr(&["gen", &data("diagrams/two_robot_drop.gsr"), "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(std::fs::read_to_string(out.join("listing.txt")).unwrap().contains("[event-effects]"));
    let template = out.join("template.json");
    let template = template.to_str().unwrap();

    let o = gsr(&["instantiate", "--template", template, "--bind", "leftRobotStart=a", "--bind", "leftRobotGoal=b"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("rightRobotGoal, rightRobotStart"), "{}", stderr(&o));

    let o = gsr(&[
        "instantiate",
        "--template",
        template,
        "--bind",
        "leftRobotStart=a",
        "--bind",
        "leftRobotGoal=b",
        "--bind",
        "rightRobotStart=\"c\"",
        "--bind",
        "rightRobotGoal=d",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let net: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(net["name"], "TwoRobotDrop");
    assert!(!stdout(&o).contains("\"slot\""));
}

#[test]
fn instantiate_rejects_wrong_kind() {
    let dir = tempfile::tempdir().unwrap();
    let o = gsr(&["gen", &data("diagrams/two_robot_drop.gsr"), "-o", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let template = dir.path().join("template.json");
    let mut args = vec!["instantiate", "--template", template.to_str().unwrap()];
    args.extend(["--bind", "leftRobotStart=3", "--bind", "leftRobotGoal=b", "--bind", "rightRobotStart=c", "--bind", "rightRobotGoal=d"]);
    let o = gsr(&args);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("leftRobotStart"));
}

#[test]
fn suggest_lists_frame_factories() {
    let o = gsr(&["suggest", "--kind", "frame", &data("diagrams/two_robot_drop.gsr")]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.lines().all(|l| l.split('\t').count() == 2), "{out}");
    assert!(out.contains("offsetFrame"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(gsr(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(gsr(&["check", "/nonexistent/x.gsr"]).status.code(), Some(2));
    assert_eq!(gsr(&["suggest", "--kind", "colour", &data("diagrams/progress_trigger.gsr")]).status.code(), Some(2));
}

#[test]
fn custom_catalog_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{ not json").unwrap();
    let o = gsr(&["--catalog", path.to_str().unwrap(), "check", &data("diagrams/progress_trigger.gsr")]);
    assert_eq!(o.status.code(), Some(2));
}
