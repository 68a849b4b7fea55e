use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unichain")).args(args).output().expect("run cli")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn report(args: &[&str], dir: &Path) -> (i32, Value) {
    let path = dir.join("report.json");
    let mut full: Vec<&str> = args.to_vec();
    let path_str = path.to_str().unwrap();
    full.extend(["--report", path_str]);
    let out = run(&full);
    let value = serde_json::from_str(&fs::read_to_string(&path).unwrap_or_default()).unwrap_or(Value::Null);
    (code(&out), value)
}

#[test]
fn fixture_file_round_trips_through_validate() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("cycle.json");
    let out = run(&["fixture", "two-cycle", "--out", file.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let text = fs::read_to_string(&file).unwrap();
    let printed = stdout(&run(&["fixture", "two-cycle"]));
    assert_eq!(text, printed);

    let out = run(&["validate", file.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("unichain: yes"));
}

#[test]
fn invalid_instance_lists_violations() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.json");
    let text = stdout(&run(&["fixture", "two-cycle"])).replacen("[[0.0, 1.0]", "[[0.0, 0.7]", 1);
    fs::write(&file, text).unwrap();
    let (exit, value) = report(&["validate", file.to_str().unwrap()], dir.path());
    assert_eq!(exit, 1);
    assert_eq!(value["valid"], Value::Bool(false));
    assert_eq!(value["violations"].as_array().unwrap().len(), 1);
    // other commands refuse it as input
    assert_eq!(code(&run(&["eval", file.to_str().unwrap(), "--policy", "0,0"])), 2);
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("garbage.json");
    fs::write(&file, "{ not json").unwrap();
    assert_eq!(code(&run(&["validate", file.to_str().unwrap()])), 2);
    assert_eq!(code(&run(&["eval", "fixture:nope", "--policy", "0"])), 2);
    assert_eq!(code(&run(&["eval", "fixture:two-cycle", "--policy", "0,5"])), 2);
    assert_eq!(code(&run(&["eval", "fixture:two-cycle", "--policy", "0"])), 2);
    assert_eq!(code(&run(&["solve", "fixture:stay-or-jump"])), 2);
    assert_eq!(code(&run(&["closure", "fixture:two-cycle", "--policies", "0,0;1,1"])), 2);
    assert_eq!(code(&run(&["eval", "random:3,2", "--policy", "0,0,0"])), 2);
}

#[test]
fn generated_instances_validate() {
    let dir = tempfile::tempdir().unwrap();
    for (mode, seed) in [("dense", "5"), ("structured", "6")] {
        let file = dir.path().join(format!("{mode}.json"));
        let out = run(&[
            "gen", "--states", "4", "--actions", "2", "--seed", seed, "--mode", mode, "--ties", "1", "--out",
            file.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let out = run(&["validate", file.to_str().unwrap()]);
        assert_eq!(code(&out), 0);
        assert!(stdout(&out).contains("unichain: yes"), "{mode}");
    }
}

#[test]
fn solve_methods_agree() {
    let dir = tempfile::tempdir().unwrap();
    let (e1, brute) = report(&["solve", "random:4,3,0.05,9"], dir.path());
    let (e2, pi) = report(&["solve", "random:4,3,0.05,9", "--method", "pi"], dir.path());
    assert_eq!((e1, e2), (0, 0));
    let g1 = brute["optimal"]["gain"].as_f64().unwrap();
    let g2 = pi["result"]["gain"]["value"].as_f64().unwrap();
    assert!((g1 - g2).abs() <= 1e-8);
    let members = brute["optimal"]["policies"].as_array().unwrap();
    assert!(members.contains(&pi["result"]["policy"]));
}

#[test]
fn mixed_evaluation_of_the_two_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let (exit, value) = report(&["eval-mixed", "fixture:two-cycle", "--weights", "0,1;0.5,0.5"], dir.path());
    assert_eq!(exit, 0);
    assert!((value["gain"]["value"].as_f64().unwrap() - 0.75).abs() <= 1e-12);
}

#[test]
fn chain_and_mix_check_pass_on_tied_instance() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("tied.json");
    let file = file.to_str().unwrap();
    assert_eq!(code(&run(&["gen", "--states", "4", "--actions", "2", "--seed", "3", "--ties", "2", "--out", file])), 0);
    let (exit, solved) = report(&["solve", file], dir.path());
    assert_eq!(exit, 0);
    let policies = solved["optimal"]["policies"].as_array().unwrap().clone();
    assert!(policies.len() >= 2);
    let as_arg = |v: &Value| {
        v.as_array().unwrap().iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
    };
    let (from, to) = (as_arg(&policies[0]), as_arg(policies.last().unwrap()));
    let (exit, chain) = report(&["chain", file, "--from", &from, "--to", &to], dir.path());
    assert_eq!(exit, 0);
    assert_eq!(chain["first_increase"], Value::Null);

    let (exit, mix) = report(&["mix-check", file, "--samples", "40", "--seed", "2"], dir.path());
    assert_eq!(exit, 0);
    assert_eq!(mix["report"]["pass"], Value::Bool(true));
    assert_eq!(mix["report"]["tested"], 40);
}

#[test]
fn mixtures_of_non_optimal_pair_fail() {
    let out = run(&["mix-check", "fixture:two-cycle", "--policies", "0,1;1,0", "--samples", "20"]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("FAIL"));
}

#[test]
fn simulation_is_reproducible_and_writes_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("snap.csv");
    let args = [
        "simulate",
        "fixture:two-cycle",
        "--schedule",
        "pure:1,1",
        "--steps",
        "1000",
        "--seed",
        "4",
        "--snapshots",
        csv.to_str().unwrap(),
    ];
    let first = run(&args);
    let second = run(&args);
    assert_eq!(code(&first), 0);
    assert_eq!(first.stdout, second.stdout);
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("step,running_average,visits_0,visits_1"));
    assert!(text.lines().last().unwrap().starts_with("1000,1.0,"));
    assert!(stdout(&first).contains("running average 1"));
}

#[test]
fn optimal_blocks_needs_two_optimal_policies() {
    assert_eq!(code(&run(&["simulate", "fixture:two-cycle", "--schedule", "optimal-blocks"])), 2);
    let out = run(&["simulate", "fixture:two-cycle", "--schedule", "optimal", "--steps", "100"]);
    assert_eq!(code(&out), 0);
}

#[test]
fn eval_reports_cesaro_on_reducible_chains() {
    let dir = tempfile::tempdir().unwrap();
    let (exit, value) = report(&["eval", "fixture:stay-or-jump", "--policy", "0,1", "--policy", "1,1"], dir.path());
    assert_eq!(exit, 0);
    let rows = value["evaluations"].as_array().unwrap();
    assert_eq!(rows[0]["gain"]["method"], "cesaro");
    assert!((rows[0]["gain"]["value"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(rows[1]["gain"]["method"], "direct-solve");
    assert_eq!(rows[1]["gain"]["value"].as_f64().unwrap(), 0.0);
}
