//! End-to-end tests driving the compiled `relreach` binary.

use relreach_core::parse_rat;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_relreach"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

/// Generates the four figure instances into a fresh directory.
fn figures_dir() -> TempDir {
    let dir = TempDir::new().unwrap();
    let out = run(&["generate", "figures", "--out", dir.path().to_str().unwrap(), "--expected"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    dir
}

fn model_and_property(dir: &Path, name: &str) -> (String, String) {
    (
        dir.join(name).join("model.json").to_str().unwrap().into(),
        dir.join(name).join("property.txt").to_str().unwrap().into(),
    )
}

#[test]
fn exact_check_reports_values_and_writes_the_witness() {
    let dir = figures_dir();
    let (model, prop) = model_and_property(dir.path(), "weighted_split");
    let wit = dir.path().join("wit.json");
    let out = run(&[
        "check", "--model", &model, "--property", &prop, "--mode", "exact", "--witness",
        wit.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("verdict: holds"), "{text}");
    assert!(text.contains("v_max: [1/4, 1/4]"), "{text}");
    assert!(text.contains("v_min: [-1, -1]"), "{text}");
    let witness: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&wit).unwrap()).unwrap();
    assert_eq!(witness["kind"], "mix");
    assert_eq!(witness["lambda"], "1/5");
    assert_eq!(witness["achieved"], "0");
}

#[test]
fn json_output_is_byte_stable_and_keeps_timings_on_stderr() {
    let dir = figures_dir();
    let (model, prop) = model_and_property(dir.path(), "weighted_split");
    let args = ["check", "--model", &model, "--property", &prop, "--mode", "exact", "--json"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout, "stdout must be deterministic");
    let value: serde_json::Value = serde_json::from_str(&stdout(&a)).unwrap();
    assert_eq!(value["verdict"], "holds");
    assert_eq!(value["v_max"]["lower"], "1/4");
    assert!(!stdout(&a).contains("timings"), "timings belong on stderr");
    assert!(stderr(&a).contains("timings:"));
}

#[test]
fn default_mode_brackets_within_the_default_tolerance() {
    let dir = figures_dir();
    let (model, prop) = model_and_property(dir.path(), "weighted_split");
    let out = run(&["check", "--model", &model, "--property", &prop, "--json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let value: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(value["verdict"], "holds");
    let lo = parse_rat(value["v_max"]["lower"].as_str().unwrap()).unwrap();
    let hi = parse_rat(value["v_max"]["upper"].as_str().unwrap()).unwrap();
    let quarter = parse_rat("1/4").unwrap();
    assert!(lo <= quarter && quarter <= hi);
    assert!(hi - lo <= parse_rat("1/1000000").unwrap());
}

#[test]
fn usage_errors_exit_2() {
    let dir = figures_dir();
    let (model, prop) = model_and_property(dir.path(), "weighted_split");
    let wit = dir.path().join("w.json");
    let wit = wit.to_str().unwrap();
    for args in [
        vec!["check", "--model", &model, "--property", &prop, "--witness", wit],
        vec!["check", "--model", &model, "--property", &prop, "--tolerance", "0"],
        vec!["check", "--model", &model, "--property", &prop, "--tolerance", "-1/2"],
        vec!["check", "--model", &model, "--property", &prop, "--mode", "exact", "--tolerance", "1/2"],
        vec!["check", "--model", &model, "--property", &prop, "--jobs", "0"],
        vec!["generate", "vn", "--n", "0", "--out", "/tmp/unused"],
        vec!["generate", "ts", "--h1", "3", "--h2", "3", "--out", "/tmp/unused"],
        vec!["nonsense"],
    ] {
        let out = run(&args);
        assert_eq!(code(&out), 2, "args {args:?}: {}", stderr(&out));
    }
    let out = bin()
        .args(["check", "--model", &model, "--property", &prop])
        .env("RELREACH_JOBS", "abc")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn invalid_inputs_exit_3() {
    let dir = figures_dir();
    let (model, prop) = model_and_property(dir.path(), "weighted_split");
    let missing = dir.path().join("nope.json");
    let missing = missing.to_str().unwrap().to_owned();
    let bad_model = dir.path().join("bad.json");
    fs::write(&bad_model, "{\"num_states\": 1}").unwrap();
    let bad_prop = dir.path().join("bad.txt");
    fs::write(&bad_prop, "exists s . P(s, no_such_label, F T1) > 0").unwrap();
    let bad_graph = dir.path().join("bad.graph");
    fs::write(&bad_graph, "a b c\n").unwrap();
    let ok_graph = dir.path().join("ok.graph");
    fs::write(&ok_graph, "a b\n").unwrap();
    let gen_out = dir.path().join("g");
    for args in [
        vec!["check", "--model", missing.as_str(), "--property", prop.as_str()],
        vec!["check", "--model", bad_model.to_str().unwrap(), "--property", prop.as_str()],
        vec!["check", "--model", model.as_str(), "--property", bad_prop.to_str().unwrap()],
        vec![
            "generate", "hampath", "--graph", bad_graph.to_str().unwrap(), "--init", "a",
            "--out", gen_out.to_str().unwrap(),
        ],
        vec![
            "generate", "hampath", "--graph", ok_graph.to_str().unwrap(), "--init", "zz",
            "--out", gen_out.to_str().unwrap(),
        ],
    ] {
        let out = run(&args);
        assert_eq!(code(&out), 3, "args {args:?}: {}", stderr(&out));
    }
}

#[test]
fn oracle_and_pipeline_disagree_on_the_mix_instance() {
    let dir = figures_dir();
    let (model, prop) = model_and_property(dir.path(), "mix_required");
    let check = run(&["check", "--model", &model, "--property", &prop, "--mode", "exact"]);
    assert_eq!(code(&check), 0);
    assert!(stdout(&check).contains("verdict: holds"));
    let oracle = run(&["oracle", "--model", &model, "--property", &prop, "--json"]);
    assert_eq!(code(&oracle), 0, "{}", stderr(&oracle));
    let value: serde_json::Value = serde_json::from_str(&stdout(&oracle)).unwrap();
    assert_eq!(value["verdict"], "violated");
    assert_eq!(value["witness"], serde_json::Value::Null);
}

#[test]
fn oracle_over_budget_exits_4() {
    let dir = figures_dir();
    let (model, prop) = model_and_property(dir.path(), "weighted_split");
    let out = run(&["oracle", "--model", &model, "--property", &prop, "--budget", "1"]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
}

#[test]
fn generated_instances_round_trip_through_check() {
    let dir = TempDir::new().unwrap();
    let vn = dir.path().join("vn");
    let out = run(&[
        "generate", "vn", "--n", "1", "--out", vn.to_str().unwrap(), "--expected",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let expected: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(vn.join("expected.json")).unwrap()).unwrap();
    let want = expected["expected"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["engine"] == "pipeline")
        .expect("pipeline expectation")["verdict"]
        .as_str()
        .unwrap()
        .to_owned();
    let check = run(&[
        "check",
        "--model", vn.join("model.json").to_str().unwrap(),
        "--property", vn.join("property.txt").to_str().unwrap(),
        "--json",
    ]);
    assert_eq!(code(&check), 0, "{}", stderr(&check));
    let value: serde_json::Value = serde_json::from_str(&stdout(&check)).unwrap();
    assert_eq!(value["verdict"], want);
}

#[test]
fn generate_without_expected_writes_model_and_property_only() {
    let dir = TempDir::new().unwrap();
    let ts = dir.path().join("ts");
    let out = run(&["generate", "ts", "--h1", "0", "--h2", "1", "--out", ts.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(ts.join("model.json").exists());
    assert!(ts.join("property.txt").exists());
    assert!(!ts.join("expected.json").exists());
    assert!(fs::read_to_string(ts.join("property.txt")).unwrap().ends_with('\n'));
}

#[test]
fn dump_unfolding_writes_one_entry_per_combination() {
    let dir = figures_dir();
    let (model, prop) = model_and_property(dir.path(), "weighted_split");
    let dump = dir.path().join("unf.json");
    let out = run(&[
        "check", "--model", &model, "--property", &prop, "--dump-unfolding",
        dump.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let value: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&dump).unwrap()).unwrap();
    let entries = value.as_array().unwrap();
    assert_eq!(entries.len(), 2);
    assert!(!entries[0]["rewards"].as_object().unwrap().is_empty());
}

#[test]
fn inconclusive_is_a_verdict_not_an_error() {
    let dir = TempDir::new().unwrap();
    let model = dir.path().join("drain.json");
    fs::write(
        &model,
        r#"{
  "num_states": 2,
  "states": [
    {"actions": [{"name": "a", "transitions": [[0, "9/10"], [1, "1/10"]]}]},
    {"actions": [{"name": "a", "transitions": [[1, "1"]]}]}
  ],
  "labels": {"T": [1]}
}"#,
    )
    .unwrap();
    let prop = dir.path().join("p.txt");
    fs::write(&prop, "exists s . P(s, 0, F T) !~ 1 eps 1/10000000\n").unwrap();
    let out = run(&[
        "check",
        "--model", model.to_str().unwrap(),
        "--property", prop.to_str().unwrap(),
        "--tolerance", "1/1000",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("verdict: inconclusive"), "{}", stdout(&out));
    let exact = run(&[
        "check",
        "--model", model.to_str().unwrap(),
        "--property", prop.to_str().unwrap(),
        "--mode", "exact",
    ]);
    assert_eq!(code(&exact), 0);
    assert!(stdout(&exact).contains("verdict: violated"), "{}", stdout(&exact));
}

#[test]
fn jobs_flag_and_environment_yield_identical_reports() {
    let dir = figures_dir();
    let (model, prop) = model_and_property(dir.path(), "history_required");
    let base = ["check", "--model", &model, "--property", &prop, "--mode", "exact", "--json"];
    let flag = run(&[&base[..], &["--jobs", "2"]].concat());
    assert_eq!(code(&flag), 0, "{}", stderr(&flag));
    let env = bin().args(base).env("RELREACH_JOBS", "2").output().unwrap();
    assert_eq!(code(&env), 0, "{}", stderr(&env));
    let plain = run(&base);
    assert_eq!(flag.stdout, env.stdout);
    assert_eq!(flag.stdout, plain.stdout);
}

#[test]
fn oracle_text_mode_prints_a_witness_per_scheduler_variable() {
    let dir = figures_dir();
    let (model, prop) = model_and_property(dir.path(), "weighted_split");
    let out = run(&["oracle", "--model", &model, "--property", &prop]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("verdict: holds"), "{text}");
    assert!(text.contains("witness s:"), "{text}");
}
