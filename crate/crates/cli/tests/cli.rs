use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn forcex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_forcex"))
        .args(args)
        .env_remove("FORCEX_SEED")
        .output()
        .expect("runs")
}

fn reports(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).expect("one JSON report per line"))
        .collect()
}

fn strip_wall_times(v: &mut Value) {
    match v {
        Value::Object(m) => {
            m.remove("wall_time_ms");
            m.values_mut().for_each(strip_wall_times);
        }
        Value::Array(xs) => xs.iter_mut().for_each(strip_wall_times),
        _ => {}
    }
}

#[test]
fn drive_by_page_exits_two() {
    let out = forcex(&["analyze", &fixture("drive_by.html"), "--format", "json"]);
    assert_eq!(out.status.code(), Some(2));
    let r = reports(&out);
    assert_eq!(r.len(), 1);
    assert_eq!(r[0]["verdict"], "malicious");
    assert!(r[0]["findings"]
        .as_array()
        .unwrap()
        .iter()
        .any(|f| f["severity"] == "malicious"));
}

#[test]
fn benign_scripts_exit_zero() {
    let paths: Vec<String> = ["bootstrap.js", "analytics.js", "xhr.js", "menu.js"]
        .iter()
        .map(|n| fixture(&format!("benign/{n}")))
        .collect();
    let mut args = vec!["analyze"];
    args.extend(paths.iter().map(String::as_str));
    let out = forcex(&args);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = reports(&out);
    assert_eq!(r.len(), 4);
    assert!(r
        .iter()
        .all(|x| x["verdict"] != "malicious" && x["error"].is_null()));
}

#[test]
fn missing_file_exits_one_and_reports_the_error() {
    let out = forcex(&["analyze", "definitely-missing.js"]);
    assert_eq!(out.status.code(), Some(1));
    let r = reports(&out);
    assert_eq!(r.len(), 1);
    assert!(r[0]["error"]
        .as_str()
        .unwrap()
        .contains("definitely-missing.js"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("definitely-missing.js"));
}

#[test]
fn missing_file_does_not_stop_the_batch() {
    let out = forcex(&["analyze", "definitely-missing.js", &fixture("drive_by.js")]);
    assert_eq!(out.status.code(), Some(2));
    let r = reports(&out);
    assert_eq!(r.len(), 2);
    assert!(r[0]["error"].is_string());
    assert_eq!(r[1]["verdict"], "malicious");
}

#[test]
fn out_dir_gets_one_report_per_sample_and_an_index() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("reports");
    let out = forcex(&[
        "analyze",
        &fixture("drive_by.js"),
        &fixture("benign/menu.js"),
        "--out",
        target.to_str().unwrap(),
        "--jobs",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    let index: Value =
        serde_json::from_str(&std::fs::read_to_string(target.join("index.json")).unwrap()).unwrap();
    assert_eq!(index["exit_code"], 2);
    let entries = index["reports"].as_array().unwrap();
    assert_eq!(entries.len(), 2);
    assert_eq!(entries[0]["verdict"], "malicious");
    assert_eq!(entries[1]["verdict"], "info");
    for e in entries {
        let file = target.join(e["report"].as_str().unwrap());
        let report: Value = serde_json::from_str(&std::fs::read_to_string(file).unwrap()).unwrap();
        assert_eq!(report["sample"], e["sample"]);
    }
}

#[test]
fn jobs_keep_input_order() {
    let names = [
        "drive_by.js",
        "benign/menu.js",
        "golden.js",
        "benign/xhr.js",
        "add_event.js",
    ];
    let paths: Vec<String> = names.iter().map(|n| fixture(n)).collect();
    let mut args = vec!["analyze", "--jobs", "4"];
    args.extend(paths.iter().map(String::as_str));
    let r = reports(&forcex(&args));
    let samples: Vec<&str> = r.iter().map(|x| x["sample"].as_str().unwrap()).collect();
    assert_eq!(
        samples,
        paths.iter().map(String::as_str).collect::<Vec<_>>()
    );
}

#[test]
fn repeated_runs_are_identical() {
    let once = || {
        let mut r = reports(&forcex(&[
            "analyze",
            &fixture("drive_by.html"),
            &fixture("heap_spray.js"),
        ]));
        r.iter_mut().for_each(strip_wall_times);
        serde_json::to_string(&r).unwrap()
    };
    assert_eq!(once(), once());
}

#[test]
fn seed_comes_from_the_flag_then_the_environment() {
    let golden = fixture("golden.js");
    let default = reports(&forcex(&["analyze", &golden]));
    assert_eq!(default[0]["config"]["seed"], 0x5eed_f0ce_u64);

    let env = Command::new(env!("CARGO_BIN_EXE_forcex"))
        .args(["analyze", &golden])
        .env("FORCEX_SEED", "0x2a")
        .output()
        .unwrap();
    assert_eq!(reports(&env)[0]["config"]["seed"], 42);

    let both = Command::new(env!("CARGO_BIN_EXE_forcex"))
        .args(["analyze", &golden, "--seed", "7"])
        .env("FORCEX_SEED", "42")
        .output()
        .unwrap();
    assert_eq!(reports(&both)[0]["config"]["seed"], 7);

    let bad = Command::new(env!("CARGO_BIN_EXE_forcex"))
        .args(["analyze", &golden])
        .env("FORCEX_SEED", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn budgets_are_echoed() {
    let r = reports(&forcex(&[
        "analyze",
        &fixture("golden.js"),
        "--loop-budget",
        "250",
        "--recursion-cap",
        "64",
        "--sample-timeout",
        "12.5",
        "--activex",
        "fake",
    ]));
    let c = &r[0]["config"];
    assert_eq!(c["budgets"]["loop_budget"], 250);
    assert_eq!(c["budgets"]["recursion_cap"], 64);
    assert_eq!(c["budgets"]["sample_timeout"], 12500);
    assert_eq!(c["activex"], "fake");
}

#[test]
fn policy_config_file_changes_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("policies.toml");
    std::fs::write(
        &file,
        "[shellcode]\nenabled = false\n\n[activex_catch]\nenabled = false\n",
    )
    .unwrap();
    let out = forcex(&[
        "analyze",
        &fixture("drive_by.js"),
        "--policy-config",
        file.to_str().unwrap(),
    ]);
    let r = reports(&out);
    assert!(r[0]["findings"]
        .as_array()
        .unwrap()
        .iter()
        .all(|f| f["policy"] != "shellcode_density"));
    assert_eq!(r[0]["config"]["policies"]["shellcode"]["enabled"], false);
    assert_eq!(r[0]["config"]["policies"]["heap_spray"]["min_writes"], 1000);

    std::fs::write(&file, "[shellcode]\nnope = 1\n").unwrap();
    assert_eq!(
        forcex(&[
            "analyze",
            &fixture("drive_by.js"),
            "--policy-config",
            file.to_str().unwrap()
        ])
        .status
        .code(),
        Some(1)
    );
}

#[test]
fn text_format_names_the_verdict() {
    let out = forcex(&["analyze", &fixture("drive_by.html"), "--format", "text"]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("MALICIOUS"), "{text}");
    assert!(text.contains("shellcode_density"), "{text}");
}

#[test]
fn trace_prints_the_recovery_log() {
    let out = forcex(&["trace", &fixture("golden.js")]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    let rules: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with("branch") && !l.starts_with("terminated_by"))
        .map(|l| l.split_whitespace().nth(2).unwrap())
        .collect();
    assert_eq!(rules.len(), 14, "{text}");
    assert_eq!(rules[0], "ER_2");
    assert_eq!(rules[13], "R_ASSIGN");
    assert!(text.contains("terminated_by normal"));
}
