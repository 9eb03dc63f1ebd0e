use std::path::Path;
use std::process::{Command, Output};

const RUN: &str = r#"
format_version = 1

[agent]
id = "strict-cli"
seed = 0

[agent.behavior]
kind = "strict"
epsilon = 0.0

[agent.behavior.orders]
"L4-normative" = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]
"L3-epistemic" = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]
"L2-source" = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]
"#;

fn prism(ws: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prism"))
        .arg("--workspace")
        .arg(ws)
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn with_campaign() -> (tempfile::TempDir, String) {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&prism(dir.path(), &["bank"])), 0);
    let run = dir.path().join("run.toml");
    std::fs::write(&run, RUN).unwrap();
    let out = prism(dir.path(), &["run", "--config", run.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    (dir, run.to_str().unwrap().to_string())
}

#[test]
fn bank_prints_layer_counts_and_refuses_to_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let out = prism(dir.path(), &["bank"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    for layer in ["L4", "L3", "L2"] {
        assert!(text.contains(&format!("{layer}: 945 neutral + 280 PCS")), "{text}");
    }
    let again = prism(dir.path(), &["bank"]);
    assert_eq!(code(&again), 2);
    assert!(stderr(&again).contains("--force"));
    assert_eq!(code(&prism(dir.path(), &["bank", "--force"])), 0);
}

#[test]
fn full_audit_flow() {
    let (dir, run) = with_campaign();
    let ws = dir.path();

    let rerun = prism(ws, &["run", "--config", &run]);
    assert_eq!(code(&rerun), 0);
    assert!(stdout(&rerun).contains("6510 resumed"), "{}", stdout(&rerun));

    let metrics = prism(ws, &["metrics", "--respondent", "strict-cli"]);
    assert_eq!(code(&metrics), 0, "{}", stderr(&metrics));
    assert!(stdout(&metrics).contains("genuine-hierarchy"), "{}", stdout(&metrics));

    let fixtures = ws.join("fixtures.json");
    let gen = prism(
        ws,
        &["fixtures", "--agent", &run, "--count", "50", "--out", fixtures.to_str().unwrap()],
    );
    assert_eq!(code(&gen), 0, "{}", stderr(&gen));
    let predict = prism(
        ws,
        &["predict", "--respondent", "strict-cli", "--fixtures", fixtures.to_str().unwrap()],
    );
    assert_eq!(code(&predict), 0, "{}", stderr(&predict));
    assert!(stdout(&predict).contains("ASPA 1.0000"), "{}", stdout(&predict));

    let report = prism(ws, &["report", "--respondent", "strict-cli"]);
    assert_eq!(code(&report), 0);
    let text = stdout(&report);
    assert!(text.contains("quadrant: genuine-hierarchy"), "{text}");
    assert!(text.contains("[pass] free-form-prediction"), "{text}");

    let run_dir = ws.join("runs").join("strict-cli");
    let first_txt = std::fs::read(run_dir.join("report.txt")).unwrap();
    let first_json = std::fs::read(run_dir.join("report.json")).unwrap();
    assert_eq!(code(&prism(ws, &["report", "--respondent", "strict-cli"])), 0);
    assert_eq!(std::fs::read(run_dir.join("report.txt")).unwrap(), first_txt);
    assert_eq!(std::fs::read(run_dir.join("report.json")).unwrap(), first_json);
    let json: serde_json::Value = serde_json::from_slice(&first_json).unwrap();
    assert_eq!(json["diagnosis"]["quadrant"], "genuine-hierarchy");
}

#[test]
fn report_without_profile_exits_incomplete() {
    let (dir, _) = with_campaign();
    let out = prism(dir.path(), &["report", "--respondent", "strict-cli"]);
    assert_eq!(code(&out), 4);
    let out = prism(dir.path(), &["report", "--respondent", "nobody"]);
    assert_eq!(code(&out), 4);
}

#[test]
fn truncated_campaign_exits_incomplete_and_lists_missing() {
    let (dir, _) = with_campaign();
    let log = dir.path().join("runs").join("strict-cli").join("transcripts.jsonl");
    let text = std::fs::read_to_string(&log).unwrap();
    let kept: Vec<&str> = text.lines().take(6000).collect();
    std::fs::write(&log, kept.join("\n") + "\n").unwrap();
    let out = prism(dir.path(), &["metrics", "--respondent", "strict-cli"]);
    assert_eq!(code(&out), 4);
    let err = stderr(&out);
    assert!(err.contains("510 item(s)"), "{err}");
    assert!(err.contains("and 490 more"), "{err}");
}

#[test]
fn missing_bank_and_bad_config_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run.toml");
    std::fs::write(&run, RUN).unwrap();
    let out = prism(dir.path(), &["run", "--config", run.to_str().unwrap()]);
    assert_eq!(code(&out), 4);

    assert_eq!(code(&prism(dir.path(), &["bank"])), 0);
    std::fs::write(&run, "format_version = 1\nunknown = 3\n").unwrap();
    let out = prism(dir.path(), &["run", "--config", run.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let out = prism(dir.path(), &["run"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn held_lock_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join(".prism.lock"), "").unwrap();
    let out = prism(dir.path(), &["bank"]);
    assert_eq!(code(&out), 2);
}
