use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn homeview(store: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_homeview"))
        .arg("--store")
        .arg(store)
        .args(["--as-of", "2026-01-01"])
        .args(args)
        .env_remove("STORE_PATH")
        .env_remove("LLM_PROVIDER")
        .env_remove("LLM_MOCK_SCRIPTS")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn seeded() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    stdout(&homeview(dir.path(), &["seed", "--fixture", "elias"]));
    dir
}

#[test]
fn seed_then_validate_reports_seven_thought_records() {
    let dir = seeded();
    let text = stdout(&homeview(dir.path(), &["validate"]));
    assert!(text.trim_end().ends_with("thought records: 7"), "{text}");
    let json: Value = serde_json::from_str(&stdout(&homeview(dir.path(), &["--json", "validate"]))).unwrap();
    assert_eq!(json[0]["thought_records"], 7);
}

#[test]
fn validate_file_accepts_fixture_and_rejects_garbage() {
    let dir = tempfile::tempdir().unwrap();
    let text = stdout(&homeview(dir.path(), &["validate", concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures/elias.json")]));
    assert!(text.contains("thought records: 7"));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"schema_version": 1, "record_id": "x"}"#).unwrap();
    let out = homeview(dir.path(), &["validate", bad.to_str().unwrap()]);
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["code"].is_string() && err["message"].is_string() && err["path"].is_string());
}

#[test]
fn summarize_none_prints_exact_literal() {
    let dir = seeded();
    let out = homeview(dir.path(), &["summarize", "elias", "--level", "none"]);
    assert_eq!(stdout(&out), "No AI summary is needed.\n");
}

#[test]
fn audit_after_summarize_is_clean() {
    let dir = seeded();
    let text = stdout(&homeview(dir.path(), &["summarize", "elias", "--level", "detailed"]));
    assert!(text.contains("[[entry:"));
    let audit = stdout(&homeview(dir.path(), &["audit", "elias"]));
    assert!(audit.lines().any(|l| l == "dangling: 0, stale: 0"), "{audit}");
}

#[test]
fn summarize_text_is_derived_from_json_payload() {
    let dir = seeded();
    let text = stdout(&homeview(dir.path(), &["summarize", "elias", "--level", "basic"]));
    let json: Value = serde_json::from_str(&stdout(&homeview(dir.path(), &["--json", "summarize", "elias", "--level", "basic"]))).unwrap();
    let bodies: Vec<&str> = json["sections"].as_array().unwrap().iter().map(|s| s["text"]["body"].as_str().unwrap()).collect();
    assert_eq!(bodies.len(), 1);
    assert_eq!(text.trim_end(), bodies[0]);
}

#[test]
fn chat_prints_anchored_answer() {
    let dir = seeded();
    let text = stdout(&homeview(dir.path(), &["chat", "elias", "What should I try next?"]));
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("[Disclaimer]"));
    assert!(lines.all(|l| l.contains("[[entry:")));
}

#[test]
fn unknown_client_fails_with_structured_error() {
    let dir = seeded();
    let out = homeview(dir.path(), &["chat", "ghost", "How did she sleep?"]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["code"], "unknown_record");
}

#[test]
fn unknown_fixture_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = homeview(dir.path(), &["seed", "--fixture", "nobody"]);
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["path"], "fixture");
}
