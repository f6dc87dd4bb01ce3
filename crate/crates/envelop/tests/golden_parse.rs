use std::path::{Path, PathBuf};
use std::process::Command;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn parse_with(rule: &str) -> (String, String) {
    let dir = tempfile::tempdir().unwrap();
    let occ = dir.path().join("occ.jsonl");
    let out = Command::new(env!("CARGO_BIN_EXE_envelop"))
        .arg("parse")
        .arg(fixture("golden_log.jsonl"))
        .arg("--rule")
        .arg(fixture(rule))
        .arg("--occurrences-out")
        .arg(&occ)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    (
        String::from_utf8(out.stdout).unwrap(),
        std::fs::read_to_string(occ).unwrap(),
    )
}

#[test]
fn occurrences_match_golden_files_byte_for_byte() {
    for name in ["mark", "drop"] {
        let (_, occ) = parse_with(&format!("rule_{name}.json"));
        let golden =
            std::fs::read_to_string(fixture(&format!("golden_occurrences_{name}.jsonl"))).unwrap();
        assert_eq!(occ, golden, "rule {name}");
    }
}

#[test]
fn rules_diverge_on_the_same_log() {
    let total = |csv: &str| -> u64 {
        // sum the count column
        csv.lines()
            .skip(2)
            .map(|l| l.split(',').nth(3).unwrap().parse::<u64>().unwrap())
            .sum()
    };
    let (mark, _) = parse_with("rule_mark.json");
    let (drop, _) = parse_with("rule_drop.json");
    assert_eq!(total(&mark), 22);
    assert_eq!(total(&drop), 15);
    // silent windows surface as inconclusive under the marking rule
    assert!(mark.contains(",inconclusive,"));
}

#[test]
fn reordered_log_is_rejected() {
    let text = std::fs::read_to_string(fixture("golden_log.jsonl")).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.swap(0, 5);
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    std::fs::write(&log, lines.join("\n")).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_envelop"))
        .arg("parse")
        .arg(&log)
        .arg("--rule")
        .arg(fixture("rule_mark.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let diag: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(diag["kind"], "structure");
}
