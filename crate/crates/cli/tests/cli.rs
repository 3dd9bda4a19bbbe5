use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dispo_core::disposability::LISTED_POSITIONS;
use dispo_core::engine::{DISPO_DELTA_COMMAND, DISPO_POS_COMMAND};
use serde_json::{json, Value};

fn dispo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dispo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn generate_prints_digit_prefixes() {
    assert_eq!(
        stdout(&dispo(&["generate", "vtm", "--length", "12"])),
        "012021012102\n"
    );
    assert_eq!(
        stdout(&dispo(&["generate", "thue-morse", "--length", "16"])),
        "0110100110010110\n"
    );
}

#[test]
fn gaps_prints_the_three_values() {
    assert_eq!(
        stdout(&dispo(&["gaps", "--limit", "1048576"])),
        "6 10 26\n"
    );
}

#[test]
fn density_exact_prints_the_fraction() {
    assert_eq!(stdout(&dispo(&["density", "--mode", "exact"])), "1/12\n");
}

#[test]
fn density_empirical_emits_csv() {
    let out = stdout(&dispo(&[
        "density",
        "--mode",
        "empirical",
        "--checkpoints",
        "4096",
        "65536",
    ]));
    let lines: Vec<&str> = out.lines().collect();
    assert!(lines[0].starts_with("# config: command=density"));
    assert_eq!(lines[1], "n,density");
    assert!(lines[2].starts_with("4096,0.08"), "{}", lines[2]);
    assert!(lines[3].starts_with("65536,0.08"), "{}", lines[3]);
}

#[test]
fn disposable_csv_reproduces_the_listed_positions() {
    let out = stdout(&dispo(&[
        "disposable", "--limit", "204", "--max-half", "64", "--engine",
    ]));
    assert!(out.lines().next().unwrap().starts_with("# config:"));
    let positions: Vec<u64> = out
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("position"))
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(positions, LISTED_POSITIONS);
    assert!(out.lines().any(|l| l == "# final_max_half: 64"));
}

#[test]
fn single_position_verdicts_as_json() {
    let v: Value =
        serde_json::from_str(&stdout(&dispo(&["disposable", "--position", "0"]))).unwrap();
    assert_eq!(v["status"], json!("disposable_certified_to_bound"));
    assert_eq!(v["witness"], Value::Null);

    let out = dispo(&["disposable", "--position", "1", "--engine"]);
    assert!(out.status.success(), "engine must agree on position 1");
    let v: Value = serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(v["status"], json!("not_disposable"));
    assert_eq!(v["engine_accepted"], json!(false));
    assert_eq!(v["witness"]["half"], json!(2));
}

#[test]
fn check_reports_ok_for_known_words() {
    let v: Value =
        serde_json::from_str(&stdout(&dispo(&["check", "vtm", "--length", "100000"]))).unwrap();
    assert_eq!(v["ok"], json!(true));

    let v: Value =
        serde_json::from_str(&stdout(&dispo(&["check", "fs", "--length", "4000"]))).unwrap();
    assert_eq!(v["ok"], json!(true));
    assert_eq!(v["detail"]["square_census"], json!(["00", "0101", "11"]));
}

#[test]
fn walnut_compiles_the_fixture() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/dispo.walnut");
    // The fixture must carry the library's command text verbatim.
    let text = fs::read_to_string(path).unwrap();
    assert!(text.contains(DISPO_POS_COMMAND));
    assert!(text.contains(DISPO_DELTA_COMMAND));

    let out = stdout(&dispo(&["walnut", path, "--bound", "204"]));
    assert!(out.contains("# eval dispo_pos"));
    assert!(out.contains("tracks j"));
    let delta = out
        .split("# accepted values up to 204 (l)")
        .nth(1)
        .expect("delta section");
    let values: Vec<&str> = delta.lines().filter(|l| !l.is_empty()).collect();
    assert_eq!(values, ["6", "10", "26"]);
}

#[test]
fn construct_verify_roundtrip_and_tamper_detection() {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR"));
    let word = dir.join("w.txt");
    let ledger = dir.join("ledger.json");
    let summary = stdout(&dispo(&[
        "construct",
        "--phases",
        "1",
        "--out",
        word.to_str().unwrap(),
        "--ledger",
        ledger.to_str().unwrap(),
    ]));
    assert!(summary.starts_with("phases=1 records=55"), "{summary}");
    let prefix = fs::read_to_string(&word).unwrap();
    assert!(prefix.trim_end().bytes().all(|b| (b'0'..=b'2').contains(&b)));

    let ok = dispo(&[
        "verify",
        "--ledger",
        ledger.to_str().unwrap(),
        "--scan",
        "400",
    ]);
    assert!(ok.status.success());
    let v: Value = serde_json::from_str(&String::from_utf8(ok.stdout).unwrap()).unwrap();
    assert_eq!(v["all_certified"], json!(true));
    assert_eq!(v["digest_match"], json!(true));

    let mut tampered: Value =
        serde_json::from_str(&fs::read_to_string(&ledger).unwrap()).unwrap();
    let length = tampered["records"][0]["length"].as_u64().unwrap();
    tampered["records"][0]["length"] = json!(length + 1);
    let bad_path = dir.join("tampered.json");
    fs::write(&bad_path, serde_json::to_string(&tampered).unwrap()).unwrap();
    let bad = dispo(&[
        "verify",
        "--ledger",
        bad_path.to_str().unwrap(),
        "--scan",
        "400",
    ]);
    assert!(!bad.status.success(), "tampered ledger must fail");
    let v: Value = serde_json::from_str(&String::from_utf8(bad.stdout).unwrap()).unwrap();
    assert_eq!(v["all_certified"], json!(false));
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let base = stdout(&dispo(&["disposable", "--limit", "204", "--max-half", "64"]));
    let single = stdout(&dispo(&[
        "disposable", "--limit", "204", "--max-half", "64", "--threads", "1",
    ]));
    assert_eq!(base, single);
    let a = stdout(&dispo(&["generate", "fs", "--length", "2000"]));
    let b = stdout(&dispo(&["generate", "fs", "--length", "2000", "--threads", "1"]));
    assert_eq!(a, b);
}
