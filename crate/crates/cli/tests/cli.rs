use std::path::PathBuf;
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amqcfa"))
        .args(args)
        .current_dir(root())
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(args: &[&str]) -> serde_json::Value {
    let o = run(args);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn membership_of_the_example_instances() {
    for (file, member) in [
        ("data/member1.kg", true),
        ("data/nonmember1.kg", false),
        ("data/member2.kg", true),
        ("data/nonmember2.kg", false),
    ] {
        let v = json(&["knapsack", "member", file, "--json"]);
        assert_eq!(v["member"], member, "{file}");
        assert_eq!(v["schema"], 1);
    }
}

#[test]
fn knapsack_analysis_is_byte_identical_across_runs() {
    let args = [
        "knapsack",
        "analyze",
        "data/nonmember1.kg",
        "--all-strategies",
        "--json",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["strategies"].as_array().unwrap().len(), 4);
    assert_eq!(v["worst_case_rejection"]["exact"], "8/9");
}

#[test]
fn completion_round_trips_through_validate() {
    let v = json(&["sop", "complete", "data/half.payloads", "--json"]);
    assert_eq!(v["valid"], true);
    assert_eq!(v["denominator"], 2);
    let path = std::env::temp_dir().join(format!("amqcfa-cli-{}.sop", std::process::id()));
    std::fs::write(&path, v["superoperator"].as_str().unwrap()).unwrap();
    let w = json(&["sop", "validate", path.to_str().unwrap(), "--json"]);
    std::fs::remove_file(&path).ok();
    assert_eq!(w["elements"], v["elements"]);
}

#[test]
fn history_verification_of_the_parity_machine() {
    let v = json(&[
        "tm",
        "verify",
        "crates/core/data/parity.tm",
        "101",
        "--json",
    ]);
    assert_eq!(v["outcome"]["overall_accept"]["exact"], "1/1");
    let v = json(&["tm", "verify", "crates/core/data/parity.tm", "1", "--json"]);
    assert_eq!(v["outcome"]["overall_reject"]["exact"], "1/1");
    let run = stdout(&run(&["tm", "run", "crates/core/data/parity.tm", "101"]));
    assert!(run.trim_end().ends_with("accept"));
}

#[test]
fn sampling_is_reproducible_from_the_seed() {
    let args = [
        "sample",
        "coin",
        "--samples",
        "5000",
        "--seed",
        "7",
        "--json",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["chi_square"]["passed"], true);
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["knapsack", "frobnicate"]).status.code(), Some(1));
    assert_eq!(
        run(&[
            "tm",
            "verify",
            "crates/core/data/parity.tm",
            "1",
            "--d",
            "zero"
        ])
        .status
        .code(),
        Some(1)
    );
    assert_eq!(
        run(&["knapsack", "member", "data/missing.kg"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["knapsack", "member", "data/half.payloads"])
            .status
            .code(),
        Some(2)
    );
    let o = run(&[
        "tm",
        "verify",
        "crates/core/data/parity.tm",
        "1",
        "--coeff",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.starts_with("error: E_PARAMETER: "), "{err}");
    assert_eq!(err.lines().count(), 1);
    let o = run(&[
        "tm",
        "verify",
        "crates/core/data/parity.tm",
        "1",
        "--depth-limit",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8(o.stderr)
        .unwrap()
        .contains("E_DEPTH_LIMIT"));
}
