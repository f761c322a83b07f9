//! Acceptance: CLI determinism and the exit-code contract (criterion 13),
//! exercised against the built binary.

use std::process::{Command, Output};

fn dbar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dbar"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn criterion_13_reruns_are_byte_identical() {
    let cases: Vec<Vec<&str>> = vec![
        vec![
            "solve-hartogs",
            "--k",
            "1",
            "--p",
            "5",
            "--form",
            "conj(z2):dz1, conj(z1):dz2",
            "--mode",
            "optimal",
        ],
        vec!["apstar", "--weight", "abs(w2)^2", "--p", "3", "--seed", "7"],
        vec![
            "counterexample",
            "t1-optimality",
            "--k",
            "1",
            "--p",
            "5",
            "--format",
            "csv",
        ],
        vec![
            "ratio-study",
            "--k",
            "1",
            "--p",
            "5",
            "--count",
            "3",
            "--seed",
            "11",
            "--format",
            "csv",
        ],
    ];
    for args in cases {
        let first = dbar(&args);
        let second = dbar(&args);
        assert!(first.status.success(), "{args:?}: {:?}", first);
        assert_eq!(
            first.stdout, second.stdout,
            "{args:?}: outputs differ between reruns"
        );
    }
    println!("criterion 13 PASS (determinism): byte-identical reruns on 4 commands");
}

#[test]
fn criterion_13_exit_code_contract() {
    // hypothesis rejection: non-closed form -> 3, stderr names the hypothesis
    let out = dbar(&["solve-product", "--form", "conj(w2):dw1"]);
    assert_eq!(out.status.code(), Some(3), "{out:?}");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("dbar-closed"), "stderr: {stderr}");

    // hypothesis rejection: Hardy below p = 4 without the override flag
    let out = dbar(&[
        "hardy", "--expr", "w1", "--k", "1", "--p", "4", "--j", "0",
    ]);
    assert_eq!(out.status.code(), Some(3), "{out:?}");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("p > 4"), "stderr: {stderr}");
    // and the explicit flag permits the exploratory run
    let out = dbar(&[
        "hardy",
        "--expr",
        "w1",
        "--k",
        "1",
        "--p",
        "4",
        "--j",
        "0",
        "--allow-low-p",
        "--nr",
        "16",
        "--ntheta",
        "32",
    ]);
    assert!(out.status.success(), "{out:?}");
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("\"exploratory\": true"));

    // numeric singularity: quadrature nodes on the branch cut -> 4
    let out = dbar(&[
        "norm",
        "--expr",
        "pow(w1, 0.5, 0, 2*pi)",
        "--domain",
        "disc",
        "--var",
        "w1",
        "--k",
        "0",
        "--p",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(4), "{out:?}");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("branch cut"), "stderr: {stderr}");

    // schema violation: malformed expression -> 2
    let out = dbar(&["norm", "--expr", "w1 + ", "--k", "0", "--p", "2"]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");

    println!("criterion 13 PASS (exit codes): 3/3/4/2 as contracted");
}

#[test]
fn config_file_mirrors_flags_and_is_validated() {
    let dir = std::env::temp_dir().join(format!("dbar-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let config_path = dir.join("config.json");
    std::fs::write(
        &config_path,
        r#"{ "nr": 16, "ntheta": 32, "seed": 9, "format": "csv" }"#,
    )
    .unwrap();
    let via_config = dbar(&[
        "--config",
        config_path.to_str().unwrap(),
        "identity",
        "--which",
        "ii",
        "--expr",
        "w1^2",
        "--k",
        "2",
    ]);
    let via_flags = dbar(&[
        "--nr", "16", "--ntheta", "32", "--seed", "9", "--format", "csv", "identity", "--which",
        "ii", "--expr", "w1^2", "--k", "2",
    ]);
    assert!(via_config.status.success(), "{via_config:?}");
    assert_eq!(via_config.stdout, via_flags.stdout);
    // CLI flag overrides the file
    let overridden = dbar(&[
        "--config",
        config_path.to_str().unwrap(),
        "--format",
        "json",
        "identity",
        "--which",
        "ii",
        "--expr",
        "w1^2",
        "--k",
        "2",
    ]);
    let text = String::from_utf8_lossy(&overridden.stdout);
    assert!(text.contains("\"schema\": 1"));
    // unknown config fields are a schema violation
    let bad_path = dir.join("bad.json");
    std::fs::write(&bad_path, r#"{ "nr": 16, "bogus": 1 }"#).unwrap();
    let out = dbar(&[
        "--config",
        bad_path.to_str().unwrap(),
        "identity",
        "--which",
        "ii",
        "--expr",
        "w1^2",
        "--k",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn out_flag_writes_the_artifact_to_a_file() {
    let dir = std::env::temp_dir().join(format!("dbar-out-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("result.csv");
    let out = dbar(&[
        "identity",
        "--which",
        "ii",
        "--expr",
        "w1^3",
        "--k",
        "3",
        "--format",
        "csv",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("which,residual\n"), "{text}");
    std::fs::remove_dir_all(&dir).ok();
}
