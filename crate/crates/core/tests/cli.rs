use std::path::Path;
use std::process::{Command, Output};

use nalgebra::DMatrix;
use qkext::harness::cli::cli_main;
use qkext::io::{read_matrix, sidecar_path, write_matrix};

fn qkext(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qkext"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn generate_subsample_complete_error_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let run = |args: &[&str]| {
        let out = qkext(args, d);
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        out
    };
    run(&[
        "gen-kernel",
        "--circuit",
        "ry_cx_chain",
        "--width",
        "2",
        "--N",
        "30",
        "--seed",
        "3",
        "--out",
        "k.bin",
    ]);
    assert!(sidecar_path(&d.join("k.bin")).exists());
    assert_eq!(stdout(&run(&["rank", "--in", "k.bin"])).trim(), "9");

    run(&[
        "subsample",
        "--in",
        "k.bin",
        "--two-block",
        "24,6,12",
        "--out",
        "view.json",
    ]);
    run(&[
        "complete",
        "--in",
        "view.json",
        "--out",
        "khat.bin",
        "--repair",
    ]);
    let diag: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(d.join("khat.bin.diagnostics.json")).unwrap(),
    )
    .unwrap();
    for key in [
        "steps",
        "repaired_blocks",
        "min_eigenvalue",
        "inverse_sparsity_max_violation",
    ] {
        assert!(diag.get(key).is_some(), "missing {key}");
    }
    let (_, side) = read_matrix(&d.join("khat.bin")).unwrap();
    assert_eq!(side.circuit_id.as_deref(), Some("ry_cx_chain"));

    let report: serde_json::Value = serde_json::from_str(&stdout(&run(&[
        "error",
        "--truth",
        "k.bin",
        "--estimate",
        "khat.bin",
        "--pattern",
        "view.json",
    ])))
    .unwrap();
    assert!(report["error"].as_f64().unwrap() < 1e-6);
}

#[test]
fn noisy_kernel_and_band_subsample() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let gen = [
        "gen-kernel",
        "--circuit",
        "rx_rz",
        "--width",
        "1",
        "--N",
        "12",
        "--shots",
        "128",
        "--seed",
        "4",
    ];
    assert!(qkext(&[&gen[..], &["--out", "a.bin"]].concat(), d)
        .status
        .success());
    assert!(qkext(&[&gen[..], &["--out", "b.bin"]].concat(), d)
        .status
        .success());
    assert_eq!(
        std::fs::read(d.join("a.bin")).unwrap(),
        std::fs::read(d.join("b.bin")).unwrap()
    );
    let (m, side) = read_matrix(&d.join("a.bin")).unwrap();
    assert_eq!(side.shots, Some(128));
    assert!(m
        .iter()
        .all(|v| (v * 128.0 - (v * 128.0).round()).abs() < 1e-9));

    let out = qkext(
        &[
            "subsample",
            "--in",
            "a.bin",
            "--band",
            "3",
            "--out",
            "v.json",
        ],
        d,
    );
    assert!(out.status.success());
    let out = qkext(
        &["complete", "--in", "v.json", "--out", "c.bin", "--repair"],
        d,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn rank_of_identity() {
    let dir = tempfile::tempdir().unwrap();
    write_matrix(&dir.path().join("id.bin"), &DMatrix::identity(7, 7), None).unwrap();
    let out = qkext(&["rank", "--in", "id.bin"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).trim(), "7");
}

#[test]
fn sweep_extend_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"circuit":"ry_cx_chain","width":2,"N":20,"n_new":5,"pattern":"two_block",
        "sweep":[0,5,10],"shots":[0,512],"trials":2,"data":{"source":"uniform_random","seed":8}}"#;
    std::fs::write(dir.path().join("cfg.json"), cfg).unwrap();
    let out = qkext(
        &["sweep-extend", "--config", "cfg.json", "--out-dir", "out"],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(dir.path().join("out/extension_sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 2 * 2);

    // without an output directory the table goes to stdout
    let out = qkext(&["sweep-extend", "--config", "cfg.json"], dir.path());
    assert_eq!(stdout(&out), csv);

    let out = qkext(&["sweep-band", "--config", "cfg.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn expressibility_and_rank_survey() {
    let dir = tempfile::tempdir().unwrap();
    let out = qkext(
        &[
            "expressibility",
            "--circuit",
            "rx_rz",
            "--width",
            "1",
            "--samples",
            "1000",
            "--seed",
            "2",
            "--histogram",
            "h.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v["kl"].as_f64().unwrap() >= 0.0);
    let hist = std::fs::read_to_string(dir.path().join("h.csv")).unwrap();
    assert_eq!(hist.lines().count(), 1 + 75);

    let out = qkext(
        &[
            "rank-survey",
            "--widths",
            "1",
            "--ns",
            "10",
            "--trials",
            "2",
            "--seed",
            "1",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 3);
    assert!(text
        .lines()
        .skip(1)
        .all(|l| l.starts_with("haar,1,0,10,") && l.ends_with(",4,4,true")));
}

#[test]
fn exit_codes() {
    assert_eq!(cli_main(["qkext", "--help"]), 0);
    assert_eq!(cli_main(["qkext", "--version"]), 0);
    assert_eq!(cli_main(["qkext", "rank", "--bogus"]), 1);
    assert_eq!(cli_main(["qkext", "frobnicate"]), 1);
    // stochastic commands need a seed
    assert_eq!(
        cli_main([
            "qkext",
            "expressibility",
            "--circuit",
            "rx_rz",
            "--width",
            "1"
        ]),
        1
    );
    assert_eq!(
        cli_main(["qkext", "rank-survey", "--widths", "1", "--ns", "4"]),
        1
    );

    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    assert_eq!(cli_main(["qkext", "rank", "--in", &p("missing.bin")]), 1);
    assert_eq!(
        cli_main([
            "qkext",
            "gen-kernel",
            "--circuit",
            "rx_rz",
            "--width",
            "9",
            "--N",
            "3",
            "--seed",
            "1",
            "--out",
            &p("x")
        ]),
        1
    );

    // every unknown entry of the reference is zero: a numerical failure
    write_matrix(&dir.path().join("id.bin"), &DMatrix::identity(4, 4), None).unwrap();
    std::fs::write(
        p("pattern.json"),
        r#"{"N":4,"blocks":[{"start":0,"end":1},{"start":2,"end":3}]}"#,
    )
    .unwrap();
    assert_eq!(
        cli_main([
            "qkext",
            "error",
            "--truth",
            &p("id.bin"),
            "--estimate",
            &p("id.bin"),
            "--pattern",
            &p("pattern.json")
        ]),
        2
    );
}
