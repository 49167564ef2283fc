use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use conic_duality_cli::*;
use conic_duality_core::MarketConfig;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn example(dir: &Path) -> PathBuf {
    let mut buf = Vec::new();
    assert_eq!(cmd_paper_example(None, &mut buf), EXIT_OK);
    write(dir, "example.json", std::str::from_utf8(&buf).unwrap())
}

const ONE_ASSET: &str = r#"{"d": 1, "tree": {"branching": []}, "bidask": {"rule": "constant", "matrix": [[1.0]]}, "x0": [0.0]}"#;

const STATIC_TWO: &str = r#"{"d": 2, "tree": {"branching": []}, "bidask": {"rule": "constant", "matrix": [[1.0, 1.0], [8.0, 1.0]]}, "x0": [0.0, 0.0]}"#;

// Asset 2 doubles against asset 1 with certainty.
const PRICE_MOVE: &str = r#"{
  "d": 2,
  "tree": {"branching": [1]},
  "bidask": {"rule": "explicit", "matrices": [[[1.0, 1.0], [1.0, 1.0]], [[1.0, 2.0], [0.5, 1.0]]]},
  "x0": [0.0, 0.0]
}"#;

fn run(f: impl FnOnce(&mut Vec<u8>) -> i32) -> (i32, String) {
    let mut out = Vec::new();
    let code = f(&mut out);
    (code, String::from_utf8(out).unwrap())
}

fn opts(out_dir: PathBuf, grid: Option<usize>) -> DualityOptions {
    DualityOptions {
        grid,
        out_dir,
        ..DualityOptions::default()
    }
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = example(dir.path());
    assert_eq!(run(|o| cmd_validate(&good, o)).0, EXIT_OK);

    let bad_diag = write(
        dir.path(),
        "diag.json",
        r#"{"d": 2, "tree": {"branching": [2]}, "bidask": {"rule": "constant", "matrix": [[1.1, 1.0], [1.0, 1.0]]}, "x0": [0.0, 0.0]}"#,
    );
    let (code, text) = run(|o| cmd_validate(&bad_diag, o));
    assert_eq!(code, EXIT_VIOLATION);
    assert!(text.contains("DiagonalNotOne at node 0"), "{text}");

    let malformed = write(dir.path(), "bad.json", "{\"d\": 2,");
    assert_eq!(run(|o| cmd_validate(&malformed, o)).0, EXIT_PARSE);
    let missing = dir.path().join("nope.json");
    assert_eq!(run(|o| cmd_validate(&missing, o)).0, EXIT_PARSE);
}

#[test]
fn parse_errors_carry_a_path() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "typo.json",
        r#"{"d": 2, "tree": {"branching": [2]}, "bidask": {"rule": "constant", "matrix": [[1.0, "x"], [1.0, 1.0]]}, "x0": [0.0, 0.0]}"#,
    );
    let (code, text) = run(|o| cmd_validate(&p, o));
    assert_eq!(code, EXIT_PARSE);
    assert!(text.contains("bidask"), "{text}");
}

#[test]
fn no_arbitrage_outcomes() {
    let dir = tempfile::tempdir().unwrap();
    let ex = example(dir.path());
    let (code, text) = run(|o| cmd_no_arbitrage(&ex, &Tolerances::default(), o));
    assert_eq!(code, EXIT_OK);
    assert!(text.starts_with("no-arbitrage"));
    // Header plus one row per node of the 1 + 3 + 9 + 27 node tree.
    assert_eq!(text.lines().filter(|l| !l.starts_with("no-")).count(), 41);

    let mv = write(dir.path(), "move.json", PRICE_MOVE);
    let (code, text) = run(|o| cmd_no_arbitrage(&mv, &Tolerances::default(), o));
    assert_eq!(code, EXIT_ARBITRAGE, "{text}");
    let mut lines = text.lines().skip(2);
    let leaf: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .skip(1)
        .map(|v| v.parse().unwrap())
        .collect();
    assert!(leaf.iter().all(|&v| v >= -1e-12));
    assert!((leaf.iter().sum::<f64>() - 1.0).abs() < 1e-9);

    let one = write(dir.path(), "one.json", ONE_ASSET);
    assert_eq!(
        run(|o| cmd_no_arbitrage(&one, &Tolerances::default(), o)).0,
        EXIT_OK
    );
}

fn read_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn one_asset_single_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "one.json", ONE_ASSET);
    let out = dir.path().join("out");
    let (code, log) = run(|o| cmd_duality(&cfg, &opts(out.clone(), None), o));
    assert_eq!(code, EXIT_OK, "{log}");
    let rows = read_rows(&out.join("scalarizations.csv"));
    // A single asset has a single normalized weight whatever the grid size.
    assert_eq!(rows.len(), 2);
    let p: f64 = rows[1][1].parse().unwrap();
    let d: f64 = rows[1][2].parse().unwrap();
    assert!((p - 1.0).abs() < 1e-9 && (d - 1.0).abs() < 1e-9);
    assert_eq!(rows[1][6], "optimal");
}

#[test]
fn centroid_grid_on_static_market() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "static.json", STATIC_TWO);
    let out = dir.path().join("out");
    assert_eq!(
        run(|o| cmd_duality(&cfg, &opts(out.clone(), Some(1)), o)).0,
        EXIT_OK
    );
    let rows = read_rows(&out.join("scalarizations.csv"));
    assert_eq!(rows[0][..3], ["z1", "z2", "primal_value"]);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][0], "0.5");
    let p: f64 = rows[1][2].parse().unwrap();
    assert!((p - 1.0).abs() < 1e-7, "{p}");
}

#[test]
fn duality_outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = example(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = DualityOptions {
            grid: Some(11),
            svg: true,
            out_dir: out.clone(),
            ..DualityOptions::default()
        };
        assert_eq!(run(|w| cmd_duality(&cfg, &o, w)).0, EXIT_OK);
    }
    for name in [
        "scalarizations.csv",
        "upper_image_outer.csv",
        "upper_image_inner.csv",
        "upper_image.svg",
        "cones.svg",
    ] {
        let (x, y) = (
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
        );
        assert_eq!(x, y, "{name} differs");
        assert!(!x.contains(&b'\r'));
    }
    let strip = |p: &Path| -> Vec<Vec<String>> {
        read_rows(p)
            .into_iter()
            .map(|mut r| {
                r.pop();
                r
            })
            .collect()
    };
    assert_eq!(strip(&a.join("summary.csv")), strip(&b.join("summary.csv")));
    let summary = read_rows(&a.join("summary.csv"));
    assert_eq!(summary[0].last().unwrap(), "runtime_s");
    assert!(fs::read_to_string(a.join("cones.svg"))
        .unwrap()
        .starts_with("<svg"));
}

#[test]
fn duality_on_arbitrage_market() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "move.json", PRICE_MOVE);
    let out = dir.path().join("out");
    let (code, log) = run(|o| cmd_duality(&cfg, &opts(out.clone(), Some(3)), o));
    assert_eq!(code, EXIT_ARBITRAGE, "{log}");
    let rows = read_rows(&out.join("scalarizations.csv"));
    assert!(rows[1..]
        .iter()
        .all(|r| r[7].contains("dual_no_interior_point")));
}

#[test]
fn duality_rejects_invalid_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "tri.json",
        r#"{"d": 2, "tree": {"branching": []}, "bidask": {"rule": "constant", "matrix": [[1.0, 0.5], [0.5, 1.0]]}, "x0": [0.0, 0.0]}"#,
    );
    let (code, log) = run(|o| cmd_duality(&cfg, &opts(dir.path().join("out"), None), o));
    assert_eq!(code, EXIT_VIOLATION, "{log}");
    assert!(log.contains("TriangleViolation"), "{log}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn example_config_round_trip() {
    let mut first = Vec::new();
    cmd_paper_example(Some(21), &mut first);
    let text = String::from_utf8(first).unwrap();
    let cfg = MarketConfig::from_json(&text).unwrap();
    assert_eq!(cfg.to_json(), text);
    assert!(text.ends_with("}\n") && !text.contains('\r'));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_conic-duality");
    let dir = tempfile::tempdir().unwrap();
    let emitted = Command::new(bin).arg("paper-example").output().unwrap();
    assert!(emitted.status.success());
    let cfg = write(
        dir.path(),
        "ex.json",
        std::str::from_utf8(&emitted.stdout).unwrap(),
    );

    let status = |args: &[&str]| {
        Command::new(bin)
            .args(args)
            .env("CONIC_DUALITY_THREADS", "2")
            .output()
            .unwrap()
            .status
            .code()
    };
    let cfg_s = cfg.to_str().unwrap();
    assert_eq!(status(&["validate", cfg_s]), Some(0));
    let bad = write(dir.path(), "bad.json", "not json");
    assert_eq!(status(&["validate", bad.to_str().unwrap()]), Some(2));
    assert_eq!(status(&["frobnicate"]), Some(2));
    let mv = write(dir.path(), "move.json", PRICE_MOVE);
    assert_eq!(status(&["no-arbitrage", mv.to_str().unwrap()]), Some(3));
    let out = dir.path().join("out");
    assert_eq!(
        status(&[
            "duality",
            cfg_s,
            "--grid",
            "5",
            "--svg",
            "--out",
            out.to_str().unwrap(),
            "--tol-pg",
            "1e-9"
        ]),
        Some(0)
    );
    assert!(out.join("upper_image.svg").exists());
    assert!(out.join("summary.csv").exists());
}
