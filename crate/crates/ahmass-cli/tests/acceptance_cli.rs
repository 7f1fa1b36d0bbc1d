//! CLI acceptance: determinism of the runner plus the exit-code contract.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_ahmass")
}

fn config_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

#[test]
fn c14_verify_twice_is_byte_identical() {
    let tmp = std::env::temp_dir().join("ahmass_cli_determinism");
    let _ = std::fs::remove_dir_all(&tmp);
    let run = |out: &Path| {
        let status = Command::new(bin())
            .args(["verify", "--config"])
            .arg(config_dir().join("verify_quick.cfg"))
            .arg("--out")
            .arg(out)
            .args(["--jobs", "2"])
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0), "verify_all must exit 0");
    };
    // literally twice from the same config and flags, snapshotting between
    let a = tmp.join("out");
    run(&a);
    let ta = read_tree(&a);
    run(&a);
    let tb = read_tree(&a);
    assert_eq!(ta.len(), tb.len());
    let mut compared = 0;
    for ((na, ba), (nb, bb)) in ta.iter().zip(&tb) {
        assert_eq!(na, nb);
        assert_eq!(ba, bb, "outputs differ for {na}");
        compared += 1;
    }
    println!("acceptance c14 determinism: PASS ({compared} files byte-identical, exit 0 twice)");
    assert!(compared >= 3); // summary.json, plot_data.csv, plot_readme.md

    // summary lists one status entry per invariant in the suite
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(a.join("summary.json")).unwrap()).unwrap();
    let checks = summary["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 14, "one entry per invariant");
    assert!(checks.iter().all(|c| c["pass"].as_bool().unwrap()));
}

#[test]
fn config_validation_exits_2_with_line_diagnostics() {
    let tmp = std::env::temp_dir().join("ahmass_cli_badcfg");
    let _ = std::fs::remove_dir_all(&tmp);
    std::fs::create_dir_all(&tmp).unwrap();

    // backward-horizon range violation for the cutoff construction
    let bad = tmp.join("bad_theta.cfg");
    std::fs::write(
        &bad,
        "[experiment]\nkind = cutoff_drift\nn = 3\n\n[cutoff]\nradii = 20\ntheta = 2.0\n",
    )
    .unwrap();
    let out = Command::new(bin())
        .args(["cutoff", "--config"])
        .arg(&bad)
        .arg("--out")
        .arg(tmp.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("admissible backward-horizon range"),
        "stderr should name the violated range: {stderr}"
    );

    // unknown key cited with its line number
    let unknown = tmp.join("unknown.cfg");
    std::fs::write(&unknown, "[experiment]\nkind = certificate\nbogus = 1\n").unwrap();
    let out = Command::new(bin())
        .args(["certificate", "--config"])
        .arg(&unknown)
        .arg("--out")
        .arg(tmp.join("out2"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 3"), "{stderr}");

    // kind/subcommand mismatch
    let out = Command::new(bin())
        .args(["mass", "--config"])
        .arg(&unknown)
        .arg("--out")
        .arg(tmp.join("out3"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_metric_mass_table_exits_0_with_zero_masses() {
    let tmp = std::env::temp_dir().join("ahmass_cli_zero_mass");
    let _ = std::fs::remove_dir_all(&tmp);
    std::fs::create_dir_all(&tmp).unwrap();
    let cfg = tmp.join("zero.cfg");
    std::fs::write(
        &cfg,
        "[experiment]\nkind = mass_table\nn = 3\n\n[metric]\nfamily = zero\n\n[mass]\nradii = 50, 100, 200\n",
    )
    .unwrap();
    let out_dir = tmp.join("out");
    let status = Command::new(bin())
        .args(["mass", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let table = std::fs::read_to_string(out_dir.join("mass_table.csv")).unwrap();
    for line in table.lines().skip(1) {
        let mass: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(mass, 0.0);
    }
    // every config parameter appears in the summary echo
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("summary.json")).unwrap()).unwrap();
    let params = summary["parameters"].as_object().unwrap();
    for key in ["experiment.kind", "metric.family", "mass.radii", "grid.nodes", "cutoff.bump_width"] {
        assert!(params.contains_key(key), "summary missing parameter {key}");
    }
}
