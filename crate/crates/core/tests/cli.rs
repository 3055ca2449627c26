use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anderson-lab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn ids_run_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&["ids", "--L", "32", "--samples", "40", "--npoints", "6"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("ids.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("E,N_hat,stderr,samples,volume"));
    assert_eq!(lines.count(), 6);
    let m: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("ids.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["experiment"], "ids");
    assert_eq!(m["flags_tripped"], false);
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    let sha = anderson_lab::harness::sha256_hex(csv.as_bytes());
    assert_eq!(m["results"][0]["sha256"], sha.as_str());
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["dos", "--L", "48", "--samples", "60", "--bins", "20", "--seed", "9"];
    let one = [&args[..], &["--workers", "1"]].concat();
    let eight = [&args[..], &["--workers", "8"]].concat();
    assert_eq!(code(&lab(&one, a.path())), 0);
    assert_eq!(code(&lab(&eight, b.path())), 0);
    let x = std::fs::read(a.path().join("dos.csv")).unwrap();
    let y = std::fs::read(b.path().join("dos.csv")).unwrap();
    assert_eq!(x, y);
    // rerun in place
    assert_eq!(code(&lab(&one, a.path())), 0);
    assert_eq!(std::fs::read(a.path().join("dos.csv")).unwrap(), x);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&["no-such-experiment"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("experiment"));

    let o = lab(&["probe-heat", "--L", "30"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("L:"));

    let o = lab(&["wegner", "--intervals", "0.3,0.1"], dir.path());
    assert_eq!(code(&o), 2);

    let o = lab(&["dos", "--dist", "uniform:1,0"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(!dir.path().join("dos.csv").exists());
}

#[test]
fn volume_cap_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&["ids", "--dim", "3", "--L", "64", "--max-volume", "1000"], dir.path());
    assert_eq!(code(&o), 3);
}

#[test]
fn config_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[experiment]\nname = \"ids\"\n[lattice]\ndim = 1\nL = 16\n[sampling]\nsamples = 10\n[energy]\nnpoints = 3\n",
    )
    .unwrap();
    let o = lab(&["--config", cfg.to_str().unwrap(), "--npoints", "4"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("ids.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);

    std::fs::write(&cfg, "[lattice]\nsize = 3\n").unwrap();
    assert_eq!(code(&lab(&["ids", "--config", cfg.to_str().unwrap()], dir.path())), 2);
}

#[test]
fn wegner_ratio_stays_bounded_for_a_peaked_density() {
    // 90% of the mass sits on [0, 1e-4], so the raw trace for [0, 1e-3] is large,
    // but it stays below |Λ| |I| sup(rho).
    let dir = tempfile::tempdir().unwrap();
    let o = lab(
        &[
            "wegner",
            "--L",
            "4",
            "--dist",
            "piecewise:0,0.0001,1;9000,0.1000100010001",
            "--samples",
            "2000",
            "--intervals",
            "0,0.4;0,0.1;0,0.01;0,0.001",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("wegner.csv")).unwrap();
    let last = csv.lines().last().unwrap();
    let trace: f64 = last.split(',').nth(2).unwrap().parse().unwrap();
    assert!(trace > 0.5, "{last}");
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",false")));
}

#[test]
fn failed_check_exits_1() {
    // A window of ten spacings in a 64-site chain leaves almost no room for count
    // fluctuations, so the variance check fails.
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&["minami", "--L", "64", "--samples", "100"], dir.path());
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("minami.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["flags_tripped"], true);
    let csv = std::fs::read_to_string(dir.path().join("minami.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("variance_ratio,") && l.ends_with(",false")));
}

#[test]
fn probe_heat_reports_no_violations() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&["probe-heat", "--L", "16", "--samples", "20"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("probe-heat.csv")).unwrap();
    let row = csv.lines().find(|l| l.starts_with("violations,")).unwrap();
    assert!(row.starts_with("violations,0,"), "{row}");
}

#[test]
fn lemma_probe_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&["probe-lemma", "--samples", "400"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}
