use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn boselab(args: &[&str], config: Option<&Path>, out: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_boselab"));
    cmd.args(args).arg("--deterministic").arg("--out").arg(out);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

const SMALL: &str = "[model]\nN = 2\nkappa = 0.1\nell = 0.45\n[potential]\nfamily = \"soft_sphere\"\nv0 = 2.0\nR = 0.3\n";

#[test]
fn missing_or_invalid_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(boselab(&["scatter"], None, dir.path()).status.code(), Some(1));
    let bad = write_config(dir.path(), "[model]\nell = 0.7\n");
    let out = boselab(&["scatter"], Some(&bad), dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ell"));
    let unknown = write_config(dir.path(), "[model]\nspin = 1\n");
    assert_eq!(boselab(&["scatter"], Some(&unknown), dir.path()).status.code(), Some(1));
    assert_eq!(boselab(&["frobnicate"], None, dir.path()).status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    let out = Command::new(env!("CARGO_BIN_EXE_boselab")).arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("verify"));
}

#[test]
fn scatter_build_ground_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    for (cmd, files) in [
        (&["scatter"][..], &["eta_table.csv", "scattering.json"][..]),
        (&["build", "--dump"][..], &["operators.json", "H_N.bin", "B.bin"][..]),
        (&["ground", "--dump"][..], &["spectrum.csv", "ground_state.bin"][..]),
    ] {
        let out = boselab(cmd, Some(&cfg), dir.path());
        assert!(out.status.success(), "{cmd:?}: {}", String::from_utf8_lossy(&out.stderr));
        for f in files {
            assert!(dir.path().join(f).exists(), "{cmd:?} did not write {f}");
        }
    }
    let eta = std::fs::read_to_string(dir.path().join("eta_table.csv")).unwrap();
    assert_eq!(eta.lines().next().unwrap(), "px,py,pz,eta,gamma,sigma,in_PH");
    assert_eq!(eta.lines().count(), 27);
    let ops: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("operators.json")).unwrap()).unwrap();
    for op in ops.as_array().unwrap() {
        assert!(op["hermiticity_residual"].as_f64().unwrap() < 1e-12, "{op}");
    }
    let spectrum = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    let row: Vec<&str> = spectrum.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "2");
    let zeta2: f64 = row[6].parse().unwrap();
    assert!(zeta2.abs() < 1e-10);
    let gs = std::fs::read(dir.path().join("ground_state.bin")).unwrap();
    let dim = u64::from_le_bytes(gs[..8].try_into().unwrap()) as usize;
    assert_eq!(gs.len(), 8 + 8 * dim);
}

#[test]
fn free_gas_pipeline_has_zero_energies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("v0 = 2.0", "v0 = 0.0"));
    let out = boselab(&["pipeline"], Some(&cfg), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("pipeline.csv")).unwrap();
    let stages: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(stages, ["L", "G", "J", "M"]);
    for line in csv.lines().skip(1) {
        let cells: Vec<f64> = line.split(',').skip(1).map(|c| c.parse().unwrap()).collect();
        assert!(cells[0].abs() < 1e-12 && cells[1].abs() < 1e-12, "{line}");
    }
}

#[test]
fn pipeline_respects_the_dense_cap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL}[solver]\ndense_dim_cap = 5\n"));
    assert_eq!(boselab(&["pipeline"], Some(&cfg), dir.path()).status.code(), Some(1));
}
