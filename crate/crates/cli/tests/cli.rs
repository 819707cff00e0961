use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn fecap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fecap")).current_dir(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn sorted_entries(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    v.sort();
    v
}

#[test]
fn same_seed_gives_byte_identical_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = fecap(tmp.path(), &["pund", "--seed", "7", "--out", out]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(sorted_entries(&a), sorted_entries(&b));
    for name in sorted_entries(&a) {
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name}");
    }

    let o = fecap(tmp.path(), &["pund", "--seed", "8", "--out", "c"]);
    assert_eq!(code(&o), 0);
    let c = tmp.path().join("c");
    assert_ne!(fs::read(a.join("trace.csv")).unwrap(), fs::read(c.join("trace.csv")).unwrap());
}

#[test]
fn manifest_lists_every_file_with_its_digest() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fecap(tmp.path(), &["landscape", "--out", "l"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let dir = tmp.path().join("l");
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "landscape");
    let files = manifest["files"].as_array().unwrap();
    let mut listed: Vec<String> = files.iter().map(|f| f["name"].as_str().unwrap().to_owned()).collect();
    listed.push("manifest.json".into());
    listed.sort();
    assert_eq!(listed, sorted_entries(&dir));
    for f in files {
        let bytes = fs::read(dir.join(f["name"].as_str().unwrap())).unwrap();
        assert_eq!(f["bytes"].as_u64().unwrap(), bytes.len() as u64);
        let digest: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(f["sha256"].as_str().unwrap(), digest);
    }
}

#[test]
fn config_errors_exit_one_with_location() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.cfg"), "[stack]\nd_fe = 6.6nmm\n").unwrap();
    let o = fecap(tmp.path(), &["landscape", "--config", "bad.cfg", "--out", "x"]);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(err.contains("line 2, column 8"), "{err}");
    assert!(err.contains("stack.d_fe"), "{err}");
    assert!(!tmp.path().join("x").exists());

    fs::write(tmp.path().join("unknown.cfg"), "[stack]\nthickness = 6nm\n").unwrap();
    assert_eq!(code(&fecap(tmp.path(), &["landscape", "--config", "unknown.cfg", "--out", "x"])), 1);
    assert_eq!(code(&fecap(tmp.path(), &["pund", "--dt", "-1", "--out", "x"])), 1);
    assert_eq!(code(&fecap(tmp.path(), &["landscape", "--config", "missing.cfg", "--out", "x"])), 1);
    assert!(!tmp.path().join("x").exists());
}

#[test]
fn existing_output_needs_force() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&fecap(tmp.path(), &["landscape", "--out", "l"])), 0);
    fs::write(tmp.path().join("l/stale.txt"), "old").unwrap();
    let o = fecap(tmp.path(), &["landscape", "--out", "l"]);
    assert_eq!(code(&o), 1);
    assert!(tmp.path().join("l/stale.txt").exists());
    assert_eq!(code(&fecap(tmp.path(), &["landscape", "--out", "l", "--force"])), 0);
    assert!(!tmp.path().join("l/stale.txt").exists());
}

#[test]
fn numerical_failure_exits_two_and_leaves_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("lk.cfg"), "dynamics = lk\n[lk]\nmax_substeps = 2\n").unwrap();
    let o = fecap(tmp.path(), &["pund", "--config", "lk.cfg", "--out", "p"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("underflow"));
    assert_eq!(sorted_entries(tmp.path()), vec!["lk.cfg".to_string()]);
}

#[test]
fn fit_reads_external_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csv = String::from("t_s,P_uC_per_cm2\n");
    for k in 0..30 {
        let t = 1e-6 * 10f64.powf(k as f64 * 4.0 / 29.0);
        csv += &format!("{t:e},{:e}\n", 30.0 * (-t / 1e-3).exp() - 20.0);
    }
    fs::write(tmp.path().join("r.csv"), csv).unwrap();
    let o = fecap(tmp.path(), &["fit", "r.csv", "--out", "f"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let fit: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("f/fit.json")).unwrap()).unwrap();
    let tau = fit["tau_s"].as_f64().unwrap();
    let p0 = fit["p0_C_per_m2"].as_f64().unwrap();
    assert!((tau - 1e-3).abs() < 1e-9, "{tau}");
    assert!((p0 - 0.3).abs() < 1e-9, "{p0}");

    let o = fecap(tmp.path(), &["fit", "r.csv", "--units", "C/m2", "--out", "g"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn canonical_config_round_trips_through_the_binary() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&fecap(tmp.path(), &["landscape", "--seed", "3", "--out", "a"])), 0);
    let o = fecap(tmp.path(), &["landscape", "--config", "a/config.txt", "--out", "b"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        fs::read(tmp.path().join("a/config.txt")).unwrap(),
        fs::read(tmp.path().join("b/config.txt")).unwrap()
    );
    let digest = |d: &str| {
        let m: serde_json::Value =
            serde_json::from_slice(&fs::read(tmp.path().join(d).join("manifest.json")).unwrap()).unwrap();
        m["config_sha256"].as_str().unwrap().to_owned()
    };
    assert_eq!(digest("a"), digest("b"));
}
