use std::fs;
use std::path::Path;
use std::process::Command;

fn diqkd(out: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_diqkd"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("DIQKD_THREADS", "2")
        .output()
        .unwrap()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap_or_default().to_string()
}

const KEYRATE: &[&str] = &["--mode", "keyrate", "--samples", "3000", "--bins", "40", "--seed", "5"];

#[test]
fn keyrate_writes_documented_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = diqkd(dir.path(), KEYRATE);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(header(&dir.path().join("eaves.csv")), "q,value,kind");
    assert_eq!(header(&dir.path().join("mutual.csv")), "q,value,kind");
    assert_eq!(header(&dir.path().join("ie.csv")), "bin_lo,bin_hi,value,occupied");
    assert_eq!(header(&dir.path().join("iab.csv")), "bin_lo,bin_hi,value,occupied");

    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    let keys: Vec<&str> = json.as_object().unwrap().keys().map(String::as_str).collect();
    let mut expected = vec![
        "inequality", "mode", "eta_a", "eta_b", "samples", "seed", "crossing_q", "crossing_i",
        "eps_cr", "eta_min", "runtime_s",
    ];
    let mut sorted = keys.clone();
    sorted.sort();
    expected.sort();
    assert_eq!(sorted, expected);
    assert_eq!(json["inequality"], "CHSH");
    assert_eq!(json["mode"], "keyrate");
    assert_eq!(json["samples"], 3000);
    assert!(json["eps_cr"].as_f64().unwrap() > 0.05);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(diqkd(a.path(), KEYRATE).status.code(), Some(0));
    assert_eq!(diqkd(b.path(), KEYRATE).status.code(), Some(0));
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 5);
    for name in names {
        assert_eq!(
            fs::read(a.path().join(&name)).unwrap(),
            fs::read(b.path().join(&name)).unwrap(),
            "{name:?} differs"
        );
    }
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad: &[&[&str]] = &[
        &["--mode", "keyrate", "--eta", "1.5"],
        &["--mode", "keyrate", "--inequality", "NOPE"],
        &["--mode", "keyrate", "--setup", "asymmetric", "--eta-a", "0.9"],
        &["--mode", "keyrate", "--setup", "custom", "--eta-a", "0.9"],
        &["--mode", "keyrate", "--samples", "0"],
        &["--mode", "warp"],
    ];
    for args in bad {
        let out = diqkd(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
    let out = Command::new(env!("CARGO_BIN_EXE_diqkd"))
        .args(["--mode", "keyrate", "--out"])
        .arg(dir.path())
        .env("DIQKD_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_crossing_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = diqkd(dir.path(), &["--mode", "keyrate", "--eta", "0.6", "--samples", "1500", "--bins", "30"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn csv_summary_and_custom_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let coeffs = dir.path().join("chsh.txt");
    fs::write(&coeffs, "name file-chsh\njoint 1 1 1\njoint 1 2 1\njoint 2 1 1\njoint 2 2 -1\namarg 1 -1\nbmarg 1 -1\n").unwrap();
    let out = diqkd(
        dir.path(),
        &["--mode", "curves", "--inequality", coeffs.to_str().unwrap(), "--samples", "1500", "--bins", "30",
          "--format", "csv"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(
        summary.lines().next().unwrap(),
        "inequality,mode,eta_a,eta_b,samples,seed,crossing_q,crossing_i,eps_cr,eta_min,runtime_s"
    );
    assert!(summary.lines().nth(1).unwrap().starts_with("file-chsh,curves,"));
}
