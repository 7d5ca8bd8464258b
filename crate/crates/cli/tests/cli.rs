use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn pmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pmc")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn config(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
        .display()
        .to_string()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn build(out: &Path, n: &str) {
    let o = pmc(&[
        "construct",
        "--config",
        &config("corollary.json"),
        "--out",
        p(out),
        "--grid",
        n,
        n,
        "--quiet",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn construct_is_deterministic() {
    let d = tempfile::tempdir().unwrap();
    let (x, y) = (d.path().join("x"), d.path().join("y"));
    build(&x, "41");
    build(&y, "41");
    for f in ["fields.csv", "meta.json"] {
        assert_eq!(
            std::fs::read(x.join(f)).unwrap(),
            std::fs::read(y.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn verify_passes_and_writes_report() {
    let d = tempfile::tempdir().unwrap();
    let (c, f, r) = (d.path().join("c"), d.path().join("f"), d.path().join("r"));
    build(&c, "41");
    build(&f, "81");
    let o = pmc(&["verify", p(&c), p(&f), "--out", p(&r), "--quiet"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(r.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
}

#[test]
fn tampered_c_fails_verification() {
    let d = tempfile::tempdir().unwrap();
    let c = d.path().join("c");
    build(&c, "41");
    let path = c.join("fields.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let header: Vec<&str> = lines[0].split(',').collect();
    let (re, im) = (
        header.iter().position(|h| *h == "c_re").unwrap(),
        header.iter().position(|h| *h == "c_im").unwrap(),
    );
    for l in lines.iter_mut().skip(1) {
        let mut cells: Vec<String> = l.split(',').map(str::to_string).collect();
        for k in [re, im] {
            let v: f64 = cells[k].parse().unwrap();
            cells[k] = format!("{:.16e}", v * 1.001);
        }
        *l = cells.join(",");
    }
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    let o = pmc(&["residuals", p(&c), "--json", "--quiet"]);
    assert_eq!(code(&o), 1);
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    let failed: Vec<&str> = report["equations"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|e| e["passed"] == false)
        .map(|e| e["id"].as_str().unwrap())
        .collect();
    assert!(failed.contains(&"E2_6_ricci"), "{failed:?}");
}

#[test]
fn mismatched_resolutions_rejected() {
    let d = tempfile::tempdir().unwrap();
    let (c, f) = (d.path().join("c"), d.path().join("f"));
    build(&c, "41");
    build(&f, "61");
    assert_eq!(code(&pmc(&["verify", p(&c), p(&f), "--quiet"])), 3);
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("o");
    assert_eq!(code(&pmc(&["--help"])), 0);
    assert_eq!(code(&pmc(&["--version"])), 0);
    assert_eq!(code(&pmc(&["frobnicate"])), 3);
    assert_eq!(code(&pmc(&["family", "--c1", "0.5", "--out", p(&out)])), 2);
    assert_eq!(
        code(&pmc(&[
            "tcoef", "--i", "14", "--alpha", "1", "--a", "0.3+0.4i", "--rho", "-3", "--b", "1"
        ])),
        3
    );
    assert_eq!(
        code(&pmc(&["construct", "--config", "/nonexistent.json", "--out", p(&out)])),
        3
    );
    let o = pmc(&[
        "construct",
        "--config",
        &config("generic.json"),
        "--out",
        p(&out),
        "--grid",
        "41",
        "41",
    ]);
    assert_eq!(code(&o), 2);
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["exit_code"], 2);
}

#[test]
fn flat_config_rejected() {
    let d = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("corollary.json"))
        .unwrap()
        .replace("\"rho\": -3", "\"rho\": 0");
    let cfg = d.path().join("flat.json");
    std::fs::write(&cfg, text).unwrap();
    let o = pmc(&["construct", "--config", p(&cfg), "--out", p(&d.path().join("o"))]);
    assert_eq!(code(&o), 3);
    assert!(!d.path().join("o").exists());
}

#[test]
fn tcoef_prints_value_and_partials() {
    let o = pmc(&[
        "tcoef",
        "--i",
        "1",
        "--alpha",
        "1.5707963267948966",
        "--a",
        "0.3+0.4i",
        "--rho",
        "-3",
        "--b",
        "1",
    ]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let value: Vec<f64> = text
        .lines()
        .find(|l| l.starts_with("value"))
        .unwrap()
        .split_whitespace()
        .skip(1)
        .map(|v| v.parse().unwrap())
        .collect();
    assert!(value.iter().all(|v| v.abs() < 1e-15), "{value:?}");
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn profile_table() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("p.csv");
    let o = pmc(&[
        "profile",
        "--rho",
        "-3",
        "--b",
        "1",
        "--alpha0",
        "0.6",
        "--a0",
        "0.3+0.4i",
        "--alpha-min",
        "0.45",
        "--alpha-max",
        "0.9",
        "--points",
        "11",
        "--out",
        p(&out),
        "--quiet",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out).unwrap();
    assert_eq!(text.lines().next().unwrap(), "alpha,a_re,a_im,F,K");
    assert_eq!(text.lines().count(), 12);
}
