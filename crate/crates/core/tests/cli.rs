//! Exit codes and output layout of the `feynman-dirac` binary.

use std::path::{Path, PathBuf};
use std::process::Output;

fn run(config: &str, out: &Path) -> Output {
    let dir = out.parent().unwrap();
    let path: PathBuf = dir.join("run.toml");
    std::fs::write(&path, config).unwrap();
    std::process::Command::new(env!("CARGO_BIN_EXE_feynman-dirac"))
        .arg(&path)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

const CAUSALITY: &str = r#"
scenario = "causality"

[grid]
n = 256
half_width = 4.0

[time]
t_i = 0.0
t_f = 1.0

[initial]
width = 0.08
cutoff = 0.5

[causality]
radius = 0.5
nu = 16
"#;

#[test]
fn passing_run_exits_zero_and_writes_csv_with_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(CAUSALITY, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("[PASS]"));
    assert!(!stdout.contains("[FAIL]"));

    let report = std::fs::read_to_string(out.join("report.csv")).unwrap();
    let mut lines = report.lines();
    assert_eq!(lines.next(), Some("scenario,check,measured,bound,verdict,tolerance"));
    assert!(lines.all(|l| l.starts_with("causality,") && l.contains(",PASS,")));

    let support = std::fs::read_to_string(out.join("support_radius.csv")).unwrap();
    assert!(support.starts_with("slice,time,radius,cone"));
    for name in ["report.csv", "support_radius.csv"] {
        let meta = std::fs::read_to_string(out.join(format!("{name}.meta.toml"))).unwrap();
        let table: toml::Table = meta.parse().unwrap();
        assert_eq!(table["file"].as_str(), Some(name));
        assert!(table.contains_key("seed") && table.contains_key("config"));
    }
}

#[test]
fn failing_check_exits_one() {
    // The standard algebra never leaves the unit cone, so this expectation fails.
    let config = format!("{CAUSALITY}expect_escape_unit_cone = true\n");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&config, &out);
    assert_eq!(o.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("[FAIL] escapes_unit_speed_cone"), "{stdout}");
    let report = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(report.contains(",FAIL,"));
}

#[test]
fn invalid_configs_exit_two() {
    let cases = [
        ("unknown key", "scenario = \"propagate\"\n[grid]\npoints = 64\n"),
        ("grid size", "scenario = \"propagate\"\n[grid]\nn = 100\n"),
        (
            "sigma above one",
            "scenario = \"unitarity\"\n[time]\nt_i = -1.0\nt_f = 1.0\nt_max = 2.0\n[division]\nladder_nu = [4]\nunitarity_zigzag_n = [1]\n[grid]\nn = 64\n",
        ),
        ("missing algebra file", "scenario = \"propagate\"\n[algebra]\nkind = \"custom\"\nfile = \"nope.toml\"\n"),
    ];
    for (what, config) in cases {
        let dir = tempfile::tempdir().unwrap();
        let o = run(config, &dir.path().join("out"));
        assert_eq!(o.status.code(), Some(2), "{what}: {}", String::from_utf8_lossy(&o.stdout));
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"), "{what}");
    }
}
