use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const BASE: &str = r#"
[params]
dim = 3
m = 2.0
gamma = 0.0

[grid]
r_max = 4.0
cells = 128

[initial]
kind = "barenblatt"
c1 = 0.2
t0 = 0.1
"#;

fn wpme(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wpme"))
        .args(args)
        .env("WPME_OUTPUT_DIR", out)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &TempDir, body: &str) -> String {
    let path = dir.path().join("run.toml");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn barenblatt(t: f64, r: f64) -> f64 {
    // c1 = 0.2, N = 3, m = 2, gamma = 0: lambda = 0.6, c2 = lambda / 12
    let lambda = 0.6;
    let s = r * t.powf(-lambda / 3.0);
    t.powf(-lambda) * (0.2 - lambda / 12.0 * s * s).max(0.0)
}

#[test]
fn solve_writes_snapshots_close_to_the_oracle() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(&dir, &format!("{BASE}\n[schedule]\ntimes = [0.5, 1.0]\n"));
    let o = wpme(&["solve", "--config", &cfg], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let mut names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("snap_"))
        .collect();
    names.sort();
    assert_eq!(names.len(), 3);
    assert!(names[2].starts_with("snap_0002_1.000000e0"));

    let text = fs::read_to_string(out.join(&names[2])).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("r,u"));
    let mut worst = 0.0f64;
    for line in lines {
        let (r, u) = line.split_once(',').unwrap();
        let (r, u): (f64, f64) = (r.parse().unwrap(), u.parse().unwrap());
        worst = worst.max((u - barenblatt(1.0, r)).abs());
    }
    assert!(worst < 0.02, "max deviation {worst}");

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["grid"]["cells"], 128);
    assert!(manifest["blowup_time"].is_null());
    let ledger = &manifest["mass_ledger"];
    let drift = (ledger["final"].as_f64().unwrap() - ledger["initial"].as_f64().unwrap()).abs();
    assert!(drift < 1e-10);
}

#[test]
fn csv_values_round_trip_exactly() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(&dir, &format!("{BASE}\n[schedule]\ntimes = [0.2]\n"));
    assert_eq!(wpme(&["solve", "--config", &cfg], &out).status.code(), Some(0));
    let text = fs::read_to_string(out.join("snap_0001_2.000000e-1.csv")).unwrap();
    for line in text.lines().skip(1) {
        for field in line.split(',') {
            let v: f64 = field.parse().unwrap();
            assert_eq!(format!("{v:.16e}"), field);
        }
    }
}

#[test]
fn malformed_config_exits_with_code_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &format!("{BASE}\n[schedule]\ntimes = [0.5, \"x\"]\n"));
    let o = wpme(&["solve", "--config", &cfg], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line"), "{err}");

    let cfg = write_config(&dir, &BASE.replace("gamma = 0.0", "gamma = 2.5"));
    assert_eq!(wpme(&["solve", "--config", &cfg], &dir.path().join("out")).status.code(), Some(2));

    let cfg = write_config(&dir, &format!("{BASE}\n[schedule]\ntimes = [0.5]\nbogus = 1\n"));
    let o = wpme(&["solve", "--config", &cfg], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
}

#[test]
fn empty_schedule_exits_with_code_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &format!("{BASE}\n[schedule]\ntimes = []\n"));
    let o = wpme(&["solve", "--config", &cfg], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("schedule"));
}

#[test]
fn unknown_or_missing_check_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &format!("{BASE}\n[schedule]\ntimes = [0.5]\n"));
    assert_eq!(wpme(&["verify", "nonsense", "--config", &cfg], &dir.path().join("out")).status.code(), Some(2));
    assert_eq!(wpme(&["verify", "flb", "--config", &cfg], &dir.path().join("out")).status.code(), Some(2));
    assert_eq!(wpme(&["suite", "--config", &cfg], &dir.path().join("out")).status.code(), Some(2));
}

#[test]
fn verify_pass_fail_and_determinism() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let body = format!(
        "{BASE}\n[schedule]\ntimes = [0.2, 0.5, 1.0, 2.0]\n\n[checks.ab_monotonicity]\n\n[checks.global_smoothing]\nwindow = [0.2, 2.0]\ntol = 1e-6\n"
    );
    let cfg = write_config(&dir, &body);
    assert_eq!(wpme(&["verify", "ab_monotonicity", "--config", &cfg], &out).status.code(), Some(0));
    let first = fs::read(out.join("report_ab_monotonicity.json")).unwrap();
    assert_eq!(wpme(&["verify", "ab_monotonicity", "--config", &cfg], &out).status.code(), Some(0));
    assert_eq!(first, fs::read(out.join("report_ab_monotonicity.json")).unwrap());

    let report: serde_json::Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(report["config"]["initial"]["kind"], "barenblatt");
    assert_eq!(report["report"]["pass"], true);

    // slope within 1e-6 of -lambda is beyond the scheme's accuracy
    assert_eq!(wpme(&["verify", "global_smoothing", "--config", &cfg], &out).status.code(), Some(1));
    assert_eq!(wpme(&["suite", "--config", &cfg], &out).status.code(), Some(1));
    let suite: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("suite.json")).unwrap()).unwrap();
    assert_eq!(suite["pass"], false);
    assert_eq!(suite["reports"].as_array().unwrap().len(), 2);
}

#[test]
fn step_collapse_without_blowup_reporting_is_a_runtime_failure() {
    let dir = TempDir::new().unwrap();
    let body = r#"
[params]
dim = 3
m = 2.0
gamma = 0.0

[grid]
r_max = 1.0
cells = 32

[initial]
kind = "blowup"
t_blowup = 0.5

[control]
dt0 = 1e-3
report_blowup = false

[schedule]
times = [0.25, 1.0]
"#;
    let cfg = write_config(&dir, body);
    let o = wpme(&["solve", "--config", &cfg], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn blowup_is_reported_in_the_manifest() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let body = r#"
[params]
dim = 3
m = 2.0
gamma = 0.0

[grid]
r_max = 1.0
cells = 32

[initial]
kind = "blowup"
t_blowup = 0.5

[control]
dt0 = 1e-4
dt_max = 1e-4

[schedule]
times = [0.25, 1.0]
"#;
    let cfg = write_config(&dir, body);
    assert_eq!(wpme(&["solve", "--config", &cfg], &out).status.code(), Some(0));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let t = manifest["blowup_time"].as_f64().unwrap();
    assert!((t - 0.5).abs() < 0.015, "{t}");
    assert_eq!(manifest["boundary"], "pressure_dirichlet");
}

#[test]
fn profile_initial_data_from_csv() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    fs::write(dir.path().join("u0.csv"), "r,u\n0,1\n0.5,0.5\n1,0\n4,0\n").unwrap();
    let body = BASE.replace("kind = \"barenblatt\"\nc1 = 0.2\nt0 = 0.1", "kind = \"profile\"\npath = \"u0.csv\"");
    let cfg = write_config(&dir, &format!("{body}\n[schedule]\ntimes = [0.1]\n"));
    let o = wpme(&["solve", "--config", &cfg], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("snap_0000_0.000000e0.csv")).unwrap();
    // cells hold weighted averages, so centre values match the profile to O(h)
    for line in text.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        let expect = (1.0 - v[0]).max(0.0);
        assert!((v[1] - expect).abs() < 0.02, "r = {}: {} vs {expect}", v[0], v[1]);
    }
}

#[test]
fn convergence_table_has_both_studies() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let body = format!(
        "{BASE}\n[schedule]\ntimes = [0.5]\n\n[convergence]\nlevels = [{{ cells = 64, dt = 4e-3 }}, {{ cells = 128, dt = 2e-3 }}]\n"
    );
    let cfg = write_config(&dir, &body);
    assert_eq!(wpme(&["convergence", "--config", &cfg], &out).status.code(), Some(0));
    let text = fs::read_to_string(out.join("convergence.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "study,cells,dt,error,order");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("barenblatt,64,") && lines[1].ends_with(','));
    assert!(lines[4].starts_with("blowup,128,"));
    let order: f64 = lines[2].rsplit(',').next().unwrap().parse().unwrap();
    assert!(order > 0.8, "{order}");
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["barenblatt.toml", "blowup.toml", "dirac.toml"] {
        let text = fs::read_to_string(root.join(name)).unwrap();
        let value: toml::Value = toml::from_str(&text).unwrap();
        assert!(value.get("params").is_some(), "{name}");
    }
}
