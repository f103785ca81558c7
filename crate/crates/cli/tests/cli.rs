use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sidechan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sidechan")).args(args).output().expect("run sidechan")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn exported_identical_preset_analyzes_to_zero() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    assert_eq!(
        code(&sidechan(&["simulate", "--preset", "identical", "--seed", "1", "--export", "--out", path(&sim)])),
        0
    );
    let report = dir.path().join("r.json");
    let manifest = sim.join("ensemble/manifest.toml");
    let out = sidechan(&["analyze", "--manifest", path(&manifest), "--out", path(&report)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    for section in doc["parameters"].as_array().unwrap() {
        for r in section["results"].as_array().unwrap() {
            assert_eq!(r["max"].as_f64().unwrap(), 0.0, "{r}");
        }
    }
    assert_eq!(doc["schema_version"], 1);
}

#[test]
fn missing_diode_names_the_label() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    sidechan(&["simulate", "--preset", "paper", "--seed", "1", "--export", "--out", path(&sim)]);
    let manifest = sim.join("ensemble/manifest.toml");
    let text = fs::read_to_string(&manifest).unwrap();
    let cut = text.find("[[diode]]\nlabel = \"A\"").expect("A entry");
    fs::write(&manifest, &text[..cut]).unwrap();
    let out = sidechan(&["analyze", "--manifest", path(&manifest), "--out", path(&dir.path().join("r.json"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no diode labeled A"));
}

#[test]
fn paper_preset_wavelength_guessing_in_band() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    sidechan(&["simulate", "--preset", "paper", "--seed", "0", "--export", "--out", path(&sim)]);
    let report = dir.path().join("r.json");
    let manifest = sim.join("ensemble/manifest.toml");
    let out = sidechan(&[
        "analyze",
        "--manifest",
        path(&manifest),
        "--param",
        "wavelength",
        "--method",
        "guessing",
        "--out",
        path(&report),
    ]);
    assert_eq!(code(&out), 0);
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let r = &doc["parameters"][0]["results"][0];
    assert_eq!(r["method"], "guessing");
    for b in ["hv", "da"] {
        let v = r[b]["bits_per_pulse"].as_f64().unwrap();
        assert!((1e-4..=1e-2).contains(&v), "{b}: {v}");
    }
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = sidechan(&[
            "simulate",
            "--preset",
            "worst-case",
            "--seed",
            "5",
            "--sweep",
            "pulse:0:400:5",
            "--method",
            "exact",
            "--method",
            "mc",
            "--mc-samples",
            "20000",
            "--export",
            "--out",
            path(&out),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (run("a"), run("b"));
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.iter().any(|n| n == "sweep_exact.dat") && names.iter().any(|n| n == "sweep_r0.dat"));
    for n in names.iter().filter(|n| a.join(n).is_file()) {
        assert_eq!(fs::read(a.join(n)).unwrap(), fs::read(b.join(n)).unwrap(), "{n:?}");
    }
    for e in fs::read_dir(a.join("ensemble")).unwrap() {
        let n = e.unwrap().file_name();
        assert_eq!(fs::read(a.join("ensemble").join(&n)).unwrap(), fs::read(b.join("ensemble").join(&n)).unwrap());
    }
}

#[test]
fn sweep_files_are_two_column_text() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    sidechan(&["simulate", "--preset", "paper", "--seed", "0", "--sweep", "pixel:1,2,4,8", "--out", path(&out)]);
    let text = fs::read_to_string(out.join("sweep_exact.dat")).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split_whitespace().map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.len() == 2));
    assert!(rows.windows(2).all(|w| w[1][1] <= w[0][1] + 1e-12));
}

#[test]
fn keyrate_exit_codes() {
    let out = sidechan(&["keyrate", "--qber", "0", "--preset", "identical", "--seed", "0"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("r 1\n"));
    assert_eq!(code(&sidechan(&["keyrate", "--qber", "0.5", "--preset", "paper", "--seed", "0"])), 3);
    assert_eq!(code(&sidechan(&["keyrate", "--qber", "0.05", "--preset", "paper", "--seed", "0"])), 0);
    assert_eq!(code(&sidechan(&["keyrate", "--qber", "0.6", "--preset", "paper", "--seed", "0"])), 2);
    assert_eq!(
        code(&sidechan(&["keyrate", "--qber", "0.05", "--preset", "paper", "--seed", "0", "--direction", "rr"])),
        2
    );
    let rr = ["keyrate", "--qber", "0.05", "--preset", "paper", "--seed", "0", "--direction", "rr", "--i-be", "0.9"];
    assert_eq!(code(&sidechan(&rr)), 3);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&sidechan(&["simulate", "--preset", "nope", "--seed", "0", "--out", "/tmp/x"])), 2);
    assert_eq!(
        code(&sidechan(&["simulate", "--preset", "paper", "--seed", "0", "--sweep", "pixel:0", "--out", "/tmp/x"])),
        2
    );
    assert_eq!(code(&sidechan(&["analyze", "--manifest", "/nonexistent/m.toml", "--out", "/tmp/x.json"])), 2);
    assert_eq!(code(&sidechan(&["analyze", "--out", "/tmp/x.json"])), 2);
    assert_eq!(code(&sidechan(&["keyrate", "--qber", "0.1"])), 2);
}

#[test]
fn cell_budget_env_var_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    sidechan(&["simulate", "--preset", "paper", "--seed", "0", "--export", "--out", path(&sim)]);
    let manifest = sim.join("ensemble/manifest.toml");
    let joint = |budget: &str| {
        let report = dir.path().join(format!("r{budget}.json"));
        let out = Command::new(env!("CARGO_BIN_EXE_sidechan"))
            .env("SIDECHAN_CELL_BUDGET", budget)
            .args(["analyze", "--manifest", path(&manifest), "--param", "wavelength", "--param", "arrival", "--joint"])
            .args(["--method", "exact", "--out", path(&report)])
            .output()
            .unwrap();
        assert_eq!(code(&out), 0);
        let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
        doc["budget"]["joint_independent"]["max"].as_f64().unwrap()
    };
    let (small, large) = (joint("16"), joint("16384"));
    assert!(small < large, "{small} vs {large}");
}
