use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use actuopt_cli::{run, sweep, ExperimentConfig, Pipeline};
use serde_json::Value;
use sha2::{Digest, Sha256};

const BIN: &str = env!("CARGO_BIN_EXE_actuopt");

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path
}

fn actuopt(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env("ACTUOPT_LOG", "error").output().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const LINEAR_HEAT: &str = r#"
[model]
kind = "heat"
[grid]
nx = 16
ny = 16
[time]
tau = 0.25
nt = 100
[weights]
r_scale = 1e-3
[control]
kind = "zero"
"#;

#[test]
fn simulate_from_rest_stays_at_rest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[grid]\nn = 32\n[time]\nnt = 20\n[initial_condition]\nkind = \"zero\"\n[control]\nkind = \"zero\"\n",
    );
    let out = dir.path().join("out");
    let o = actuopt(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("t,x0,x1"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 21);
    for row in rows {
        assert!(row.split(',').skip(1).all(|v| v.parse::<f64>().unwrap() == 0.0), "{row}");
    }
    let s = read_json(&out.join("summary.json"));
    assert_eq!(s["results"]["energy_bound"]["margin"].as_f64(), Some(0.0));
    assert_eq!(s["results"]["cost"].as_f64(), Some(0.0));
}

#[test]
fn gradcheck_on_default_ks_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(Pipeline::Gradcheck, &ExperimentConfig::default(), dir.path()).unwrap();
    let err = o.summary["results"]["max_rel_error"].as_f64().unwrap();
    assert!(err < 1e-4, "{err:e}");
    let grads = read_json(&dir.path().join("gradients.json"));
    assert!(grads.is_object());
}

#[test]
fn optimize_linear_heat_matches_riccati() {
    let dir = tempfile::tempdir().unwrap();
    let config = ExperimentConfig::from_toml_str(LINEAR_HEAT).unwrap();
    let o = run(Pipeline::Optimize, &config, dir.path()).unwrap();
    let check = &o.summary["results"]["riccati_check"];
    assert_eq!(check["inconclusive"].as_bool(), Some(false));
    let d = check["max_discrepancy"].as_f64().unwrap();
    assert!(d <= 0.02, "{d}");
}

fn ks_sweep_config() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.optimizer.tolerance = 1e-9;
    c.control.amplitude = 0.0;
    c
}

#[test]
fn sweep_rows_and_joint_bound() {
    let dir = tempfile::tempdir().unwrap();
    let config = ks_sweep_config();
    let values: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let s = sweep(Pipeline::Optimize, &config, "actuator.location", &values, &dir.path().join("sweep")).unwrap();
    let csv = fs::read_to_string(dir.path().join("sweep/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 9);
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(1) == Some("ok")));

    let joint = run(Pipeline::Optimize, &config, &dir.path().join("joint")).unwrap();
    let j = joint.summary["results"]["cost"].as_f64().unwrap();
    let best = s.best().unwrap().cost.unwrap();
    assert!(best >= j * (1.0 - 1e-3), "sweep {best} joint {j}");
}

#[test]
fn symmetric_problem_has_symmetric_landscape() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ks_sweep_config();
    config.model.linearize = true;
    config.grid.n = 64;
    config.time.nt = 200;
    config.initial_condition.kind = actuopt_cli::config::InitialKind::SineSquared;
    let values = [0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875];
    let s = sweep(Pipeline::Optimize, &config, "actuator.location", &values, dir.path()).unwrap();
    let costs: Vec<f64> = s.rows.iter().map(|r| r.cost.unwrap()).collect();
    for i in 0..values.len() / 2 {
        let (a, b) = (costs[i], costs[values.len() - 1 - i]);
        assert!((a - b).abs() <= 1e-6 * a.abs().max(b.abs()), "{} vs {}: {a} {b}", values[i], values[values.len() - 1 - i]);
    }
}

#[test]
fn summaries_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[grid]\nn = 48\n[time]\nnt = 100\n[optimizer]\nstarts = 2\n");
    let mut bytes = Vec::new();
    for (cmd, k) in [("optimize", 0), ("optimize", 1), ("worst-ic", 0), ("worst-ic", 1)] {
        let out = dir.path().join(format!("{cmd}-{k}"));
        let o = actuopt(&[cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "7"]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        bytes.push(fs::read(out.join("summary.json")).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
    assert_eq!(bytes[2], bytes[3]);

    let m = read_json(&dir.path().join("worst-ic-0/manifest.json"));
    assert_eq!(m["config"]["seed"].as_u64(), Some(7));
}

#[test]
fn sweep_is_deterministic_under_parallelism() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ExperimentConfig::default();
    config.grid.n = 32;
    config.time.nt = 50;
    let values = [0.2, 0.4, 0.6, 0.8];
    let a = sweep(Pipeline::Optimize, &config, "weights.r_scale", &values, &dir.path().join("a")).unwrap();
    let b = sweep(Pipeline::Optimize, &config, "weights.r_scale", &values, &dir.path().join("b")).unwrap();
    assert_eq!(a.summary, b.summary);
    assert_eq!(fs::read(dir.path().join("a/sweep.csv")).unwrap(), fs::read(dir.path().join("b/sweep.csv")).unwrap());
}

#[test]
fn malformed_config_exits_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "seed = 1\n[time]\nnt = \"many\"\n");
    let o = actuopt(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3") && err.contains("nt"), "{err}");

    let cfg = write_config(dir.path(), "[grid]\nn = 1\n");
    let o = actuopt(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("grid.n"));

    let cfg = write_config(dir.path(), "");
    let o = actuopt(&["sweep", "simulate", "--config", cfg.to_str().unwrap(), "--param", "no.such", "--values", "1,2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn blow_up_exits_3_with_step() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[model]\nkind = \"heat\"\nnonlinearity = \"cubic\"\n[grid]\nnx = 8\nny = 8\n[time]\ntau = 1.0\nnt = 50\n[initial_condition]\nkind = \"sine\"\namplitude = 50.0\n",
    );
    let o = actuopt(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("time step"));
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn walk(root: &Path, dir: &Path, out: &mut Vec<String>) {
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            walk(root, &p, out);
        } else {
            out.push(p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/"));
        }
    }
}

fn assert_manifest_complete(root: &Path) {
    let m = read_json(&root.join("manifest.json"));
    assert!(m["config_hash"].as_str().unwrap().len() == 64);
    assert!(m["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    let listed: BTreeMap<String, (u64, String)> = m["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| {
            (
                f["path"].as_str().unwrap().to_string(),
                (f["size"].as_u64().unwrap(), f["sha256"].as_str().unwrap().to_string()),
            )
        })
        .collect();
    let mut on_disk = Vec::new();
    walk(root, root, &mut on_disk);
    on_disk.retain(|p| p != "manifest.json");
    on_disk.sort();
    assert_eq!(listed.keys().cloned().collect::<Vec<_>>(), on_disk);
    for (path, (size, hash)) in &listed {
        let bytes = fs::read(root.join(path)).unwrap();
        assert_eq!(bytes.len() as u64, *size, "{path}");
        assert_eq!(&sha256_hex(&bytes), hash, "{path}");
    }
}

#[test]
fn manifests_list_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[grid]\nn = 32\n[time]\nnt = 40\n[optimizer]\nstarts = 1\n");
    for cmd in ["simulate", "optimize", "worst-ic", "riccati-validate", "gradcheck"] {
        let out = dir.path().join(cmd);
        let o = actuopt(&[cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        assert_manifest_complete(&out);
    }
    let out = dir.path().join("sweep");
    let o = actuopt(&[
        "sweep", "simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(),
        "--param", "actuator.location", "--values", "0.2:0.8:3",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_manifest_complete(&out);
}
