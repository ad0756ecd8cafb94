use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn hmhd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hmhd"))
        .args(args)
        .env("HMHD_THREADS", "1")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const TINY: &str = r#"
grid.n = 2
grid.dims = 16
params.nu = 0.05
params.mu = 0.05
params.eta = 0.5
sobolev.s = 1.0
sobolev.eps = 0.5
solver.dt = 5e-3
solver.tmax = 0.05
solver.snapshot_every = 2
init.kind = "random_band"
init.seed = 3
init.target_u = 1.0
init.target_b = 1.0
init.band = 4.0
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn shipped_default_matches_builtin() {
    let text = std::fs::read_to_string(configs().join("default.toml")).unwrap();
    let a = hmhd::io::RunConfig::from_toml(&text).unwrap();
    let b = hmhd::io::RunConfig::from_toml(hmhd::io::DEFAULT_CONFIG).unwrap();
    assert_eq!(a, b);
    hmhd::io::RunConfig::load(&configs().join("small.toml")).unwrap();
}

#[test]
fn analyze_reproduces_simulate_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", TINY);
    let run = dir.path().join("run");
    let o = hmhd(&["simulate", "--config", cfg.to_str().unwrap(), "--out", run.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let snaps = std::fs::read_dir(run.join("snapshots")).unwrap().count();
    assert_eq!(snaps, 6);
    let o = hmhd(&["analyze", "--run", run.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["shells.csv", "fluxes.csv"] {
        let a = std::fs::read(run.join(f)).unwrap();
        let b = std::fs::read(run.join("analysis").join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
    let fluxes = std::fs::read_to_string(run.join("fluxes.csv")).unwrap();
    assert_eq!(fluxes.lines().next().unwrap(), "t,I1,I2,I3,I4,I5,residual_u,residual_b");
    assert_eq!(fluxes.lines().count(), 7);
    let shells = std::fs::read_to_string(run.join("shells.csv")).unwrap();
    assert_eq!(shells.lines().next().unwrap(), "t,q,e_u,e_b,d_u,d_b");
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", TINY);
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let run = dir.path().join(name);
        assert!(hmhd(&["simulate", "--config", cfg.to_str().unwrap(), "--out", run.to_str().unwrap()]).status.success());
        outputs.push(run);
    }
    for f in ["shells.csv", "fluxes.csv", "snapshots/00000010.bin"] {
        assert_eq!(std::fs::read(outputs[0].join(f)).unwrap(), std::fs::read(outputs[1].join(f)).unwrap(), "{f}");
    }
}

#[test]
fn zero_data_gives_zero_rows() {
    let dir = tempfile::tempdir().unwrap();
    let text = TINY.replace("init.target_u = 1.0", "init.target_u = 0.0").replace("init.target_b = 1.0", "init.target_b = 0.0");
    let cfg = write_config(dir.path(), "c.toml", &text);
    let run = dir.path().join("run");
    let o = hmhd(&["simulate", "--config", cfg.to_str().unwrap(), "--out", run.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["shells.csv", "fluxes.csv"] {
        let text = std::fs::read_to_string(run.join(f)).unwrap();
        let skip = if f == "shells.csv" { 2 } else { 1 };
        for line in text.lines().skip(1) {
            assert!(line.split(',').skip(skip).all(|v| v.parse::<f64>().unwrap() == 0.0), "{f}: {line}");
        }
    }
}

#[test]
fn malformed_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &TINY.replace("params.mu = 0.05", "params.mu = \"fast\""));
    let o = hmhd(&["verify", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("mu"), "{}", stderr(&o));

    let cfg = write_config(dir.path(), "d.toml", &TINY.replace("sobolev.eps = 0.5", "sobolev.eps = 1.1"));
    let o = hmhd(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("x").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("s + 1 - eps") || stderr(&o).contains("r > n/2"), "{}", stderr(&o));
}

#[test]
fn bad_thread_count_is_rejected() {
    let o = Command::new(env!("CARGO_BIN_EXE_hmhd"))
        .args(["analyze", "--run", "."])
        .env("HMHD_THREADS", "zero")
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(stderr(&o).contains("HMHD_THREADS"));
}

#[test]
fn scaling_and_uniqueness_report() {
    let dir = tempfile::tempdir().unwrap();
    let text = TINY.replace("init.band = 4.0", "init.band = 3.0").replace("grid.dims = 16", "grid.dims = 64");
    let cfg = write_config(dir.path(), "c.toml", &text);
    let o = hmhd(&["scaling", "--mode", "hall", "--lambda", "2", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let line = stdout(&o);
    let residual: f64 = line.split("residual ").nth(1).unwrap().split_whitespace().next().unwrap().parse().unwrap();
    assert!(residual < 1e-5, "{line}");

    let o = hmhd(&["scaling", "--mode", "mhd", "--lambda", "3", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());

    let o = hmhd(&["uniqueness", "--config", cfg.to_str().unwrap(), "--perturb", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("minimal C_nu_mu 0.0000000000000000e0"), "{}", stdout(&o));
    let o = hmhd(&["uniqueness", "--config", cfg.to_str().unwrap(), "--perturb", "1e-6"]);
    assert!(stdout(&o).contains("envelope with C_nu_mu"), "{}", stdout(&o));
}

#[test]
fn verify_default_config_passes() {
    let o = hmhd(&["verify", "--config", configs().join("default.toml").to_str().unwrap()]);
    let out = stdout(&o);
    assert!(o.status.success(), "{out}\n{}", stderr(&o));
    assert!(out.contains("0 failed"), "{out}");
}
