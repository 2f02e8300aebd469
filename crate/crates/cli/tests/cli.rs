use std::path::Path;
use std::process::{Command, Output};

fn polaron(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polaron")).args(args).env_remove("POLARON_OUT").output().expect("binary runs")
}

fn small_bench(dir: &Path) -> std::path::PathBuf {
    let cfg = dir.join("bench.toml");
    std::fs::write(
        &cfg,
        "experiment = \"cloning-bench\"\nseed = 7\n\n[cloning-bench]\nl = 4\nx0 = 1\nt_max = 4\nsamples = 2000\nchain_clones = 200\nchain_steps = 100\n",
    )
    .unwrap();
    cfg
}

#[test]
fn run_writes_manifest_and_listed_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = polaron(&["run", "volterra", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("PASS criterion  1") || l.starts_with("FAIL criterion  1")));
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    let files = manifest["outputs"].as_array().unwrap();
    assert!(files.iter().any(|f| f == "summary.json"));
    for f in files {
        assert!(out.join(f.as_str().unwrap()).is_file(), "{f}");
    }
    assert_eq!(manifest["config"]["experiment"], "volterra");
}

#[test]
fn reruns_are_byte_identical_and_manifest_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_bench(dir.path());
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for out in [&a, &b] {
        let o = polaron(&["run", "cloning-bench", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let m = a.join("manifest.json");
    let o = polaron(&["run", "cloning-bench", "--config", m.to_str().unwrap(), "--out", c.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["oracle.csv", "summary.json"] {
        let first = std::fs::read(a.join(name)).unwrap();
        assert_eq!(first, std::fs::read(b.join(name)).unwrap(), "{name}");
        assert_eq!(first, std::fs::read(c.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn seed_flag_changes_monte_carlo_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_bench(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    polaron(&["run", "cloning-bench", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    polaron(&["run", "cloning-bench", "--config", cfg.to_str().unwrap(), "--seed", "8", "--out", b.to_str().unwrap()]);
    assert_ne!(std::fs::read(a.join("oracle.csv")).unwrap(), std::fs::read(b.join("oracle.csv")).unwrap());
}

#[test]
fn out_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("env_out");
    let o = Command::new(env!("CARGO_BIN_EXE_polaron"))
        .args(["run", "volterra"])
        .env("POLARON_OUT", &out)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(out.join("manifest.json").is_file());
}

#[test]
fn bad_configs_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cases = [
        ("unknown.toml", "[volterra]\nbogus = 1\n"),
        ("mismatch.toml", "experiment = \"spectra\"\n"),
        ("domain.toml", "[volterra]\ngamma = -1.0\n"),
        ("syntax.toml", "[volterra\n"),
    ];
    for (name, text) in cases {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        let o = polaron(&["run", "volterra", "--config", p.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert!(!out.join("manifest.json").exists());
}

#[test]
fn defaults_round_trip_through_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = polaron(&["defaults", "volterra"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("[volterra]"));
    let p = dir.path().join("v.toml");
    std::fs::write(&p, text).unwrap();
    let out = dir.path().join("out");
    let o = polaron(&["run", "volterra", "--config", p.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn experiment_subcommand_and_thread_count_leave_results_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sv.toml");
    std::fs::write(
        &cfg,
        "seed = 3\n\n[stationary-void]\ngammas = [0.05]\nl = 40\nclones = 200\nsteps = 40\nwindow = [20.0, 40.0]\nradius = 10\n",
    )
    .unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = polaron(&["stationary-void", "--config", cfg.to_str().unwrap(), "--threads", "1", "--out", a.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = polaron(&["run", "stationary-void", "--config", cfg.to_str().unwrap(), "--threads", "3", "--out", b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["mc_profiles.csv", "lambda_t.csv", "summary.json"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
}
