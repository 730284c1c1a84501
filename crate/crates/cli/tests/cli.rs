use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fiberlift(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fiberlift"));
    cmd.args(args).env_remove("FIBERLIFT_OUT");
    if let Some(dir) = env_out {
        cmd.env("FIBERLIFT_OUT", dir);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    fiberlift(&args, None)
}

fn envelope(dir: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join("envelope.json")).unwrap()).unwrap()
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn doubling_ulam_has_unit_leading_eigenvalue() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&example("doubling-ulam.toml"), tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let env = envelope(tmp.path());
    assert!((env["results"]["leading_eigenvalue"].as_f64().unwrap() - 1.0).abs() <= 1e-6);
    assert_eq!(env["pass"], true);
    let manifest = env["artifacts"].as_array().unwrap();
    assert_eq!(manifest[0]["file"], "operator.csv");
    let csv = std::fs::read(tmp.path().join("operator.csv")).unwrap();
    assert_eq!(manifest[0]["bytes"].as_u64().unwrap() as usize, csv.len());
    assert!(!csv.contains(&b'\r'));
    assert!(tmp.path().join("timings.json").exists());
}

#[test]
fn solenoid_uniqueness_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&example("solenoid-uniqueness.toml"), tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let env = envelope(tmp.path());
    assert_eq!(env["pass"], true);
    assert!(env["results"]["max_distance"].as_f64().unwrap() <= 3e-3);
}

#[test]
fn contracting_violation_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&example("bad-solenoid.toml"), tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("domain violation") && err.contains("0.9"), "{err}");
}

#[test]
fn failed_assertion_exits_two_and_still_writes_the_envelope() {
    let tmp = tempfile::tempdir().unwrap();
    // the solenoid does converge, so expecting a non-shrinking flag fails
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "[system]\nname = \"solenoid\"\nparams = [0.4, 0.5]\n\n[pipeline]\nkind = \"lift\"\natoms = 1001\nexpect = \"non-shrinking\"\n",
    );
    let out_dir = tmp.path().join("out");
    let out = run(&cfg, &out_dir, &[]);
    assert_eq!(out.status.code(), Some(2));
    let env = envelope(&out_dir);
    assert_eq!(env["pass"], false);
    assert_eq!(env["assertions"][0]["pass"], false);
}

#[test]
fn parse_errors_report_line_and_column() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "[system]\nname = \"doubling\"\n\n[pipeline]\nkind = = \"ulam\"\n");
    let out = run(&cfg, &tmp.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 5"), "{err}");
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn unknown_keys_and_missing_seeds_are_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "a.toml", "[system]\nname = \"doubling\"\ncolour = 3\n\n[pipeline]\nkind = \"ulam\"\n");
    let out = run(&cfg, &tmp.path().join("a"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));

    let cfg = write_config(tmp.path(), "b.toml", "[system]\nname = \"doubling\"\n\n[pipeline]\nkind = \"corr\"\norbit_len = 10000\n");
    let out = run(&cfg, &tmp.path().join("b"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
    // the command-line seed fills the gap
    let out = run(&cfg, &tmp.path().join("b"), &["--seed", "4"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(envelope(&tmp.path().join("b"))["config"]["pipeline"]["seed"], 4);
}

#[test]
fn seed_override_changes_results_and_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "[system]\nname = \"doubling\"\n\n[pipeline]\nkind = \"corr\"\nseed = 1\nn_max = 3\norbit_len = 10000\n",
    );
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    for (dir, extra) in [(&a, vec![]), (&b, vec![]), (&c, vec!["--seed", "2"])] {
        assert_eq!(run(&cfg, dir, &extra).status.code(), Some(0));
    }
    let read = |d: &Path| std::fs::read(d.join("corr.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    assert_eq!(envelope(&a)["config_hash"], envelope(&b)["config_hash"]);
    assert_ne!(envelope(&a)["config_hash"], envelope(&c)["config_hash"]);
}

#[test]
fn output_directory_falls_back_to_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = example("doubling-ulam.toml");
    let env_dir = tmp.path().join("from-env");
    let out = fiberlift(&["--config", cfg.to_str().unwrap()], Some(&env_dir));
    assert_eq!(out.status.code(), Some(0));
    assert!(env_dir.join("envelope.json").exists());
}

#[test]
fn attractor_writes_pixmaps() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "[system]\nname = \"solenoid\"\nparams = [0.4, 0.5]\n\n[pipeline]\nkind = \"attractor\"\nn_iter = 2\nsize = 64\ngrid_base = 4097\n",
    );
    let out_dir = tmp.path().join("out");
    assert_eq!(run(&cfg, &out_dir, &[]).status.code(), Some(0));
    let img = std::fs::read(out_dir.join("attractor_02.ppm")).unwrap();
    assert!(img.starts_with(b"P6\n64 64\n255\n"));
    assert_eq!(img.len(), 13 + 64 * 64 * 3);

    let flat = write_config(tmp.path(), "d.toml", "[system]\nname = \"doubling\"\n\n[pipeline]\nkind = \"attractor\"\n");
    let out = run(&flat, &tmp.path().join("flat"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no fiber"));
}
