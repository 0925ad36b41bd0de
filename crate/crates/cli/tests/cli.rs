use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn spikelab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spikelab"))
        .args(args)
        .current_dir(dir)
        .env_remove("SPIKELAB_OUT")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn stability_prints_the_a_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let o = spikelab(dir.path(), &["stability", "--k", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("eigenvalues of A (k = 5): {0, 2, 6, 12, 20}"));
    let report = json(&dir.path().join("out/stability/spectrum.json"));
    assert_eq!(report["stable"], true);
    assert!(dir.path().join("out/stability/matrix_m.csv").exists());
}

#[test]
fn reduce_writes_positions_with_residual() {
    let dir = tempfile::tempdir().unwrap();
    let o = spikelab(dir.path(), &["reduce", "--k", "3", "--eps", "1e-3", "--d", "4e-4"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&dir.path().join("out/reduce/positions.json"));
    assert!(v["configuration"]["residual"].as_f64().unwrap() < 1e-12);
    assert_eq!(v["configuration"]["offsets"].as_array().unwrap().len(), 3);
    assert_eq!(v["params"]["epsilon"], 1e-3);
    let probes = &v["perturbations"];
    assert_eq!(probes["restoring"], probes["samples"]);
    let resolved = fs::read_to_string(dir.path().join("out/reduce/resolved_config.toml")).unwrap();
    assert!(resolved.contains("h_second = -18.0"), "{resolved}");
}

#[test]
fn usage_and_validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["frobnicate"][..],
        &["reduce", "--no-such-flag"],
        &["reduce", "--k", "0"],
        &["reduce", "--domain", "square:1"],
        &["simulate", "--n-theta", "63"],
        &["reduce", "--domain", "circle:1"],
        &["ground-state", "--config", "missing.toml"],
    ] {
        assert_eq!(spikelab(dir.path(), args).status.code(), Some(1), "{args:?}");
    }
    assert_eq!(spikelab(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(spikelab(dir.path(), &["--version"]).status.code(), Some(0));
}

#[test]
fn config_file_precedence() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), "out = \"from_file\"\nk = 4\neps = 2e-3\nD = 2e-3\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_spikelab"))
        .args(["reduce", "--config", "run.toml", "--k", "2"])
        .current_dir(dir.path())
        .env("SPIKELAB_OUT", "from_env")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&dir.path().join("from_file/reduce/positions.json"));
    assert_eq!(v["params"]["k"], 2);
    assert_eq!(v["params"]["epsilon"], 2e-3);
    assert!(!dir.path().join("from_env").exists());

    let o = Command::new(env!("CARGO_BIN_EXE_spikelab"))
        .args(["stability", "--k", "2"])
        .current_dir(dir.path())
        .env("SPIKELAB_OUT", "from_env")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("from_env/stability/spectrum.json").exists());

    fs::write(dir.path().join("bad.toml"), "epsilon = 0.1\n").unwrap();
    assert_eq!(spikelab(dir.path(), &["reduce", "--config", "bad.toml"]).status.code(), Some(1));
}

#[test]
fn resolved_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["simulate", "--n-rho", "12", "--n-theta", "48", "--t-end", "1", "--snapshot-every", "5", "--write-fields", "true"];
    assert_eq!(spikelab(dir.path(), &args).status.code(), Some(0));
    let out = dir.path().join("out/simulate");
    let first: Vec<Vec<u8>> = ["summary.json", "tracks.csv", "snapshots.csv", "resolved_config.toml", "fields/step_00000020.bin"]
        .iter()
        .map(|f| fs::read(out.join(f)).unwrap())
        .collect();
    fs::copy(out.join("resolved_config.toml"), dir.path().join("again.toml")).unwrap();
    assert_eq!(spikelab(dir.path(), &["simulate", "--config", "again.toml"]).status.code(), Some(0));
    for (name, bytes) in ["summary.json", "tracks.csv", "snapshots.csv", "resolved_config.toml", "fields/step_00000020.bin"]
        .iter()
        .zip(&first)
    {
        assert_eq!(&fs::read(out.join(name)).unwrap(), bytes, "{name}");
    }
    let meta = json(&out.join("metadata.json"));
    assert_eq!(meta["subcommand"], "simulate");
    let tracks = fs::read_to_string(out.join("tracks.csv")).unwrap();
    assert!(tracks.starts_with("t,index,arc,height\n") && tracks.lines().count() > 2);
}

#[test]
fn ground_state_green_and_nlep_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(spikelab(dir.path(), &["ground-state"]).status.code(), Some(0));
    let m = json(&dir.path().join("out/ground-state/moments.json"));
    assert!((m["central_value"].as_f64().unwrap() - 2.391962).abs() < 1e-5);
    assert!(m["identity_defect"].as_f64().unwrap() < 1e-4);
    assert_eq!(spikelab(dir.path(), &["green", "--table-points", "10"]).status.code(), Some(0));
    let table = fs::read_to_string(dir.path().join("out/green/g0_table.csv")).unwrap();
    assert_eq!(table.lines().count(), 11);
    let g = json(&dir.path().join("out/green/green.json"));
    assert!(g["disk_check"]["max_relative_error"].as_f64().unwrap() < 1e-3);
    let o = spikelab(dir.path(), &["nlep", "--modes", "1", "--tau-steps", "4", "--tau-max", "0.4"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let n = json(&dir.path().join("out/nlep/nlep.json"));
    assert!((n["dominant"][0][0].as_f64().unwrap() + 1.01708).abs() < 1e-4);
    assert!(n["dominant"][1][0].as_f64().unwrap().abs() < 1e-3);
    assert_eq!(n["sweep"]["rows"].as_array().unwrap().len(), 5);
}
