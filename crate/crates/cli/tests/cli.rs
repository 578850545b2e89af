use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use geim_cli::ExperimentConfig;

fn geim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geim")).args(args).output().unwrap()
}

fn record(out: &Output) -> serde_json::Value {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

fn hash_line(csv: &Path) -> String {
    fs::read_to_string(csv).unwrap().lines().nth(1).unwrap().to_string()
}

fn small(extra: &str) -> String {
    format!("nx = 33\nny = 17\nalpha_count = 3\nbeta_count = 3\ngamma_count = 3\nsensor_target = 60\n{extra}")
}

#[test]
fn flags_override_file_and_file_overrides_defaults() {
    let root = tempfile::tempdir().unwrap();
    let cfg_path = root.path().join("run.toml");
    fs::write(&cfg_path, small("m_max = 4\nseed = 5\nout_dir = \"ignored\"\n")).unwrap();
    let out = root.path().join("out");
    let o = geim(&[
        "decay",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--M-max",
        "3",
        "--threads",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!root.path().join("ignored").exists());

    let decay = fs::read_to_string(out.join("decay.csv")).unwrap();
    let lines: Vec<&str> = decay.lines().collect();
    assert_eq!(lines[0], "M,err_l2,err_h1,rel_l2,rel_h1");
    assert_eq!(lines.len(), 2 + 3);

    let mut expected = ExperimentConfig::from_toml(&small("")).unwrap();
    expected.m_max = 3;
    expected.seed = 5;
    assert_eq!(hash_line(&out.join("decay.csv")), format!("# config_hash={}", expected.hash()));

    let o = geim(&["decay", "--config", cfg_path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let rows = fs::read_to_string(out.join("decay.csv")).unwrap().lines().count() - 2;
    assert_eq!(rows, 4);
    for name in ["decay.gp", "geim_model.bin", "dictionary.csv"] {
        assert!(out.join(name).exists(), "{name}");
    }
}

#[test]
fn every_csv_has_header_and_hash_row() {
    let root = tempfile::tempdir().unwrap();
    let cfg_path = root.path().join("run.toml");
    fs::write(&cfg_path, small("noise_trials = 200\nnoise_series = 4\nnoise_dimension = 3\n")).unwrap();
    let out = root.path().join("out");
    for cmd in ["snapshots", "decay", "svd", "bestfit", "lebesgue", "coupled", "noise"] {
        let o = geim(&[cmd, "--config", cfg_path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let mut csvs = Vec::new();
    let mut stack = vec![out.clone()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "csv") {
                csvs.push(p);
            }
        }
    }
    assert!(csvs.len() > 10);
    for p in csvs {
        let text = fs::read_to_string(&p).unwrap();
        let mut lines = text.lines();
        assert!(!lines.next().unwrap().starts_with('#'), "{}", p.display());
        let comment = lines.next().unwrap();
        assert!(comment.starts_with("# ") && comment.contains("config_hash="), "{}", p.display());
    }
    let gp: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "gp"))
        .collect();
    assert_eq!(gp.len(), 6);
}

#[test]
fn bad_config_gives_json_record_and_no_output() {
    let root = tempfile::tempdir().unwrap();
    let cfg_path = root.path().join("bad.toml");
    fs::write(&cfg_path, "nx = 33\nunknown_key = 1\n").unwrap();
    let out = root.path().join("out");
    let o = geim(&["svd", "--config", cfg_path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let r = record(&o);
    assert_eq!(r["status"], "error");
    assert_eq!(r["command"], "svd");
    assert_eq!(r["kind"], "Config");
    assert!(r["message"].as_str().unwrap().contains("unknown_key"));
    assert!(!out.exists());

    let o = geim(&["svd", "--config", root.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failing_run_leaves_existing_output_untouched() {
    let root = tempfile::tempdir().unwrap();
    let cfg_path = root.path().join("run.toml");
    fs::write(&cfg_path, small("noise_series = 500\n")).unwrap();
    let out = root.path().join("out");
    fs::create_dir(&out).unwrap();
    fs::write(out.join("keep.csv"), "kept").unwrap();
    let o = geim(&["noise", "--config", cfg_path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let r = record(&o);
    assert_eq!(r["command"], "noise");
    assert_ne!(r["kind"], "Config");
    let names: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, vec![std::ffi::OsString::from("keep.csv")]);

    let fresh = root.path().join("fresh");
    let o = geim(&["noise", "--config", cfg_path.to_str().unwrap(), "--out", fresh.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!fresh.exists());
}

#[test]
fn snapshot_directory_and_bundle_load_back() {
    let root = tempfile::tempdir().unwrap();
    let cfg_path = root.path().join("run.toml");
    fs::write(&cfg_path, small("")).unwrap();
    let out = root.path().join("out");
    for cmd in ["snapshots", "decay"] {
        assert!(geim(&[cmd, "--config", cfg_path.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .status
            .success());
    }
    let set = geim_core::io::load_snapshots(&out.join("snapshots")).unwrap();
    assert_eq!(set.len(), 27);
    let bytes = fs::read(out.join("geim_model.bin")).unwrap();
    let (model, dict_ref) = geim_core::io::decode_geim(&bytes).unwrap();
    assert_eq!(dict_ref, "dictionary.csv");
    assert_eq!(geim_core::io::encode_geim(&model, &dict_ref), bytes);
    let phi = &set.fields[4];
    let m = model.len();
    let e = geim_core::geim::geim_error(&model, phi, m, geim_core::Product::L2).unwrap();
    assert!(e < 1e-8);
}
