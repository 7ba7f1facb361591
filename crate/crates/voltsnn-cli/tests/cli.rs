//! End-to-end runs of the `voltsnn` binary on a toy config: the full
//! pipeline, determinism of outputs, and the exit-code contract.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_voltsnn"))
}

fn run(sub: &str, config: &Path) -> Output {
    bin()
        .args([sub, "--config"])
        .arg(config)
        .env("VOLTSNN_THREADS", "2")
        .output()
        .expect("spawn voltsnn")
}

fn assert_ok(out: &Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn toy_config(dir: &Path) -> std::path::PathBuf {
    let out_dir = dir.join("out");
    let config = format!(
        r#"{{
  "dataset": {{"kind": "synthetic", "train_samples": 120, "test_samples": 60, "rows": 14, "cols": 14, "classes": 2}},
  "network": {{"n_neurons": 10, "train_epochs": 1, "label_samples": 120,
              "sim": {{"duration_ms": 120.0}}}},
  "profile": {{"ber_list": [0.0, 1e-3, 1e-2], "trials": 2}},
  "fat": {{"schedule_mode": "explicit", "explicit_levels": [1e-3, 1e-2]}},
  "energy": {{"v_supply_list": [1.025, 1.35]}},
  "seed": 11,
  "output_dir": {out_dir:?}
}}"#
    );
    let path = dir.join("config.json");
    std::fs::write(&path, config).unwrap();
    path
}

#[test]
fn full_pipeline_end_to_end() {
    let start = std::time::Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let config = toy_config(dir.path());
    let out = dir.path().join("out");

    for sub in ["train", "profile", "fat", "energy", "select", "report"] {
        let result = run(sub, &config);
        assert_ok(&result, sub);
    }

    for artifact in [
        "checkpoint_baseline.json",
        "checkpoint_fat.json",
        "profile_baseline.csv",
        "profile_fat.csv",
        "fat_levels.csv",
        "masks/level_0.csv",
        "masks/level_1.csv",
        "energy_reports.csv",
        "energy_summary.json",
        "candidates.json",
        "reward.csv",
        "report/accuracy_vs_ber.csv",
        "report/speedup_vs_voltage.csv",
        "report/energy_saving.csv",
        "report/selection_grid.csv",
    ] {
        assert!(out.join(artifact).exists(), "missing {artifact}");
    }

    // every CSV embeds the provenance line
    for csv in ["profile_baseline.csv", "fat_levels.csv", "reward.csv"] {
        let text = std::fs::read_to_string(out.join(csv)).unwrap();
        assert!(
            text.starts_with("# config_sha256="),
            "{csv} lacks provenance header"
        );
        assert!(text.lines().next().unwrap().contains("seed=11"));
    }

    // the toy pipeline must stay fast
    assert!(
        start.elapsed().as_secs() < 60,
        "toy pipeline took {:?}",
        start.elapsed()
    );
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = toy_config(dir.path());
    let out = dir.path().join("out");

    assert_ok(&run("train", &config), "train");
    assert_ok(&run("profile", &config), "profile");
    assert_ok(&run("energy", &config), "energy");

    let snapshot = |name: &str| std::fs::read(out.join(name)).unwrap();
    let ck1 = snapshot("checkpoint_baseline.json");
    let pr1 = snapshot("profile_baseline.csv");
    let en1 = snapshot("energy_reports.csv");

    assert_ok(&run("train", &config), "train rerun");
    assert_ok(&run("profile", &config), "profile rerun");
    assert_ok(&run("energy", &config), "energy rerun");

    assert_eq!(ck1, snapshot("checkpoint_baseline.json"));
    assert_eq!(pr1, snapshot("profile_baseline.csv"));
    assert_eq!(en1, snapshot("energy_reports.csv"));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = toy_config(dir.path());
    let out = dir.path().join("out");

    let result = bin()
        .args(["train", "--config"])
        .arg(&config)
        .args(["--seed", "99"])
        .output()
        .unwrap();
    assert_ok(&result, "train --seed");
    let ck = std::fs::read_to_string(out.join("checkpoint_baseline.json")).unwrap();
    assert!(ck.contains("\"seed\":99"));
}

#[test]
fn exit_codes_distinguish_error_classes() {
    let dir = tempfile::tempdir().unwrap();

    // 2: invalid config (unknown key)
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"not_a_key": 1}"#).unwrap();
    assert_eq!(run("train", &bad).status.code(), Some(2));

    // 2: invalid config (fp32 cannot take injections)
    let fp32 = dir.path().join("fp32.json");
    std::fs::write(
        &fp32,
        r#"{"format": "fp32", "profile": {"ber_list": [1e-3]}}"#,
    )
    .unwrap();
    assert_eq!(run("train", &fp32).status.code(), Some(2));

    // 3: missing config file
    assert_eq!(
        run("train", &dir.path().join("absent.json")).status.code(),
        Some(3)
    );

    // 3: missing upstream artifact
    let config = toy_config(dir.path());
    assert_eq!(run("profile", &config).status.code(), Some(3));

    // 4: capacity exceeded (geometry far too small for the network)
    let tiny = dir.path().join("tiny.json");
    std::fs::write(
        &tiny,
        r#"{
  "dataset": {"kind": "synthetic", "train_samples": 10, "test_samples": 5, "rows": 14, "cols": 14, "classes": 2},
  "network": {"n_neurons": 50},
  "dram": {"geometry": {"n_channels": 1, "n_ranks_per_channel": 1, "n_chips_per_rank": 1,
            "n_banks_per_chip": 1, "n_subarrays_per_bank": 1, "n_rows_per_subarray": 2,
            "n_columns_per_row": 8, "bytes_per_column": 1}},
  "seed": 1
}"#,
    )
    .unwrap();
    assert_eq!(run("energy", &tiny).status.code(), Some(4));
}
