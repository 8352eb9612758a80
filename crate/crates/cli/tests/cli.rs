//! End-to-end tests of the binary: the construct/certify/simulate pipeline,
//! report formats, exit codes, and re-run determinism.

use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_diamondlab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn assert_code(out: &Output, want: i32) {
    assert_eq!(
        out.status.code(),
        Some(want),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn construct_certify_simulate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let ens = dir.path().join("ens");
    let out = run(&[
        "construct", "--case", "equal", "--dA", "4", "--dB", "2", "--r", "2", "--eps", "0.1",
        "--M", "5", "--seed", "7", "--out", ens.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    assert!(ens.join("ensemble.json").exists());
    assert!(ens.join("run-config.toml").exists());
    assert!(ens.join("member_000.manifest.json").exists());

    let out = run(&["certify", "--in", ens.to_str().unwrap(), "--threshold", "0.01"]);
    assert_code(&out, 0);
    let cert = std::fs::read_to_string(ens.join("certification.csv")).unwrap();
    assert!(cert.contains("pair,choi_dist,iso_dist,verdict"));
    assert_eq!(cert.matches("PASS").count(), 11); // 10 pairs + summary

    let out = run(&[
        "simulate", "--in", ens.to_str().unwrap(), "--N", "3", "--auxDim", "2", "--seed", "3",
    ]);
    assert_code(&out, 0);
    let trace = std::fs::read_to_string(ens.join("protocol.csv")).unwrap();
    assert!(trace.contains("step,gap,bound"));
    assert_eq!(trace.lines().count(), 5);

    // The report consolidates both CSVs and passes.
    let out = run(&["report", "--dir", ens.to_str().unwrap()]);
    assert_code(&out, 0);
    let summary = std::fs::read_to_string(ens.join("summary.csv")).unwrap();
    assert!(summary.contains("protocol_gap_max_over_3_steps,PASS"));
    assert!(summary.lines().last().unwrap().contains("PASS"));
}

#[test]
fn weingarten_check_writes_csv_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("wg.csv");
    let out = run(&[
        "weingarten-check", "--d", "2", "--samples", "4000", "--seed", "9", "--out",
        csv_path.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let text = std::fs::read_to_string(&csv_path).unwrap();
    assert!(text.starts_with("# weingarten-check d=2 samples=4000 seed=9"));
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn moments_run_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let out = run(&[
            "moments", "--case", "equal", "--dA", "4", "--dB", "2", "--r", "2", "--eps", "0.2",
            "--samples", "300", "--seed", "11", "--out", path.to_str().unwrap(),
        ]);
        assert_code(&out, 0);
    }
    let text_a = std::fs::read(&a).unwrap();
    let text_b = std::fs::read(&b).unwrap();
    assert_eq!(text_a, text_b, "re-runs must be byte-identical");
}

#[test]
fn tilted_moments_report_carries_exact_targets() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("moments.csv");
    let out = run(&[
        "moments", "--case", "tilted", "--dA", "4", "--dB", "4", "--r", "2", "--eps", "0.1",
        "--samples", "400", "--seed", "1", "--out", path.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let text = std::fs::read_to_string(&path).unwrap();
    // Second-moment row targets 2/r = 1 at r = 2.
    let row = text
        .lines()
        .find(|l| l.starts_with("cross_second_moment"))
        .expect("second moment row present");
    assert!(row.contains(",1.0000000000000000e0,equals,"), "{row}");
    assert!(row.ends_with("E tr|C|^2 = 2/r"));
}

#[test]
fn bounds_report_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bounds.json");
    let out = run(&[
        "bounds", "--dA", "4", "--dB", "4", "--r", "4", "--eps", "0.01", "--logM", "300",
        "--out", path.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let report: diamondlab::bounds::BoundReport =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(report.n_main_tilted, Some(16885));
    assert_eq!(report.n_packing, Some(34));
}

#[test]
fn usage_errors_exit_two() {
    let out = run(&["moments", "--case", "equal", "--dA", "4"]);
    assert_code(&out, 2);
    let out = run(&["construct", "--unknown-flag"]);
    assert_code(&out, 2);
    // Regime violation is a usage error too.
    let out = run(&[
        "moments", "--case", "equal", "--dA", "5", "--dB", "2", "--r", "2", "--eps", "0.1",
        "--samples", "10",
    ]);
    assert_code(&out, 2);
}

#[test]
fn io_errors_exit_three() {
    let out = run(&["certify", "--in", "/definitely/not/there"]);
    assert_code(&out, 3);
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("broken.json"), "{not json").unwrap();
    let out = run(&["report", "--dir", dir.path().to_str().unwrap()]);
    assert_code(&out, 3);
}

#[test]
fn report_empty_dir_passes_and_failures_propagate() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["report", "--dir", dir.path().to_str().unwrap()]);
    assert_code(&out, 0);

    std::fs::write(
        dir.path().join("mixed.csv"),
        "quantity,estimate,stderr,target,relation,samples,seed,verdict,formula\n\
         a,1,0,1,equals,10,1,PASS,x\n\
         b,2,0,1,equals,10,1,FAIL,y\n",
    )
    .unwrap();
    let out = run(&["report", "--dir", dir.path().to_str().unwrap()]);
    assert_code(&out, 1);
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(text.lines().last().unwrap().contains("FAIL"));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "case = \"equal\"\ndA = 4\ndB = 2\nr = 2\neps = 0.2\nsamples = 200\nseed = 13\n",
    )
    .unwrap();
    let with_cfg = dir.path().join("from-config.csv");
    let out = bin()
        .args([
            "moments", "--config", cfg.to_str().unwrap(), "--out",
            with_cfg.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_code(&out, 0);
    let text = std::fs::read_to_string(&with_cfg).unwrap();
    assert!(text.contains("samples=200 seed=13"));

    // A flag overrides the config value.
    let overridden = dir.path().join("override.csv");
    let out = bin()
        .args([
            "moments", "--config", cfg.to_str().unwrap(), "--seed", "99", "--out",
            overridden.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_code(&out, 0);
    let text = std::fs::read_to_string(&overridden).unwrap();
    assert!(text.contains("seed=99"));
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("env-seed.csv");
    let out = bin()
        .env("DIAMONDLAB_SEED", "4242")
        .args([
            "moments", "--case", "equal", "--dA", "4", "--dB", "2", "--r", "2", "--eps", "0.2",
            "--samples", "150", "--out", path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_code(&out, 0);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("seed=4242"));
}

#[test]
fn tilted_pipeline_round_trips_reference_channel() {
    let dir = tempfile::tempdir().unwrap();
    let ens = dir.path().join("tilted");
    let out = run(&[
        "construct", "--case", "tilted", "--dA", "2", "--dB", "2", "--r", "2", "--eps", "0.1",
        "--M", "4", "--seed", "5", "--out", ens.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    assert!(ens.join("reference.manifest.json").exists());
    assert!(ens.join("embedding.json").exists());
    let out = run(&["certify", "--in", ens.to_str().unwrap(), "--eta", "0.2"]);
    assert_code(&out, 0);
    let out = run(&["simulate", "--in", ens.to_str().unwrap(), "--N", "2", "--seed", "8"]);
    assert_code(&out, 0);
}
