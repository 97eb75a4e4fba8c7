//! End-to-end behavior of the `comvar` binary and the embed pipeline:
//! exit codes, manifest-on-failure, artifact determinism, CSV round
//! trips, pipeline dispatch, and operational error messages.

use std::fs;
use std::path::Path;
use std::process::Command as Process;

use clap::Parser;
use comvar::diffusion::{embed, gaussian_kernel, normalize_row_stochastic};
use comvar::metric::metric_euclidean;
use comvar::numerics::DataMatrix;
use comvar_cli::args::{Cli, Command};
use comvar_cli::commands::{cmd_embed, cmd_icons, cmd_metric_compare, cmd_pendulum, RunOutcome};
use comvar_cli::io::{read_matrix_csv, write_matrix_csv};
use serde_json::Value;
use tempfile::TempDir;

/// Parses a full command line and runs the matching command in-process.
fn run(argv: &[&str]) -> anyhow::Result<RunOutcome> {
    let cli = Cli::try_parse_from(argv).expect("argv must parse");
    match &cli.command {
        Command::MetricCompare(a) => cmd_metric_compare(a),
        Command::Pendulum(a) => cmd_pendulum(a),
        Command::Icons(a) => cmd_icons(a),
        Command::Embed(a) => cmd_embed(a),
    }
}

/// Runs the real binary and returns (exit code, stdout, stderr).
fn run_binary(argv: &[&str]) -> (i32, String, String) {
    let output = Process::new(env!("CARGO_BIN_EXE_comvar"))
        .args(argv)
        .output()
        .expect("binary must launch");
    (
        output
            .status
            .code()
            .expect("binary must not be killed by a signal"),
        String::from_utf8_lossy(&output.stdout).into_owned(),
        String::from_utf8_lossy(&output.stderr).into_owned(),
    )
}

/// A smooth closed curve sampled at `n` points, `dim` coordinates per
/// sample: deterministic, full local rank, no RNG needed.
fn curve_matrix(n: usize, dim: usize, phase: f64) -> DataMatrix {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / n as f64;
            (0..dim)
                .map(|c| {
                    let scale = 1.0 / (1.0 + c as f64);
                    scale * (t * (1 + c / 2) as f64 + phase + 0.3 * c as f64).cos()
                })
                .collect()
        })
        .collect();
    DataMatrix::from_rows(&rows).unwrap()
}

fn write_curve(path: &Path, n: usize, dim: usize, phase: f64) -> DataMatrix {
    let m = curve_matrix(n, dim, phase);
    write_matrix_csv(path, &m, "v").unwrap();
    m
}

/// Manifest text with the volatile timestamp line removed.
fn manifest_without_timestamp(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.contains("timestamp_s"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn binary_maps_verdicts_and_errors_to_exit_codes() {
    let dir = TempDir::new().unwrap();
    let x_path = dir.path().join("x.csv");
    let y_path = dir.path().join("y.csv");
    write_curve(&x_path, 30, 3, 0.0);
    write_curve(&y_path, 30, 2, 0.4);

    // A successful embed exits 0 and reports its manifest on stdout.
    let out0 = dir.path().join("ok");
    let (code, stdout, _) = run_binary(&[
        "embed",
        "--x",
        x_path.to_str().unwrap(),
        "--y",
        y_path.to_str().unwrap(),
        "--k-neighbors",
        "6",
        "--out-dir",
        out0.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "stdout: {stdout}");
    assert!(stdout.contains("manifest:"), "stdout: {stdout}");
    assert!(out0.join("embedding.csv").exists());

    // A missing input file is an operational error: exit 1, no manifest.
    let out1 = dir.path().join("missing");
    let (code, _, stderr) = run_binary(&[
        "embed",
        "--x",
        dir.path().join("no-such-file.csv").to_str().unwrap(),
        "--out-dir",
        out1.to_str().unwrap(),
    ]);
    assert_eq!(code, 1, "stderr: {stderr}");
    assert!(stderr.contains("error:"), "stderr: {stderr}");
    assert!(!out1.join("manifest.json").exists());

    // A run whose scientific criterion fails exits 2 but still writes its
    // manifest, with the verdict recorded.
    let out2 = dir.path().join("baseline");
    let (code, stdout, _) = run_binary(&[
        "pendulum",
        "--noisy",
        "--algorithm",
        "single-set",
        "--out-dir",
        out2.to_str().unwrap(),
    ]);
    assert_eq!(code, 2, "stdout: {stdout}");
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(out2.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["pass"], Value::Bool(false));
    assert_eq!(manifest["command"], Value::from("pendulum"));
    assert_eq!(manifest["metrics"]["expected_failure"], Value::Bool(true));
}

#[test]
fn identical_flags_produce_identical_artifacts() {
    let dir = TempDir::new().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let (code, stdout, _) = run_binary(&["icons", "--out-dir", out.to_str().unwrap()]);
        assert_eq!(code, 0, "stdout: {stdout}");
    }
    for name in ["embedding.csv", "spectrum.csv"] {
        assert_eq!(
            fs::read(out_a.join(name)).unwrap(),
            fs::read(out_b.join(name)).unwrap(),
            "{name} differs between identical runs"
        );
    }
    assert_eq!(
        manifest_without_timestamp(&out_a.join("manifest.json")),
        manifest_without_timestamp(&out_b.join("manifest.json")),
        "manifests differ beyond the timestamp"
    );
}

#[test]
fn embedding_csv_round_trips_with_indexed_header() {
    let dir = TempDir::new().unwrap();
    let x_path = dir.path().join("x.csv");
    let y_path = dir.path().join("y.csv");
    write_curve(&x_path, 40, 3, 0.0);
    write_curve(&y_path, 40, 2, 0.7);
    let out = dir.path().join("out");
    let outcome = run(&[
        "comvar",
        "embed",
        "--x",
        x_path.to_str().unwrap(),
        "--y",
        y_path.to_str().unwrap(),
        "--k-neighbors",
        "8",
        "--out-dir",
        out.to_str().unwrap(),
    ])
    .unwrap();
    assert!(outcome.pass);

    let emb_path = out.join("embedding.csv");
    let text = fs::read_to_string(&emb_path).unwrap();
    assert_eq!(text.lines().next(), Some("index,psi1,psi2"));
    let back = read_matrix_csv(&emb_path).unwrap();
    assert_eq!(back.n_samples(), 40);
    assert_eq!(back.dim(), 3); // index + two components
    for i in 0..back.n_samples() {
        assert_eq!(
            back.values()[(i, 0)],
            i as f64,
            "index column must count rows"
        );
    }
}

#[test]
fn single_set_embed_matches_the_library_pipeline() {
    let dir = TempDir::new().unwrap();
    let x_path = dir.path().join("x.csv");
    let x = write_curve(&x_path, 36, 3, 0.2);
    let out = dir.path().join("out");
    let outcome = run(&[
        "comvar",
        "embed",
        "--x",
        x_path.to_str().unwrap(),
        "--algorithm",
        "single-set",
        "--out-dir",
        out.to_str().unwrap(),
    ])
    .unwrap();
    assert!(outcome.pass);
    assert_eq!(
        outcome.manifest.parameters["algorithm"],
        Value::from("single-set")
    );

    // The same pipeline spelled out against the library directly. Floats
    // survive the CSV round trip exactly, so the coordinates must agree to
    // machine precision.
    let metric = metric_euclidean(&x).unwrap();
    let kernel = gaussian_kernel(&metric).unwrap();
    let normalized = normalize_row_stochastic(&kernel).unwrap();
    let expected = embed(&normalized, 2).unwrap();

    let back = read_matrix_csv(&out.join("embedding.csv")).unwrap();
    let coords = expected.coordinates();
    assert_eq!(back.n_samples(), coords.nrows());
    for i in 0..coords.nrows() {
        for c in 0..coords.ncols() {
            let got = back.values()[(i, c + 1)];
            let want = coords[(i, c)];
            assert!(
                (got - want).abs() <= 1e-12,
                "coordinate ({i},{c}): binary {got} vs library {want}"
            );
        }
    }
}

#[test]
fn set_inputs_dispatch_to_the_k_set_pipeline() {
    let dir = TempDir::new().unwrap();
    let paths: Vec<_> = (0..3)
        .map(|i| dir.path().join(format!("s{i}.csv")))
        .collect();
    write_curve(&paths[0], 30, 3, 0.0);
    write_curve(&paths[1], 30, 2, 0.5);
    write_curve(&paths[2], 30, 2, 1.1);

    // Default neighborhoods are k-nearest.
    let out = dir.path().join("knn");
    let outcome = run(&[
        "comvar",
        "embed",
        "--set",
        paths[0].to_str().unwrap(),
        "--set",
        paths[1].to_str().unwrap(),
        "--set",
        paths[2].to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ])
    .unwrap();
    assert!(outcome.pass);
    let params = &outcome.manifest.parameters;
    assert_eq!(params["algorithm"], Value::from("k-set"));
    assert_eq!(params["dz"], Value::from(1));
    assert_eq!(params["neighborhood"], Value::from("k-nearest"));
    assert_eq!(params["k_neighbors"], Value::from(20));
    let back = read_matrix_csv(&out.join("embedding.csv")).unwrap();
    assert_eq!(back.n_samples(), 30);
    assert_eq!(back.dim(), 2); // index + one component

    // A --window flag switches the local fits to consecutive-sample
    // windows and the manifest says so.
    let out_w = dir.path().join("window");
    let outcome = run(&[
        "comvar",
        "embed",
        "--set",
        paths[0].to_str().unwrap(),
        "--set",
        paths[1].to_str().unwrap(),
        "--set",
        paths[2].to_str().unwrap(),
        "--window",
        "7",
        "--out-dir",
        out_w.to_str().unwrap(),
    ])
    .unwrap();
    assert!(outcome.pass);
    let params = &outcome.manifest.parameters;
    assert_eq!(params["neighborhood"], Value::from("time-window"));
    assert_eq!(params["window"], Value::from(7));
}

#[test]
fn operational_errors_name_the_problem() {
    let dir = TempDir::new().unwrap();
    let x_path = dir.path().join("x.csv");
    let y_path = dir.path().join("y.csv");
    let short_path = dir.path().join("short.csv");
    write_curve(&x_path, 30, 3, 0.0);
    write_curve(&y_path, 30, 2, 0.4);
    write_curve(&short_path, 29, 2, 0.4);
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();

    // Row-misaligned observation sets.
    let err = run(&[
        "comvar",
        "embed",
        "--x",
        x_path.to_str().unwrap(),
        "--y",
        short_path.to_str().unwrap(),
        "--out-dir",
        out_s,
    ])
    .unwrap_err();
    let msg = format!("{err:#}");
    assert!(msg.contains("must be row-aligned"), "got: {msg}");

    // A malformed field is reported with its file position.
    let bad_path = dir.path().join("bad.csv");
    fs::write(&bad_path, "a,b\n1.0,2.0\n3.0,oops\n").unwrap();
    let err = run(&[
        "comvar",
        "embed",
        "--x",
        bad_path.to_str().unwrap(),
        "--algorithm",
        "single-set",
        "--out-dir",
        out_s,
    ])
    .unwrap_err();
    let msg = format!("{err:#}");
    assert!(
        msg.contains("line 3") && msg.contains("column 2"),
        "got: {msg}"
    );

    // Midpoint fits have no time index, so alg1 rejects time windows and
    // points at the fix.
    let err = run(&[
        "comvar",
        "embed",
        "--x",
        x_path.to_str().unwrap(),
        "--y",
        y_path.to_str().unwrap(),
        "--algorithm",
        "alg1",
        "--window",
        "6",
        "--out-dir",
        out_s,
    ])
    .unwrap_err();
    assert!(format!("{err:#}").contains("--k-neighbors"), "got: {err:#}");

    // The two input styles cannot be mixed.
    let err = run(&[
        "comvar",
        "embed",
        "--x",
        x_path.to_str().unwrap(),
        "--set",
        y_path.to_str().unwrap(),
        "--set",
        x_path.to_str().unwrap(),
        "--out-dir",
        out_s,
    ])
    .unwrap_err();
    assert!(format!("{err:#}").contains("conflicts"), "got: {err:#}");

    // Two-set pipelines need a second set.
    let err = run(&[
        "comvar",
        "embed",
        "--x",
        x_path.to_str().unwrap(),
        "--out-dir",
        out_s,
    ])
    .unwrap_err();
    assert!(format!("{err:#}").contains("--y"), "got: {err:#}");
}

#[test]
fn experiments_run_at_small_sizes() {
    let dir = TempDir::new().unwrap();
    // Small runs only need to complete and write their artifacts; the
    // scientific verdict is owned by the acceptance suite at full size.
    let out = dir.path().join("pendulum");
    let outcome = run(&[
        "comvar",
        "pendulum",
        "--n",
        "24",
        "--k-neighbors",
        "8",
        "--out-dir",
        out.to_str().unwrap(),
    ])
    .unwrap();
    assert!(out.join("spectrum.csv").exists(), "{}", outcome.summary);

    let out = dir.path().join("icons");
    let outcome = run(&[
        "comvar",
        "icons",
        "--n",
        "40",
        "--out-dir",
        out.to_str().unwrap(),
    ])
    .unwrap();
    assert!(out.join("embedding.csv").exists(), "{}", outcome.summary);

    let out = dir.path().join("metric-compare");
    let outcome = run(&[
        "comvar",
        "metric-compare",
        "--n",
        "40",
        "--out-dir",
        out.to_str().unwrap(),
    ])
    .unwrap();
    assert!(out.join("pairs.csv").exists(), "{}", outcome.summary);
}
