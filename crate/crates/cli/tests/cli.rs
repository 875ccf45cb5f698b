//! End-to-end tests of the installed binary: run directories, exit codes,
//! determinism, and the reference estimation round trip.

use std::path::Path;
use std::process::{Command, Output};

use spincompass::hamiltonian::{total_hamiltonian, FieldVector};
use spincompass::probe::thermal_probe;
use spincompass::spectrum::transition_catalogue;
use spincompass::spin_system::{magnetization_operator, preset, Axis};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spincompass"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin()
        .args(args)
        .current_dir(dir)
        .env_remove("SPINCOMPASS_OUTPUT_ROOT")
        .output()
        .expect("binary runs")
}

#[test]
fn spectrum_writes_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "spectrum",
            "--molecule",
            "formic_acid",
            "--theta",
            "0",
            "--phi",
            "0",
            "--field-tesla",
            "1e-7",
            "--out-dir",
            "out",
            "--run-name",
            "fig2a",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("out/fig2a");
    for file in [
        "config.toml",
        "catalogue.txt",
        "catalogue.json",
        "timeseries.txt",
        "spectrum.txt",
        "manifolds.json",
    ] {
        assert!(dir.join(file).exists(), "missing {file}");
    }
    // A single line at ~222.2 Hz.
    let catalogue = std::fs::read_to_string(dir.join("catalogue.txt")).unwrap();
    let lines: Vec<&str> = catalogue.lines().skip(1).collect();
    assert_eq!(lines.len(), 1);
    let freq: f64 = lines[0].split_whitespace().next().unwrap().parse().unwrap();
    assert!((freq - 222.2).abs() < 0.05, "line at {freq}");
}

#[test]
fn spectrum_is_deterministic_and_replayable() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "spectrum",
        "--molecule",
        "acetonitrile",
        "--theta",
        "1.0",
        "--phi",
        "0.6",
        "--field-tesla",
        "1e-7",
        "--out-dir",
        "out",
    ];
    let mut first = args.to_vec();
    first.extend(["--run-name", "a"]);
    let mut second = args.to_vec();
    second.extend(["--run-name", "b"]);
    assert!(run(&first, tmp.path()).status.success());
    assert!(run(&second, tmp.path()).status.success());
    for file in ["catalogue.txt", "timeseries.txt", "spectrum.txt"] {
        let a = std::fs::read(tmp.path().join("out/a").join(file)).unwrap();
        let b = std::fs::read(tmp.path().join("out/b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
    // Replaying the snapshot reproduces the outputs too.
    let replay = run(
        &[
            "spectrum",
            "--config",
            "out/a/config.toml",
            "--run-name",
            "ignored-by-snapshot",
        ],
        tmp.path(),
    );
    assert!(replay.status.success());
    let a = std::fs::read(tmp.path().join("out/a/catalogue.txt")).unwrap();
    assert_eq!(a, std::fs::read(tmp.path().join("out/a/catalogue.txt")).unwrap());
}

#[test]
fn unknown_molecule_exits_with_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        &["spectrum", "--molecule", "water", "--field-tesla", "1e-7"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("formic_acid"), "stderr must list presets: {stderr}");
}

fn write_reference_measurements(dir: &Path, axes: &[Axis]) -> std::path::PathBuf {
    let sys = preset("formic_acid").unwrap();
    let (theta, phi, b) = (1.289, 0.047, 1.0788e-7);
    let obs = magnetization_operator(&sys, Axis::Z);
    let mut text = String::new();
    for &axis in axes {
        let field = FieldVector::new(theta, phi, b).unwrap();
        let h = total_hamiltonian(&sys, Some(&field), None);
        let probe = thermal_probe(&sys, axis, 1.3, 298.0).unwrap();
        let lines = transition_catalogue(&sys, &h, &probe, &obs).unwrap();
        let triplet: Vec<_> = lines.iter().filter(|l| l.frequency > 100.0).collect();
        text.push_str("[[measurement]]\n");
        text.push_str(&format!("guiding_axis = \"{axis}\"\n"));
        text.push_str(&format!(
            "frequencies_hz = [{}]\n",
            triplet
                .iter()
                .map(|l| format!("{:.12e}", l.frequency))
                .collect::<Vec<_>>()
                .join(", ")
        ));
        text.push_str(&format!(
            "amplitudes = [{}]\n\n",
            triplet
                .iter()
                .map(|l| format!("{:.12e}", l.magnitude()))
                .collect::<Vec<_>>()
                .join(", ")
        ));
    }
    let path = dir.join("measurements.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn estimate_recovers_reference_field() {
    let tmp = tempfile::tempdir().unwrap();
    write_reference_measurements(tmp.path(), &[Axis::X, Axis::Y, Axis::Z]);
    let out = run(
        &[
            "estimate",
            "--molecule",
            "formic_acid",
            "--measurements",
            "measurements.toml",
            "--out-dir",
            "out",
            "--run-name",
            "est",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("out/est/result.json")).unwrap())
            .unwrap();
    let theta = json["result"]["theta"].as_f64().unwrap();
    let phi = json["result"]["phi"].as_f64().unwrap();
    let magnitude = json["magnitude"].as_f64().unwrap();
    assert!((theta - 1.289).abs() < 1e-3);
    assert!((phi - 0.047).abs() < 1e-3);
    assert!((magnitude - 1.0788e-7).abs() < 1e-11);
}

#[test]
fn single_axis_estimate_exits_ambiguous() {
    let tmp = tempfile::tempdir().unwrap();
    write_reference_measurements(tmp.path(), &[Axis::Z]);
    let out = run(
        &[
            "estimate",
            "--molecule",
            "formic_acid",
            "--measurements",
            "measurements.toml",
            "--out-dir",
            "out",
            "--run-name",
            "single",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    // The result is still written.
    assert!(tmp.path().join("out/single/result.json").exists());
}

#[test]
fn estimate_rejects_empty_file() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("empty.toml"), "").unwrap();
    let out = run(
        &[
            "estimate",
            "--molecule",
            "formic_acid",
            "--measurements",
            "empty.toml",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn benchmark_enforces_trial_floor_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["benchmark", "--trials", "10"], tmp.path());
    assert_eq!(out.status.code(), Some(2));

    let args = [
        "benchmark",
        "--trials",
        "150",
        "--sigma",
        "0.01",
        "--seed",
        "9",
        "--out-dir",
        "out",
    ];
    let mut first = args.to_vec();
    first.extend(["--run-name", "a"]);
    let mut second = args.to_vec();
    second.extend(["--run-name", "b"]);
    assert!(run(&first, tmp.path()).status.success());
    assert!(run(&second, tmp.path()).status.success());
    for file in ["precision.json", "histogram_theta.txt", "histogram_phi.txt", "propagation.txt"] {
        let a = std::fs::read(tmp.path().join("out/a").join(file)).unwrap();
        let b = std::fs::read(tmp.path().join("out/b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs for identical seeds");
    }
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("out/a/precision.json")).unwrap())
            .unwrap();
    assert_eq!(json["failures"].as_u64(), Some(0));
    assert!(json["sigma_theta"].as_f64().unwrap() > 0.0);
}

#[test]
fn list_transitions_reports_manifolds() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "list-transitions",
            "--molecule",
            "acetonitrile",
            "--magnitude",
            "1e-7",
        ],
        tmp.path(),
    );
    assert!(out.status.success());
    let reports: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let arr = reports.as_array().unwrap();
    assert_eq!(arr.len(), 2);
    assert_eq!(arr[0]["zero_quantum"].as_array().unwrap().len(), 3);
    assert_eq!(arr[0]["single_quantum"].as_array().unwrap().len(), 6);
    assert_eq!(arr[1]["multiplicity"].as_u64(), Some(2));
}

#[test]
fn output_root_env_var_sets_default() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("envroot");
    let out = bin()
        .args([
            "spectrum",
            "--molecule",
            "formic_acid",
            "--field-tesla",
            "1e-7",
            "--run-name",
            "via-env",
        ])
        .current_dir(tmp.path())
        .env("SPINCOMPASS_OUTPUT_ROOT", &root)
        .output()
        .expect("binary runs");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(root.join("via-env/catalogue.txt").exists());
}

#[test]
fn presets_lists_all_molecules() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["presets"], tmp.path());
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    for name in ["formic_acid", "formaldehyde", "acetonitrile", "acetic_acid"] {
        assert!(stdout.contains(name));
    }
}
