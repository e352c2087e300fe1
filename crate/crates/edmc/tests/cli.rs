use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use edmc::io::{read_matrix, read_positions, write_matrix};
use edmc_core::geometry::{build_squared_distances, calibration_error};
use edmc_core::PositionMatrix;
use nalgebra::DMatrix;

fn edmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edmc")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn square_layout() -> PositionMatrix {
    PositionMatrix::from_points(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.3], [0.2, 0.8]]).unwrap()
}

#[test]
fn calibrate_recovers_a_complete_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let x = square_layout();
    let input = dir.path().join("d2.csv");
    write_matrix(&input, build_squared_distances(&x).as_matrix()).unwrap();
    let out = dir.path().join("x.csv");
    let diag = dir.path().join("diag.csv");
    let done = dir.path().join("completed.csv");
    let r = edmc(&["calibrate", "-i", p(&input), "-o", p(&out), "--diagnostics", p(&diag), "--completed", p(&done)]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let est = read_positions(&out).unwrap();
    assert!(calibration_error(&x, &est).unwrap() < 1e-8);
    assert!(fs::read_to_string(&diag).unwrap().starts_with("iteration,cost,rmse"));
    assert_eq!(read_matrix(&done).unwrap().shape(), (6, 6));
}

#[test]
fn calibrate_accepts_plain_distances_and_missing_entries() {
    let dir = tempfile::tempdir().unwrap();
    let x = square_layout();
    let mut d = build_squared_distances(&x).into_matrix().map(f64::sqrt);
    d[(0, 2)] = f64::NAN;
    d[(2, 0)] = f64::NAN;
    let input = dir.path().join("d.csv");
    write_matrix(&input, &d).unwrap();
    let out = dir.path().join("x.csv");
    for solver in ["E-MC2", "MC2", "MC", "MDS-MAP", "s-stress"] {
        let r = edmc(&["calibrate", "-i", p(&input), "-o", p(&out), "--plain", "--solver", solver]);
        assert_eq!(code(&r), 0, "{solver}: {}", String::from_utf8_lossy(&r.stderr));
        assert_eq!(read_positions(&out).unwrap().len(), 6);
    }
}

#[test]
fn exit_code_two_for_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let garbage = dir.path().join("bad.csv");
    fs::write(&garbage, "0,1,x\n1,0,2\nx,2,0\n").unwrap();
    assert_eq!(code(&edmc(&["calibrate", "-i", p(&garbage), "-o", p(&out)])), 2);

    let missing = dir.path().join("does_not_exist.csv");
    assert_eq!(code(&edmc(&["calibrate", "-i", p(&missing), "-o", p(&out)])), 2);

    let split = dir.path().join("split.csv");
    let mut m = DMatrix::from_element(4, 4, f64::NAN);
    for (i, j) in [(0, 1), (2, 3)] {
        m[(i, j)] = 1.0;
        m[(j, i)] = 1.0;
    }
    m.fill_diagonal(0.0);
    write_matrix(&split, &m).unwrap();
    assert_eq!(code(&edmc(&["calibrate", "-i", p(&split), "-o", p(&out)])), 2);

    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "trials = 3\nunknown_key = 1\n").unwrap();
    assert_eq!(code(&edmc(&["run", "-c", p(&cfg)])), 2);

    assert_eq!(code(&edmc(&["calibrate", "-i", p(&split), "-o", p(&out), "--solver", "nope"])), 2);
    assert_eq!(code(&edmc(&["sweep", "--axis", "volume"])), 2);
    assert_eq!(code(&edmc(&[])), 2);
}

#[test]
fn exit_code_one_for_solver_failure() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("tri.csv");
    fs::write(&input, "0,1,1\n1,0,1\n1,1,0\n").unwrap();
    let out = dir.path().join("x.csv");
    let r = edmc(&["calibrate", "-i", p(&input), "-o", p(&out), "--plain"]);
    assert_eq!(code(&r), 1, "{}", String::from_utf8_lossy(&r.stderr));
}

#[test]
fn simulate_then_calibrate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("real_layout.toml");
    let r = edmc(&["simulate", "-c", p(&cfg), "--output-dir", p(dir.path()), "--seed", "4"]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let truth = read_positions(&dir.path().join("truth.csv")).unwrap();
    let observed = read_matrix(&dir.path().join("observed.csv")).unwrap();
    assert_eq!(observed.shape(), (11, 11));
    assert_eq!(observed.iter().filter(|v| v.is_nan()).count(), 14);

    let out = dir.path().join("x.csv");
    let r = edmc(&["calibrate", "-i", p(&dir.path().join("observed.csv")), "-o", p(&out)]);
    assert_eq!(code(&r), 0);
    let err = calibration_error(&truth, &read_positions(&out).unwrap()).unwrap();
    assert!(err < 5e-2, "calibration error {err}");
}

#[test]
fn sweep_writes_deterministic_tables() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = configs().join("disc.toml");
    for (dir, workers) in [(&a, "1"), (&b, "2")] {
        let r = edmc(&[
            "sweep", "-c", p(&cfg), "--axis", "sigma", "--values", "0.01,0.04", "--trials", "2", "--workers", workers,
            "--solvers", "E-MC2,MDS-MAP", "--output-dir", p(dir.path()),
        ]);
        assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
        let stdout = String::from_utf8(r.stdout).unwrap();
        assert!(stdout.starts_with("x,solver,trials"));
        assert_eq!(stdout.lines().count(), 5);
    }
    for name in ["sweep_sigma_trials.csv", "sweep_sigma_aggregate.csv", "sweep_sigma_plot.csv"] {
        let x = fs::read(a.path().join(name)).unwrap();
        assert_eq!(x, fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    assert!(a.path().join("sweep_sigma_timing.csv").exists());
}

#[test]
fn verify_bounds_reports_each_size() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("b.toml");
    fs::write(&cfg, "[bounds]\nsizes = [20, 40]\ntrials = 2\n").unwrap();
    let out = dir.path().join("bounds.csv");
    let r = edmc(&["verify-bounds", "-c", p(&cfg), "-o", p(&out)]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let stdout = String::from_utf8(r.stdout).unwrap();
    let rows: Vec<&str> = stdout.lines().collect();
    assert_eq!(rows[0], "n,max_structured_ratio,max_noise_ratio");
    assert!(rows[1].starts_with("20,") && rows[2].starts_with("40,"));
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 5);
}

#[test]
fn coherence_fit_reads_curves() {
    use edmc::io::write_coherence_curve;
    use edmc_core::coherence::{synthesize_coherence, FrequencyBand};

    let dir = tempfile::tempdir().unwrap();
    let omega = FrequencyBand::default().grid().unwrap();
    let near = dir.path().join("near.csv");
    let far = dir.path().join("far.csv");
    write_coherence_curve(&near, &synthesize_coherence(0.3, &omega, 0.0, 340.0, 0).unwrap()).unwrap();
    write_coherence_curve(&far, &synthesize_coherence(1.2, &omega, 0.0, 340.0, 0).unwrap()).unwrap();
    let r = edmc(&["coherence-fit", "-i", p(&near), p(&far), "--speed-of-sound", "340"]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let stdout = String::from_utf8(r.stdout).unwrap();
    let rows: Vec<Vec<&str>> = stdout.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert!((rows[0][1].parse::<f64>().unwrap() - 0.3).abs() < 1e-3);
    assert_eq!(rows[0][3], "true");
    assert!((rows[1][1].parse::<f64>().unwrap() - 1.2).abs() < 1e-3);
    assert_eq!(rows[1][3], "false");
}

#[test]
fn real_layout_compact_subset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("real_layout.toml");
    let r = edmc(&["real-layout", "-c", p(&cfg), "--subset", "9", "--solvers", "E-MC2,MDS-MAP", "--output-dir", p(dir.path())]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let stdout = String::from_utf8(r.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 3);
    for line in stdout.lines().skip(1) {
        let cal: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(cal.is_finite() && cal < 1e-2, "{line}");
    }
}

#[test]
fn bundled_configs_load() {
    for entry in fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        edmc::ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}
