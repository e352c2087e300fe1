use edmc_core::baselines::{mds_map, sstress_solve, SStressOptions};
use edmc_core::completion::{solve, SolverOptions, Variant};
use edmc_core::geometry::{build_squared_distances, calibration_error, pairwise_distances, position_error};
use edmc_core::observation::{add_noise, make_mask, observe, squared, NoiseModel};
use edmc_core::rng::{derive_seed, seeded, uniform_in_disc};
use edmc_core::{ObservationMask, PositionMatrix};
use nalgebra::DMatrix;

fn disc(n: usize, radius: f64, seed: u64) -> PositionMatrix {
    let mut rng = seeded(seed);
    let pts: Vec<[f64; 2]> = (0..n).map(|_| uniform_in_disc(&mut rng, radius)).collect();
    PositionMatrix::from_points(&pts).unwrap()
}

fn opts(seed: u64) -> SolverOptions {
    SolverOptions { seed, ..SolverOptions::default() }
}

#[test]
fn noiseless_partial_matrix_is_completed_exactly() {
    let x = disc(30, 1.0, 5);
    let d = pairwise_distances(&x);
    let mask = make_mask(&d, 1.4, 0.9, 6).unwrap();
    assert!(mask.missing_fraction() > 0.1);
    let obs = observe(build_squared_distances(&x).as_matrix(), &mask).unwrap();
    for v in [Variant::Mc, Variant::McCadzow, Variant::Emc] {
        let out = solve(&obs, 2, v, &SolverOptions { max_iterations: 5000, ..opts(1) }).unwrap();
        let err = calibration_error(&x, &out.positions).unwrap();
        assert!(err < 1e-6, "{}: {err}", v.name());
    }
}

#[test]
fn emc_beats_shortest_path_on_structured_missing() {
    let mut emc = 0.0;
    let mut sp = 0.0;
    for t in 0..4 {
        let seed = derive_seed(17, t);
        let x = disc(45, 9.5, seed);
        let d = pairwise_distances(&x);
        let noisy = add_noise(&d, &NoiseModel::multiplicative(0.0167, derive_seed(seed, 1))).unwrap();
        let mask = make_mask(&d, 7.5, 0.95, derive_seed(seed, 2)).unwrap();
        let obs = observe(&squared(&noisy), &mask).unwrap();
        emc += position_error(&x, &solve(&obs, 2, Variant::Emc, &opts(seed)).unwrap().positions).unwrap();
        sp += position_error(&x, &mds_map(&obs, 2).unwrap().positions).unwrap();
    }
    assert!(emc < sp, "E-MC2 {emc} vs MDS-MAP {sp}");
    assert!(emc / 4.0 < 0.1, "mean position error {}", emc / 4.0);
}

#[test]
fn three_dimensional_layout_with_random_missing() {
    use rand::Rng;
    for seed in 0..3 {
        let mut rng = seeded(seed);
        let x = PositionMatrix::from_fn(40, 3, |_, _| rng.random::<f64>()).unwrap();
        let mask = make_mask(&pairwise_distances(&x), f64::INFINITY, 0.6, seed + 100).unwrap();
        let obs = observe(build_squared_distances(&x).as_matrix(), &mask).unwrap();
        let out = solve(&obs, 3, Variant::Emc, &opts(seed)).unwrap();
        assert!(calibration_error(&x, &out.positions).unwrap() < 1e-8, "seed {seed}");
    }
}

#[test]
fn sstress_fits_complete_noiseless_input() {
    let x = disc(8, 1.0, 11);
    let obs = observe(build_squared_distances(&x).as_matrix(), &ObservationMask::full(8)).unwrap();
    let out = sstress_solve(&obs, 2, &SStressOptions { seed: 1, ..SStressOptions::default() }).unwrap();
    assert!(calibration_error(&x, &out.positions).unwrap() < 1e-6);
}

#[test]
fn completed_matrix_is_symmetric_and_hollow() {
    let x = disc(20, 2.0, 8);
    let d = pairwise_distances(&x);
    let noisy = add_noise(&d, &NoiseModel::multiplicative(0.05, 9)).unwrap();
    let mask = make_mask(&d, 3.0, 0.9, 10).unwrap();
    let obs = observe(&squared(&noisy), &mask).unwrap();
    let m: DMatrix<f64> = solve(&obs, 2, Variant::Emc, &opts(3)).unwrap().completed;
    assert!((&m - m.transpose()).amax() < 1e-9 * m.amax());
    assert!(m.diagonal().amax() < 1e-9 * m.amax());
    assert!(m.iter().all(|v| *v >= -1e-9));
}
