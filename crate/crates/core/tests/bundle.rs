use nalgebra::DMatrix;

use robust_enkf::bundle;
use robust_enkf::dual_enkf::{GainApprox, GainMode};
use robust_enkf::pde_sim::{Boundary, GridSpec, PdeKind, PdeSimulator};
use robust_enkf::reduced_model::{collect_snapshots, fit_dmdc, to_continuous, Excitation};
use robust_enkf::riccati::{solve_are, LtiSystem};

#[test]
fn exact_gain_survives_a_file_round_trip() {
    let a = DMatrix::from_row_slice(3, 3, &[-1.0, 0.3, 0.0, 0.1, -0.5, 0.2, 0.0, 0.4, 0.7]);
    let b = DMatrix::from_row_slice(3, 1, &[0.0, 0.0, 1.0]);
    let sys = LtiSystem::new(
        a,
        b,
        DMatrix::identity(3, 3),
        DMatrix::identity(1, 1),
        DMatrix::identity(3, 3),
    )
    .unwrap();
    let p = solve_are(&sys).unwrap();
    let gain = GainApprox::from_value_matrix(p, GainMode::Linear).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gain.txt");
    bundle::save_gain(&path, &gain).unwrap();
    let back = bundle::load_gain(&path).unwrap();
    assert_eq!(back.p, gain.p);
    assert_eq!(back.s0, gain.s0);
    assert_eq!(back.mode, gain.mode);
}

#[test]
fn fitted_heat_model_survives_a_file_round_trip() {
    let grid = GridSpec::new(24, 1.0).unwrap();
    let sim = PdeSimulator::new(PdeKind::Heat, 0.002, grid, 4, Boundary::Periodic).unwrap();
    let data = collect_snapshots(
        &sim,
        6,
        40,
        1e-3,
        Excitation::default(),
        |rng| robust_enkf::pde_sim::sample_initial_condition(rng, &grid),
        4,
    )
    .unwrap();
    let model = to_continuous(&fit_dmdc(&data, 6).unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.txt");
    bundle::save_reduced_model(&path, &model).unwrap();
    assert_eq!(bundle::load_reduced_model(&path).unwrap(), model);
}
