use nalgebra::DMatrix;
use quso_core::grid::{generate_scenario, CdfCase, PowerGrid, ScenarioParams, IEEE57_CDF};
use quso_core::powerflow::reduced_laplacian;

// Counted from the branch records of the bundled case: 80 records, with the
// pairs 4-18 and 24-25 each listed twice.
const BRANCH_RECORDS: usize = 80;
const DISTINCT_PAIRS: usize = 78;

#[test]
fn bundled_case_shape() {
    let case = CdfCase::parse(IEEE57_CDF).unwrap();
    assert_eq!(case.grid.num_buses(), 57);
    assert_eq!(case.generator_count(), 7);
    assert_eq!(case.load_count(), 42);
    assert_eq!(case.branch_records, BRANCH_RECORDS);
    assert_eq!(case.grid.lines().len(), DISTINCT_PAIRS);
    assert_eq!(case.grid.reference(), 56);
    assert!(case.grid.lines().iter().all(|l| l.from < l.to && l.susceptance > 0.0));
}

#[test]
fn reduced_laplacian_is_positive_definite() {
    let grid = CdfCase::parse(IEEE57_CDF).unwrap().grid;
    let l = reduced_laplacian(&grid).unwrap();
    assert_eq!(l.dim, 56);
    let m = DMatrix::from_row_slice(l.dim, l.dim, &l.data);
    assert_eq!(m, m.transpose());
    let eig = m.symmetric_eigenvalues();
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(min > 0.0, "smallest eigenvalue {min}");
}

#[test]
fn grid_json_round_trip_is_exact() {
    let grid = CdfCase::parse(IEEE57_CDF).unwrap().grid;
    let text = serde_json::to_string(&grid).unwrap();
    let back: PowerGrid = serde_json::from_str(&text).unwrap();
    assert_eq!(back, grid);
    for (a, b) in back.lines().iter().zip(grid.lines()) {
        assert_eq!(a.susceptance.to_bits(), b.susceptance.to_bits());
    }
}

#[test]
fn seven_generator_scenario_splits_capacity() {
    let grid = CdfCase::parse(IEEE57_CDF).unwrap().grid;
    let s = generate_scenario(&grid, &ScenarioParams::new(7, 1000.0, 1.0, 15)).unwrap();
    assert_eq!(s.capacity_per_generator(), 1000.0 / 7.0);
    for &g in s.generators() {
        assert_eq!(s.nominal_injections()[g], 1000.0 / 7.0);
    }
    assert!((s.total_load() - 1000.0).abs() <= 1e-12 * 1000.0);
    let again = generate_scenario(&grid, &ScenarioParams::new(7, 1000.0, 1.0, 15)).unwrap();
    assert_eq!(serde_json::to_vec(&s).unwrap(), serde_json::to_vec(&again).unwrap());
}
