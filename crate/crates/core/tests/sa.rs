mod common;

use common::rng;
use quso_core::cost_table::build_table;
use quso_core::grid::{generate_scenario, parse_cdf, ScenarioParams, IEEE57_CDF};
use quso_core::sa::{metropolis_accept, run_sa, SaConfig};

#[test]
fn acceptance_frequency_matches_boltzmann_factor() {
    let trials = 100_000;
    for (delta, t) in [(0.3, 0.5), (0.05, 0.1), (1.0, 2.0)] {
        let mut r = rng(20);
        let hits = (0..trials)
            .filter(|_| metropolis_accept(delta, t, 1.0, &mut r))
            .count();
        let p = (-delta / t).exp();
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        let freq = hits as f64 / trials as f64;
        assert!((freq - p).abs() <= 3.0 * sigma, "{freq} vs {p}");
    }
}

#[test]
fn ten_bit_instance_reaches_exhaustive_optimum() {
    let grid = parse_cdf(IEEE57_CDF).unwrap();
    let s = generate_scenario(&grid, &ScenarioParams::new(10, 1000.0, 0.7, 15)).unwrap();
    let table = build_table(&s, 24).unwrap();
    let runs = run_sa(
        &table,
        &SaConfig {
            temperature_steps: 80,
            ..SaConfig::default()
        },
    )
    .unwrap();
    assert_eq!(runs.len(), 10);
    assert!(runs.iter().any(|r| r.best_index == table.min_index()));
}
