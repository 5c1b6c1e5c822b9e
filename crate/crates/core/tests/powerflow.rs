mod common;

use common::{manual_scenario, random_grid, rel, rng};
use quso_core::cost_table::build_table;
use quso_core::grid::{generate_scenario, parse_cdf, PowerGrid, ScenarioParams, IEEE57_CDF};
use quso_core::powerflow::{solve_flow, solve_flow_dense_oracle, FlowSolver, GridFactorization};
use rand::Rng;

#[test]
fn angles_are_linear_in_injections() {
    let mut r = rng(1);
    for _ in 0..50 {
        let n = r.random_range(3..40);
        let grid = random_grid(&mut r, n);
        let f = GridFactorization::new(&grid).unwrap();
        let p1: Vec<f64> = (0..n).map(|_| r.random_range(-50.0..50.0)).collect();
        let p2: Vec<f64> = (0..n).map(|_| r.random_range(-50.0..50.0)).collect();
        let sum: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| a + b).collect();
        let (t1, t2, ts) = (f.angles(&p1), f.angles(&p2), f.angles(&sum));
        let scale = ts.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            assert!(rel(t1[i] + t2[i], ts[i], scale) < 1e-9);
        }
        assert_eq!(ts[grid.reference()], 0.0);
    }
}

#[test]
fn shared_factorization_matches_fresh_solves() {
    let grid = parse_cdf(IEEE57_CDF).unwrap();
    let s = generate_scenario(&grid, &ScenarioParams::new(8, 1000.0, 0.6, 3)).unwrap();
    let shared = FlowSolver::new(&s).unwrap();
    let mut r = rng(2);
    for _ in 0..100 {
        let x: Vec<bool> = (0..8).map(|_| r.random()).collect();
        let a = shared.solve(&x).unwrap();
        let b = solve_flow(&s, &x).unwrap();
        assert!(rel(a.cost, b.cost, b.cost) < 1e-12);
        for (u, v) in a.theta.iter().zip(&b.theta) {
            assert!((u - v).abs() <= 1e-12 * v.abs().max(1.0));
        }
    }
}

#[test]
fn cost_is_invariant_under_bus_relabeling() {
    let mut r = rng(3);
    for _ in 0..20 {
        let n = r.random_range(4..25);
        let grid = random_grid(&mut r, n);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, r.random_range(0..=i));
        }
        let relabeled = PowerGrid::new(
            n,
            grid.lines().iter().map(|l| (perm[l.from], perm[l.to], l.susceptance)),
            Some(perm[grid.reference()]),
        )
        .unwrap();
        let gens: Vec<usize> = (0..n).filter(|&b| b != grid.reference()).take(2).collect();
        let loads: Vec<f64> = (0..n).map(|_| r.random_range(0.0..10.0)).collect();
        let a = manual_scenario(&grid, &gens, 30.0, &loads);
        // carry the same per-bus injections over to the relabeled buses
        let mut inj = vec![0.0; n];
        for b in 0..n {
            inj[perm[b]] = a.nominal_injections()[b];
        }
        let pgens: Vec<usize> = gens.iter().map(|&g| perm[g]).collect();
        let mut ploads = Vec::new();
        for (b, p) in inj.iter().enumerate() {
            if !pgens.contains(&b) && ploads.len() < n {
                ploads.push(-p);
            }
        }
        let b = manual_scenario(&relabeled, &pgens, 30.0, &ploads);
        for x in [[true, true], [true, false], [false, true], [false, false]] {
            let ca = solve_flow(&a, &x).unwrap().cost;
            let cb = solve_flow(&b, &x).unwrap().cost;
            assert!(rel(ca, cb, ca) < 1e-9, "{ca} vs {cb}");
        }
    }
}

#[test]
fn triangle_table_matches_dense_solves() {
    let grid = PowerGrid::new(3, [(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)], None).unwrap();
    let s = manual_scenario(&grid, &[0], 1.0, &[1.0, 0.0]);
    let t = build_table(&s, 24).unwrap();
    let c1 = solve_flow_dense_oracle(&s, &[true]).unwrap().cost;
    let c0 = solve_flow_dense_oracle(&s, &[false]).unwrap().cost;
    assert!((t.raw()[1] - 4.0 / 3.0).abs() < 1e-12);
    assert!((c1 - 4.0 / 3.0).abs() < 1e-12);
    // served from the slack the load sees the mirror-image flow pattern
    assert!((t.raw()[0] - c0).abs() < 1e-12);
    assert!((c0 - 4.0 / 3.0).abs() < 1e-12);
}
