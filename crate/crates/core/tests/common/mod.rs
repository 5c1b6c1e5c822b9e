#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use quso_core::grid::{PowerGrid, Scenario, ScenarioDocument};
use quso_core::qaoa::RampSchedule;
use quso_core::rng::{self, Purpose, StreamRng};
use rand::Rng;

pub fn rng(seed: u64) -> StreamRng {
    rng::stream(seed, Purpose::NodeAssignment, 0xAC)
}

/// Random connected graph: a random spanning tree plus extra edges.
pub fn random_grid(r: &mut StreamRng, n: usize) -> PowerGrid {
    let mut lines = Vec::new();
    for v in 1..n {
        lines.push((r.random_range(0..v), v, r.random_range(0.5..20.0)));
    }
    for _ in 0..r.random_range(0..=n) {
        let (a, b) = (r.random_range(0..n), r.random_range(0..n));
        if a != b {
            lines.push((a, b, r.random_range(0.5..20.0)));
        }
    }
    let reference = r.random_range(0..n);
    PowerGrid::new(n, lines, Some(reference)).unwrap()
}

/// Scenario with the given generator buses, per-generator capacity and loads
/// (positive MW) at every other non-reference bus.
pub fn manual_scenario(grid: &PowerGrid, generators: &[usize], cap: f64, loads: &[f64]) -> Scenario {
    let doc_grid = quso_core::grid::GridDocument::from(grid);
    let mut injections = vec![0.0; grid.num_buses()];
    let mut li = 0;
    for (bus, p) in injections.iter_mut().enumerate() {
        if generators.contains(&bus) {
            *p = cap;
        } else if li < loads.len() {
            *p = -loads[li];
            li += 1;
        }
    }
    let total = cap * generators.len() as f64;
    let load_sum: f64 = injections.iter().filter(|p| **p < 0.0).map(|p| -p).sum();
    let doc = ScenarioDocument {
        buses: doc_grid.buses,
        lines: doc_grid.lines,
        reference_bus: doc_grid.reference_bus,
        generators: generators.iter().map(|g| g + 1).collect(),
        injections,
        line_costs: vec![1.0; grid.lines().len()],
        total_capacity: total,
        load_fraction: load_sum / total,
        seed: 0,
        imbalance_penalty: 0.0,
    };
    Scenario::try_from(doc).unwrap()
}

/// `|x|` relative to `scale`, with a floor so zeros compare absolutely.
pub fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(1.0)
}

fn kron(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    a.kronecker(b)
}

/// Final amplitudes of the QAOA circuit from explicit `2^n x 2^n` matrices:
/// Hadamards on `|0...0>`, diagonal phases and Kronecker-built mixers.
pub fn dense_qaoa(costs: &[f64], schedule: &RampSchedule) -> Vec<Complex64> {
    let dim = costs.len();
    let n = dim.trailing_zeros() as usize;
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let had = DMatrix::from_row_slice(2, 2, &[h, h, h, -h]);
    let mut hn = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
    for _ in 0..n {
        hn = kron(&had, &hn);
    }
    let mut psi = DMatrix::zeros(dim, 1);
    psi[(0, 0)] = Complex64::new(1.0, 0.0);
    psi = &hn * psi;
    for (&g, &b) in schedule.gammas().iter().zip(schedule.betas()) {
        let phase = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            dim,
            costs.iter().map(|&c| Complex64::from_polar(1.0, -g * c)),
        ));
        let (c, s) = (Complex64::new(b.cos(), 0.0), Complex64::new(0.0, -b.sin()));
        let rx = DMatrix::from_row_slice(2, 2, &[c, s, s, c]);
        let mut mixer = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        for _ in 0..n {
            mixer = kron(&rx, &mixer);
        }
        psi = &mixer * (&phase * psi);
    }
    psi.iter().copied().collect()
}
