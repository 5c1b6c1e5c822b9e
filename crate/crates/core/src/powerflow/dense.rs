//! Independent reference solver: dense Gaussian elimination with partial
//! pivoting on a freshly assembled reduced Laplacian, one call per solve.

use super::{FlowError, FlowSolution};
use crate::grid::Scenario;

pub fn solve_flow_dense_oracle(scenario: &Scenario, x: &[bool]) -> Result<FlowSolution, FlowError> {
    let m = scenario.num_generators();
    if x.len() != m {
        return Err(FlowError::DimensionMismatch {
            expected: m,
            got: x.len(),
        });
    }
    let grid = scenario.grid();
    let n = grid.num_buses();
    let r = grid.reference();

    let mut p = scenario.nominal_injections().to_vec();
    for (bus, on) in scenario.generators().iter().zip(x) {
        if !on {
            p[*bus] = 0.0;
        }
    }

    let mut full = vec![vec![0.0; n]; n];
    for l in grid.lines() {
        full[l.from][l.from] += l.susceptance;
        full[l.to][l.to] += l.susceptance;
        full[l.from][l.to] -= l.susceptance;
        full[l.to][l.from] -= l.susceptance;
    }
    let keep: Vec<usize> = (0..n).filter(|&b| b != r).collect();
    let dim = keep.len();
    // augmented [A | b]
    let mut aug: Vec<Vec<f64>> = keep
        .iter()
        .map(|&i| {
            let mut row: Vec<f64> = keep.iter().map(|&j| full[i][j]).collect();
            row.push(p[i]);
            row
        })
        .collect();

    let scale = aug
        .iter()
        .flat_map(|row| row[..dim].iter())
        .fold(0.0f64, |a, v| a.max(v.abs()));
    for col in 0..dim {
        let pivot_row = (col..dim)
            .max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs()))
            .unwrap();
        let pivot = aug[pivot_row][col];
        if pivot.abs() <= scale * 1e-13 * dim as f64 {
            return Err(FlowError::Singular { pivot: col, value: pivot });
        }
        aug.swap(col, pivot_row);
        for row in col + 1..dim {
            let factor = aug[row][col] / aug[col][col];
            if factor != 0.0 {
                let (upper, lower) = aug.split_at_mut(row);
                for (a, p) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                    *a -= factor * p;
                }
            }
        }
    }
    let mut sol = vec![0.0; dim];
    for i in (0..dim).rev() {
        let s: f64 = (i + 1..dim).map(|k| aug[i][k] * sol[k]).sum();
        sol[i] = (aug[i][dim] - s) / aug[i][i];
    }

    let mut theta = vec![0.0; n];
    for (k, &bus) in keep.iter().enumerate() {
        theta[bus] = sol[k];
    }
    let flows: Vec<f64> = grid
        .lines()
        .iter()
        .map(|l| l.susceptance * (theta[l.from] - theta[l.to]))
        .collect();
    let mut cost: f64 = flows
        .iter()
        .zip(scenario.line_costs())
        .map(|(f, c)| c * f.abs())
        .sum();
    let lambda = scenario.imbalance_penalty();
    if lambda != 0.0 {
        let total: f64 = p.iter().sum();
        cost += lambda * total * total;
    }
    Ok(FlowSolution { theta, flows, cost })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{generate_scenario, PowerGrid, ScenarioParams};
    use crate::powerflow::solve_flow;

    #[test]
    fn agrees_with_factored_solver_on_a_mesh() {
        let grid = PowerGrid::new(
            6,
            [
                (0, 1, 3.0),
                (1, 2, 1.0),
                (2, 3, 2.0),
                (3, 4, 0.5),
                (4, 5, 4.0),
                (5, 0, 1.0),
                (1, 4, 2.5),
            ],
            Some(2),
        )
        .unwrap();
        let s = generate_scenario(&grid, &ScenarioParams::new(3, 90.0, 0.9, 11)).unwrap();
        for idx in 0..8 {
            let x = crate::powerflow::bits_of(idx, 3);
            let a = solve_flow(&s, &x).unwrap();
            let b = solve_flow_dense_oracle(&s, &x).unwrap();
            assert!((a.cost - b.cost).abs() <= 1e-12 * b.cost.abs().max(1.0));
            for (u, v) in a.theta.iter().zip(&b.theta) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }
}
