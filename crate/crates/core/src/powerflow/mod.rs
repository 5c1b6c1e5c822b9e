//! DC power flow for generator commitments.
//!
//! Angles solve `B_red theta_red = p_red`, where `B_red` is the
//! susceptance-weighted Laplacian with the reference bus row and column
//! removed. The reference bus has `theta = 0` and absorbs any imbalance.
//! Each undirected line carries one signed flow `b_ij (theta_i - theta_j)`,
//! oriented from the lower to the higher bus index, and the objective is
//! `sum_lines c_ij |flow_ij|` plus an optional `lambda (sum_i p_i)^2` term.

mod cholesky;
mod dense;

pub use dense::solve_flow_dense_oracle;

use crate::grid::{Line, PowerGrid, Scenario};
use cholesky::{reverse_cuthill_mckee, EnvelopeCholesky};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("reduced Laplacian is singular (pivot {pivot} = {value:e})")]
    Singular { pivot: usize, value: f64 },
    #[error("commitment has {got} bits, scenario has {expected} generators")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(dim: usize) -> Self {
        DenseMatrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.dim + j]
    }
}

/// Map from bus index to reduced index (`None` for the reference bus).
fn reduced_indices(grid: &PowerGrid) -> Vec<Option<usize>> {
    let r = grid.reference();
    (0..grid.num_buses())
        .map(|b| match b.cmp(&r) {
            std::cmp::Ordering::Less => Some(b),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(b - 1),
        })
        .collect()
}

/// Susceptance Laplacian without the reference bus row and column.
///
/// Fails with [`FlowError::Singular`] if the matrix is not positive definite.
pub fn reduced_laplacian(grid: &PowerGrid) -> Result<DenseMatrix, FlowError> {
    let red = reduced_indices(grid);
    let mut m = DenseMatrix::zeros(grid.num_buses() - 1);
    for l in grid.lines() {
        let (a, b) = (red[l.from], red[l.to]);
        if let Some(a) = a {
            *m.get_mut(a, a) += l.susceptance;
        }
        if let Some(b) = b {
            *m.get_mut(b, b) += l.susceptance;
        }
        if let (Some(a), Some(b)) = (a, b) {
            *m.get_mut(a, b) -= l.susceptance;
            *m.get_mut(b, a) -= l.susceptance;
        }
    }
    // Positive definiteness check doubles as the singularity test.
    let lower: Vec<_> = (0..m.dim)
        .flat_map(|i| (0..=i).map(move |j| (i, j)))
        .filter_map(|(i, j)| {
            let v = m.get(i, j);
            (v != 0.0 || i == j).then_some((i, j, v))
        })
        .collect();
    EnvelopeCholesky::factor(m.dim, &lower)?;
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowSolution {
    /// Voltage angle per bus in radians; zero at the reference bus.
    pub theta: Vec<f64>,
    /// Signed flow per line in MW, positive from `from` to `to`.
    pub flows: Vec<f64>,
    pub cost: f64,
}

/// Factorized reduced Laplacian of one grid, shareable across threads.
///
/// Built once; every commitment of every scenario on the grid reuses it.
#[derive(Debug, Clone)]
pub struct GridFactorization {
    reference: usize,
    lines: Vec<Line>,
    /// bus -> position in the permuted reduced system
    position: Vec<Option<usize>>,
    factor: EnvelopeCholesky,
}

impl GridFactorization {
    pub fn new(grid: &PowerGrid) -> Result<Self, FlowError> {
        let red = reduced_indices(grid);
        let dim = grid.num_buses() - 1;
        let mut adj = vec![Vec::new(); dim];
        for l in grid.lines() {
            if let (Some(a), Some(b)) = (red[l.from], red[l.to]) {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        let order = reverse_cuthill_mckee(&adj);
        let mut perm = vec![0; dim];
        for (new, &old) in order.iter().enumerate() {
            perm[old] = new;
        }
        let position: Vec<Option<usize>> = red.iter().map(|r| r.map(|i| perm[i])).collect();

        let mut lower = Vec::with_capacity(dim + grid.lines().len());
        let mut diag = vec![0.0; dim];
        for l in grid.lines() {
            let (a, b) = (position[l.from], position[l.to]);
            if let Some(a) = a {
                diag[a] += l.susceptance;
            }
            if let Some(b) = b {
                diag[b] += l.susceptance;
            }
            if let (Some(a), Some(b)) = (a, b) {
                lower.push((a.max(b), a.min(b), -l.susceptance));
            }
        }
        lower.extend(diag.iter().enumerate().map(|(i, &d)| (i, i, d)));
        let factor = EnvelopeCholesky::factor(dim, &lower)?;
        Ok(GridFactorization {
            reference: grid.reference(),
            lines: grid.lines().to_vec(),
            position,
            factor,
        })
    }

    /// Number of stored factor entries.
    pub fn envelope_len(&self) -> usize {
        self.factor.envelope_len()
    }

    /// Angles for a full injection vector. The reference entry is ignored.
    pub fn angles_into(&self, injections: &[f64], rhs: &mut Vec<f64>, theta: &mut [f64]) {
        rhs.clear();
        rhs.resize(self.factor.dim(), 0.0);
        for (bus, pos) in self.position.iter().enumerate() {
            if let Some(pos) = pos {
                rhs[*pos] = injections[bus];
            }
        }
        self.factor.solve_in_place(rhs);
        for (bus, pos) in self.position.iter().enumerate() {
            theta[bus] = pos.map_or(0.0, |p| rhs[p]);
        }
        debug_assert_eq!(theta[self.reference], 0.0);
    }

    pub fn angles(&self, injections: &[f64]) -> Vec<f64> {
        let mut theta = vec![0.0; self.position.len()];
        self.angles_into(injections, &mut Vec::new(), &mut theta);
        theta
    }
}

/// Per-thread buffers for [`FlowSolver::cost_of_index`].
#[derive(Debug, Default, Clone)]
pub struct FlowScratch {
    injections: Vec<f64>,
    rhs: Vec<f64>,
    theta: Vec<f64>,
}

/// A scenario bound to its grid factorization.
#[derive(Debug, Clone)]
pub struct FlowSolver {
    factorization: GridFactorization,
    generators: Vec<usize>,
    nominal: Vec<f64>,
    line_costs: Vec<f64>,
    penalty: f64,
}

impl FlowSolver {
    pub fn new(scenario: &Scenario) -> Result<Self, FlowError> {
        Ok(Self::with_factorization(
            scenario,
            GridFactorization::new(scenario.grid())?,
        ))
    }

    /// Reuse a factorization built for `scenario`'s grid.
    pub fn with_factorization(scenario: &Scenario, factorization: GridFactorization) -> Self {
        FlowSolver {
            factorization,
            generators: scenario.generators().to_vec(),
            nominal: scenario.nominal_injections().to_vec(),
            line_costs: scenario.line_costs().to_vec(),
            penalty: scenario.imbalance_penalty(),
        }
    }

    pub fn num_generators(&self) -> usize {
        self.generators.len()
    }

    pub fn factorization(&self) -> &GridFactorization {
        &self.factorization
    }

    fn fill_injections(&self, p: &mut Vec<f64>, on: impl Fn(usize) -> bool) {
        p.clear();
        p.extend_from_slice(&self.nominal);
        for (k, &bus) in self.generators.iter().enumerate() {
            if !on(k) {
                p[bus] = 0.0;
            }
        }
    }

    fn cost_of(&self, p: &[f64], theta: &[f64]) -> f64 {
        let flow_cost: f64 = self
            .factorization
            .lines
            .iter()
            .zip(&self.line_costs)
            .map(|(l, c)| c * (l.susceptance * (theta[l.from] - theta[l.to])).abs())
            .sum();
        if self.penalty == 0.0 {
            flow_cost
        } else {
            let imbalance: f64 = p.iter().sum();
            flow_cost + self.penalty * imbalance * imbalance
        }
    }

    pub fn solve(&self, x: &[bool]) -> Result<FlowSolution, FlowError> {
        if x.len() != self.generators.len() {
            return Err(FlowError::DimensionMismatch {
                expected: self.generators.len(),
                got: x.len(),
            });
        }
        let mut p = Vec::new();
        self.fill_injections(&mut p, |k| x[k]);
        let theta = self.factorization.angles(&p);
        let flows = self
            .factorization
            .lines
            .iter()
            .map(|l| l.susceptance * (theta[l.from] - theta[l.to]))
            .collect();
        let cost = self.cost_of(&p, &theta);
        Ok(FlowSolution { theta, flows, cost })
    }

    /// Objective for the commitment whose bit `k` is generator `k`.
    pub fn cost_of_index(&self, index: u64, scratch: &mut FlowScratch) -> f64 {
        let FlowScratch {
            injections,
            rhs,
            theta,
        } = scratch;
        self.fill_injections(injections, |k| (index >> k) & 1 == 1);
        theta.resize(self.nominal.len(), 0.0);
        self.factorization.angles_into(injections, rhs, theta);
        self.cost_of(injections, theta)
    }
}

/// Solve one commitment from scratch (factorizes the grid).
pub fn solve_flow(scenario: &Scenario, x: &[bool]) -> Result<FlowSolution, FlowError> {
    FlowSolver::new(scenario)?.solve(x)
}

/// Bits of `index`, least significant first.
pub fn bits_of(index: u64, width: usize) -> Vec<bool> {
    (0..width).map(|k| (index >> k) & 1 == 1).collect()
}

pub fn index_of(bits: &[bool]) -> u64 {
    bits.iter()
        .enumerate()
        .fold(0, |acc, (k, &b)| acc | ((b as u64) << k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{ScenarioDocument, ScenarioParams};

    fn triangle() -> PowerGrid {
        PowerGrid::new(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)], None).unwrap()
    }

    /// Scenario with bus 1 a generator of `cap` MW and fixed loads elsewhere.
    pub(crate) fn scenario(grid: &PowerGrid, cap: f64, loads: &[f64]) -> Scenario {
        let doc = ScenarioDocument {
            buses: (1..=grid.num_buses()).collect(),
            lines: crate::grid::GridDocument::from(grid).lines,
            reference_bus: grid.reference() + 1,
            generators: vec![1],
            injections: std::iter::once(cap)
                .chain(loads.iter().map(|l| -l))
                .collect(),
            line_costs: vec![1.0; grid.lines().len()],
            total_capacity: cap,
            load_fraction: 1.0,
            seed: 0,
            imbalance_penalty: 0.0,
        };
        Scenario::try_from(doc).unwrap()
    }

    #[test]
    fn reduced_laplacian_small_cases() {
        let two = PowerGrid::new(2, [(0, 1, 1.0)], None).unwrap();
        assert_eq!(reduced_laplacian(&two).unwrap().data, vec![1.0]);
        assert_eq!(
            reduced_laplacian(&triangle()).unwrap().data,
            vec![2.0, -1.0, -1.0, 2.0]
        );
    }

    #[test]
    fn two_bus_flow() {
        let grid = PowerGrid::new(2, [(0, 1, 1.0)], None).unwrap();
        let s = scenario(&grid, 1.0, &[0.0]);
        let sol = solve_flow(&s, &[true]).unwrap();
        assert_eq!(sol.theta, vec![1.0, 0.0]);
        assert_eq!(sol.flows, vec![1.0]);
        assert_eq!(sol.cost, 1.0);
    }

    #[test]
    fn triangle_flow() {
        let s = scenario(&triangle(), 1.0, &[1.0, 0.0]);
        let sol = solve_flow(&s, &[true]).unwrap();
        let expect_theta = [1.0 / 3.0, -1.0 / 3.0, 0.0];
        // lines sorted: (0,1), (0,2), (1,2)
        let expect_flows = [2.0 / 3.0, 1.0 / 3.0, -1.0 / 3.0];
        for (a, b) in sol.theta.iter().zip(expect_theta) {
            assert!((a - b).abs() < 1e-15);
        }
        for (a, b) in sol.flows.iter().zip(expect_flows) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((sol.cost - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_injection_zero_cost() {
        let s = scenario(&triangle(), 1.0, &[0.0, 0.0]);
        assert_eq!(solve_flow(&s, &[false]).unwrap().cost, 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        let s = scenario(&triangle(), 1.0, &[1.0, 0.0]);
        assert_eq!(
            solve_flow(&s, &[true, false]),
            Err(FlowError::DimensionMismatch {
                expected: 1,
                got: 2
            })
        );
    }

    #[test]
    fn penalty_adds_squared_imbalance() {
        let mut doc = ScenarioDocument::from(&scenario(&triangle(), 1.0, &[0.5, 0.0]));
        doc.imbalance_penalty = 2.0;
        let s = Scenario::try_from(doc).unwrap();
        let base = {
            let mut d = ScenarioDocument::from(&s);
            d.imbalance_penalty = 0.0;
            solve_flow(&Scenario::try_from(d).unwrap(), &[false]).unwrap().cost
        };
        let with = solve_flow(&s, &[false]).unwrap().cost;
        assert!((with - base - 2.0 * 0.25).abs() < 1e-15);
    }

    #[test]
    fn index_path_matches_solve() {
        let grid = PowerGrid::new(
            5,
            [(0, 1, 2.0), (1, 2, 1.0), (2, 3, 3.0), (3, 4, 1.5), (4, 0, 0.7), (1, 3, 1.1)],
            None,
        )
        .unwrap();
        let s = crate::grid::generate_scenario(&grid, &ScenarioParams::new(3, 100.0, 0.7, 4))
            .unwrap();
        let solver = FlowSolver::new(&s).unwrap();
        let mut scratch = FlowScratch::default();
        for idx in 0..8u64 {
            let a = solver.cost_of_index(idx, &mut scratch);
            let b = solver.solve(&bits_of(idx, 3)).unwrap().cost;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn bit_helpers_round_trip() {
        for idx in [0u64, 1, 5, 0b1011_0110] {
            assert_eq!(index_of(&bits_of(idx, 8)), idx);
        }
        assert_eq!(bits_of(0b110, 3), vec![false, true, true]);
    }
}
