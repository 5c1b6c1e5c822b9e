//! Transmission grids and unit-commitment scenarios.
//!
//! Buses are addressed by zero-based index internally. Serialized documents
//! use one-based bus ids `1..=N`, the convention of the case files.

mod cdf;
mod scenario;

pub use cdf::{parse_cdf, BusKind, CdfBus, CdfCase, CdfError};
pub use scenario::{
    generate_scenario, LineCostModel, Scenario, ScenarioDocument, ScenarioError, ScenarioParams,
};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, VecDeque};
use thiserror::Error;

/// The IEEE 57-bus test case in Common Data Format.
pub const IEEE57_CDF: &str = include_str!("../../data/ieee57.cdf");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("a grid needs at least two buses, got {0}")]
    TooFewBuses(usize),
    #[error("line endpoint {bus} is outside 1..={num_buses}")]
    BusOutOfRange { bus: usize, num_buses: usize },
    #[error("self-loop at bus {0}")]
    SelfLoop(usize),
    #[error("line {from}-{to} has non-positive or non-finite susceptance {value}")]
    InvalidSusceptance { from: usize, to: usize, value: f64 },
    #[error("reference bus {bus} is outside 1..={num_buses}")]
    ReferenceOutOfRange { bus: usize, num_buses: usize },
    #[error("grid is disconnected: {unreachable} bus(es) unreachable from bus 1")]
    Disconnected { unreachable: usize },
}

/// An undirected transmission line, oriented `from < to`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    pub susceptance: f64,
}

/// A connected transmission network weighted by line susceptances.
///
/// Invariants: no self-loops, strictly positive susceptances, at most one line
/// per unordered bus pair (lines sorted by `(from, to)`), and a reference bus
/// inside the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "GridDocument", try_from = "GridDocument")]
pub struct PowerGrid {
    num_buses: usize,
    lines: Vec<Line>,
    reference: usize,
}

impl PowerGrid {
    /// Build a grid from zero-based `(i, j, susceptance)` triples. Parallel
    /// lines are merged by summing susceptances. The reference bus defaults to
    /// the last bus.
    pub fn new<I>(num_buses: usize, lines: I, reference: Option<usize>) -> Result<Self, GridError>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        if num_buses < 2 {
            return Err(GridError::TooFewBuses(num_buses));
        }
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (i, j, b) in lines {
            for bus in [i, j] {
                if bus >= num_buses {
                    return Err(GridError::BusOutOfRange {
                        bus: bus + 1,
                        num_buses,
                    });
                }
            }
            if i == j {
                return Err(GridError::SelfLoop(i + 1));
            }
            if !(b > 0.0 && b.is_finite()) {
                return Err(GridError::InvalidSusceptance {
                    from: i.min(j) + 1,
                    to: i.max(j) + 1,
                    value: b,
                });
            }
            *merged.entry((i.min(j), i.max(j))).or_insert(0.0) += b;
        }
        let reference = reference.unwrap_or(num_buses - 1);
        if reference >= num_buses {
            return Err(GridError::ReferenceOutOfRange {
                bus: reference + 1,
                num_buses,
            });
        }
        let grid = PowerGrid {
            num_buses,
            lines: merged
                .into_iter()
                .map(|((from, to), susceptance)| Line {
                    from,
                    to,
                    susceptance,
                })
                .collect(),
            reference,
        };
        let unreachable = grid.unreachable_count();
        if unreachable > 0 {
            return Err(GridError::Disconnected { unreachable });
        }
        Ok(grid)
    }

    pub fn num_buses(&self) -> usize {
        self.num_buses
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    /// Zero-based index of the reference (slack) bus.
    pub fn reference(&self) -> usize {
        self.reference
    }

    pub fn with_reference(mut self, reference: usize) -> Result<Self, GridError> {
        if reference >= self.num_buses {
            return Err(GridError::ReferenceOutOfRange {
                bus: reference + 1,
                num_buses: self.num_buses,
            });
        }
        self.reference = reference;
        Ok(self)
    }

    /// Number of lines incident to each bus.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_buses];
        for l in &self.lines {
            deg[l.from] += 1;
            deg[l.to] += 1;
        }
        deg
    }

    /// Per-bus list of `(neighbour, line index)`.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.num_buses];
        for (k, l) in self.lines.iter().enumerate() {
            adj[l.from].push((l.to, k));
            adj[l.to].push((l.from, k));
        }
        adj
    }

    fn unreachable_count(&self) -> usize {
        let adj = self.adjacency();
        let mut seen = vec![false; self.num_buses];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    reached += 1;
                    queue.push_back(v);
                }
            }
        }
        self.num_buses - reached
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineDocument {
    pub i: usize,
    pub j: usize,
    pub b: f64,
}

/// Canonical JSON form of a [`PowerGrid`] with one-based bus ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDocument {
    pub buses: Vec<usize>,
    pub lines: Vec<LineDocument>,
    pub reference_bus: usize,
}

impl From<PowerGrid> for GridDocument {
    fn from(g: PowerGrid) -> Self {
        GridDocument::from(&g)
    }
}

impl From<&PowerGrid> for GridDocument {
    fn from(g: &PowerGrid) -> Self {
        GridDocument {
            buses: (1..=g.num_buses).collect(),
            lines: g
                .lines
                .iter()
                .map(|l| LineDocument {
                    i: l.from + 1,
                    j: l.to + 1,
                    b: l.susceptance,
                })
                .collect(),
            reference_bus: g.reference + 1,
        }
    }
}

impl TryFrom<GridDocument> for PowerGrid {
    type Error = GridError;

    fn try_from(doc: GridDocument) -> Result<Self, GridError> {
        let n = doc.buses.len();
        let to_index = |bus: usize| {
            if bus == 0 || bus > n {
                Err(GridError::BusOutOfRange { bus, num_buses: n })
            } else {
                Ok(bus - 1)
            }
        };
        let lines = doc
            .lines
            .iter()
            .map(|l| Ok((to_index(l.i)?, to_index(l.j)?, l.b)))
            .collect::<Result<Vec<_>, GridError>>()?;
        let reference = if doc.reference_bus == 0 || doc.reference_bus > n {
            return Err(GridError::ReferenceOutOfRange {
                bus: doc.reference_bus,
                num_buses: n,
            });
        } else {
            doc.reference_bus - 1
        };
        PowerGrid::new(n, lines, Some(reference))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_lines_merge() {
        let g = PowerGrid::new(2, [(0, 1, 1.5), (1, 0, 0.5)], None).unwrap();
        assert_eq!(g.lines().len(), 1);
        assert_eq!(g.lines()[0].susceptance, 2.0);
        assert_eq!(g.reference(), 1);
    }

    #[test]
    fn rejects_bad_topologies() {
        assert_eq!(
            PowerGrid::new(3, [(0, 1, 1.0)], None),
            Err(GridError::Disconnected { unreachable: 1 })
        );
        assert_eq!(
            PowerGrid::new(2, [(1, 1, 1.0)], None),
            Err(GridError::SelfLoop(2))
        );
        assert!(matches!(
            PowerGrid::new(2, [(0, 1, 0.0)], None),
            Err(GridError::InvalidSusceptance { .. })
        ));
        assert!(matches!(
            PowerGrid::new(2, [(0, 1, 1.0)], Some(2)),
            Err(GridError::ReferenceOutOfRange { bus: 3, .. })
        ));
    }

    #[test]
    fn degrees_and_adjacency_agree() {
        let g = PowerGrid::new(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)], None).unwrap();
        assert_eq!(g.degrees(), vec![2, 2, 2]);
        let adj = g.adjacency();
        assert_eq!(adj[1].len(), 2);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let g = PowerGrid::new(
            4,
            [(0, 1, 1.0 / 3.0), (1, 2, 0.1 + 0.2), (2, 3, 7.0), (3, 0, 1e-7)],
            Some(1),
        )
        .unwrap();
        let text = serde_json::to_string(&g).unwrap();
        let back: PowerGrid = serde_json::from_str(&text).unwrap();
        assert_eq!(back, g);
    }
}
