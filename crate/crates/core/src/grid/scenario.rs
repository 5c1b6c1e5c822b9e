use super::{GridDocument, GridError, LineDocument, PowerGrid};
use crate::rng::{self, Purpose};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("number of generators {requested} outside 1..={max} (the reference bus cannot host a generator)")]
    GeneratorCount { requested: usize, max: usize },
    #[error("load fraction {0} outside (0, 1]")]
    LoadFraction(f64),
    #[error("total capacity {0} must be positive and finite")]
    Capacity(f64),
    #[error("line cost range [{low}, {high}] is invalid")]
    CostRange { low: f64, high: f64 },
    #[error("imbalance penalty {0} must be non-negative and finite")]
    Penalty(f64),
    #[error("inconsistent scenario document: {0}")]
    Document(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// How per-line cost factors are assigned.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LineCostModel {
    /// Every line costs 1.0 per MW.
    #[default]
    Uniform,
    /// Seeded uniform draw in `[low, high]` per line.
    Sampled { low: f64, high: f64 },
}

impl LineCostModel {
    /// The `[0.5, 1.5]` sampling range.
    pub const SAMPLED: LineCostModel = LineCostModel::Sampled {
        low: 0.5,
        high: 1.5,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub num_generators: usize,
    pub total_capacity: f64,
    pub load_fraction: f64,
    pub seed: u64,
    #[serde(default)]
    pub line_costs: LineCostModel,
    /// Weight of the optional `(sum_i p_i)^2` imbalance penalty.
    #[serde(default)]
    pub imbalance_penalty: f64,
}

impl ScenarioParams {
    pub fn new(num_generators: usize, total_capacity: f64, load_fraction: f64, seed: u64) -> Self {
        ScenarioParams {
            num_generators,
            total_capacity,
            load_fraction,
            seed,
            line_costs: LineCostModel::Uniform,
            imbalance_penalty: 0.0,
        }
    }
}

/// A concrete unit-commitment instance.
///
/// `injections` holds the nominal per-bus power in MW: `+capacity_per_generator`
/// at generator buses, minus the bus load elsewhere. Bit `k` of a commitment
/// bitstring switches `generators[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ScenarioDocument", try_from = "ScenarioDocument")]
pub struct Scenario {
    grid: PowerGrid,
    generators: Vec<usize>,
    injections: Vec<f64>,
    line_costs: Vec<f64>,
    total_capacity: f64,
    capacity_per_generator: f64,
    load_fraction: f64,
    seed: u64,
    imbalance_penalty: f64,
}

impl Scenario {
    pub fn grid(&self) -> &PowerGrid {
        &self.grid
    }

    /// Generator bus indices in bit order.
    pub fn generators(&self) -> &[usize] {
        &self.generators
    }

    pub fn num_generators(&self) -> usize {
        self.generators.len()
    }

    pub fn nominal_injections(&self) -> &[f64] {
        &self.injections
    }

    pub fn line_costs(&self) -> &[f64] {
        &self.line_costs
    }

    pub fn total_capacity(&self) -> f64 {
        self.total_capacity
    }

    pub fn capacity_per_generator(&self) -> f64 {
        self.capacity_per_generator
    }

    pub fn load_fraction(&self) -> f64 {
        self.load_fraction
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn imbalance_penalty(&self) -> f64 {
        self.imbalance_penalty
    }

    pub fn is_generator(&self, bus: usize) -> bool {
        self.generators.contains(&bus)
    }

    /// Load buses: every bus that is not a generator.
    pub fn load_buses(&self) -> Vec<usize> {
        (0..self.grid.num_buses())
            .filter(|b| !self.is_generator(*b))
            .collect()
    }

    /// Total consumption in MW over the load buses.
    pub fn total_load(&self) -> f64 {
        self.load_buses().iter().map(|&b| -self.injections[b]).sum()
    }

    /// Injection vector `p_x` for the commitment `x` (one flag per generator).
    pub fn injections_for(&self, x: &[bool]) -> Vec<f64> {
        let mut p = self.injections.clone();
        for (&bus, &on) in self.generators.iter().zip(x) {
            if !on {
                p[bus] = 0.0;
            }
        }
        p
    }

    /// Keep only the first `k` generators. The dropped generator buses become
    /// zero-load buses and the capacity is re-split over the remaining ones.
    pub fn truncate_generators(&self, k: usize) -> Result<Scenario, ScenarioError> {
        if k == 0 || k > self.generators.len() {
            return Err(ScenarioError::GeneratorCount {
                requested: k,
                max: self.generators.len(),
            });
        }
        let mut out = self.clone();
        out.generators.truncate(k);
        out.capacity_per_generator = self.total_capacity / k as f64;
        for &bus in &self.generators[k..] {
            out.injections[bus] = 0.0;
        }
        for &bus in &out.generators {
            out.injections[bus] = out.capacity_per_generator;
        }
        Ok(out)
    }

    /// Hex SHA-256 of the canonical JSON document.
    pub fn digest(&self) -> String {
        let doc = ScenarioDocument::from(self);
        let bytes = serde_json::to_vec(&doc).expect("scenario document serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// Draw a scenario: generator placement, raw loads and line costs each come
/// from their own seeded stream, so changing `load_fraction` rescales the same
/// loads on the same placement.
pub fn generate_scenario(
    grid: &PowerGrid,
    params: &ScenarioParams,
) -> Result<Scenario, ScenarioError> {
    let n = grid.num_buses();
    let m = params.num_generators;
    if m == 0 || m > n - 1 {
        return Err(ScenarioError::GeneratorCount {
            requested: m,
            max: n - 1,
        });
    }
    let f = params.load_fraction;
    if !(f > 0.0 && f <= 1.0) {
        return Err(ScenarioError::LoadFraction(f));
    }
    let cap = params.total_capacity;
    if !(cap > 0.0 && cap.is_finite()) {
        return Err(ScenarioError::Capacity(cap));
    }
    let penalty = params.imbalance_penalty;
    if !(penalty >= 0.0 && penalty.is_finite()) {
        return Err(ScenarioError::Penalty(penalty));
    }

    // Partial Fisher-Yates over the non-reference buses.
    let mut candidates: Vec<usize> = (0..n).filter(|&b| b != grid.reference()).collect();
    let mut rng = rng::stream(params.seed, Purpose::NodeAssignment, 0);
    for i in 0..m {
        let j = rng.random_range(i..candidates.len());
        candidates.swap(i, j);
    }
    let generators = candidates[..m].to_vec();
    let capacity_per_generator = cap / m as f64;

    let mut injections = vec![0.0; n];
    for &g in &generators {
        injections[g] = capacity_per_generator;
    }
    let mut rng = rng::stream(params.seed, Purpose::LoadSampling, 0);
    let load_buses: Vec<usize> = (0..n).filter(|b| !generators.contains(b)).collect();
    // 1 - U[0,1) lies in (0, 1]
    let raw: Vec<f64> = load_buses
        .iter()
        .map(|_| 1.0 - rng.random::<f64>())
        .collect();
    let scale = f * cap / raw.iter().sum::<f64>();
    for (&bus, r) in load_buses.iter().zip(&raw) {
        injections[bus] = -r * scale;
    }

    let line_costs = match params.line_costs {
        LineCostModel::Uniform => vec![1.0; grid.lines().len()],
        LineCostModel::Sampled { low, high } => {
            if !(low.is_finite() && high.is_finite() && low <= high) {
                return Err(ScenarioError::CostRange { low, high });
            }
            let mut rng = rng::stream(params.seed, Purpose::CostSampling, 0);
            grid.lines()
                .iter()
                .map(|_| low + (high - low) * rng.random::<f64>())
                .collect()
        }
    };

    Ok(Scenario {
        grid: grid.clone(),
        generators,
        injections,
        line_costs,
        total_capacity: cap,
        capacity_per_generator,
        load_fraction: f,
        seed: params.seed,
        imbalance_penalty: penalty,
    })
}

/// Canonical JSON form of a [`Scenario`]. Bus ids are one-based; generator
/// order is bit order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDocument {
    pub buses: Vec<usize>,
    pub lines: Vec<LineDocument>,
    pub reference_bus: usize,
    pub generators: Vec<usize>,
    pub injections: Vec<f64>,
    pub line_costs: Vec<f64>,
    pub total_capacity: f64,
    pub load_fraction: f64,
    pub seed: u64,
    #[serde(default)]
    pub imbalance_penalty: f64,
}

impl From<&Scenario> for ScenarioDocument {
    fn from(s: &Scenario) -> Self {
        let grid = GridDocument::from(&s.grid);
        ScenarioDocument {
            buses: grid.buses,
            lines: grid.lines,
            reference_bus: grid.reference_bus,
            generators: s.generators.iter().map(|g| g + 1).collect(),
            injections: s.injections.clone(),
            line_costs: s.line_costs.clone(),
            total_capacity: s.total_capacity,
            load_fraction: s.load_fraction,
            seed: s.seed,
            imbalance_penalty: s.imbalance_penalty,
        }
    }
}

impl From<Scenario> for ScenarioDocument {
    fn from(s: Scenario) -> Self {
        ScenarioDocument::from(&s)
    }
}

impl TryFrom<ScenarioDocument> for Scenario {
    type Error = ScenarioError;

    fn try_from(doc: ScenarioDocument) -> Result<Self, ScenarioError> {
        let bad = |msg: &str| ScenarioError::Document(msg.to_string());
        let grid = PowerGrid::try_from(GridDocument {
            buses: doc.buses,
            lines: doc.lines,
            reference_bus: doc.reference_bus,
        })?;
        let n = grid.num_buses();
        if doc.injections.len() != n {
            return Err(bad("injections length differs from bus count"));
        }
        if doc.line_costs.len() != grid.lines().len() {
            return Err(bad("line_costs length differs from line count"));
        }
        let mut generators = Vec::with_capacity(doc.generators.len());
        for &g in &doc.generators {
            if g == 0 || g > n || generators.contains(&(g - 1)) {
                return Err(bad("generator ids must be distinct bus ids"));
            }
            generators.push(g - 1);
        }
        if generators.is_empty() {
            return Err(bad("no generators"));
        }
        let capacity_per_generator = doc.total_capacity / generators.len() as f64;
        if generators
            .iter()
            .any(|&g| doc.injections[g] != capacity_per_generator)
        {
            return Err(bad("generator injections must equal total_capacity / |G|"));
        }
        if (0..n).any(|b| !generators.contains(&b) && doc.injections[b] > 0.0) {
            return Err(bad("load injections must be non-positive"));
        }
        Ok(Scenario {
            grid,
            generators,
            injections: doc.injections,
            line_costs: doc.line_costs,
            total_capacity: doc.total_capacity,
            capacity_per_generator,
            load_fraction: doc.load_fraction,
            seed: doc.seed,
            imbalance_penalty: doc.imbalance_penalty,
        })
    }
}
