//! Experiment orchestration over qubit counts, load fractions and resource
//! levels.
//!
//! [`run_plan`] writes into one output directory:
//!
//! | file | content |
//! |---|---|
//! | `manifest.json` | plan, seeds, digests and per-cell status |
//! | `records.json`, `records.csv` | one [`BenchRecord`] per (algorithm, cell, s) |
//! | `lines_qaoa.csv`, `lines_sa.csv` | AR per load and `s`, averaged over qubits |
//! | `heatmap_qaoa.csv`, `heatmap_sa.csv` | AR per (qubits, load) cell |
//! | `heatmap_difference.csv` | QAOA minus SA per cell at one resource pair |
//! | `tts_cells.csv`, `tts_qubits.csv`, `tts_fit.csv` | time-to-solution and slopes |
//! | `summary.json` | fitted slopes, comparison notes and failures |
//! | `tables/` | cached cost tables |
//!
//! Everything except `tables/` is rebuilt from `manifest.json` and
//! `records.json` by [`report`].

mod report;

pub use report::{
    fit_tts_slope, report, FailedCell, Outputs, TtsFit, TtsFitRow, TtsQubitRow, SUMMARY_FILE,
};

use crate::cost_table::{build_table_with, CostTable, TableError, DEFAULT_MAX_BITS};
use crate::grid::{
    generate_scenario, parse_cdf, CdfError, LineCostModel, PowerGrid, Scenario, ScenarioError,
    ScenarioParams, IEEE57_CDF,
};
use crate::metrics::approximation_ratio;
use crate::powerflow::{FlowError, GridFactorization};
use crate::qaoa::{self, make_schedule, QaoaError};
use crate::rng::{derive_seed, Purpose};
use crate::sa::{run_sa, SaConfig, SaError, SaRestart};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RECORDS_JSON: &str = "records.json";
pub const RECORDS_CSV: &str = "records.csv";
pub const TABLE_DIR: &str = "tables";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error("cannot read case file {path}: {source}")]
    CaseIo {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("case file does not parse: {0}")]
    Case(#[from] CdfError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("i/o on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed {path}: {message}")]
    Decode { path: PathBuf, message: String },
    #[error("need at least 2 finite TTS points to fit a slope, got {finite}")]
    TooFewPoints { finite: usize },
}

/// Annealing settings shared by every SA run of a plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaSettings {
    pub initial_temperature: f64,
    pub alpha: f64,
    pub k: f64,
    /// `None` means one proposal per qubit per temperature.
    pub inner_iterations_per_step: Option<usize>,
}

impl Default for SaSettings {
    fn default() -> Self {
        let d = SaConfig::default();
        SaSettings {
            initial_temperature: d.initial_temperature,
            alpha: d.alpha,
            k: d.k,
            inner_iterations_per_step: d.inner_iterations_per_step,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    /// CDF case file; `None` uses the bundled IEEE 57-bus case.
    pub case: Option<PathBuf>,
    pub qubits: Vec<usize>,
    /// Size of the seeded generator placement every qubit count truncates.
    pub master_generators: usize,
    pub loads: Vec<f64>,
    pub layers: Vec<usize>,
    pub temperature_steps: Vec<usize>,
    pub seed: u64,
    pub thresholds: Vec<f64>,
    pub num_samples: usize,
    pub total_capacity: f64,
    pub max_bits: usize,
    pub line_costs: LineCostModel,
    pub imbalance_penalty: f64,
    pub sa: SaSettings,
    /// `(layers, temperature_steps)` compared cell by cell. Falls back to the
    /// third-largest value of each sweep when absent from the plan.
    pub difference_pair: Option<(usize, usize)>,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            case: None,
            qubits: (4..=20).collect(),
            master_generators: 20,
            loads: (1..=10).map(|i| i as f64 / 10.0).collect(),
            layers: (0..=10).map(|e| 1 << e).collect(),
            temperature_steps: (1..=8).map(|i| 10 * i).collect(),
            seed: 15,
            thresholds: vec![0.95],
            num_samples: 10,
            total_capacity: 1000.0,
            max_bits: DEFAULT_MAX_BITS,
            line_costs: LineCostModel::Uniform,
            imbalance_penalty: 0.0,
            sa: SaSettings::default(),
            difference_pair: Some((256, 20)),
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Plan(m));
        for (name, empty) in [
            ("qubits", self.qubits.is_empty()),
            ("loads", self.loads.is_empty()),
            ("layers", self.layers.is_empty()),
            ("temperature_steps", self.temperature_steps.is_empty()),
            ("thresholds", self.thresholds.is_empty()),
        ] {
            if empty {
                return bad(format!("{name} must not be empty"));
            }
        }
        if let Some(&q) = self.qubits.iter().find(|&&q| q == 0 || q > self.max_bits) {
            return bad(format!("qubit count {q} outside 1..={}", self.max_bits));
        }
        if let Some(&q) = self.qubits.iter().find(|&&q| q > self.master_generators) {
            return bad(format!(
                "qubit count {q} exceeds master_generators {}",
                self.master_generators
            ));
        }
        if let Some(&f) = self.loads.iter().find(|&&f| !(f > 0.0 && f <= 1.0)) {
            return bad(format!("load fraction {f} outside (0, 1]"));
        }
        if self.layers.contains(&0) || self.temperature_steps.contains(&0) {
            return bad("resource levels must be at least 1".into());
        }
        if let Some(&t) = self.thresholds.iter().find(|&&t| !(0.0..=1.0).contains(&t)) {
            return bad(format!("threshold {t} outside [0, 1]"));
        }
        if self.num_samples == 0 {
            return bad("num_samples must be at least 1".into());
        }
        for (name, v) in [
            ("qubits", has_duplicates(&self.qubits)),
            ("layers", has_duplicates(&self.layers)),
            ("temperature_steps", has_duplicates(&self.temperature_steps)),
            ("loads", {
                let mut keys: Vec<u64> = self.loads.iter().map(|&f| load_key(f)).collect();
                keys.sort_unstable();
                keys.windows(2).any(|w| w[0] == w[1])
            }),
        ] {
            if v {
                return bad(format!("{name} contains duplicates"));
            }
        }
        self.sa_config(0, 1)
            .validate()
            .map_err(|e| BenchError::Plan(e.to_string()))?;
        Ok(())
    }

    fn sa_config(&self, seed: u64, steps: usize) -> SaConfig {
        SaConfig {
            temperature_steps: steps,
            inner_iterations_per_step: self.sa.inner_iterations_per_step,
            initial_temperature: self.sa.initial_temperature,
            alpha: self.sa.alpha,
            k: self.sa.k,
            seed,
            num_samples: self.num_samples,
        }
    }

    /// Parameters of the master scenario at `load`.
    pub fn master_params(&self, load: f64) -> ScenarioParams {
        ScenarioParams {
            line_costs: self.line_costs,
            imbalance_penalty: self.imbalance_penalty,
            ..ScenarioParams::new(self.master_generators, self.total_capacity, load, self.seed)
        }
    }

    /// Instance of one (qubits, load) cell: the master placement cut down to
    /// its first `qubits` generators.
    pub fn cell_scenario(
        &self,
        grid: &PowerGrid,
        qubits: usize,
        load: f64,
    ) -> Result<Scenario, ScenarioError> {
        generate_scenario(grid, &self.master_params(load))?.truncate_generators(qubits)
    }

    /// SA configuration of one record.
    pub fn sa_config_for(&self, qubits: usize, load: f64, steps: usize) -> SaConfig {
        self.sa_config(record_seed(self.seed, Algorithm::Sa, qubits, load, steps), steps)
    }

    /// Layer/temperature pair for the difference heatmap.
    pub fn resolved_difference_pair(&self) -> (usize, usize) {
        match self.difference_pair {
            Some((p, t)) if self.layers.contains(&p) && self.temperature_steps.contains(&t) => {
                (p, t)
            }
            _ => (third_largest(&self.layers), third_largest(&self.temperature_steps)),
        }
    }
}

fn has_duplicates(v: &[usize]) -> bool {
    let mut s = v.to_vec();
    s.sort_unstable();
    s.windows(2).any(|w| w[0] == w[1])
}

fn third_largest(v: &[usize]) -> usize {
    let mut s = v.to_vec();
    s.sort_unstable_by(|a, b| b.cmp(a));
    s[2.min(s.len() - 1)]
}

/// Load fraction in parts per million, used in seeds and file names.
fn load_key(load: f64) -> u64 {
    (load * 1e6).round() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Qaoa,
    Sa,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Qaoa => "qaoa",
            Algorithm::Sa => "sa",
        }
    }

    fn purpose(self) -> Purpose {
        match self {
            Algorithm::Qaoa => Purpose::Measurement,
            Algorithm::Sa => Purpose::Annealing,
        }
    }
}

/// One algorithm at one resource level on one (qubits, load) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub algorithm: Algorithm,
    pub qubits: usize,
    pub load: f64,
    /// Stream seed of the measurement draws or annealing restarts.
    pub seed: u64,
    /// Layers for QAOA, temperature steps for SA.
    pub s: usize,
    /// Normalized cost per sample (QAOA draw or SA restart best).
    pub costs: Vec<f64>,
    pub ars: Vec<f64>,
    /// QAOA only: `1 - E[cost]` under the exact distribution.
    pub expected_ar: Option<f64>,
    /// QAOA only: exact success mass per plan threshold.
    pub exact_success: Option<Vec<f64>>,
}

impl BenchRecord {
    pub fn best_ar(&self) -> f64 {
        self.ars.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean_ar(&self) -> f64 {
        self.ars.iter().sum::<f64>() / self.ars.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", content = "message", rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEntry {
    pub qubits: usize,
    pub load: f64,
    pub scenario_digest: Option<String>,
    pub table_digest: Option<String>,
    /// All commitments cost the same; every AR is 1.
    pub trivial: bool,
    pub status: CellStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedEntry {
    pub algorithm: Algorithm,
    pub qubits: usize,
    pub load: f64,
    pub s: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    /// Seed of generator placement, loads and line costs.
    pub scenario: u64,
    pub streams: Vec<SeedEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub case_digest: String,
    pub plan: ExperimentPlan,
    pub seeds: Seeds,
    pub tool_version: String,
    pub per_cell: Vec<CellEntry>,
}

impl Manifest {
    pub fn failures(&self) -> Vec<&CellEntry> {
        self.per_cell
            .iter()
            .filter(|c| c.status != CellStatus::Ok)
            .collect()
    }
}

/// Seed of the stream used by `algorithm` at resource `s` on a cell.
pub fn record_seed(plan_seed: u64, algorithm: Algorithm, qubits: usize, load: f64, s: usize) -> u64 {
    let index = ((qubits as u64) << 56) ^ (load_key(load) << 32) ^ s as u64;
    derive_seed(plan_seed, algorithm.purpose(), index)
}

pub fn table_path(out_dir: &Path, qubits: usize, load: f64) -> PathBuf {
    out_dir
        .join(TABLE_DIR)
        .join(format!("q{qubits:02}_load{:07}.bin", load_key(load)))
}

/// Write `bytes` to a temporary sibling, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), BenchError> {
    let io = |source| BenchError::Io {
        path: path.to_owned(),
        source,
    };
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

/// Digest and parsed grid of the plan's case file.
pub fn load_case(plan: &ExperimentPlan) -> Result<(String, PowerGrid), BenchError> {
    let text = match &plan.case {
        None => IEEE57_CDF.to_owned(),
        Some(path) => fs::read_to_string(path).map_err(|source| BenchError::CaseIo {
            path: path.clone(),
            source,
        })?,
    };
    let digest = hex::encode(Sha256::digest(text.as_bytes()));
    Ok((digest, parse_cdf(&text)?))
}

/// Load the cached table at `path`, or build and save it.
pub fn cached_table(
    scenario: &Scenario,
    factorization: &GridFactorization,
    path: &Path,
    max_bits: usize,
) -> Result<CostTable, TableError> {
    if path.exists() {
        return CostTable::load_for(path, scenario);
    }
    let table = build_table_with(scenario, factorization, max_bits)?;
    table.save(path)?;
    Ok(table)
}

fn ars_of(costs: &[f64]) -> Result<Vec<f64>, String> {
    costs
        .iter()
        .map(|&c| approximation_ratio(c).map_err(|e| e.to_string()))
        .collect()
}

/// QAOA at `p` layers on one cell: the record and the exact distribution.
pub fn qaoa_record(
    plan: &ExperimentPlan,
    table: &CostTable,
    qubits: usize,
    load: f64,
    p: usize,
) -> Result<(BenchRecord, Vec<f64>), String> {
    let costs = table.normalized();
    let schedule = make_schedule(p).map_err(|e| e.to_string())?;
    let probs = qaoa::run_qaoa(table, &schedule).map_err(|e| e.to_string())?;
    let seed = record_seed(plan.seed, Algorithm::Qaoa, qubits, load, p);
    let draws = qaoa::sample_outcomes(&probs, plan.num_samples, seed)
        .map_err(|e: QaoaError| e.to_string())?;
    let sampled: Vec<f64> = draws.iter().map(|&i| costs[i]).collect();
    let expected = qaoa::expected_cost(&probs, costs);
    let record = BenchRecord {
        algorithm: Algorithm::Qaoa,
        qubits,
        load,
        seed,
        s: p,
        ars: ars_of(&sampled)?,
        costs: sampled,
        expected_ar: Some((1.0 - expected).clamp(0.0, 1.0)),
        exact_success: Some(
            plan.thresholds
                .iter()
                .map(|&t| qaoa::success_probability(&probs, costs, t))
                .collect(),
        ),
    };
    Ok((record, probs))
}

/// SA at `steps` temperatures on one cell: the record and every restart.
pub fn sa_record(
    plan: &ExperimentPlan,
    table: &CostTable,
    qubits: usize,
    load: f64,
    steps: usize,
) -> Result<(BenchRecord, Vec<SaRestart>), String> {
    let config = plan.sa_config_for(qubits, load, steps);
    let runs = run_sa(table, &config).map_err(|e: SaError| e.to_string())?;
    let costs: Vec<f64> = runs.iter().map(|r| r.best_cost).collect();
    let record = BenchRecord {
        algorithm: Algorithm::Sa,
        qubits,
        load,
        seed: config.seed,
        s: steps,
        ars: ars_of(&costs)?,
        costs,
        expected_ar: None,
        exact_success: None,
    };
    Ok((record, runs))
}

struct CellRun {
    entry: CellEntry,
    records: Vec<BenchRecord>,
}

fn run_cell(
    plan: &ExperimentPlan,
    master: &Scenario,
    factorization: &GridFactorization,
    out_dir: &Path,
    qubits: usize,
    load: f64,
) -> CellRun {
    let mut entry = CellEntry {
        qubits,
        load,
        scenario_digest: None,
        table_digest: None,
        trivial: false,
        status: CellStatus::Ok,
    };
    let result = (|| {
        let scenario = master
            .truncate_generators(qubits)
            .map_err(|e| e.to_string())?;
        entry.scenario_digest = Some(scenario.digest());
        let path = table_path(out_dir, qubits, load);
        let table = cached_table(&scenario, factorization, &path, plan.max_bits)
            .map_err(|e| e.to_string())?;
        entry.table_digest = Some(table.digest_hex());
        entry.trivial = table.is_trivial();
        let mut records = Vec::new();
        for &p in &plan.layers {
            records.push(qaoa_record(plan, &table, qubits, load, p)?.0);
        }
        for &steps in &plan.temperature_steps {
            records.push(sa_record(plan, &table, qubits, load, steps)?.0);
        }
        Ok::<_, String>(records)
    })();
    let records = match result {
        Ok(r) => {
            log::info!("cell qubits={qubits} load={load}: ok");
            r
        }
        Err(message) => {
            log::warn!("cell qubits={qubits} load={load}: {message}");
            entry.status = CellStatus::Failed(message);
            Vec::new()
        }
    };
    CellRun { entry, records }
}

/// Run every (qubits, load) cell of `plan` and write all outputs into
/// `out_dir`. Failed cells are recorded in the manifest and skipped.
pub fn run_plan(plan: &ExperimentPlan, out_dir: &Path) -> Result<Manifest, BenchError> {
    plan.validate()?;
    let (case_digest, grid) = load_case(plan)?;
    let factorization = GridFactorization::new(&grid)?;
    let table_dir = out_dir.join(TABLE_DIR);
    fs::create_dir_all(&table_dir).map_err(|source| BenchError::Io {
        path: table_dir,
        source,
    })?;

    let masters = plan
        .loads
        .iter()
        .map(|&load| generate_scenario(&grid, &plan.master_params(load)))
        .collect::<Result<Vec<_>, _>>()?;

    let cells: Vec<(usize, usize)> = plan
        .qubits
        .iter()
        .flat_map(|&q| (0..plan.loads.len()).map(move |l| (q, l)))
        .collect();
    let runs: Vec<CellRun> = cells
        .par_iter()
        .map(|&(q, l)| run_cell(plan, &masters[l], &factorization, out_dir, q, plan.loads[l]))
        .collect();

    let mut streams = Vec::new();
    for &(q, l) in &cells {
        let load = plan.loads[l];
        for (algorithm, levels) in [
            (Algorithm::Qaoa, &plan.layers),
            (Algorithm::Sa, &plan.temperature_steps),
        ] {
            streams.extend(levels.iter().map(|&s| SeedEntry {
                algorithm,
                qubits: q,
                load,
                s,
                seed: record_seed(plan.seed, algorithm, q, load, s),
            }));
        }
    }

    let mut per_cell = Vec::with_capacity(runs.len());
    let mut records = Vec::new();
    for run in runs {
        per_cell.push(run.entry);
        records.extend(run.records);
    }
    let manifest = Manifest {
        case_digest,
        plan: plan.clone(),
        seeds: Seeds {
            scenario: plan.seed,
            streams,
        },
        tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        per_cell,
    };

    write_json(&out_dir.join(RECORDS_JSON), &records)?;
    report::write_records_csv(&out_dir.join(RECORDS_CSV), &records)?;
    report::write_derived(out_dir, &manifest, &records)?;
    write_json(&out_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

pub(crate) fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), BenchError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| BenchError::Decode {
        path: path.to_owned(),
        message: e.to_string(),
    })?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, BenchError> {
    let bytes = fs::read(path).map_err(|source| BenchError::Io {
        path: path.to_owned(),
        source,
    })?;
    serde_json::from_slice(&bytes).map_err(|e| BenchError::Decode {
        path: path.to_owned(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_plan_matches_sweep_ranges() {
        let p = ExperimentPlan::default();
        assert_eq!(p.qubits.len(), 17);
        assert_eq!(p.loads.len(), 10);
        assert_eq!(p.loads[2], 0.3);
        assert_eq!(p.layers.first(), Some(&1));
        assert_eq!(p.layers.last(), Some(&1024));
        assert_eq!(p.temperature_steps, vec![10, 20, 30, 40, 50, 60, 70, 80]);
        assert!(p.validate().is_ok());
        assert_eq!(p.resolved_difference_pair(), (256, 20));
    }

    #[test]
    fn difference_pair_falls_back_to_third_largest() {
        let p = ExperimentPlan {
            layers: vec![1, 2, 4, 8],
            temperature_steps: vec![10],
            ..ExperimentPlan::default()
        };
        assert_eq!(p.resolved_difference_pair(), (2, 10));
    }

    #[test]
    fn invalid_plans_are_rejected() {
        let ok = ExperimentPlan::default();
        for bad in [
            ExperimentPlan {
                qubits: vec![],
                ..ok.clone()
            },
            ExperimentPlan {
                qubits: vec![25],
                ..ok.clone()
            },
            ExperimentPlan {
                loads: vec![0.0],
                ..ok.clone()
            },
            ExperimentPlan {
                layers: vec![0],
                ..ok.clone()
            },
            ExperimentPlan {
                thresholds: vec![1.5],
                ..ok.clone()
            },
            ExperimentPlan {
                qubits: vec![4, 21],
                max_bits: 24,
                ..ok.clone()
            },
            ExperimentPlan {
                qubits: vec![4, 4],
                ..ok.clone()
            },
            ExperimentPlan {
                sa: SaSettings {
                    alpha: 1.0,
                    ..SaSettings::default()
                },
                ..ok.clone()
            },
        ] {
            assert!(matches!(bad.validate(), Err(BenchError::Plan(_))), "{bad:?}");
        }
    }

    #[test]
    fn record_seeds_are_distinct_per_stream() {
        let a = record_seed(15, Algorithm::Qaoa, 4, 0.5, 1);
        assert_ne!(a, record_seed(15, Algorithm::Sa, 4, 0.5, 1));
        assert_ne!(a, record_seed(15, Algorithm::Qaoa, 5, 0.5, 1));
        assert_ne!(a, record_seed(15, Algorithm::Qaoa, 4, 0.6, 1));
        assert_ne!(a, record_seed(15, Algorithm::Qaoa, 4, 0.5, 2));
        assert_eq!(a, record_seed(15, Algorithm::Qaoa, 4, 0.5, 1));
    }
}
