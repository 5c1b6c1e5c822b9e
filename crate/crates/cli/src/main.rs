//! `quso-bench`: run the QAOA vs simulated annealing benchmark from the shell.
//!
//! Every subcommand prints one JSON document on stdout. Failures print a JSON
//! object with `"status": "error"` on stderr and exit with code 2; a bench run
//! whose cells partly failed exits with code 1.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use quso_core::bench::{
    self, cached_table, load_case, qaoa_record, report, run_plan, sa_record, table_path,
    write_atomic, ExperimentPlan,
};
use quso_core::grid::{CdfCase, LineCostModel, IEEE57_CDF};
use serde::Serialize;
use serde_json::json;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "quso-bench", version, about)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a CDF case file and print its size.
    Parse {
        /// Case file; the bundled IEEE 57-bus case when omitted.
        #[arg(long)]
        case: Option<PathBuf>,
        /// Also write the DC grid as JSON.
        #[arg(long)]
        grid_out: Option<PathBuf>,
    },
    /// Build and cache cost tables for a sweep of cells.
    Precompute {
        #[command(flatten)]
        setup: SetupArgs,
        #[command(flatten)]
        sweep: SweepArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run QAOA on one cell.
    Qaoa {
        #[command(flatten)]
        setup: SetupArgs,
        #[command(flatten)]
        cell: CellArgs,
        #[arg(long)]
        layers: usize,
        /// Write the exact outcome distribution here.
        #[arg(long)]
        dump: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = DumpFormat::Csv)]
        dump_format: DumpFormat,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run simulated annealing on one cell.
    Sa {
        #[command(flatten)]
        setup: SetupArgs,
        #[command(flatten)]
        cell: CellArgs,
        #[arg(long)]
        steps: usize,
        /// Write the per-temperature trace of every restart as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run a full experiment plan.
    Bench {
        #[command(flatten)]
        setup: SetupArgs,
        #[command(flatten)]
        sweep: SweepArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Recompute every derived output from a finished run's records.
    Report {
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Args)]
struct OutArgs {
    /// Output directory (also holds the cost-table cache).
    #[arg(long, env = "QUSO_OUT_DIR", default_value = "quso-out")]
    out: PathBuf,
}

/// Settings shared by every command that builds scenarios. Unset flags keep
/// the value from `--plan`, or the default plan.
#[derive(Args)]
struct SetupArgs {
    /// JSON experiment plan to start from.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// IEEE common-format case file (default: bundled 57-bus case).
    #[arg(long)]
    case: Option<PathBuf>,
    /// Master seed for scenarios and sampling.
    #[arg(long)]
    seed: Option<u64>,
    /// Generators placed before truncating to each qubit count.
    #[arg(long)]
    master_generators: Option<usize>,
    /// Total generating capacity in MW.
    #[arg(long)]
    capacity: Option<f64>,
    #[arg(long, value_enum)]
    line_costs: Option<LineCosts>,
    /// Weight of the quadratic imbalance penalty.
    #[arg(long)]
    penalty: Option<f64>,
    /// Largest qubit count accepted.
    #[arg(long)]
    max_bits: Option<usize>,
    /// Samples per QAOA run and restarts per SA run.
    #[arg(long)]
    samples: Option<usize>,
    /// AR thresholds, comma separated.
    #[arg(long)]
    thresholds: Option<String>,
    /// Initial SA temperature.
    #[arg(long)]
    sa_t0: Option<f64>,
    /// Geometric cooling factor.
    #[arg(long)]
    sa_alpha: Option<f64>,
    /// Boltzmann constant in the acceptance rule.
    #[arg(long)]
    sa_k: Option<f64>,
    /// SA proposals per temperature (default: one per qubit).
    #[arg(long)]
    sa_inner: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    /// Qubit counts, e.g. `4-20` or `4,8,12`.
    #[arg(long)]
    qubits: Option<String>,
    /// Load fractions, e.g. `0.1,0.5,1.0`.
    #[arg(long)]
    loads: Option<String>,
    /// QAOA layer counts.
    #[arg(long)]
    layers: Option<String>,
    /// SA temperature-step counts.
    #[arg(long)]
    temps: Option<String>,
    /// Layers and temperature steps compared in the difference heatmap, `P,T`.
    #[arg(long)]
    difference_pair: Option<String>,
}

#[derive(Args)]
struct CellArgs {
    #[arg(long)]
    qubits: usize,
    #[arg(long)]
    load: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum LineCosts {
    Uniform,
    Sampled,
}

#[derive(Clone, Copy, ValueEnum)]
enum DumpFormat {
    Json,
    Csv,
}

/// `4-8,12` -> `[4, 5, 6, 7, 8, 12]`.
fn parse_usize_list(text: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (usize, usize) = (a.trim().parse()?, b.trim().parse()?);
                if a > b {
                    bail!("empty range {part}");
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().with_context(|| format!("bad integer {part:?}"))?),
        }
    }
    Ok(out)
}

fn parse_f64_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse().with_context(|| format!("bad number {p:?}")))
        .collect()
}

impl SetupArgs {
    fn plan(&self) -> Result<ExperimentPlan> {
        let mut plan = match &self.plan {
            Some(path) => serde_json::from_slice(
                &fs::read(path).with_context(|| format!("reading {}", path.display()))?,
            )
            .with_context(|| format!("parsing plan {}", path.display()))?,
            None => ExperimentPlan::default(),
        };
        if let Some(c) = &self.case {
            plan.case = Some(c.clone());
        }
        macro_rules! set {
            ($($field:ident = $value:expr),* $(,)?) => {
                $(if let Some(v) = $value { plan.$field = v; })*
            };
        }
        set!(
            seed = self.seed,
            master_generators = self.master_generators,
            total_capacity = self.capacity,
            imbalance_penalty = self.penalty,
            max_bits = self.max_bits,
            num_samples = self.samples,
        );
        if let Some(lc) = self.line_costs {
            plan.line_costs = match lc {
                LineCosts::Uniform => LineCostModel::Uniform,
                LineCosts::Sampled => LineCostModel::SAMPLED,
            };
        }
        if let Some(t) = &self.thresholds {
            plan.thresholds = parse_f64_list(t)?;
        }
        if let Some(v) = self.sa_t0 {
            plan.sa.initial_temperature = v;
        }
        if let Some(v) = self.sa_alpha {
            plan.sa.alpha = v;
        }
        if let Some(v) = self.sa_k {
            plan.sa.k = v;
        }
        if self.sa_inner.is_some() {
            plan.sa.inner_iterations_per_step = self.sa_inner;
        }
        Ok(plan)
    }
}

impl SweepArgs {
    fn apply(&self, plan: &mut ExperimentPlan) -> Result<()> {
        if let Some(q) = &self.qubits {
            plan.qubits = parse_usize_list(q)?;
        }
        if let Some(l) = &self.loads {
            plan.loads = parse_f64_list(l)?;
        }
        if let Some(l) = &self.layers {
            plan.layers = parse_usize_list(l)?;
        }
        if let Some(t) = &self.temps {
            plan.temperature_steps = parse_usize_list(t)?;
        }
        if let Some(d) = &self.difference_pair {
            match parse_usize_list(d)?.as_slice() {
                &[p, t] => plan.difference_pair = Some((p, t)),
                _ => bail!("--difference-pair expects two integers P,T"),
            }
        }
        Ok(())
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn cmd_parse(case: Option<PathBuf>, grid_out: Option<PathBuf>) -> Result<()> {
    let text = match &case {
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => IEEE57_CDF.to_owned(),
    };
    let parsed = CdfCase::parse(&text)?;
    if let Some(path) = grid_out {
        let mut bytes = serde_json::to_vec_pretty(&parsed.grid)?;
        bytes.push(b'\n');
        write_atomic(&path, &bytes)?;
    }
    print_json(&json!({
        "title": parsed.title,
        "buses": parsed.grid.num_buses(),
        "branch_records": parsed.branch_records,
        "lines": parsed.grid.lines().len(),
        "generators": parsed.generator_count(),
        "loads": parsed.load_count(),
        "reference_bus": parsed.grid.reference() + 1,
    }))
}

fn cmd_precompute(plan: &ExperimentPlan, out: &Path) -> Result<()> {
    plan.validate()?;
    let (_, grid) = load_case(plan)?;
    let factorization = quso_core::powerflow::GridFactorization::new(&grid)?;
    fs::create_dir_all(out.join(bench::TABLE_DIR))?;
    let mut rows = Vec::new();
    for &q in &plan.qubits {
        for &load in &plan.loads {
            let scenario = plan.cell_scenario(&grid, q, load)?;
            let path = table_path(out, q, load);
            let table = cached_table(&scenario, &factorization, &path, plan.max_bits)?;
            rows.push(json!({
                "qubits": q,
                "load": load,
                "path": path,
                "table_digest": table.digest_hex(),
                "trivial": table.is_trivial(),
                "min_index": table.min_index(),
                "max_index": table.max_index(),
            }));
        }
    }
    print_json(&rows)
}

fn cell_table(
    plan: &ExperimentPlan,
    cell: &CellArgs,
    out: &Path,
) -> Result<quso_core::cost_table::CostTable> {
    let (_, grid) = load_case(plan)?;
    let scenario = plan.cell_scenario(&grid, cell.qubits, cell.load)?;
    let factorization = quso_core::powerflow::GridFactorization::new(&grid)?;
    fs::create_dir_all(out.join(bench::TABLE_DIR))?;
    let path = table_path(out, cell.qubits, cell.load);
    Ok(cached_table(&scenario, &factorization, &path, plan.max_bits)?)
}

/// Index in binary with generator 0 as the rightmost character.
fn bitstring(index: usize, width: usize) -> String {
    format!("{index:0width$b}")
}

#[derive(Serialize)]
struct DistRow {
    index: usize,
    bitstring: String,
    probability: f64,
    normalized_cost: f64,
}

fn cmd_qaoa(
    plan: &ExperimentPlan,
    cell: &CellArgs,
    layers: usize,
    dump: Option<(PathBuf, DumpFormat)>,
    out: &Path,
) -> Result<()> {
    plan.validate()?;
    let table = cell_table(plan, cell, out)?;
    let (record, probs) =
        qaoa_record(plan, &table, cell.qubits, cell.load, layers).map_err(anyhow::Error::msg)?;
    if let Some((path, format)) = dump {
        let rows: Vec<DistRow> = probs
            .iter()
            .zip(table.normalized())
            .enumerate()
            .map(|(i, (&p, &c))| DistRow {
                index: i,
                bitstring: bitstring(i, cell.qubits),
                probability: p,
                normalized_cost: c,
            })
            .collect();
        let bytes = match format {
            DumpFormat::Json => serde_json::to_vec_pretty(&rows)?,
            DumpFormat::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                for r in &rows {
                    w.serialize(r)?;
                }
                w.into_inner()?
            }
        };
        write_atomic(&path, &bytes)?;
    }
    let most_likely = probs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    print_json(&json!({
        "record": record,
        "optimum_index": table.min_index(),
        "optimum_probability": probs[table.min_index()],
        "most_likely_index": most_likely,
        "table_digest": table.digest_hex(),
    }))
}

fn cmd_sa(
    plan: &ExperimentPlan,
    cell: &CellArgs,
    steps: usize,
    trace: Option<PathBuf>,
    out: &Path,
) -> Result<()> {
    plan.validate()?;
    let table = cell_table(plan, cell, out)?;
    let (record, runs) =
        sa_record(plan, &table, cell.qubits, cell.load, steps).map_err(anyhow::Error::msg)?;
    if let Some(path) = trace {
        let mut w = csv::Writer::from_writer(Vec::new());
        for step in runs.iter().flat_map(|r| &r.trace) {
            w.serialize(step)?;
        }
        write_atomic(&path, &w.into_inner()?)?;
    }
    let found = runs.iter().filter(|r| r.best_index == table.min_index()).count();
    print_json(&json!({
        "record": record,
        "best_indices": runs.iter().map(|r| r.best_index).collect::<Vec<_>>(),
        "optimum_index": table.min_index(),
        "restarts_at_optimum": found,
        "config": plan.sa_config_for(cell.qubits, cell.load, steps),
        "table_digest": table.digest_hex(),
    }))
}

/// Exit code 1 when some cells failed.
fn cmd_bench(plan: &ExperimentPlan, out: &Path) -> Result<u8> {
    let manifest = run_plan(plan, out)?;
    let summary = report(out)?;
    print_json(&summary)?;
    let failures = manifest.failures();
    if failures.is_empty() {
        return Ok(0);
    }
    eprintln!(
        "{}",
        json!({
            "status": "partial",
            "failed_cells": failures,
            "out": out,
        })
    );
    Ok(1)
}

fn run(cli: Cli) -> Result<u8> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    match cli.command {
        Command::Parse { case, grid_out } => cmd_parse(case, grid_out)?,
        Command::Precompute { setup, sweep, out } => {
            let mut plan = setup.plan()?;
            sweep.apply(&mut plan)?;
            cmd_precompute(&plan, &out.out)?;
        }
        Command::Qaoa {
            setup,
            cell,
            layers,
            dump,
            dump_format,
            out,
        } => cmd_qaoa(
            &setup.plan()?,
            &cell,
            layers,
            dump.map(|p| (p, dump_format)),
            &out.out,
        )?,
        Command::Sa {
            setup,
            cell,
            steps,
            trace,
            out,
        } => cmd_sa(&setup.plan()?, &cell, steps, trace, &out.out)?,
        Command::Bench { setup, sweep, out } => {
            let mut plan = setup.plan()?;
            sweep.apply(&mut plan)?;
            return cmd_bench(&plan, &out.out);
        }
        Command::Report { out } => print_json(&report(&out.out)?)?,
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!(
                "{}",
                json!({
                    "status": "error",
                    "error": format!("{e:#}"),
                })
            );
            ExitCode::from(2)
        }
    }
}
