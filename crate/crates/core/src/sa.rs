//! Simulated annealing over commitment bitstrings.
//!
//! Each restart starts from a uniform random bitstring. At every temperature
//! it proposes `inner_iterations_per_step` single-bit flips, accepts
//! improvements outright and worsenings with probability
//! `exp(-|C(x) - C(x')| / (k T))`, then cools `T <- alpha T`. The best
//! bitstring ever visited is returned. Costs are the table's normalized costs.

use crate::cost_table::CostTable;
use crate::rng::{self, Purpose, StreamRng};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SaError {
    #[error("invalid annealing config: {0}")]
    Config(&'static str),
    #[error("cost table has no decision bits")]
    EmptyTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaConfig {
    pub temperature_steps: usize,
    /// Proposals per temperature; `None` means one per bit.
    pub inner_iterations_per_step: Option<usize>,
    pub initial_temperature: f64,
    pub alpha: f64,
    pub k: f64,
    pub seed: u64,
    pub num_samples: usize,
}

impl Default for SaConfig {
    fn default() -> Self {
        SaConfig {
            temperature_steps: 80,
            inner_iterations_per_step: None,
            initial_temperature: 1.0,
            alpha: 0.95,
            k: 1.0,
            seed: 15,
            num_samples: 10,
        }
    }
}

impl SaConfig {
    pub fn validate(&self) -> Result<(), SaError> {
        if self.temperature_steps == 0 {
            return Err(SaError::Config("temperature_steps must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(SaError::Config("alpha must lie in (0, 1)"));
        }
        if !(self.initial_temperature > 0.0 && self.initial_temperature.is_finite()) {
            return Err(SaError::Config("initial temperature must be positive"));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(SaError::Config("k must be positive"));
        }
        if self.num_samples == 0 {
            return Err(SaError::Config("num_samples must be at least 1"));
        }
        if self.inner_iterations_per_step == Some(0) {
            return Err(SaError::Config("inner iterations must be at least 1"));
        }
        Ok(())
    }

    fn inner_iterations(&self, bits: usize) -> usize {
        self.inner_iterations_per_step.unwrap_or(bits)
    }
}

/// State at the end of one temperature step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub restart: usize,
    pub temperature_step: usize,
    pub temperature: f64,
    pub current_cost: f64,
    pub best_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaRestart {
    pub best_index: usize,
    pub best_cost: f64,
    pub trace: Vec<TraceStep>,
}

/// Metropolis rule for a move that changes the cost by `delta`.
pub fn metropolis_accept(delta: f64, temperature: f64, k: f64, rng: &mut StreamRng) -> bool {
    if delta < 0.0 {
        return true;
    }
    let p = (-delta.abs() / (k * temperature)).exp();
    rng.random::<f64>() < p
}

fn anneal(costs: &[f64], bits: usize, config: &SaConfig, restart: usize) -> SaRestart {
    let mut rng = rng::stream(config.seed, Purpose::Annealing, restart as u64);
    let mut x = rng.random_range(0..costs.len());
    let mut current = costs[x];
    let (mut best_index, mut best_cost) = (x, current);
    let mut temperature = config.initial_temperature;
    let inner = config.inner_iterations(bits);
    let mut trace = Vec::with_capacity(config.temperature_steps);

    for step in 0..config.temperature_steps {
        for _ in 0..inner {
            let y = x ^ (1 << rng.random_range(0..bits));
            let candidate = costs[y];
            if metropolis_accept(candidate - current, temperature, config.k, &mut rng) {
                x = y;
                current = candidate;
                if current < best_cost {
                    best_cost = current;
                    best_index = x;
                }
            }
        }
        trace.push(TraceStep {
            restart,
            temperature_step: step,
            temperature,
            current_cost: current,
            best_cost,
        });
        temperature *= config.alpha;
    }
    SaRestart {
        best_index,
        best_cost,
        trace,
    }
}

/// Run `config.num_samples` independent restarts.
pub fn run_sa(table: &CostTable, config: &SaConfig) -> Result<Vec<SaRestart>, SaError> {
    config.validate()?;
    let bits = table.num_bits();
    if bits == 0 {
        return Err(SaError::EmptyTable);
    }
    Ok((0..config.num_samples)
        .into_par_iter()
        .map(|r| anneal(table.normalized(), bits, config, r))
        .collect())
}
