//! Diagonalized QAOA simulation.
//!
//! The cost unitary is diagonal in the computational basis because every
//! commitment's objective is precomputed in a [`CostTable`], so the circuit
//! needs one qubit per generator and no ancillas. A run prepares `|+>^n`,
//! applies `p` layers of `exp(-i gamma_k C)` followed by `exp(-i beta_k X)` on
//! every qubit, and reads out the exact outcome distribution.

mod statevector;

pub use statevector::Statevector;

use crate::cost_table::CostTable;
use crate::rng::{self, Purpose};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QaoaError {
    #[error("state has {state} amplitudes but the cost table has {table} entries")]
    SizeMismatch { state: usize, table: usize },
    #[error("a schedule needs at least one layer")]
    EmptySchedule,
    #[error("gamma and beta lists differ in length ({gammas} vs {betas})")]
    ScheduleShape { gammas: usize, betas: usize },
    #[error("cannot draw zero samples")]
    NoSamples,
    #[error("distribution has no positive, finite mass")]
    InvalidDistribution,
}

/// Per-layer angles `(gamma_k, beta_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampSchedule {
    gammas: Vec<f64>,
    betas: Vec<f64>,
}

impl RampSchedule {
    /// Linear ramp over `p` layers: `gamma_k = k/p` rising to 1 and
    /// `beta_k = -(p-k+1)/p` falling in magnitude from 1 to `1/p`.
    pub fn ramp(p: usize) -> Result<Self, QaoaError> {
        if p == 0 {
            return Err(QaoaError::EmptySchedule);
        }
        let pf = p as f64;
        Ok(RampSchedule {
            gammas: (1..=p).map(|k| k as f64 / pf).collect(),
            betas: (1..=p).map(|k| -((p - k + 1) as f64) / pf).collect(),
        })
    }

    /// Arbitrary angles, e.g. all-zero diagnostics.
    pub fn custom(gammas: Vec<f64>, betas: Vec<f64>) -> Result<Self, QaoaError> {
        if gammas.len() != betas.len() {
            return Err(QaoaError::ScheduleShape {
                gammas: gammas.len(),
                betas: betas.len(),
            });
        }
        if gammas.is_empty() {
            return Err(QaoaError::EmptySchedule);
        }
        Ok(RampSchedule { gammas, betas })
    }

    pub fn layers(&self) -> usize {
        self.gammas.len()
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }
}

pub fn make_schedule(p: usize) -> Result<RampSchedule, QaoaError> {
    RampSchedule::ramp(p)
}

pub fn apply_cost_phase(
    state: &mut Statevector,
    table: &CostTable,
    gamma: f64,
) -> Result<(), QaoaError> {
    state.apply_cost_phase(table.normalized(), gamma)
}

pub fn apply_mixer(state: &mut Statevector, beta: f64) {
    state.apply_mixer(beta)
}

/// Final state after all layers of `schedule` over normalized `costs`.
pub fn evolve(costs: &[f64], schedule: &RampSchedule) -> Result<Statevector, QaoaError> {
    if costs.is_empty() || !costs.len().is_power_of_two() {
        return Err(QaoaError::SizeMismatch {
            state: costs.len().next_power_of_two(),
            table: costs.len(),
        });
    }
    let mut state = Statevector::uniform(costs.len().trailing_zeros() as usize);
    for (&g, &b) in schedule.gammas.iter().zip(&schedule.betas) {
        state.apply_layer(costs, g, b)?;
    }
    Ok(state)
}

/// Exact outcome probabilities, indexed like the cost table.
pub fn run_qaoa(table: &CostTable, schedule: &RampSchedule) -> Result<Vec<f64>, QaoaError> {
    Ok(evolve(table.normalized(), schedule)?.probabilities())
}

/// `sum_i P(i) cost_i`.
pub fn expected_cost(probabilities: &[f64], costs: &[f64]) -> f64 {
    probabilities.iter().zip(costs).map(|(p, c)| p * c).sum()
}

/// Probability mass on outcomes whose approximation ratio `1 - cost` reaches
/// `threshold`.
pub fn success_probability(probabilities: &[f64], costs: &[f64], threshold: f64) -> f64 {
    probabilities
        .iter()
        .zip(costs)
        .filter(|(_, &c)| 1.0 - c >= threshold)
        .map(|(p, _)| p)
        .sum()
}

/// Draw `num_samples` i.i.d. outcome indices by inverse-CDF lookup. The
/// distribution is renormalized first.
pub fn sample_outcomes(
    probabilities: &[f64],
    num_samples: usize,
    seed: u64,
) -> Result<Vec<usize>, QaoaError> {
    if num_samples == 0 {
        return Err(QaoaError::NoSamples);
    }
    let mut cumulative = Vec::with_capacity(probabilities.len());
    let mut total = 0.0;
    for &p in probabilities {
        if !(p >= 0.0 && p.is_finite()) {
            return Err(QaoaError::InvalidDistribution);
        }
        total += p;
        cumulative.push(total);
    }
    if !(total > 0.0 && total.is_finite()) {
        return Err(QaoaError::InvalidDistribution);
    }
    let last = probabilities
        .iter()
        .rposition(|&p| p > 0.0)
        .expect("positive mass exists");
    let mut rng = rng::stream(seed, Purpose::Measurement, 0);
    Ok((0..num_samples)
        .map(|_| {
            let u = rng.random::<f64>() * total;
            cumulative.partition_point(|&c| c <= u).min(last)
        })
        .collect())
}
