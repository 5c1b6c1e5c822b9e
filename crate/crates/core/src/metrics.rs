//! Approximation ratio, time-to-solution and grouped confidence intervals.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

/// Slack allowed on normalized costs before they count as out of range.
pub const COST_TOLERANCE: f64 = 1e-9;
/// Target confidence of reaching the threshold within the TTS budget.
pub const TTS_CONFIDENCE: f64 = 0.99;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("normalized cost {0} outside [0, 1]")]
    Domain(f64),
    #[error("no records to evaluate")]
    NoRecords,
    #[error("success probability {0} outside [0, 1]")]
    Probability(f64),
}

/// `1 - cost` for a min/max-normalized cost.
pub fn approximation_ratio(normalized_cost: f64) -> Result<f64, MetricsError> {
    if !(-COST_TOLERANCE..=1.0 + COST_TOLERANCE).contains(&normalized_cost) {
        return Err(MetricsError::Domain(normalized_cost));
    }
    Ok((1.0 - normalized_cost).clamp(0.0, 1.0))
}

/// Fraction of `ratios` at or above `threshold`.
pub fn success_fraction(ratios: &[f64], threshold: f64) -> f64 {
    if ratios.is_empty() {
        return 0.0;
    }
    ratios.iter().filter(|&&r| r >= threshold).count() as f64 / ratios.len() as f64
}

/// `s * (ln(1 - confidence) / ln(1 - P_s) + 1)`, with `P_s = 1` giving `s`
/// and `P_s = 0` giving `None`.
pub fn tts_candidate(steps: f64, success: f64) -> Result<Option<f64>, MetricsError> {
    if !(0.0..=1.0).contains(&success) {
        return Err(MetricsError::Probability(success));
    }
    if success == 0.0 {
        return Ok(None);
    }
    if success == 1.0 {
        return Ok(Some(steps));
    }
    let repeats = (1.0 - TTS_CONFIDENCE).ln() / (1.0 - success).ln();
    Ok(Some(steps * (repeats + 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Tts {
    /// Minimum over resource levels and the level that achieved it.
    Attained { value: f64, steps: f64 },
    /// No resource level ever reached the threshold.
    Unattained,
}

impl Tts {
    pub fn value(&self) -> Option<f64> {
        match self {
            Tts::Attained { value, .. } => Some(*value),
            Tts::Unattained => None,
        }
    }
}

/// Minimum TTS over `(steps, P_s)` points.
pub fn time_to_solution(points: &[(f64, f64)]) -> Result<Tts, MetricsError> {
    if points.is_empty() {
        return Err(MetricsError::NoRecords);
    }
    let mut best = Tts::Unattained;
    for &(steps, p) in points {
        if let Some(v) = tts_candidate(steps, p)? {
            if best.value().is_none_or(|b| v < b) {
                best = Tts::Attained { value: v, steps };
            }
        }
    }
    Ok(best)
}

/// Mean and two-sided 95% Student-t interval of one group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub ci95: f64,
    pub min: f64,
    pub max: f64,
    /// Single-member group: no spread estimate, `ci95` is 0.
    pub degenerate: bool,
}

pub fn summarize(values: &[f64]) -> Result<Summary, MetricsError> {
    let n = values.len();
    if n == 0 {
        return Err(MetricsError::NoRecords);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let ci95 = if n > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        student_t_quantile(0.975, n - 1) * (var / n as f64).sqrt()
    } else {
        0.0
    };
    Ok(Summary {
        count: n,
        mean,
        ci95,
        min,
        max,
        degenerate: n == 1,
    })
}

/// Group `(key, value)` pairs and summarize each group.
pub fn aggregate<K, I>(items: I) -> Result<BTreeMap<K, Summary>, MetricsError>
where
    K: Ord,
    I: IntoIterator<Item = (K, f64)>,
{
    let mut groups: BTreeMap<K, Vec<f64>> = BTreeMap::new();
    for (k, v) in items {
        groups.entry(k).or_default().push(v);
    }
    if groups.is_empty() {
        return Err(MetricsError::NoRecords);
    }
    groups
        .into_iter()
        .map(|(k, v)| Ok((k, summarize(&v)?)))
        .collect()
}

/// Cell-wise `a - b` over keys present in both maps.
pub fn difference<K: Ord + Clone>(a: &BTreeMap<K, f64>, b: &BTreeMap<K, f64>) -> BTreeMap<K, f64> {
    a.iter()
        .filter_map(|(k, va)| b.get(k).map(|vb| (k.clone(), va - vb)))
        .collect()
}

/// Upper `p` quantile of Student's t with `df` degrees of freedom.
pub fn student_t_quantile(p: f64, df: usize) -> f64 {
    StudentsT::new(0.0, 1.0, df as f64)
        .expect("df >= 1")
        .inverse_cdf(p)
}
