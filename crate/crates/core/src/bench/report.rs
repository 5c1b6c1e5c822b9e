use super::{
    load_key, read_json, write_atomic, write_json, Algorithm, BenchError, BenchRecord,
    CellStatus, Manifest, MANIFEST_FILE, RECORDS_CSV, RECORDS_JSON,
};
use crate::metrics::{aggregate, difference, time_to_solution, Tts};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const SUMMARY_FILE: &str = "summary.json";

/// Least-squares line through `(qubits, log2 TTS)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtsFit {
    pub slope: f64,
    pub intercept: f64,
    pub used: Vec<usize>,
    /// Qubit counts whose TTS was unattained.
    pub excluded: Vec<usize>,
}

/// Fit `log2(TTS) = slope * qubits + intercept` over the attained points.
pub fn fit_tts_slope(points: &[(usize, Tts)]) -> Result<TtsFit, BenchError> {
    let mut used = Vec::new();
    let mut excluded = Vec::new();
    let mut xy = Vec::new();
    for &(q, tts) in points {
        match tts.value() {
            Some(v) if v.is_finite() && v > 0.0 => {
                used.push(q);
                xy.push((q as f64, v.log2()));
            }
            _ => excluded.push(q),
        }
    }
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if xy.len() < 2 || sxx == 0.0 {
        return Err(BenchError::TooFewPoints { finite: xy.len() });
    }
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok(TtsFit {
        slope,
        intercept: my - slope * mx,
        used,
        excluded,
    })
}

#[derive(Serialize)]
struct SampleRow<'a> {
    algorithm: &'a str,
    qubits: usize,
    load: f64,
    s: usize,
    sample_index: usize,
    normalized_cost: f64,
    ar: f64,
}

#[derive(Serialize)]
struct LineRow {
    algorithm: &'static str,
    reduction: &'static str,
    load: f64,
    s: usize,
    count: usize,
    mean_ar: f64,
    ci95: f64,
    min_ar: f64,
    max_ar: f64,
    degenerate: bool,
}

#[derive(Serialize)]
struct HeatRow {
    algorithm: &'static str,
    s: usize,
    qubits: usize,
    load: f64,
    best_of_samples: f64,
    mean_of_samples: f64,
    expected: Option<f64>,
}

#[derive(Serialize)]
struct DiffRow {
    qubits: usize,
    load: f64,
    qaoa_layers: usize,
    sa_steps: usize,
    qaoa_ar: f64,
    sa_ar: f64,
    difference: f64,
}

#[derive(Serialize)]
struct TtsCellRow {
    algorithm: &'static str,
    estimator: &'static str,
    threshold: f64,
    qubits: usize,
    load: f64,
    tts: Option<f64>,
    steps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtsQubitRow {
    pub algorithm: String,
    pub estimator: String,
    pub threshold: f64,
    pub qubits: usize,
    pub tts: Option<f64>,
    pub steps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtsFitRow {
    pub algorithm: String,
    pub estimator: String,
    pub threshold: f64,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub points: usize,
    /// Qubit counts left out because no level reached the threshold,
    /// separated by `;`.
    pub excluded: String,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedCell {
    pub qubits: usize,
    pub load: f64,
    pub message: String,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outputs {
    pub records: usize,
    pub difference_pair: (usize, usize),
    pub tts_per_qubit: Vec<TtsQubitRow>,
    pub fits: Vec<TtsFitRow>,
    /// Plain-language comparison of the two algorithms' TTS.
    pub comparison: Vec<String>,
    pub failed_cells: Vec<FailedCell>,
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), BenchError> {
    let err = |message: String| BenchError::Decode {
        path: path.to_owned(),
        message,
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| err(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| err(e.to_string()))?;
    write_atomic(path, &bytes)
}

pub(super) fn write_records_csv(path: &Path, records: &[BenchRecord]) -> Result<(), BenchError> {
    let rows: Vec<SampleRow> = records
        .iter()
        .flat_map(|r| {
            r.costs
                .iter()
                .zip(&r.ars)
                .enumerate()
                .map(move |(i, (&c, &ar))| SampleRow {
                    algorithm: r.algorithm.as_str(),
                    qubits: r.qubits,
                    load: r.load,
                    s: r.s,
                    sample_index: i,
                    normalized_cost: c,
                    ar,
                })
        })
        .collect();
    write_csv(path, &rows)
}

type Reduction = (&'static str, fn(&BenchRecord) -> Option<f64>);

const REDUCTIONS: [Reduction; 3] = [
    ("best_of_samples", |r| Some(r.best_ar())),
    ("mean_of_samples", |r| Some(r.mean_ar())),
    ("expected", |r| r.expected_ar),
];

fn line_rows(
    records: &[BenchRecord],
    algorithm: Algorithm,
    loads: &BTreeMap<u64, f64>,
) -> Result<Vec<LineRow>, BenchError> {
    let mut rows = Vec::new();
    for (name, reduce) in REDUCTIONS {
        let items: Vec<((u64, usize), f64)> = records
            .iter()
            .filter(|r| r.algorithm == algorithm)
            .filter_map(|r| reduce(r).map(|v| ((load_key(r.load), r.s), v)))
            .collect();
        if items.is_empty() {
            continue;
        }
        let groups = aggregate(items).map_err(|e| BenchError::Plan(e.to_string()))?;
        rows.extend(groups.into_iter().map(|((lk, s), g)| LineRow {
            algorithm: algorithm.as_str(),
            reduction: name,
            load: loads[&lk],
            s,
            count: g.count,
            mean_ar: g.mean,
            ci95: g.ci95,
            min_ar: g.min,
            max_ar: g.max,
            degenerate: g.degenerate,
        }));
    }
    Ok(rows)
}

fn heat_rows(records: &[BenchRecord], algorithm: Algorithm) -> Vec<HeatRow> {
    let mut rows: Vec<HeatRow> = records
        .iter()
        .filter(|r| r.algorithm == algorithm)
        .map(|r| HeatRow {
            algorithm: algorithm.as_str(),
            s: r.s,
            qubits: r.qubits,
            load: r.load,
            best_of_samples: r.best_ar(),
            mean_of_samples: r.mean_ar(),
            expected: r.expected_ar,
        })
        .collect();
    rows.sort_by(|a, b| {
        (a.s, a.qubits, load_key(a.load)).cmp(&(b.s, b.qubits, load_key(b.load)))
    });
    rows
}

fn best_by_cell(records: &[BenchRecord], algorithm: Algorithm, s: usize) -> BTreeMap<(usize, u64), f64> {
    records
        .iter()
        .filter(|r| r.algorithm == algorithm && r.s == s)
        .map(|r| ((r.qubits, load_key(r.load)), r.best_ar()))
        .collect()
}

/// Success estimate of one record at threshold index `t`.
#[derive(Clone, Copy)]
enum Estimator {
    Sampled,
    Exact,
}

impl Estimator {
    fn as_str(self) -> &'static str {
        match self {
            Estimator::Sampled => "sampled",
            Estimator::Exact => "exact",
        }
    }

    /// `(hits, trials)` of one record; exact mass counts as one trial.
    fn tally(self, r: &BenchRecord, t: usize, threshold: f64) -> Option<(f64, f64)> {
        match self {
            Estimator::Sampled => Some((
                r.ars.iter().filter(|&&a| a >= threshold).count() as f64,
                r.ars.len() as f64,
            )),
            Estimator::Exact => r.exact_success.as_ref().map(|v| (v[t], 1.0)),
        }
    }
}

/// `(s, P_s)` per key, pooling every record that maps to the same key.
fn success_points<K: Ord>(
    records: &[&BenchRecord],
    estimator: Estimator,
    t: usize,
    threshold: f64,
    key: impl Fn(&BenchRecord) -> K,
) -> BTreeMap<K, Vec<(f64, f64)>> {
    let mut tallies: BTreeMap<K, BTreeMap<usize, (f64, f64)>> = BTreeMap::new();
    for r in records {
        if let Some((hits, trials)) = estimator.tally(r, t, threshold) {
            let e = tallies.entry(key(r)).or_default().entry(r.s).or_default();
            e.0 += hits;
            e.1 += trials;
        }
    }
    tallies
        .into_iter()
        .map(|(k, by_s)| {
            let pts = by_s
                .into_iter()
                .map(|(s, (h, n))| (s as f64, (h / n).clamp(0.0, 1.0)))
                .collect();
            (k, pts)
        })
        .collect()
}

fn tts_of(points: &[(f64, f64)]) -> Result<Tts, BenchError> {
    time_to_solution(points).map_err(|e| BenchError::Plan(e.to_string()))
}

struct TtsTables {
    cells: Vec<TtsCellRow>,
    qubits: Vec<TtsQubitRow>,
    fits: Vec<TtsFitRow>,
}

fn tts_tables(
    records: &[BenchRecord],
    thresholds: &[f64],
    loads: &BTreeMap<u64, f64>,
) -> Result<TtsTables, BenchError> {
    let mut out = TtsTables {
        cells: Vec::new(),
        qubits: Vec::new(),
        fits: Vec::new(),
    };
    let combos = [
        (Algorithm::Qaoa, Estimator::Sampled),
        (Algorithm::Qaoa, Estimator::Exact),
        (Algorithm::Sa, Estimator::Sampled),
    ];
    for (t, &threshold) in thresholds.iter().enumerate() {
        for (algorithm, estimator) in combos {
            let subset: Vec<&BenchRecord> =
                records.iter().filter(|r| r.algorithm == algorithm).collect();
            if subset.is_empty() {
                continue;
            }
            let per_cell = success_points(&subset, estimator, t, threshold, |r| {
                (r.qubits, load_key(r.load))
            });
            for ((q, lk), pts) in &per_cell {
                let tts = tts_of(pts)?;
                out.cells.push(TtsCellRow {
                    algorithm: algorithm.as_str(),
                    estimator: estimator.as_str(),
                    threshold,
                    qubits: *q,
                    load: loads[lk],
                    tts: tts.value(),
                    steps: steps_of(tts),
                });
            }
            let per_qubit = success_points(&subset, estimator, t, threshold, |r| r.qubits);
            let mut fit_points = Vec::new();
            for (q, pts) in &per_qubit {
                let tts = tts_of(pts)?;
                fit_points.push((*q, tts));
                out.qubits.push(TtsQubitRow {
                    algorithm: algorithm.as_str().into(),
                    estimator: estimator.as_str().into(),
                    threshold,
                    qubits: *q,
                    tts: tts.value(),
                    steps: steps_of(tts),
                });
            }
            let fit = fit_tts_slope(&fit_points);
            let excluded: Vec<usize> = fit_points
                .iter()
                .filter(|(_, t)| t.value().is_none())
                .map(|(q, _)| *q)
                .collect();
            out.fits.push(TtsFitRow {
                algorithm: algorithm.as_str().into(),
                estimator: estimator.as_str().into(),
                threshold,
                slope: fit.as_ref().ok().map(|f| f.slope),
                intercept: fit.as_ref().ok().map(|f| f.intercept),
                points: fit_points.len() - excluded.len(),
                excluded: excluded
                    .iter()
                    .map(|q| q.to_string())
                    .collect::<Vec<_>>()
                    .join(";"),
                error: fit.err().map(|e| e.to_string()),
            });
        }
    }
    Ok(out)
}

fn steps_of(tts: Tts) -> Option<f64> {
    match tts {
        Tts::Attained { steps, .. } => Some(steps),
        Tts::Unattained => None,
    }
}

fn comparison(fits: &[TtsFitRow], per_qubit: &[TtsQubitRow], thresholds: &[f64]) -> Vec<String> {
    let find_fit = |alg: &str, th: f64| {
        fits.iter()
            .find(|f| f.algorithm == alg && f.estimator == "sampled" && f.threshold == th)
    };
    let mut notes = Vec::new();
    for &th in thresholds {
        let (Some(q), Some(s)) = (find_fit("qaoa", th), find_fit("sa", th)) else {
            continue;
        };
        let slope = |f: &TtsFitRow| match f.slope {
            Some(v) => format!("{v:.4}"),
            None => "n/a".to_owned(),
        };
        let tts = |alg: &str| -> BTreeMap<usize, Option<f64>> {
            per_qubit
                .iter()
                .filter(|r| r.algorithm == alg && r.estimator == "sampled" && r.threshold == th)
                .map(|r| (r.qubits, r.tts))
                .collect()
        };
        let (tq, ts) = (tts("qaoa"), tts("sa"));
        let mut wins = 0;
        let mut compared = 0;
        for (k, a) in &tq {
            if let (Some(a), Some(Some(b))) = (a, ts.get(k)) {
                compared += 1;
                if a <= b {
                    wins += 1;
                }
            }
        }
        notes.push(format!(
            "threshold {th}: log2 TTS slope per qubit QAOA {} vs SA {}; \
             QAOA TTS <= SA TTS at {wins} of {compared} qubit counts with both attained",
            slope(q),
            slope(s)
        ));
    }
    notes
}

pub(super) fn write_derived(
    out_dir: &Path,
    manifest: &Manifest,
    records: &[BenchRecord],
) -> Result<Outputs, BenchError> {
    let plan = &manifest.plan;
    let loads: BTreeMap<u64, f64> = records.iter().map(|r| (load_key(r.load), r.load)).collect();

    for algorithm in [Algorithm::Qaoa, Algorithm::Sa] {
        let name = algorithm.as_str();
        write_csv(
            &out_dir.join(format!("lines_{name}.csv")),
            &line_rows(records, algorithm, &loads)?,
        )?;
        write_csv(
            &out_dir.join(format!("heatmap_{name}.csv")),
            &heat_rows(records, algorithm),
        )?;
    }

    let (p, t) = plan.resolved_difference_pair();
    let qa = best_by_cell(records, Algorithm::Qaoa, p);
    let sa = best_by_cell(records, Algorithm::Sa, t);
    let diff: Vec<DiffRow> = difference(&qa, &sa)
        .into_iter()
        .map(|((q, lk), d)| DiffRow {
            qubits: q,
            load: loads[&lk],
            qaoa_layers: p,
            sa_steps: t,
            qaoa_ar: qa[&(q, lk)],
            sa_ar: sa[&(q, lk)],
            difference: d,
        })
        .collect();
    write_csv(&out_dir.join("heatmap_difference.csv"), &diff)?;

    let tts = tts_tables(records, &plan.thresholds, &loads)?;
    write_csv(&out_dir.join("tts_cells.csv"), &tts.cells)?;
    write_csv(&out_dir.join("tts_qubits.csv"), &tts.qubits)?;
    write_csv(&out_dir.join("tts_fit.csv"), &tts.fits)?;

    let summary = Outputs {
        records: records.len(),
        difference_pair: (p, t),
        comparison: comparison(&tts.fits, &tts.qubits, &plan.thresholds),
        tts_per_qubit: tts.qubits,
        fits: tts.fits,
        failed_cells: manifest
            .per_cell
            .iter()
            .filter_map(|c| match &c.status {
                CellStatus::Ok => None,
                CellStatus::Failed(m) => Some(FailedCell {
                    qubits: c.qubits,
                    load: c.load,
                    message: m.clone(),
                }),
            })
            .collect(),
    };
    write_json(&out_dir.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

/// Recompute every derived output in `out_dir` from its manifest and records.
pub fn report(out_dir: &Path) -> Result<Outputs, BenchError> {
    let manifest: Manifest = read_json(&out_dir.join(MANIFEST_FILE))?;
    let records: Vec<BenchRecord> = read_json(&out_dir.join(RECORDS_JSON))?;
    write_records_csv(&out_dir.join(RECORDS_CSV), &records)?;
    write_derived(out_dir, &manifest, &records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn attained(v: f64) -> Tts {
        Tts::Attained { value: v, steps: 1.0 }
    }

    #[test]
    fn doubling_tts_has_unit_slope() {
        let pts: Vec<_> = (4..10).map(|q| (q, attained(3.0 * 2f64.powi(q as i32)))).collect();
        let fit = fit_tts_slope(&pts).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12);
        assert!((fit.intercept - 3f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn constant_tts_has_zero_slope_and_unattained_points_are_excluded() {
        let pts = vec![
            (4, attained(50.0)),
            (5, Tts::Unattained),
            (6, attained(50.0)),
        ];
        let fit = fit_tts_slope(&pts).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert_eq!(fit.used, vec![4, 6]);
        assert_eq!(fit.excluded, vec![5]);
    }

    #[test]
    fn fewer_than_two_points_is_an_error() {
        assert!(matches!(
            fit_tts_slope(&[(4, attained(2.0)), (5, Tts::Unattained)]),
            Err(BenchError::TooFewPoints { finite: 1 })
        ));
    }

    #[test]
    fn pooled_success_counts_all_samples() {
        let rec = |load: f64, ars: Vec<f64>| BenchRecord {
            algorithm: Algorithm::Sa,
            qubits: 4,
            load,
            seed: 0,
            s: 10,
            costs: ars.iter().map(|a| 1.0 - a).collect(),
            ars,
            expected_ar: None,
            exact_success: None,
        };
        let a = rec(0.1, vec![1.0, 0.5]);
        let b = rec(0.2, vec![1.0, 1.0, 1.0, 0.0]);
        let pts = success_points(&[&a, &b], Estimator::Sampled, 0, 0.95, |r| r.qubits);
        assert_eq!(pts[&4], vec![(10.0, 4.0 / 6.0)]);
    }
}
