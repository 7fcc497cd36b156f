//! Weight-grid sensitivity sweep and Pareto extraction.

use std::io;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formulation::{coverage_stats, SolveStatus};
use crate::model::{min_max, ProblemInstance, Weights};
use crate::solve::{solve_instance, SolverOptions};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("every sweep run failed")]
    AllRunsFailed,
    #[error("omega step {0} does not divide 1 evenly")]
    BadStep(f64),
    #[error("could not build a thread pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("sweep file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightGrid {
    pub k1_values: Vec<f64>,
    pub omega_step: f64,
    /// Also admit omega vectors with exactly one zero component.
    pub allow_zero: bool,
}

impl Default for WeightGrid {
    fn default() -> Self {
        WeightGrid {
            k1_values: (1..=9).map(|i| i as f64 / 10.0).collect(),
            omega_step: 0.1,
            allow_zero: false,
        }
    }
}

impl WeightGrid {
    pub fn with_k1_step(k1_step: f64, omega_step: f64) -> Result<Self, SweepError> {
        let n = steps(k1_step)?;
        Ok(WeightGrid {
            k1_values: (1..n).map(|i| i as f64 / n as f64).collect(),
            omega_step,
            allow_zero: false,
        })
    }
}

fn steps(step: f64) -> Result<usize, SweepError> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(SweepError::BadStep(step));
    }
    let n = (1.0 / step).round();
    if (n * step - 1.0).abs() > 1e-9 {
        return Err(SweepError::BadStep(step));
    }
    Ok(n as usize)
}

/// All `(k1, omega)` combinations in lexicographic order of
/// `(k1, omega1, omega2)`.
pub fn enumerate_grid(grid: &WeightGrid) -> Result<Vec<Weights>, SweepError> {
    let n = steps(grid.omega_step)?;
    let mut omegas = Vec::new();
    for a in 0..=n {
        for b in 0..=(n - a) {
            let c = n - a - b;
            let zeros = [a, b, c].iter().filter(|&&m| m == 0).count();
            let ok = zeros == 0 || (grid.allow_zero && zeros == 1);
            if ok {
                omegas.push([a as f64 / n as f64, b as f64 / n as f64, c as f64 / n as f64]);
            }
        }
    }
    let mut out = Vec::with_capacity(grid.k1_values.len() * omegas.len());
    for &k1 in &grid.k1_values {
        for w in &omegas {
            out.push(Weights::new(k1, *w));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub index: usize,
    pub weights: Weights,
    /// `ok`, `gap_limit`, `infeasible`, `no_incumbent` or `error: ...`.
    pub status: String,
    pub objective: f64,
    pub coverage_value: f64,
    pub cost_value: f64,
    pub normalized_coverage: f64,
    pub normalized_cost: f64,
    pub stations_mask: u64,
    pub coverage_rate: f64,
    pub total_deployment: f64,
    pub nodes: usize,
}

impl SweepRun {
    pub fn succeeded(&self) -> bool {
        self.status == "ok" || self.status == "gap_limit"
    }

    fn failed(index: usize, weights: Weights, status: String) -> Self {
        SweepRun {
            index,
            weights,
            status,
            objective: f64::NAN,
            coverage_value: f64::NAN,
            cost_value: f64::NAN,
            normalized_coverage: f64::NAN,
            normalized_cost: f64::NAN,
            stations_mask: 0,
            coverage_rate: f64::NAN,
            total_deployment: f64::NAN,
            nodes: 0,
        }
    }

    /// Selected stations, 1-based.
    pub fn stations(&self) -> Vec<usize> {
        (0..64).filter(|i| self.stations_mask & (1 << i) != 0).map(|i| i + 1).collect()
    }
}

fn run_one(instance: &ProblemInstance, index: usize, weights: Weights, options: &SolverOptions) -> SweepRun {
    match solve_instance(instance, &weights, options) {
        Ok((_, outcome)) => {
            let s = &outcome.solution;
            let status = match s.status {
                _ if !s.has_incumbent() && s.status != SolveStatus::Infeasible => {
                    return SweepRun::failed(index, weights, "no_incumbent".into())
                }
                SolveStatus::Optimal => "ok",
                SolveStatus::GapLimit => "gap_limit",
                SolveStatus::Infeasible => return SweepRun::failed(index, weights, "infeasible".into()),
            };
            let stats = coverage_stats(s, instance);
            SweepRun {
                index,
                weights,
                status: status.into(),
                objective: s.objective,
                coverage_value: s.coverage_term,
                cost_value: s.cost_term,
                normalized_coverage: 0.0,
                normalized_cost: 0.0,
                stations_mask: s.stations_mask(),
                coverage_rate: stats.rate,
                total_deployment: s.total_deployment(),
                nodes: outcome.stats.nodes,
            }
        }
        Err(e) => SweepRun::failed(index, weights, format!("error: {e}")),
    }
}

/// Min-max normalizes coverage and cost over the successful runs.
pub fn normalize_runs(runs: &mut [SweepRun]) {
    let ok: Vec<&SweepRun> = runs.iter().filter(|r| r.succeeded()).collect();
    let fold = |f: fn(&SweepRun) -> f64| {
        ok.iter()
            .map(|r| f(r))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let (clo, chi) = fold(|r| r.coverage_value);
    let (klo, khi) = fold(|r| r.cost_value);
    for r in runs.iter_mut().filter(|r| r.succeeded()) {
        r.normalized_coverage = min_max(r.coverage_value, clo, chi);
        r.normalized_cost = min_max(r.cost_value, klo, khi);
    }
}

/// Solves every grid configuration; results come back in grid order.
///
/// `jobs = 1` runs on the calling thread; larger values use a dedicated
/// pool. Individual failures are recorded in the run's status.
pub fn run_sweep(
    instance: &ProblemInstance,
    weights: &[Weights],
    options: &SolverOptions,
    jobs: usize,
) -> Result<Vec<SweepRun>, SweepError> {
    let mut runs: Vec<SweepRun> = if jobs <= 1 {
        weights
            .iter()
            .enumerate()
            .map(|(i, w)| run_one(instance, i, *w, options))
            .collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| SweepError::ThreadPool(e.to_string()))?;
        pool.install(|| {
            weights
                .par_iter()
                .enumerate()
                .map(|(i, w)| run_one(instance, i, *w, options))
                .collect()
        })
    };
    normalize_runs(&mut runs);
    Ok(runs)
}

/// Relative tolerance under which two objectives count as tied.
const TIE_TOL: f64 = 1e-9;

/// Highest objective; ties go to the lower cost, then the
/// lexicographically smaller weights.
pub fn best_configuration(runs: &[SweepRun]) -> Result<&SweepRun, SweepError> {
    let mut best: Option<&SweepRun> = None;
    for r in runs.iter().filter(|r| r.succeeded()) {
        best = Some(match best {
            None => r,
            Some(b) => {
                let scale = b.objective.abs().max(r.objective.abs()).max(1.0);
                if r.objective > b.objective + TIE_TOL * scale {
                    r
                } else if r.objective < b.objective - TIE_TOL * scale {
                    b
                } else if r.cost_value != b.cost_value {
                    if r.cost_value < b.cost_value { r } else { b }
                } else if weight_key(&r.weights) < weight_key(&b.weights) {
                    r
                } else {
                    b
                }
            }
        });
    }
    best.ok_or(SweepError::AllRunsFailed)
}

fn weight_key(w: &Weights) -> (f64, f64, f64, f64) {
    (w.k1, w.omega1, w.omega2, w.omega3)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub run: usize,
    pub weights: Weights,
    pub coverage_value: f64,
    pub cost_value: f64,
    pub normalized_coverage: f64,
    pub normalized_cost: f64,
    pub dominated: bool,
}

/// Non-dominated runs under (maximize coverage, minimize cost), sorted by
/// ascending cost. Of several identical points only the first run is kept.
pub fn pareto_frontier(runs: &[SweepRun]) -> Vec<ParetoPoint> {
    let mut ok: Vec<&SweepRun> = runs.iter().filter(|r| r.succeeded()).collect();
    ok.sort_by(|a, b| {
        a.cost_value
            .total_cmp(&b.cost_value)
            .then(b.coverage_value.total_cmp(&a.coverage_value))
            .then(a.index.cmp(&b.index))
    });
    let mut best_cov = f64::NEG_INFINITY;
    let mut out = Vec::new();
    for r in ok {
        if r.coverage_value > best_cov {
            best_cov = r.coverage_value;
            out.push(ParetoPoint {
                run: r.index,
                weights: r.weights,
                coverage_value: r.coverage_value,
                cost_value: r.cost_value,
                normalized_coverage: r.normalized_coverage,
                normalized_cost: r.normalized_cost,
                dominated: false,
            });
        }
    }
    out
}

pub const SWEEP_HEADER: [&str; 12] = [
    "k1",
    "k2",
    "omega1",
    "omega2",
    "omega3",
    "objective",
    "coverage",
    "cost",
    "norm_coverage",
    "norm_cost",
    "stations_mask",
    "status",
];

pub fn write_sweep_csv<W: io::Write>(runs: &[SweepRun], w: W) -> Result<(), SweepError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(SWEEP_HEADER)?;
    for r in runs {
        let w = &r.weights;
        wr.write_record([
            w.k1.to_string(),
            w.k2.to_string(),
            w.omega1.to_string(),
            w.omega2.to_string(),
            w.omega3.to_string(),
            r.objective.to_string(),
            r.coverage_value.to_string(),
            r.cost_value.to_string(),
            r.normalized_coverage.to_string(),
            r.normalized_cost.to_string(),
            r.stations_mask.to_string(),
            r.status.clone(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads a file written by [`write_sweep_csv`]. Fields not stored in the
/// file (rate, deployment, nodes) come back as NaN or zero.
pub fn read_sweep_csv<R: io::Read>(r: R) -> Result<Vec<SweepRun>, SweepError> {
    let mut rd = csv::Reader::from_reader(r);
    let headers = rd.headers()?.clone();
    let pos = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| SweepError::Format(format!("missing column `{name}`")))
    };
    let cols: Vec<usize> = SWEEP_HEADER.iter().map(|h| pos(h)).collect::<Result<_, _>>()?;
    let mut runs = Vec::new();
    for (index, rec) in rd.records().enumerate() {
        let rec = rec?;
        let num = |c: usize| -> Result<f64, SweepError> {
            let field = rec.get(cols[c]).unwrap_or("");
            field
                .parse::<f64>()
                .map_err(|_| SweepError::Format(format!("row {}: `{field}` in column `{}`", index + 2, SWEEP_HEADER[c])))
        };
        let mask = rec
            .get(cols[10])
            .unwrap_or("")
            .parse::<u64>()
            .map_err(|_| SweepError::Format(format!("row {}: bad stations_mask", index + 2)))?;
        runs.push(SweepRun {
            index,
            weights: Weights {
                k1: num(0)?,
                k2: num(1)?,
                omega1: num(2)?,
                omega2: num(3)?,
                omega3: num(4)?,
            },
            objective: num(5)?,
            coverage_value: num(6)?,
            cost_value: num(7)?,
            normalized_coverage: num(8)?,
            normalized_cost: num(9)?,
            stations_mask: mask,
            status: rec.get(cols[11]).unwrap_or("").to_string(),
            coverage_rate: f64::NAN,
            total_deployment: f64::NAN,
            nodes: 0,
        });
    }
    Ok(runs)
}

pub fn write_pareto_csv<W: io::Write>(points: &[ParetoPoint], w: W) -> Result<(), SweepError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record([
        "run", "k1", "k2", "omega1", "omega2", "omega3", "coverage", "cost", "norm_coverage", "norm_cost",
    ])?;
    for p in points {
        let w = &p.weights;
        wr.write_record([
            p.run.to_string(),
            w.k1.to_string(),
            w.k2.to_string(),
            w.omega1.to_string(),
            w.omega2.to_string(),
            w.omega3.to_string(),
            p.coverage_value.to_string(),
            p.cost_value.to_string(),
            p.normalized_coverage.to_string(),
            p.normalized_cost.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// Mean and population standard deviation of `coverage_value` per k1,
/// in ascending k1 order.
pub fn coverage_by_k1(runs: &[SweepRun]) -> Vec<(f64, f64, f64)> {
    let mut ks: Vec<f64> = runs.iter().filter(|r| r.succeeded()).map(|r| r.weights.k1).collect();
    ks.sort_by(f64::total_cmp);
    ks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    ks.into_iter()
        .map(|k| {
            let vals: Vec<f64> = runs
                .iter()
                .filter(|r| r.succeeded() && (r.weights.k1 - k).abs() < 1e-12)
                .map(|r| r.coverage_value)
                .collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            (k, mean, sd)
        })
        .collect()
}
