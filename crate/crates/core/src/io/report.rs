use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use super::svg::{k1_coverage_svg, pareto_svg, scenario_svg};
use crate::evaluation::VoiReport;
use crate::formulation::{coverage_stats, CoverageStats, Solution};
use crate::model::ProblemInstance;
use crate::sweep::{coverage_by_k1, write_pareto_csv, write_sweep_csv, ParetoPoint, SweepError, SweepRun};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Sweep(#[from] SweepError),
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), ReportError> {
    fs::write(path, bytes).map_err(|source| ReportError::Io { path: path.display().to_string(), source })
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, ReportError> {
    let mut wr = csv::Writer::from_writer(Vec::new());
    wr.write_record(header)?;
    for r in rows {
        wr.write_record(&r)?;
    }
    wr.into_inner().map_err(|e| ReportError::Io { path: "<memory>".into(), source: e.into_error() })
}

#[derive(Serialize)]
struct SolutionSummary<'a> {
    solution: &'a Solution,
    coverage: &'a CoverageStats,
    selected_stations: Vec<String>,
    fixed_cost: f64,
}

/// Assignments, deployments, transfers, utilization and a JSON summary.
pub fn write_solution_reports(dir: &Path, instance: &ProblemInstance, solution: &Solution) -> Result<(), ReportError> {
    let stats = coverage_stats(solution, instance);
    let st = |i: usize| instance.stations[i].id.to_string();
    let sp = |o: usize| instance.spills[o].id.to_string();
    let sc = |k: usize| instance.scenarios[k].id.to_string();
    let rs = |r: usize| instance.resources[r].name.clone();

    let mut rows = Vec::new();
    for (k, per_o) in solution.assignment.iter().enumerate() {
        for (o, a) in per_o.iter().enumerate() {
            if let Some(i) = a {
                rows.push(vec![sc(k), sp(o), st(*i), solution.arrival[k][o].to_string()]);
            }
        }
    }
    write(&dir.join("assignments.csv"), csv_table(&["scenario", "spill", "station", "arrival_h"], rows)?)?;

    let rows = solution
        .deployments
        .iter()
        .map(|d| vec![sc(d.scenario), sp(d.spill), st(d.station), rs(d.resource), d.amount.to_string()]);
    write(&dir.join("deployments.csv"), csv_table(&["scenario", "spill", "station", "resource", "amount"], rows)?)?;

    let rows = solution
        .transfers
        .iter()
        .map(|t| vec![sc(t.scenario), st(t.from), st(t.to), rs(t.resource), t.amount.to_string()]);
    write(&dir.join("transfers.csv"), csv_table(&["scenario", "from", "to", "resource", "amount"], rows)?)?;

    let mut rows = Vec::new();
    for (i, per_r) in stats.utilization.iter().enumerate() {
        for (r, u) in per_r.iter().enumerate() {
            rows.push(vec![st(i), rs(r), instance.stations[i].inventory[r].to_string(), u.to_string()]);
        }
    }
    write(&dir.join("utilization.csv"), csv_table(&["station", "resource", "inventory", "peak_utilization"], rows)?)?;

    let summary = SolutionSummary {
        solution,
        coverage: &stats,
        selected_stations: solution.selected().iter().map(|&i| instance.stations[i].name.clone()).collect(),
        fixed_cost: instance.fixed_cost(&solution.open),
    };
    write(&dir.join("solution.json"), json(&summary))
}

/// One assignment plot per scenario.
pub fn write_scenario_plots(dir: &Path, instance: &ProblemInstance, solution: &Solution) -> Result<(), ReportError> {
    for k in 0..instance.num_scenarios() {
        write(&dir.join(format!("scenario_{}.svg", k + 1)), scenario_svg(instance, solution, k))?;
    }
    Ok(())
}

pub fn write_voi_reports(dir: &Path, report: &VoiReport) -> Result<(), ReportError> {
    let r = report;
    let rows = [
        ("RP", r.rp, r.relative.rp),
        ("EWS", r.ews, r.relative.ews),
        ("EVP", r.evp, r.relative.evp),
        ("EEV", r.eev, r.relative.eev),
        ("VSS", r.vss, r.relative.vss),
        ("EVPI", r.evpi, r.relative.evpi),
    ]
    .into_iter()
    .map(|(m, v, p)| vec![m.to_string(), v.to_string(), p.to_string()]);
    write(&dir.join("voi.csv"), csv_table(&["metric", "value", "relative_percent"], rows)?)?;
    let rows = r.per_scenario.iter().map(|b| {
        vec![
            (b.scenario + 1).to_string(),
            b.probability.to_string(),
            b.ws_value.to_string(),
            b.evp_eval_value.to_string(),
        ]
    });
    write(&dir.join("voi_scenarios.csv"), csv_table(&["scenario", "probability", "ws", "eev_eval"], rows)?)?;
    write(&dir.join("voi.json"), json(report))?;
    write(&dir.join("voi.txt"), report.to_text_table())
}

/// Sweep and frontier tables plus the k1 and Pareto plots.
pub fn write_sweep_reports(dir: &Path, runs: &[SweepRun], frontier: &[ParetoPoint]) -> Result<(), ReportError> {
    let mut buf = Vec::new();
    write_sweep_csv(runs, &mut buf)?;
    write(&dir.join("sweep.csv"), buf)?;
    let mut buf = Vec::new();
    write_pareto_csv(frontier, &mut buf)?;
    write(&dir.join("pareto.csv"), buf)?;
    write(&dir.join("k1_coverage.svg"), k1_coverage_svg(&coverage_by_k1(runs)))?;
    write(&dir.join("pareto.svg"), pareto_svg(runs, frontier))
}
