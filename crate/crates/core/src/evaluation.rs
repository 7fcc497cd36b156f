//! Recourse, wait-and-see, expected-value and value-of-information metrics.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formulation::{formulate, Solution};
use crate::model::{ModelError, Provenance, ProblemInstance, Scenario, Weights};
use crate::solve::{solve, solve_instance, SolveError, SolverOptions};

/// Slack allowed in the ordering `ews >= rp >= eev`.
pub const ORDERING_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("ordering violated: {0}")]
    OrderingViolation(String),
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioBreakdown {
    pub scenario: usize,
    pub probability: f64,
    pub ws_value: f64,
    pub evp_eval_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeMetrics {
    pub rp: f64,
    pub ews: f64,
    pub evp: f64,
    pub eev: f64,
    /// Percent of EEV.
    pub vss: f64,
    pub evpi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoiReport {
    pub rp: f64,
    pub ews: f64,
    pub evp: f64,
    pub eev: f64,
    pub vss: f64,
    pub evpi: f64,
    /// Percent of RP, except VSS which is percent of EEV.
    pub relative: RelativeMetrics,
    pub per_scenario: Vec<ScenarioBreakdown>,
}

/// Probability-weighted sum.
pub fn expectation(probabilities: &[f64], values: &[f64]) -> f64 {
    probabilities.iter().zip(values).map(|(p, v)| p * v).sum()
}

fn percent(value: f64, base: f64) -> f64 {
    if base == 0.0 {
        0.0
    } else {
        100.0 * value / base
    }
}

pub fn compute_voi(rp: f64, ews: f64, eev: f64, evp: f64) -> Result<VoiReport, EvaluationError> {
    for (name, v) in [("rp", rp), ("ews", ews), ("eev", eev), ("evp", evp)] {
        if !v.is_finite() {
            return Err(EvaluationError::NonFinite(name));
        }
    }
    if ews < rp - ORDERING_TOL {
        return Err(EvaluationError::OrderingViolation(format!("EWS {ews} < RP {rp}")));
    }
    if rp < eev - ORDERING_TOL {
        return Err(EvaluationError::OrderingViolation(format!("RP {rp} < EEV {eev}")));
    }
    let vss = rp - eev;
    let evpi = ews - rp;
    Ok(VoiReport {
        rp,
        ews,
        evp,
        eev,
        vss,
        evpi,
        relative: RelativeMetrics {
            rp: percent(rp, rp),
            ews: percent(ews, rp),
            evp: percent(evp, rp),
            eev: percent(eev, rp),
            vss: percent(vss, eev),
            evpi: percent(evpi, rp),
        },
        per_scenario: Vec::new(),
    })
}

impl VoiReport {
    /// Builds the report from a per-scenario breakdown.
    pub fn from_breakdown(rp: f64, evp: f64, per_scenario: Vec<ScenarioBreakdown>) -> Result<Self, EvaluationError> {
        let rho: Vec<f64> = per_scenario.iter().map(|b| b.probability).collect();
        let ws: Vec<f64> = per_scenario.iter().map(|b| b.ws_value).collect();
        let ev: Vec<f64> = per_scenario.iter().map(|b| b.evp_eval_value).collect();
        let mut report = compute_voi(rp, expectation(&rho, &ws), expectation(&rho, &ev), evp)?;
        report.per_scenario = per_scenario;
        Ok(report)
    }

    /// Plain-text table with one row per metric.
    pub fn to_text_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<32} {:>10} {:>12}", "Metric", "Value", "Relative (%)");
        let rows = [
            ("RP (Recourse Problem)", self.rp, self.relative.rp),
            ("EWS (Perfect Information)", self.ews, self.relative.ews),
            ("EVP (Expected Value Problem)", self.evp, self.relative.evp),
            ("EEV (Expected value of EVP)", self.eev, self.relative.eev),
            ("VSS", self.vss, self.relative.vss),
            ("EVPI", self.evpi, self.relative.evpi),
        ];
        for (name, v, rel) in rows {
            let _ = writeln!(out, "{name:<32} {v:>10.4} {rel:>12.2}");
        }
        if !self.per_scenario.is_empty() {
            let _ = writeln!(out);
            let _ = writeln!(out, "{:<10} {:>12} {:>10} {:>10}", "Scenario", "Probability", "WS", "EEV");
            for b in &self.per_scenario {
                let _ = writeln!(
                    out,
                    "{:<10} {:>12.4} {:>10.4} {:>10.4}",
                    b.scenario + 1,
                    b.probability,
                    b.ws_value,
                    b.evp_eval_value
                );
            }
        }
        out
    }
}

pub fn solve_rp(instance: &ProblemInstance, weights: &Weights, options: &SolverOptions) -> Result<Solution, EvaluationError> {
    let (_, outcome) = solve_instance(instance, weights, options)?;
    Ok(outcome.solution)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaitAndSee {
    pub ws: Vec<f64>,
    pub ews: f64,
    pub solutions: Vec<Solution>,
}

/// Solves each scenario alone with probability 1.
pub fn solve_wait_and_see(
    instance: &ProblemInstance,
    weights: &Weights,
    options: &SolverOptions,
) -> Result<WaitAndSee, EvaluationError> {
    let mut ws = Vec::with_capacity(instance.num_scenarios());
    let mut solutions = Vec::with_capacity(instance.num_scenarios());
    for k in 0..instance.num_scenarios() {
        let (_, outcome) = solve_instance(&instance.restrict_to_scenario(k), weights, options)?;
        ws.push(outcome.solution.objective);
        solutions.push(outcome.solution);
    }
    let ews = expectation(&instance.probabilities(), &ws);
    Ok(WaitAndSee { ws, ews, solutions })
}

/// Single scenario holding the probability-weighted mean of every
/// uncertain parameter. Demands stay fractional.
pub fn mean_scenario(instance: &ProblemInstance) -> Scenario {
    let rho = instance.probabilities();
    let no = instance.num_spills();
    let nr = instance.num_resources();
    let mean = |f: &dyn Fn(&Scenario) -> f64| -> f64 {
        instance.scenarios.iter().zip(&rho).map(|(s, p)| p * f(s)).sum()
    };
    Scenario {
        id: 1,
        probability: 1.0,
        provenance: Provenance::Mean,
        spill_volume: (0..no).map(|o| mean(&|s| s.spill_volume[o])).collect(),
        spill_esi: (0..no).map(|o| mean(&|s| s.spill_esi[o])).collect(),
        demand: (0..no)
            .map(|o| (0..nr).map(|r| mean(&|s| s.demand[o][r])).collect())
            .collect(),
    }
}

pub fn mean_instance(instance: &ProblemInstance) -> Result<ProblemInstance, ModelError> {
    instance.with_scenarios(vec![mean_scenario(instance)])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedValueProblem {
    pub solution: Solution,
    pub instance: ProblemInstance,
}

pub fn solve_expected_value_problem(
    instance: &ProblemInstance,
    weights: &Weights,
    options: &SolverOptions,
) -> Result<ExpectedValueProblem, EvaluationError> {
    let mean = mean_instance(instance)?;
    let (_, outcome) = solve_instance(&mean, weights, options)?;
    Ok(ExpectedValueProblem { solution: outcome.solution, instance: mean })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EevEvaluation {
    pub per_scenario: Vec<f64>,
    pub eev: f64,
}

/// Re-solves each scenario's recourse with the stations fixed to `open`.
/// Spills the fixed stations cannot serve simply stay uncovered.
pub fn evaluate_fixed_first_stage(
    instance: &ProblemInstance,
    weights: &Weights,
    open: &[bool],
    options: &SolverOptions,
) -> Result<EevEvaluation, EvaluationError> {
    let mut per_scenario = Vec::with_capacity(instance.num_scenarios());
    for k in 0..instance.num_scenarios() {
        let mut model = formulate(&instance.restrict_to_scenario(k), weights)?;
        model.fix_first_stage(open);
        let outcome = solve(&model, options)?;
        per_scenario.push(outcome.solution.objective);
    }
    let eev = expectation(&instance.probabilities(), &per_scenario);
    Ok(EevEvaluation { per_scenario, eev })
}

pub fn evaluate_eev(
    instance: &ProblemInstance,
    weights: &Weights,
    evp_solution: &Solution,
    options: &SolverOptions,
) -> Result<EevEvaluation, EvaluationError> {
    evaluate_fixed_first_stage(instance, weights, &evp_solution.open, options)
}

/// Everything the value-of-information protocol produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub report: VoiReport,
    pub rp_solution: Solution,
    pub evp_solution: Solution,
}

/// Runs RP, wait-and-see, EVP and EEV and assembles the report.
pub fn evaluate_instance(
    instance: &ProblemInstance,
    weights: &Weights,
    options: &SolverOptions,
) -> Result<Evaluation, EvaluationError> {
    let rp = solve_rp(instance, weights, options)?;
    let ws = solve_wait_and_see(instance, weights, options)?;
    let evp = solve_expected_value_problem(instance, weights, options)?;
    let eev = evaluate_eev(instance, weights, &evp.solution, options)?;
    let breakdown = instance
        .scenarios
        .iter()
        .enumerate()
        .map(|(k, s)| ScenarioBreakdown {
            scenario: k,
            probability: s.probability,
            ws_value: ws.ws[k],
            evp_eval_value: eev.per_scenario[k],
        })
        .collect();
    let report = VoiReport::from_breakdown(rp.objective, evp.solution.objective, breakdown)?;
    Ok(Evaluation {
        report,
        rp_solution: rp,
        evp_solution: evp.solution,
    })
}
