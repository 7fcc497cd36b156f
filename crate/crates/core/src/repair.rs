//! Validate-solve-repair driver.

use serde::{Deserialize, Serialize};

use crate::formulation::{MilpModel, Solution};
use crate::model::{ProblemInstance, Weights};
use crate::solve::{solve_instance, SolveError, SolverOptions};

/// Largest violations found in a solution (all zero when clean).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Residuals {
    /// Inventory used beyond stock plus net inflow.
    pub inventory_overdraft: f64,
    /// Demand of a covered spill left undelivered.
    pub unmet_demand: f64,
    /// Arrival later than the response window.
    pub time_violation: f64,
}

impl Residuals {
    pub fn is_clean(&self) -> bool {
        const TOL: f64 = 1e-6;
        self.inventory_overdraft <= TOL && self.unmet_demand <= TOL && self.time_violation <= TOL
    }
}

/// Measures residuals relative to each quantity's scale.
pub fn evaluate_residuals(model: &MilpModel, solution: &Solution, instance: &ProblemInstance) -> Residuals {
    let v = &solution.values;
    let mut res = Residuals::default();
    if v.len() != model.num_columns() {
        return res;
    }
    let tau = instance.config.tau_max;
    for k in 0..instance.num_scenarios() {
        for i in 0..instance.num_stations() {
            for r in 0..instance.num_resources() {
                let stock = instance.stations[i].inventory[r];
                let mut net = 0.0;
                for o in 0..instance.num_spills() {
                    net += model.z[k][o][i][r].map_or(0.0, |j| v[j]);
                }
                for j in 0..instance.num_stations() {
                    net += model.a[k][i][j][r].map_or(0.0, |c| v[c]);
                    net -= model.a[k][j][i][r].map_or(0.0, |c| v[c]);
                }
                res.inventory_overdraft = res.inventory_overdraft.max((net - stock) / stock.max(1.0));
            }
        }
        for o in 0..instance.num_spills() {
            if solution.assignment[k][o].is_some() {
                for r in 0..instance.num_resources() {
                    let need = instance.scenarios[k].demand[o][r];
                    let got: f64 = (0..instance.num_stations()).filter_map(|i| model.z[k][o][i][r]).map(|j| v[j]).sum();
                    res.unmet_demand = res.unmet_demand.max((need - got) / need.max(1.0));
                }
            }
            res.time_violation = res.time_violation.max((solution.arrival[k][o] - tau) / tau);
        }
    }
    res
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepairOutcome {
    pub solution: Solution,
    pub iterations: usize,
    /// Station budget in force for the returned solution.
    pub n_final: usize,
    pub adjustments: usize,
    pub residuals: Residuals,
    pub warnings: Vec<String>,
}

pub fn repair_loop(instance: &ProblemInstance, weights: &Weights, options: &SolverOptions) -> Result<RepairOutcome, SolveError> {
    repair_loop_with(instance, weights, options, evaluate_residuals)
}

/// Solves, checks residuals with `evaluator`, and raises the station
/// budget by one after each dirty solve until it is clean or the budget
/// reaches the number of stations.
pub fn repair_loop_with<F>(
    instance: &ProblemInstance,
    weights: &Weights,
    options: &SolverOptions,
    mut evaluator: F,
) -> Result<RepairOutcome, SolveError>
where
    F: FnMut(&MilpModel, &Solution, &ProblemInstance) -> Residuals,
{
    let mut current = instance.clone();
    let max_n = instance.num_stations();
    let mut iterations = 0;
    let mut adjustments = 0;
    let mut warnings = Vec::new();
    loop {
        iterations += 1;
        let (model, outcome) = solve_instance(&current, weights, options)?;
        let residuals = evaluator(&model, &outcome.solution, &current);
        let done = |warnings| RepairOutcome {
            solution: outcome.solution.clone(),
            iterations,
            n_final: current.config.n_max_stations,
            adjustments,
            residuals,
            warnings,
        };
        if residuals.is_clean() {
            return Ok(done(warnings));
        }
        if current.config.n_max_stations >= max_n {
            warnings.push(format!(
                "residuals remain with the station budget at its maximum of {max_n}: {residuals:?}"
            ));
            return Ok(done(warnings));
        }
        current.config.n_max_stations += 1;
        adjustments += 1;
    }
}
