//! Solver entry points and the exhaustive verification oracle.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use spillopt_milp::{solve_milp, DualSimplex, LpOptions, LpStatus, MilpError, MilpStatus};
use thiserror::Error;

pub use spillopt_milp::{BranchRule, MilpOptions as SolverOptions, NodeTrace, SolveStats};

use crate::formulation::{decode, formulate, FormulationError, MilpModel, Solution, SolveStatus};
use crate::model::{ModelError, ProblemInstance, Weights};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error(transparent)]
    Decode(#[from] FormulationError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("instance too large for enumeration: {0}")]
    TooLarge(String),
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub solution: Solution,
    pub stats: SolveStats,
    pub trace: Vec<NodeTrace>,
}

/// Runs branch-and-bound on a formulated model and decodes the result.
pub fn solve(model: &MilpModel, options: &SolverOptions) -> Result<SolveOutcome, SolveError> {
    let result = solve_milp(&model.problem, options)?;
    let solution = match result.status {
        MilpStatus::Infeasible => Solution::infeasible(model),
        // Limit reached before any incumbent.
        status if result.values.is_empty() => Solution {
            status: SolveStatus::from(status),
            ..Solution::infeasible(model)
        },
        status => decode(model, &result.values, Some(result.objective), SolveStatus::from(status))?,
    };
    Ok(SolveOutcome {
        solution,
        stats: result.stats,
        trace: result.trace,
    })
}

/// How [`solve_instance_with`] attacks a formulated instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Strategy {
    /// Decomposed for multi-scenario instances with few stations,
    /// monolithic otherwise.
    #[default]
    Auto,
    /// One branch-and-bound over the whole model.
    Monolithic,
    /// Station sets enumerated, one branch-and-bound per scenario.
    Decomposed,
}

/// Largest station count the decomposed strategy enumerates.
pub const DECOMPOSE_MAX_STATIONS: usize = 16;

/// Formulates and solves in one step with [`Strategy::Auto`].
pub fn solve_instance(
    instance: &ProblemInstance,
    weights: &Weights,
    options: &SolverOptions,
) -> Result<(MilpModel, SolveOutcome), SolveError> {
    solve_instance_with(instance, weights, options, Strategy::Auto)
}

pub fn solve_instance_with(
    instance: &ProblemInstance,
    weights: &Weights,
    options: &SolverOptions,
    strategy: Strategy,
) -> Result<(MilpModel, SolveOutcome), SolveError> {
    let model = formulate(instance, weights)?;
    let decompose = match strategy {
        Strategy::Auto => instance.num_scenarios() > 1 && instance.num_stations() <= DECOMPOSE_MAX_STATIONS,
        Strategy::Monolithic => false,
        Strategy::Decomposed => true,
    };
    let outcome = if decompose {
        solve_decomposed(instance, weights, &model, options)?
    } else {
        solve(&model, options)?
    };
    Ok((model, outcome))
}

/// Exact solve exploiting the two-stage structure.
///
/// Once the stations are fixed the scenarios share nothing, so every
/// station set within the budget is tried and each scenario's recourse is
/// solved on its own. The reported bound is the largest per-set sum of
/// scenario bounds.
pub fn solve_decomposed(
    instance: &ProblemInstance,
    weights: &Weights,
    model: &MilpModel,
    options: &SolverOptions,
) -> Result<SolveOutcome, SolveError> {
    let start = Instant::now();
    let ni = instance.num_stations();
    if ni > DECOMPOSE_MAX_STATIONS {
        return Err(SolveError::TooLarge(format!(
            "{ni} stations (decomposition limit {DECOMPOSE_MAX_STATIONS})"
        )));
    }
    let nk = instance.num_scenarios();
    let rho = instance.probabilities();
    let subs: Vec<MilpModel> = (0..nk)
        .map(|k| formulate(&instance.restrict_to_scenario(k), weights))
        .collect::<Result<_, _>>()?;

    let mut nodes = 0;
    let mut lp_iterations = 0;
    let mut trace = Vec::new();
    let mut best_bound = f64::NEG_INFINITY;
    let mut best: Option<(f64, Vec<bool>, Vec<Vec<f64>>)> = None;
    for mask in 0u32..(1 << ni) {
        if mask.count_ones() as usize > instance.config.n_max_stations {
            continue;
        }
        let open: Vec<bool> = (0..ni).map(|i| mask & (1 << i) != 0).collect();
        let fixed = weights.k2 * instance.fixed_cost(&open);
        let mut total = -fixed;
        let mut bound = -fixed;
        let mut complete = true;
        let mut values = Vec::with_capacity(nk);
        for (k, sub) in subs.iter().enumerate() {
            let mut problem = sub.problem.clone();
            for (&j, &x) in sub.x.iter().zip(&open) {
                let b = if x { 1.0 } else { 0.0 };
                problem.columns[j].lower = b;
                problem.columns[j].upper = b;
            }
            let mut sub_options = options.clone();
            sub_options.time_limit = options.time_limit.map(|t| t.saturating_sub(start.elapsed()));
            let r = solve_milp(&problem, &sub_options)?;
            nodes += r.stats.nodes;
            lp_iterations += r.stats.lp_iterations;
            trace.extend(r.trace);
            let sub_bound = if r.stats.best_bound.is_finite() { r.stats.best_bound } else { f64::INFINITY };
            bound += rho[k] * (sub_bound + fixed);
            if r.values.is_empty() {
                // No incumbent; the empty assignment is always feasible so
                // this only happens at a limit.
                complete = false;
                continue;
            }
            total += rho[k] * (r.objective + fixed);
            values.push(r.values);
        }
        best_bound = best_bound.max(bound);
        if complete && best.as_ref().is_none_or(|(b, _, _)| total > *b) {
            best = Some((total, open, values));
        }
    }

    let wall_time = start.elapsed();
    let Some((objective, open, sub_values)) = best else {
        // Leaving everything uncovered is feasible, so only a limit gets here.
        return Ok(SolveOutcome {
            solution: Solution {
                status: SolveStatus::GapLimit,
                ..Solution::infeasible(model)
            },
            stats: SolveStats {
                nodes,
                lp_iterations,
                best_bound,
                incumbent: None,
                wall_time,
                bound_history: vec![best_bound],
            },
            trace,
        });
    };

    let mut values = vec![0.0; model.num_columns()];
    for (&j, &x) in model.x.iter().zip(&open) {
        values[j] = if x { 1.0 } else { 0.0 };
    }
    let copy = |values: &mut Vec<f64>, from: Option<usize>, to: Option<usize>, sub: &[f64]| {
        if let (Some(f), Some(t)) = (from, to) {
            values[t] = sub[f];
        }
    };
    for (k, (sub, sv)) in subs.iter().zip(&sub_values).enumerate() {
        for (o, per_station) in sub.y[0].iter().enumerate() {
            for (i, &y) in per_station.iter().enumerate() {
                copy(&mut values, y, model.y[k][o][i], sv);
                for (r, &z) in sub.z[0][o][i].iter().enumerate() {
                    copy(&mut values, z, model.z[k][o][i][r], sv);
                }
            }
            values[model.t[k][o]] = sv[sub.t[0][o]];
        }
        for (i, row) in sub.a[0].iter().enumerate() {
            for (j, per_resource) in row.iter().enumerate() {
                for (r, &a) in per_resource.iter().enumerate() {
                    copy(&mut values, a, model.a[k][i][j][r], sv);
                }
            }
        }
    }
    let best_bound = best_bound.max(objective);
    let status = if best_bound - objective > options.rel_gap_tol * objective.abs().max(1.0) {
        SolveStatus::GapLimit
    } else {
        SolveStatus::Optimal
    };
    let solution = decode(model, &values, Some(objective), status)?;
    Ok(SolveOutcome {
        solution,
        stats: SolveStats {
            nodes,
            lp_iterations,
            best_bound,
            incumbent: Some(objective),
            wall_time,
            bound_history: vec![best_bound],
        },
        trace,
    })
}

/// Limits on the instances [`enumerate_oracle`] accepts.
pub const ORACLE_MAX_STATIONS: usize = 3;
pub const ORACLE_MAX_SPILLS: usize = 4;
pub const ORACLE_MAX_SCENARIOS: usize = 3;
pub const ORACLE_MAX_COMBINATIONS: u64 = 1 << 24;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleResult {
    pub objective: f64,
    pub open: Vec<bool>,
    /// Best objective over station sets other than `open`.
    pub runner_up: Option<f64>,
    pub lp_solves: usize,
    pub solution: Solution,
}

impl OracleResult {
    /// True when every other station set is worse by more than `margin`
    /// relative to `max(1, |objective|)`.
    pub fn is_unique(&self, margin: f64) -> bool {
        self.runner_up
            .is_none_or(|r| r < self.objective - margin * self.objective.abs().max(1.0))
    }
}

struct ScenarioEnumerator {
    model: MilpModel,
    lp: DualSimplex,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ScenarioEnumerator {
    fn new(instance: &ProblemInstance, k: usize, weights: &Weights) -> Result<Self, SolveError> {
        let model = formulate(&instance.restrict_to_scenario(k), weights)?;
        let lp = DualSimplex::new(&model.problem, LpOptions::default())?;
        let lower = model.problem.lower_bounds();
        let upper = model.problem.upper_bounds();
        Ok(ScenarioEnumerator { model, lp, lower, upper })
    }

    /// Best single-scenario objective for a fixed station set, with the
    /// spill-to-station choice that attains it.
    fn best(&mut self, open: &[bool], lp_solves: &mut usize) -> Result<(f64, Vec<Option<usize>>), SolveError> {
        let no = self.model.t[0].len();
        for (&j, &x) in self.model.x.iter().zip(open) {
            let b = if x { 1.0 } else { 0.0 };
            self.lower[j] = b;
            self.upper[j] = b;
        }
        let choices: Vec<Vec<Option<usize>>> = (0..no)
            .map(|o| {
                let mut c = vec![None];
                c.extend(
                    self.model.y[0][o]
                        .iter()
                        .enumerate()
                        .filter(|(i, y)| y.is_some() && open[*i])
                        .map(|(i, _)| Some(i)),
                );
                c
            })
            .collect();
        let mut pick = vec![0usize; no];
        let mut best: Option<(f64, Vec<Option<usize>>)> = None;
        loop {
            for o in 0..no {
                let chosen = choices[o][pick[o]];
                for (i, y) in self.model.y[0][o].iter().enumerate() {
                    if let Some(j) = *y {
                        let v = if chosen == Some(i) { 1.0 } else { 0.0 };
                        self.lower[j] = v;
                        self.upper[j] = v;
                    }
                }
            }
            self.lp.set_bounds(&self.lower, &self.upper)?;
            let r = self.lp.solve()?;
            *lp_solves += 1;
            if r.status == LpStatus::Optimal && best.as_ref().is_none_or(|(b, _)| r.objective > *b) {
                best = Some((r.objective, pick.iter().enumerate().map(|(o, &p)| choices[o][p]).collect()));
            }
            // Odometer over the per-spill choices.
            let mut o = 0;
            while o < no {
                pick[o] += 1;
                if pick[o] < choices[o].len() {
                    break;
                }
                pick[o] = 0;
                o += 1;
            }
            if o == no {
                break;
            }
        }
        // Leaving every spill uncovered is always feasible.
        best.ok_or(SolveError::Milp(MilpError::SingularBasis))
    }
}

/// Exhaustive optimum for tiny instances.
///
/// Every station set within the budget is tried; for each, scenarios are
/// independent, so each scenario's assignment choices are enumerated and
/// the remaining continuous problem is solved as an LP.
pub fn enumerate_oracle(instance: &ProblemInstance, weights: &Weights) -> Result<OracleResult, SolveError> {
    let ni = instance.num_stations();
    let no = instance.num_spills();
    let nk = instance.num_scenarios();
    if ni > ORACLE_MAX_STATIONS || no > ORACLE_MAX_SPILLS || nk > ORACLE_MAX_SCENARIOS {
        return Err(SolveError::TooLarge(format!(
            "{ni} stations, {no} spills, {nk} scenarios (limits {ORACLE_MAX_STATIONS}, {ORACLE_MAX_SPILLS}, {ORACLE_MAX_SCENARIOS})"
        )));
    }
    let eligible = instance.eligible_stations();
    let per_scenario: u64 = eligible.iter().map(|e| 1 + e.len() as u64).product();
    let combos = (1u64 << ni) * per_scenario * nk as u64;
    if combos > ORACLE_MAX_COMBINATIONS {
        return Err(SolveError::TooLarge(format!("{combos} assignments to enumerate")));
    }

    let mut subs: Vec<ScenarioEnumerator> = (0..nk)
        .map(|k| ScenarioEnumerator::new(instance, k, weights))
        .collect::<Result<_, _>>()?;
    let mut lp_solves = 0;
    let mut best: Option<(f64, Vec<bool>, Vec<Vec<Option<usize>>>)> = None;
    let mut runner_up: Option<f64> = None;
    for mask in 0u32..(1 << ni) {
        if mask.count_ones() as usize > instance.config.n_max_stations {
            continue;
        }
        let open: Vec<bool> = (0..ni).map(|i| mask & (1 << i) != 0).collect();
        let fixed = weights.k2 * instance.fixed_cost(&open);
        let mut total = -fixed;
        let mut picks = Vec::with_capacity(nk);
        for (k, sub) in subs.iter_mut().enumerate() {
            let (value, pick) = sub.best(&open, &mut lp_solves)?;
            total += instance.scenarios[k].probability * (value + fixed);
            picks.push(pick);
        }
        match &best {
            Some((b, _, _)) if total <= *b => {
                runner_up = Some(runner_up.map_or(total, |r: f64| r.max(total)));
            }
            _ => {
                if let Some((b, _, _)) = &best {
                    runner_up = Some(runner_up.map_or(*b, |r: f64| r.max(*b)));
                }
                best = Some((total, open, picks));
            }
        }
    }
    let (objective, open, picks) = best.expect("the empty station set is always enumerated");

    // Rebuild the full recourse at the optimum for a decoded solution.
    let mut model = formulate(instance, weights)?;
    model.fix_first_stage(&open);
    for (k, pick) in picks.iter().enumerate() {
        for (o, chosen) in pick.iter().enumerate() {
            for (i, y) in model.y[k][o].iter().enumerate() {
                if let Some(j) = *y {
                    let v = if *chosen == Some(i) { 1.0 } else { 0.0 };
                    model.problem.columns[j].lower = v;
                    model.problem.columns[j].upper = v;
                }
            }
        }
    }
    let mut lp = DualSimplex::new(&model.problem, LpOptions::default())?;
    let r = lp.solve()?;
    lp_solves += 1;
    let solution = decode(&model, &r.values, None, SolveStatus::Optimal)?;
    Ok(OracleResult {
        objective,
        open,
        runner_up,
        lp_solves,
        solution,
    })
}
