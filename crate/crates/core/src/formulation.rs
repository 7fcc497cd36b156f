//! Sparse MILP construction and decoding.

use std::fmt;

use serde::{Deserialize, Serialize};
use spillopt_milp::{MilpStatus, Problem, RowSense, Sense};
use thiserror::Error;

use crate::model::{normalize_coverage_terms, ModelError, ProblemInstance, Weights};

/// Integrality residual accepted when decoding binaries.
pub const INTEGRALITY_TOL: f64 = 1e-6;
/// Relative tolerance between solver and recomputed objective.
pub const OBJECTIVE_TOL: f64 = 1e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormulationError {
    #[error("column {column} has fractional value {value}")]
    IntegralityError { column: String, value: f64 },
    #[error("solver objective {solver} differs from recomputed {recomputed}")]
    ObjectiveMismatch { solver: f64, recomputed: f64 },
    #[error("value vector has {got} entries, model has {expected} columns")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VarKey {
    X { station: usize },
    Y { station: usize, spill: usize, scenario: usize },
    Z { station: usize, spill: usize, scenario: usize, resource: usize },
    A { from: usize, to: usize, scenario: usize, resource: usize },
    T { spill: usize, scenario: usize },
}

impl fmt::Display for VarKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            VarKey::X { station } => write!(f, "X[{station}]"),
            VarKey::Y { station, spill, scenario } => write!(f, "Y[{station},{spill},{scenario}]"),
            VarKey::Z { station, spill, scenario, resource } => {
                write!(f, "Z[{station},{spill},{scenario},{resource}]")
            }
            VarKey::A { from, to, scenario, resource } => write!(f, "A[{from},{to},{scenario},{resource}]"),
            VarKey::T { spill, scenario } => write!(f, "T[{spill},{scenario}]"),
        }
    }
}

/// Spill-scenario pair that no eligible station can reach in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfeasibleData {
    pub spill: usize,
    pub scenario: usize,
}

/// The MILP plus index maps from domain keys to columns.
#[derive(Debug, Clone)]
pub struct MilpModel {
    pub problem: Problem,
    pub keys: Vec<VarKey>,
    pub weights: Weights,
    /// Coverage and cost contribution per column; the objective
    /// coefficient is `k1 * coverage - k2 * cost`.
    pub coverage_coef: Vec<f64>,
    pub cost_coef: Vec<f64>,
    pub x: Vec<usize>,
    /// `y[k][o][i]`
    pub y: Vec<Vec<Vec<Option<usize>>>>,
    /// `z[k][o][i][r]`, present exactly where `y` is.
    pub z: Vec<Vec<Vec<Vec<Option<usize>>>>>,
    /// `a[k][i][j][r]`, absent on the diagonal.
    pub a: Vec<Vec<Vec<Vec<Option<usize>>>>>,
    /// `t[k][o]`
    pub t: Vec<Vec<usize>>,
    pub infeasible_data: Vec<InfeasibleData>,
}

struct Builder {
    problem: Problem,
    keys: Vec<VarKey>,
    coverage: Vec<f64>,
    cost: Vec<f64>,
    weights: Weights,
}

impl Builder {
    fn column(&mut self, key: VarKey, upper: f64, integer: bool, coverage: f64, cost: f64) -> usize {
        let obj = self.weights.k1 * coverage - self.weights.k2 * cost;
        let j = self.problem.add_column(key.to_string(), 0.0, upper, integer, obj);
        self.keys.push(key);
        self.coverage.push(coverage);
        self.cost.push(cost);
        j
    }
}

/// Builds the two-stage model for `instance` under `weights`.
pub fn formulate(instance: &ProblemInstance, weights: &Weights) -> Result<MilpModel, ModelError> {
    weights.validate()?;
    let ni = instance.num_stations();
    let no = instance.num_spills();
    let nk = instance.num_scenarios();
    let nr = instance.num_resources();
    let cfg = &instance.config;
    let tau = cfg.tau_max;
    let unit = cfg.cost_unit;
    let terms = normalize_coverage_terms(instance);
    let eligible = instance.eligible_stations();

    let mut b = Builder {
        problem: Problem::new("spill_response", Sense::Maximize),
        keys: Vec::new(),
        coverage: Vec::new(),
        cost: Vec::new(),
        weights: *weights,
    };

    let x: Vec<usize> = (0..ni)
        .map(|i| b.column(VarKey::X { station: i }, 1.0, true, 0.0, instance.stations[i].opening_cost / unit))
        .collect();

    let mut y = vec![vec![vec![None; ni]; no]; nk];
    let mut z = vec![vec![vec![vec![None; nr]; ni]; no]; nk];
    let mut a = vec![vec![vec![vec![None; nr]; ni]; ni]; nk];
    let mut t = vec![vec![0usize; no]; nk];
    let mut infeasible_data = Vec::new();

    for k in 0..nk {
        let sc = &instance.scenarios[k];
        let rho = sc.probability;
        for o in 0..no {
            let gain = rho * (weights.omega1 * terms.v_hat[k][o] + weights.omega2 * terms.eta_hat[k][o]);
            for &i in &eligible[o] {
                let yj = b.column(VarKey::Y { station: i, spill: o, scenario: k }, 1.0, true, gain, 0.0);
                y[k][o][i] = Some(yj);
                for r in 0..nr {
                    let cap = sc.demand[o][r].min(instance.stations[i].inventory[r]);
                    let dc = rho * instance.derived.deploy_cost[i][o] / unit;
                    let key = VarKey::Z { station: i, spill: o, scenario: k, resource: r };
                    z[k][o][i][r] = Some(b.column(key, cap, false, 0.0, dc));
                }
            }
            if !eligible[o].is_empty() && eligible[o].iter().all(|&i| instance.arrival_time(i, o, k) > tau) {
                infeasible_data.push(InfeasibleData { spill: o, scenario: k });
            }
        }
        for i in 0..ni {
            for j in 0..ni {
                if i == j {
                    continue;
                }
                for r in 0..nr {
                    let tc = rho * instance.derived.transfer_cost[i][j] / unit;
                    let key = VarKey::A { from: i, to: j, scenario: k, resource: r };
                    a[k][i][j][r] = Some(b.column(key, instance.stations[i].inventory[r], false, 0.0, tc));
                }
            }
        }
        for o in 0..no {
            let key = VarKey::T { spill: o, scenario: k };
            t[k][o] = b.column(key, tau, false, -rho * weights.omega3 / tau, 0.0);
        }
    }

    let p = &mut b.problem;
    // Assignments only to open stations.
    for k in 0..nk {
        for o in 0..no {
            for i in 0..ni {
                if let Some(yj) = y[k][o][i] {
                    p.add_row(format!("assign_open[{i},{o},{k}]"), vec![(yj, 1.0), (x[i], -1.0)], RowSense::Le, 0.0);
                }
            }
        }
    }
    p.add_row(
        "station_budget",
        x.iter().map(|&j| (j, 1.0)).collect(),
        RowSense::Le,
        cfg.n_max_stations as f64,
    );
    for k in 0..nk {
        let sc = &instance.scenarios[k];
        for o in 0..no {
            let ys: Vec<(usize, f64)> = y[k][o].iter().flatten().map(|&j| (j, 1.0)).collect();
            if ys.is_empty() {
                continue;
            }
            p.add_row(format!("single_server[{o},{k}]"), ys.clone(), RowSense::Le, 1.0);
            for r in 0..nr {
                let d = sc.demand[o][r];
                let mut coeffs: Vec<(usize, f64)> = Vec::new();
                for i in 0..ni {
                    if let (Some(zj), Some(yj)) = (z[k][o][i][r], y[k][o][i]) {
                        // Deployment needs an assignment and cannot exceed
                        // either the demand or the station's own stock.
                        let cap = d.min(instance.stations[i].inventory[r]);
                        p.add_row(
                            format!("deploy_cap[{i},{o},{k},{r}]"),
                            vec![(zj, 1.0), (yj, -cap)],
                            RowSense::Le,
                            0.0,
                        );
                        coeffs.push((zj, 1.0));
                        coeffs.push((yj, -d));
                    }
                }
                p.add_row(format!("demand[{o},{k},{r}]"), coeffs, RowSense::Ge, 0.0);
            }
            for &i in &eligible[o] {
                let yj = y[k][o][i].expect("eligible pair has a Y column");
                p.add_row(
                    format!("arrive_after[{i},{o},{k}]"),
                    vec![(t[k][o], 1.0), (yj, -instance.arrival_time(i, o, k))],
                    RowSense::Ge,
                    0.0,
                );
            }
        }
        for o in 0..no {
            let mut coeffs = vec![(t[k][o], 1.0)];
            coeffs.extend(y[k][o].iter().flatten().map(|&j| (j, -tau)));
            p.add_row(format!("arrive_window[{o},{k}]"), coeffs, RowSense::Le, 0.0);
        }
        for i in 0..ni {
            for r in 0..nr {
                let mut coeffs: Vec<(usize, f64)> = (0..no).filter_map(|o| z[k][o][i][r]).map(|j| (j, 1.0)).collect();
                for j in 0..ni {
                    if let Some(out) = a[k][i][j][r] {
                        coeffs.push((out, 1.0));
                    }
                    if let Some(inc) = a[k][j][i][r] {
                        coeffs.push((inc, -1.0));
                    }
                }
                p.add_row(
                    format!("balance[{i},{k},{r}]"),
                    coeffs,
                    RowSense::Le,
                    instance.stations[i].inventory[r],
                );
            }
        }
        for i in 0..ni {
            for j in 0..ni {
                for r in 0..nr {
                    if let Some(aj) = a[k][i][j][r] {
                        let cap = instance.stations[i].inventory[r];
                        p.add_row(format!("send_gate[{i},{j},{k},{r}]"), vec![(aj, 1.0), (x[i], -cap)], RowSense::Le, 0.0);
                        p.add_row(format!("recv_gate[{i},{j},{k},{r}]"), vec![(aj, 1.0), (x[j], -cap)], RowSense::Le, 0.0);
                    }
                }
            }
        }
    }

    Ok(MilpModel {
        problem: b.problem,
        keys: b.keys,
        weights: *weights,
        coverage_coef: b.coverage,
        cost_coef: b.cost,
        x,
        y,
        z,
        a,
        t,
        infeasible_data,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    GapLimit,
}

impl From<MilpStatus> for SolveStatus {
    fn from(s: MilpStatus) -> Self {
        match s {
            MilpStatus::Optimal => SolveStatus::Optimal,
            MilpStatus::Infeasible => SolveStatus::Infeasible,
            MilpStatus::GapLimit => SolveStatus::GapLimit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    pub scenario: usize,
    pub spill: usize,
    pub station: usize,
    pub resource: usize,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transfer {
    pub scenario: usize,
    pub from: usize,
    pub to: usize,
    pub resource: usize,
    pub amount: f64,
}

/// Decoded first- and second-stage decisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub status: SolveStatus,
    pub objective: f64,
    pub coverage_term: f64,
    pub cost_term: f64,
    pub open: Vec<bool>,
    /// `assignment[k][o]`: serving station, if covered.
    pub assignment: Vec<Vec<Option<usize>>>,
    /// `arrival[k][o]` in hours.
    pub arrival: Vec<Vec<f64>>,
    pub deployments: Vec<Deployment>,
    pub transfers: Vec<Transfer>,
    /// Raw column values with binaries rounded.
    #[serde(skip)]
    pub values: Vec<f64>,
}

impl Solution {
    /// False when a limit stopped the search before any feasible point.
    pub fn has_incumbent(&self) -> bool {
        self.objective.is_finite()
    }

    /// Selected stations as 0-based indices.
    pub fn selected(&self) -> Vec<usize> {
        self.open.iter().enumerate().filter(|(_, &x)| x).map(|(i, _)| i).collect()
    }

    pub fn stations_mask(&self) -> u64 {
        self.open
            .iter()
            .enumerate()
            .filter(|(_, &x)| x)
            .fold(0, |m, (i, _)| m | (1u64 << i))
    }

    pub fn total_deployment(&self) -> f64 {
        self.deployments.iter().map(|d| d.amount).sum()
    }

    /// Empty solution for an infeasible model.
    pub fn infeasible(model: &MilpModel) -> Self {
        let nk = model.t.len();
        let no = model.t.first().map_or(0, Vec::len);
        Solution {
            status: SolveStatus::Infeasible,
            objective: f64::NEG_INFINITY,
            coverage_term: 0.0,
            cost_term: 0.0,
            open: vec![false; model.x.len()],
            assignment: vec![vec![None; no]; nk],
            arrival: vec![vec![0.0; no]; nk],
            deployments: Vec::new(),
            transfers: Vec::new(),
            values: Vec::new(),
        }
    }
}

/// Amounts at or below this are dropped from deployment and transfer lists.
const REPORT_EPS: f64 = 1e-9;

impl MilpModel {
    pub fn num_columns(&self) -> usize {
        self.problem.num_columns()
    }

    /// Counts of `(X, Y, Z, A, T)` columns.
    pub fn column_counts(&self) -> [usize; 5] {
        let mut c = [0; 5];
        for k in &self.keys {
            let slot = match k {
                VarKey::X { .. } => 0,
                VarKey::Y { .. } => 1,
                VarKey::Z { .. } => 2,
                VarKey::A { .. } => 3,
                VarKey::T { .. } => 4,
            };
            c[slot] += 1;
        }
        c
    }

    /// Fixes the station decisions to `open`.
    pub fn fix_first_stage(&mut self, open: &[bool]) {
        for (&j, &v) in self.x.iter().zip(open) {
            let b = if v { 1.0 } else { 0.0 };
            self.problem.columns[j].lower = b;
            self.problem.columns[j].upper = b;
        }
    }

    pub fn coverage_term(&self, values: &[f64]) -> f64 {
        self.coverage_coef.iter().zip(values).map(|(c, v)| c * v).sum()
    }

    pub fn cost_term(&self, values: &[f64]) -> f64 {
        self.cost_coef.iter().zip(values).map(|(c, v)| c * v).sum()
    }
}

/// Turns a solver vector into a [`Solution`].
///
/// Binaries within [`INTEGRALITY_TOL`] of an integer are rounded. When
/// `solver_objective` is given it must agree with the recomputed
/// objective to [`OBJECTIVE_TOL`] relative.
pub fn decode(
    model: &MilpModel,
    column_values: &[f64],
    solver_objective: Option<f64>,
    status: SolveStatus,
) -> Result<Solution, FormulationError> {
    let n = model.num_columns();
    if column_values.len() != n {
        return Err(FormulationError::LengthMismatch { expected: n, got: column_values.len() });
    }
    let mut values = column_values.to_vec();
    for (j, col) in model.problem.columns.iter().enumerate() {
        if col.integer {
            let r = values[j].round();
            if (values[j] - r).abs() > INTEGRALITY_TOL {
                return Err(FormulationError::IntegralityError { column: col.name.clone(), value: values[j] });
            }
            values[j] = r;
        }
    }
    let objective = model.problem.objective_value(&values);
    if let Some(s) = solver_objective {
        if (s - objective).abs() > OBJECTIVE_TOL * s.abs().max(1.0) {
            return Err(FormulationError::ObjectiveMismatch { solver: s, recomputed: objective });
        }
    }

    let open: Vec<bool> = model.x.iter().map(|&j| values[j] > 0.5).collect();
    let nk = model.t.len();
    let no = model.t.first().map_or(0, Vec::len);
    let mut assignment = vec![vec![None; no]; nk];
    let mut arrival = vec![vec![0.0; no]; nk];
    let mut deployments = Vec::new();
    let mut transfers = Vec::new();
    for k in 0..nk {
        for o in 0..no {
            arrival[k][o] = values[model.t[k][o]];
            for (i, yj) in model.y[k][o].iter().enumerate() {
                if let Some(yj) = *yj {
                    if values[yj] > 0.5 {
                        assignment[k][o] = Some(i);
                    }
                    for (r, zj) in model.z[k][o][i].iter().enumerate() {
                        let amount = zj.map_or(0.0, |zj| values[zj]);
                        if amount > REPORT_EPS {
                            deployments.push(Deployment { scenario: k, spill: o, station: i, resource: r, amount });
                        }
                    }
                }
            }
        }
        for (i, row) in model.a[k].iter().enumerate() {
            for (j, per_r) in row.iter().enumerate() {
                for (r, aj) in per_r.iter().enumerate() {
                    let amount = aj.map_or(0.0, |aj| values[aj]);
                    if amount > REPORT_EPS {
                        transfers.push(Transfer { scenario: k, from: i, to: j, resource: r, amount });
                    }
                }
            }
        }
    }

    Ok(Solution {
        status,
        objective,
        coverage_term: model.coverage_term(&values),
        cost_term: model.cost_term(&values),
        open,
        assignment,
        arrival,
        deployments,
        transfers,
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageStats {
    pub covered_per_scenario: Vec<usize>,
    pub covered_pairs: usize,
    pub total_pairs: usize,
    pub rate: f64,
    /// `utilization[i][r]`: peak over scenarios of outgoing use over stock.
    pub utilization: Vec<Vec<f64>>,
}

pub fn coverage_stats(solution: &Solution, instance: &ProblemInstance) -> CoverageStats {
    let ni = instance.num_stations();
    let nr = instance.num_resources();
    let nk = instance.num_scenarios();
    let covered_per_scenario: Vec<usize> = solution
        .assignment
        .iter()
        .map(|per_o| per_o.iter().filter(|a| a.is_some()).count())
        .collect();
    let covered_pairs: usize = covered_per_scenario.iter().sum();
    let total_pairs = instance.num_spills() * nk;
    let mut used = vec![vec![vec![0.0; nr]; ni]; nk];
    for d in &solution.deployments {
        used[d.scenario][d.station][d.resource] += d.amount;
    }
    for t in &solution.transfers {
        used[t.scenario][t.from][t.resource] += t.amount;
    }
    let utilization = (0..ni)
        .map(|i| {
            (0..nr)
                .map(|r| {
                    let stock = instance.stations[i].inventory[r];
                    if stock <= 0.0 {
                        return 0.0;
                    }
                    (0..nk).map(|k| used[k][i][r]).fold(0.0, f64::max) / stock
                })
                .collect()
        })
        .collect();
    CoverageStats {
        covered_per_scenario,
        covered_pairs,
        total_pairs,
        rate: if total_pairs == 0 { 0.0 } else { covered_pairs as f64 / total_pairs as f64 },
        utilization,
    }
}

/// Structural check that failed on a decoded solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantViolation {
    pub check: &'static str,
    pub detail: String,
}

impl fmt::Display for InvariantViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.check, self.detail)
    }
}

/// Absolute tolerance on quantities of magnitude `scale`.
fn tol(scale: f64) -> f64 {
    1e-6 * scale.abs().max(1.0)
}

/// Verifies the structural properties every optimal solution must have:
/// arrival-time tightness, full demand on covered spills, no flows through
/// closed stations, inventory balance, the station budget and the
/// objective split.
pub fn check_invariants(model: &MilpModel, solution: &Solution, instance: &ProblemInstance) -> Vec<InvariantViolation> {
    let mut out = Vec::new();
    let mut fail = |check: &'static str, detail: String| out.push(InvariantViolation { check, detail });
    let v = &solution.values;
    if v.len() != model.num_columns() {
        fail("length", format!("{} values for {} columns", v.len(), model.num_columns()));
        return out;
    }
    let nk = instance.num_scenarios();
    let no = instance.num_spills();
    let ni = instance.num_stations();
    let nr = instance.num_resources();
    let w = &model.weights;
    let tau = instance.config.tau_max;

    for k in 0..nk {
        let sc = &instance.scenarios[k];
        for o in 0..no {
            let served = solution.assignment[k][o];
            let t = v[model.t[k][o]];
            if w.k1 * w.omega3 > 0.0 {
                let expected = served.map_or(0.0, |i| instance.arrival_time(i, o, k));
                if (t - expected).abs() > tol(tau) {
                    fail("arrival_tightness", format!("T[{o},{k}] = {t}, expected {expected}"));
                }
            }
            if let Some(i) = served {
                if instance.arrival_time(i, o, k) > tau + tol(tau) {
                    fail("time_window", format!("spill {o} scenario {k} served late by station {i}"));
                }
            }
            for r in 0..nr {
                let delivered: f64 = (0..ni).filter_map(|i| model.z[k][o][i][r]).map(|j| v[j]).sum();
                let need = if served.is_some() { sc.demand[o][r] } else { 0.0 };
                if (delivered - need).abs() > tol(need) {
                    fail(
                        "demand_satisfaction",
                        format!("spill {o} scenario {k} resource {r}: delivered {delivered}, required {need}"),
                    );
                }
            }
            for i in 0..ni {
                if let Some(yj) = model.y[k][o][i] {
                    if v[yj] > 0.5 && v[model.x[i]] < 0.5 {
                        fail("phantom_station", format!("spill {o} scenario {k} assigned to closed station {i}"));
                    }
                }
            }
        }
        for i in 0..ni {
            for r in 0..nr {
                let stock = instance.stations[i].inventory[r];
                let mut net = 0.0;
                for o in 0..no {
                    if let Some(j) = model.z[k][o][i][r] {
                        net += v[j];
                    }
                }
                for j in 0..ni {
                    if let Some(col) = model.a[k][i][j][r] {
                        net += v[col];
                        if v[col] > tol(stock) && (v[model.x[i]] < 0.5 || v[model.x[j]] < 0.5) {
                            fail("phantom_transfer", format!("transfer {i}->{j} scenario {k} resource {r} touches a closed station"));
                        }
                    }
                    if let Some(col) = model.a[k][j][i][r] {
                        net -= v[col];
                    }
                }
                if net > stock + tol(stock) {
                    fail("inventory_balance", format!("station {i} scenario {k} resource {r}: net use {net} exceeds {stock}"));
                }
            }
        }
    }
    let opened = solution.open.iter().filter(|&&x| x).count();
    if opened > instance.config.n_max_stations {
        fail("station_budget", format!("{opened} stations open, limit {}", instance.config.n_max_stations));
    }
    let split = w.k1 * solution.coverage_term - w.k2 * solution.cost_term;
    if (split - solution.objective).abs() > tol(solution.objective) {
        fail("objective_decomposition", format!("objective {} vs k1*coverage - k2*cost {split}", solution.objective));
    }
    out
}
