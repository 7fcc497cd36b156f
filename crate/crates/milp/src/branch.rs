//! Best-bound branch-and-bound with depth-first plunging.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::MilpError;
use crate::presolve::tighten_integer_bounds;
use crate::problem::Problem;
use crate::simplex::{DualSimplex, LpOptions, LpStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum BranchRule {
    #[default]
    MostFractional,
    PseudoCost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpOptions {
    pub rel_gap_tol: f64,
    pub int_tol: f64,
    pub feas_tol: f64,
    pub node_limit: usize,
    pub time_limit: Option<Duration>,
    pub branch_rule: BranchRule,
    /// Breaks ties between equally scored pseudo-cost candidates.
    pub seed: u64,
    /// Record one trace line per processed node.
    pub trace: bool,
}

impl Default for MilpOptions {
    fn default() -> Self {
        MilpOptions {
            rel_gap_tol: 1e-6,
            int_tol: 1e-6,
            feas_tol: 1e-7,
            node_limit: 1_000_000,
            time_limit: None,
            branch_rule: BranchRule::MostFractional,
            seed: 0,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    /// Stopped at the node or time limit; the incumbent may not be optimal.
    GapLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeTrace {
    pub node: usize,
    pub bound: f64,
    pub incumbent: Option<f64>,
}

impl std::fmt::Display for NodeTrace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.incumbent {
            Some(inc) => write!(f, "{} {:.9} {:.9}", self.node, self.bound, inc),
            None => write!(f, "{} {:.9} -", self.node, self.bound),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub nodes: usize,
    pub lp_iterations: usize,
    /// Best proven bound, in the problem's own sense.
    pub best_bound: f64,
    pub incumbent: Option<f64>,
    pub wall_time: Duration,
    /// Global bound after each processed node, as a maximization score.
    pub bound_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpResult {
    pub status: MilpStatus,
    pub objective: f64,
    pub values: Vec<f64>,
    pub stats: SolveStats,
    pub trace: Vec<NodeTrace>,
}

#[derive(Debug, Clone)]
struct Node {
    id: usize,
    /// Parent LP value as a maximization score.
    bound: f64,
    depth: usize,
    changes: Vec<(usize, f64, f64)>,
    /// Column branched on to create this node, the fractional part and
    /// whether this is the up child; feeds pseudo-costs.
    origin: Option<(usize, f64, bool)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

#[derive(Debug, Clone, Default)]
struct PseudoCosts {
    up_sum: Vec<f64>,
    up_n: Vec<u32>,
    down_sum: Vec<f64>,
    down_n: Vec<u32>,
}

impl PseudoCosts {
    fn new(n: usize) -> Self {
        PseudoCosts {
            up_sum: vec![0.0; n],
            up_n: vec![0; n],
            down_sum: vec![0.0; n],
            down_n: vec![0; n],
        }
    }

    fn record(&mut self, col: usize, up: bool, frac: f64, degradation: f64) {
        let unit = if up { 1.0 - frac } else { frac };
        if unit <= 1e-9 {
            return;
        }
        let per_unit = degradation.max(0.0) / unit;
        if up {
            self.up_sum[col] += per_unit;
            self.up_n[col] += 1;
        } else {
            self.down_sum[col] += per_unit;
            self.down_n[col] += 1;
        }
    }

    fn averages(sum: &[f64], n: &[u32]) -> f64 {
        let (s, c) = sum
            .iter()
            .zip(n)
            .filter(|(_, &c)| c > 0)
            .fold((0.0, 0u32), |(s, c), (&v, &k)| (s + v, c + k));
        if c == 0 {
            1.0
        } else {
            s / c as f64
        }
    }

    fn score(&self, col: usize, frac: f64, up_avg: f64, down_avg: f64) -> f64 {
        let up = if self.up_n[col] > 0 {
            self.up_sum[col] / self.up_n[col] as f64
        } else {
            up_avg
        };
        let down = if self.down_n[col] > 0 {
            self.down_sum[col] / self.down_n[col] as f64
        } else {
            down_avg
        };
        (down * frac).max(1e-6) * (up * (1.0 - frac)).max(1e-6)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

struct Search<'a> {
    options: &'a MilpOptions,
    lp: DualSimplex,
    root_lower: Vec<f64>,
    root_upper: Vec<f64>,
    int_cols: Vec<usize>,
    sign: f64,
    incumbent: Option<(f64, Vec<f64>)>,
    pseudo: PseudoCosts,
    trace: Vec<NodeTrace>,
    bound_history: Vec<f64>,
    global_bound: f64,
    gap_pruned_bound: f64,
    next_id: usize,
}

impl<'a> Search<'a> {
    fn gap_allowance(&self, incumbent: f64) -> f64 {
        self.options.rel_gap_tol * incumbent.abs().max(1.0)
    }

    fn prunable(&self, bound: f64) -> bool {
        match &self.incumbent {
            Some((inc, _)) => bound <= inc + self.gap_allowance(*inc),
            None => false,
        }
    }

    fn node_bounds(&self, changes: &[(usize, f64, f64)]) -> (Vec<f64>, Vec<f64>) {
        let mut lo = self.root_lower.clone();
        let mut hi = self.root_upper.clone();
        for &(j, l, u) in changes {
            lo[j] = l;
            hi[j] = u;
        }
        (lo, hi)
    }

    /// Solves the LP under the given bounds. Returns the maximization score
    /// and the values, or `None` when infeasible.
    fn solve_with(&mut self, lo: &[f64], hi: &[f64]) -> Result<Option<(f64, Vec<f64>)>, MilpError> {
        self.lp.set_bounds(lo, hi)?;
        let res = self.lp.solve()?;
        match res.status {
            LpStatus::Optimal => Ok(Some((self.sign * res.objective, res.values))),
            LpStatus::Infeasible => Ok(None),
            LpStatus::Unbounded => Err(MilpError::Unbounded),
        }
    }

    fn most_fractional(&self, values: &[f64]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for &j in &self.int_cols {
            let v = values[j];
            let frac = v - v.floor();
            let dist = frac.min(1.0 - frac);
            if dist > self.options.int_tol && best.is_none_or(|(_, _, bd)| dist > bd + 1e-12) {
                best = Some((j, v, dist));
            }
        }
        best.map(|(j, v, _)| (j, v))
    }

    fn pseudo_cost_choice(&self, values: &[f64]) -> Option<(usize, f64)> {
        let up_avg = PseudoCosts::averages(&self.pseudo.up_sum, &self.pseudo.up_n);
        let down_avg = PseudoCosts::averages(&self.pseudo.down_sum, &self.pseudo.down_n);
        let mut best: Option<(usize, f64, f64, u64)> = None;
        for &j in &self.int_cols {
            let v = values[j];
            let frac = v - v.floor();
            if frac.min(1.0 - frac) <= self.options.int_tol {
                continue;
            }
            let score = self.pseudo.score(j, frac, up_avg, down_avg);
            let tie = splitmix(self.options.seed ^ j as u64);
            let better = match best {
                None => true,
                Some((_, _, bs, bt)) => score > bs * (1.0 + 1e-9) || (score >= bs * (1.0 - 1e-9) && tie < bt),
            };
            if better {
                best = Some((j, v, score, tie));
            }
        }
        best.map(|(j, v, _, _)| (j, v))
    }

    /// Fixes every integer column to its rounded value and re-solves the
    /// continuous part. Gives clean values for a new incumbent and doubles as
    /// the rounding heuristic.
    fn polish(&mut self, lo: &[f64], hi: &[f64], values: &[f64]) -> Result<Option<(f64, Vec<f64>)>, MilpError> {
        let mut lo = lo.to_vec();
        let mut hi = hi.to_vec();
        for &j in &self.int_cols {
            let r = values[j].round().clamp(lo[j], hi[j]);
            lo[j] = r;
            hi[j] = r;
        }
        self.solve_with(&lo, &hi)
    }

    fn offer(&mut self, score: f64, values: Vec<f64>) {
        let better = match &self.incumbent {
            None => true,
            Some((inc, _)) => score > *inc + 1e-12 * inc.abs().max(1.0),
        };
        if better {
            self.incumbent = Some((score, values));
        }
    }

    fn record_bound(&mut self, open_max: f64) {
        let mut b = open_max;
        if let Some((inc, _)) = &self.incumbent {
            b = b.max(*inc);
        }
        self.global_bound = self.global_bound.min(b);
        self.bound_history.push(self.global_bound);
    }
}

/// Solves `problem` to the requested relative gap.
pub fn solve_milp(problem: &Problem, options: &MilpOptions) -> Result<MilpResult, MilpError> {
    let start = Instant::now();
    problem.validate()?;
    let lp_options = LpOptions {
        feas_tol: options.feas_tol,
        ..LpOptions::default()
    };
    let mut root_lower = problem.lower_bounds();
    let mut root_upper = problem.upper_bounds();
    let sign = problem.sense.sign();

    let infeasible = |stats_time: Duration, iters: usize| MilpResult {
        status: MilpStatus::Infeasible,
        objective: f64::NAN,
        values: Vec::new(),
        stats: SolveStats {
            nodes: 0,
            lp_iterations: iters,
            best_bound: f64::NAN,
            incumbent: None,
            wall_time: stats_time,
            bound_history: Vec::new(),
        },
        trace: Vec::new(),
    };

    if !tighten_integer_bounds(problem, &mut root_lower, &mut root_upper) {
        return Ok(infeasible(start.elapsed(), 0));
    }

    let mut search = Search {
        options,
        lp: DualSimplex::new(problem, lp_options)?,
        root_lower,
        root_upper,
        int_cols: problem.integer_columns(),
        sign,
        incumbent: None,
        pseudo: PseudoCosts::new(problem.num_columns()),
        trace: Vec::new(),
        bound_history: Vec::new(),
        global_bound: f64::INFINITY,
        gap_pruned_bound: f64::NEG_INFINITY,
        next_id: 1,
    };

    let mut heap: BinaryHeap<Node> = BinaryHeap::new();
    let mut current = Some(Node {
        id: 0,
        bound: f64::INFINITY,
        depth: 0,
        changes: Vec::new(),
        origin: None,
    });
    let mut nodes = 0usize;
    let mut limited = false;
    let mut root_done = false;

    loop {
        let node = match current.take() {
            Some(n) => n,
            None => match heap.pop() {
                Some(n) => n,
                None => break,
            },
        };
        if search.prunable(node.bound) {
            search.gap_pruned_bound = search.gap_pruned_bound.max(node.bound);
            // Heap is ordered by bound: everything left is prunable too.
            if let Some(rest) = heap.iter().map(|n| n.bound).reduce(f64::max) {
                search.gap_pruned_bound = search.gap_pruned_bound.max(rest);
            }
            heap.clear();
            continue;
        }
        if nodes >= options.node_limit
            || options.time_limit.is_some_and(|t| start.elapsed() >= t)
        {
            heap.push(node);
            limited = true;
            break;
        }
        nodes += 1;

        let (lo, hi) = search.node_bounds(&node.changes);
        let solved = search.solve_with(&lo, &hi)?;
        let Some((score, values)) = solved else {
            if !root_done {
                let iters = search.lp.total_iterations();
                return Ok(infeasible(start.elapsed(), iters));
            }
            let open = heap.peek().map_or(f64::NEG_INFINITY, |n| n.bound);
            search.record_bound(open);
            search.push_trace(node.id, f64::NEG_INFINITY, options);
            continue;
        };
        let score = score.min(node.bound);
        if let Some((col, frac, up)) = node.origin {
            search.pseudo.record(col, up, frac, node.bound - score);
        }

        if !root_done {
            root_done = true;
            // Rounding heuristic at the root.
            if let Some((s, v)) = search.polish(&lo, &hi, &values)? {
                search.offer(s, v);
            }
        }

        let branch = match options.branch_rule {
            BranchRule::MostFractional => search.most_fractional(&values),
            BranchRule::PseudoCost => search.pseudo_cost_choice(&values),
        };

        match branch {
            _ if search.prunable(score) => {
                search.gap_pruned_bound = search.gap_pruned_bound.max(score);
            }
            None => {
                // Integral within tolerance: polish and keep.
                match search.polish(&lo, &hi, &values)? {
                    Some((s, v)) => search.offer(s, v),
                    None => search.offer(score, values.clone()),
                }
            }
            Some((col, v)) => {
                let floor = v.floor();
                let frac = v - floor;
                let mut down = node.changes.clone();
                down.push((col, lo[col], floor));
                let mut up = node.changes.clone();
                up.push((col, floor + 1.0, hi[col]));
                let down_node = Node {
                    id: search.next_id,
                    bound: score,
                    depth: node.depth + 1,
                    changes: down,
                    origin: Some((col, frac, false)),
                };
                let up_node = Node {
                    id: search.next_id + 1,
                    bound: score,
                    depth: node.depth + 1,
                    changes: up,
                    origin: Some((col, frac, true)),
                };
                search.next_id += 2;
                // Plunge towards the nearer integer.
                let (dive, park) = if frac >= 0.5 {
                    (up_node, down_node)
                } else {
                    (down_node, up_node)
                };
                heap.push(park);
                current = Some(dive);
            }
        }

        let mut open = heap.peek().map_or(f64::NEG_INFINITY, |n| n.bound);
        if let Some(c) = &current {
            open = open.max(c.bound);
        }
        search.record_bound(open);
        search.push_trace(node.id, score, options);
    }

    let lp_iterations = search.lp.total_iterations();
    let wall_time = start.elapsed();
    let Some((inc_score, values)) = search.incumbent.take() else {
        // Every node infeasible, or limit hit before any incumbent.
        let mut r = infeasible(wall_time, lp_iterations);
        r.stats.nodes = nodes;
        if limited {
            r.status = MilpStatus::GapLimit;
        }
        return Ok(r);
    };

    let open_max = heap.iter().map(|n| n.bound).fold(f64::NEG_INFINITY, f64::max);
    let best_score = if limited {
        open_max.max(inc_score).max(search.gap_pruned_bound)
    } else {
        inc_score.max(search.gap_pruned_bound)
    }
    .min(search.global_bound.max(inc_score));
    let status = if limited && best_score - inc_score > search.gap_allowance(inc_score) {
        MilpStatus::GapLimit
    } else {
        MilpStatus::Optimal
    };
    let objective = problem.objective_value(&values);
    Ok(MilpResult {
        status,
        objective,
        values,
        stats: SolveStats {
            nodes,
            lp_iterations,
            best_bound: sign * best_score,
            incumbent: Some(objective),
            wall_time,
            bound_history: search.bound_history,
        },
        trace: search.trace,
    })
}

impl Search<'_> {
    fn push_trace(&mut self, node: usize, bound: f64, options: &MilpOptions) {
        if options.trace {
            self.trace.push(NodeTrace {
                node,
                bound: self.sign * bound,
                incumbent: self.incumbent.as_ref().map(|(s, _)| self.sign * s),
            });
        }
    }
}
