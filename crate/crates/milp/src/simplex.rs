//! Bounded dual simplex over a dense tableau.
//!
//! Every row `i` gets a logical variable `l_i = a_i . x` whose bounds encode
//! the row sense, so the working system is `A x - l = 0` with box bounds on
//! every variable. Structural columns always have finite bounds, which makes
//! any basis dual feasible once each nonbasic variable sits at the bound that
//! matches the sign of its reduced cost. That is what lets branch-and-bound
//! change bounds and re-solve from whatever basis the previous node left.
//!
//! Internally the problem is a minimization; continuous columns are scaled to
//! unit range and rows to unit max coefficient.

use serde::{Deserialize, Serialize};

use crate::error::MilpError;
use crate::problem::{Problem, RowSense};

const NONBASIC: usize = usize::MAX;
const DROP_TOL: f64 = 1e-13;
const PIVOT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpOptions {
    /// Primal feasibility tolerance, relative to `1 + |bound|`.
    pub feas_tol: f64,
    /// Reduced-cost optimality tolerance.
    pub opt_tol: f64,
    /// Hard cap on pivots per `solve` call; `None` picks a size-based cap.
    pub max_iterations: Option<usize>,
    pub scale: bool,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            feas_tol: 1e-7,
            opt_tol: 1e-9,
            max_iterations: None,
            scale: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpResult {
    pub status: LpStatus,
    /// Objective in the problem's own sense (meaningful when optimal).
    pub objective: f64,
    pub values: Vec<f64>,
    pub iterations: usize,
    /// Objective rebuilt from row duals and bound duals of the final basis.
    pub dual_objective: f64,
    /// Marginal change of the objective per unit of row right-hand side.
    pub row_duals: Vec<f64>,
}

/// Solves the LP relaxation of `problem` (integrality is ignored).
pub fn solve_lp(problem: &Problem, options: &LpOptions) -> Result<LpResult, MilpError> {
    let mut lp = DualSimplex::new(problem, *options)?;
    lp.solve()
}

#[derive(Debug, Clone)]
pub struct DualSimplex {
    m: usize,
    n: usize,
    width: usize,
    /// Row-major `m x width` tableau `B^-1 [A | -I]`.
    tab: Vec<f64>,
    /// Scaled rows of the original matrix, for refactorization and residuals.
    rows: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    d: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    at_upper: Vec<bool>,
    basis: Vec<usize>,
    row_of: Vec<usize>,
    col_scale: Vec<f64>,
    row_scale: Vec<f64>,
    sign: f64,
    options: LpOptions,
    total_iterations: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Pricing {
    Largest,
    Bland,
}

impl DualSimplex {
    pub fn new(problem: &Problem, options: LpOptions) -> Result<Self, MilpError> {
        problem.validate()?;
        let m = problem.num_rows();
        let n = problem.num_columns();
        let width = n + m;

        let col_scale: Vec<f64> = problem
            .columns
            .iter()
            .map(|c| {
                if options.scale && !c.integer {
                    c.lower.abs().max(c.upper.abs()).max(1.0)
                } else {
                    1.0
                }
            })
            .collect();

        let mut rows = Vec::with_capacity(m);
        let mut row_scale = Vec::with_capacity(m);
        for row in &problem.rows {
            let scaled: Vec<(usize, f64)> = row
                .coeffs
                .iter()
                .map(|&(j, a)| (j, a * col_scale[j]))
                .collect();
            let biggest = scaled.iter().map(|&(_, a)| a.abs()).fold(0.0, f64::max);
            let r = if options.scale && biggest > 0.0 {
                1.0 / biggest
            } else {
                1.0
            };
            rows.push(scaled.into_iter().map(|(j, a)| (j, a * r)).collect());
            row_scale.push(r);
        }

        let sign = problem.sense.sign();
        let mut cost = vec![0.0; width];
        let mut lower = vec![0.0; width];
        let mut upper = vec![0.0; width];
        for (j, c) in problem.columns.iter().enumerate() {
            cost[j] = -sign * c.objective * col_scale[j];
            lower[j] = c.lower / col_scale[j];
            upper[j] = c.upper / col_scale[j];
        }
        for (i, row) in problem.rows.iter().enumerate() {
            let rhs = row.rhs * row_scale[i];
            let (lo, hi) = match row.sense {
                RowSense::Le => (f64::NEG_INFINITY, rhs),
                RowSense::Ge => (rhs, f64::INFINITY),
                RowSense::Eq => (rhs, rhs),
            };
            lower[n + i] = lo;
            upper[n + i] = hi;
        }

        let mut lp = DualSimplex {
            m,
            n,
            width,
            tab: Vec::new(),
            rows,
            cost,
            d: Vec::new(),
            lower,
            upper,
            x: vec![0.0; width],
            at_upper: vec![false; width],
            basis: (n..width).collect(),
            row_of: vec![NONBASIC; width],
            col_scale,
            row_scale,
            sign,
            options,
            total_iterations: 0,
        };
        for i in 0..m {
            lp.row_of[n + i] = i;
        }
        lp.load_identity_tableau();
        lp.d = lp.cost.clone();
        for j in 0..n {
            lp.place_nonbasic(j);
        }
        lp.recompute_basic_values();
        Ok(lp)
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    pub fn num_columns(&self) -> usize {
        self.n
    }

    /// Pivots performed over the lifetime of this solver.
    pub fn total_iterations(&self) -> usize {
        self.total_iterations
    }

    fn load_identity_tableau(&mut self) {
        let (m, n, w) = (self.m, self.n, self.width);
        self.tab.clear();
        self.tab.resize(m * w, 0.0);
        for (i, row) in self.rows.iter().enumerate() {
            let base = i * w;
            for &(j, a) in row {
                self.tab[base + j] = -a;
            }
            self.tab[base + n + i] = 1.0;
        }
    }

    /// Puts nonbasic `j` at the bound its reduced cost prefers.
    fn place_nonbasic(&mut self, j: usize) {
        let tol = self.options.opt_tol;
        let (lo, hi) = (self.lower[j], self.upper[j]);
        let up = if self.d[j] < -tol {
            true
        } else if self.d[j] > tol {
            false
        } else {
            self.at_upper[j]
        };
        let up = if up && hi.is_finite() {
            true
        } else {
            !lo.is_finite()
        };
        self.at_upper[j] = up;
        self.x[j] = if up { hi } else { lo };
    }

    fn recompute_basic_values(&mut self) {
        let active: Vec<(usize, f64)> = (0..self.width)
            .filter(|&k| self.row_of[k] == NONBASIC && self.x[k] != 0.0)
            .map(|k| (k, self.x[k]))
            .collect();
        for r in 0..self.m {
            let row = &self.tab[r * self.width..(r + 1) * self.width];
            let v: f64 = active.iter().map(|&(k, xk)| row[k] * xk).sum();
            self.x[self.basis[r]] = -v;
        }
    }

    fn recompute_reduced_costs(&mut self) {
        let w = self.width;
        let mut d = self.cost.clone();
        for r in 0..self.m {
            let cb = self.cost[self.basis[r]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.tab[r * w..(r + 1) * w];
            for (dk, &t) in d.iter_mut().zip(row) {
                *dk -= cb * t;
            }
        }
        for r in 0..self.m {
            d[self.basis[r]] = 0.0;
        }
        self.d = d;
    }

    /// Replaces the structural bounds (in the problem's own units).
    pub fn set_bounds(&mut self, lower: &[f64], upper: &[f64]) -> Result<(), MilpError> {
        if lower.len() != self.n || upper.len() != self.n {
            return Err(MilpError::BoundLength {
                expected: self.n,
                got: lower.len().min(upper.len()),
            });
        }
        for j in 0..self.n {
            let (lo, hi) = (lower[j], upper[j]);
            if !lo.is_finite() || !hi.is_finite() {
                return Err(MilpError::UnboundedColumn(j));
            }
            self.lower[j] = lo / self.col_scale[j];
            self.upper[j] = hi / self.col_scale[j];
            if self.row_of[j] == NONBASIC {
                self.place_nonbasic(j);
            }
        }
        self.recompute_basic_values();
        Ok(())
    }

    fn feas_tol(&self, bound: f64) -> f64 {
        self.options.feas_tol * (1.0 + bound.abs())
    }

    /// Most infeasible basic row, or under Bland the one whose basic variable
    /// has the smallest index.
    fn choose_leaving(&self, pricing: Pricing) -> Option<(usize, bool)> {
        let mut best: Option<(usize, bool)> = None;
        let mut best_score = 0.0;
        let mut best_var = usize::MAX;
        for r in 0..self.m {
            let k = self.basis[r];
            let v = self.x[k];
            let (lo, hi) = (self.lower[k], self.upper[k]);
            let (infeas, to_lower) = if v < lo - self.feas_tol(lo) {
                ((lo - v) / (1.0 + lo.abs()), true)
            } else if v > hi + self.feas_tol(hi) {
                ((v - hi) / (1.0 + hi.abs()), false)
            } else {
                continue;
            };
            match pricing {
                Pricing::Largest => {
                    if infeas > best_score {
                        best_score = infeas;
                        best = Some((r, to_lower));
                    }
                }
                Pricing::Bland => {
                    if k < best_var {
                        best_var = k;
                        best = Some((r, to_lower));
                    }
                }
            }
        }
        best
    }

    fn is_fixed(&self, k: usize) -> bool {
        self.upper[k] - self.lower[k] <= 0.0
    }

    /// Dual ratio test on row `r`. Returns the entering column.
    fn choose_entering(&self, r: usize, to_lower: bool, pricing: Pricing) -> Option<usize> {
        let w = self.width;
        let row = &self.tab[r * w..(r + 1) * w];
        let tol = self.options.opt_tol;
        let mut candidates: Vec<(usize, f64, f64)> = Vec::new();
        let mut harris = f64::INFINITY;
        for (k, &alpha) in row.iter().enumerate() {
            if alpha == 0.0 || self.row_of[k] != NONBASIC || self.is_fixed(k) {
                continue;
            }
            let s = if to_lower { -alpha } else { alpha };
            let up = self.at_upper[k];
            if (!up && s > PIVOT_TOL) || (up && s < -PIVOT_TOL) {
                let dk = if up { (-self.d[k]).max(0.0) } else { self.d[k].max(0.0) };
                let a = alpha.abs();
                harris = harris.min((dk + tol) / a);
                candidates.push((k, dk / a, a));
            }
        }
        match pricing {
            Pricing::Largest => {
                let mut best: Option<(usize, f64)> = None;
                for &(k, ratio, a) in &candidates {
                    if ratio <= harris && best.is_none_or(|(_, ba)| a > ba) {
                        best = Some((k, a));
                    }
                }
                best.map(|(k, _)| k)
            }
            Pricing::Bland => {
                let min_ratio = candidates
                    .iter()
                    .map(|c| c.1)
                    .fold(f64::INFINITY, f64::min);
                candidates
                    .iter()
                    .find(|c| c.1 <= min_ratio + 1e-12)
                    .map(|c| c.0)
            }
        }
    }

    /// Gauss-Jordan pivot of the tableau and reduced costs on `(r, q)`.
    fn pivot_tableau(&mut self, r: usize, q: usize) {
        let w = self.width;
        let alpha = self.tab[r * w + q];
        let inv = 1.0 / alpha;
        let mut nz: Vec<(usize, f64)> = Vec::new();
        {
            let prow = &mut self.tab[r * w..(r + 1) * w];
            for (k, v) in prow.iter_mut().enumerate() {
                if *v != 0.0 {
                    *v *= inv;
                    if v.abs() < DROP_TOL {
                        *v = 0.0;
                    } else {
                        nz.push((k, *v));
                    }
                }
            }
            prow[q] = 1.0;
        }
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.tab[i * w + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.tab[i * w..(i + 1) * w];
            for &(k, v) in &nz {
                let t = row[k] - f * v;
                row[k] = if t.abs() < DROP_TOL { 0.0 } else { t };
            }
            row[q] = 0.0;
        }
        let dq = self.d[q];
        if dq != 0.0 {
            for &(k, v) in &nz {
                self.d[k] -= dq * v;
            }
        }
        self.d[q] = 0.0;
        let leaving = self.basis[r];
        self.basis[r] = q;
        self.row_of[q] = r;
        self.row_of[leaving] = NONBASIC;
    }

    /// Moves nonbasic `q` by `delta`, updating basic values along its column.
    fn shift_nonbasic(&mut self, q: usize, delta: f64) {
        if delta == 0.0 {
            return;
        }
        let w = self.width;
        for i in 0..self.m {
            let t = self.tab[i * w + q];
            if t != 0.0 {
                self.x[self.basis[i]] -= t * delta;
            }
        }
        self.x[q] += delta;
    }

    fn internal_objective(&self) -> f64 {
        self.cost.iter().zip(&self.x).map(|(c, x)| c * x).sum()
    }

    fn iteration_cap(&self) -> usize {
        self.options
            .max_iterations
            .unwrap_or_else(|| 10_000.max(50 * (self.m + self.width)))
    }

    /// Runs dual simplex from the current basis, with primal clean-up pivots
    /// whenever drift leaves a nonbasic reduced cost on the wrong side.
    pub fn solve(&mut self) -> Result<LpResult, MilpError> {
        let cap = self.iteration_cap();
        let stall_limit = 5 * (self.m + self.n);
        let mut iterations = 0usize;
        let mut pricing = Pricing::Largest;
        let mut best_obj = f64::NEG_INFINITY;
        let mut stalled = 0usize;
        let mut refactored = false;

        'outer: loop {
            // Dual phase.
            while let Some((r, to_lower)) = self.choose_leaving(pricing) {
                if iterations >= cap {
                    return Err(MilpError::IterationLimit(cap));
                }
                let Some(q) = self.choose_entering(r, to_lower, pricing) else {
                    if !refactored {
                        self.refactor();
                        refactored = true;
                        continue 'outer;
                    }
                    return Ok(self.infeasible_result(iterations));
                };
                let leaving = self.basis[r];
                let bound = if to_lower {
                    self.lower[leaving]
                } else {
                    self.upper[leaving]
                };
                let alpha = self.tab[r * self.width + q];
                let delta = (self.x[leaving] - bound) / alpha;
                self.shift_nonbasic(q, delta);
                self.pivot_tableau(r, q);
                self.x[leaving] = bound;
                self.at_upper[leaving] = !to_lower;
                iterations += 1;
                self.total_iterations += 1;

                let obj = self.internal_objective();
                if obj > best_obj + 1e-12 * (1.0 + obj.abs()) {
                    best_obj = obj;
                    stalled = 0;
                } else {
                    stalled += 1;
                    if stalled > stall_limit {
                        pricing = Pricing::Bland;
                    }
                }
            }

            self.recompute_basic_values();
            if self.choose_leaving(pricing).is_some() {
                continue;
            }
            if self.primal_cleanup(&mut iterations, cap)? {
                continue;
            }
            if self.max_residual() > 1e-9 && !refactored {
                self.refactor();
                refactored = true;
                continue;
            }
            return Ok(self.optimal_result(iterations));
        }
    }

    /// Repairs dual infeasibilities left by round-off. Returns whether any
    /// change was made (the caller then re-runs the dual phase).
    fn primal_cleanup(&mut self, iterations: &mut usize, cap: usize) -> Result<bool, MilpError> {
        let tol = self.options.opt_tol.max(1e-9);
        let mut changed = false;
        loop {
            let mut entering = None;
            for k in 0..self.width {
                if self.row_of[k] != NONBASIC || self.is_fixed(k) {
                    continue;
                }
                let bad = if self.at_upper[k] {
                    self.d[k] > tol
                } else {
                    self.d[k] < -tol
                };
                if bad {
                    entering = Some(k);
                    break;
                }
            }
            let Some(q) = entering else {
                return Ok(changed);
            };
            changed = true;
            let other = if self.at_upper[q] {
                self.lower[q]
            } else {
                self.upper[q]
            };
            if other.is_finite() {
                // Flip to the other bound; basic values follow.
                let delta = other - self.x[q];
                self.shift_nonbasic(q, delta);
                self.x[q] = other;
                self.at_upper[q] = !self.at_upper[q];
                continue;
            }
            // Primal ratio test for a logical with one infinite bound.
            if *iterations >= cap {
                return Err(MilpError::IterationLimit(cap));
            }
            let dir = if self.at_upper[q] { -1.0 } else { 1.0 };
            let w = self.width;
            let mut step = f64::INFINITY;
            let mut block: Option<(usize, bool)> = None;
            for i in 0..self.m {
                let g = -self.tab[i * w + q] * dir;
                if g.abs() <= PIVOT_TOL {
                    continue;
                }
                let k = self.basis[i];
                let (lim, to_upper) = if g > 0.0 {
                    ((self.upper[k] - self.x[k]) / g, true)
                } else {
                    ((self.lower[k] - self.x[k]) / g, false)
                };
                if lim.is_finite() && lim.max(0.0) < step {
                    step = lim.max(0.0);
                    block = Some((i, to_upper));
                }
            }
            let Some((r, to_upper)) = block else {
                return Err(MilpError::Unbounded);
            };
            let leaving = self.basis[r];
            self.shift_nonbasic(q, dir * step);
            self.pivot_tableau(r, q);
            self.x[leaving] = if to_upper {
                self.upper[leaving]
            } else {
                self.lower[leaving]
            };
            self.at_upper[leaving] = to_upper;
            *iterations += 1;
            self.total_iterations += 1;
        }
    }

    /// Largest residual of `A x - l = 0` over the scaled rows.
    fn max_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, row) in self.rows.iter().enumerate() {
            let act: f64 = row.iter().map(|&(j, a)| a * self.x[j]).sum();
            let l = self.x[self.n + i];
            worst = worst.max((act - l).abs() / (1.0 + l.abs()));
        }
        worst
    }

    /// Rebuilds the tableau for the current basis from the original rows.
    fn refactor(&mut self) {
        let wanted: Vec<usize> = {
            let mut v: Vec<usize> = self
                .basis
                .iter()
                .copied()
                .filter(|&k| k < self.n)
                .collect();
            v.sort_unstable();
            v
        };
        let in_target: Vec<bool> = {
            let mut t = vec![false; self.width];
            for &k in &self.basis {
                t[k] = true;
            }
            t
        };
        self.load_identity_tableau();
        for k in 0..self.width {
            self.row_of[k] = NONBASIC;
        }
        for i in 0..self.m {
            self.basis[i] = self.n + i;
            self.row_of[self.n + i] = i;
        }
        self.d = self.cost.clone();
        let w = self.width;
        for q in wanted {
            let mut best: Option<(usize, f64)> = None;
            for r in 0..self.m {
                let b = self.basis[r];
                if b < self.n || in_target[b] {
                    continue;
                }
                let a = self.tab[r * w + q].abs();
                if a > 1e-9 && best.is_none_or(|(_, ba)| a > ba) {
                    best = Some((r, a));
                }
            }
            if let Some((r, _)) = best {
                self.pivot_tableau(r, q);
            }
        }
        self.recompute_reduced_costs();
        for k in 0..self.width {
            if self.row_of[k] == NONBASIC {
                if !self.at_upper[k] && !self.lower[k].is_finite() {
                    self.at_upper[k] = true;
                }
                if self.at_upper[k] && !self.upper[k].is_finite() {
                    self.at_upper[k] = false;
                }
                self.x[k] = if self.at_upper[k] {
                    self.upper[k]
                } else {
                    self.lower[k]
                };
            }
        }
        self.recompute_basic_values();
    }

    fn unscaled_values(&self) -> Vec<f64> {
        (0..self.n)
            .map(|j| {
                let v = self.x[j] * self.col_scale[j];
                if v == 0.0 {
                    0.0
                } else {
                    v
                }
            })
            .collect()
    }

    fn infeasible_result(&self, iterations: usize) -> LpResult {
        LpResult {
            status: LpStatus::Infeasible,
            objective: f64::NAN,
            values: self.unscaled_values(),
            iterations,
            dual_objective: f64::NAN,
            row_duals: vec![0.0; self.m],
        }
    }

    fn optimal_result(&self, iterations: usize) -> LpResult {
        let values = self.unscaled_values();
        let objective = -self.sign * self.internal_objective();

        // Row duals from the logical reduced costs, then structural reduced
        // costs rebuilt from the original rows (not the tableau).
        let pi: Vec<f64> = (0..self.m).map(|i| self.d[self.n + i]).collect();
        let mut dual = 0.0;
        for (i, &p) in pi.iter().enumerate() {
            if self.row_of[self.n + i] == NONBASIC {
                dual += p * self.x[self.n + i];
            }
        }
        let mut reduced = self.cost[..self.n].to_vec();
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, a) in row {
                reduced[j] -= pi[i] * a;
            }
        }
        for (j, &dj) in reduced.iter().enumerate() {
            if self.row_of[j] == NONBASIC {
                dual += dj * self.x[j];
            }
        }
        let row_duals = pi
            .iter()
            .zip(&self.row_scale)
            .map(|(&p, &r)| -self.sign * p * r)
            .collect();
        LpResult {
            status: LpStatus::Optimal,
            objective,
            values,
            iterations,
            dual_objective: -self.sign * dual,
            row_duals,
        }
    }
}
