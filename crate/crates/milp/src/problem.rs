use serde::{Deserialize, Serialize};

use crate::error::MilpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Maximize,
    Minimize,
}

impl Sense {
    /// +1 for maximization, -1 for minimization.
    pub fn sign(self) -> f64 {
        match self {
            Sense::Maximize => 1.0,
            Sense::Minimize => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowSense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub integer: bool,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub coeffs: Vec<(usize, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * values[j]).sum()
    }

    /// Signed amount by which `activity` breaks the row (0 when satisfied).
    pub fn violation(&self, activity: f64) -> f64 {
        match self.sense {
            RowSense::Le => (activity - self.rhs).max(0.0),
            RowSense::Ge => (self.rhs - activity).max(0.0),
            RowSense::Eq => (activity - self.rhs).abs(),
        }
    }
}

/// A linear program with optional integrality on some columns.
///
/// Rows are stored sparsely; every column must carry finite bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub name: String,
    pub sense: Sense,
    pub columns: Vec<Column>,
    pub rows: Vec<Row>,
}

impl Problem {
    pub fn new(name: impl Into<String>, sense: Sense) -> Self {
        Problem {
            name: name.into(),
            sense,
            columns: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_column(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        integer: bool,
        objective: f64,
    ) -> usize {
        self.columns.push(Column {
            name: name.into(),
            lower,
            upper,
            integer,
            objective,
        });
        self.columns.len() - 1
    }

    pub fn add_binary(&mut self, name: impl Into<String>, objective: f64) -> usize {
        self.add_column(name, 0.0, 1.0, true, objective)
    }

    /// Adds a row, merging duplicate column references and dropping zeros.
    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        mut coeffs: Vec<(usize, f64)>,
        sense: RowSense,
        rhs: f64,
    ) -> usize {
        coeffs.sort_by_key(|&(j, _)| j);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
        for (j, a) in coeffs {
            match merged.last_mut() {
                Some(last) if last.0 == j => last.1 += a,
                _ => merged.push((j, a)),
            }
        }
        merged.retain(|&(_, a)| a != 0.0);
        self.rows.push(Row {
            name: name.into(),
            coeffs: merged,
            sense,
            rhs,
        });
        self.rows.len() - 1
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.columns
            .iter()
            .zip(values)
            .map(|(c, &x)| c.objective * x)
            .sum()
    }

    pub fn lower_bounds(&self) -> Vec<f64> {
        self.columns.iter().map(|c| c.lower).collect()
    }

    pub fn upper_bounds(&self) -> Vec<f64> {
        self.columns.iter().map(|c| c.upper).collect()
    }

    pub fn integer_columns(&self) -> Vec<usize> {
        (0..self.columns.len())
            .filter(|&j| self.columns[j].integer)
            .collect()
    }

    /// Largest row or bound violation of `values`, each scaled by
    /// `1 + |rhs|` (or `1 + |bound|`).
    pub fn max_scaled_violation(&self, values: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for row in &self.rows {
            let v = row.violation(row.activity(values)) / (1.0 + row.rhs.abs());
            worst = worst.max(v);
        }
        for (c, &x) in self.columns.iter().zip(values) {
            worst = worst.max((c.lower - x).max(0.0) / (1.0 + c.lower.abs()));
            worst = worst.max((x - c.upper).max(0.0) / (1.0 + c.upper.abs()));
        }
        worst
    }

    /// Largest distance of an integer column from the nearest integer.
    pub fn max_integrality_residual(&self, values: &[f64]) -> f64 {
        self.columns
            .iter()
            .zip(values)
            .filter(|(c, _)| c.integer)
            .map(|(_, &x)| (x - x.round()).abs())
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<(), MilpError> {
        for (j, c) in self.columns.iter().enumerate() {
            if !c.lower.is_finite() || !c.upper.is_finite() {
                return Err(MilpError::UnboundedColumn(j));
            }
            if c.lower > c.upper {
                return Err(MilpError::InvalidBounds {
                    column: j,
                    lower: c.lower,
                    upper: c.upper,
                });
            }
            if !c.objective.is_finite() {
                return Err(MilpError::NonFinite(format!("objective of column {j}")));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(MilpError::NonFinite(format!("rhs of row {i}")));
            }
            for &(j, a) in &row.coeffs {
                if j >= self.columns.len() {
                    return Err(MilpError::BadColumnIndex { row: i, column: j });
                }
                if !a.is_finite() {
                    return Err(MilpError::NonFinite(format!("coefficient ({i}, {j})")));
                }
            }
        }
        Ok(())
    }
}
