use serde::{Deserialize, Serialize};

/// Ranges used to map spill volume and sensitivity onto [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub v_min: f64,
    pub v_max: f64,
    pub eta_min: f64,
    pub eta_max: f64,
    /// Hours; arrival times are divided by this inside the objective.
    pub t_scale: f64,
}

/// Min-max scaling; a degenerate range maps every value to 1.
pub fn min_max(value: f64, lo: f64, hi: f64) -> f64 {
    if hi - lo <= 0.0 {
        1.0
    } else {
        ((value - lo) / (hi - lo)).clamp(0.0, 1.0)
    }
}

pub fn range(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    values
        .into_iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Scales a whole population by its own range.
pub fn min_max_all(values: &[f64]) -> Vec<f64> {
    let (lo, hi) = range(values.iter().copied());
    values.iter().map(|&v| min_max(v, lo, hi)).collect()
}

impl NormalizationStats {
    pub fn from_pooled(volumes: &[f64], esi: &[f64], t_scale: f64) -> Self {
        let (v_min, v_max) = if volumes.is_empty() { (0.0, 0.0) } else { range(volumes.iter().copied()) };
        let (eta_min, eta_max) = if esi.is_empty() { (0.0, 0.0) } else { range(esi.iter().copied()) };
        NormalizationStats { v_min, v_max, eta_min, eta_max, t_scale }
    }

    pub fn volume(&self, v: f64) -> f64 {
        min_max(v, self.v_min, self.v_max)
    }

    pub fn esi(&self, eta: f64) -> f64 {
        min_max(eta, self.eta_min, self.eta_max)
    }
}

/// Normalized volume and sensitivity, indexed `[scenario][spill]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedTerms {
    pub v_hat: Vec<Vec<f64>>,
    pub eta_hat: Vec<Vec<f64>>,
}
