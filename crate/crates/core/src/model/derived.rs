use serde::{Deserialize, Serialize};

use super::geo::{DistanceMetric, LatLon};

/// Distance, time and cost matrices computed from the raw inputs.
///
/// Index order: `[station][station]`, `[station][spill]`, and
/// `prep_time[station][spill][scenario]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedMatrices {
    pub distance: Vec<Vec<f64>>,
    pub distance_to_spill: Vec<Vec<f64>>,
    pub travel_time: Vec<Vec<f64>>,
    pub prep_time: Vec<Vec<Vec<f64>>>,
    pub transfer_cost: Vec<Vec<f64>>,
    pub deploy_cost: Vec<Vec<f64>>,
}

pub fn distance_matrix(points: &[LatLon], metric: DistanceMetric) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = metric.distance_km(points[i], points[j]);
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

pub fn cross_distances(from: &[LatLon], to: &[LatLon], metric: DistanceMetric) -> Vec<Vec<f64>> {
    from.iter()
        .map(|&a| to.iter().map(|&b| metric.distance_km(a, b)).collect())
        .collect()
}

/// `tc[i][j] = alpha * d[i][j]` off the diagonal, zero on it.
pub fn compute_transfer_costs(distance: &[Vec<f64>], alpha: f64) -> Vec<Vec<f64>> {
    distance
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, &d)| if i == j { 0.0 } else { alpha * d })
                .collect()
        })
        .collect()
}

/// Preparation time in hours: base delay plus per-unit setup, both in minutes.
pub fn compute_prep_time(base_delay_min: f64, units: &[f64], setup_times_min: &[f64]) -> f64 {
    let setup: f64 = units.iter().zip(setup_times_min).map(|(u, s)| u * s).sum();
    (base_delay_min + setup) / 60.0
}

/// Travel time in hours at a constant boat speed.
pub fn compute_travel_times(distance_to_spill: &[Vec<f64>], boat_speed_kmh: f64) -> Vec<Vec<f64>> {
    distance_to_spill
        .iter()
        .map(|row| row.iter().map(|d| d / boat_speed_kmh).collect())
        .collect()
}

pub fn compute_deploy_costs(distance_to_spill: &[Vec<f64>], rate: f64) -> Vec<Vec<f64>> {
    distance_to_spill
        .iter()
        .map(|row| row.iter().map(|d| rate * d).collect())
        .collect()
}
