//! Domain types and instance construction.

mod derived;
mod geo;
mod normalize;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use derived::{
    compute_deploy_costs, compute_prep_time, compute_transfer_costs, compute_travel_times,
    cross_distances, distance_matrix, DerivedMatrices,
};
pub use geo::{equirectangular_km, haversine_km, DistanceMetric, LatLon, EARTH_RADIUS_KM};
pub use normalize::{min_max, min_max_all, NormalizationStats, NormalizedTerms};

/// Tolerance on the total scenario probability.
pub const PROBABILITY_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("empty set: {0}")]
    EmptySet(&'static str),
    #[error("scenario probabilities sum to {sum}, expected 1")]
    ProbabilityMassError { sum: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("negative or invalid parameter: {0}")]
    NegativeParameter(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("unknown id: {0}")]
    UnknownId(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceKind {
    Boom,
    Skimmer,
    Dispersant,
}

impl ResourceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ResourceKind::Boom => "boom",
            ResourceKind::Skimmer => "skimmer",
            ResourceKind::Dispersant => "dispersant",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "boom" => Some(ResourceKind::Boom),
            "skimmer" => Some(ResourceKind::Skimmer),
            "dispersant" => Some(ResourceKind::Dispersant),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceType {
    pub id: usize,
    pub name: String,
    pub kind: ResourceKind,
    /// Minutes per setup unit.
    pub setup_time_per_unit: f64,
    pub unit_cost: f64,
    /// Gallons recovered per unit per shift (skimmers only).
    pub capacity_per_unit: f64,
    /// Demand units per setup unit, e.g. 100 ft of boom per bundle.
    pub setup_unit_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub id: usize,
    pub name: String,
    pub lat: f64,
    pub lon: f64,
    /// Currency (not scaled by `cost_unit`).
    pub opening_cost: f64,
    /// Units on hand, one entry per resource.
    pub inventory: Vec<f64>,
    /// Minutes.
    pub base_delay: f64,
}

impl Station {
    pub fn position(&self) -> LatLon {
        LatLon::new(self.lat, self.lon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpillEvent {
    pub id: usize,
    pub lat: f64,
    pub lon: f64,
    /// Gallons.
    pub base_volume: f64,
    pub base_esi: f64,
}

impl SpillEvent {
    pub fn position(&self) -> LatLon {
        LatLon::new(self.lat, self.lon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Provenance {
    Deterministic,
    Sampled { seed: u64 },
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: usize,
    pub probability: f64,
    pub provenance: Provenance,
    pub spill_volume: Vec<f64>,
    pub spill_esi: Vec<f64>,
    /// `demand[spill][resource]` in resource units.
    pub demand: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub omega1: f64,
    pub omega2: f64,
    pub omega3: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Weights {
    /// Builds weights with `k2 = 1 - k1`, rounded to 12 decimals so grid
    /// values print cleanly.
    pub fn new(k1: f64, omega: [f64; 3]) -> Self {
        Weights {
            omega1: omega[0],
            omega2: omega[1],
            omega3: omega[2],
            k1,
            k2: ((1.0 - k1) * 1e12).round() / 1e12,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let all = [self.omega1, self.omega2, self.omega3, self.k1, self.k2];
        if all.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(ModelError::InvalidWeights(format!("{self} has a component outside [0, 1]")));
        }
        if (self.omega1 + self.omega2 + self.omega3 - 1.0).abs() > 1e-9 {
            return Err(ModelError::InvalidWeights(format!("omega components of {self} do not sum to 1")));
        }
        if (self.k1 + self.k2 - 1.0).abs() > 1e-9 {
            return Err(ModelError::InvalidWeights(format!("k1 + k2 of {self} is not 1")));
        }
        Ok(())
    }
}

impl Default for Weights {
    fn default() -> Self {
        Weights::new(0.9, [0.1, 0.8, 0.1])
    }
}

impl fmt::Display for Weights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "k1={} omega=({}, {}, {})",
            self.k1, self.omega1, self.omega2, self.omega3
        )
    }
}

/// Rule defining which station may serve which spill.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Eligibility {
    /// Travel time within the response window.
    TravelTime,
    Radius { km: f64 },
    /// Explicit `(spill id, station id)` pairs.
    Pairs { pairs: Vec<(usize, usize)> },
}

impl Default for Eligibility {
    fn default() -> Self {
        Eligibility::TravelTime
    }
}

fn default_cost_unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_max_stations: usize,
    /// Hours.
    pub tau_max: f64,
    /// km/h.
    pub boat_speed: f64,
    pub boom_ft_per_gal: f64,
    pub dispersant_ratio: f64,
    /// Gallons per skimmer per shift.
    pub skimmer_shift_capacity: f64,
    /// Currency per unit-km moved between stations.
    pub transfer_alpha: f64,
    /// Currency per unit-km deployed to a spill.
    pub deployment_rate: f64,
    #[serde(default)]
    pub eligibility: Eligibility,
    #[serde(default)]
    pub distance_metric: DistanceMetric,
    /// Currency per objective unit; every cost is divided by this.
    #[serde(default = "default_cost_unit")]
    pub cost_unit: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n_max_stations: 2,
            tau_max: 24.0,
            boat_speed: 1.85,
            boom_ft_per_gal: 10.0,
            dispersant_ratio: 1.0 / 50.0,
            skimmer_shift_capacity: 200.0,
            transfer_alpha: 1.723,
            deployment_rate: 1.0,
            eligibility: Eligibility::TravelTime,
            distance_metric: DistanceMetric::Haversine,
            cost_unit: 1.0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("tau_max", self.tau_max),
            ("boat_speed", self.boat_speed),
            ("boom_ft_per_gal", self.boom_ft_per_gal),
            ("dispersant_ratio", self.dispersant_ratio),
            ("skimmer_shift_capacity", self.skimmer_shift_capacity),
            ("transfer_alpha", self.transfer_alpha),
            ("deployment_rate", self.deployment_rate),
            ("cost_unit", self.cost_unit),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ModelError::NegativeParameter(format!("config {name} = {v} must be positive")));
            }
        }
        if let Eligibility::Radius { km } = self.eligibility {
            if !(km.is_finite() && km > 0.0) {
                return Err(ModelError::NegativeParameter(format!("eligibility radius {km} km must be positive")));
            }
        }
        Ok(())
    }
}

/// The complete model input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub stations: Vec<Station>,
    pub spills: Vec<SpillEvent>,
    pub resources: Vec<ResourceType>,
    pub scenarios: Vec<Scenario>,
    /// Eligible `(spill, station)` index pairs, sorted.
    pub pairs: Vec<(usize, usize)>,
    pub weights: Weights,
    pub config: ModelConfig,
    pub derived: DerivedMatrices,
    pub normalization: NormalizationStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValidationWarning {
    /// Spill with zero demand for every resource in a scenario.
    ZeroDemand { spill: usize, scenario: usize },
    /// No eligible station can arrive within the window.
    Uncoverable { spill: usize, scenario: usize },
    /// Some resource demand exceeds every station's inventory.
    DemandExceedsInventory { spill: usize, scenario: usize, resource: usize },
    /// Spill has no eligible station at all.
    NoEligibleStation { spill: usize },
}

impl fmt::Display for ValidationWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ValidationWarning::ZeroDemand { spill, scenario } => {
                write!(f, "spill {} has zero demand in scenario {}", spill + 1, scenario + 1)
            }
            ValidationWarning::Uncoverable { spill, scenario } => write!(
                f,
                "spill {} cannot be reached within the response window in scenario {}",
                spill + 1,
                scenario + 1
            ),
            ValidationWarning::DemandExceedsInventory { spill, scenario, resource } => write!(
                f,
                "spill {} demand for resource {} in scenario {} exceeds every station's inventory",
                spill + 1,
                resource + 1,
                scenario + 1
            ),
            ValidationWarning::NoEligibleStation { spill } => {
                write!(f, "spill {} has no eligible station", spill + 1)
            }
        }
    }
}

fn check_nonnegative(what: String, v: f64) -> Result<(), ModelError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(ModelError::NegativeParameter(format!("{what} = {v}")))
    }
}

fn check_scenario_shapes(
    scenarios: &[Scenario],
    n_spills: usize,
    n_resources: usize,
) -> Result<(), ModelError> {
    for (k, s) in scenarios.iter().enumerate() {
        if s.spill_volume.len() != n_spills || s.spill_esi.len() != n_spills || s.demand.len() != n_spills {
            return Err(ModelError::DimensionMismatch(format!(
                "scenario {} covers {} spills, expected {n_spills}",
                k + 1,
                s.spill_volume.len().min(s.spill_esi.len()).min(s.demand.len())
            )));
        }
        for (o, d) in s.demand.iter().enumerate() {
            if d.len() != n_resources {
                return Err(ModelError::DimensionMismatch(format!(
                    "scenario {} spill {} has {} demand entries, expected {n_resources}",
                    k + 1,
                    o + 1,
                    d.len()
                )));
            }
            for (r, &v) in d.iter().enumerate() {
                check_nonnegative(format!("demand of scenario {} spill {} resource {}", k + 1, o + 1, r + 1), v)?;
            }
            check_nonnegative(format!("volume of scenario {} spill {}", k + 1, o + 1), s.spill_volume[o])?;
            check_nonnegative(format!("ESI of scenario {} spill {}", k + 1, o + 1), s.spill_esi[o])?;
        }
        if !(s.probability > 0.0 && s.probability <= 1.0) {
            return Err(ModelError::NegativeParameter(format!(
                "probability of scenario {} = {} outside (0, 1]",
                k + 1,
                s.probability
            )));
        }
    }
    let sum: f64 = scenarios.iter().map(|s| s.probability).sum();
    if (sum - 1.0).abs() > PROBABILITY_TOL {
        return Err(ModelError::ProbabilityMassError { sum });
    }
    Ok(())
}

/// Preparation times `[station][spill][scenario]`.
fn prep_times(stations: &[Station], resources: &[ResourceType], scenarios: &[Scenario], n_spills: usize) -> Vec<Vec<Vec<f64>>> {
    let setup: Vec<f64> = resources.iter().map(|r| r.setup_time_per_unit).collect();
    stations
        .iter()
        .map(|st| {
            (0..n_spills)
                .map(|o| {
                    scenarios
                        .iter()
                        .map(|s| {
                            let units: Vec<f64> = s.demand[o]
                                .iter()
                                .zip(resources)
                                .map(|(d, r)| d / r.setup_unit_size)
                                .collect();
                            compute_prep_time(st.base_delay, &units, &setup)
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn pooled_stats(scenarios: &[Scenario], tau_max: f64) -> NormalizationStats {
    let volumes: Vec<f64> = scenarios.iter().flat_map(|s| s.spill_volume.iter().copied()).collect();
    let esi: Vec<f64> = scenarios.iter().flat_map(|s| s.spill_esi.iter().copied()).collect();
    NormalizationStats::from_pooled(&volumes, &esi, tau_max)
}

/// Validates the inputs and assembles a [`ProblemInstance`].
///
/// An empty spill list is allowed and yields a model with only siting
/// decisions; stations, resources and scenarios must be nonempty.
pub fn build_instance(
    stations: Vec<Station>,
    spills: Vec<SpillEvent>,
    resources: Vec<ResourceType>,
    scenarios: Vec<Scenario>,
    weights: Weights,
    config: ModelConfig,
) -> Result<ProblemInstance, ModelError> {
    if stations.is_empty() {
        return Err(ModelError::EmptySet("stations"));
    }
    if resources.is_empty() {
        return Err(ModelError::EmptySet("resources"));
    }
    if scenarios.is_empty() {
        return Err(ModelError::EmptySet("scenarios"));
    }
    weights.validate()?;
    config.validate()?;

    let n_res = resources.len();
    for r in &resources {
        check_nonnegative(format!("setup time of resource {}", r.name), r.setup_time_per_unit)?;
        check_nonnegative(format!("unit cost of resource {}", r.name), r.unit_cost)?;
        if !(r.setup_unit_size > 0.0) || !r.setup_unit_size.is_finite() {
            return Err(ModelError::NegativeParameter(format!(
                "setup unit size of resource {} = {}",
                r.name, r.setup_unit_size
            )));
        }
        if r.kind == ResourceKind::Skimmer && !(r.capacity_per_unit > 0.0) {
            return Err(ModelError::NegativeParameter(format!(
                "capacity of skimmer resource {} = {}",
                r.name, r.capacity_per_unit
            )));
        }
    }
    for s in &stations {
        if !s.position().is_valid() {
            return Err(ModelError::NegativeParameter(format!(
                "station {} coordinates ({}, {})",
                s.id, s.lat, s.lon
            )));
        }
        check_nonnegative(format!("opening cost of station {}", s.id), s.opening_cost)?;
        check_nonnegative(format!("base delay of station {}", s.id), s.base_delay)?;
        if s.inventory.len() != n_res {
            return Err(ModelError::DimensionMismatch(format!(
                "station {} lists {} inventory entries, expected {n_res}",
                s.id,
                s.inventory.len()
            )));
        }
        for (r, &q) in s.inventory.iter().enumerate() {
            check_nonnegative(format!("inventory of station {} resource {}", s.id, r + 1), q)?;
        }
    }
    for o in &spills {
        if !o.position().is_valid() {
            return Err(ModelError::NegativeParameter(format!(
                "spill {} coordinates ({}, {})",
                o.id, o.lat, o.lon
            )));
        }
        if !(o.base_volume > 0.0 && o.base_volume.is_finite()) {
            return Err(ModelError::NegativeParameter(format!(
                "base volume of spill {} = {}",
                o.id, o.base_volume
            )));
        }
        check_nonnegative(format!("base ESI of spill {}", o.id), o.base_esi)?;
    }
    check_scenario_shapes(&scenarios, spills.len(), n_res)?;

    let station_pos: Vec<LatLon> = stations.iter().map(Station::position).collect();
    let spill_pos: Vec<LatLon> = spills.iter().map(SpillEvent::position).collect();
    let metric = config.distance_metric;
    let distance = distance_matrix(&station_pos, metric);
    let distance_to_spill = cross_distances(&station_pos, &spill_pos, metric);
    let travel_time = compute_travel_times(&distance_to_spill, config.boat_speed);
    let derived = DerivedMatrices {
        transfer_cost: compute_transfer_costs(&distance, config.transfer_alpha),
        deploy_cost: compute_deploy_costs(&distance_to_spill, config.deployment_rate),
        prep_time: prep_times(&stations, &resources, &scenarios, spills.len()),
        distance,
        distance_to_spill,
        travel_time,
    };

    let pairs = eligible_pairs(&stations, &spills, &derived, &config)?;
    let normalization = pooled_stats(&scenarios, config.tau_max);

    Ok(ProblemInstance {
        stations,
        spills,
        resources,
        scenarios,
        pairs,
        weights,
        config,
        derived,
        normalization,
    })
}

fn eligible_pairs(
    stations: &[Station],
    spills: &[SpillEvent],
    derived: &DerivedMatrices,
    config: &ModelConfig,
) -> Result<Vec<(usize, usize)>, ModelError> {
    let mut pairs = Vec::new();
    match &config.eligibility {
        Eligibility::TravelTime => {
            for o in 0..spills.len() {
                for i in 0..stations.len() {
                    if derived.travel_time[i][o] <= config.tau_max {
                        pairs.push((o, i));
                    }
                }
            }
        }
        Eligibility::Radius { km } => {
            for o in 0..spills.len() {
                for i in 0..stations.len() {
                    if derived.distance_to_spill[i][o] <= *km {
                        pairs.push((o, i));
                    }
                }
            }
        }
        Eligibility::Pairs { pairs: explicit } => {
            let spill_index: HashMap<usize, usize> = spills.iter().enumerate().map(|(k, s)| (s.id, k)).collect();
            let station_index: HashMap<usize, usize> = stations.iter().enumerate().map(|(k, s)| (s.id, k)).collect();
            for &(o, i) in explicit {
                let so = *spill_index
                    .get(&o)
                    .ok_or_else(|| ModelError::UnknownId(format!("eligibility pair references spill {o}")))?;
                let si = *station_index
                    .get(&i)
                    .ok_or_else(|| ModelError::UnknownId(format!("eligibility pair references station {i}")))?;
                pairs.push((so, si));
            }
            pairs.sort_unstable();
            pairs.dedup();
        }
    }
    Ok(pairs)
}

/// Normalized `(v, eta)` per spill-scenario using the instance's stats.
pub fn normalize_coverage_terms(instance: &ProblemInstance) -> NormalizedTerms {
    let stats = &instance.normalization;
    NormalizedTerms {
        v_hat: instance
            .scenarios
            .iter()
            .map(|s| s.spill_volume.iter().map(|&v| stats.volume(v)).collect())
            .collect(),
        eta_hat: instance
            .scenarios
            .iter()
            .map(|s| s.spill_esi.iter().map(|&e| stats.esi(e)).collect())
            .collect(),
    }
}

impl ProblemInstance {
    pub fn num_stations(&self) -> usize {
        self.stations.len()
    }

    pub fn num_spills(&self) -> usize {
        self.spills.len()
    }

    pub fn num_resources(&self) -> usize {
        self.resources.len()
    }

    pub fn num_scenarios(&self) -> usize {
        self.scenarios.len()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.scenarios.iter().map(|s| s.probability).collect()
    }

    /// Eligible stations for each spill.
    pub fn eligible_stations(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_spills()];
        for &(o, i) in &self.pairs {
            out[o].push(i);
        }
        out
    }

    /// Arrival time if station `i` serves spill `o` in scenario `k`.
    pub fn arrival_time(&self, i: usize, o: usize, k: usize) -> f64 {
        self.derived.travel_time[i][o] + self.derived.prep_time[i][o][k]
    }

    /// Same stations, spills and normalization with a different scenario
    /// list. Preparation times are recomputed; eligibility is unchanged.
    pub fn with_scenarios(&self, scenarios: Vec<Scenario>) -> Result<ProblemInstance, ModelError> {
        if scenarios.is_empty() {
            return Err(ModelError::EmptySet("scenarios"));
        }
        check_scenario_shapes(&scenarios, self.num_spills(), self.num_resources())?;
        let mut out = self.clone();
        out.derived.prep_time = prep_times(&self.stations, &self.resources, &scenarios, self.num_spills());
        out.scenarios = scenarios;
        Ok(out)
    }

    /// Single-scenario instance for scenario `k` with probability 1.
    pub fn restrict_to_scenario(&self, k: usize) -> ProblemInstance {
        let mut s = self.scenarios[k].clone();
        s.probability = 1.0;
        let mut out = self.clone();
        out.derived.prep_time = self
            .derived
            .prep_time
            .iter()
            .map(|per_spill| per_spill.iter().map(|per_k| vec![per_k[k]]).collect())
            .collect();
        out.scenarios = vec![s];
        out
    }

    /// Fixed cost of opening the given stations, in objective units.
    pub fn fixed_cost(&self, open: &[bool]) -> f64 {
        self.stations
            .iter()
            .zip(open)
            .filter(|(_, &x)| x)
            .map(|(s, _)| s.opening_cost / self.config.cost_unit)
            .sum()
    }

    pub fn validation_warnings(&self) -> Vec<ValidationWarning> {
        let mut out = Vec::new();
        let eligible = self.eligible_stations();
        for (o, stations) in eligible.iter().enumerate() {
            if stations.is_empty() {
                out.push(ValidationWarning::NoEligibleStation { spill: o });
            }
        }
        for (k, s) in self.scenarios.iter().enumerate() {
            for o in 0..self.num_spills() {
                if s.demand[o].iter().all(|&d| d == 0.0) {
                    out.push(ValidationWarning::ZeroDemand { spill: o, scenario: k });
                }
                if !eligible[o].is_empty()
                    && eligible[o]
                        .iter()
                        .all(|&i| self.arrival_time(i, o, k) > self.config.tau_max)
                {
                    out.push(ValidationWarning::Uncoverable { spill: o, scenario: k });
                }
                for r in 0..self.num_resources() {
                    let most = self.stations.iter().map(|st| st.inventory[r]).fold(0.0, f64::max);
                    if s.demand[o][r] > most {
                        out.push(ValidationWarning::DemandExceedsInventory {
                            spill: o,
                            scenario: k,
                            resource: r,
                        });
                    }
                }
            }
        }
        out
    }

    /// Checks that every stored preparation time is consistent with the
    /// base delay plus per-unit setup of the demanded units.
    pub fn check_prep_times(&self) -> Result<(), ModelError> {
        let fresh = prep_times(&self.stations, &self.resources, &self.scenarios, self.num_spills());
        for i in 0..self.num_stations() {
            for o in 0..self.num_spills() {
                for k in 0..self.num_scenarios() {
                    let stored = self.derived.prep_time[i][o][k];
                    if stored > fresh[i][o][k] + 1e-9 || stored < 0.0 {
                        return Err(ModelError::NegativeParameter(format!(
                            "prep time of station {} spill {} scenario {} is {stored} h, limit {} h",
                            i + 1,
                            o + 1,
                            k + 1,
                            fresh[i][o][k]
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}
