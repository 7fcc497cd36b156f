#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spillopt_core::io::{parse_inputs, InputBundle, ParsedInputs};
use spillopt_core::model::{
    build_instance, ModelConfig, ProblemInstance, Provenance, ResourceKind, ResourceType, Scenario, SpillEvent,
    Station, Weights,
};

pub const BUNDLED: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/north_slope");

pub fn bundled() -> ParsedInputs {
    parse_inputs(&InputBundle::from_dir(BUNDLED)).expect("bundled instance parses")
}

pub fn resource(id: usize, kind: ResourceKind, setup: f64) -> ResourceType {
    ResourceType {
        id,
        name: kind.as_str().to_string(),
        kind,
        setup_time_per_unit: setup,
        unit_cost: 1.0,
        capacity_per_unit: 200.0,
        setup_unit_size: 1.0,
    }
}

pub fn station(id: usize, lat: f64, lon: f64, cost: f64, inventory: Vec<f64>) -> Station {
    Station {
        id,
        name: format!("S{id}"),
        lat,
        lon,
        opening_cost: cost,
        inventory,
        base_delay: 15.0,
    }
}

pub fn spill(id: usize, lat: f64, lon: f64, volume: f64, esi: f64) -> SpillEvent {
    SpillEvent {
        id,
        lat,
        lon,
        base_volume: volume,
        base_esi: esi,
    }
}

pub fn scenario(id: usize, probability: f64, volume: Vec<f64>, esi: Vec<f64>, demand: Vec<Vec<f64>>) -> Scenario {
    Scenario {
        id,
        probability,
        provenance: Provenance::Deterministic,
        spill_volume: volume,
        spill_esi: esi,
        demand,
    }
}

/// Random weights with every component strictly inside (0, 1).
pub fn random_weights(rng: &mut ChaCha8Rng) -> Weights {
    let a: f64 = rng.random_range(0.05..1.0);
    let b: f64 = rng.random_range(0.05..1.0);
    let c: f64 = rng.random_range(0.05..1.0);
    let s = a + b + c;
    Weights::new(rng.random_range(0.3..0.95), [a / s, b / s, 1.0 - a / s - b / s])
}

/// Instance within the enumeration oracle's limits: up to 3 stations,
/// 4 spills, 3 scenarios and 2 resources.
pub fn random_tiny(seed: u64) -> ProblemInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ni = rng.random_range(1..=3usize);
    let no = rng.random_range(1..=4usize);
    let nk = rng.random_range(1..=3usize);
    let nr = rng.random_range(1..=2usize);
    let kinds = [ResourceKind::Boom, ResourceKind::Skimmer];
    let resources: Vec<ResourceType> = (0..nr)
        .map(|r| resource(r + 1, kinds[r], rng.random_range(0.0..10.0)))
        .collect();
    let stations: Vec<Station> = (0..ni)
        .map(|i| {
            station(
                i + 1,
                70.0 + rng.random_range(-0.2..0.2),
                -150.0 + rng.random_range(-0.5..0.5),
                rng.random_range(0.0..3000.0),
                (0..nr).map(|_| rng.random_range(1.0..20.0f64).round()).collect(),
            )
        })
        .collect();
    let spills: Vec<SpillEvent> = (0..no)
        .map(|o| {
            spill(
                o + 1,
                70.0 + rng.random_range(-0.3..0.3),
                -150.0 + rng.random_range(-0.8..0.8),
                rng.random_range(10.0..1000.0),
                rng.random_range(1.0..10.0),
            )
        })
        .collect();
    let mut raw: Vec<f64> = (0..nk).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter_mut().for_each(|p| *p /= total);
    let head: f64 = raw[..nk - 1].iter().sum();
    raw[nk - 1] = 1.0 - head;
    let scenarios: Vec<Scenario> = (0..nk)
        .map(|k| {
            let volume: Vec<f64> = (0..no).map(|_| rng.random_range(10.0..1000.0)).collect();
            let esi: Vec<f64> = (0..no).map(|_| rng.random_range(1.0..10.0)).collect();
            let demand: Vec<Vec<f64>> = (0..no)
                .map(|_| (0..nr).map(|_| rng.random_range(0.0..15.0f64).round()).collect())
                .collect();
            scenario(k + 1, raw[k], volume, esi, demand)
        })
        .collect();
    let config = ModelConfig {
        n_max_stations: rng.random_range(1..=ni),
        tau_max: rng.random_range(12.0..36.0),
        boat_speed: rng.random_range(1.5..4.0),
        cost_unit: 5000.0,
        ..ModelConfig::default()
    };
    let weights = random_weights(&mut rng);
    build_instance(stations, spills, resources, scenarios, weights, config).expect("random instance is valid")
}

pub fn assert_close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0), "{a} vs {b} (tol {tol})");
}
