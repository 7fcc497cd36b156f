mod common;

use common::bundled;
use proptest::prelude::*;
use spillopt_core::model::Weights;
use spillopt_core::solve::SolverOptions;
use spillopt_core::sweep::{
    best_configuration, coverage_by_k1, enumerate_grid, normalize_runs, pareto_frontier, read_sweep_csv, run_sweep,
    write_pareto_csv, write_sweep_csv, SweepError, SweepRun, WeightGrid, SWEEP_HEADER,
};

fn run(index: usize, weights: Weights, objective: f64, coverage: f64, cost: f64) -> SweepRun {
    SweepRun {
        index,
        weights,
        status: "ok".into(),
        objective,
        coverage_value: coverage,
        cost_value: cost,
        normalized_coverage: 0.0,
        normalized_cost: 0.0,
        stations_mask: 0b1100,
        coverage_rate: 0.5,
        total_deployment: 10.0,
        nodes: 3,
    }
}

/// Quadratic non-dominated filter; the first of several identical points wins.
fn dominance_oracle(runs: &[SweepRun]) -> Vec<usize> {
    let ok: Vec<&SweepRun> = runs.iter().filter(|r| r.succeeded()).collect();
    let mut out: Vec<usize> = ok
        .iter()
        .filter(|p| {
            let dominated = ok.iter().any(|q| {
                q.cost_value <= p.cost_value
                    && q.coverage_value >= p.coverage_value
                    && (q.cost_value < p.cost_value || q.coverage_value > p.coverage_value)
            });
            let shadowed = ok
                .iter()
                .any(|q| q.index < p.index && q.cost_value == p.cost_value && q.coverage_value == p.coverage_value);
            !dominated && !shadowed
        })
        .map(|p| p.index)
        .collect();
    out.sort_unstable();
    out
}

#[test]
fn default_grid_has_324_points() {
    let w = enumerate_grid(&WeightGrid::default()).unwrap();
    assert_eq!(w.len(), 324);
    for x in &w {
        assert!((x.omega1 + x.omega2 + x.omega3 - 1.0).abs() < 1e-12);
        assert!((x.k1 + x.k2 - 1.0).abs() < 1e-12);
        assert!(x.omega1 > 0.0 && x.omega2 > 0.0 && x.omega3 > 0.0);
    }
    assert_eq!(w[0].k1, 0.1);
    assert_eq!(w[323].k1, 0.9);
    assert_eq!(w[1].k2, 0.9);
}

#[test]
fn coarser_grids() {
    assert_eq!(enumerate_grid(&WeightGrid::with_k1_step(0.2, 0.25).unwrap()).unwrap().len(), 4 * 3);
    assert_eq!(enumerate_grid(&WeightGrid::with_k1_step(0.25, 0.1).unwrap()).unwrap().len(), 3 * 36);
    let zeros = WeightGrid { allow_zero: true, ..WeightGrid::default() };
    // 36 interior points plus 3 * 9 with exactly one zero.
    assert_eq!(enumerate_grid(&zeros).unwrap().len(), 9 * (36 + 27));
}

#[test]
fn bad_steps_are_rejected() {
    for step in [0.0, -0.1, 0.3, 1.5, f64::NAN] {
        let grid = WeightGrid { omega_step: step, ..WeightGrid::default() };
        assert!(matches!(enumerate_grid(&grid), Err(SweepError::BadStep(_))), "{step}");
    }
    assert!(WeightGrid::with_k1_step(0.35, 0.1).is_err());
}

#[test]
fn best_configuration_breaks_ties_by_cost_then_weights() {
    let a = Weights::new(0.5, [0.2, 0.3, 0.5]);
    let b = Weights::new(0.4, [0.2, 0.3, 0.5]);
    let runs = vec![run(0, a, 1.0, 2.0, 0.5), run(1, b, 1.0, 2.0, 0.4), run(2, a, 0.9, 3.0, 0.1)];
    assert_eq!(best_configuration(&runs).unwrap().index, 1);
    let runs = vec![run(0, a, 1.0, 2.0, 0.4), run(1, b, 1.0 + 1e-12, 2.0, 0.4)];
    assert_eq!(best_configuration(&runs).unwrap().index, 1);
    let mut failed = run(0, a, 5.0, 1.0, 1.0);
    failed.status = "error: x".into();
    assert!(matches!(best_configuration(&[failed]), Err(SweepError::AllRunsFailed)));
}

#[test]
fn pareto_keeps_first_duplicate_and_skips_failures() {
    let w = Weights::default();
    let mut bad = run(3, w, 9.0, 99.0, 0.0);
    bad.status = "infeasible".into();
    let runs = vec![run(0, w, 0.0, 1.0, 1.0), run(1, w, 0.0, 1.0, 1.0), run(2, w, 0.0, 2.0, 0.5), bad];
    let f = pareto_frontier(&runs);
    assert_eq!(f.iter().map(|p| p.run).collect::<Vec<_>>(), vec![2]);
    let runs = vec![run(0, w, 0.0, 1.0, 0.2), run(1, w, 0.0, 1.0, 0.2), run(2, w, 0.0, 2.0, 0.5)];
    assert_eq!(pareto_frontier(&runs).iter().map(|p| p.run).collect::<Vec<_>>(), vec![0, 2]);
}

#[test]
fn normalization_spans_unit_interval() {
    let w = Weights::default();
    let mut runs = vec![run(0, w, 0.0, 1.0, 10.0), run(1, w, 0.0, 3.0, 30.0), run(2, w, 0.0, 2.0, 20.0)];
    normalize_runs(&mut runs);
    let nc: Vec<f64> = runs.iter().map(|r| r.normalized_coverage).collect();
    assert_eq!(nc, vec![0.0, 1.0, 0.5]);
    assert_eq!(runs[2].normalized_cost, 0.5);
}

#[test]
fn csv_round_trip() {
    let runs: Vec<SweepRun> = enumerate_grid(&WeightGrid::with_k1_step(0.5, 0.25).unwrap())
        .unwrap()
        .into_iter()
        .enumerate()
        .map(|(i, w)| run(i, w, i as f64 * 0.1, 1.0 / (i + 1) as f64, 0.3 * i as f64))
        .collect();
    let mut buf = Vec::new();
    write_sweep_csv(&runs, &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert_eq!(text.lines().next().unwrap(), SWEEP_HEADER.join(","));
    let back = read_sweep_csv(buf.as_slice()).unwrap();
    assert_eq!(back.len(), runs.len());
    for (a, b) in runs.iter().zip(&back) {
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.objective, b.objective);
        assert_eq!(a.coverage_value, b.coverage_value);
        assert_eq!(a.cost_value, b.cost_value);
        assert_eq!(a.stations_mask, b.stations_mask);
        assert_eq!(a.status, b.status);
    }
    let mut p = Vec::new();
    write_pareto_csv(&pareto_frontier(&runs), &mut p).unwrap();
    assert!(String::from_utf8(p).unwrap().starts_with("run,k1,"));
}

#[test]
fn malformed_csv_is_reported() {
    assert!(matches!(read_sweep_csv("k1,k2\n0.1,0.9\n".as_bytes()), Err(SweepError::Format(_))));
    let mut buf = Vec::new();
    write_sweep_csv(&[run(0, Weights::default(), 1.0, 1.0, 1.0)], &mut buf).unwrap();
    let broken = String::from_utf8(buf).unwrap().replace(",12,", ",twelve,");
    assert!(matches!(read_sweep_csv(broken.as_bytes()), Err(SweepError::Format(_))));
}

#[test]
fn stations_are_decoded_from_mask() {
    assert_eq!(run(0, Weights::default(), 0.0, 0.0, 0.0).stations(), vec![3, 4]);
}

#[test]
fn bundled_coarse_sweep() {
    let inst = bundled().instance;
    let grid = enumerate_grid(&WeightGrid::with_k1_step(0.2, 0.25).unwrap()).unwrap();
    let serial = run_sweep(&inst, &grid, &SolverOptions::default(), 1).unwrap();
    let parallel = run_sweep(&inst, &grid, &SolverOptions::default(), 3).unwrap();
    assert_eq!(serial, parallel);
    assert!(serial.iter().all(SweepRun::succeeded));
    let series = coverage_by_k1(&serial);
    assert_eq!(series.len(), 4);
    for pair in series.windows(2) {
        assert!(pair[1].1 >= pair[0].1 - 1e-9, "{series:?}");
    }
    let front: Vec<usize> = pareto_frontier(&serial).iter().map(|p| p.run).collect();
    let mut sorted = front.clone();
    sorted.sort_unstable();
    assert_eq!(sorted, dominance_oracle(&serial));
}

fn arb_runs() -> impl Strategy<Value = Vec<SweepRun>> {
    prop::collection::vec((0u8..6, 0u8..6, any::<bool>()), 1..40).prop_map(|pts| {
        pts.into_iter()
            .enumerate()
            .map(|(i, (cov, cost, ok))| {
                let mut r = run(i, Weights::default(), 0.0, cov as f64, cost as f64);
                if !ok {
                    r.status = "error: synthetic".into();
                }
                r
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn pareto_matches_quadratic_oracle(runs in arb_runs()) {
        let f = pareto_frontier(&runs);
        let mut got: Vec<usize> = f.iter().map(|p| p.run).collect();
        for w in f.windows(2) {
            prop_assert!(w[0].cost_value < w[1].cost_value);
            prop_assert!(w[0].coverage_value < w[1].coverage_value);
        }
        got.sort_unstable();
        prop_assert_eq!(got, dominance_oracle(&runs));
    }

    #[test]
    fn coverage_series_statistics(runs in arb_runs()) {
        for (k, mean, sd) in coverage_by_k1(&runs) {
            let vals: Vec<f64> = runs.iter().filter(|r| r.succeeded() && r.weights.k1 == k).map(|r| r.coverage_value).collect();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(mean >= lo - 1e-12 && mean <= hi + 1e-12);
            prop_assert!(sd >= 0.0 && sd <= hi - lo + 1e-12);
        }
    }
}
