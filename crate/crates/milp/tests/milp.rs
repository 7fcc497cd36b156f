use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spillopt_milp::{
    solve_lp, solve_milp, BranchRule, LpOptions, LpStatus, MilpOptions, MilpStatus, Problem,
    RowSense, Sense,
};

/// Random multi-constraint binary program: max c.y, A y <= b.
fn random_binary(seed: u64, n: usize, m: usize) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = Problem::new("bin", Sense::Maximize);
    for j in 0..n {
        p.add_binary(format!("y{j}"), rng.random_range(-1.0..10.0));
    }
    for i in 0..m {
        let coeffs = (0..n).map(|j| (j, rng.random_range(0.0..6.0))).collect();
        p.add_row(format!("r{i}"), coeffs, RowSense::Le, rng.random_range(4.0..15.0));
    }
    p
}

fn brute_force_binary(p: &Problem) -> f64 {
    let n = p.num_columns();
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1 << n) {
        let y: Vec<f64> = (0..n).map(|j| ((mask >> j) & 1) as f64).collect();
        if p.rows.iter().all(|r| r.violation(r.activity(&y)) <= 1e-12) {
            best = best.max(p.objective_value(&y));
        }
    }
    best
}

/// Facility-style mixed problem: open binaries x, continuous flows z.
fn random_mixed(seed: u64, facilities: usize, clients: usize) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = Problem::new("mixed", Sense::Maximize);
    let open: Vec<usize> = (0..facilities)
        .map(|i| p.add_binary(format!("x{i}"), -rng.random_range(1.0..6.0)))
        .collect();
    let cap: Vec<f64> = (0..facilities).map(|_| rng.random_range(2.0..8.0)).collect();
    let mut flows = vec![Vec::new(); facilities];
    for c in 0..clients {
        let demand = rng.random_range(1.0..4.0);
        let mut serve = Vec::new();
        for i in 0..facilities {
            let z = p.add_column(format!("z{i}_{c}"), 0.0, demand, false, rng.random_range(0.5..3.0));
            p.add_row(format!("link{i}_{c}"), vec![(z, 1.0), (open[i], -demand)], RowSense::Le, 0.0);
            flows[i].push(z);
            serve.push((z, 1.0));
        }
        p.add_row(format!("dem{c}"), serve, RowSense::Le, demand);
    }
    for i in 0..facilities {
        let mut coeffs: Vec<(usize, f64)> = flows[i].iter().map(|&z| (z, 1.0)).collect();
        coeffs.push((open[i], -cap[i]));
        p.add_row(format!("cap{i}"), coeffs, RowSense::Le, 0.0);
    }
    p
}

fn enumerate_mixed(p: &Problem) -> f64 {
    let ints = p.integer_columns();
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1 << ints.len()) {
        let mut q = p.clone();
        for (k, &j) in ints.iter().enumerate() {
            let v = ((mask >> k) & 1) as f64;
            q.columns[j].lower = v;
            q.columns[j].upper = v;
        }
        let r = solve_lp(&q, &LpOptions::default()).unwrap();
        if r.status == LpStatus::Optimal {
            best = best.max(r.objective);
        }
    }
    best
}

#[test]
fn knapsack_by_hand() {
    // max 5a + 4b + 3c  s.t.  2a + 3b + c <= 5, 4a + b + 2c <= 11, 3a + 4b + 2c <= 8
    let mut p = Problem::new("k", Sense::Maximize);
    let a = p.add_column("a", 0.0, 5.0, true, 5.0);
    let b = p.add_column("b", 0.0, 5.0, true, 4.0);
    let c = p.add_column("c", 0.0, 5.0, true, 3.0);
    p.add_row("1", vec![(a, 2.0), (b, 3.0), (c, 1.0)], RowSense::Le, 5.0);
    p.add_row("2", vec![(a, 4.0), (b, 1.0), (c, 2.0)], RowSense::Le, 11.0);
    p.add_row("3", vec![(a, 3.0), (b, 4.0), (c, 2.0)], RowSense::Le, 8.0);
    let r = solve_milp(&p, &MilpOptions::default()).unwrap();
    assert_eq!(r.status, MilpStatus::Optimal);
    // a=2, c=1 gives 13; that is the integer optimum.
    assert!((r.objective - 13.0).abs() < 1e-9);
}

#[test]
fn infeasible_root() {
    let mut p = Problem::new("inf", Sense::Maximize);
    let x = p.add_column("x", 0.0, 1.0, false, 1.0);
    p.add_row("r", vec![(x, 1.0)], RowSense::Ge, 2.0);
    let r = solve_milp(&p, &MilpOptions::default()).unwrap();
    assert_eq!(r.status, MilpStatus::Infeasible);
}

#[test]
fn binary_programs_match_brute_force() {
    for seed in 0..60 {
        let p = random_binary(seed, 10, 3);
        let expected = brute_force_binary(&p);
        let r = solve_milp(&p, &MilpOptions::default()).unwrap();
        assert_eq!(r.status, MilpStatus::Optimal);
        assert!((r.objective - expected).abs() < 1e-6, "seed {seed}");
        assert!(p.max_integrality_residual(&r.values) < 1e-9);
    }
}

#[test]
fn pseudo_cost_rule_reaches_same_optimum() {
    for seed in 0..20 {
        let p = random_mixed(seed, 4, 5);
        let base = solve_milp(&p, &MilpOptions::default()).unwrap();
        let opts = MilpOptions { branch_rule: BranchRule::PseudoCost, seed: 7, ..MilpOptions::default() };
        let pc = solve_milp(&p, &opts).unwrap();
        assert!((base.objective - pc.objective).abs() < 1e-6);
    }
}

#[test]
fn bound_history_is_monotone_and_trace_is_recorded() {
    let p = random_mixed(3, 5, 6);
    let opts = MilpOptions { trace: true, ..MilpOptions::default() };
    let r = solve_milp(&p, &opts).unwrap();
    let h = &r.stats.bound_history;
    assert!(!h.is_empty());
    assert!(h.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(r.trace.len(), r.stats.nodes);
    assert!(r.stats.best_bound >= r.objective - 1e-6 * r.objective.abs().max(1.0));
}

#[test]
fn node_limit_reports_gap_limit_or_optimal() {
    let p = random_binary(11, 14, 4);
    let opts = MilpOptions { node_limit: 1, ..MilpOptions::default() };
    let r = solve_milp(&p, &opts).unwrap();
    assert!(matches!(r.status, MilpStatus::GapLimit | MilpStatus::Optimal));
    assert!(r.stats.nodes <= 1);
}

#[test]
fn deterministic_repeat() {
    let p = random_mixed(5, 4, 6);
    let a = solve_milp(&p, &MilpOptions::default()).unwrap();
    let b = solve_milp(&p, &MilpOptions::default()).unwrap();
    assert_eq!(a.values, b.values);
    assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    assert_eq!(a.stats.nodes, b.stats.nodes);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mixed_programs_match_enumeration(seed in any::<u64>(), f in 1usize..5, c in 1usize..5) {
        let p = random_mixed(seed, f, c);
        let expected = enumerate_mixed(&p);
        let r = solve_milp(&p, &MilpOptions::default()).unwrap();
        prop_assert_eq!(r.status, MilpStatus::Optimal);
        prop_assert!((r.objective - expected).abs() <= 1e-6 * expected.abs().max(1.0));
        prop_assert!(p.max_scaled_violation(&r.values) < 1e-7);
    }
}
