mod common;

use common::bundled;
use proptest::prelude::*;
use spillopt_core::model::{ModelConfig, Provenance, SpillEvent};
use spillopt_core::scenario::{
    derive_demands, fit_exponential, generate_scenarios, kolmogorov_sf, ks_test, validate_scenarios, FittedExponential,
    SamplingConfig, ScenarioError,
};

/// Fixed sample used for the frozen KS values.
fn ks_sample() -> Vec<f64> {
    (0..50).map(|i| (0.5 + ((i * 37) % 50) as f64).powf(1.5)).collect()
}

/// Two-sided KS distance by checking the empirical CDF just before and
/// at every sample point.
fn ks_distance_oracle(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for &x in xs {
        let at = xs.iter().filter(|&&y| y <= x).count() as f64 / n;
        let before = xs.iter().filter(|&&y| y < x).count() as f64 / n;
        d = d.max((at - cdf(x)).abs()).max((before - cdf(x)).abs());
    }
    d
}

/// Plain alternating series with a fixed, generous number of terms.
fn kolmogorov_oracle(lambda: f64) -> f64 {
    (1..=2000)
        .map(|j| {
            let jf = j as f64;
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            2.0 * sign * (-2.0 * jf * jf * lambda * lambda).exp()
        })
        .sum()
}

#[test]
fn exponential_fit_uses_sample_mean() {
    let f = fit_exponential(&ks_sample()).unwrap();
    assert!((f.mean() - 141.4128468732128).abs() < 1e-9);
    assert!((f.rate * f.mean() - 1.0).abs() < 1e-12);
    assert_eq!(f.loc, 0.0);
    assert_eq!(f.sample_size, 50);
}

#[test]
fn fit_errors() {
    assert!(matches!(fit_exponential(&[3.0]), Err(ScenarioError::InsufficientData(1))));
    assert!(matches!(
        fit_exponential(&[3.0, 0.0, 2.0]),
        Err(ScenarioError::NonPositiveVolume { index: 1, .. })
    ));
}

#[test]
fn ks_frozen_values_and_oracle() {
    let xs = ks_sample();
    let f = fit_exponential(&xs).unwrap();
    let r = ks_test(&xs, &f);
    assert_eq!(r.n, 50);
    let d_oracle = ks_distance_oracle(&xs, |x| f.cdf(x));
    assert!((r.statistic - d_oracle).abs() < 1e-12);
    assert!((r.statistic - 0.09932884109793405).abs() < 1e-12);
    let p_oracle = kolmogorov_oracle(50f64.sqrt() * r.statistic);
    assert!((r.p_value - p_oracle).abs() < 1e-9);
    assert!((r.p_value - 0.707301312812962).abs() < 1e-9);
}

#[test]
fn asymptotic_p_value_for_reported_statistic() {
    let p = kolmogorov_sf(17f64.sqrt() * 0.1126);
    assert!((p - 0.98235934995622).abs() < 1e-9, "{p}");
    assert!((p - kolmogorov_oracle(17f64.sqrt() * 0.1126)).abs() < 1e-9);
}

#[test]
fn kolmogorov_tails() {
    assert_eq!(kolmogorov_sf(0.0), 1.0);
    assert!(kolmogorov_sf(5.0) < 1e-20);
    // Both branches agree where they meet.
    assert!((kolmogorov_sf(1.18 - 1e-12) - kolmogorov_sf(1.18)).abs() < 1e-9);
}

#[test]
fn quantile_inverts_cdf() {
    let f = FittedExponential { rate: 1.0 / 500.0, loc: 10.0, sample_size: 9 };
    for p in [0.01, 0.3, 0.5, 0.9, 0.999] {
        assert!((f.cdf(f.quantile(p)) - p).abs() < 1e-12);
    }
    assert_eq!(f.cdf(5.0), 0.0);
}

#[test]
fn demand_ratios() {
    let c = ModelConfig::default();
    for v in [0.5, 100.0, 573.5, 1900.0, 12345.678] {
        let d = derive_demands(v, &c);
        assert_eq!(d.boom_ft, 10.0 * v);
        assert_eq!(d.dispersant_gal, v / 50.0);
        assert_eq!(d.skimmers, (v / 200.0).ceil());
    }
}

fn bundled_generate(sampling: &SamplingConfig, probabilities: &[f64]) -> Result<spillopt_core::scenario::ScenarioSet, ScenarioError> {
    let p = bundled();
    let fitted = fit_exponential(&p.instance.spills.iter().map(|s| s.base_volume).collect::<Vec<_>>()).unwrap();
    generate_scenarios(&p.instance.spills, &fitted, sampling, probabilities, &p.instance.resources, &p.config.model)
}

#[test]
fn generation_is_deterministic_per_seed() {
    let p = bundled();
    let a = bundled_generate(&p.config.sampling, &p.config.probabilities).unwrap();
    let b = bundled_generate(&p.config.sampling, &p.config.probabilities).unwrap();
    assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
    let other = SamplingConfig { rng_seed: p.config.sampling.rng_seed + 1, ..p.config.sampling.clone() };
    let c = bundled_generate(&other, &p.config.probabilities).unwrap();
    assert_ne!(a.scenarios[1].spill_volume, c.scenarios[1].spill_volume);
}

#[test]
fn first_scenario_is_the_historical_record() {
    let p = bundled();
    let set = bundled_generate(&p.config.sampling, &p.config.probabilities).unwrap();
    assert_eq!(set.scenarios.len(), 5);
    assert_eq!(set.num_instances(), 85);
    let first = &set.scenarios[0];
    assert_eq!(first.provenance, Provenance::Deterministic);
    let base: Vec<f64> = p.instance.spills.iter().map(|s| s.base_volume).collect();
    assert_eq!(first.spill_volume, base);
    for (k, s) in set.scenarios.iter().enumerate() {
        assert_eq!(s.id, k + 1);
        assert_eq!(s.probability, p.config.probabilities[k]);
    }
}

#[test]
fn sampled_values_respect_truncation_and_perturbation() {
    let p = bundled();
    let sampling = SamplingConfig { n_stochastic: 40, ..p.config.sampling.clone() };
    let probs = vec![1.0 / 41.0; 41];
    let set = bundled_generate(&sampling, &probs).unwrap();
    let spills: &[SpillEvent] = &p.instance.spills;
    let lo = spills.iter().map(|s| s.base_volume).fold(f64::INFINITY, f64::min) * 0.5;
    let hi = spills.iter().map(|s| s.base_volume).fold(0.0, f64::max) * 2.0;
    for s in &set.scenarios[1..] {
        for (o, (&v, &eta)) in s.spill_volume.iter().zip(&s.spill_esi).enumerate() {
            assert!((lo..=hi).contains(&v));
            let base = spills[o].base_esi;
            assert!((eta - base).abs() <= 0.1 * base + 1e-12);
        }
    }
}

#[test]
fn probability_count_and_mass_are_checked() {
    let p = bundled();
    let err = bundled_generate(&p.config.sampling, &[0.5, 0.5]).unwrap_err();
    assert!(matches!(err, ScenarioError::ProbabilityMassError { count: 2, expected: 5, .. }));
    let err = bundled_generate(&p.config.sampling, &[0.2, 0.2, 0.2, 0.2, 0.1]).unwrap_err();
    assert!(matches!(err, ScenarioError::ProbabilityMassError { .. }));
}

#[test]
fn validation_accepts_bundled_and_rejects_distorted() {
    let p = bundled();
    let set = bundled_generate(&p.config.sampling, &p.config.probabilities).unwrap();
    let report = validate_scenarios(&set, &p.instance.spills, &p.instance.resources, &p.config.model, 0.25);
    assert!(report.pass, "{report:?}");
    let mut distorted = set.clone();
    for s in distorted.scenarios.iter_mut().skip(1) {
        s.spill_volume.iter_mut().for_each(|v| *v *= 3.0);
    }
    let report = validate_scenarios(&distorted, &p.instance.spills, &p.instance.resources, &p.config.model, 0.25);
    assert!(!report.pass);
    assert!(report.checks.iter().any(|c| c.parameter == "volume" && !c.pass));
}

#[test]
fn invalid_sampling_config_is_rejected() {
    let p = bundled();
    let bad = SamplingConfig { n_stochastic: 0, ..p.config.sampling.clone() };
    assert!(matches!(bundled_generate(&bad, &[1.0]), Err(ScenarioError::InvalidConfig(_))));
}

proptest! {
    #[test]
    fn kolmogorov_sf_is_monotone(a in 0.0..3.0f64, b in 0.0..3.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(kolmogorov_sf(lo) >= kolmogorov_sf(hi) - 1e-15);
        prop_assert!((0.0..=1.0).contains(&kolmogorov_sf(a)));
    }

    #[test]
    fn kolmogorov_matches_series_oracle(lambda in 0.3..3.0f64) {
        prop_assert!((kolmogorov_sf(lambda) - kolmogorov_oracle(lambda)).abs() < 1e-9);
    }

    #[test]
    fn ks_statistic_matches_oracle(xs in prop::collection::vec(0.1..5000.0f64, 2..60)) {
        let f = fit_exponential(&xs).unwrap();
        let r = ks_test(&xs, &f);
        prop_assert!((r.statistic - ks_distance_oracle(&xs, |x| f.cdf(x))).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&r.statistic));
    }
}
