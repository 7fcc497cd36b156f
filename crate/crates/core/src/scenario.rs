//! Distribution fitting, goodness of fit and scenario sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelConfig, Provenance, ResourceKind, ResourceType, Scenario, SpillEvent, PROBABILITY_TOL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("need at least 2 volumes to fit, got {0}")]
    InsufficientData(usize),
    #[error("volume {value} at position {index} is not strictly positive")]
    NonPositiveVolume { index: usize, value: f64 },
    #[error("scenario probabilities sum to {sum} over {count} entries, expected 1 over {expected}")]
    ProbabilityMassError { sum: f64, count: usize, expected: usize },
    #[error("invalid sampling config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedExponential {
    /// Per gallon.
    pub rate: f64,
    /// Gallons.
    pub loc: f64,
    pub sample_size: usize,
}

impl FittedExponential {
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.loc {
            0.0
        } else {
            1.0 - (-(x - self.loc) * self.rate).exp()
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.loc - (1.0 - p).ln() / self.rate
    }

    pub fn mean(&self) -> f64 {
        self.loc + 1.0 / self.rate
    }
}

/// Maximum-likelihood exponential fit with zero offset.
pub fn fit_exponential(volumes: &[f64]) -> Result<FittedExponential, ScenarioError> {
    if volumes.len() < 2 {
        return Err(ScenarioError::InsufficientData(volumes.len()));
    }
    if let Some((index, &value)) = volumes.iter().enumerate().find(|(_, &v)| !(v > 0.0 && v.is_finite())) {
        return Err(ScenarioError::NonPositiveVolume { index, value });
    }
    let mean = volumes.iter().sum::<f64>() / volumes.len() as f64;
    Ok(FittedExponential {
        rate: 1.0 / mean,
        loc: 0.0,
        sample_size: volumes.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
///
/// Uses the alternating series for large arguments and the Jacobi theta
/// form for small ones, where the alternating series converges slowly.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let p = if lambda < 1.18 {
        let pi2 = std::f64::consts::PI.powi(2);
        let mut cdf = 0.0;
        for j in 1..=50 {
            let m = (2 * j - 1) as f64;
            let term = (-m * m * pi2 / (8.0 * lambda * lambda)).exp();
            cdf += term;
            if term < 1e-17 {
                break;
            }
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * cdf
    } else {
        let mut sum = 0.0;
        for j in 1..=100 {
            let jf = j as f64;
            let term = (-2.0 * jf * jf * lambda * lambda).exp();
            sum += if j % 2 == 1 { term } else { -term };
            if term < 1e-17 {
                break;
            }
        }
        2.0 * sum
    };
    p.clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov test against the fitted exponential with
/// the asymptotic p-value.
pub fn ks_test(volumes: &[f64], fitted: &FittedExponential) -> KsResult {
    let mut xs = volumes.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = fitted.cdf(x);
        d = d.max((i + 1) as f64 / nf - f).max(f - i as f64 / nf);
    }
    KsResult {
        statistic: d,
        p_value: kolmogorov_sf(nf.sqrt() * d),
        n,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub n_stochastic: usize,
    pub rng_seed: u64,
    /// Relative half-width of the uniform ESI perturbation.
    pub esi_perturbation: f64,
    /// Relative deviation limit for sample mean and std.
    pub validation_tol: f64,
    /// Keep sampled volumes within [0.5 * min, 2 * max] of the history,
    /// redrawing outliers.
    pub truncate: bool,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            n_stochastic: 4,
            rng_seed: 2024,
            esi_perturbation: 0.1,
            validation_tol: 0.25,
            truncate: true,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.n_stochastic < 1 {
            return Err(ScenarioError::InvalidConfig("n_stochastic must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.esi_perturbation) {
            return Err(ScenarioError::InvalidConfig(format!(
                "esi_perturbation {} outside [0, 1]",
                self.esi_perturbation
            )));
        }
        if !(self.validation_tol > 0.0 && self.validation_tol <= 1.0) {
            return Err(ScenarioError::InvalidConfig(format!(
                "validation_tol {} outside (0, 1]",
                self.validation_tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub scenarios: Vec<Scenario>,
}

impl ScenarioSet {
    pub fn num_instances(&self) -> usize {
        self.scenarios.iter().map(|s| s.spill_volume.len()).sum()
    }
}

/// Resource quantities implied by a spill volume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Demand {
    pub boom_ft: f64,
    pub skimmers: f64,
    pub dispersant_gal: f64,
}

impl Demand {
    pub fn for_kind(&self, kind: ResourceKind) -> f64 {
        match kind {
            ResourceKind::Boom => self.boom_ft,
            ResourceKind::Skimmer => self.skimmers,
            ResourceKind::Dispersant => self.dispersant_gal,
        }
    }
}

pub fn derive_demands(volume: f64, config: &ModelConfig) -> Demand {
    Demand {
        boom_ft: config.boom_ft_per_gal * volume,
        skimmers: (volume / config.skimmer_shift_capacity).ceil(),
        // Divide by the reciprocal so a 1:N ratio gives exactly volume / N.
        dispersant_gal: volume / config.dispersant_ratio.recip(),
    }
}

/// Demand vector aligned with `resources`.
pub fn demand_vector(volume: f64, config: &ModelConfig, resources: &[ResourceType]) -> Vec<f64> {
    let d = derive_demands(volume, config);
    resources.iter().map(|r| d.for_kind(r.kind)).collect()
}

/// Attempts per draw before a truncated sample is clamped instead.
const MAX_REDRAWS: usize = 10_000;

/// Builds one deterministic scenario from the historical record followed by
/// `n_stochastic` sampled ones.
pub fn generate_scenarios(
    historical: &[SpillEvent],
    fitted: &FittedExponential,
    sampling: &SamplingConfig,
    probabilities: &[f64],
    resources: &[ResourceType],
    model: &ModelConfig,
) -> Result<ScenarioSet, ScenarioError> {
    sampling.validate()?;
    let expected = 1 + sampling.n_stochastic;
    let sum: f64 = probabilities.iter().sum();
    if probabilities.len() != expected || (sum - 1.0).abs() > PROBABILITY_TOL {
        return Err(ScenarioError::ProbabilityMassError { sum, count: probabilities.len(), expected });
    }

    let base_v: Vec<f64> = historical.iter().map(|s| s.base_volume).collect();
    let base_eta: Vec<f64> = historical.iter().map(|s| s.base_esi).collect();
    let lo = base_v.iter().copied().fold(f64::INFINITY, f64::min) * 0.5;
    let hi = base_v.iter().copied().fold(f64::NEG_INFINITY, f64::max) * 2.0;
    let make = |id, probability, provenance, volumes: Vec<f64>, esi: Vec<f64>| Scenario {
        id,
        probability,
        provenance,
        demand: volumes.iter().map(|&v| demand_vector(v, model, resources)).collect(),
        spill_volume: volumes,
        spill_esi: esi,
    };

    let mut scenarios = vec![make(1, probabilities[0], Provenance::Deterministic, base_v.clone(), base_eta.clone())];
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.rng_seed);
    for s in 0..sampling.n_stochastic {
        let mut volumes = Vec::with_capacity(historical.len());
        let mut esi = Vec::with_capacity(historical.len());
        for &eta in &base_eta {
            let mut v = fitted.quantile(rng.random::<f64>());
            if sampling.truncate && !historical.is_empty() {
                let mut tries = 0;
                while !(lo..=hi).contains(&v) && tries < MAX_REDRAWS {
                    v = fitted.quantile(rng.random::<f64>());
                    tries += 1;
                }
                v = v.clamp(lo, hi);
            }
            volumes.push(v);
            let h = sampling.esi_perturbation;
            let factor = if h > 0.0 { 1.0 + rng.random_range(-h..=h) } else { 1.0 };
            esi.push(eta * factor);
        }
        scenarios.push(make(
            s + 2,
            probabilities[s + 1],
            Provenance::Sampled { seed: sampling.rng_seed },
            volumes,
            esi,
        ));
    }
    Ok(ScenarioSet { scenarios })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterCheck {
    pub parameter: String,
    pub historical_mean: f64,
    pub sampled_mean: f64,
    pub historical_std: f64,
    pub sampled_std: f64,
    pub mean_deviation: f64,
    pub std_deviation: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<ParameterCheck>,
    pub pass: bool,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn relative_deviation(sample: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        sample.abs()
    } else {
        (sample - reference).abs() / reference.abs()
    }
}

/// Compares the pooled sampled scenarios with the historical record.
///
/// Scenarios whose provenance is not `Deterministic` are pooled; each of
/// volume, ESI and every demand column must have mean and standard
/// deviation within `tol` relative of the historical values.
pub fn validate_scenarios(
    set: &ScenarioSet,
    historical: &[SpillEvent],
    resources: &[ResourceType],
    model: &ModelConfig,
    tol: f64,
) -> ValidationReport {
    let sampled: Vec<&Scenario> = set
        .scenarios
        .iter()
        .filter(|s| s.provenance != Provenance::Deterministic)
        .collect();
    let hist_demand: Vec<Vec<f64>> = historical
        .iter()
        .map(|s| demand_vector(s.base_volume, model, resources))
        .collect();

    let mut params: Vec<(String, Vec<f64>, Vec<f64>)> = vec![
        (
            "volume".into(),
            historical.iter().map(|s| s.base_volume).collect(),
            sampled.iter().flat_map(|s| s.spill_volume.iter().copied()).collect(),
        ),
        (
            "esi".into(),
            historical.iter().map(|s| s.base_esi).collect(),
            sampled.iter().flat_map(|s| s.spill_esi.iter().copied()).collect(),
        ),
    ];
    for (r, res) in resources.iter().enumerate() {
        params.push((
            format!("demand:{}", res.name),
            hist_demand.iter().map(|d| d[r]).collect(),
            sampled.iter().flat_map(|s| s.demand.iter().map(move |d| d[r])).collect(),
        ));
    }

    let checks: Vec<ParameterCheck> = params
        .into_iter()
        .map(|(parameter, hist, samp)| {
            let (hm, hs) = mean_std(&hist);
            let (sm, ss) = mean_std(&samp);
            let mean_deviation = relative_deviation(sm, hm);
            let std_deviation = relative_deviation(ss, hs);
            ParameterCheck {
                parameter,
                historical_mean: hm,
                sampled_mean: sm,
                historical_std: hs,
                sampled_std: ss,
                mean_deviation,
                std_deviation,
                pass: mean_deviation <= tol && std_deviation <= tol,
            }
        })
        .collect();
    let pass = checks.iter().all(|c| c.pass);
    ValidationReport { checks, pass }
}
