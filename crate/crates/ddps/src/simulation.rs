//! Seeded Monte-Carlo harness.
//!
//! Every owner's randomness is a pure function of
//! `(master_seed, trial_index, owner_index, stream)`, so trials are
//! reproducible bit-for-bit, independent of each other, and free to run in
//! parallel. A trial privatizes every owner of a configured population,
//! tallies the responses, and the experiment layer applies the matching
//! estimator per trial and reduces the results in trial order.

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::estimation::{
    estimate_dual, estimate_from_yes, estimate_multivalue, estimate_rr_baseline, EstimateError,
    Tally,
};
use crate::mechanisms::{
    baseline_alphabet, binary_alphabet, ddps_distribution, draw, draw_multivalue_pair, draw_pair,
    dual_alphabet, multivalue_alphabet, rr_baseline_distributions, BaselineParams, CouplingMode,
    DdpsParams, DeniabilityParams, DualParams, MultiValueParams, ParamError, Probability,
    Response, SamplingNoiseParams, Truth,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
}

/// The ground-truth population a trial privatizes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PopulationSpec {
    /// `yes` owners truthfully answer "Yes", `no` owners "No".
    Binary { yes: u64, no: u64 },
    /// `counts[i]` owners hold value `i + 1`; `monitored` (1-based) is the
    /// value whose count the experiment estimates.
    MultiValue { counts: Vec<u64>, monitored: usize },
}

impl PopulationSpec {
    pub fn total(&self) -> u64 {
        match self {
            PopulationSpec::Binary { yes, no } => yes + no,
            PopulationSpec::MultiValue { counts, .. } => counts.iter().sum(),
        }
    }

    /// The count the estimator is asked to recover.
    pub fn ground_truth(&self) -> u64 {
        match self {
            PopulationSpec::Binary { yes, .. } => *yes,
            PopulationSpec::MultiValue { counts, monitored } => counts[monitored - 1],
        }
    }
}

/// Mechanism selection plus its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum MechanismConfig {
    SamplingNoise(SamplingNoiseParams),
    Deniability(DeniabilityParams),
    Ddps(DdpsParams),
    Dual(DualParams),
    MultiValue(MultiValueParams),
    RrBaseline(BaselineParams),
}

impl MechanismConfig {
    pub fn name(&self) -> &'static str {
        match self {
            MechanismConfig::SamplingNoise(_) => "sampling-noise",
            MechanismConfig::Deniability(_) => "deniability",
            MechanismConfig::Ddps(_) => "ddps",
            MechanismConfig::Dual(_) => "dual",
            MechanismConfig::MultiValue(_) => "multi-value",
            MechanismConfig::RrBaseline(_) => "rr-baseline",
        }
    }
}

/// Full description of one Monte-Carlo experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub mechanism: MechanismConfig,
    pub population: PopulationSpec,
    pub coupling: CouplingMode,
    pub master_seed: u64,
    pub trials: u32,
    pub confidence_level: Probability,
    /// When set, the same population is also run through the
    /// randomized-response baseline for side-by-side comparison.
    pub baseline: Option<BaselineParams>,
}

impl TrialConfig {
    pub fn validate(&self) -> Result<(), SimulationError> {
        if self.trials == 0 {
            return Err(SimulationError::InvalidConfig(
                "trials must be at least 1".into(),
            ));
        }
        let conf = self.confidence_level.value();
        if !(0.0 < conf && conf < 1.0) {
            return Err(SimulationError::InvalidConfig(format!(
                "confidence level must lie strictly between 0 and 1, got {conf}"
            )));
        }
        match (&self.mechanism, &self.population) {
            (MechanismConfig::MultiValue(params), PopulationSpec::MultiValue { counts, monitored }) => {
                if counts.len() != params.value_count() {
                    return Err(SimulationError::InvalidConfig(format!(
                        "population lists {} values but the mechanism has {}",
                        counts.len(),
                        params.value_count()
                    )));
                }
                if *monitored < 1 || *monitored > counts.len() {
                    return Err(SimulationError::InvalidConfig(format!(
                        "monitored value {monitored} is outside 1..={}",
                        counts.len()
                    )));
                }
                Ok(())
            }
            (MechanismConfig::MultiValue(_), PopulationSpec::Binary { .. }) => {
                Err(SimulationError::InvalidConfig(
                    "multi-value mechanism needs a multi-value population".into(),
                ))
            }
            (_, PopulationSpec::MultiValue { .. }) => Err(SimulationError::InvalidConfig(
                "binary mechanism needs a binary population".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// The tallies produced by one trial: a single tally for single-response
/// mechanisms, a pair for the dual (first/second answer) and multi-value
/// (round one/round two) mechanisms.
#[derive(Debug, Clone, PartialEq)]
pub enum TrialOutcome {
    Single(Tally),
    Pair(Tally, Tally),
}

const STREAM_PRIMARY: u64 = 0;
const STREAM_SECONDARY: u64 = 1;

// splitmix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The stable per-owner variate: absorb `(trial, owner, stream)` into the
/// master seed with one splitmix64 round each, then map the top 53 bits
/// onto `[0, 1)`.
pub fn unit_variate(master_seed: u64, trial: u64, owner: u64, stream: u64) -> f64 {
    let mut state = master_seed;
    for salt in [trial, owner, stream] {
        state = mix64(
            state
                .wrapping_add(0x9e37_79b9_7f4a_7c15)
                .wrapping_add(salt.wrapping_mul(0xd134_2543_de82_ef95)),
        );
    }
    (state >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Stable sub-seed for an indexed unit of work (e.g. one dataset window).
pub fn derive_seed(master_seed: u64, index: u64) -> u64 {
    mix64(
        master_seed
            .wrapping_add(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(index.wrapping_mul(0xd134_2543_de82_ef95)),
    )
}

fn tally_from_slots(alphabet: Vec<Response>, counts: Vec<u64>) -> Tally {
    Tally::from_counts(alphabet.into_iter().zip(counts).collect())
}

fn count_into(alphabet: &[Response], counts: &mut [u64], symbol: Response) {
    let slot = alphabet
        .iter()
        .position(|&s| s == symbol)
        .expect("mechanisms emit only symbols of their own alphabet");
    counts[slot] += 1;
}

/// Runs one trial: privatizes every owner with deterministic randomness
/// and tallies the responses. Identical `(config, trial_index)` inputs
/// produce identical tallies.
pub fn run_trial(config: &TrialConfig, trial_index: u32) -> Result<TrialOutcome, SimulationError> {
    config.validate()?;
    let trial = u64::from(trial_index);
    let seed = config.master_seed;

    match (&config.mechanism, &config.population) {
        (MechanismConfig::Dual(params), PopulationSpec::Binary { yes, no }) => {
            let alphabet = dual_alphabet();
            let mut first = vec![0u64; 3];
            let mut second = vec![0u64; 3];
            for owner in 0..(yes + no) {
                let truth = if owner < *yes { Truth::Yes } else { Truth::No };
                let u = unit_variate(seed, trial, owner, STREAM_PRIMARY);
                let u2 = unit_variate(seed, trial, owner, STREAM_SECONDARY);
                let (a, c) = draw_pair(truth, params, u, u2, config.coupling);
                count_into(&alphabet, &mut first, a);
                count_into(&alphabet, &mut second, c);
            }
            Ok(TrialOutcome::Pair(
                tally_from_slots(alphabet.clone(), first),
                tally_from_slots(alphabet, second),
            ))
        }
        (MechanismConfig::MultiValue(params), PopulationSpec::MultiValue { counts, .. }) => {
            let v = params.value_count();
            let alphabet = multivalue_alphabet(v);
            let mut round1 = vec![0u64; v + 1];
            let mut round2 = vec![0u64; v + 1];
            let mut owner = 0u64;
            for (value_idx, &population) in counts.iter().enumerate() {
                for _ in 0..population {
                    let u = unit_variate(seed, trial, owner, STREAM_PRIMARY);
                    let u2 = unit_variate(seed, trial, owner, STREAM_SECONDARY);
                    let (r1, r2) =
                        draw_multivalue_pair(value_idx + 1, params, u, u2, config.coupling)?;
                    count_into(&alphabet, &mut round1, r1);
                    count_into(&alphabet, &mut round2, r2);
                    owner += 1;
                }
            }
            Ok(TrialOutcome::Pair(
                tally_from_slots(alphabet.clone(), round1),
                tally_from_slots(alphabet, round2),
            ))
        }
        (MechanismConfig::RrBaseline(params), PopulationSpec::Binary { yes, no }) => {
            // Two Bernoulli ticks per owner; the tally counts tick draws,
            // so its total is twice the population.
            let alphabet = baseline_alphabet();
            let mut ticks = vec![0u64; 2];
            for owner in 0..(yes + no) {
                let truth = if owner < *yes { Truth::Yes } else { Truth::No };
                let (truth_tick, blind_tick) = rr_baseline_distributions(truth, params);
                let u = unit_variate(seed, trial, owner, STREAM_PRIMARY);
                let u2 = unit_variate(seed, trial, owner, STREAM_SECONDARY);
                count_into(&alphabet, &mut ticks, draw(&truth_tick, u));
                count_into(&alphabet, &mut ticks, draw(&blind_tick, u2));
            }
            Ok(TrialOutcome::Single(tally_from_slots(alphabet, ticks)))
        }
        (mechanism, PopulationSpec::Binary { yes, no }) => {
            let params = single_response_params(mechanism)?;
            let yes_dist = ddps_distribution(Truth::Yes, &params);
            let no_dist = ddps_distribution(Truth::No, &params);
            let alphabet = binary_alphabet();
            let mut slots = vec![0u64; 3];
            for owner in 0..(yes + no) {
                let dist = if owner < *yes { &yes_dist } else { &no_dist };
                let u = unit_variate(seed, trial, owner, STREAM_PRIMARY);
                count_into(&alphabet, &mut slots, draw(dist, u));
            }
            Ok(TrialOutcome::Single(tally_from_slots(alphabet, slots)))
        }
        _ => unreachable!("validate() rejects mismatched mechanism/population"),
    }
}

/// The two-coin parameterization every binary single-response mechanism
/// reduces to, so one estimator path serves all three.
fn single_response_params(mechanism: &MechanismConfig) -> Result<DdpsParams, SimulationError> {
    match mechanism {
        MechanismConfig::SamplingNoise(p) => Ok(p.as_ddps()),
        MechanismConfig::Deniability(p) => Ok(p.as_ddps()),
        MechanismConfig::Ddps(p) => Ok(*p),
        _ => Err(SimulationError::InvalidConfig(
            "not a single-response mechanism".into(),
        )),
    }
}

/// Monte-Carlo summary of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub mechanism: String,
    pub trials: u32,
    /// Trials whose estimator was non-identifiable; excluded from the mean.
    pub failed_trials: u32,
    pub ground_truth: f64,
    /// Per-trial point estimates, in trial order.
    pub estimates: Vec<f64>,
    pub mean: f64,
    pub empirical_sigma: f64,
    pub confidence_level: f64,
    /// Normal-approximation confidence interval for the mean estimate.
    pub ci: (f64, f64),
    pub abs_error: f64,
    pub rel_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<Box<ExperimentReport>>,
}

fn z_value(confidence_level: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    normal.inverse_cdf(0.5 + confidence_level / 2.0)
}

fn estimate_outcome(
    config: &TrialConfig,
    outcome: &TrialOutcome,
) -> Result<f64, SimulationError> {
    let value = match (&config.mechanism, outcome) {
        (MechanismConfig::Dual(params), TrialOutcome::Pair(first, second)) => {
            estimate_dual(first, second, params, config.coupling)?.value
        }
        (MechanismConfig::MultiValue(params), TrialOutcome::Pair(round1, round2)) => {
            let monitored = match &config.population {
                PopulationSpec::MultiValue { monitored, .. } => *monitored,
                PopulationSpec::Binary { .. } => unreachable!("validated"),
            };
            estimate_multivalue(round1, round2, params, monitored, config.coupling)?.value
        }
        (MechanismConfig::RrBaseline(params), TrialOutcome::Single(tally)) => {
            let owners = config.population.total() as f64;
            estimate_rr_baseline(tally.count_of(Response::Yes), owners, params).value
        }
        (mechanism, TrialOutcome::Single(tally)) => {
            let params = single_response_params(mechanism)?;
            estimate_from_yes(tally, &params)?.value
        }
        _ => unreachable!("trial outcomes match their mechanism"),
    };
    Ok(value)
}

/// Runs `config.trials` independent trials, estimates each, and reduces
/// the results in trial order.
///
/// Trials execute in parallel; the report is bit-identical for identical
/// configurations regardless of thread scheduling. A trial whose estimator
/// reports non-identifiable parameters is counted in `failed_trials` and
/// excluded from the mean rather than aborting the experiment.
pub fn run_experiment(config: &TrialConfig) -> Result<ExperimentReport, SimulationError> {
    config.validate()?;

    let per_trial: Vec<Result<f64, SimulationError>> = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let outcome = run_trial(config, trial)?;
            estimate_outcome(config, &outcome)
        })
        .collect();

    let mut estimates = Vec::with_capacity(per_trial.len());
    let mut failed_trials = 0u32;
    for result in per_trial {
        match result {
            Ok(value) => estimates.push(value),
            Err(SimulationError::Estimate(EstimateError::NonIdentifiable { .. })) => {
                failed_trials += 1;
            }
            Err(other) => return Err(other),
        }
    }

    let n = estimates.len() as f64;
    let mean = if estimates.is_empty() {
        f64::NAN
    } else {
        estimates.iter().sum::<f64>() / n
    };
    let empirical_sigma = if estimates.len() > 1 {
        let ss = estimates.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>();
        (ss / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let confidence_level = config.confidence_level.value();
    let half_width = if estimates.is_empty() {
        f64::NAN
    } else {
        z_value(confidence_level) * empirical_sigma / n.sqrt()
    };
    let ground_truth = config.population.ground_truth() as f64;
    let abs_error = (mean - ground_truth).abs();
    let rel_error = if ground_truth > 0.0 {
        abs_error / ground_truth
    } else if abs_error == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };

    let baseline = match &config.baseline {
        Some(params) if !matches!(config.mechanism, MechanismConfig::RrBaseline(_)) => {
            let baseline_config = TrialConfig {
                mechanism: MechanismConfig::RrBaseline(*params),
                baseline: None,
                ..config.clone()
            };
            Some(Box::new(run_experiment(&baseline_config)?))
        }
        _ => None,
    };

    Ok(ExperimentReport {
        mechanism: config.mechanism.name().to_string(),
        trials: config.trials,
        failed_trials,
        ground_truth,
        estimates,
        mean,
        empirical_sigma,
        confidence_level,
        ci: (mean - half_width, mean + half_width),
        abs_error,
        rel_error,
        baseline,
    })
}

/// Generates one 24-hour cycle of per-window populations for a monitored
/// station: a raised-cosine daily curve with seeded downward jitter.
///
/// The per-window Yes count is
/// `base(w) = round(peak · 0.5 · (1 − cos(2πw / windows)))`, where `peak`
/// is three times the mean per-station load (clamped to the fleet size);
/// every window except the center one is jittered strictly below the peak,
/// so the cycle has exactly one global maximum by construction. The
/// remaining `vehicles − yes` owners form each window's No population.
pub fn synthetic_timeseries(
    stations: u64,
    vehicles: u64,
    windows: u32,
    seed: u64,
) -> Vec<PopulationSpec> {
    assert!(stations >= 1 && vehicles >= 1 && windows >= 1);
    let peak = ((3 * vehicles) / stations).clamp(1, vehicles);
    let peak_window = windows / 2;
    let jitter_span = peak / 10 + 1;

    (0..windows)
        .map(|w| {
            let phase = 2.0 * std::f64::consts::PI * f64::from(w) / f64::from(windows);
            let base = (peak as f64 * 0.5 * (1.0 - phase.cos())).round() as u64;
            let yes = if w == peak_window {
                peak
            } else {
                let jitter =
                    (unit_variate(seed, 0, u64::from(w), STREAM_PRIMARY) * jitter_span as f64)
                        as u64;
                base.min(peak - 1).saturating_sub(jitter)
            };
            PopulationSpec::Binary {
                yes,
                no: vehicles - yes,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prob(v: f64) -> Probability {
        Probability::new(v).unwrap()
    }

    fn dual_config(yes: u64, no: u64, trials: u32) -> TrialConfig {
        TrialConfig {
            mechanism: MechanismConfig::Dual(DualParams::new(0.2, 0.3, 0.05).unwrap()),
            population: PopulationSpec::Binary { yes, no },
            coupling: CouplingMode::Coupled,
            master_seed: 7,
            trials,
            confidence_level: prob(0.99),
            baseline: None,
        }
    }

    #[test]
    fn variate_is_deterministic_and_in_range() {
        for case in 0..1000u64 {
            let u = unit_variate(42, case, case * 31, case % 3);
            assert!((0.0..1.0).contains(&u));
        }
        assert_eq!(unit_variate(1, 2, 3, 0), unit_variate(1, 2, 3, 0));
        assert_ne!(unit_variate(1, 2, 3, 0), unit_variate(1, 2, 3, 1));
        assert_ne!(unit_variate(1, 2, 3, 0), unit_variate(2, 2, 3, 0));
    }

    #[test]
    fn deterministic_mechanism_gives_exact_tally() {
        let config = TrialConfig {
            mechanism: MechanismConfig::SamplingNoise(
                SamplingNoiseParams::new(1.0, 0.0).unwrap(),
            ),
            population: PopulationSpec::Binary { yes: 7, no: 3 },
            coupling: CouplingMode::Coupled,
            master_seed: 1,
            trials: 1,
            confidence_level: prob(0.99),
            baseline: None,
        };
        let TrialOutcome::Single(tally) = run_trial(&config, 0).unwrap() else {
            panic!("single-response mechanism")
        };
        assert_eq!(tally.count_of(Response::Yes), 7.0);
        assert_eq!(tally.count_of(Response::Bottom), 3.0);
        assert_eq!(tally.total(), 10.0);
    }

    #[test]
    fn trials_are_reproducible() {
        let config = dual_config(100, 900, 1);
        let first = run_trial(&config, 0).unwrap();
        let second = run_trial(&config, 0).unwrap();
        assert_eq!(first, second);
        assert_ne!(first, run_trial(&config, 1).unwrap());
    }

    #[test]
    fn dual_zero_slice_tallies_agree_symbol_for_symbol() {
        let mut config = dual_config(100, 900, 1);
        config.mechanism = MechanismConfig::Dual(DualParams::new(0.2, 0.3, 0.0).unwrap());
        let TrialOutcome::Pair(first, second) = run_trial(&config, 0).unwrap() else {
            panic!("dual produces a pair")
        };
        assert_eq!(first, second);
    }

    #[test]
    fn tally_conservation_across_mechanisms() {
        let configs = [
            dual_config(123, 877, 1),
            TrialConfig {
                mechanism: MechanismConfig::Ddps(
                    DdpsParams::new(0.45, 0.50, 0.95, 0.98, 0.068, 0.98).unwrap(),
                ),
                ..dual_config(123, 877, 1)
            },
            TrialConfig {
                mechanism: MechanismConfig::MultiValue(
                    MultiValueParams::new(vec![0.1, 0.2, 0.3, 0.3], 0.1).unwrap(),
                ),
                population: PopulationSpec::MultiValue {
                    counts: vec![400, 300, 300],
                    monitored: 2,
                },
                ..dual_config(0, 0, 1)
            },
        ];
        for config in &configs {
            let total = config.population.total() as f64;
            match run_trial(config, 3).unwrap() {
                TrialOutcome::Single(tally) => assert_eq!(tally.total(), total),
                TrialOutcome::Pair(a, b) => {
                    assert_eq!(a.total(), total);
                    assert_eq!(b.total(), total);
                }
            }
        }
        // The baseline tallies tick draws: two per owner.
        let baseline = TrialConfig {
            mechanism: MechanismConfig::RrBaseline(BaselineParams::new(0.5, 0.25).unwrap()),
            ..dual_config(123, 877, 1)
        };
        let TrialOutcome::Single(ticks) = run_trial(&baseline, 0).unwrap() else {
            panic!("baseline is single")
        };
        assert_eq!(ticks.total(), 2000.0);
    }

    #[test]
    fn coupled_difference_counts_slice_hits_exactly() {
        // Identity of the aligned layout: the second-minus-first ⊥₂
        // difference equals the number of Yes owners whose variate fell in
        // the pi_s slice.
        let config = dual_config(500, 500, 1);
        let MechanismConfig::Dual(params) = &config.mechanism else {
            unreachable!()
        };
        for trial in 0..20 {
            let TrialOutcome::Pair(first, second) = run_trial(&config, trial).unwrap() else {
                panic!("dual produces a pair")
            };
            let mut slice_hits = 0.0;
            for owner in 0..500u64 {
                let u = unit_variate(config.master_seed, u64::from(trial), owner, 0);
                if u >= 1.0 - params.pi_s() {
                    slice_hits += 1.0;
                }
            }
            let diff = second.count_of(Response::Slot(2)) - first.count_of(Response::Slot(2));
            assert_eq!(diff, slice_hits, "trial {trial}");
        }
    }

    #[test]
    fn deterministic_experiment_has_zero_error() {
        let config = TrialConfig {
            mechanism: MechanismConfig::SamplingNoise(
                SamplingNoiseParams::new(1.0, 0.0).unwrap(),
            ),
            population: PopulationSpec::Binary { yes: 70, no: 30 },
            coupling: CouplingMode::Coupled,
            master_seed: 5,
            trials: 25,
            confidence_level: prob(0.99),
            baseline: None,
        };
        let report = run_experiment(&config).unwrap();
        assert_eq!(report.abs_error, 0.0);
        assert_eq!(report.empirical_sigma, 0.0);
        assert_eq!(report.failed_trials, 0);
    }

    #[test]
    fn dual_experiment_is_unbiased_within_monte_carlo_error() {
        let config = dual_config(1000, 9000, 1000);
        let report = run_experiment(&config).unwrap();
        let standard_error = report.empirical_sigma / (report.trials as f64).sqrt();
        assert!(
            (report.mean - 1000.0).abs() <= 4.0 * standard_error,
            "mean {} strays from 1000 (se {standard_error})",
            report.mean
        );
        assert!(report.ci.0 <= report.mean && report.mean <= report.ci.1);
    }

    #[test]
    fn independent_mode_is_also_unbiased() {
        let mut config = dual_config(1000, 9000, 1000);
        config.coupling = CouplingMode::Independent;
        let report = run_experiment(&config).unwrap();
        let standard_error = report.empirical_sigma / (report.trials as f64).sqrt();
        assert!((report.mean - 1000.0).abs() <= 4.0 * standard_error);
    }

    #[test]
    fn experiments_are_bit_identical() {
        let config = dual_config(200, 1800, 50);
        let a = run_experiment(&config).unwrap();
        let b = run_experiment(&config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_identifiable_trials_are_counted_not_fatal() {
        // Uniform sampling with pi_1 = pi_3 = 1 makes the Yes-count
        // estimator's denominator vanish.
        let config = TrialConfig {
            mechanism: MechanismConfig::SamplingNoise(
                SamplingNoiseParams::new(0.05, 0.05).unwrap(),
            ),
            population: PopulationSpec::Binary { yes: 10, no: 90 },
            coupling: CouplingMode::Coupled,
            master_seed: 5,
            trials: 4,
            confidence_level: prob(0.99),
            baseline: None,
        };
        let report = run_experiment(&config).unwrap();
        assert_eq!(report.failed_trials, 4);
        assert!(report.estimates.is_empty());
    }

    #[test]
    fn baseline_comparison_block_is_attached() {
        let mut config = dual_config(100, 900, 20);
        config.baseline = Some(BaselineParams::new(0.5, 0.25).unwrap());
        let report = run_experiment(&config).unwrap();
        let baseline = report.baseline.as_ref().unwrap();
        assert_eq!(baseline.mechanism, "rr-baseline");
        assert_eq!(baseline.trials, 20);
        assert!(baseline.baseline.is_none());
    }

    #[test]
    fn multivalue_experiment_recovers_monitored_count() {
        let config = TrialConfig {
            mechanism: MechanismConfig::MultiValue(
                MultiValueParams::new(vec![0.1, 0.2, 0.3, 0.3], 0.1).unwrap(),
            ),
            population: PopulationSpec::MultiValue {
                counts: vec![500, 300, 200],
                monitored: 2,
            },
            coupling: CouplingMode::Coupled,
            master_seed: 11,
            trials: 400,
            confidence_level: prob(0.99),
            baseline: None,
        };
        let report = run_experiment(&config).unwrap();
        let standard_error = report.empirical_sigma / (report.trials as f64).sqrt();
        assert!((report.mean - 300.0).abs() <= 4.0 * standard_error);
    }

    #[test]
    fn timeseries_is_reproducible_and_conserved() {
        let a = synthetic_timeseries(3220, 47_719, 48, 9);
        let b = synthetic_timeseries(3220, 47_719, 48, 9);
        assert_eq!(a, b);
        assert_eq!(a.len(), 48);
        for window in &a {
            assert_eq!(window.total(), 47_719);
        }
    }

    #[test]
    fn timeseries_has_one_global_peak() {
        let windows = synthetic_timeseries(3220, 47_719, 48, 123);
        let yes_counts: Vec<u64> = windows.iter().map(|w| w.ground_truth()).collect();
        let max = *yes_counts.iter().max().unwrap();
        assert_eq!(yes_counts.iter().filter(|&&y| y == max).count(), 1);
        assert_eq!(yes_counts[24], max);
    }

    #[test]
    fn timeseries_single_window() {
        let windows = synthetic_timeseries(10, 100, 1, 0);
        assert_eq!(windows.len(), 1);
        assert_eq!(windows[0].total(), 100);
    }

    #[test]
    fn config_validation_rejects_mismatches() {
        let mut config = dual_config(1, 1, 0);
        assert!(config.validate().is_err());
        config.trials = 1;
        config.population = PopulationSpec::MultiValue {
            counts: vec![1, 1],
            monitored: 1,
        };
        assert!(config.validate().is_err());
    }
}
