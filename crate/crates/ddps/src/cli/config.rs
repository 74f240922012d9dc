//! The `simulate` experiment configuration file (TOML).
//!
//! Unknown keys are rejected, probabilities are validated on load, and a
//! `[params]` key belonging to a different mechanism than the selected one
//! is an error. Exactly one of `[population]` and `[dataset]` must be
//! present.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::mechanisms::{
    BaselineParams, CouplingMode, DdpsParams, DeniabilityParams, DualParams, MultiValueParams,
    Probability, SamplingNoiseParams,
};
use crate::simulation::{derive_seed, MechanismConfig, PopulationSpec, TrialConfig};

use super::ingest::ingest_counts_csv;
use super::CliError;

pub const DEFAULT_CONFIDENCE_LEVEL: f64 = 0.99;

/// Which environment variable overrides the default seed.
pub const SEED_ENV_VAR: &str = "DDPS_SEED";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfigFile {
    mechanism: String,
    trials: u32,
    seed: Option<u64>,
    confidence_level: Option<f64>,
    coupling: Option<String>,
    params: ParamsSection,
    population: Option<PopulationSection>,
    dataset: Option<DatasetSection>,
    baseline: Option<BaselineSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsSection {
    pi_s_yes: Option<f64>,
    pi_s_no: Option<f64>,
    pi_1: Option<f64>,
    pi_2: Option<f64>,
    pi_3: Option<f64>,
    pi_s_yes1: Option<f64>,
    pi_s_yes2: Option<f64>,
    pi_bot1: Option<f64>,
    pi_bot2: Option<f64>,
    pi_s: Option<f64>,
    pi_bot: Option<Vec<f64>>,
    s1: Option<f64>,
    s2: Option<f64>,
}

impl ParamsSection {
    fn require(&mut self, key: &str) -> Result<f64, CliError> {
        self.take(key)
            .ok_or_else(|| CliError::Validation(format!("[params] is missing `{key}`")))
    }

    fn take(&mut self, key: &str) -> Option<f64> {
        match key {
            "pi_s_yes" => self.pi_s_yes.take(),
            "pi_s_no" => self.pi_s_no.take(),
            "pi_1" => self.pi_1.take(),
            "pi_2" => self.pi_2.take(),
            "pi_3" => self.pi_3.take(),
            "pi_s_yes1" => self.pi_s_yes1.take(),
            "pi_s_yes2" => self.pi_s_yes2.take(),
            "pi_bot1" => self.pi_bot1.take(),
            "pi_bot2" => self.pi_bot2.take(),
            "pi_s" => self.pi_s.take(),
            "s1" => self.s1.take(),
            "s2" => self.s2.take(),
            _ => unreachable!("unknown param key {key}"),
        }
    }

    /// After the mechanism consumed its keys, anything left is a stray.
    fn ensure_consumed(&self, mechanism: &str) -> Result<(), CliError> {
        let leftovers: Vec<&str> = [
            ("pi_s_yes", self.pi_s_yes.is_some()),
            ("pi_s_no", self.pi_s_no.is_some()),
            ("pi_1", self.pi_1.is_some()),
            ("pi_2", self.pi_2.is_some()),
            ("pi_3", self.pi_3.is_some()),
            ("pi_s_yes1", self.pi_s_yes1.is_some()),
            ("pi_s_yes2", self.pi_s_yes2.is_some()),
            ("pi_bot1", self.pi_bot1.is_some()),
            ("pi_bot2", self.pi_bot2.is_some()),
            ("pi_s", self.pi_s.is_some()),
            ("pi_bot", self.pi_bot.is_some()),
            ("s1", self.s1.is_some()),
            ("s2", self.s2.is_some()),
        ]
        .into_iter()
        .filter_map(|(name, set)| set.then_some(name))
        .collect();
        if leftovers.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(format!(
                "[params] keys not used by mechanism `{mechanism}`: {}",
                leftovers.join(", ")
            )))
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PopulationSection {
    yes: Option<u64>,
    no: Option<u64>,
    counts: Option<Vec<u64>>,
    monitored: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetSection {
    path: PathBuf,
    station: String,
    fleet: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BaselineSection {
    s1: f64,
    s2: f64,
}

/// A fully validated experiment: one trial configuration per window.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    /// `(window index or None for a single population, config)`.
    pub windows: Vec<(Option<u32>, TrialConfig)>,
    pub master_seed: u64,
}

impl ExperimentConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|err| CliError::Parse(format!("{}: {err}", path.display())))
    }

    /// Resolves the seed (flag beats file beats `DDPS_SEED` beats 0),
    /// builds the mechanism, and expands the population or dataset into
    /// per-window trial configurations.
    pub fn into_plan(mut self, seed_flag: Option<u64>) -> Result<ExperimentPlan, CliError> {
        let master_seed = seed_flag.or(self.seed).or_else(seed_from_env).unwrap_or(0);

        let coupling = match self.coupling.as_deref() {
            None | Some("coupled") => CouplingMode::Coupled,
            Some("independent") => CouplingMode::Independent,
            Some(other) => {
                return Err(CliError::Validation(format!(
                    "coupling must be `coupled` or `independent`, got `{other}`"
                )))
            }
        };
        let confidence_level =
            Probability::named("confidence_level", self.confidence_level.unwrap_or(DEFAULT_CONFIDENCE_LEVEL))?;

        let mechanism = build_mechanism(&self.mechanism, &mut self.params)?;
        self.params.ensure_consumed(&self.mechanism)?;

        let baseline = self
            .baseline
            .map(|section| BaselineParams::new(section.s1, section.s2))
            .transpose()?;

        let populations: Vec<(Option<u32>, PopulationSpec)> =
            match (self.population, self.dataset) {
                (Some(_), Some(_)) => {
                    return Err(CliError::Validation(
                        "specify either [population] or [dataset], not both".into(),
                    ))
                }
                (None, None) => {
                    return Err(CliError::Validation(
                        "one of [population] or [dataset] is required".into(),
                    ))
                }
                (Some(population), None) => vec![(None, build_population(population)?)],
                (None, Some(dataset)) => dataset_windows(&dataset)?,
            };

        let windows = populations
            .into_iter()
            .map(|(window, population)| {
                let config = TrialConfig {
                    mechanism: mechanism.clone(),
                    population,
                    coupling,
                    master_seed: match window {
                        Some(w) => derive_seed(master_seed, u64::from(w)),
                        None => master_seed,
                    },
                    trials: self.trials,
                    confidence_level,
                    baseline,
                };
                config.validate().map_err(CliError::from)?;
                Ok((window, config))
            })
            .collect::<Result<Vec<_>, CliError>>()?;

        Ok(ExperimentPlan {
            windows,
            master_seed,
        })
    }
}

fn seed_from_env() -> Option<u64> {
    let raw = std::env::var(SEED_ENV_VAR).ok()?;
    raw.trim().parse().ok()
}

fn build_mechanism(
    name: &str,
    params: &mut ParamsSection,
) -> Result<MechanismConfig, CliError> {
    let mechanism = match name {
        "sampling-noise" => MechanismConfig::SamplingNoise(SamplingNoiseParams::new(
            params.require("pi_s_yes")?,
            params.require("pi_s_no")?,
        )?),
        "deniability" => MechanismConfig::Deniability(DeniabilityParams::new(
            params.require("pi_s_yes")?,
            params.require("pi_s_no")?,
            params.require("pi_1")?,
            params.require("pi_2")?,
        )?),
        "ddps" => MechanismConfig::Ddps(DdpsParams::new(
            params.require("pi_s_yes1")?,
            params.require("pi_s_yes2")?,
            params.require("pi_1")?,
            params.require("pi_2")?,
            params.require("pi_s_no")?,
            params.require("pi_3")?,
        )?),
        "dual" => MechanismConfig::Dual(DualParams::new(
            params.require("pi_bot1")?,
            params.require("pi_bot2")?,
            params.require("pi_s")?,
        )?),
        "multi-value" => {
            let pi_bot = params.pi_bot.take().ok_or_else(|| {
                CliError::Validation("[params] is missing `pi_bot`".into())
            })?;
            MechanismConfig::MultiValue(MultiValueParams::new(pi_bot, params.require("pi_s")?)?)
        }
        "rr-baseline" => MechanismConfig::RrBaseline(BaselineParams::new(
            params.require("s1")?,
            params.require("s2")?,
        )?),
        other => {
            return Err(CliError::Validation(format!(
                "unknown mechanism `{other}` (expected sampling-noise, deniability, ddps, dual, multi-value or rr-baseline)"
            )))
        }
    };
    Ok(mechanism)
}

fn build_population(section: PopulationSection) -> Result<PopulationSpec, CliError> {
    match section {
        PopulationSection {
            yes: Some(yes),
            no: Some(no),
            counts: None,
            monitored: None,
        } => Ok(PopulationSpec::Binary { yes, no }),
        PopulationSection {
            yes: None,
            no: None,
            counts: Some(counts),
            monitored: Some(monitored),
        } => Ok(PopulationSpec::MultiValue { counts, monitored }),
        _ => Err(CliError::Validation(
            "[population] needs either `yes` and `no`, or `counts` and `monitored`".into(),
        )),
    }
}

/// Turns the dataset into per-window binary populations: the monitored
/// station's count is the Yes population, the rest of the fleet the No
/// population. Windows are ordered by timestamp; the fleet defaults to the
/// per-window sum over all stations.
fn dataset_windows(
    dataset: &DatasetSection,
) -> Result<Vec<(Option<u32>, PopulationSpec)>, CliError> {
    let records = ingest_counts_csv(&dataset.path)?;
    let mut starts: Vec<chrono::DateTime<chrono::Utc>> =
        records.iter().map(|r| r.window_start).collect();
    starts.sort();
    starts.dedup();
    if starts.is_empty() {
        return Err(CliError::Validation(format!(
            "{}: dataset has no windows",
            dataset.path.display()
        )));
    }

    let mut windows = Vec::with_capacity(starts.len());
    for (index, start) in starts.iter().enumerate() {
        let in_window: Vec<_> = records
            .iter()
            .filter(|r| r.window_start == *start)
            .collect();
        let yes = in_window
            .iter()
            .find(|r| r.station_id == dataset.station)
            .map_or(0, |r| r.vehicle_count);
        let fleet = match dataset.fleet {
            Some(fleet) => fleet,
            None => in_window.iter().map(|r| r.vehicle_count).sum(),
        };
        if yes > fleet {
            return Err(CliError::Validation(format!(
                "window {start}: station {} reports {yes} vehicles but the fleet is {fleet}",
                dataset.station
            )));
        }
        windows.push((
            Some(index as u32),
            PopulationSpec::Binary {
                yes,
                no: fleet - yes,
            },
        ));
    }
    Ok(windows)
}
