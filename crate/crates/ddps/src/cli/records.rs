//! Machine-readable line records.
//!
//! Every record is one JSON object per line with a `record` field naming
//! its kind; field order is fixed by the struct definitions, so identical
//! runs emit byte-identical output. Tally records round-trip: `estimate`
//! accepts the files `simulate --emit-trials` writes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::estimation::{Estimate, Tally};
use crate::mechanisms::{Response, ResponseDistribution};
use crate::simulation::ExperimentReport;

use super::CliError;

/// Which answer of a multi-answer mechanism a tally belongs to.
pub const ARM_SINGLE: &str = "single";
pub const ARM_FIRST: &str = "a";
pub const ARM_SECOND: &str = "c";
pub const ARM_ROUND1: &str = "round1";
pub const ARM_ROUND2: &str = "round2";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TallyRecord {
    pub record: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<u32>,
    pub trial: u32,
    pub arm: String,
    pub counts: BTreeMap<String, u64>,
    pub total: u64,
}

impl TallyRecord {
    pub fn new(window: Option<u32>, trial: u32, arm: &str, tally: &Tally) -> Self {
        let counts: BTreeMap<String, u64> = tally
            .iter()
            .map(|(symbol, count)| (symbol.label(), count as u64))
            .collect();
        TallyRecord {
            record: "tally".to_string(),
            window,
            trial,
            arm: arm.to_string(),
            total: counts.values().sum(),
            counts,
        }
    }

    pub fn to_tally(&self) -> Result<Tally, CliError> {
        let mut counts = BTreeMap::new();
        for (label, &count) in &self.counts {
            let symbol = Response::parse_label(label).ok_or_else(|| {
                CliError::Parse(format!("unknown response symbol `{label}` in tally record"))
            })?;
            counts.insert(symbol, count);
        }
        Ok(Tally::from_counts(counts))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PmfRecord {
    pub record: &'static str,
    pub mechanism: String,
    pub arm: String,
    pub truth: String,
    pub symbols: Vec<String>,
    pub probs: Vec<f64>,
}

impl PmfRecord {
    pub fn new(mechanism: &str, arm: &str, truth: &str, dist: &ResponseDistribution) -> Self {
        PmfRecord {
            record: "pmf",
            mechanism: mechanism.to_string(),
            arm: arm.to_string(),
            truth: truth.to_string(),
            symbols: dist.alphabet().iter().map(Response::label).collect(),
            probs: dist.probs().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRecord {
    pub record: &'static str,
    pub estimator: String,
    pub value: f64,
    pub sigma: f64,
    pub interval_low: f64,
    pub interval_high: f64,
    pub below_zero: bool,
}

impl EstimateRecord {
    pub fn new(estimator: &str, estimate: &Estimate) -> Self {
        EstimateRecord {
            record: "estimate",
            estimator: estimator.to_string(),
            value: estimate.value,
            sigma: estimate.sigma,
            interval_low: estimate.interval.0,
            interval_high: estimate.interval.1,
            below_zero: estimate.below_zero,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRecord {
    pub record: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<u32>,
    pub mechanism: String,
    pub seed: u64,
    pub trials: u32,
    pub failed_trials: u32,
    pub ground_truth: f64,
    pub mean: f64,
    pub empirical_sigma: f64,
    pub confidence_level: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub abs_error: f64,
    pub rel_error: f64,
}

impl ExperimentRecord {
    pub fn new(window: Option<u32>, seed: u64, report: &ExperimentReport) -> Self {
        ExperimentRecord {
            record: "experiment",
            window,
            mechanism: report.mechanism.clone(),
            seed,
            trials: report.trials,
            failed_trials: report.failed_trials,
            ground_truth: report.ground_truth,
            mean: report.mean,
            empirical_sigma: report.empirical_sigma,
            confidence_level: report.confidence_level,
            ci_low: report.ci.0,
            ci_high: report.ci.1,
            abs_error: report.abs_error,
            rel_error: report.rel_error,
        }
    }
}

/// Reads the tally records of one trial (and window, when given) from a
/// records file, keyed by arm.
pub fn load_tally_records(
    text: &str,
    trial: u32,
    window: Option<u32>,
) -> Result<BTreeMap<String, TallyRecord>, CliError> {
    let mut found = BTreeMap::new();
    for (line_no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        // Skip non-tally records so a whole simulate output file works.
        let Ok(record) = serde_json::from_str::<TallyRecord>(line) else {
            continue;
        };
        if record.record == "tally" && record.trial == trial && record.window == window {
            if found.contains_key(&record.arm) {
                return Err(CliError::Parse(format!(
                    "duplicate tally record for trial {trial} arm `{}` at line {}",
                    record.arm,
                    line_no + 1
                )));
            }
            found.insert(record.arm.clone(), record);
        }
    }
    if found.is_empty() {
        return Err(CliError::Parse(format!(
            "no tally records for trial {trial} in the input"
        )));
    }
    Ok(found)
}
