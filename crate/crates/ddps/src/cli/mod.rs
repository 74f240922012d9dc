//! The `ddps` command-line front end.
//!
//! Six subcommands cover the library surface: `pmf` (exact distributions),
//! `simulate` (Monte-Carlo experiments from a config file), `estimate`
//! (estimators over observed tallies), `epsilon` (leakage), `crowd`
//! (crowd-size and multi-location analyses) and `tune` (variance-minimizing
//! grid search). Every subcommand emits either a human-readable table or
//! line-delimited JSON records (`--output records`); identical inputs and
//! seeds produce byte-identical record output.
//!
//! Exit codes: 0 on success, 1 with a categorized `error:` line on domain
//! failures, 2 on usage errors.

mod config;
mod ingest;
mod records;

pub use config::{ExperimentConfigFile, ExperimentPlan, DEFAULT_CONFIDENCE_LEVEL, SEED_ENV_VAR};
pub use ingest::{ingest_counts_csv, CountsRecord, COUNTS_HEADER};
pub use records::{EstimateRecord, ExperimentRecord, PmfRecord, TallyRecord};

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::estimation::{
    estimate_dual, estimate_from_bottom, estimate_from_no, estimate_from_yes,
    estimate_multivalue, estimate_rr_baseline, solve_sign_system, Estimate, EstimateError, Tally,
};
use crate::mechanisms::{
    ddps_distribution, deniability_distribution, dual_distributions, multivalue_distributions,
    rr_baseline_distributions, sampling_noise_distribution, BaselineParams, CouplingMode,
    DdpsParams, DeniabilityParams, DualParams, MultiValueParams, ParamError, Probability,
    Response, ResponseDistribution, SamplingNoiseParams, Truth,
};
use crate::privacy::{crowd_size, epsilon_dual, location_spread};
use crate::simulation::{run_experiment, run_trial, MechanismConfig, SimulationError, TrialOutcome};
use crate::tuning::{grid_search_min_variance, ParamRange, SearchError, SearchSpec};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parameter-domain: {0}")]
    Param(#[from] ParamError),
    #[error("estimation: {0}")]
    Estimate(#[from] EstimateError),
    #[error("search: {0}")]
    Search(#[from] SearchError),
    #[error("simulation: {0}")]
    Simulation(#[from] SimulationError),
    #[error("parse: {0}")]
    Parse(String),
    #[error("validation: {0}")]
    Validation(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialize: {0}")]
    Serialize(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputMode {
    /// Human-readable tables
    Human,
    /// Line-delimited JSON records (one record per line)
    Records,
}

#[derive(Debug, Parser)]
#[command(
    name = "ddps",
    version,
    about = "Distributed differential privacy by sampling: mechanisms, estimators, leakage and crowd analysis"
)]
pub struct Cli {
    /// Output format for results
    #[arg(long, global = true, value_enum, default_value_t = OutputMode::Human)]
    pub output: OutputMode,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print a mechanism's exact response distribution
    Pmf {
        #[command(subcommand)]
        mechanism: PmfCommand,
    },
    /// Run a Monte-Carlo experiment described by a config file
    Simulate(SimulateArgs),
    /// Apply an estimator to observed tallies
    Estimate {
        #[command(subcommand)]
        estimator: EstimateCommand,
    },
    /// Differential-privacy leakage of the dual mechanism
    Epsilon(EpsilonArgs),
    /// Crowd-size and multi-location analyses
    Crowd {
        #[command(subcommand)]
        analysis: CrowdCommand,
    },
    /// Grid-search mechanism parameters minimizing the count variance
    Tune(TuneArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TruthArg {
    Yes,
    No,
}

impl From<TruthArg> for Truth {
    fn from(arg: TruthArg) -> Truth {
        match arg {
            TruthArg::Yes => Truth::Yes,
            TruthArg::No => Truth::No,
        }
    }
}

#[derive(Debug, Args)]
pub struct SamplingNoiseFlags {
    /// Sampling probability of the Yes population, in [0, 1]
    #[arg(long)]
    pub pi_s_yes: f64,
    /// Sampling probability of the No population, in [0, 1]
    #[arg(long)]
    pub pi_s_no: f64,
}

impl SamplingNoiseFlags {
    fn build(&self) -> Result<SamplingNoiseParams, CliError> {
        Ok(SamplingNoiseParams::new(self.pi_s_yes, self.pi_s_no)?)
    }
}

#[derive(Debug, Args)]
pub struct DeniabilityFlags {
    /// Sampling probability of the Yes population, in [0, 1]
    #[arg(long)]
    pub pi_s_yes: f64,
    /// Sampling probability of the No population, in [0, 1]
    #[arg(long)]
    pub pi_s_no: f64,
    /// Truthful-answer coin, in [0, 1]
    #[arg(long)]
    pub pi_1: f64,
    /// Forced-answer coin, in [0, 1]
    #[arg(long)]
    pub pi_2: f64,
}

impl DeniabilityFlags {
    fn build(&self) -> Result<DeniabilityParams, CliError> {
        Ok(DeniabilityParams::new(
            self.pi_s_yes,
            self.pi_s_no,
            self.pi_1,
            self.pi_2,
        )?)
    }
}

#[derive(Debug, Args)]
pub struct DdpsFlags {
    /// First Yes sampling slice, in [0, 1]
    #[arg(long)]
    pub pi_s_yes1: f64,
    /// Second Yes sampling slice, in [0, 1]; the two slices may sum to at most 1
    #[arg(long)]
    pub pi_s_yes2: f64,
    /// Truthful coin of the first slice, in [0, 1]
    #[arg(long)]
    pub pi_1: f64,
    /// Forcing coin of the second slice, in [0, 1]
    #[arg(long)]
    pub pi_2: f64,
    /// Sampling probability of the No population, in [0, 1]
    #[arg(long)]
    pub pi_s_no: f64,
    /// Noise coin of the sampled No population, in [0, 1]
    #[arg(long)]
    pub pi_3: f64,
}

impl DdpsFlags {
    fn build(&self) -> Result<DdpsParams, CliError> {
        Ok(DdpsParams::new(
            self.pi_s_yes1,
            self.pi_s_yes2,
            self.pi_1,
            self.pi_2,
            self.pi_s_no,
            self.pi_3,
        )?)
    }
}

#[derive(Debug, Args)]
pub struct DualFlags {
    /// Probability of the first category, in [0, 1]
    #[arg(long)]
    pub pi_bot1: f64,
    /// Probability of the second category, in [0, 1]
    #[arg(long)]
    pub pi_bot2: f64,
    /// Sampled slice relabeled between the two answers, in [0, 1];
    /// pi_bot1 + pi_bot2 + pi_s may sum to at most 1
    #[arg(long)]
    pub pi_s: f64,
}

impl DualFlags {
    fn build(&self) -> Result<DualParams, CliError> {
        Ok(DualParams::new(self.pi_bot1, self.pi_bot2, self.pi_s)?)
    }
}

#[derive(Debug, Args)]
pub struct MultiValueFlags {
    /// Comma-separated category probabilities for ⊥0..⊥V (V+1 values, each in [0, 1])
    #[arg(long, value_delimiter = ',', num_args = 2..)]
    pub pi_bot: Vec<f64>,
    /// Sampled slice relabeled between the two rounds, in [0, 1]
    #[arg(long)]
    pub pi_s: f64,
}

impl MultiValueFlags {
    fn build(&self) -> Result<MultiValueParams, CliError> {
        Ok(MultiValueParams::new(self.pi_bot.clone(), self.pi_s)?)
    }
}

#[derive(Debug, Args)]
pub struct BaselineFlags {
    /// Truth-tick probability of Yes owners, in (0, 1]
    #[arg(long)]
    pub s1: f64,
    /// Blind-tick probability of every owner, in [0, 1]
    #[arg(long)]
    pub s2: f64,
}

impl BaselineFlags {
    fn build(&self) -> Result<BaselineParams, CliError> {
        Ok(BaselineParams::new(self.s1, self.s2)?)
    }
}

#[derive(Debug, Subcommand)]
pub enum PmfCommand {
    /// Sampling with the No population answering "Yes"
    SamplingNoise {
        #[command(flatten)]
        params: SamplingNoiseFlags,
        /// Ground truth of the owner
        #[arg(long, value_enum)]
        truth: TruthArg,
    },
    /// Sampling with plausible-deniability coin tosses
    Deniability {
        #[command(flatten)]
        params: DeniabilityFlags,
        /// Ground truth of the owner
        #[arg(long, value_enum)]
        truth: TruthArg,
    },
    /// The tuned two-coin mechanism
    Ddps {
        #[command(flatten)]
        params: DdpsFlags,
        /// Ground truth of the owner
        #[arg(long, value_enum)]
        truth: TruthArg,
    },
    /// The dual-response mechanism (both answers)
    Dual {
        #[command(flatten)]
        params: DualFlags,
        /// Ground truth of the owner
        #[arg(long, value_enum)]
        truth: TruthArg,
    },
    /// The two-round multi-value mechanism (both rounds)
    MultiValue {
        #[command(flatten)]
        params: MultiValueFlags,
        /// The owner's truthful value index, 1-based
        #[arg(long)]
        truth_index: usize,
    },
    /// The randomized-response baseline (truth tick and blind tick)
    RrBaseline {
        #[command(flatten)]
        params: BaselineFlags,
        /// Ground truth of the owner
        #[arg(long, value_enum)]
        truth: TruthArg,
    },
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Path to the experiment config file (TOML)
    #[arg(long)]
    pub config: PathBuf,
    /// Master seed; overrides the config file and the DDPS_SEED variable
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also emit one tally record per trial (records output)
    #[arg(long)]
    pub emit_trials: bool,
}

/// Observation input shared by the single-tally estimators: either an
/// explicit count, or a tally record file written by `simulate`.
#[derive(Debug, Args)]
pub struct ObservationInput {
    /// Observed count of the estimator's symbol (non-negative)
    #[arg(long, conflicts_with = "record", requires = "total")]
    pub observed: Option<f64>,
    /// Total number of data owners (non-negative)
    #[arg(long, conflicts_with = "record")]
    pub total: Option<f64>,
    /// Read the tally from a records file written by `simulate --emit-trials`
    #[arg(long)]
    pub record: Option<PathBuf>,
    /// Trial index to read from the records file
    #[arg(long, default_value_t = 0)]
    pub trial: u32,
    /// Window index to read from the records file
    #[arg(long)]
    pub window: Option<u32>,
}

impl ObservationInput {
    /// Resolves to a tally; `symbol` is where an explicit `--observed`
    /// count lands, with the remainder on a distinct filler symbol.
    fn tally(&self, symbol: Response, arm: &str) -> Result<Tally, CliError> {
        match (&self.record, self.observed, self.total) {
            (Some(path), _, _) => {
                let text = std::fs::read_to_string(path)?;
                let tallies = records::load_tally_records(&text, self.trial, self.window)?;
                let record = tallies.get(arm).ok_or_else(|| {
                    CliError::Parse(format!("no `{arm}` tally record for trial {}", self.trial))
                })?;
                record.to_tally()
            }
            (None, Some(observed), Some(total)) => observed_tally(symbol, observed, total),
            _ => Err(CliError::Validation(
                "provide either --observed and --total, or --record".into(),
            )),
        }
    }
}

/// A tally carrying `observed` of `symbol` with the remainder on a filler
/// symbol; only the named count and the total matter to the estimators.
fn observed_tally(symbol: Response, observed: f64, total: f64) -> Result<Tally, CliError> {
    if observed > total {
        return Err(CliError::Validation(format!(
            "observed count {observed} exceeds total {total}"
        )));
    }
    let filler = if symbol == Response::Bottom {
        Response::Yes
    } else {
        Response::Bottom
    };
    Ok(Tally::from_expected([
        (symbol, observed),
        (filler, total - observed),
    ])?)
}

#[derive(Debug, Subcommand)]
pub enum EstimateCommand {
    /// Invert the expected "Yes" count of the two-coin mechanism
    FromYes {
        #[command(flatten)]
        params: DdpsFlags,
        #[command(flatten)]
        input: ObservationInput,
    },
    /// Invert the expected "No" count of the two-coin mechanism
    FromNo {
        #[command(flatten)]
        params: DdpsFlags,
        #[command(flatten)]
        input: ObservationInput,
    },
    /// Invert the expected ⊥ count of the two-coin mechanism
    FromBottom {
        #[command(flatten)]
        params: DdpsFlags,
        #[command(flatten)]
        input: ObservationInput,
    },
    /// Solve the ±σ sign system over the Yes and ⊥ counts
    SignSystem {
        #[command(flatten)]
        params: DdpsFlags,
        /// Observed "Yes" count
        #[arg(long)]
        observed_yes: f64,
        /// Observed ⊥ count
        #[arg(long)]
        observed_bottom: f64,
        /// Total number of data owners
        #[arg(long)]
        total: f64,
    },
    /// Difference estimator of the dual mechanism
    Dual {
        #[command(flatten)]
        params: DualFlags,
        /// ⊥2 count of the first answer (omit when using --record)
        #[arg(long, conflicts_with = "record", requires = "count_c")]
        count_a: Option<f64>,
        /// ⊥2 count of the second answer
        #[arg(long, conflicts_with = "record")]
        count_c: Option<f64>,
        /// Total number of data owners
        #[arg(long, conflicts_with = "record")]
        total: Option<f64>,
        /// Read both tallies from a records file written by `simulate --emit-trials`
        #[arg(long)]
        record: Option<PathBuf>,
        /// Trial index to read from the records file
        #[arg(long, default_value_t = 0)]
        trial: u32,
        /// Window index to read from the records file
        #[arg(long)]
        window: Option<u32>,
        /// Use the independent-draws deviation model instead of coupled
        #[arg(long)]
        independent: bool,
    },
    /// Per-value difference estimator of the multi-value mechanism
    MultiValue {
        #[command(flatten)]
        params: MultiValueFlags,
        /// ⊥v count of round one
        #[arg(long)]
        count_round1: f64,
        /// ⊥v count of round two
        #[arg(long)]
        count_round2: f64,
        /// Total number of data owners
        #[arg(long)]
        total: f64,
        /// Value index v to estimate, 1-based
        #[arg(long)]
        value_index: usize,
        /// Use the independent-draws deviation model instead of coupled
        #[arg(long)]
        independent: bool,
    },
    /// Blind-subtracting estimator of the randomized-response baseline
    RrBaseline {
        #[command(flatten)]
        params: BaselineFlags,
        /// Aggregate "Yes" tick count
        #[arg(long)]
        aggregate: f64,
        /// Total number of data owners
        #[arg(long)]
        total: f64,
    },
}

#[derive(Debug, Args)]
pub struct EpsilonArgs {
    /// Probability of the ⊥2 category, in [0, 1]
    #[arg(long)]
    pub pi_bot2: f64,
    /// Probability of the ⊥3 category, in [0, 1]
    #[arg(long)]
    pub pi_bot3: f64,
    /// Sampled slice, in [0, 1]
    #[arg(long)]
    pub pi_s: f64,
}

#[derive(Debug, Subcommand)]
pub enum CrowdCommand {
    /// How many noisy-"Yes" owners a truthful responder blends with
    Size {
        /// Blending population size
        #[arg(long)]
        n: u64,
        /// Per-owner noisy-"Yes" probability, in [0, 1]
        #[arg(long)]
        p: f64,
        /// Confidence of the ccdf threshold, in (0, 1)
        #[arg(long, default_value_t = DEFAULT_CONFIDENCE_LEVEL)]
        confidence: f64,
    },
    /// How many locations one owner appears to claim across queries
    Locations {
        /// Number of station queries answered
        #[arg(long)]
        queries: u64,
        /// Per-query noisy-"Yes" probability, in [0, 1]
        #[arg(long)]
        p: f64,
        /// Confidence of the ccdf threshold, in (0, 1)
        #[arg(long, default_value_t = DEFAULT_CONFIDENCE_LEVEL)]
        confidence: f64,
    },
}

fn parse_param_range(raw: &str) -> Result<ParamRange, String> {
    let build = |lo: f64, hi: f64| ParamRange::new(lo, hi).map_err(|err| err.to_string());
    match raw.split_once(':') {
        Some((lo, hi)) => {
            let lo: f64 = lo.trim().parse().map_err(|_| format!("bad bound `{lo}`"))?;
            let hi: f64 = hi.trim().parse().map_err(|_| format!("bad bound `{hi}`"))?;
            build(lo, hi)
        }
        None => {
            let value: f64 = raw.trim().parse().map_err(|_| format!("bad value `{raw}`"))?;
            build(value, value)
        }
    }
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    /// Yes population count
    #[arg(long)]
    pub yes: u64,
    /// No population count
    #[arg(long)]
    pub no: u64,
    /// Grid step size, positive
    #[arg(long, default_value_t = 0.05)]
    pub step: f64,
    /// Reject grid points whose worst-case log likelihood ratio exceeds this
    #[arg(long)]
    pub epsilon_budget: Option<f64>,
    /// Range `lo:hi` or fixed value for the first Yes sampling slice
    #[arg(long, default_value = "0:1", value_parser = parse_param_range)]
    pub pi_s_yes1: ParamRange,
    /// Range `lo:hi` or fixed value for the second Yes sampling slice
    #[arg(long, default_value = "0:1", value_parser = parse_param_range)]
    pub pi_s_yes2: ParamRange,
    /// Range `lo:hi` or fixed value for the truthful coin
    #[arg(long, default_value = "0:1", value_parser = parse_param_range)]
    pub pi_1: ParamRange,
    /// Range `lo:hi` or fixed value for the forcing coin
    #[arg(long, default_value = "0:1", value_parser = parse_param_range)]
    pub pi_2: ParamRange,
    /// Range `lo:hi` or fixed value for the No sampling probability
    #[arg(long, default_value = "0:1", value_parser = parse_param_range)]
    pub pi_s_no: ParamRange,
    /// Range `lo:hi` or fixed value for the No noise coin
    #[arg(long, default_value = "0:1", value_parser = parse_param_range)]
    pub pi_3: ParamRange,
}

/// Executes a parsed command, writing results to `out`.
pub fn run(cli: &Cli, out: &mut impl Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Pmf { mechanism } => run_pmf(mechanism, cli.output, out),
        Command::Simulate(args) => run_simulate(args, cli.output, out),
        Command::Estimate { estimator } => run_estimate(estimator, cli.output, out),
        Command::Epsilon(args) => run_epsilon(args, cli.output, out),
        Command::Crowd { analysis } => run_crowd(analysis, cli.output, out),
        Command::Tune(args) => run_tune(args, cli.output, out),
    }
}

fn emit_record(out: &mut impl Write, record: &impl Serialize) -> Result<(), CliError> {
    serde_json::to_writer(&mut *out, record)?;
    writeln!(out)?;
    Ok(())
}

fn print_distribution(
    out: &mut impl Write,
    heading: &str,
    dist: &ResponseDistribution,
) -> Result<(), CliError> {
    writeln!(out, "{heading}")?;
    for (symbol, p) in dist.iter() {
        writeln!(out, "  {:<6} {p}", symbol.label())?;
    }
    Ok(())
}

fn truth_label(truth: TruthArg) -> &'static str {
    match truth {
        TruthArg::Yes => "yes",
        TruthArg::No => "no",
    }
}

fn run_pmf(command: &PmfCommand, output: OutputMode, out: &mut impl Write) -> Result<(), CliError> {
    // (mechanism, arm, truth label, distribution) rows to print or emit.
    let mut rows: Vec<(&str, String, String, ResponseDistribution)> = Vec::new();
    match command {
        PmfCommand::SamplingNoise { params, truth } => {
            let dist = sampling_noise_distribution((*truth).into(), &params.build()?);
            rows.push(("sampling-noise", "single".into(), truth_label(*truth).into(), dist));
        }
        PmfCommand::Deniability { params, truth } => {
            let dist = deniability_distribution((*truth).into(), &params.build()?);
            rows.push(("deniability", "single".into(), truth_label(*truth).into(), dist));
        }
        PmfCommand::Ddps { params, truth } => {
            let dist = ddps_distribution((*truth).into(), &params.build()?);
            rows.push(("ddps", "single".into(), truth_label(*truth).into(), dist));
        }
        PmfCommand::Dual { params, truth } => {
            let (first, second) = dual_distributions((*truth).into(), &params.build()?);
            let truth = truth_label(*truth);
            rows.push(("dual", records::ARM_FIRST.into(), truth.into(), first));
            rows.push(("dual", records::ARM_SECOND.into(), truth.into(), second));
        }
        PmfCommand::MultiValue {
            params,
            truth_index,
        } => {
            let (round1, round2) = multivalue_distributions(*truth_index, &params.build()?)?;
            let truth = truth_index.to_string();
            rows.push(("multi-value", records::ARM_ROUND1.into(), truth.clone(), round1));
            rows.push(("multi-value", records::ARM_ROUND2.into(), truth, round2));
        }
        PmfCommand::RrBaseline { params, truth } => {
            let (truth_tick, blind_tick) = rr_baseline_distributions((*truth).into(), &params.build()?);
            let truth = truth_label(*truth);
            rows.push(("rr-baseline", "truth-tick".into(), truth.into(), truth_tick));
            rows.push(("rr-baseline", "blind-tick".into(), truth.into(), blind_tick));
        }
    }

    for (mechanism, arm, truth, dist) in &rows {
        match output {
            OutputMode::Human => {
                let heading = if arm == "single" {
                    format!("pmf {mechanism} (truth = {truth})")
                } else {
                    format!("pmf {mechanism} [{arm}] (truth = {truth})")
                };
                print_distribution(out, &heading, dist)?;
            }
            OutputMode::Records => emit_record(out, &PmfRecord::new(mechanism, arm, truth, dist))?,
        }
    }
    Ok(())
}

fn trial_arms(mechanism: &MechanismConfig) -> (&'static str, &'static str) {
    match mechanism {
        MechanismConfig::Dual(_) => (records::ARM_FIRST, records::ARM_SECOND),
        MechanismConfig::MultiValue(_) => (records::ARM_ROUND1, records::ARM_ROUND2),
        _ => (records::ARM_SINGLE, records::ARM_SINGLE),
    }
}

fn run_simulate(
    args: &SimulateArgs,
    output: OutputMode,
    out: &mut impl Write,
) -> Result<(), CliError> {
    let plan = ExperimentConfigFile::load(&args.config)?.into_plan(args.seed)?;
    for (window, config) in &plan.windows {
        if args.emit_trials && output == OutputMode::Records {
            for trial in 0..config.trials {
                let outcome = run_trial(config, trial)?;
                let (first_arm, second_arm) = trial_arms(&config.mechanism);
                match outcome {
                    TrialOutcome::Single(tally) => {
                        emit_record(out, &TallyRecord::new(*window, trial, first_arm, &tally))?;
                    }
                    TrialOutcome::Pair(first, second) => {
                        emit_record(out, &TallyRecord::new(*window, trial, first_arm, &first))?;
                        emit_record(out, &TallyRecord::new(*window, trial, second_arm, &second))?;
                    }
                }
            }
        }

        let report = run_experiment(config)?;
        match output {
            OutputMode::Records => {
                emit_record(
                    out,
                    &ExperimentRecord::new(*window, config.master_seed, &report),
                )?;
                if let Some(baseline) = &report.baseline {
                    emit_record(
                        out,
                        &ExperimentRecord::new(*window, config.master_seed, baseline),
                    )?;
                }
            }
            OutputMode::Human => {
                print_report(out, *window, config.master_seed, &report)?;
                if let Some(baseline) = &report.baseline {
                    print_report(out, *window, config.master_seed, baseline)?;
                }
            }
        }
    }
    Ok(())
}

fn print_report(
    out: &mut impl Write,
    window: Option<u32>,
    seed: u64,
    report: &crate::simulation::ExperimentReport,
) -> Result<(), CliError> {
    match window {
        Some(w) => writeln!(out, "window {w}  mechanism {}  seed {seed}", report.mechanism)?,
        None => writeln!(out, "mechanism {}  seed {seed}", report.mechanism)?,
    }
    writeln!(out, "  ground truth    {}", report.ground_truth)?;
    writeln!(
        out,
        "  trials          {} ({} non-identifiable)",
        report.trials, report.failed_trials
    )?;
    writeln!(out, "  mean estimate   {}", report.mean)?;
    writeln!(out, "  empirical sigma {}", report.empirical_sigma)?;
    writeln!(
        out,
        "  {:.0}% CI          [{}, {}]",
        report.confidence_level * 100.0,
        report.ci.0,
        report.ci.1
    )?;
    writeln!(out, "  abs error       {}", report.abs_error)?;
    writeln!(out, "  rel error       {}", report.rel_error)?;
    Ok(())
}

fn print_estimate(
    out: &mut impl Write,
    output: OutputMode,
    estimator: &str,
    estimate: &Estimate,
) -> Result<(), CliError> {
    match output {
        OutputMode::Records => emit_record(out, &EstimateRecord::new(estimator, estimate)),
        OutputMode::Human => {
            writeln!(out, "estimator {estimator}")?;
            writeln!(out, "  value          {}", estimate.value)?;
            writeln!(out, "  count sigma    {}", estimate.sigma)?;
            writeln!(
                out,
                "  interval       [{}, {}]",
                estimate.interval.0, estimate.interval.1
            )?;
            if estimate.below_zero {
                writeln!(out, "  note           estimate fell below zero")?;
            }
            Ok(())
        }
    }
}

fn run_estimate(
    command: &EstimateCommand,
    output: OutputMode,
    out: &mut impl Write,
) -> Result<(), CliError> {
    match command {
        EstimateCommand::FromYes { params, input } => {
            let tally = input.tally(Response::Yes, records::ARM_SINGLE)?;
            let estimate = estimate_from_yes(&tally, &params.build()?)?;
            print_estimate(out, output, "from-yes", &estimate)
        }
        EstimateCommand::FromNo { params, input } => {
            let tally = input.tally(Response::No, records::ARM_SINGLE)?;
            let estimate = estimate_from_no(&tally, &params.build()?)?;
            print_estimate(out, output, "from-no", &estimate)
        }
        EstimateCommand::FromBottom { params, input } => {
            let tally = input.tally(Response::Bottom, records::ARM_SINGLE)?;
            let estimate = estimate_from_bottom(&tally, &params.build()?)?;
            print_estimate(out, output, "from-bottom", &estimate)
        }
        EstimateCommand::SignSystem {
            params,
            observed_yes,
            observed_bottom,
            total,
        } => {
            let solution_set =
                solve_sign_system(*observed_yes, *observed_bottom, *total, &params.build()?);
            match output {
                OutputMode::Records => {
                    #[derive(Serialize)]
                    struct SignSystemRecord<'a> {
                        record: &'static str,
                        #[serde(flatten)]
                        solutions: &'a crate::estimation::SolutionSet,
                    }
                    emit_record(
                        out,
                        &SignSystemRecord {
                            record: "sign-system",
                            solutions: &solution_set,
                        },
                    )
                }
                OutputMode::Human => {
                    if solution_set.degenerate {
                        let line = solution_set.dependency.expect("degenerate sets carry a line");
                        writeln!(out, "degenerate: the Yes and bottom equations are dependent")?;
                        writeln!(
                            out,
                            "  solution family: {} * YES + sigma = {}",
                            line.yes_coeff, line.rhs
                        )?;
                    } else {
                        writeln!(out, "solutions (yes, sigma, signs):")?;
                        for solution in &solution_set.solutions {
                            writeln!(
                                out,
                                "  yes {:<12} sigma {:<12} signs ({:+}, {:+})",
                                solution.yes, solution.sigma, solution.signs.0, solution.signs.1
                            )?;
                        }
                    }
                    Ok(())
                }
            }
        }
        EstimateCommand::Dual {
            params,
            count_a,
            count_c,
            total,
            record,
            trial,
            window,
            independent,
        } => {
            let params = params.build()?;
            let (first, second) = match record {
                Some(path) => {
                    let text = std::fs::read_to_string(path)?;
                    let tallies = records::load_tally_records(&text, *trial, *window)?;
                    let get = |arm: &str| -> Result<Tally, CliError> {
                        tallies
                            .get(arm)
                            .ok_or_else(|| {
                                CliError::Parse(format!(
                                    "no `{arm}` tally record for trial {trial}"
                                ))
                            })?
                            .to_tally()
                    };
                    (get(records::ARM_FIRST)?, get(records::ARM_SECOND)?)
                }
                None => {
                    let (Some(a), Some(c), Some(total)) = (count_a, count_c, total) else {
                        return Err(CliError::Validation(
                            "provide --count-a, --count-c and --total, or --record".into(),
                        ));
                    };
                    (
                        observed_tally(Response::Slot(2), *a, *total)?,
                        observed_tally(Response::Slot(2), *c, *total)?,
                    )
                }
            };
            let mode = if *independent {
                CouplingMode::Independent
            } else {
                CouplingMode::Coupled
            };
            let estimate = estimate_dual(&first, &second, &params, mode)?;
            print_estimate(out, output, "dual", &estimate)
        }
        EstimateCommand::MultiValue {
            params,
            count_round1,
            count_round2,
            total,
            value_index,
            independent,
        } => {
            let params = params.build()?;
            let symbol = Response::Slot(*value_index as u16);
            let round1 = observed_tally(symbol, *count_round1, *total)?;
            let round2 = observed_tally(symbol, *count_round2, *total)?;
            let mode = if *independent {
                CouplingMode::Independent
            } else {
                CouplingMode::Coupled
            };
            let estimate = estimate_multivalue(&round1, &round2, &params, *value_index, mode)?;
            print_estimate(out, output, "multi-value", &estimate)
        }
        EstimateCommand::RrBaseline {
            params,
            aggregate,
            total,
        } => {
            let estimate = estimate_rr_baseline(*aggregate, *total, &params.build()?);
            print_estimate(out, output, "rr-baseline", &estimate)
        }
    }
}

fn run_epsilon(
    args: &EpsilonArgs,
    output: OutputMode,
    out: &mut impl Write,
) -> Result<(), CliError> {
    // pi_bot1 is whatever mass the three named probabilities leave over.
    let pi_bot1 = 1.0 - args.pi_bot2 - args.pi_bot3 - args.pi_s;
    if pi_bot1 < -crate::mechanisms::PROB_SUM_TOLERANCE {
        return Err(CliError::Validation(format!(
            "pi_bot2 + pi_bot3 + pi_s = {} exceeds 1",
            args.pi_bot2 + args.pi_bot3 + args.pi_s
        )));
    }
    let params = DualParams::new(pi_bot1.max(0.0), args.pi_bot2, args.pi_s)?;
    let report = epsilon_dual(&params);
    match output {
        OutputMode::Records => {
            #[derive(Serialize)]
            struct EpsilonRecord<'a> {
                record: &'static str,
                #[serde(flatten)]
                report: &'a crate::privacy::EpsilonReport,
            }
            emit_record(
                out,
                &EpsilonRecord {
                    record: "epsilon",
                    report: &report,
                },
            )
        }
        OutputMode::Human => {
            writeln!(out, "ratio bot2      {}", report.ratio_bot2)?;
            writeln!(out, "ratio bot3      {}", report.ratio_bot3)?;
            writeln!(out, "epsilon         {}", report.epsilon)?;
            writeln!(out, "epsilon no-log  {}", report.epsilon_no_log)?;
            Ok(())
        }
    }
}

fn run_crowd(
    command: &CrowdCommand,
    output: OutputMode,
    out: &mut impl Write,
) -> Result<(), CliError> {
    match command {
        CrowdCommand::Size { n, p, confidence } => {
            let report = crowd_size(
                *n,
                Probability::named("p", *p)?,
                Probability::named("confidence", *confidence)?,
            );
            match output {
                OutputMode::Records => {
                    #[derive(Serialize)]
                    struct CrowdRecord<'a> {
                        record: &'static str,
                        #[serde(flatten)]
                        report: &'a crate::privacy::CrowdReport,
                    }
                    emit_record(
                        out,
                        &CrowdRecord {
                            record: "crowd-size",
                            report: &report,
                        },
                    )
                }
                OutputMode::Human => {
                    writeln!(
                        out,
                        "n {}  p {}  confidence {}",
                        report.n, report.p, report.confidence
                    )?;
                    writeln!(out, "crowd size {}", report.crowd_size)?;
                    Ok(())
                }
            }
        }
        CrowdCommand::Locations {
            queries,
            p,
            confidence,
        } => {
            let spread = location_spread(
                *queries,
                Probability::named("p", *p)?,
                Probability::named("confidence", *confidence)?,
            );
            match output {
                OutputMode::Records => {
                    #[derive(Serialize)]
                    struct LocationRecord {
                        record: &'static str,
                        queries: u64,
                        p: f64,
                        confidence: f64,
                        spread: u64,
                    }
                    emit_record(
                        out,
                        &LocationRecord {
                            record: "location-spread",
                            queries: *queries,
                            p: *p,
                            confidence: *confidence,
                            spread,
                        },
                    )
                }
                OutputMode::Human => {
                    writeln!(out, "queries {queries}  p {p}  confidence {confidence}")?;
                    writeln!(out, "location spread {spread}")?;
                    Ok(())
                }
            }
        }
    }
}

fn run_tune(args: &TuneArgs, output: OutputMode, out: &mut impl Write) -> Result<(), CliError> {
    let mut spec = SearchSpec::new(args.step, args.yes, args.no)?;
    spec.pi_s_yes1 = args.pi_s_yes1;
    spec.pi_s_yes2 = args.pi_s_yes2;
    spec.pi_1 = args.pi_1;
    spec.pi_2 = args.pi_2;
    spec.pi_s_no = args.pi_s_no;
    spec.pi_3 = args.pi_3;
    spec.epsilon_budget = args.epsilon_budget;

    let (params, objective) = grid_search_min_variance(&spec)?;
    match output {
        OutputMode::Records => {
            #[derive(Serialize)]
            struct TuneRecord {
                record: &'static str,
                pi_s_yes1: f64,
                pi_s_yes2: f64,
                pi_1: f64,
                pi_2: f64,
                pi_s_no: f64,
                pi_3: f64,
                var_given_yes: f64,
                var_given_no: f64,
                total: f64,
            }
            emit_record(
                out,
                &TuneRecord {
                    record: "tune",
                    pi_s_yes1: params.pi_s_yes1(),
                    pi_s_yes2: params.pi_s_yes2(),
                    pi_1: params.pi_1(),
                    pi_2: params.pi_2(),
                    pi_s_no: params.pi_s_no(),
                    pi_3: params.pi_3(),
                    var_given_yes: objective.var_given_yes,
                    var_given_no: objective.var_given_no,
                    total: objective.total,
                },
            )
        }
        OutputMode::Human => {
            writeln!(out, "minimum-variance parameters:")?;
            writeln!(out, "  pi_s_yes1 {}", params.pi_s_yes1())?;
            writeln!(out, "  pi_s_yes2 {}", params.pi_s_yes2())?;
            writeln!(out, "  pi_1      {}", params.pi_1())?;
            writeln!(out, "  pi_2      {}", params.pi_2())?;
            writeln!(out, "  pi_s_no   {}", params.pi_s_no())?;
            writeln!(out, "  pi_3      {}", params.pi_3())?;
            writeln!(out, "objective:")?;
            writeln!(out, "  var | yes {}", objective.var_given_yes)?;
            writeln!(out, "  var | no  {}", objective.var_given_no)?;
            writeln!(out, "  total     {}", objective.total)?;
            Ok(())
        }
    }
}
