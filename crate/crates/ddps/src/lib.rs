//! Distributed differential privacy by sampling.
//!
//! This crate implements a family of local randomizers in which privacy
//! comes from aggressively sampling which data owners respond at all,
//! together with the estimators that recover the true "Yes" count from the
//! privatized tallies. The centerpiece is the dual-response construction:
//! every owner answers the same query twice with a single probability
//! slice relabeled between the answers, so subtracting the two tallies
//! cancels the noise contributed by the (potentially huge) No population
//! and the estimation error stays flat as that population grows.
//!
//! The crate is organized around that pipeline:
//!
//! * [`mechanisms`] — the local randomizers, as exact distributions and as
//!   deterministic draws from explicit uniform variates
//! * [`estimation`] — count recovery with standard-deviation bands, the
//!   ±σ sign-system solver, and the difference estimators
//! * [`privacy`] — ε leakage of the dual mechanism and the binomial-ccdf
//!   crowd-size / multi-location analyses
//! * [`tuning`] — the Poisson-binomial variance objective and its grid
//!   minimizer
//! * [`simulation`] — a seeded, reproducible Monte-Carlo harness
//! * [`cli`] — the `ddps` command-line front end, CSV ingestion and the
//!   machine-readable record formats
//!
//! The `examples/` directory contains one runnable program per capability;
//! start with `cargo run --example pmf_tables`.

pub mod cli;
pub mod estimation;
pub mod mechanisms;
pub mod privacy;
pub mod simulation;
pub mod tuning;

pub use estimation::{Estimate, SolutionSet, Tally};
pub use mechanisms::{
    BaselineParams, CouplingMode, DdpsParams, DeniabilityParams, DualParams, MultiValueParams,
    Probability, Response, ResponseDistribution, SamplingNoiseParams, Truth,
};
pub use privacy::{CrowdReport, EpsilonReport};
pub use simulation::{ExperimentReport, PopulationSpec, TrialConfig};
