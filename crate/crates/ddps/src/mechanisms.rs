//! Local randomizers for distributed privacy by sampling.
//!
//! Every mechanism here is exposed two ways: as an exact probability
//! distribution over its output alphabet, and as a deterministic sampling
//! operation (`draw`, `draw_pair`) that consumes an explicit uniform
//! variate `u ∈ [0, 1)`. Keeping the randomness an input makes every owner
//! response reproducible from a seed and lets the simulation harness run
//! trials in parallel without shared RNG state.
//!
//! The mechanism families:
//!
//! * sampling-and-noise: a Bernoulli sample of each population, where the
//!   No population answers "Yes" to provide noise
//! * deniability: sampled owners pass their answer through coin tosses so
//!   a "Yes" may have been forced rather than truthful
//! * the tuned two-coin mechanism ([`DdpsParams`]): separate sampling and
//!   deniability coins per population so variance can be minimized
//! * dual response: each owner answers twice over the alphabet
//!   `(⊥₁, ⊥₂, ⊥₃)`, with a single probability slice relabeled between the
//!   two answers so population noise cancels at estimation time
//! * multi-value: the two-round generalization of dual response to an
//!   alphabet `(⊥₀, …, ⊥_V)`
//! * the randomized-response baseline: the distributed-blinding view used
//!   as the comparison point (one truth tick plus one blind tick per owner)
//!
//! Canonical alphabet orders (fixed so inverse-CDF draws are reproducible):
//! binary mechanisms use `(⊥, Yes, No)`, the baseline uses `(⊥, Yes)`,
//! dual response uses `(⊥₁, ⊥₂, ⊥₃)` and multi-value uses `(⊥₀, …, ⊥_V)`.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// Absolute tolerance for probability-mass bookkeeping.
pub const PROB_SUM_TOLERANCE: f64 = 1e-12;

/// Parameter-domain errors raised when constructing mechanism parameters
/// or distributions.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("probability `{name}` must lie in [0, 1], got {value}")]
    InvalidProbability { name: &'static str, value: f64 },
    #[error("{what} sum to {sum}, which exceeds 1")]
    MassExceedsOne { what: &'static str, sum: f64 },
    #[error("truth index {index} is outside the value range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("baseline truth-tick probability s1 must be positive")]
    ZeroTruthRate,
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
}

/// A validated probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const ONE: Probability = Probability(1.0);

    pub fn new(value: f64) -> Result<Self, ParamError> {
        Self::named("probability", value)
    }

    /// Validates `value`, attributing failures to `name` in the error.
    pub fn named(name: &'static str, value: f64) -> Result<Self, ParamError> {
        if value.is_finite() && (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(ParamError::InvalidProbability { name, value })
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Ground truth held by a data owner of a binary query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Truth {
    Yes,
    No,
}

/// Whether the two responses of a dual or multi-value owner share their
/// randomness.
///
/// The coupled mode aligns the probability-slice layout of the two
/// responses so that they disagree exactly when the shared variate falls
/// in the `π_s` slice; this is the mode under which the difference
/// estimator's error is independent of the No-population size. The
/// independent mode draws the two responses from separate variates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingMode {
    Coupled,
    Independent,
}

/// One output symbol of a mechanism.
///
/// `Bottom`, `Yes` and `No` form the binary alphabets; `Slot(i)` is the
/// generic category `⊥ᵢ` used by the dual (`i ∈ 1..=3`) and multi-value
/// (`i ∈ 0..=V`) alphabets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Response {
    Bottom,
    Yes,
    No,
    Slot(u16),
}

impl Response {
    /// Stable text label used by tally records: `bot`, `yes`, `no`, `bot3`.
    pub fn label(&self) -> String {
        match self {
            Response::Bottom => "bot".to_string(),
            Response::Yes => "yes".to_string(),
            Response::No => "no".to_string(),
            Response::Slot(i) => format!("bot{i}"),
        }
    }

    pub fn parse_label(label: &str) -> Option<Response> {
        match label {
            "bot" => Some(Response::Bottom),
            "yes" => Some(Response::Yes),
            "no" => Some(Response::No),
            _ => label
                .strip_prefix("bot")
                .and_then(|idx| idx.parse::<u16>().ok())
                .map(Response::Slot),
        }
    }
}

impl fmt::Display for Response {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Canonical binary alphabet `(⊥, Yes, No)`.
pub fn binary_alphabet() -> Vec<Response> {
    vec![Response::Bottom, Response::Yes, Response::No]
}

/// Canonical baseline tick alphabet `(⊥, Yes)`.
pub fn baseline_alphabet() -> Vec<Response> {
    vec![Response::Bottom, Response::Yes]
}

/// Canonical dual-response alphabet `(⊥₁, ⊥₂, ⊥₃)`.
pub fn dual_alphabet() -> Vec<Response> {
    vec![Response::Slot(1), Response::Slot(2), Response::Slot(3)]
}

/// Canonical multi-value alphabet `(⊥₀, …, ⊥_V)`.
pub fn multivalue_alphabet(v: usize) -> Vec<Response> {
    (0..=v).map(|i| Response::Slot(i as u16)).collect()
}

/// An exact probability distribution over one mechanism's output alphabet,
/// in the mechanism's canonical symbol order.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseDistribution {
    alphabet: Vec<Response>,
    probs: Vec<f64>,
}

impl ResponseDistribution {
    /// Validates that `probs` matches `alphabet`, has no negative entry and
    /// sums to 1 within [`PROB_SUM_TOLERANCE`].
    pub fn new(alphabet: Vec<Response>, probs: Vec<f64>) -> Result<Self, ParamError> {
        if alphabet.len() != probs.len() {
            return Err(ParamError::InvalidDistribution(format!(
                "alphabet has {} symbols but {} probabilities were given",
                alphabet.len(),
                probs.len()
            )));
        }
        if alphabet.is_empty() {
            return Err(ParamError::InvalidDistribution("empty alphabet".into()));
        }
        for (symbol, &p) in alphabet.iter().zip(&probs) {
            if !p.is_finite() || p < 0.0 {
                return Err(ParamError::InvalidDistribution(format!(
                    "P({symbol}) = {p} is negative or non-finite"
                )));
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(ParamError::InvalidDistribution(format!(
                "probabilities sum to {sum}, not 1"
            )));
        }
        Ok(ResponseDistribution { alphabet, probs })
    }

    pub fn alphabet(&self) -> &[Response] {
        &self.alphabet
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Probability of `symbol`, or 0 when the symbol is not in the alphabet.
    pub fn prob_of(&self, symbol: Response) -> f64 {
        self.alphabet
            .iter()
            .position(|&s| s == symbol)
            .map_or(0.0, |i| self.probs[i])
    }

    pub fn len(&self) -> usize {
        self.alphabet.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphabet.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Response, f64)> + '_ {
        self.alphabet.iter().copied().zip(self.probs.iter().copied())
    }
}

// Remainder branches like 1 - (a + b) can land a few ulps below zero when
// the parameter mass is exactly 1; those are mass-zero cases, not errors.
fn remainder(used: f64) -> f64 {
    (1.0 - used).max(0.0)
}

/// Parameters of the sampling-and-noise mechanism: per-population sampling
/// probabilities, with sampled No owners answering "Yes".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingNoiseParams {
    pi_s_yes: Probability,
    pi_s_no: Probability,
}

impl SamplingNoiseParams {
    pub fn new(pi_s_yes: f64, pi_s_no: f64) -> Result<Self, ParamError> {
        Ok(SamplingNoiseParams {
            pi_s_yes: Probability::named("pi_s_yes", pi_s_yes)?,
            pi_s_no: Probability::named("pi_s_no", pi_s_no)?,
        })
    }

    pub fn pi_s_yes(&self) -> f64 {
        self.pi_s_yes.value()
    }

    pub fn pi_s_no(&self) -> f64 {
        self.pi_s_no.value()
    }

    /// The equivalent two-coin parameterization (same pmf for both truths);
    /// lets the generic estimators run on this mechanism's tallies.
    pub fn as_ddps(&self) -> DdpsParams {
        DdpsParams::new(self.pi_s_yes(), 0.0, 1.0, 0.0, self.pi_s_no(), 1.0)
            .expect("sampling-noise parameters embed into the two-coin family")
    }
}

/// Parameters of the plausible-deniability mechanism: sampling plus the
/// two coin tosses that may force a sampled owner's answer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeniabilityParams {
    pi_s_yes: Probability,
    pi_s_no: Probability,
    pi_1: Probability,
    pi_2: Probability,
}

impl DeniabilityParams {
    pub fn new(pi_s_yes: f64, pi_s_no: f64, pi_1: f64, pi_2: f64) -> Result<Self, ParamError> {
        Ok(DeniabilityParams {
            pi_s_yes: Probability::named("pi_s_yes", pi_s_yes)?,
            pi_s_no: Probability::named("pi_s_no", pi_s_no)?,
            pi_1: Probability::named("pi_1", pi_1)?,
            pi_2: Probability::named("pi_2", pi_2)?,
        })
    }

    pub fn pi_s_yes(&self) -> f64 {
        self.pi_s_yes.value()
    }

    pub fn pi_s_no(&self) -> f64 {
        self.pi_s_no.value()
    }

    pub fn pi_1(&self) -> f64 {
        self.pi_1.value()
    }

    pub fn pi_2(&self) -> f64 {
        self.pi_2.value()
    }

    /// Per-truth probability that a sampled owner answers "1".
    fn one_rate(&self, truth: Truth) -> f64 {
        let (p1, p2) = (self.pi_1(), self.pi_2());
        match truth {
            Truth::Yes => p1 + (1.0 - p1) * p2,
            Truth::No => (1.0 - p1) * p2,
        }
    }

    /// The equivalent two-coin parameterization (same pmf for both truths).
    pub fn as_ddps(&self) -> DdpsParams {
        DdpsParams::new(
            self.pi_s_yes(),
            0.0,
            self.one_rate(Truth::Yes),
            0.0,
            self.pi_s_no(),
            self.one_rate(Truth::No),
        )
        .expect("deniability parameters embed into the two-coin family")
    }
}

/// Parameters of the tuned two-coin mechanism: two sampling slices for the
/// Yes population with separate deniability coins `π₁`, `π₂`, and a single
/// sampled slice of the No population with coin `π₃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdpsParams {
    pi_s_yes1: Probability,
    pi_s_yes2: Probability,
    pi_1: Probability,
    pi_2: Probability,
    pi_s_no: Probability,
    pi_3: Probability,
}

impl DdpsParams {
    pub fn new(
        pi_s_yes1: f64,
        pi_s_yes2: f64,
        pi_1: f64,
        pi_2: f64,
        pi_s_no: f64,
        pi_3: f64,
    ) -> Result<Self, ParamError> {
        let params = DdpsParams {
            pi_s_yes1: Probability::named("pi_s_yes1", pi_s_yes1)?,
            pi_s_yes2: Probability::named("pi_s_yes2", pi_s_yes2)?,
            pi_1: Probability::named("pi_1", pi_1)?,
            pi_2: Probability::named("pi_2", pi_2)?,
            pi_s_no: Probability::named("pi_s_no", pi_s_no)?,
            pi_3: Probability::named("pi_3", pi_3)?,
        };
        let sampled_yes = pi_s_yes1 + pi_s_yes2;
        if sampled_yes > 1.0 + PROB_SUM_TOLERANCE {
            return Err(ParamError::MassExceedsOne {
                what: "pi_s_yes1 + pi_s_yes2",
                sum: sampled_yes,
            });
        }
        Ok(params)
    }

    pub fn pi_s_yes1(&self) -> f64 {
        self.pi_s_yes1.value()
    }

    pub fn pi_s_yes2(&self) -> f64 {
        self.pi_s_yes2.value()
    }

    pub fn pi_1(&self) -> f64 {
        self.pi_1.value()
    }

    pub fn pi_2(&self) -> f64 {
        self.pi_2.value()
    }

    pub fn pi_s_no(&self) -> f64 {
        self.pi_s_no.value()
    }

    pub fn pi_3(&self) -> f64 {
        self.pi_3.value()
    }

    /// Total sampled fraction of the Yes population.
    pub fn sampled_yes(&self) -> f64 {
        self.pi_s_yes1() + self.pi_s_yes2()
    }

    /// P("Yes" response | truth Yes).
    pub fn yes_rate_given_yes(&self) -> f64 {
        self.pi_s_yes1() * self.pi_1() + self.pi_s_yes2() * self.pi_2()
    }

    /// P("Yes" response | truth No).
    pub fn yes_rate_given_no(&self) -> f64 {
        self.pi_s_no() * self.pi_3()
    }

    /// P("No" response | truth Yes).
    pub fn no_rate_given_yes(&self) -> f64 {
        self.pi_s_yes1() * (1.0 - self.pi_1()) + self.pi_s_yes2() * (1.0 - self.pi_2())
    }

    /// P("No" response | truth No).
    pub fn no_rate_given_no(&self) -> f64 {
        self.pi_s_no() * (1.0 - self.pi_3())
    }
}

/// Parameters of the dual-response mechanism over `(⊥₁, ⊥₂, ⊥₃)`.
///
/// `π_{⊥3}` is not stored: it is the derived remainder
/// `1 − π_{⊥1} − π_{⊥2} − π_s` and must be non-negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualParams {
    pi_bot1: Probability,
    pi_bot2: Probability,
    pi_s: Probability,
}

impl DualParams {
    pub fn new(pi_bot1: f64, pi_bot2: f64, pi_s: f64) -> Result<Self, ParamError> {
        let params = DualParams {
            pi_bot1: Probability::named("pi_bot1", pi_bot1)?,
            pi_bot2: Probability::named("pi_bot2", pi_bot2)?,
            pi_s: Probability::named("pi_s", pi_s)?,
        };
        let used = pi_bot1 + pi_bot2 + pi_s;
        if used > 1.0 + PROB_SUM_TOLERANCE {
            return Err(ParamError::MassExceedsOne {
                what: "pi_bot1 + pi_bot2 + pi_s",
                sum: used,
            });
        }
        Ok(params)
    }

    pub fn pi_bot1(&self) -> f64 {
        self.pi_bot1.value()
    }

    pub fn pi_bot2(&self) -> f64 {
        self.pi_bot2.value()
    }

    pub fn pi_s(&self) -> f64 {
        self.pi_s.value()
    }

    /// Derived remainder `π_{⊥3} = 1 − π_{⊥1} − π_{⊥2} − π_s`.
    pub fn pi_bot3(&self) -> f64 {
        remainder(self.pi_bot1() + self.pi_bot2() + self.pi_s())
    }
}

/// Parameters of the two-round multi-value mechanism over `(⊥₀, …, ⊥_V)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiValueParams {
    pi_bot: Vec<Probability>,
    pi_s: Probability,
}

impl MultiValueParams {
    /// `pi_bot` lists `π_{⊥0} … π_{⊥V}` (so `V = pi_bot.len() - 1 ≥ 1`);
    /// the last category absorbs whatever mass `1 − Σπ_{⊥i} − π_s` remains.
    pub fn new(pi_bot: Vec<f64>, pi_s: f64) -> Result<Self, ParamError> {
        if pi_bot.len() < 2 {
            return Err(ParamError::InvalidDistribution(
                "multi-value mechanism needs at least the categories ⊥0 and ⊥1".into(),
            ));
        }
        let mut validated = Vec::with_capacity(pi_bot.len());
        for &p in &pi_bot {
            validated.push(Probability::named("pi_bot[i]", p)?);
        }
        let pi_s = Probability::named("pi_s", pi_s)?;
        let used: f64 = pi_bot.iter().sum::<f64>() + pi_s.value();
        if used > 1.0 + PROB_SUM_TOLERANCE {
            return Err(ParamError::MassExceedsOne {
                what: "sum(pi_bot) + pi_s",
                sum: used,
            });
        }
        Ok(MultiValueParams {
            pi_bot: validated,
            pi_s,
        })
    }

    /// Number of possible truthful values `V`.
    pub fn value_count(&self) -> usize {
        self.pi_bot.len() - 1
    }

    pub fn pi_bot(&self, i: usize) -> f64 {
        self.pi_bot[i].value()
    }

    pub fn pi_s(&self) -> f64 {
        self.pi_s.value()
    }

    /// Mass absorbed by the final category on top of `π_{⊥V}`.
    pub fn absorbed_remainder(&self) -> f64 {
        let used: f64 = self.pi_bot.iter().map(|p| p.value()).sum::<f64>() + self.pi_s();
        remainder(used)
    }
}

/// Parameters of the randomized-response baseline: `s1` is the truth-tick
/// probability of Yes owners, `s2` the blind-tick probability of every
/// owner. `s1` must be positive because estimation divides by it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineParams {
    s1: Probability,
    s2: Probability,
}

impl BaselineParams {
    pub fn new(s1: f64, s2: f64) -> Result<Self, ParamError> {
        let s1 = Probability::named("s1", s1)?;
        let s2 = Probability::named("s2", s2)?;
        if s1.value() == 0.0 {
            return Err(ParamError::ZeroTruthRate);
        }
        Ok(BaselineParams { s1, s2 })
    }

    pub fn s1(&self) -> f64 {
        self.s1.value()
    }

    pub fn s2(&self) -> f64 {
        self.s2.value()
    }
}

fn binary_distribution(p_bottom: f64, p_yes: f64, p_no: f64) -> ResponseDistribution {
    ResponseDistribution::new(binary_alphabet(), vec![p_bottom, p_yes, p_no])
        .expect("branch probabilities of a validated parameter set form a distribution")
}

/// Sampling-and-noise response distribution.
///
/// Sampled owners of either population answer "Yes" (No owners thereby
/// provide the noise); unsampled owners stay silent. "No" is never output.
pub fn sampling_noise_distribution(
    truth: Truth,
    params: &SamplingNoiseParams,
) -> ResponseDistribution {
    let pi_s = match truth {
        Truth::Yes => params.pi_s_yes(),
        Truth::No => params.pi_s_no(),
    };
    binary_distribution(1.0 - pi_s, pi_s, 0.0)
}

/// Plausible-deniability response distribution.
///
/// A sampled Yes owner answers "1" when the first coin says truthful (`π₁`)
/// or, failing that, when the second coin forces it (`π₂`); a sampled No
/// owner answers "1" only through the forcing path.
pub fn deniability_distribution(truth: Truth, params: &DeniabilityParams) -> ResponseDistribution {
    let pi_s = match truth {
        Truth::Yes => params.pi_s_yes(),
        Truth::No => params.pi_s_no(),
    };
    let p_one = pi_s * params.one_rate(truth);
    let p_zero = (pi_s - p_one).max(0.0);
    binary_distribution(1.0 - pi_s, p_one, p_zero)
}

/// Two-coin tuned response distribution.
pub fn ddps_distribution(truth: Truth, params: &DdpsParams) -> ResponseDistribution {
    match truth {
        Truth::Yes => binary_distribution(
            remainder(params.sampled_yes()),
            params.yes_rate_given_yes(),
            params.no_rate_given_yes(),
        ),
        Truth::No => binary_distribution(
            1.0 - params.pi_s_no(),
            params.yes_rate_given_no(),
            params.no_rate_given_no(),
        ),
    }
}

fn dual_distribution(p1: f64, p2: f64, p3: f64) -> ResponseDistribution {
    ResponseDistribution::new(dual_alphabet(), vec![p1, p2, p3])
        .expect("dual branch probabilities form a distribution")
}

/// The two per-owner response distributions of the dual mechanism.
///
/// The first answer is truth-independent: the `π_s` slice reports `⊥₁`.
/// The second answer relabels that slice `⊥₂` for Yes owners and `⊥₃` for
/// No owners, which is what makes the tally difference cancel the shared
/// `π_{⊥2}` noise.
pub fn dual_distributions(
    truth: Truth,
    params: &DualParams,
) -> (ResponseDistribution, ResponseDistribution) {
    let (b1, b2, b3, s) = (
        params.pi_bot1(),
        params.pi_bot2(),
        params.pi_bot3(),
        params.pi_s(),
    );
    let first = dual_distribution(b1 + s, b2, b3);
    let second = match truth {
        Truth::Yes => dual_distribution(b1, b2 + s, b3),
        Truth::No => dual_distribution(b1, b2, b3 + s),
    };
    (first, second)
}

/// The middle distribution the dual construction also defines; identical
/// to the Yes-owner second answer and unused by the estimators.
pub fn dual_distribution_b(params: &DualParams) -> ResponseDistribution {
    dual_distributions(Truth::Yes, params).1
}

fn multivalue_base_probs(params: &MultiValueParams) -> Vec<f64> {
    let v = params.value_count();
    let mut probs: Vec<f64> = (0..=v).map(|i| params.pi_bot(i)).collect();
    probs[v] += params.absorbed_remainder();
    probs
}

fn multivalue_distribution(probs: Vec<f64>, v: usize) -> ResponseDistribution {
    ResponseDistribution::new(multivalue_alphabet(v), probs)
        .expect("multi-value branch probabilities form a distribution")
}

/// The two per-owner round distributions of the multi-value mechanism for
/// an owner whose truthful value is `truth_index` (1-based).
///
/// Round one is truth-independent: the `π_s` slice reports `⊥₀`. Round two
/// moves that slice onto the owner's own category `⊥_{V′}`. The final
/// category absorbs any unassigned parameter mass in both rounds.
pub fn multivalue_distributions(
    truth_index: usize,
    params: &MultiValueParams,
) -> Result<(ResponseDistribution, ResponseDistribution), ParamError> {
    let v = params.value_count();
    if truth_index < 1 || truth_index > v {
        return Err(ParamError::IndexOutOfRange {
            index: truth_index,
            max: v,
        });
    }
    let mut round1 = multivalue_base_probs(params);
    round1[0] += params.pi_s();
    let mut round2 = multivalue_base_probs(params);
    round2[truth_index] += params.pi_s();
    Ok((
        multivalue_distribution(round1, v),
        multivalue_distribution(round2, v),
    ))
}

/// The round-two distribution of an owner that declines the second round;
/// identical to round one and unused by the estimators.
pub fn multivalue_no_round_two(params: &MultiValueParams) -> ResponseDistribution {
    let v = params.value_count();
    let mut probs = multivalue_base_probs(params);
    probs[0] += params.pi_s();
    multivalue_distribution(probs, v)
}

/// The two Bernoulli tick distributions of the randomized-response
/// baseline, over the alphabet `(⊥, Yes)`: a truth tick emitted with
/// probability `s1` by Yes owners only, and a blind tick emitted with
/// probability `s2` by every owner. The aggregate is the total tick count.
pub fn rr_baseline_distributions(
    truth: Truth,
    params: &BaselineParams,
) -> (ResponseDistribution, ResponseDistribution) {
    let p_truth = match truth {
        Truth::Yes => params.s1(),
        Truth::No => 0.0,
    };
    let tick = |p: f64| {
        ResponseDistribution::new(baseline_alphabet(), vec![1.0 - p, p])
            .expect("tick probabilities form a distribution")
    };
    (tick(p_truth), tick(params.s2()))
}

/// Inverse-CDF draw over the distribution's canonical symbol order:
/// returns the first symbol whose cumulative probability exceeds `u`.
///
/// Deterministic in `(dist, u)` and monotone in `u`; requires `0 ≤ u < 1`.
pub fn draw(dist: &ResponseDistribution, u: f64) -> Response {
    assert!((0.0..1.0).contains(&u), "draw requires u in [0, 1), got {u}");
    let mut cumulative = 0.0;
    for (symbol, p) in dist.iter() {
        cumulative += p;
        if u < cumulative {
            return symbol;
        }
    }
    // Cumulative mass can fall a few ulps short of 1; the tail belongs to
    // the last symbol.
    *dist.alphabet().last().expect("distribution is non-empty")
}

/// Draws the dual mechanism's response pair for one owner.
///
/// In coupled mode both responses read the same variate `u` against the
/// aligned interval layout `[π_{⊥1} | π_{⊥2} | π_{⊥3} | π_s]`, where the
/// trailing `π_s` slice is labeled `⊥₁` in the first response and, in the
/// second, `⊥₂` for a Yes owner or `⊥₃` for a No owner (`u_second` is
/// ignored). The responses therefore differ exactly when `u` lands in the
/// `π_s` slice, while each response keeps its marginal distribution.
///
/// In independent mode the two responses are separate inverse-CDF draws
/// from `u` and `u_second`.
pub fn draw_pair(
    truth: Truth,
    params: &DualParams,
    u: f64,
    u_second: f64,
    mode: CouplingMode,
) -> (Response, Response) {
    match mode {
        CouplingMode::Independent => {
            let (first, second) = dual_distributions(truth, params);
            (draw(&first, u), draw(&second, u_second))
        }
        CouplingMode::Coupled => {
            assert!(
                (0.0..1.0).contains(&u),
                "draw_pair requires u in [0, 1), got {u}"
            );
            let b1 = params.pi_bot1();
            let b2 = params.pi_bot2();
            let b3 = params.pi_bot3();
            if u < b1 {
                (Response::Slot(1), Response::Slot(1))
            } else if u < b1 + b2 {
                (Response::Slot(2), Response::Slot(2))
            } else if u < b1 + b2 + b3 {
                (Response::Slot(3), Response::Slot(3))
            } else {
                let relabeled = match truth {
                    Truth::Yes => Response::Slot(2),
                    Truth::No => Response::Slot(3),
                };
                (Response::Slot(1), relabeled)
            }
        }
    }
}

/// Draws the multi-value mechanism's round pair for one owner, using the
/// same slice-alignment idea as [`draw_pair`]: the layout is
/// `[π_{⊥0} | … | π_{⊥V}+rem | π_s]` and the trailing `π_s` slice is
/// labeled `⊥₀` in round one and `⊥_{V′}` in round two.
pub fn draw_multivalue_pair(
    truth_index: usize,
    params: &MultiValueParams,
    u: f64,
    u_second: f64,
    mode: CouplingMode,
) -> Result<(Response, Response), ParamError> {
    let v = params.value_count();
    if truth_index < 1 || truth_index > v {
        return Err(ParamError::IndexOutOfRange {
            index: truth_index,
            max: v,
        });
    }
    match mode {
        CouplingMode::Independent => {
            let (round1, round2) = multivalue_distributions(truth_index, params)?;
            Ok((draw(&round1, u), draw(&round2, u_second)))
        }
        CouplingMode::Coupled => {
            assert!(
                (0.0..1.0).contains(&u),
                "draw_multivalue_pair requires u in [0, 1), got {u}"
            );
            let base = multivalue_base_probs(params);
            let mut cumulative = 0.0;
            for (i, p) in base.iter().enumerate() {
                cumulative += p;
                if u < cumulative {
                    let symbol = Response::Slot(i as u16);
                    return Ok((symbol, symbol));
                }
            }
            Ok((Response::Slot(0), Response::Slot(truth_index as u16)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(actual: f64, expected: f64, tol: f64) {
        assert!(
            (actual - expected).abs() <= tol,
            "expected {expected}, got {actual}"
        );
    }

    fn reference_ddps() -> DdpsParams {
        DdpsParams::new(0.45, 0.50, 0.95, 0.98, 0.068, 0.98).unwrap()
    }

    #[test]
    fn probability_rejects_out_of_range() {
        assert!(Probability::new(-0.1).is_err());
        assert!(Probability::new(1.1).is_err());
        assert!(Probability::new(f64::NAN).is_err());
        assert_eq!(Probability::new(0.5).unwrap().value(), 0.5);
    }

    #[test]
    fn ddps_params_reject_oversampled_yes() {
        assert!(matches!(
            DdpsParams::new(0.6, 0.5, 1.0, 1.0, 0.1, 1.0),
            Err(ParamError::MassExceedsOne { .. })
        ));
    }

    #[test]
    fn sampling_noise_matches_bernoulli_form() {
        let params = SamplingNoiseParams::new(0.1, 0.068).unwrap();
        let no_dist = sampling_noise_distribution(Truth::No, &params);
        assert_close(no_dist.prob_of(Response::Bottom), 0.932, 1e-15);
        assert_close(no_dist.prob_of(Response::Yes), 0.068, 1e-15);
        assert_eq!(no_dist.prob_of(Response::No), 0.0);

        let silent = SamplingNoiseParams::new(0.0, 0.0).unwrap();
        assert_eq!(
            sampling_noise_distribution(Truth::Yes, &silent).prob_of(Response::Bottom),
            1.0
        );
        let always = SamplingNoiseParams::new(1.0, 0.0).unwrap();
        assert_eq!(
            sampling_noise_distribution(Truth::Yes, &always).prob_of(Response::Yes),
            1.0
        );
    }

    #[test]
    fn deniability_branch_probabilities() {
        let params = DeniabilityParams::new(0.1, 0.1, 0.95, 0.5).unwrap();
        let yes_dist = deniability_distribution(Truth::Yes, &params);
        assert_close(yes_dist.prob_of(Response::Yes), 0.0975, 1e-15);
        assert_close(yes_dist.prob_of(Response::No), 0.0025, 1e-15);
        assert_close(yes_dist.prob_of(Response::Bottom), 0.9, 1e-15);

        let no_dist = deniability_distribution(Truth::No, &params);
        assert_close(no_dist.prob_of(Response::Yes), 0.0025, 1e-15);

        let silent = DeniabilityParams::new(0.0, 0.1, 0.95, 0.5).unwrap();
        assert_eq!(
            deniability_distribution(Truth::Yes, &silent).prob_of(Response::Bottom),
            1.0
        );
    }

    #[test]
    fn ddps_reference_parameters() {
        let params = reference_ddps();
        let yes_dist = ddps_distribution(Truth::Yes, &params);
        assert_close(yes_dist.prob_of(Response::Bottom), 0.05, 1e-12);
        assert_close(yes_dist.prob_of(Response::Yes), 0.9175, 1e-12);
        assert_close(yes_dist.prob_of(Response::No), 0.0325, 1e-12);

        let no_dist = ddps_distribution(Truth::No, &params);
        assert_close(no_dist.prob_of(Response::Bottom), 0.932, 1e-12);
        assert_close(no_dist.prob_of(Response::Yes), 0.06664, 1e-12);
        assert_close(no_dist.prob_of(Response::No), 0.00136, 1e-12);
    }

    #[test]
    fn ddps_silent_no_population() {
        let params = DdpsParams::new(0.45, 0.50, 0.95, 0.98, 0.0, 0.98).unwrap();
        assert_eq!(
            ddps_distribution(Truth::No, &params).prob_of(Response::Bottom),
            1.0
        );
    }

    #[test]
    fn ddps_full_coins_emit_no_no_responses() {
        let params = DdpsParams::new(0.45, 0.50, 1.0, 1.0, 0.068, 1.0).unwrap();
        assert_eq!(
            ddps_distribution(Truth::Yes, &params).prob_of(Response::No),
            0.0
        );
        assert_eq!(
            ddps_distribution(Truth::No, &params).prob_of(Response::No),
            0.0
        );
    }

    fn assert_probs(dist: &ResponseDistribution, expected: &[f64]) {
        for (actual, want) in dist.probs().iter().zip(expected) {
            assert_close(*actual, *want, 1e-12);
        }
    }

    #[test]
    fn dual_reference_distributions() {
        let params = DualParams::new(0.2, 0.3, 0.05).unwrap();
        let (a, c_yes) = dual_distributions(Truth::Yes, &params);
        assert_probs(&a, &[0.25, 0.3, 0.45]);
        assert_probs(&c_yes, &[0.2, 0.35, 0.45]);
        let (a2, c_no) = dual_distributions(Truth::No, &params);
        assert_eq!(a2, a);
        assert_probs(&c_no, &[0.2, 0.3, 0.5]);
        assert_eq!(dual_distribution_b(&params), c_yes);
    }

    #[test]
    fn dual_zero_slice_makes_rounds_identical() {
        let params = DualParams::new(0.2, 0.3, 0.0).unwrap();
        for truth in [Truth::Yes, Truth::No] {
            let (a, c) = dual_distributions(truth, &params);
            assert_eq!(a, c);
        }
    }

    #[test]
    fn dual_rejects_negative_remainder() {
        assert!(matches!(
            DualParams::new(0.5, 0.5, 0.05),
            Err(ParamError::MassExceedsOne { .. })
        ));
    }

    #[test]
    fn multivalue_reference_rounds() {
        let params = MultiValueParams::new(vec![0.1, 0.2, 0.3, 0.3], 0.1).unwrap();
        let (round1, round2) = multivalue_distributions(2, &params).unwrap();
        assert_probs(&round1, &[0.2, 0.2, 0.3, 0.3]);
        assert_probs(&round2, &[0.1, 0.2, 0.4, 0.3]);
        assert_eq!(multivalue_no_round_two(&params), round1);
    }

    #[test]
    fn multivalue_zero_slice_makes_rounds_identical() {
        let params = MultiValueParams::new(vec![0.25, 0.25, 0.25], 0.0).unwrap();
        for truth in 1..=2 {
            let (round1, round2) = multivalue_distributions(truth, &params).unwrap();
            assert_eq!(round1, round2);
        }
    }

    #[test]
    fn multivalue_index_out_of_range() {
        let params = MultiValueParams::new(vec![0.1, 0.2, 0.3, 0.3], 0.1).unwrap();
        assert!(multivalue_distributions(0, &params).is_err());
        assert!(multivalue_distributions(4, &params).is_err());
    }

    #[test]
    fn multivalue_final_category_absorbs_remainder() {
        // pi_bot sums to 0.6 with pi_s = 0.1; the last category picks up 0.3.
        let params = MultiValueParams::new(vec![0.1, 0.2, 0.3], 0.1).unwrap();
        let (round1, _) = multivalue_distributions(1, &params).unwrap();
        assert_close(round1.prob_of(Response::Slot(2)), 0.6, 1e-15);
    }

    // With a zero absorbed remainder, the degenerate V = 1 mechanism is the
    // dual mechanism for a Yes owner under the relabeling ⊥0→⊥1, ⊥1→⊥2
    // (and an empty ⊥3).
    #[test]
    fn multivalue_v1_matches_dual_relabeled() {
        let cases = [(0.2, 0.75, 0.05), (0.5, 0.3, 0.2), (0.0, 0.9, 0.1)];
        for (b0, b1, s) in cases {
            let mv = MultiValueParams::new(vec![b0, b1], s).unwrap();
            assert_close(mv.absorbed_remainder(), 0.0, 1e-12);
            let (r1, r2) = multivalue_distributions(1, &mv).unwrap();

            let dual = DualParams::new(b0, b1, s).unwrap();
            let (a, c) = dual_distributions(Truth::Yes, &dual);
            assert_close(r1.prob_of(Response::Slot(0)), a.prob_of(Response::Slot(1)), 1e-15);
            assert_close(r1.prob_of(Response::Slot(1)), a.prob_of(Response::Slot(2)), 1e-15);
            assert_close(r2.prob_of(Response::Slot(0)), c.prob_of(Response::Slot(1)), 1e-15);
            assert_close(r2.prob_of(Response::Slot(1)), c.prob_of(Response::Slot(2)), 1e-15);
        }
    }

    #[test]
    fn baseline_tick_distributions() {
        let params = BaselineParams::new(0.5, 0.25).unwrap();
        let (truth_tick, blind_tick) = rr_baseline_distributions(Truth::Yes, &params);
        assert_close(truth_tick.prob_of(Response::Yes), 0.5, 1e-15);
        assert_close(blind_tick.prob_of(Response::Yes), 0.25, 1e-15);

        let (no_truth_tick, no_blind_tick) = rr_baseline_distributions(Truth::No, &params);
        assert_eq!(no_truth_tick.prob_of(Response::Yes), 0.0);
        assert_close(no_blind_tick.prob_of(Response::Yes), 0.25, 1e-15);

        let identity = BaselineParams::new(1.0, 0.0).unwrap();
        let (t, b) = rr_baseline_distributions(Truth::Yes, &identity);
        assert_eq!(t.prob_of(Response::Yes), 1.0);
        assert_eq!(b.prob_of(Response::Yes), 0.0);

        assert!(matches!(
            BaselineParams::new(0.0, 0.25),
            Err(ParamError::ZeroTruthRate)
        ));
    }

    #[test]
    fn draw_walks_the_cumulative_intervals() {
        let dist = ResponseDistribution::new(dual_alphabet(), vec![0.25, 0.3, 0.45]).unwrap();
        assert_eq!(draw(&dist, 0.0), Response::Slot(1));
        assert_eq!(draw(&dist, 0.54), Response::Slot(2));
        assert_eq!(draw(&dist, 0.999), Response::Slot(3));
    }

    #[test]
    fn draw_is_monotone_in_u() {
        let dist = ResponseDistribution::new(
            binary_alphabet(),
            vec![0.932, 0.06664, 0.00136],
        )
        .unwrap();
        let position = |r: Response| dist.alphabet().iter().position(|&s| s == r).unwrap();
        let mut last = 0;
        for i in 0..1000 {
            let u = i as f64 / 1000.0;
            let idx = position(draw(&dist, u));
            assert!(idx >= last, "draw jumped backwards at u = {u}");
            last = idx;
        }
    }

    #[test]
    fn coupled_pair_relabels_only_the_sampled_slice() {
        let params = DualParams::new(0.2, 0.3, 0.05).unwrap();
        assert_eq!(
            draw_pair(Truth::Yes, &params, 0.10, 0.0, CouplingMode::Coupled),
            (Response::Slot(1), Response::Slot(1))
        );
        assert_eq!(
            draw_pair(Truth::Yes, &params, 0.97, 0.0, CouplingMode::Coupled),
            (Response::Slot(1), Response::Slot(2))
        );
        assert_eq!(
            draw_pair(Truth::No, &params, 0.97, 0.0, CouplingMode::Coupled),
            (Response::Slot(1), Response::Slot(3))
        );
        // Outside the slice the two responses always agree.
        for i in 0..95 {
            let u = i as f64 / 100.0;
            let (a, c) = draw_pair(Truth::No, &params, u, 0.0, CouplingMode::Coupled);
            assert_eq!(a, c);
        }
    }

    #[test]
    fn independent_pair_uses_both_variates() {
        let params = DualParams::new(0.2, 0.3, 0.05).unwrap();
        let (a, c) = draw_pair(Truth::Yes, &params, 0.0, 0.999, CouplingMode::Independent);
        assert_eq!(a, Response::Slot(1));
        assert_eq!(c, Response::Slot(3));
    }

    #[test]
    fn coupled_mode_marginals_match_the_exact_distributions() {
        let params = DualParams::new(0.2, 0.3, 0.05).unwrap();
        let trials = 100_000u32;
        for truth in [Truth::Yes, Truth::No] {
            let (dist_a, dist_c) = dual_distributions(truth, &params);
            let mut counts_a = [0u32; 3];
            let mut counts_c = [0u32; 3];
            for i in 0..trials {
                // Low-discrepancy sweep of the unit interval is enough here;
                // the layout identity is deterministic in u.
                let u = (i as f64 + 0.5) / trials as f64;
                let (a, c) = draw_pair(truth, &params, u, 0.0, CouplingMode::Coupled);
                let slot = |r: Response| match r {
                    Response::Slot(i) => (i - 1) as usize,
                    _ => unreachable!(),
                };
                counts_a[slot(a)] += 1;
                counts_c[slot(c)] += 1;
            }
            for (i, symbol) in dual_alphabet().into_iter().enumerate() {
                for (counts, dist) in [(&counts_a, &dist_a), (&counts_c, &dist_c)] {
                    let p = dist.prob_of(symbol);
                    let observed = counts[i] as f64 / trials as f64;
                    let bound = 4.0 * (p * (1.0 - p) / trials as f64).sqrt() + 1.0 / trials as f64;
                    assert!(
                        (observed - p).abs() < bound,
                        "{truth:?} {symbol}: observed {observed}, expected {p}"
                    );
                }
            }
        }
    }

    #[test]
    fn coupled_multivalue_marginals_match() {
        let params = MultiValueParams::new(vec![0.1, 0.2, 0.3, 0.3], 0.1).unwrap();
        let trials = 100_000u32;
        let truth = 2;
        let (dist1, dist2) = multivalue_distributions(truth, &params).unwrap();
        let mut counts1 = [0u32; 4];
        let mut counts2 = [0u32; 4];
        for i in 0..trials {
            let u = (i as f64 + 0.5) / trials as f64;
            let (r1, r2) =
                draw_multivalue_pair(truth, &params, u, 0.0, CouplingMode::Coupled).unwrap();
            let slot = |r: Response| match r {
                Response::Slot(i) => i as usize,
                _ => unreachable!(),
            };
            counts1[slot(r1)] += 1;
            counts2[slot(r2)] += 1;
        }
        for (i, symbol) in multivalue_alphabet(3).into_iter().enumerate() {
            for (counts, dist) in [(&counts1, &dist1), (&counts2, &dist2)] {
                let p = dist.prob_of(symbol);
                let observed = counts[i] as f64 / trials as f64;
                assert!(
                    (observed - p).abs() < 4.0 * (p * (1.0 - p) / trials as f64).sqrt() + 1e-5,
                    "{symbol}: observed {observed}, expected {p}"
                );
            }
        }
    }

    #[test]
    fn response_labels_round_trip() {
        for r in [
            Response::Bottom,
            Response::Yes,
            Response::No,
            Response::Slot(0),
            Response::Slot(12),
        ] {
            assert_eq!(Response::parse_label(&r.label()), Some(r));
        }
        assert_eq!(Response::parse_label("nope"), None);
        assert_eq!(Response::parse_label("botx"), None);
    }

    #[test]
    fn distribution_validation_rejects_bad_mass() {
        assert!(ResponseDistribution::new(binary_alphabet(), vec![0.5, 0.5, 0.1]).is_err());
        assert!(ResponseDistribution::new(binary_alphabet(), vec![1.2, -0.2, 0.0]).is_err());
        assert!(ResponseDistribution::new(binary_alphabet(), vec![0.5, 0.5]).is_err());
    }
}
