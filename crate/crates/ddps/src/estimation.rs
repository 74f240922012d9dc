//! Recovering the true Yes count from privatized tallies.
//!
//! All estimators are method-of-moments inversions of the mechanisms'
//! expected counts. Each returns an [`Estimate`] whose `sigma` is the
//! standard deviation of the underlying response count (a Poisson-binomial
//! sum evaluated at plug-in population counts) and whose `interval` maps
//! that deviation through the estimator's linear inverse.
//!
//! Tallies are integer counts in production, but estimators accept
//! real-valued counts so exact expected tallies can be fed through them;
//! inversion is then exact up to rounding, which is how the estimators are
//! oracle-tested.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::mechanisms::{
    multivalue_distributions, BaselineParams, CouplingMode, DdpsParams, DualParams,
    MultiValueParams, Response,
};

/// Denominators smaller than this leave the Yes count unidentifiable.
pub const IDENTIFIABILITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimateError {
    #[error("parameters are non-identifiable: estimator denominator {denominator} is within {IDENTIFIABILITY_TOLERANCE} of zero")]
    NonIdentifiable { denominator: f64 },
    #[error("division-domain error: {name} must be positive")]
    ZeroDivisor { name: &'static str },
    #[error("tallies cover different populations: {left} vs {right} owners")]
    TotalMismatch { left: f64, right: f64 },
    #[error("invalid tally: {0}")]
    InvalidTally(String),
    #[error("value index {index} is outside 1..={max}")]
    ValueIndexOutOfRange { index: usize, max: usize },
}

/// Observed counts per output symbol for one query round.
#[derive(Debug, Clone, PartialEq)]
pub struct Tally {
    counts: BTreeMap<Response, f64>,
    total: f64,
}

impl Tally {
    /// Builds a tally from integer observation counts.
    pub fn from_counts(counts: BTreeMap<Response, u64>) -> Self {
        let total = counts.values().sum::<u64>() as f64;
        Tally {
            counts: counts.into_iter().map(|(r, c)| (r, c as f64)).collect(),
            total,
        }
    }

    /// Builds a tally from real-valued counts (exact expected tallies).
    pub fn from_expected(
        pairs: impl IntoIterator<Item = (Response, f64)>,
    ) -> Result<Self, EstimateError> {
        let mut counts = BTreeMap::new();
        let mut total = 0.0;
        for (symbol, count) in pairs {
            if !count.is_finite() || count < 0.0 {
                return Err(EstimateError::InvalidTally(format!(
                    "count for {symbol} is {count}"
                )));
            }
            *counts.entry(symbol).or_insert(0.0) += count;
            total += count;
        }
        Ok(Tally { counts, total })
    }

    pub fn count_of(&self, symbol: Response) -> f64 {
        self.counts.get(&symbol).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn iter(&self) -> impl Iterator<Item = (Response, f64)> + '_ {
        self.counts.iter().map(|(&r, &c)| (r, c))
    }
}

/// A recovered Yes count with its deviation band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    /// Point estimate of the Yes population count.
    pub value: f64,
    /// Standard deviation of the aggregated response count the estimator
    /// inverted (not yet divided by the linear coefficient).
    pub sigma: f64,
    /// `value ± sigma / |denominator|`.
    pub interval: (f64, f64),
    /// Set when sampling noise pushed the point estimate below zero; the
    /// value is reported as-is so bias studies stay honest.
    pub below_zero: bool,
}

impl Estimate {
    fn from_parts(value: f64, sigma: f64, denominator: f64) -> Self {
        let spread = sigma / denominator.abs();
        Estimate {
            value,
            sigma,
            interval: (value - spread, value + spread),
            below_zero: value < 0.0,
        }
    }

    /// Half-width of the interval: the deviation mapped onto the estimate.
    pub fn value_sigma(&self) -> f64 {
        (self.interval.1 - self.interval.0) / 2.0
    }
}

fn check_identifiable(denominator: f64) -> Result<f64, EstimateError> {
    if denominator.abs() <= IDENTIFIABILITY_TOLERANCE {
        Err(EstimateError::NonIdentifiable { denominator })
    } else {
        Ok(denominator)
    }
}

// Integer tallies must agree exactly; expected-value tallies are allowed
// summation dust.
fn check_totals_match(left: f64, right: f64) -> Result<(), EstimateError> {
    if (left - right).abs() <= 1e-9 * left.abs().max(right.abs()).max(1.0) {
        Ok(())
    } else {
        Err(EstimateError::TotalMismatch { left, right })
    }
}

/// Variance of the aggregated "Yes" count at population counts
/// `(yes, no)`: the two-term Poisson-binomial decomposition.
pub fn yes_count_variance(params: &DdpsParams, yes: f64, no: f64) -> f64 {
    let p_yes = params.yes_rate_given_yes();
    let p_no = params.yes_rate_given_no();
    p_yes * (1.0 - p_yes) * yes + p_no * (1.0 - p_no) * no
}

/// Variance of the aggregated "No" count at population counts `(yes, no)`.
pub fn no_count_variance(params: &DdpsParams, yes: f64, no: f64) -> f64 {
    let p_yes = params.no_rate_given_yes();
    let p_no = params.no_rate_given_no();
    p_yes * (1.0 - p_yes) * yes + p_no * (1.0 - p_no) * no
}

/// Variance of the aggregated `⊥` count at population counts `(yes, no)`.
pub fn bottom_count_variance(params: &DdpsParams, yes: f64, no: f64) -> f64 {
    let sampled_yes = params.sampled_yes();
    let sampled_no = params.pi_s_no();
    (1.0 - sampled_yes) * sampled_yes * yes + (1.0 - sampled_no) * sampled_no * no
}

fn linear_invert(
    observed: f64,
    total: f64,
    rate_given_yes: f64,
    rate_given_no: f64,
    variance: impl Fn(f64, f64) -> f64,
) -> Result<Estimate, EstimateError> {
    let denominator = check_identifiable(rate_given_yes - rate_given_no)?;
    let value = (observed - rate_given_no * total) / denominator;
    let plug_yes = value.clamp(0.0, total);
    let sigma = variance(plug_yes, total - plug_yes).sqrt();
    Ok(Estimate::from_parts(value, sigma, denominator))
}

/// Yes estimate from the aggregated "Yes" count.
pub fn estimate_from_yes(tally: &Tally, params: &DdpsParams) -> Result<Estimate, EstimateError> {
    linear_invert(
        tally.count_of(Response::Yes),
        tally.total(),
        params.yes_rate_given_yes(),
        params.yes_rate_given_no(),
        |y, n| yes_count_variance(params, y, n),
    )
}

/// Yes estimate from the aggregated "No" count.
///
/// Non-identifiable at `π₁ = π₂ = π₃ = 1`, where the mechanism emits no
/// "No" responses at all.
pub fn estimate_from_no(tally: &Tally, params: &DdpsParams) -> Result<Estimate, EstimateError> {
    linear_invert(
        tally.count_of(Response::No),
        tally.total(),
        params.no_rate_given_yes(),
        params.no_rate_given_no(),
        |y, n| no_count_variance(params, y, n),
    )
}

/// Yes estimate from the aggregated `⊥` (not participating) count.
///
/// Non-identifiable under uniform sampling, where the Yes term cancels.
pub fn estimate_from_bottom(tally: &Tally, params: &DdpsParams) -> Result<Estimate, EstimateError> {
    linear_invert(
        tally.count_of(Response::Bottom),
        tally.total(),
        1.0 - params.sampled_yes(),
        1.0 - params.pi_s_no(),
        |y, n| bottom_count_variance(params, y, n),
    )
}

/// One admissible solution of the ±σ sign system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignSolution {
    pub yes: f64,
    pub sigma: f64,
    /// The `(s₁, s₂)` signs applied to σ in the Yes and ⊥ equations.
    pub signs: (i8, i8),
}

/// The dependency line `yes_coeff · YES + σ = rhs` describing the infinite
/// solution family of a degenerate system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DependencyLine {
    pub yes_coeff: f64,
    pub rhs: f64,
}

/// All solutions of the sign system, or its degeneracy report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionSet {
    pub solutions: Vec<SignSolution>,
    /// True when the Yes and ⊥ equations are linearly dependent, so the
    /// system has an infinite solution family instead of point solutions.
    pub degenerate: bool,
    pub dependency: Option<DependencyLine>,
}

impl SolutionSet {
    /// Convenience selector: the surviving solution with minimal |σ|.
    pub fn min_sigma(&self) -> Option<&SignSolution> {
        self.solutions.iter().min_by(|a, b| {
            a.sigma
                .abs()
                .partial_cmp(&b.sigma.abs())
                .expect("solver sigmas are finite")
        })
    }
}

/// Solves the two-equation system in the unknowns `(YES, σ)` formed by the
/// observed "Yes" and `⊥` counts, one equation per count with a shared
/// deviation term `±σ`.
///
/// All four sign combinations are enumerated and each non-singular 2×2
/// system solved in closed form; solutions with a negative Yes count are
/// eliminated, and mirrored sign pairs report the same Yes with a negated
/// σ. When the two expectation lines are dependent — their Yes and ⊥
/// counts sum to the population identically in YES, which happens at
/// `π₁ = π₂ = π₃ = 1` — the closing identity forces opposite σ signs and
/// those are exactly the singular combinations, so the system is reported
/// as degenerate and the solution family's line is returned instead.
///
/// Expects `observed_yes + observed_bottom ≤ total`; real-valued
/// observations are accepted so exact expectations can be solved.
pub fn solve_sign_system(
    observed_yes: f64,
    observed_bottom: f64,
    total: f64,
    params: &DdpsParams,
) -> SolutionSet {
    // Expected counts as lines in YES: E = coeff · YES + offset.
    let yes_coeff = params.yes_rate_given_yes() - params.yes_rate_given_no();
    let yes_offset = params.yes_rate_given_no() * total;
    let bottom_coeff = params.pi_s_no() - params.sampled_yes();
    let bottom_offset = (1.0 - params.pi_s_no()) * total;

    let rhs_yes = observed_yes - yes_offset;
    let rhs_bottom = observed_bottom - bottom_offset;

    if (yes_coeff + bottom_coeff).abs() <= IDENTIFIABILITY_TOLERANCE {
        return SolutionSet {
            solutions: Vec::new(),
            degenerate: true,
            dependency: Some(DependencyLine {
                yes_coeff,
                rhs: rhs_yes,
            }),
        };
    }

    let yes_dust = IDENTIFIABILITY_TOLERANCE * total.abs().max(1.0);
    let mut solutions = Vec::new();
    for (s1, s2) in [(1i8, 1i8), (1, -1), (-1, 1), (-1, -1)] {
        let det = yes_coeff * f64::from(s2) - bottom_coeff * f64::from(s1);
        if det.abs() <= IDENTIFIABILITY_TOLERANCE {
            continue;
        }
        let yes = (rhs_yes * f64::from(s2) - rhs_bottom * f64::from(s1)) / det;
        let sigma = (yes_coeff * rhs_bottom - bottom_coeff * rhs_yes) / det;
        // Float dust just below zero counts as zero.
        let yes = if yes < 0.0 && yes >= -yes_dust { 0.0 } else { yes };
        if yes >= 0.0 {
            solutions.push(SignSolution {
                yes,
                sigma,
                signs: (s1, s2),
            });
        }
    }

    SolutionSet {
        solutions,
        degenerate: false,
        dependency: None,
    }
}

fn dual_difference_sigma(
    plug_yes: f64,
    total: f64,
    prob_first: f64,
    prob_second_hit: f64,
    pi_s: f64,
    mode: CouplingMode,
) -> f64 {
    match mode {
        // The tally difference counts exactly the Yes owners whose shared
        // variate fell in the π_s slice: Binomial(YES, π_s).
        CouplingMode::Coupled => (plug_yes * pi_s * (1.0 - pi_s)).sqrt(),
        CouplingMode::Independent => {
            let var_first = total * prob_first * (1.0 - prob_first);
            let var_second = plug_yes * prob_second_hit * (1.0 - prob_second_hit)
                + (total - plug_yes) * prob_first * (1.0 - prob_first);
            (var_first + var_second).sqrt()
        }
    }
}

/// Yes estimate of the dual mechanism: the `⊥₂` tally difference between
/// the second and first answers, divided by `π_s`.
pub fn estimate_dual(
    tally_first: &Tally,
    tally_second: &Tally,
    params: &DualParams,
    mode: CouplingMode,
) -> Result<Estimate, EstimateError> {
    if params.pi_s() <= 0.0 {
        return Err(EstimateError::ZeroDivisor { name: "pi_s" });
    }
    check_totals_match(tally_first.total(), tally_second.total())?;
    let pi_s = params.pi_s();
    let total = tally_first.total();
    let diff =
        tally_second.count_of(Response::Slot(2)) - tally_first.count_of(Response::Slot(2));
    let value = diff / pi_s;
    let plug_yes = value.clamp(0.0, total);
    let sigma = dual_difference_sigma(
        plug_yes,
        total,
        params.pi_bot2(),
        params.pi_bot2() + pi_s,
        pi_s,
        mode,
    );
    Ok(Estimate::from_parts(value, sigma, pi_s))
}

/// Per-value estimate of the multi-value mechanism: the `⊥_v` tally
/// difference between round two and round one, divided by `π_s`.
pub fn estimate_multivalue(
    tally_round1: &Tally,
    tally_round2: &Tally,
    params: &MultiValueParams,
    value_index: usize,
    mode: CouplingMode,
) -> Result<Estimate, EstimateError> {
    let v = params.value_count();
    if value_index < 1 || value_index > v {
        return Err(EstimateError::ValueIndexOutOfRange {
            index: value_index,
            max: v,
        });
    }
    if params.pi_s() <= 0.0 {
        return Err(EstimateError::ZeroDivisor { name: "pi_s" });
    }
    check_totals_match(tally_round1.total(), tally_round2.total())?;
    let pi_s = params.pi_s();
    let total = tally_round1.total();
    let symbol = Response::Slot(value_index as u16);
    let diff = tally_round2.count_of(symbol) - tally_round1.count_of(symbol);
    let value = diff / pi_s;
    let plug_yes = value.clamp(0.0, total);
    // Round-one probability of the symbol (truth-independent), taken from
    // the mechanism's own pmf so remainder absorption stays consistent.
    let (round1, _) = multivalue_distributions(value_index, params)
        .expect("value_index validated above");
    let prob_round1 = round1.prob_of(symbol);
    let sigma = dual_difference_sigma(
        plug_yes,
        total,
        prob_round1,
        prob_round1 + pi_s,
        pi_s,
        mode,
    );
    Ok(Estimate::from_parts(value, sigma, pi_s))
}

/// Yes estimate of the randomized-response baseline: subtract the expected
/// blind mass `s2 · total` from the aggregate tick count and divide by
/// the truth-tick probability `s1`.
pub fn estimate_rr_baseline(aggregate: f64, total: f64, params: &BaselineParams) -> Estimate {
    let s1 = params.s1();
    let s2 = params.s2();
    let value = (aggregate - s2 * total) / s1;
    let plug_yes = value.clamp(0.0, total);
    let variance = s1 * (1.0 - s1) * plug_yes + s2 * (1.0 - s2) * total;
    Estimate::from_parts(value, variance.sqrt(), s1)
}
