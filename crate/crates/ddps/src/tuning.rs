//! Variance-minimizing parameter search.
//!
//! The aggregated "Yes" count is a sum of independent, non-identically
//! distributed Bernoulli trials — a Poisson-binomial variable — so its
//! variance splits into one term per population. Tuning searches an
//! exhaustive parameter grid for the vector minimizing that variance,
//! optionally under a leakage budget. Exhaustive search is deliberate: the
//! objective is cheap, the space is a box, and reproducibility matters
//! more than speed here.

use serde::Serialize;
use thiserror::Error;

use crate::mechanisms::{DdpsParams, ParamError};
use crate::privacy::epsilon_ddps;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("invalid search spec: {0}")]
    InvalidSpec(String),
    #[error("no grid point satisfies the structural constraints and budget")]
    EmptyGrid,
}

/// The two-population variance split of the aggregated "Yes" count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectiveValue {
    pub var_given_yes: f64,
    pub var_given_no: f64,
    pub total: f64,
}

/// Poisson-binomial variance of the "Yes" tally at population counts
/// `(yes, no)`, split by contributing population.
pub fn variance_objective(params: &DdpsParams, yes: u64, no: u64) -> ObjectiveValue {
    let p_yes = params.yes_rate_given_yes();
    let p_no = params.yes_rate_given_no();
    let var_given_yes = p_yes * (1.0 - p_yes) * yes as f64;
    let var_given_no = p_no * (1.0 - p_no) * no as f64;
    ObjectiveValue {
        var_given_yes,
        var_given_no,
        total: var_given_yes + var_given_no,
    }
}

/// Inclusive sweep range for one parameter, within `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamRange {
    pub lo: f64,
    pub hi: f64,
}

impl ParamRange {
    pub const FULL: ParamRange = ParamRange { lo: 0.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Result<Self, SearchError> {
        if !(lo.is_finite() && hi.is_finite() && (0.0..=1.0).contains(&lo) && lo <= hi && hi <= 1.0)
        {
            return Err(SearchError::InvalidSpec(format!(
                "range {lo}..{hi} must satisfy 0 <= lo <= hi <= 1"
            )));
        }
        Ok(ParamRange { lo, hi })
    }

    pub fn fixed(value: f64) -> Result<Self, SearchError> {
        Self::new(value, value)
    }

    fn values(&self, step: f64) -> Vec<f64> {
        let count = ((self.hi - self.lo) / step + 1e-9).floor() as usize;
        (0..=count).map(|i| self.lo + i as f64 * step).collect()
    }
}

/// Grid-search configuration: step size, per-parameter bounds, the
/// population the variance is evaluated against, and an optional leakage
/// budget (worst-case log likelihood ratio of the resulting mechanism).
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpec {
    pub step: f64,
    pub pi_s_yes1: ParamRange,
    pub pi_s_yes2: ParamRange,
    pub pi_1: ParamRange,
    pub pi_2: ParamRange,
    pub pi_s_no: ParamRange,
    pub pi_3: ParamRange,
    pub yes: u64,
    pub no: u64,
    pub epsilon_budget: Option<f64>,
}

impl SearchSpec {
    /// Full `[0, 1]` ranges on every parameter; narrow them field-wise.
    pub fn new(step: f64, yes: u64, no: u64) -> Result<Self, SearchError> {
        if !(step.is_finite() && step > 0.0) {
            return Err(SearchError::InvalidSpec(format!(
                "step must be positive, got {step}"
            )));
        }
        if yes + no == 0 {
            return Err(SearchError::InvalidSpec(
                "population must be non-empty".into(),
            ));
        }
        Ok(SearchSpec {
            step,
            pi_s_yes1: ParamRange::FULL,
            pi_s_yes2: ParamRange::FULL,
            pi_1: ParamRange::FULL,
            pi_2: ParamRange::FULL,
            pi_s_no: ParamRange::FULL,
            pi_3: ParamRange::FULL,
            yes,
            no,
            epsilon_budget: None,
        })
    }

    /// Every feasible grid point in lexicographic parameter order
    /// `(π_{s_Yes1}, π_{s_Yes2}, π₁, π₂, π_{s_No}, π₃)`.
    pub fn feasible_points(&self) -> GridIter {
        GridIter {
            axes: [
                self.pi_s_yes1.values(self.step),
                self.pi_s_yes2.values(self.step),
                self.pi_1.values(self.step),
                self.pi_2.values(self.step),
                self.pi_s_no.values(self.step),
                self.pi_3.values(self.step),
            ],
            index: [0; 6],
            exhausted: false,
            epsilon_budget: self.epsilon_budget,
        }
    }
}

/// Odometer over the six parameter axes, yielding only points that
/// satisfy the structural constraints (and budget, when set).
pub struct GridIter {
    axes: [Vec<f64>; 6],
    index: [usize; 6],
    exhausted: bool,
    epsilon_budget: Option<f64>,
}

impl GridIter {
    fn advance(&mut self) {
        for axis in (0..6).rev() {
            self.index[axis] += 1;
            if self.index[axis] < self.axes[axis].len() {
                return;
            }
            self.index[axis] = 0;
        }
        self.exhausted = true;
    }
}

impl Iterator for GridIter {
    type Item = DdpsParams;

    fn next(&mut self) -> Option<DdpsParams> {
        while !self.exhausted {
            let [a, b, c, d, e, f] =
                std::array::from_fn(|axis| self.axes[axis][self.index[axis]]);
            self.advance();
            if let Ok(params) = DdpsParams::new(a, b, c, d, e, f) {
                let within_budget = self
                    .epsilon_budget
                    .is_none_or(|cap| epsilon_ddps(&params) <= cap);
                if within_budget {
                    return Some(params);
                }
            }
        }
        None
    }
}

/// Exhaustive grid minimization of [`variance_objective`].
///
/// Returns the feasible grid point with the smallest total variance; ties
/// go to the lexicographically first point in the parameter order
/// `(π_{s_Yes1}, π_{s_Yes2}, π₁, π₂, π_{s_No}, π₃)`, which makes the
/// result independent of evaluation strategy.
pub fn grid_search_min_variance(
    spec: &SearchSpec,
) -> Result<(DdpsParams, ObjectiveValue), SearchError> {
    let mut best: Option<(DdpsParams, ObjectiveValue)> = None;
    for params in spec.feasible_points() {
        let objective = variance_objective(&params, spec.yes, spec.no);
        match &best {
            Some((_, incumbent)) if objective.total >= incumbent.total => {}
            _ => best = Some((params, objective)),
        }
    }
    best.ok_or(SearchError::EmptyGrid)
}

impl From<ParamError> for SearchError {
    fn from(err: ParamError) -> Self {
        SearchError::InvalidSpec(err.to_string())
    }
}
