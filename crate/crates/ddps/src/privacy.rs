//! Privacy leakage and crowd-blending analysis.
//!
//! The dual mechanism's differential-privacy leakage reduces to two
//! likelihood ratios: a Yes owner inflates the `⊥₂` probability by `π_s`
//! and a No owner inflates `⊥₃` the same way. Crowd strength is measured
//! with the binomial complementary cumulative distribution function: how
//! many noisy "Yes" responders a truthful owner provably blends with, and
//! how many simultaneous locations a single owner appears to claim.

use serde::Serialize;
use statrs::function::beta::beta_reg;

use crate::mechanisms::{ddps_distribution, DdpsParams, DualParams, Probability, Truth};

/// The dual mechanism's leakage, reported both with and without the
/// logarithm since both forms are in common use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsilonReport {
    /// `(π_{⊥2} + π_s) / π_{⊥2}` — how much a Yes owner inflates `⊥₂`.
    pub ratio_bot2: f64,
    /// `(π_{⊥3} + π_s) / π_{⊥3}` — how much a No owner inflates `⊥₃`.
    pub ratio_bot3: f64,
    /// `ln` of the larger ratio.
    pub epsilon: f64,
    /// The larger ratio itself, `exp(epsilon)`.
    pub epsilon_no_log: f64,
}

fn leakage_ratio(base: f64, pi_s: f64) -> f64 {
    if pi_s == 0.0 {
        // No sampled slice: the two answer rounds are indistinguishable.
        1.0
    } else if base == 0.0 {
        f64::INFINITY
    } else {
        (base + pi_s) / base
    }
}

/// Differential-privacy leakage of the dual mechanism.
///
/// A zero `π_{⊥2}` or `π_{⊥3}` (with a non-empty sampled slice) is
/// reported as infinite leakage rather than an error, so parameter sweeps
/// can chart it.
pub fn epsilon_dual(params: &DualParams) -> EpsilonReport {
    let ratio_bot2 = leakage_ratio(params.pi_bot2(), params.pi_s());
    let ratio_bot3 = leakage_ratio(params.pi_bot3(), params.pi_s());
    let epsilon_no_log = ratio_bot2.max(ratio_bot3);
    EpsilonReport {
        ratio_bot2,
        ratio_bot3,
        epsilon: epsilon_no_log.ln(),
        epsilon_no_log,
    }
}

/// Worst-case log likelihood ratio of the two-coin mechanism over its
/// output alphabet `(⊥, Yes, No)`; the budget analogue of [`epsilon_dual`]
/// used when tuning constrains leakage.
pub fn epsilon_ddps(params: &DdpsParams) -> f64 {
    let yes_dist = ddps_distribution(Truth::Yes, params);
    let no_dist = ddps_distribution(Truth::No, params);
    let mut worst: f64 = 0.0;
    for (symbol, p_yes) in yes_dist.iter() {
        let p_no = no_dist.prob_of(symbol);
        let ratio = match (p_yes > 0.0, p_no > 0.0) {
            (false, false) => continue,
            (true, true) => (p_yes / p_no).max(p_no / p_yes),
            _ => f64::INFINITY,
        };
        worst = worst.max(ratio.ln());
    }
    worst
}

/// `P(X ≥ k)` for `X ~ Binomial(n, p)`, via the regularized incomplete
/// beta identity (numerically stable for large `n`).
pub fn binomial_ccdf(n: u64, p: Probability, k: u64) -> Probability {
    let value = if k == 0 {
        1.0
    } else if k > n {
        0.0
    } else if p.value() == 0.0 {
        0.0
    } else if p.value() == 1.0 {
        1.0
    } else {
        beta_reg(k as f64, (n - k + 1) as f64, p.value()).clamp(0.0, 1.0)
    };
    Probability::new(value).expect("ccdf value is clamped to [0, 1]")
}

/// Crowd-blending strength: with confidence `confidence`, at least
/// `crowd_size` of the `n` owners emit a noisy "Yes" alongside a truthful
/// responder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrowdReport {
    pub n: u64,
    pub p: Probability,
    pub confidence: Probability,
    pub crowd_size: u64,
}

/// Largest `k` such that `P(X ≥ k) ≥ confidence`; the ccdf is
/// non-increasing in `k`, so a binary search suffices.
fn ccdf_threshold(n: u64, p: Probability, confidence: Probability) -> u64 {
    let meets = |k: u64| binomial_ccdf(n, p, k).value() >= confidence.value();
    if !meets(1) {
        return 0;
    }
    let (mut lo, mut hi) = (1u64, n); // meets(lo) holds
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if meets(mid) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    lo
}

/// Number of noisy-"Yes" owners a truthful responder blends with, out of a
/// blending population of `n` owners each answering "Yes" with probability
/// `p` (e.g. `π_{s_No} · π₃` for the two-coin mechanism).
pub fn crowd_size(n: u64, p: Probability, confidence: Probability) -> CrowdReport {
    CrowdReport {
        n,
        p,
        confidence,
        crowd_size: ccdf_threshold(n, p, confidence),
    }
}

/// Number of simultaneous location claims a single owner makes across
/// `num_queries` station queries, at the given confidence.
pub fn location_spread(num_queries: u64, p: Probability, confidence: Probability) -> u64 {
    ccdf_threshold(num_queries, p, confidence)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prob(v: f64) -> Probability {
        Probability::new(v).unwrap()
    }

    fn assert_close(actual: f64, expected: f64, tol: f64) {
        assert!(
            (actual - expected).abs() <= tol,
            "expected {expected}, got {actual}"
        );
    }

    /// Direct pmf summation; the independent oracle for the ccdf.
    fn brute_force_ccdf(n: u64, p: f64, k: u64) -> f64 {
        let mut sum = 0.0;
        for i in k..=n {
            let mut term = 1.0;
            for j in 0..i {
                term *= (n - j) as f64 / (j + 1) as f64;
            }
            sum += term * p.powi(i as i32) * (1.0 - p).powi((n - i) as i32);
        }
        sum
    }

    #[test]
    fn epsilon_reference_values() {
        let params = DualParams::new(0.91, 0.02, 0.05).unwrap();
        assert_close(params.pi_bot3(), 0.02, 1e-15);
        let report = epsilon_dual(&params);
        assert_close(report.ratio_bot2, 3.5, 1e-12);
        assert_close(report.ratio_bot3, 3.5, 1e-12);
        assert_close(report.epsilon, 3.5f64.ln(), 1e-12);
        assert_close(report.epsilon_no_log, 3.5, 1e-12);
    }

    #[test]
    fn epsilon_asymmetric_slots() {
        let params = DualParams::new(0.2, 0.3, 0.05).unwrap();
        let report = epsilon_dual(&params);
        assert_close(report.ratio_bot2, 0.35 / 0.3, 1e-12);
        assert_close(report.ratio_bot3, 0.5 / 0.45, 1e-12);
        assert_close(report.epsilon, (0.35f64 / 0.3).ln(), 1e-12);
    }

    #[test]
    fn epsilon_zero_slice_is_perfect() {
        let params = DualParams::new(0.2, 0.3, 0.0).unwrap();
        let report = epsilon_dual(&params);
        assert_eq!(report.ratio_bot2, 1.0);
        assert_eq!(report.ratio_bot3, 1.0);
        assert_eq!(report.epsilon, 0.0);
    }

    #[test]
    fn epsilon_zero_denominator_is_infinite_not_an_error() {
        let params = DualParams::new(0.95, 0.0, 0.05).unwrap();
        let report = epsilon_dual(&params);
        assert!(report.ratio_bot2.is_infinite());
        assert!(report.epsilon.is_infinite());
    }

    #[test]
    fn epsilon_no_log_is_exp_of_epsilon() {
        for (b1, b2, s) in [(0.2, 0.3, 0.05), (0.4, 0.1, 0.2), (0.91, 0.02, 0.05)] {
            let report = epsilon_dual(&DualParams::new(b1, b2, s).unwrap());
            assert_close(report.epsilon_no_log, report.epsilon.exp(), 1e-12);
        }
    }

    #[test]
    fn epsilon_monotone_in_parameters() {
        let base = |s: f64| epsilon_dual(&DualParams::new(0.2, 0.3, s).unwrap()).epsilon;
        let mut last = base(0.0);
        for i in 1..=40 {
            let eps = base(i as f64 * 0.01);
            assert!(eps >= last);
            last = eps;
        }
        // Widening both noise slots never increases leakage:
        // (pi_bot2, pi_bot3) grows from (0.1, 0.35) to (0.25, 0.5).
        let narrow = epsilon_dual(&DualParams::new(0.5, 0.1, 0.05).unwrap());
        let wide = epsilon_dual(&DualParams::new(0.2, 0.25, 0.05).unwrap());
        assert!(wide.epsilon <= narrow.epsilon);
    }

    #[test]
    fn ccdf_reference_value() {
        assert_close(
            binomial_ccdf(10, prob(0.5), 5).value(),
            0.623046875,
            1e-12,
        );
    }

    #[test]
    fn ccdf_edges() {
        assert_eq!(binomial_ccdf(10, prob(0.3), 0).value(), 1.0);
        assert_eq!(binomial_ccdf(10, prob(0.3), 11).value(), 0.0);
        assert_eq!(binomial_ccdf(10, prob(0.0), 3).value(), 0.0);
        assert_eq!(binomial_ccdf(10, prob(1.0), 10).value(), 1.0);
    }

    #[test]
    fn ccdf_matches_brute_force() {
        for n in [1u64, 5, 17, 50] {
            for p in [0.01, 0.049, 0.5, 0.98] {
                for k in 0..=n + 1 {
                    let direct = brute_force_ccdf(n, p, k);
                    let stable = binomial_ccdf(n, prob(p), k).value();
                    assert!(
                        (stable - direct).abs() <= 1e-10,
                        "n={n} p={p} k={k}: {stable} vs {direct}"
                    );
                }
            }
        }
    }

    #[test]
    fn ccdf_non_increasing_in_k() {
        let mut last = 1.0;
        for k in 0..=51 {
            let value = binomial_ccdf(50, prob(0.3), k).value();
            assert!(value <= last + 1e-15);
            last = value;
        }
    }

    #[test]
    fn crowd_size_reference_scan() {
        // mean 49, sigma ≈ 6.83; the exact scan lands at 34 ≈ 49 − 2.33σ.
        let report = crowd_size(1000, prob(0.049), prob(0.99));
        assert_eq!(report.crowd_size, 34);
        // Verified against the brute-force scan.
        let mut exact = 0;
        for k in 0..=1000 {
            if binomial_ccdf(1000, prob(0.049), k).value() >= 0.99 {
                exact = k;
            }
        }
        assert_eq!(report.crowd_size, exact);
    }

    #[test]
    fn crowd_size_edges() {
        assert_eq!(crowd_size(1000, prob(0.0), prob(0.99)).crowd_size, 0);
        assert_eq!(crowd_size(1000, prob(1.0), prob(0.99)).crowd_size, 1000);
    }

    #[test]
    fn crowd_size_monotonicity() {
        let at = |n: u64, p: f64, c: f64| crowd_size(n, prob(p), prob(c)).crowd_size;
        assert!(at(2000, 0.049, 0.99) >= at(1000, 0.049, 0.99));
        assert!(at(1000, 0.08, 0.99) >= at(1000, 0.049, 0.99));
        assert!(at(1000, 0.049, 0.999) <= at(1000, 0.049, 0.9));
    }

    #[test]
    fn location_spread_reference_scan() {
        // 3,320 queries at pi_s_no * pi_3 ≈ 0.049: about 160 around the
        // mean, dropping to 134 at 99% confidence.
        assert_eq!(location_spread(3320, prob(0.049), prob(0.5)), 163);
        assert_eq!(location_spread(3320, prob(0.049), prob(0.99)), 134);
        assert_eq!(location_spread(3320, prob(0.0), prob(0.99)), 0);
        assert_eq!(location_spread(0, prob(0.049), prob(0.99)), 0);
    }

    #[test]
    fn ddps_leakage_is_finite_for_interior_parameters() {
        let params = DdpsParams::new(0.45, 0.50, 0.95, 0.98, 0.068, 0.98).unwrap();
        let eps = epsilon_ddps(&params);
        assert!(eps.is_finite() && eps > 0.0);
        // Silent No population can never explain a "No" response: infinite.
        let skewed = DdpsParams::new(0.45, 0.50, 0.95, 0.98, 0.0, 0.98).unwrap();
        assert!(epsilon_ddps(&skewed).is_infinite());
    }
}
