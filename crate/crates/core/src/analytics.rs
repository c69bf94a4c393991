//! Closed-form incentive analysis.
//!
//! Revenues are expressed in units of one whale transaction's fee, so every
//! revenue lies in `[0, 1]`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::StrategyParams;

/// Lower end of the threshold search bracket.
pub const THRESHOLD_BRACKET_LOW: f64 = 1e-6;
/// Upper end of the threshold search bracket (a minority pool).
pub const THRESHOLD_BRACKET_HIGH: f64 = 0.5;
pub const DEFAULT_THRESHOLD_TOL: f64 = 1e-6;
const MAX_BISECTIONS: usize = 200;
// Scan resolution used to locate the first sign change before bisecting.
const THRESHOLD_SCAN_STEPS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("alpha must lie in [0, 1) for the incentive bounds, got {0}")]
    DegenerateAlpha(f64),
    #[error("relative extra reward is undefined for a zero baseline revenue")]
    UndefinedRer,
    #[error("no profitability threshold in (0, 0.5] for gamma = {gamma}")]
    NoThreshold { gamma: f64 },
    #[error("{name} must lie in [0, 1], got {value}")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("tolerance must be positive and finite, got {0}")]
    BadTolerance(f64),
}

/// Fee-split constraints that keep each classic attack unprofitable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncentiveBounds {
    pub alpha: f64,
    /// Lower bound from the transaction inclusion attack.
    pub r_min_inclusion: f64,
    /// Lower bound from the modified transaction inclusion attack.
    pub r_min_modified: f64,
    /// Upper bound from the longest chain extension attack.
    pub r_max_extension: f64,
    /// `(r_min_modified, r_max_extension)` when non-empty.
    pub window: Option<(f64, f64)>,
}

impl IncentiveBounds {
    pub fn admits(&self, r_leader: f64) -> bool {
        self.window
            .is_some_and(|(low, high)| r_leader > low && r_leader < high)
    }
}

pub fn incentive_bounds(alpha: f64) -> Result<IncentiveBounds, AnalyticsError> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(AnalyticsError::DegenerateAlpha(alpha));
    }
    let r_min_inclusion = 1.0 - (1.0 - alpha) / (1.0 + alpha - alpha * alpha);
    let r_max_extension = (1.0 - alpha) / (2.0 - alpha);
    let r_min_modified = alpha / (1.0 + alpha);
    let window = (r_min_modified < r_max_extension).then_some((r_min_modified, r_max_extension));
    Ok(IncentiveBounds {
        alpha,
        r_min_inclusion,
        r_min_modified,
        r_max_extension,
        window,
    })
}

/// Reach probabilities of the named states within one episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateProbabilities {
    pub p_s: f64,
    pub p_a0: f64,
    pub p_h0: f64,
    pub p_h00: f64,
    pub p_h10: f64,
    pub p_a1: f64,
    pub p_a2: f64,
    pub p_a00: f64,
    pub p_a10: f64,
    pub p_a20: f64,
}

/// `sum_k (alpha (1 - alpha))^k`, the excursion factor used for the tie states.
pub fn excursion_factor(alpha: f64) -> f64 {
    1.0 / (1.0 - alpha * (1.0 - alpha))
}

/// Evaluates the state recurrences in dependency order.
pub fn state_probabilities(params: &StrategyParams) -> StateProbabilities {
    let a = params.alpha();
    let g = params.gamma();
    let excursion = excursion_factor(a);

    let p_s = 1.0;
    let p_a0 = (1.0 - a) * p_s;
    let p_h0 = a + a * p_a0;
    let p_a1 = (1.0 - a) * p_a0;
    let p_a2 = a * p_a1;
    let p_h00 = (1.0 - a) * p_h0 + g * (1.0 - a) * p_a2;
    let p_h10 = a * p_h00 * excursion;
    let p_a00 = (1.0 - a) * p_a1;
    let p_a10 = (1.0 - g) * (1.0 - a) * p_a2 + a * p_a00;
    let p_a20 = a * p_a10 * excursion;

    StateProbabilities {
        p_s,
        p_a0,
        p_h0,
        p_h00,
        p_h10,
        p_a1,
        p_a2,
        p_a00,
        p_a10,
        p_a20,
    }
}

/// The four reach probabilities that feed the greedy revenue, in closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedForms {
    pub p_h0: f64,
    pub p_a2: f64,
    pub p_h10: f64,
    pub p_a20: f64,
}

pub fn closed_forms(params: &StrategyParams) -> ClosedForms {
    let a = params.alpha();
    let g = params.gamma();
    let b = 1.0 - a;
    let denom = 1.0 - a * b;
    ClosedForms {
        p_h0: a * (2.0 - a),
        p_a2: a * b * b,
        p_h10: (a * a * b * (2.0 - a) + g * a * a * b.powi(3)) / denom,
        p_a20: (2.0 - g) * a * a * b.powi(3) / denom,
    }
}

/// Expected whale-fee share of an honestly mining pool.
///
/// The three cases sum to `alpha` for every fee split.
pub fn honest_revenue(params: &StrategyParams) -> f64 {
    let a = params.alpha();
    let r = params.r_leader();
    a * a + a * (1.0 - a) * r + (1.0 - a) * a * (1.0 - r)
}

/// Expected whale-fee share of the greedy pool.
pub fn greedy_revenue(params: &StrategyParams) -> f64 {
    let a = params.alpha();
    let tie_win = a + params.gamma() * (1.0 - a);
    let p = state_probabilities(params);
    a * p.p_h0 + tie_win * p.p_h10 + a * p.p_a2 + tie_win * p.p_a20
}

/// Relative extra reward of `r_attack` over `r_base`, as a signed fraction.
pub fn rer(r_attack: f64, r_base: f64) -> Result<f64, AnalyticsError> {
    if r_base == 0.0 {
        return Err(AnalyticsError::UndefinedRer);
    }
    Ok((r_attack - r_base) / r_base)
}

/// Everything the closed forms say about one parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticReport {
    pub params: StrategyParams,
    pub probs: StateProbabilities,
    pub revenue_honest: f64,
    pub revenue_greedy: f64,
    /// `None` when the honest revenue is zero.
    pub rer: Option<f64>,
}

pub fn analytic_report(params: &StrategyParams) -> AnalyticReport {
    let revenue_honest = honest_revenue(params);
    let revenue_greedy = greedy_revenue(params);
    AnalyticReport {
        params: *params,
        probs: state_probabilities(params),
        revenue_honest,
        revenue_greedy,
        rer: rer(revenue_greedy, revenue_honest).ok(),
    }
}

fn revenue_gap(alpha: f64, gamma: f64) -> f64 {
    let params = StrategyParams::with_default_split(alpha, gamma)
        .expect("bracket and gamma validated by caller");
    greedy_revenue(&params) - honest_revenue(&params)
}

/// Smallest mining-power share at which Greedy-Mine out-earns honest mining.
///
/// The bracket `[1e-6, 0.5]` is scanned for the first sign change of the
/// revenue gap, which is then bisected until the bracket is narrower than
/// `tol` (at most 200 halvings).
pub fn threshold_alpha(gamma: f64, tol: f64) -> Result<f64, AnalyticsError> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(AnalyticsError::OutOfRange {
            name: "gamma",
            value: gamma,
        });
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(AnalyticsError::BadTolerance(tol));
    }

    let step = (THRESHOLD_BRACKET_HIGH - THRESHOLD_BRACKET_LOW) / THRESHOLD_SCAN_STEPS as f64;
    let mut low = THRESHOLD_BRACKET_LOW;
    let mut gap_low = revenue_gap(low, gamma);
    if gap_low == 0.0 {
        return Ok(low);
    }
    let mut bracket = None;
    for i in 1..=THRESHOLD_SCAN_STEPS {
        let high = if i == THRESHOLD_SCAN_STEPS {
            THRESHOLD_BRACKET_HIGH
        } else {
            THRESHOLD_BRACKET_LOW + step * i as f64
        };
        let gap_high = revenue_gap(high, gamma);
        if gap_high == 0.0 {
            return Ok(high);
        }
        if gap_low.signum() != gap_high.signum() {
            bracket = Some((low, high));
            break;
        }
        low = high;
        gap_low = gap_high;
    }
    let (mut low, mut high) = bracket.ok_or(AnalyticsError::NoThreshold { gamma })?;

    let sign_low = revenue_gap(low, gamma).signum();
    for _ in 0..MAX_BISECTIONS {
        if high - low <= tol {
            break;
        }
        let mid = 0.5 * (low + high);
        let gap_mid = revenue_gap(mid, gamma);
        if gap_mid == 0.0 {
            return Ok(mid);
        }
        if gap_mid.signum() == sign_low {
            low = mid;
        } else {
            high = mid;
        }
    }
    Ok(0.5 * (low + high))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(alpha: f64, gamma: f64) -> StrategyParams {
        StrategyParams::with_default_split(alpha, gamma).unwrap()
    }

    #[test]
    fn bound_corners_at_quarter_power() {
        let b = incentive_bounds(0.25).unwrap();
        assert!((b.r_min_inclusion - 0.3684).abs() < 1e-4);
        assert!((b.r_max_extension - 0.4286).abs() < 1e-4);
        assert!((b.r_min_modified - 0.2).abs() < 1e-12);
        let (low, high) = b.window.unwrap();
        assert_eq!(low, b.r_min_modified);
        assert_eq!(high, b.r_max_extension);
        assert!(b.admits(0.4));
        assert!(!b.admits(0.45));
    }

    #[test]
    fn bounds_for_powerless_adversary() {
        let b = incentive_bounds(0.0).unwrap();
        assert_eq!(b.r_min_inclusion, 0.0);
        assert_eq!(b.r_min_modified, 0.0);
        assert_eq!(b.r_max_extension, 0.5);
        assert_eq!(b.window, Some((0.0, 0.5)));
    }

    #[test]
    fn bounds_reject_full_power() {
        assert_eq!(
            incentive_bounds(1.0),
            Err(AnalyticsError::DegenerateAlpha(1.0))
        );
        assert!(incentive_bounds(-0.1).is_err());
    }

    #[test]
    fn window_closes_for_large_alpha() {
        // The two bounds meet at alpha = 1/2.
        assert!(incentive_bounds(0.45).unwrap().window.is_some());
        let b = incentive_bounds(0.5).unwrap();
        assert!((b.r_min_modified - b.r_max_extension).abs() < 1e-15);
        assert!(incentive_bounds(0.6).unwrap().window.is_none());
    }

    #[test]
    fn state_probability_examples() {
        let p = state_probabilities(&params(0.5, 0.0));
        assert!((p.p_h0 - 0.75).abs() < 1e-15);
        assert!((p.p_a2 - 0.125).abs() < 1e-15);
        assert!((p.p_h10 - 0.25).abs() < 1e-15);
        assert!((p.p_a20 - 1.0 / 12.0).abs() < 1e-15);

        let p = state_probabilities(&params(0.0, 0.7));
        assert_eq!((p.p_h0, p.p_h10, p.p_a2, p.p_a20), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(p.p_s, 1.0);

        let p = state_probabilities(&params(0.2, 1.0));
        assert!((p.p_h10 - 0.078_08 / 0.84).abs() < 1e-15);
        assert!((p.p_h10 - 0.092_952_4).abs() < 1e-7);
        assert!((p.p_a20 - 0.024_381_0).abs() < 1e-7);
    }

    #[test]
    fn revenue_examples() {
        assert!((honest_revenue(&StrategyParams::new(0.3, 0.0, 0.4).unwrap()) - 0.3).abs() < 1e-15);
        assert_eq!(honest_revenue(&StrategyParams::new(0.0, 0.0, 0.9).unwrap()), 0.0);
        assert_eq!(honest_revenue(&StrategyParams::new(1.0, 0.0, 0.1).unwrap()), 1.0);

        assert!((greedy_revenue(&params(0.5, 0.0)) - 0.604_166_7).abs() < 1e-7);
        assert!((greedy_revenue(&params(0.2, 1.0)) - 0.214_933_3).abs() < 1e-7);
        assert_eq!(greedy_revenue(&params(0.0, 0.4)), 0.0);
    }

    #[test]
    fn rer_examples() {
        assert!((rer(0.604_166_7, 0.5).unwrap() - 0.208_333).abs() < 1e-6);
        assert_eq!(rer(0.37, 0.37).unwrap(), 0.0);
        let r = rer(greedy_revenue(&params(0.1, 0.0)), 0.1).unwrap();
        assert!((r - (-0.694_187)).abs() < 1e-6);
        assert_eq!(rer(0.1, 0.0), Err(AnalyticsError::UndefinedRer));
    }

    #[test]
    fn report_flags_undefined_rer() {
        let report = analytic_report(&params(0.0, 0.5));
        assert_eq!(report.revenue_greedy, 0.0);
        assert!(report.rer.is_none());
        assert!(analytic_report(&params(0.3, 0.5)).rer.is_some());
    }

    #[test]
    fn threshold_examples() {
        let full = threshold_alpha(1.0, 1e-6).unwrap();
        assert!((full - 0.180).abs() <= 0.005, "{full}");
        let none = threshold_alpha(0.0, 1e-6).unwrap();
        assert!(none > 0.3 && none < 0.4, "{none}");
        assert_eq!(
            threshold_alpha(0.5, 1e-9).unwrap(),
            threshold_alpha(0.5, 1e-9).unwrap()
        );
    }

    #[test]
    fn threshold_is_a_root() {
        for gamma in [0.0, 0.3, 0.6, 1.0] {
            let root = threshold_alpha(gamma, 1e-10).unwrap();
            assert!(revenue_gap(root - 1e-8, gamma) < 0.0);
            assert!(revenue_gap(root + 1e-8, gamma) > 0.0);
        }
    }

    #[test]
    fn threshold_validates_inputs() {
        assert!(matches!(
            threshold_alpha(1.5, 1e-6),
            Err(AnalyticsError::OutOfRange { .. })
        ));
        assert_eq!(
            threshold_alpha(0.5, 0.0),
            Err(AnalyticsError::BadTolerance(0.0))
        );
        assert!(threshold_alpha(0.5, f64::NAN).is_err());
    }
}
