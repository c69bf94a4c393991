use greedy_mine::analytics::{
    closed_forms, excursion_factor, greedy_revenue, honest_revenue, state_probabilities,
};
use greedy_mine::experiments::{from_csv, from_json, to_csv, to_json, SweepRecord, ThresholdRecord};
use greedy_mine::model::{transition_distribution, ChainState, StrategyParams};
use greedy_mine::oracle::absorption_bounds;
use proptest::prelude::*;

fn any_state() -> impl Strategy<Value = ChainState> {
    use ChainState::*;
    prop_oneof![
        Just(S),
        Just(H0),
        Just(H10),
        Just(A0),
        Just(A1),
        Just(A2),
        Just(A20),
        (0u32..200).prop_map(H0k),
        (1u32..200).prop_map(H1k),
        (0u32..200).prop_map(A0k),
        (0u32..200).prop_map(A1k),
        (1u32..200).prop_map(A2k),
    ]
}

fn params() -> impl Strategy<Value = StrategyParams> {
    (0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64)
        .prop_map(|(a, g, r)| StrategyParams::new(a, g, r).unwrap())
}

proptest! {
    #[test]
    fn distribution_is_stochastic(state in any_state(), p in params()) {
        let dist = transition_distribution(state, &p).unwrap();
        let total: f64 = dist.iter().map(|(_, q)| q).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for (next, q) in &dist {
            prop_assert!(*q > 0.0);
            prop_assert!(next.is_valid());
            prop_assert_ne!(*next, ChainState::HonestWin);
        }
        let mut seen: Vec<_> = dist.iter().map(|(s, _)| *s).collect();
        seen.sort();
        seen.dedup();
        prop_assert_eq!(seen.len(), dist.len());
    }

    #[test]
    fn index_steps_by_at_most_one(state in any_state(), p in params()) {
        let from = state.index().unwrap_or(0) as i64;
        for (next, _) in transition_distribution(state, &p).unwrap() {
            let to = next.index().unwrap_or(0) as i64;
            prop_assert!((to - from).abs() <= 1);
        }
    }

    #[test]
    fn recurrences_match_closed_forms(p in params()) {
        let probs = state_probabilities(&p);
        let closed = closed_forms(&p);
        prop_assert!((probs.p_h0 - closed.p_h0).abs() < 1e-12);
        prop_assert!((probs.p_a2 - closed.p_a2).abs() < 1e-12);
        prop_assert!((probs.p_h10 - closed.p_h10).abs() < 1e-12);
        prop_assert!((probs.p_a20 - closed.p_a20).abs() < 1e-12);
        prop_assert_eq!(probs.p_s, 1.0);
        for v in [probs.p_a0, probs.p_h0, probs.p_h00, probs.p_h10, probs.p_a1,
                  probs.p_a2, probs.p_a00, probs.p_a10, probs.p_a20] {
            prop_assert!((0.0..=1.0).contains(&v), "{v}");
        }
    }

    #[test]
    fn honest_revenue_is_alpha(p in params()) {
        prop_assert!((honest_revenue(&p) - p.alpha()).abs() < 1e-12);
    }

    #[test]
    fn greedy_revenue_is_the_flux_into_h1(p in params()) {
        let a = p.alpha();
        let tie_win = a + p.gamma() * (1.0 - a);
        let probs = state_probabilities(&p);
        let flux = a * probs.p_h0 + tie_win * (probs.p_h10 + probs.p_a20) + a * probs.p_a2;
        let revenue = greedy_revenue(&p);
        prop_assert!((revenue - flux).abs() < 1e-15);
        prop_assert!((0.0..=1.0).contains(&revenue));
        // The excursion factor only appears through the two tie states.
        prop_assert!(excursion_factor(a) >= 1.0);
    }

    #[test]
    fn csv_round_trip(records in prop::collection::vec(sweep_record(), 0..20)) {
        let back: Vec<SweepRecord> = from_csv(&to_csv(&records).unwrap()).unwrap();
        prop_assert_eq!(back.len(), records.len());
        for (x, y) in records.iter().zip(&back) {
            prop_assert!(same_at_precision(x, y), "{x:?} vs {y:?}");
        }
        let json: Vec<SweepRecord> = from_json(&to_json(&records).unwrap()).unwrap();
        prop_assert_eq!(json, records);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn oracle_bounds_are_ordered(a in 0.0..=1.0f64, g in 0.0..=1.0f64, depth in 2u32..40) {
        let p = StrategyParams::with_default_split(a, g).unwrap();
        let b = absorption_bounds(&p, depth).unwrap();
        prop_assert!(0.0 <= b.lower && b.lower <= b.upper && b.upper <= 1.0);
        prop_assert!((b.residual - (b.upper - b.lower)).abs() < 1e-15);
        let deeper = absorption_bounds(&p, depth + 8).unwrap();
        prop_assert!(deeper.residual <= b.residual + 1e-12);
    }
}

fn optional_unit() -> impl Strategy<Value = Option<f64>> {
    prop_oneof![Just(None), (0.0..=1.0f64).prop_map(Some)]
}

prop_compose! {
    fn sweep_record()(
        alpha in 0.0..=1.0f64,
        gamma in 0.0..=1.0f64,
        honest in 0.0..=1.0f64,
        greedy in 0.0..=1.0f64,
        lower in optional_unit(),
        upper in optional_unit(),
        mc in optional_unit(),
        rer in prop_oneof![Just(None), (-1.0..10.0f64).prop_map(Some)],
        ci in optional_unit(),
    ) -> SweepRecord {
        SweepRecord {
            alpha,
            gamma,
            revenue_honest: honest,
            revenue_greedy_closed: greedy,
            revenue_greedy_oracle_lower: lower,
            revenue_greedy_oracle_upper: upper,
            revenue_greedy_mc: mc,
            rer_closed: rer,
            mc_ci: ci,
        }
    }
}

fn close(x: f64, y: f64) -> bool {
    // Ten significant digits, or absolute 1e-10 near zero.
    (x - y).abs() <= 5e-10 * x.abs().max(1e-1)
}

fn close_opt(x: Option<f64>, y: Option<f64>) -> bool {
    match (x, y) {
        (Some(x), Some(y)) => close(x, y),
        (None, None) => true,
        _ => false,
    }
}

fn same_at_precision(x: &SweepRecord, y: &SweepRecord) -> bool {
    close(x.alpha, y.alpha)
        && close(x.gamma, y.gamma)
        && close(x.revenue_honest, y.revenue_honest)
        && close(x.revenue_greedy_closed, y.revenue_greedy_closed)
        && close_opt(x.revenue_greedy_oracle_lower, y.revenue_greedy_oracle_lower)
        && close_opt(x.revenue_greedy_oracle_upper, y.revenue_greedy_oracle_upper)
        && close_opt(x.revenue_greedy_mc, y.revenue_greedy_mc)
        && close_opt(x.rer_closed, y.rer_closed)
        && close_opt(x.mc_ci, y.mc_ci)
}

#[test]
fn honest_revenue_grid_ignores_fee_split() {
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        for j in 0..100 {
            let alpha = i as f64 / 99.0;
            let r = j as f64 / 99.0;
            let p = StrategyParams::new(alpha, 0.5, r).unwrap();
            worst = worst.max((honest_revenue(&p) - alpha).abs());
        }
    }
    assert!(worst < 1e-12, "{worst}");
}

#[test]
fn threshold_records_round_trip() {
    let records: Vec<ThresholdRecord> = (0..1000)
        .map(|i| ThresholdRecord {
            gamma: (i % 101) as f64 / 100.0,
            alpha_star: 0.15 + (i as f64).sqrt() / 200.0,
            tol: 1e-6,
        })
        .collect();
    let back: Vec<ThresholdRecord> = from_csv(&to_csv(&records).unwrap()).unwrap();
    for (x, y) in records.iter().zip(&back) {
        assert!(close(x.gamma, y.gamma) && close(x.alpha_star, y.alpha_star) && close(x.tol, y.tol));
    }
}
