use pevmarket::model::random::{random_config, random_symmetric_config};
use pevmarket::model::{
    classify_capacity, classify_scenario, format_config, parse_config, thresholds, validate, CapacityLevel,
    CapacityScenario, ScenarioError,
};
use pevmarket::{MarketConfig, Station};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

fn config(seed: u64) -> MarketConfig {
    random_config(&mut ChaCha8Rng::seed_from_u64(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn thresholds_are_ordered(seed in any::<u64>()) {
        let c = config(seed);
        let t = thresholds(&c);
        prop_assert!(t.is_ordered(), "{:?} for {:?}", t, c);
        prop_assert!(t.theta2_l <= t.theta1_l);
        prop_assert!(t.theta1_r <= t.theta2_r);
        prop_assert!(t.theta1_l <= t.theta1_r);
    }

    #[test]
    fn symmetric_markets_have_mirrored_thresholds(seed in any::<u64>()) {
        let c = random_symmetric_config(&mut ChaCha8Rng::seed_from_u64(seed));
        let t = thresholds(&c);
        prop_assert!((t.theta1_l + t.theta1_r).abs() <= 1e-12 || t.theta1_l == -t.theta1_r);
        prop_assert!((t.theta2_l + t.theta2_r).abs() <= 1e-12 || t.theta2_l == -t.theta2_r);
    }

    #[test]
    fn every_valid_market_is_classified(seed in any::<u64>()) {
        let c = config(seed);
        let l1 = classify_capacity(Station::One, &c);
        let l2 = classify_capacity(Station::Two, &c);
        match classify_scenario(&c) {
            Ok(s) => {
                prop_assert_eq!((s.level1(), s.level2()), (l1, l2));
                prop_assert!(CapacityScenario::ALL.contains(&s));
            }
            // A stable market always covers the line, so only a distant
            // weak station 1 can fall outside the nine scenarios.
            Err(ScenarioError::OutsideTaxonomy(a, b)) => {
                prop_assert_eq!((a, b), (CapacityLevel::Low, CapacityLevel::High));
                prop_assert!(c.x1 > 0.0);
            }
            Err(e) => prop_assert!(false, "{}", e),
        }
    }

    #[test]
    fn config_files_round_trip(seed in any::<u64>()) {
        let c = config(seed);
        prop_assert_eq!(parse_config(&format_config(&c)).unwrap(), c);
    }
}

#[test]
fn all_nine_scenarios_occur_in_valid_markets() {
    let mut seen = HashSet::new();
    // MIDDLE-HIGH needs x1 + x2 > 0 once station 1 is the larger one.
    for (x1, x2) in [(-8.0, 5.0), (2.0, 8.0)] {
        for i in 1..=40 {
            for j in 1..=40 {
                let mut c = MarketConfig::baseline_with_rates(0.5 * f64::from(i), 0.5 * f64::from(j));
                c.x1 = x1;
                c.x2 = x2;
                if !validate(&c).is_empty() {
                    continue;
                }
                if let Ok(s) = classify_scenario(&c) {
                    seen.insert(s);
                }
            }
        }
    }
    assert_eq!(seen.len(), 9, "{seen:?}");
}

#[test]
fn unservable_pairs_are_rejected() {
    let c = MarketConfig::baseline_with_rates(0.9, 0.9);
    assert!(matches!(
        classify_scenario(&c),
        Err(ScenarioError::Unservable(CapacityLevel::Low, CapacityLevel::Low))
    ));
}
