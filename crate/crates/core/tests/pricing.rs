use pevmarket::model::random::random_reference_like;
use pevmarket::pricing::{
    best_response, best_response_with, brute_force_equilibrium, check_conditions, dssa, station_profit, theta,
    DssaOptions, PricingOutcome, Termination,
};
use pevmarket::selection::solve_selection;
use pevmarket::{Exec, Market, MarketConfig, Station};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GRID: usize = 200;

fn reference(p_min: f64, p_max: f64) -> Market {
    Market::new(MarketConfig::baseline().with_price_box(p_min, p_max)).unwrap()
}

fn options(m: &Market) -> DssaOptions {
    DssaOptions {
        grid_resolution: GRID,
        ..DssaOptions::for_market(m)
    }
}

/// Root of `Θ₁` by bisection on its sign.
fn theta_root(m: &Market) -> f64 {
    let (mut lo, mut hi) = (m.p_min, m.p_max);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if theta(Station::One, mid, m, GRID).unwrap().value > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn assert_fixed_point(m: &Market, o: &PricingOutcome, eps: f64) {
    let rival = best_response(Station::Two, o.p1_star, m, GRID).unwrap().price;
    assert_eq!(rival, o.p2_star);
    let own = best_response(Station::One, rival, m, GRID).unwrap().price;
    assert!((own - o.p1_star).abs() <= eps * o.p1_star, "{own} vs {}", o.p1_star);
}

#[test]
fn profit_composes_price_margin_and_demand() {
    let m = reference(0.15, 0.3);
    let eq = solve_selection(0.25, 0.25, &m).unwrap();
    let x = eq.kind.x_star().unwrap();
    assert!(x > m.x1 && x < m.x2);
    let d1 = (m.half_length + x) * m.lambda * m.demand_per_pev;
    let d2 = (m.half_length - x) * m.lambda * m.demand_per_pev;
    let p1 = station_profit(Station::One, 0.25, 0.25, &m).unwrap();
    let p2 = station_profit(Station::Two, 0.25, 0.25, &m).unwrap();
    assert!((p1 - (0.1 * d1 - 1.0)).abs() < 1e-9);
    assert!((p2 - (0.1 * d2 - 1.0)).abs() < 1e-9);
}

#[test]
fn demand_falls_with_own_price() {
    let m = reference(0.15, 0.3);
    for s in Station::BOTH {
        let curve = pevmarket::selection::demand_curve(s, 0.22, &m, 151).unwrap();
        for w in curve.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-9);
        }
    }
}

#[test]
fn best_response_is_optimal_on_a_finer_grid() {
    let m = reference(0.25, 0.3);
    for s in Station::BOTH {
        for rival in [0.25, 0.27, 0.3] {
            let br = best_response(s, rival, &m, GRID).unwrap();
            for k in 0..=5000 {
                let p = 0.25 + 0.05 * f64::from(k) / 5000.0;
                let v = station_profit(s, p, rival, &m).unwrap();
                assert!(
                    v <= br.profit + 1e-6 * br.profit.abs().max(1.0),
                    "{s} {rival}: {p} beats {}",
                    br.price
                );
            }
        }
    }
}

#[test]
fn sequential_and_parallel_best_responses_agree() {
    let m = reference(0.25, 0.3);
    let a = best_response_with(Station::One, 0.28, &m, GRID, true, Exec::Sequential).unwrap();
    let b = best_response_with(Station::One, 0.28, &m, GRID, true, Exec::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn reference_market_meets_the_uniqueness_conditions() {
    let m = reference(0.25, 0.3);
    let r = check_conditions(&m, 0.25, 0.3, 50, GRID).unwrap();
    assert!(
        r.monotone.passed && r.bracket.passed && r.offset_decreasing.passed,
        "{r:?}"
    );
}

#[test]
fn theta_changes_sign_once_at_the_equilibrium() {
    let m = reference(0.25, 0.3);
    let o = dssa(&m, &options(&m)).unwrap();
    for k in 0..=40 {
        let p = 0.25 + 0.05 * f64::from(k) / 40.0;
        let v = theta(Station::One, p, &m, GRID).unwrap().value;
        if p < o.p1_star - 0.002 {
            assert!(v > 0.0, "{p}: {v}");
        } else if p > o.p1_star + 0.002 {
            assert!(v < 0.0, "{p}: {v}");
        }
    }
}

#[test]
fn dssa_meets_its_stopping_rule_and_the_grid_oracle() {
    let m = reference(0.25, 0.3);
    let o = dssa(&m, &options(&m)).unwrap();
    assert!(o.converged && o.termination == Termination::Converged);
    assert!(o.iterations <= 25);
    assert_fixed_point(&m, &o, 1e-3);
    let last = o.trace.last().unwrap();
    assert!(last.theta.abs() / last.price <= 1e-3);
    let cell = 0.05 / GRID as f64;
    let b = brute_force_equilibrium(&m, GRID).unwrap().unwrap();
    assert!((b.p1_star - o.p1_star).abs() <= 2.0 * cell);
    assert!((b.p2_star - o.p2_star).abs() <= 2.0 * cell);
}

#[test]
fn dssa_error_stays_inside_the_step_envelope() {
    let m = reference(0.25, 0.3);
    let opts = options(&m);
    let o = dssa(&m, &opts).unwrap();
    let p_star = theta_root(&m);
    let resolution = 2.0 * 0.05 / GRID as f64 / 1000.0;
    let first_flip = o.trace.windows(2).position(|w| w[0].theta * w[1].theta < 0.0).unwrap() + 1;
    for step in &o.trace[first_flip..] {
        assert!(
            (step.price - p_star).abs() <= step.delta / opts.alpha + resolution,
            "{step:?} vs {p_star}"
        );
    }
    let last = o.trace.last().unwrap();
    assert!((last.price - p_star).abs() < last.delta / (1.0 - opts.alpha));
}

#[test]
fn starting_at_the_equilibrium_stops_immediately() {
    let m = reference(0.25, 0.3);
    let first = dssa(&m, &options(&m)).unwrap();
    let again = dssa(
        &m,
        &DssaOptions {
            p_init: Some(first.p1_star),
            ..options(&m)
        },
    )
    .unwrap();
    assert_eq!(again.iterations, 1);
    assert_eq!((again.p1_star, again.p2_star), (first.p1_star, first.p2_star));
}

#[test]
fn tight_box_pins_station_two_at_the_cap() {
    let m = reference(0.2, 0.27);
    let o = dssa(&m, &options(&m)).unwrap();
    assert!(o.converged);
    assert_eq!(o.p2_star, 0.27);
    assert!(o.p1_star < 0.27);
}

#[test]
fn searching_on_station_two_finds_the_same_pair() {
    let m = reference(0.25, 0.3);
    let a = dssa(&m, &options(&m)).unwrap();
    let b = dssa(
        &m,
        &DssaOptions {
            station: Station::Two,
            ..options(&m)
        },
    )
    .unwrap();
    let cell = 0.05 / GRID as f64;
    assert!((a.p1_star - b.p1_star).abs() <= 2.0 * cell);
    assert!((a.p2_star - b.p2_star).abs() <= 2.0 * cell);
}

#[test]
fn a_single_iteration_budget_reports_non_convergence() {
    let m = reference(0.25, 0.3);
    let o = dssa(
        &m,
        &DssaOptions {
            max_iterations: 1,
            ..options(&m)
        },
    )
    .unwrap();
    assert!(!o.converged);
    assert_eq!(o.termination, Termination::MaxIterations);
    assert_eq!(o.trace.len(), 1);
}

#[test]
fn random_passing_markets_agree_with_the_grid_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut tried = 0;
    let mut agreed = 0;
    while agreed < 5 {
        tried += 1;
        assert!(tried < 50, "too few passing markets");
        let m = Market::new(random_reference_like(&mut rng)).unwrap();
        let report = check_conditions(&m, m.p_min, m.p_max, 20, GRID).unwrap();
        if !report.all_passed() {
            continue;
        }
        let o = dssa(&m, &options(&m)).unwrap();
        assert!(o.converged, "{o:?}");
        let Some(b) = brute_force_equilibrium(&m, GRID).unwrap() else {
            continue;
        };
        let cell = (m.p_max - m.p_min) / GRID as f64;
        assert!((b.p1_star - o.p1_star).abs() <= 2.0 * cell, "{b:?} {o:?}");
        assert!((b.p2_star - o.p2_star).abs() <= 2.0 * cell, "{b:?} {o:?}");
        agreed += 1;
    }
}
