//! Random valid markets for property tests, acceptance runs and benchmarks.

use super::{validate, MarketConfig, StationParams};
use rand::Rng;

/// A random market that passes [`validate`].
///
/// Station capacities are drawn as shares of a total between 1.1 and 3
/// times the arrival mass `2Lλ`, with station 1 taking at least half.
pub fn random_config<R: Rng + ?Sized>(rng: &mut R) -> MarketConfig {
    loop {
        let c = draw(rng, false);
        if validate(&c).is_empty() {
            return c;
        }
    }
}

/// A random market that is its own mirror image: `x₂ = −x₁` and identical stations.
pub fn random_symmetric_config<R: Rng + ?Sized>(rng: &mut R) -> MarketConfig {
    loop {
        let c = draw(rng, true);
        if validate(&c).is_empty() {
            return c;
        }
    }
}

/// A random perturbation of [`MarketConfig::baseline`]: rates, positions,
/// cost weights and service variability are redrawn around the reference
/// values and the price box is a random window inside `[0.18, 0.34]`.
pub fn random_reference_like<R: Rng + ?Sized>(rng: &mut R) -> MarketConfig {
    loop {
        let mut c = MarketConfig::baseline();
        c.x1 = rng.random_range(-9.0..-5.0);
        c.x2 = rng.random_range(2.0..8.0);
        c.k_l = rng.random_range(1.0..2.0);
        c.k_q = rng.random_range(3.0..7.0);
        c.k_p = rng.random_range(3.0..5.0);
        let mu1 = rng.random_range(11.0..20.0);
        let mu2 = rng.random_range(10.0..mu1);
        for (s, mu) in c.stations.iter_mut().zip([mu1, mu2]) {
            s.mu = mu;
            s.sigma = rng.random_range(0.5..1.5) / mu;
        }
        let p_min = rng.random_range(0.18..0.26);
        c.p_min = p_min;
        c.p_max = p_min + rng.random_range(0.04..0.08);
        if validate(&c).is_empty() {
            return c;
        }
    }
}

fn draw<R: Rng + ?Sized>(rng: &mut R, symmetric: bool) -> MarketConfig {
    let l = rng.random_range(5.0..20.0);
    let (x1, x2) = if symmetric {
        let x = rng.random_range(0.05..0.95) * l;
        (-x, x)
    } else {
        let a = rng.random_range(-0.95..0.9) * l;
        let b = rng.random_range(a / l + 0.05..0.95) * l;
        (a, b)
    };
    let lambda = rng.random_range(0.5..2.0);
    let total = 2.0 * l * lambda * rng.random_range(1.1..3.0);
    let share = if symmetric { 0.5 } else { rng.random_range(0.5..0.9) };
    let energy_cost = rng.random_range(0.05..0.2);
    let fixed_cost = rng.random_range(0.0..2.0);
    let mut station = |capacity: f64| {
        let ports = rng.random_range(1..=6u32);
        let mu = capacity / f64::from(ports);
        StationParams {
            ports,
            mu,
            sigma: rng.random_range(0.0..2.0) / mu,
            energy_cost,
            fixed_cost,
        }
    };
    let s1 = station(total * share);
    let s2 = if symmetric { s1 } else { station(total * (1.0 - share)) };
    let p_min = energy_cost + rng.random_range(0.0..0.05);
    MarketConfig {
        half_length: l,
        x1,
        x2,
        lambda,
        stations: [s1, s2],
        k_l: rng.random_range(0.5..3.0),
        k_q: rng.random_range(1.0..10.0),
        k_p: rng.random_range(1.0..8.0),
        demand_per_pev: rng.random_range(20.0..100.0),
        p_min,
        p_max: p_min + rng.random_range(0.05..0.2),
    }
}
