//! Independent checks: a discrete-event multi-server queue and a
//! best-deviation test for selection equilibria.
//!
//! The simulator draws from `ChaCha8Rng` seeded with `seed_from_u64`, so a
//! report is a pure function of its inputs on every platform.

use crate::exec::Exec;
use crate::model::{Market, Station};
use crate::selection::{pev_payoff, Choice, SelectionEquilibrium};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use thiserror::Error;

pub const RNG_NAME: &str = "ChaCha8Rng/seed_from_u64";
pub const WARM_UP_FRACTION: f64 = 0.1;
pub const MIN_ARRIVALS: usize = 10_000;
const BATCH_LEN: usize = 1000;
const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ServiceDistribution {
    Exponential {
        mu: f64,
    },
    Deterministic {
        mu: f64,
    },
    /// Lognormal with mean `1/mu` and standard deviation `sigma`.
    LogNormal {
        mu: f64,
        sigma: f64,
    },
}

impl ServiceDistribution {
    pub fn mu(&self) -> f64 {
        match *self {
            Self::Exponential { mu } | Self::Deterministic { mu } | Self::LogNormal { mu, .. } => mu,
        }
    }

    pub fn mean(&self) -> f64 {
        1.0 / self.mu()
    }

    pub fn std_dev(&self) -> f64 {
        match *self {
            Self::Exponential { mu } => 1.0 / mu,
            Self::Deterministic { .. } => 0.0,
            Self::LogNormal { sigma, .. } => sigma,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Exponential { .. } => "exponential",
            Self::Deterministic { .. } => "deterministic",
            Self::LogNormal { .. } => "lognormal",
        }
    }

    /// Location and scale of the underlying normal for the lognormal case.
    pub fn lognormal_parameters(mean: f64, std_dev: f64) -> (f64, f64) {
        let s2 = (1.0 + (std_dev / mean).powi(2)).ln();
        (mean.ln() - 0.5 * s2, s2.sqrt())
    }

    fn validate(&self) -> Result<(), SimError> {
        let mu_ok = self.mu().is_finite() && self.mu() > 0.0;
        let sigma_ok = match *self {
            Self::LogNormal { sigma, .. } => sigma.is_finite() && sigma > 0.0,
            _ => true,
        };
        if mu_ok && sigma_ok {
            Ok(())
        } else {
            Err(SimError::InvalidService(*self))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SimError {
    #[error("overloaded queue: arrival rate {arrival_rate} >= capacity {capacity}")]
    Overload { arrival_rate: f64, capacity: f64 },
    #[error("at least {MIN_ARRIVALS} arrivals are required, got {0}")]
    TooFewArrivals(usize),
    #[error("need at least one port")]
    NoPorts,
    #[error("invalid arrival rate {0}")]
    InvalidArrivalRate(f64),
    #[error("invalid service distribution {0:?}")]
    InvalidService(ServiceDistribution),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimReport {
    /// Arrivals kept after warm-up.
    pub arrivals: usize,
    pub mean_wait: f64,
    /// 95% half-width from batch means over batches of 1000 arrivals.
    pub wait_ci_halfwidth: f64,
    /// Busy time over `ports` times the observed span.
    pub utilization: f64,
}

enum Sampler {
    Exponential(Exp<f64>),
    Deterministic(f64),
    LogNormal(LogNormal<f64>),
}

impl Sampler {
    fn new(service: &ServiceDistribution) -> Self {
        match *service {
            ServiceDistribution::Exponential { mu } => Self::Exponential(Exp::new(mu).expect("validated rate")),
            ServiceDistribution::Deterministic { mu } => Self::Deterministic(1.0 / mu),
            ServiceDistribution::LogNormal { mu, sigma } => {
                let (m, s) = ServiceDistribution::lognormal_parameters(1.0 / mu, sigma);
                Self::LogNormal(LogNormal::new(m, s).expect("validated parameters"))
            }
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Self::Exponential(d) => d.sample(rng),
            Self::Deterministic(t) => *t,
            Self::LogNormal(d) => d.sample(rng),
        }
    }
}

/// FCFS queue with `ports` identical servers and Poisson arrivals.
///
/// Each arrival takes the server that frees up first; its wait is the gap
/// between its arrival and that instant.
pub fn simulate_queue(
    arrival_rate: f64,
    ports: u32,
    service: ServiceDistribution,
    n_arrivals: usize,
    seed: u64,
) -> Result<SimReport, SimError> {
    service.validate()?;
    if ports == 0 {
        return Err(SimError::NoPorts);
    }
    if !(arrival_rate.is_finite() && arrival_rate >= 0.0) {
        return Err(SimError::InvalidArrivalRate(arrival_rate));
    }
    let capacity = f64::from(ports) * service.mu();
    if arrival_rate >= capacity {
        return Err(SimError::Overload { arrival_rate, capacity });
    }
    if n_arrivals < MIN_ARRIVALS {
        return Err(SimError::TooFewArrivals(n_arrivals));
    }
    let warm_up = (n_arrivals as f64 * WARM_UP_FRACTION).round() as usize;
    let kept = n_arrivals - warm_up;
    if arrival_rate == 0.0 {
        return Ok(SimReport {
            arrivals: kept,
            mean_wait: 0.0,
            wait_ci_halfwidth: 0.0,
            utilization: 0.0,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gaps = Exp::new(arrival_rate).expect("positive rate");
    let sampler = Sampler::new(&service);
    let mut free_at = vec![0.0_f64; ports as usize];
    let mut clock = 0.0;
    let mut start_clock = 0.0;
    let mut busy = 0.0;
    let mut total = 0.0;
    let mut batch_sum = 0.0;
    let mut batch_means = Vec::with_capacity(kept / BATCH_LEN + 1);

    for n in 0..n_arrivals {
        clock += gaps.sample(&mut rng);
        let (server, &free) = free_at
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("at least one port");
        let start = free.max(clock);
        let service_time = sampler.sample(&mut rng);
        free_at[server] = start + service_time;
        if n < warm_up {
            continue;
        }
        if n == warm_up {
            start_clock = clock;
        }
        let wait = start - clock;
        total += wait;
        busy += service_time;
        batch_sum += wait;
        if (n - warm_up + 1).is_multiple_of(BATCH_LEN) {
            batch_means.push(batch_sum / BATCH_LEN as f64);
            batch_sum = 0.0;
        }
    }

    let mean_wait = total / kept as f64;
    let b = batch_means.len();
    let wait_ci_halfwidth = if b >= 2 {
        let grand = batch_means.iter().sum::<f64>() / b as f64;
        let var = batch_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (b - 1) as f64;
        Z_95 * (var / b as f64).sqrt()
    } else {
        f64::NAN
    };
    let span = clock - start_clock;
    Ok(SimReport {
        arrivals: kept,
        mean_wait,
        wait_ci_halfwidth,
        utilization: busy / (f64::from(ports) * span),
    })
}

/// Independent replications, one per seed, reported in seed order.
pub fn simulate_replications(
    arrival_rate: f64,
    ports: u32,
    service: ServiceDistribution,
    n_arrivals: usize,
    seeds: &[u64],
    exec: Exec,
) -> Vec<Result<SimReport, SimError>> {
    exec.map_slice(seeds, |&seed| {
        simulate_queue(arrival_rate, ports, service, n_arrivals, seed)
    })
}

/// Outcome of [`verify_selection_equilibrium`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationReport {
    /// Largest payoff gain from a unilateral switch, or the payoff gap
    /// `|u₁ − u₂|` where the equilibrium prescribes mixing.
    pub max_gain: f64,
    /// Location where `max_gain` is attained.
    pub worst_location: f64,
    /// Largest payoff magnitude seen, for relative tolerances.
    pub payoff_scale: f64,
}

impl DeviationReport {
    pub fn relative_gain(&self) -> f64 {
        if self.payoff_scale > 0.0 {
            self.max_gain / self.payoff_scale
        } else {
            self.max_gain
        }
    }
}

/// Samples `n_locations` evenly spaced PEVs over the market and measures
/// how much any of them could gain by switching station, with the station
/// loads held at their equilibrium values.
pub fn verify_selection_equilibrium(
    equilibrium: &SelectionEquilibrium,
    p1: f64,
    p2: f64,
    market: &Market,
    n_locations: usize,
) -> DeviationReport {
    let l = market.half_length;
    let n = n_locations.max(2);
    let payoff = |x: f64, s: Station| {
        pev_payoff(x, s, equilibrium.a1_len, equilibrium.a2_len, p1, p2, market).unwrap_or(f64::NEG_INFINITY)
    };
    let mut report = DeviationReport {
        max_gain: f64::NEG_INFINITY,
        worst_location: -l,
        payoff_scale: 0.0,
    };
    for k in 0..n {
        let x = -l + 2.0 * l * k as f64 / (n - 1) as f64;
        let u1 = payoff(x, Station::One);
        let u2 = payoff(x, Station::Two);
        let gain = match equilibrium.strategy_at(x, market).choice {
            Choice::Pure(Station::One) => u2 - u1,
            Choice::Pure(Station::Two) => u1 - u2,
            Choice::Mixed { .. } => (u1 - u2).abs(),
        };
        let gain = if gain.is_nan() { f64::INFINITY } else { gain };
        if gain > report.max_gain {
            report.max_gain = gain;
            report.worst_location = x;
        }
        for u in [u1, u2] {
            if u.is_finite() {
                report.payoff_scale = report.payoff_scale.max(u.abs());
            }
        }
    }
    report
}
