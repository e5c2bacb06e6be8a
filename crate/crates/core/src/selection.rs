//! Stage II: PEV station selection under fixed prices.
//!
//! The PEV population splits the line into the set served by station 1 and
//! the set served by station 2. Travel cost differences are constant left of
//! `x₁` and right of `x₂`, so every equilibrium is described by the single
//! share `|A₁|`: below `L + x₁` the PEVs left of station 1 mix, between
//! `L + x₁` and `L + x₂` there is an indifference point, and above `L + x₂`
//! the PEVs right of station 2 mix. The marginal cost gap
//!
//! ```text
//! h(|A₁|) = k_p d Δp + k_l (2x − x₁ − x₂) + k_q (q₁(|A₁|) − q₂(2L − |A₁|)),
//! x = clamp(|A₁| − L, x₁, x₂)
//! ```
//!
//! is strictly increasing in `|A₁|`, which makes each equilibrium unique and
//! every regime solvable by bisection.

use crate::exec::Exec;
use crate::model::{Market, Station};
use crate::queueing::{mean_wait, QueueError};
use crate::roots::{bisect_increasing, Bracket};
use thiserror::Error;

/// Absolute tolerance of every bracketing solve in this module. Zero means
/// bisecting down to adjacent floats: next to a capacity limit the wait is
/// steep enough that a coarser share leaves a visible cost gap.
pub const ROOT_TOLERANCE: f64 = 0.0;

/// Relative inward shift of a bracket end that sits on a capacity limit.
pub const CAPACITY_GUARD: f64 = 1e-9;

/// Slack allowed when a caller-supplied price difference is compared
/// against a threshold.
const THRESHOLD_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SelectionError {
    #[error("price {price} outside [{p_min}, {p_max}]")]
    PriceOutOfBounds { price: f64, p_min: f64, p_max: f64 },
    #[error("price difference {delta_p} is outside the {regime} regime")]
    RegimeMismatch { delta_p: f64, regime: &'static str },
    #[error(transparent)]
    Queue(#[from] QueueError),
}

/// Which way a missing indifference point points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Station 1 is costlier even for its own neighbours: the PEVs left of
    /// `x₁` mix or all go to station 2 (`Δp ≥ θ₁ᴿ`).
    Left,
    /// Station 2 is costlier even at `x₂` (`Δp ≤ θ₁ᴸ`).
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EquilibriumKind {
    /// PEVs left of `x_star` use station 1, the rest station 2.
    PureSplit {
        x_star: f64,
    },
    /// PEVs in `[-L, x₁)` pick station 1 with probability `omega1`; the rest use station 2.
    MixedLeft {
        omega1: f64,
    },
    /// PEVs in `(x₂, L]` pick station 1 with probability `omega1`; the rest use station 1.
    MixedRight {
        omega1: f64,
    },
    AllStation1,
    AllStation2,
}

impl EquilibriumKind {
    pub fn name(&self) -> &'static str {
        match self {
            EquilibriumKind::PureSplit { .. } => "PURE_SPLIT",
            EquilibriumKind::MixedLeft { .. } => "MIXED_LEFT",
            EquilibriumKind::MixedRight { .. } => "MIXED_RIGHT",
            EquilibriumKind::AllStation1 => "ALL_STATION_1",
            EquilibriumKind::AllStation2 => "ALL_STATION_2",
        }
    }

    pub fn x_star(&self) -> Option<f64> {
        match *self {
            EquilibriumKind::PureSplit { x_star } => Some(x_star),
            _ => None,
        }
    }

    pub fn omega1(&self) -> Option<f64> {
        match *self {
            EquilibriumKind::MixedLeft { omega1 } | EquilibriumKind::MixedRight { omega1 } => Some(omega1),
            _ => None,
        }
    }
}

/// A station choice: pure, or mixed with probability `omega1` of station 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Choice {
    Pure(Station),
    Mixed { omega1: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PevStrategy {
    pub location: f64,
    pub choice: Choice,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionEquilibrium {
    pub kind: EquilibriumKind,
    pub a1_len: f64,
    pub a2_len: f64,
    pub wait1: f64,
    pub wait2: f64,
    /// Energy sold by station 1 per unit time.
    pub demand1: f64,
    pub demand2: f64,
}

impl SelectionEquilibrium {
    /// Equilibrium record for a given kind; loads, waits and demands derived from it.
    pub fn from_kind(kind: EquilibriumKind, market: &Market) -> Result<Self, QueueError> {
        let l = market.half_length;
        let a1_len = match kind {
            EquilibriumKind::PureSplit { x_star } => l + x_star,
            EquilibriumKind::MixedLeft { omega1 } => (market.x1 + l) * omega1,
            EquilibriumKind::MixedRight { omega1 } => (market.x2 + l) + (l - market.x2) * omega1,
            EquilibriumKind::AllStation1 => 2.0 * l,
            EquilibriumKind::AllStation2 => 0.0,
        };
        let a2_len = 2.0 * l - a1_len;
        let a1_len = a1_len.clamp(0.0, 2.0 * l);
        let a2_len = a2_len.clamp(0.0, 2.0 * l);
        let wait1 = mean_wait(a1_len, market.lambda, market.station(Station::One))?;
        let wait2 = mean_wait(a2_len, market.lambda, market.station(Station::Two))?;
        let energy = market.lambda * market.demand_per_pev;
        Ok(Self {
            kind,
            a1_len,
            a2_len,
            wait1,
            wait2,
            demand1: a1_len * energy,
            demand2: a2_len * energy,
        })
    }

    pub fn demand(&self, s: Station) -> f64 {
        match s {
            Station::One => self.demand1,
            Station::Two => self.demand2,
        }
    }

    pub fn share(&self, s: Station) -> f64 {
        match s {
            Station::One => self.a1_len,
            Station::Two => self.a2_len,
        }
    }

    pub fn wait(&self, s: Station) -> f64 {
        match s {
            Station::One => self.wait1,
            Station::Two => self.wait2,
        }
    }

    /// The equilibrium strategy of the PEV at `location`.
    pub fn strategy_at(&self, location: f64, market: &Market) -> PevStrategy {
        let choice = match self.kind {
            EquilibriumKind::PureSplit { x_star } => {
                if location < x_star {
                    Choice::Pure(Station::One)
                } else {
                    Choice::Pure(Station::Two)
                }
            }
            EquilibriumKind::MixedLeft { omega1 } => {
                if location < market.x1 {
                    Choice::Mixed { omega1 }
                } else {
                    Choice::Pure(Station::Two)
                }
            }
            EquilibriumKind::MixedRight { omega1 } => {
                if location > market.x2 {
                    Choice::Mixed { omega1 }
                } else {
                    Choice::Pure(Station::One)
                }
            }
            EquilibriumKind::AllStation1 => Choice::Pure(Station::One),
            EquilibriumKind::AllStation2 => Choice::Pure(Station::Two),
        };
        PevStrategy { location, choice }
    }
}

/// Payoff of a PEV at `location` choosing `choice` when the stations serve
/// sets of lengths `a1_len` and `a2_len`: minus travel, waiting and charging cost.
pub fn pev_payoff(
    location: f64,
    choice: Station,
    a1_len: f64,
    a2_len: f64,
    p1: f64,
    p2: f64,
    market: &Market,
) -> Result<f64, QueueError> {
    let (load, price) = match choice {
        Station::One => (a1_len, p1),
        Station::Two => (a2_len, p2),
    };
    let wait = mean_wait(load, market.lambda, market.station(choice))?;
    let travel = (location - market.position(choice)).abs();
    Ok(-market.k_l * travel - market.k_q * wait - market.k_p * market.demand_per_pev * price)
}

/// Cost of station 1 minus cost of station 2 for the marginal PEV when
/// station 1 serves a set of length `a1_len`.
pub(crate) fn marginal_cost_gap(market: &Market, delta_p: f64, a1_len: f64) -> f64 {
    let l = market.half_length;
    let x = (a1_len - l).clamp(market.x1, market.x2);
    market.k_p * market.demand_per_pev * delta_p
        + market.k_l * (2.0 * x - market.x1 - market.x2)
        + market.k_q * (market.wait(Station::One, a1_len) - market.wait(Station::Two, 2.0 * l - a1_len))
}

fn capacity_reach(market: &Market, s: Station) -> f64 {
    market.station(s).capacity() / market.lambda
}

/// Indifference point for `Δp = p₁ − p₂`.
pub fn indifference_point(p1: f64, p2: f64, market: &Market) -> Result<f64, Side> {
    indifference_point_at(p1 - p2, market)
}

/// Root of `k_p d Δp + k_l(2x − x₁ − x₂) + k_q(q₁(x + L) − q₂(L − x))` on
/// the capacity-feasible part of `[x₁, x₂]`, or the side on which the
/// equilibrium lies when there is none.
pub fn indifference_point_at(delta_p: f64, market: &Market) -> Result<f64, Side> {
    let l = market.half_length;
    let reach1 = capacity_reach(market, Station::One);
    let reach2 = capacity_reach(market, Station::Two);
    // Station 2 cannot take all of [x2, L], or station 1 all of [-L, x1].
    if l - reach2 >= market.x2 {
        return Err(Side::Right);
    }
    if reach1 - l <= market.x1 {
        return Err(Side::Left);
    }
    let mut lo = market.x1;
    if l - reach2 > lo {
        lo = l - reach2 + CAPACITY_GUARD * reach2;
    }
    let mut hi = market.x2;
    if reach1 - l < hi {
        hi = reach1 - l - CAPACITY_GUARD * reach1;
    }
    let f = |x: f64| marginal_cost_gap(market, delta_p, x + l);
    match bisect_increasing(f, lo, hi, ROOT_TOLERANCE) {
        Bracket::Root(x) => Ok(x),
        Bracket::AllPositive => Err(Side::Left),
        Bracket::AllNegative => Err(Side::Right),
    }
}

pub fn mixed_fraction_left(p1: f64, p2: f64, market: &Market) -> Result<f64, SelectionError> {
    mixed_fraction_left_at(p1 - p2, market)
}

/// Probability `ω₁` with which the PEVs in `[-L, x₁)` pick station 1 when
/// `Δp ∈ [θ₁ᴿ, θ₂ᴿ]`; everyone else uses station 2.
pub fn mixed_fraction_left_at(delta_p: f64, market: &Market) -> Result<f64, SelectionError> {
    let t = market.thresholds();
    if t.theta1_r == f64::INFINITY || delta_p < t.theta1_r - THRESHOLD_SLACK || delta_p > t.theta2_r + THRESHOLD_SLACK {
        return Err(SelectionError::RegimeMismatch {
            delta_p,
            regime: "left mixed",
        });
    }
    let l = market.half_length;
    let left_len = market.x1 + l;
    let reach2 = capacity_reach(market, Station::Two);
    // Station 2 must leave at least 2L - kμ/λ to station 1.
    let binding = 2.0 * l - reach2;
    let lo = if binding > 0.0 {
        ((binding + CAPACITY_GUARD * reach2) / left_len).min(1.0)
    } else {
        0.0
    };
    let f = |omega: f64| marginal_cost_gap(market, delta_p, left_len * omega);
    Ok(match bisect_increasing(f, lo, 1.0, ROOT_TOLERANCE) {
        Bracket::Root(w) => w,
        Bracket::AllPositive => lo,
        Bracket::AllNegative => 1.0,
    })
}

pub fn mixed_fraction_right(p1: f64, p2: f64, market: &Market) -> Result<f64, SelectionError> {
    mixed_fraction_right_at(p1 - p2, market)
}

/// Probability `ω₁` with which the PEVs in `(x₂, L]` pick station 1 when
/// `Δp ∈ [θ₂ᴸ, θ₁ᴸ]`; everyone else uses station 1.
pub fn mixed_fraction_right_at(delta_p: f64, market: &Market) -> Result<f64, SelectionError> {
    let t = market.thresholds();
    if t.theta1_l == f64::NEG_INFINITY
        || delta_p > t.theta1_l + THRESHOLD_SLACK
        || delta_p < t.theta2_l - THRESHOLD_SLACK
    {
        return Err(SelectionError::RegimeMismatch {
            delta_p,
            regime: "right mixed",
        });
    }
    let l = market.half_length;
    let right_len = l - market.x2;
    let reach1 = capacity_reach(market, Station::One);
    // Station 1 can take at most kμ/λ - (L + x2) of (x2, L].
    let headroom = reach1 - (l + market.x2);
    let hi = if headroom < right_len {
        ((headroom - CAPACITY_GUARD * reach1) / right_len).max(0.0)
    } else {
        1.0
    };
    let f = |omega: f64| marginal_cost_gap(market, delta_p, l + market.x2 + right_len * omega);
    Ok(match bisect_increasing(f, 0.0, hi, ROOT_TOLERANCE) {
        Bracket::Root(w) => w,
        Bracket::AllPositive => 0.0,
        Bracket::AllNegative => hi,
    })
}

/// Unique selection equilibrium for prices `(p1, p2)` inside the price box.
pub fn solve_selection(p1: f64, p2: f64, market: &Market) -> Result<SelectionEquilibrium, SelectionError> {
    for price in [p1, p2] {
        if !(market.p_min..=market.p_max).contains(&price) {
            return Err(SelectionError::PriceOutOfBounds {
                price,
                p_min: market.p_min,
                p_max: market.p_max,
            });
        }
    }
    solve_at_difference(p1 - p2, market)
}

/// Selection equilibrium for an arbitrary price difference.
///
/// The equilibrium depends on the prices only through `Δp`, so sweeps may
/// go beyond the price box.
pub fn solve_at_difference(delta_p: f64, market: &Market) -> Result<SelectionEquilibrium, SelectionError> {
    let t = market.thresholds();
    let kind = if delta_p <= t.theta2_l {
        EquilibriumKind::AllStation1
    } else if delta_p >= t.theta2_r {
        EquilibriumKind::AllStation2
    } else if delta_p <= t.theta1_l {
        EquilibriumKind::MixedRight {
            omega1: mixed_fraction_right_at(delta_p, market)?,
        }
    } else if delta_p >= t.theta1_r {
        EquilibriumKind::MixedLeft {
            omega1: mixed_fraction_left_at(delta_p, market)?,
        }
    } else {
        let x_star = match indifference_point_at(delta_p, market) {
            Ok(x) => x,
            // Only reachable by rounding right next to θ₁ᴿ / θ₁ᴸ.
            Err(Side::Left) => market.x1,
            Err(Side::Right) => market.x2,
        };
        EquilibriumKind::PureSplit { x_star }
    };
    Ok(SelectionEquilibrium::from_kind(kind, market)?)
}

/// `(own price, demand)` of `station` over `n_points` prices spanning the
/// price box, with the rival fixed at `p_other`.
pub fn demand_curve(
    station: Station,
    p_other: f64,
    market: &Market,
    n_points: usize,
) -> Result<Vec<(f64, f64)>, SelectionError> {
    demand_curve_with(station, p_other, market, n_points, Exec::default())
}

pub fn demand_curve_with(
    station: Station,
    p_other: f64,
    market: &Market,
    n_points: usize,
    exec: Exec,
) -> Result<Vec<(f64, f64)>, SelectionError> {
    assert!(n_points >= 2, "a demand curve needs at least two points");
    let step = (market.p_max - market.p_min) / (n_points - 1) as f64;
    exec.map(n_points, |i| {
        let price = if i + 1 == n_points {
            market.p_max
        } else {
            market.p_min + step * i as f64
        };
        let eq = match station {
            Station::One => solve_selection(price, p_other, market)?,
            Station::Two => solve_selection(p_other, price, market)?,
        };
        Ok((price, eq.demand(station)))
    })
    .into_iter()
    .collect()
}
