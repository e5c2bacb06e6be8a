//! Stage I: price competition between the two stations.
//!
//! Each station's profit is `(p − c)·D − č` with the demand `D` taken from
//! the stage-II equilibrium at the price pair. Best responses are found by
//! grid search with local refinement, which does not care about the kinks
//! the regime thresholds put into the profit curve. The pricing equilibrium
//! is located by [`dssa`], a directional search on
//! `Θᵢ(p) = Bᵢ(Bⱼ(p)) − p`, and cross-checked by [`brute_force_equilibrium`].

use crate::exec::Exec;
use crate::model::{Market, Station};
use crate::selection::{solve_selection, SelectionError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use thiserror::Error;

pub const DEFAULT_GRID: usize = 2000;
pub const MIN_GRID: usize = 100;
const REFINE_ROUNDS: usize = 3;
const REFINE_FACTOR: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PricingError {
    #[error("{0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Selection(#[from] SelectionError),
}

fn invalid(msg: impl Into<String>) -> PricingError {
    PricingError::InvalidArgument(msg.into())
}

/// Profit of `station` charging `p_own` while its rival charges `p_rival`.
pub fn station_profit(station: Station, p_own: f64, p_rival: f64, market: &Market) -> Result<f64, SelectionError> {
    let eq = match station {
        Station::One => solve_selection(p_own, p_rival, market)?,
        Station::Two => solve_selection(p_rival, p_own, market)?,
    };
    let params = market.station(station);
    Ok((p_own - params.energy_cost) * eq.demand(station) - params.fixed_cost)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestResponseResult {
    pub price: f64,
    pub profit: f64,
    /// Coarse-grid `(own price, profit)` samples, when requested.
    pub curve: Option<Vec<(f64, f64)>>,
}

/// Smallest price step a best response of this resolution distinguishes.
pub fn response_resolution(market: &Market, grid_resolution: usize) -> f64 {
    (market.p_max - market.p_min) / grid_resolution as f64 / (REFINE_FACTOR.pow(REFINE_ROUNDS as u32)) as f64
}

fn check_price(market: &Market, price: f64) -> Result<(), PricingError> {
    if (market.p_min..=market.p_max).contains(&price) {
        Ok(())
    } else {
        Err(invalid(format!(
            "price {price} outside [{}, {}]",
            market.p_min, market.p_max
        )))
    }
}

fn check_grid(grid_resolution: usize) -> Result<(), PricingError> {
    if grid_resolution < MIN_GRID {
        return Err(invalid(format!("grid resolution must be at least {MIN_GRID}")));
    }
    Ok(())
}

/// Best response `Bᵢ(p_rival)` over the whole price box.
pub fn best_response(
    station: Station,
    p_rival: f64,
    market: &Market,
    grid_resolution: usize,
) -> Result<BestResponseResult, PricingError> {
    best_response_with(station, p_rival, market, grid_resolution, false, Exec::default())
}

/// [`best_response`] with an explicit execution mode, optionally keeping the
/// coarse profit curve.
pub fn best_response_with(
    station: Station,
    p_rival: f64,
    market: &Market,
    grid_resolution: usize,
    keep_curve: bool,
    exec: Exec,
) -> Result<BestResponseResult, PricingError> {
    check_grid(grid_resolution)?;
    check_price(market, p_rival)?;
    let (lo, hi) = (market.p_min, market.p_max);
    let mut step = (hi - lo) / grid_resolution as f64;

    let coarse: Vec<(f64, f64)> = exec
        .map(grid_resolution + 1, |k| {
            let p = if k == grid_resolution { hi } else { lo + step * k as f64 };
            station_profit(station, p, p_rival, market).map(|v| (p, v))
        })
        .into_iter()
        .collect::<Result<_, _>>()?;
    let (mut best_p, mut best_v) = pick_best(coarse.iter().copied(), (f64::NAN, f64::NEG_INFINITY));

    let half = REFINE_FACTOR as i64;
    for _ in 0..REFINE_ROUNDS {
        let fine = step / REFINE_FACTOR as f64;
        let center = best_p;
        let local: Vec<(f64, f64)> = exec
            .map(2 * REFINE_FACTOR + 1, |k| {
                let p = center + fine * (k as i64 - half) as f64;
                if p < lo || p > hi {
                    return Ok(None);
                }
                station_profit(station, p, p_rival, market).map(|v| Some((p, v)))
            })
            .into_iter()
            .collect::<Result<Vec<_>, SelectionError>>()?
            .into_iter()
            .flatten()
            .collect();
        (best_p, best_v) = pick_best(local.into_iter(), (best_p, best_v));
        step = fine;
    }

    Ok(BestResponseResult {
        price: best_p,
        profit: best_v,
        curve: keep_curve.then_some(coarse),
    })
}

/// Highest profit, ties resolved toward the lower price. `samples` must be
/// in ascending price order.
fn pick_best(samples: impl Iterator<Item = (f64, f64)>, incumbent: (f64, f64)) -> (f64, f64) {
    let mut best = incumbent;
    for (p, v) in samples {
        if v > best.1 || (v == best.1 && p < best.0) {
            best = (p, v);
        }
    }
    best
}

/// A `Θ` evaluation with its intermediate best response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaEval {
    pub price: f64,
    /// `Bⱼ(p)`
    pub rival_response: f64,
    /// `Bᵢ(Bⱼ(p))`
    pub own_response: f64,
    pub value: f64,
}

/// `Θᵢ(p) = Bᵢ(Bⱼ(p)) − p`.
pub fn theta(station: Station, price: f64, market: &Market, grid_resolution: usize) -> Result<ThetaEval, PricingError> {
    theta_with(station, price, market, grid_resolution, Exec::default())
}

pub fn theta_with(
    station: Station,
    price: f64,
    market: &Market,
    grid_resolution: usize,
    exec: Exec,
) -> Result<ThetaEval, PricingError> {
    let rival = best_response_with(station.other(), price, market, grid_resolution, false, exec)?.price;
    let own = best_response_with(station, rival, market, grid_resolution, false, exec)?.price;
    Ok(ThetaEval {
        price,
        rival_response: rival,
        own_response: own,
        value: own - price,
    })
}

/// A violating pair of sample prices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness {
    pub station: Station,
    pub p_lo: f64,
    pub p_hi: f64,
    pub value_lo: f64,
    pub value_hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionResult {
    pub passed: bool,
    pub witnesses: Vec<Witness>,
}

impl ConditionResult {
    fn from_witnesses(witnesses: Vec<Witness>) -> Self {
        Self {
            passed: witnesses.is_empty(),
            witnesses,
        }
    }
}

/// Numerical check of the sufficient conditions for a unique pricing
/// equilibrium in `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub a: f64,
    pub b: f64,
    pub samples: Vec<f64>,
    /// `B₁(p)` and `B₂(p)` at each sample.
    pub responses: [Vec<f64>; 2],
    /// Each `Bᵢ` non-decreasing on `[a, b]`.
    pub monotone: ConditionResult,
    /// `Bᵢ(Bⱼ(a)) ≥ a` and `Bᵢ(Bⱼ(b)) ≤ b` for some `i`.
    pub bracket: ConditionResult,
    /// `Bᵢ(p) − p` strictly decreasing on `[a, b]`.
    pub offset_decreasing: ConditionResult,
    /// `[a, b]` is narrower than the best-response resolution.
    pub vacuous: bool,
}

impl ConditionReport {
    pub fn all_passed(&self) -> bool {
        self.monotone.passed && self.bracket.passed && self.offset_decreasing.passed
    }
}

pub fn check_conditions(
    market: &Market,
    a: f64,
    b: f64,
    n_samples: usize,
    grid_resolution: usize,
) -> Result<ConditionReport, PricingError> {
    check_conditions_with(market, a, b, n_samples, grid_resolution, Exec::default())
}

pub fn check_conditions_with(
    market: &Market,
    a: f64,
    b: f64,
    n_samples: usize,
    grid_resolution: usize,
    exec: Exec,
) -> Result<ConditionReport, PricingError> {
    check_grid(grid_resolution)?;
    if !(market.p_min <= a && a < b && b <= market.p_max) {
        return Err(invalid(format!("need p_min <= a < b <= p_max, got a = {a}, b = {b}")));
    }
    if n_samples < 10 {
        return Err(invalid("at least 10 samples are required"));
    }
    let tol = 2.0 * response_resolution(market, grid_resolution);
    let cell = (market.p_max - market.p_min) / grid_resolution as f64;
    let vacuous = b - a < cell;
    if vacuous {
        return Ok(ConditionReport {
            a,
            b,
            samples: vec![a],
            responses: [Vec::new(), Vec::new()],
            monotone: ConditionResult::from_witnesses(Vec::new()),
            bracket: ConditionResult::from_witnesses(Vec::new()),
            offset_decreasing: ConditionResult::from_witnesses(Vec::new()),
            vacuous,
        });
    }

    let samples: Vec<f64> = (0..n_samples)
        .map(|k| {
            if k + 1 == n_samples {
                b
            } else {
                a + (b - a) * k as f64 / (n_samples - 1) as f64
            }
        })
        .collect();
    // responses of both stations to every sample price
    let jobs: Vec<(Station, f64)> = Station::BOTH
        .iter()
        .flat_map(|&s| samples.iter().map(move |&p| (s, p)))
        .collect();
    let flat = exec
        .map_slice(&jobs, |&(s, p)| {
            best_response_with(s, p, market, grid_resolution, false, exec).map(|r| r.price)
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let (r1, r2) = flat.split_at(n_samples);
    let responses = [r1.to_vec(), r2.to_vec()];

    let mut monotone = Vec::new();
    let mut offset = Vec::new();
    for s in Station::BOTH {
        let r = &responses[s.index()];
        for k in 1..n_samples {
            let (p_lo, p_hi) = (samples[k - 1], samples[k]);
            if r[k] < r[k - 1] - tol {
                monotone.push(Witness {
                    station: s,
                    p_lo,
                    p_hi,
                    value_lo: r[k - 1],
                    value_hi: r[k],
                });
            }
            let (o_lo, o_hi) = (r[k - 1] - p_lo, r[k] - p_hi);
            if o_hi >= o_lo {
                offset.push(Witness {
                    station: s,
                    p_lo,
                    p_hi,
                    value_lo: o_lo,
                    value_hi: o_hi,
                });
            }
        }
    }

    // Bᵢ(Bⱼ(a)) and Bᵢ(Bⱼ(b)) for both i
    let mut bracket_failures = Vec::new();
    let mut any_ok = false;
    for s in Station::BOTH {
        let rival = &responses[s.other().index()];
        let at_a = best_response_with(s, rival[0], market, grid_resolution, false, exec)?.price;
        let at_b = best_response_with(s, rival[n_samples - 1], market, grid_resolution, false, exec)?.price;
        if at_a >= a - tol && at_b <= b + tol {
            any_ok = true;
        } else {
            bracket_failures.push(Witness {
                station: s,
                p_lo: a,
                p_hi: b,
                value_lo: at_a,
                value_hi: at_b,
            });
        }
    }
    let bracket = ConditionResult {
        passed: any_ok,
        witnesses: if any_ok { Vec::new() } else { bracket_failures },
    };

    Ok(ConditionReport {
        a,
        b,
        samples,
        responses,
        monotone: ConditionResult::from_witnesses(monotone),
        bracket,
        offset_decreasing: ConditionResult::from_witnesses(offset),
        vacuous,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DssaOptions {
    /// Step shrink factor on a sign flip, in `(0, 1)`.
    pub alpha: f64,
    /// Initial step.
    pub delta0: f64,
    /// Relative stopping tolerance on `|Θ(p)|/p`.
    pub epsilon: f64,
    /// Start price; `None` uses the midpoint of the box, or a uniform draw
    /// when `seed` is set.
    pub p_init: Option<f64>,
    pub seed: Option<u64>,
    pub max_iterations: usize,
    pub grid_resolution: usize,
    /// Station whose price is searched.
    pub station: Station,
}

impl DssaOptions {
    pub fn for_market(market: &Market) -> Self {
        Self {
            alpha: 0.5,
            delta0: (market.p_max - market.p_min) / 10.0,
            epsilon: 1e-3,
            p_init: None,
            seed: None,
            max_iterations: 200,
            grid_resolution: DEFAULT_GRID,
            station: Station::One,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStep {
    pub iteration: usize,
    pub price: f64,
    pub theta: f64,
    pub delta: f64,
    pub direction: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// `|Θ(p_min)| ≤ ε`: the searched price sits at `p_min`.
    LowerEndpoint,
    /// `|Θ(p_max)| ≤ ε`: the searched price sits at `p_max`.
    UpperEndpoint,
    /// Interior search met `|Θ(p)|/p ≤ ε`.
    Converged,
    MaxIterations,
    /// Mutual best responses on a grid.
    GridSearch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PricingOutcome {
    pub p1_star: f64,
    pub p2_star: f64,
    pub profits: [f64; 2],
    pub demands: [f64; 2],
    pub trace: Vec<TraceStep>,
    pub converged: bool,
    pub iterations: usize,
    pub termination: Termination,
}

impl PricingOutcome {
    fn at(
        market: &Market,
        p1: f64,
        p2: f64,
        trace: Vec<TraceStep>,
        termination: Termination,
    ) -> Result<Self, PricingError> {
        let eq = solve_selection(p1, p2, market)?;
        let mut profits = [0.0; 2];
        for s in Station::BOTH {
            let params = market.station(s);
            let own = if s == Station::One { p1 } else { p2 };
            profits[s.index()] = (own - params.energy_cost) * eq.demand(s) - params.fixed_cost;
        }
        Ok(Self {
            p1_star: p1,
            p2_star: p2,
            profits,
            demands: [eq.demand1, eq.demand2],
            iterations: trace.len(),
            converged: termination != Termination::MaxIterations,
            trace,
            termination,
        })
    }

    pub fn price(&self, s: Station) -> f64 {
        match s {
            Station::One => self.p1_star,
            Station::Two => self.p2_star,
        }
    }
}

/// Directional search for the pricing equilibrium.
///
/// Starting from `p(1)`, the searched station moves its price by `±δ` in
/// the direction of `sign Θ(p)`, clamped to the price box, and shrinks `δ`
/// by `α` whenever `Θ` changes sign. It stops once `|Θ(p)|/p ≤ ε` and
/// reports the rival at `Bⱼ(p*)`. The box ends are checked first; the
/// rival is reported at its best response there too, not at the same end.
pub fn dssa(market: &Market, options: &DssaOptions) -> Result<PricingOutcome, PricingError> {
    let o = options;
    if !(o.alpha > 0.0 && o.alpha < 1.0) {
        return Err(invalid("alpha must lie in (0, 1)"));
    }
    if o.delta0.is_nan() || o.epsilon.is_nan() || o.delta0 <= 0.0 || o.epsilon <= 0.0 {
        return Err(invalid("delta0 and epsilon must be positive"));
    }
    check_grid(o.grid_resolution)?;
    let (lo, hi) = (market.p_min, market.p_max);
    let start = match (o.p_init, o.seed) {
        (Some(p), _) => {
            if !(p > lo && p < hi) {
                return Err(invalid(format!("p_init must lie in ({lo}, {hi})")));
            }
            p
        }
        (None, Some(seed)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            loop {
                let p = rng.random_range(lo..hi);
                if p > lo {
                    break p;
                }
            }
        }
        (None, None) => 0.5 * (lo + hi),
    };

    let station = o.station;
    let pair = |own: f64, rival: f64| match station {
        Station::One => (own, rival),
        Station::Two => (rival, own),
    };
    let mut cache: HashMap<u64, ThetaEval> = HashMap::new();
    let mut eval = |p: f64| -> Result<ThetaEval, PricingError> {
        if let Some(e) = cache.get(&p.to_bits()) {
            return Ok(*e);
        }
        let e = theta(station, p, market, o.grid_resolution)?;
        cache.insert(p.to_bits(), e);
        Ok(e)
    };

    for (end, termination) in [(lo, Termination::LowerEndpoint), (hi, Termination::UpperEndpoint)] {
        let e = eval(end)?;
        if e.value.abs() <= o.epsilon {
            let (p1, p2) = pair(end, e.rival_response);
            return PricingOutcome::at(market, p1, p2, Vec::new(), termination);
        }
    }

    let mut trace = Vec::new();
    let mut previous_theta = 1.0;
    let mut delta = o.delta0;
    let mut price = start;
    for iteration in 1.. {
        let e = eval(price)?;
        let direction: i8 = if e.value > 0.0 {
            1
        } else if e.value < 0.0 {
            -1
        } else {
            0
        };
        if e.value * previous_theta < 0.0 {
            delta *= o.alpha;
        }
        trace.push(TraceStep {
            iteration,
            price,
            theta: e.value,
            delta,
            direction,
        });
        if e.value.abs() / price <= o.epsilon {
            let (p1, p2) = pair(price, e.rival_response);
            return PricingOutcome::at(market, p1, p2, trace, Termination::Converged);
        }
        if iteration >= o.max_iterations {
            let (p1, p2) = pair(price, e.rival_response);
            return PricingOutcome::at(market, p1, p2, trace, Termination::MaxIterations);
        }
        price = (price + f64::from(direction) * delta).clamp(lo, hi);
        previous_theta = e.value;
    }
    unreachable!("the search loop only exits by returning")
}

/// Grid point pair that are mutual best responses within one grid cell.
///
/// Best responses of both stations are computed for every grid price; the
/// pair with the smallest residual is returned, `None` if no pair qualifies.
pub fn brute_force_equilibrium(
    market: &Market,
    grid_resolution: usize,
) -> Result<Option<PricingOutcome>, PricingError> {
    brute_force_equilibrium_with(market, grid_resolution, Exec::default())
}

pub fn brute_force_equilibrium_with(
    market: &Market,
    grid_resolution: usize,
    exec: Exec,
) -> Result<Option<PricingOutcome>, PricingError> {
    check_grid(grid_resolution)?;
    let (lo, hi) = (market.p_min, market.p_max);
    let n = grid_resolution + 1;
    let cell = (hi - lo) / grid_resolution as f64;
    let grid: Vec<f64> = (0..n)
        .map(|k| if k == grid_resolution { hi } else { lo + cell * k as f64 })
        .collect();
    let jobs: Vec<(Station, f64)> = Station::BOTH
        .iter()
        .flat_map(|&s| grid.iter().map(move |&p| (s, p)))
        .collect();
    // Inner best responses stay sequential; the outer map already saturates the pool.
    let flat = exec
        .map_slice(&jobs, |&(s, p)| {
            best_response_with(s, p, market, grid_resolution, false, Exec::Sequential).map(|r| r.price)
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let (b1, b2) = flat.split_at(n);

    let mut best: Option<(f64, usize, usize)> = None;
    for (j, &response1) in b1.iter().enumerate() {
        let nearest = ((response1 - lo) / cell).floor() as usize;
        for i in [nearest, nearest + 1] {
            if i >= n {
                continue;
            }
            let r1 = (response1 - grid[i]).abs();
            let r2 = (b2[i] - grid[j]).abs();
            if r1 > cell || r2 > cell {
                continue;
            }
            let residual = r1.max(r2);
            if best.is_none_or(|(r, _, _)| residual < r) {
                best = Some((residual, i, j));
            }
        }
    }
    match best {
        Some((_, i, j)) => Ok(Some(PricingOutcome::at(
            market,
            grid[i],
            grid[j],
            Vec::new(),
            Termination::GridSearch,
        )?)),
        None => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MarketConfig;

    fn baseline_box(p_min: f64, p_max: f64) -> Market {
        Market::new(MarketConfig::baseline().with_price_box(p_min, p_max)).unwrap()
    }

    #[test]
    fn zero_margin_leaves_only_fixed_cost() {
        let m = baseline_box(0.15, 0.3);
        assert_eq!(station_profit(Station::One, 0.15, 0.2, &m).unwrap(), -1.0);
        assert_eq!(station_profit(Station::Two, 0.15, 0.25, &m).unwrap(), -1.0);
    }

    #[test]
    fn priced_out_station_earns_minus_fixed_cost() {
        let m = baseline_box(0.15, 0.3);
        assert_eq!(station_profit(Station::One, 0.28, 0.15, &m).unwrap(), -1.0);
    }

    #[test]
    fn profit_composes_margin_and_split_demand() {
        let m = baseline_box(0.15, 0.3);
        let eq = solve_selection(0.25, 0.25, &m).unwrap();
        let x = eq.kind.x_star().unwrap();
        let expected = (0.25 - 0.15) * (10.0 + x) * 60.0 - 1.0;
        let got = station_profit(Station::One, 0.25, 0.25, &m).unwrap();
        assert!((got - expected).abs() < 1e-9);
    }

    #[test]
    fn best_response_beats_the_zero_margin_floor() {
        let m = baseline_box(0.15, 0.3);
        for s in Station::BOTH {
            let br = best_response(s, 0.3, &m, 200).unwrap();
            assert!(br.profit >= -1.0);
            assert!(br.price >= m.p_min && br.price <= m.p_max);
            let direct = station_profit(s, br.price, 0.3, &m).unwrap();
            assert_eq!(direct, br.profit);
        }
    }

    #[test]
    fn ties_resolve_to_the_lower_price() {
        let best = pick_best(
            [(0.1, 1.0), (0.2, 2.0), (0.3, 2.0)].into_iter(),
            (f64::NAN, f64::NEG_INFINITY),
        );
        assert_eq!(best, (0.2, 2.0));
        let best = pick_best([(0.1, 2.0)].into_iter(), (0.2, 2.0));
        assert_eq!(best, (0.1, 2.0));
    }

    #[test]
    fn rejects_bad_arguments() {
        let m = baseline_box(0.25, 0.3);
        assert!(best_response(Station::One, 0.27, &m, 50).is_err());
        assert!(best_response(Station::One, 0.31, &m, 200).is_err());
        assert!(check_conditions(&m, 0.28, 0.26, 10, 200).is_err());
        assert!(check_conditions(&m, 0.25, 0.3, 5, 200).is_err());
        let mut o = DssaOptions::for_market(&m);
        o.alpha = 1.0;
        assert!(dssa(&m, &o).is_err());
        let mut o = DssaOptions::for_market(&m);
        o.p_init = Some(0.25);
        assert!(dssa(&m, &o).is_err());
    }

    #[test]
    fn degenerate_region_passes_vacuously() {
        let m = baseline_box(0.25, 0.3);
        let r = check_conditions(&m, 0.27 - 1e-9, 0.27, 10, 200).unwrap();
        assert!(r.vacuous && r.all_passed());
    }

    #[test]
    fn curve_is_kept_on_request() {
        let m = baseline_box(0.25, 0.3);
        let br = best_response_with(Station::One, 0.27, &m, 100, true, Exec::Sequential).unwrap();
        let curve = br.curve.unwrap();
        assert_eq!(curve.len(), 101);
        assert_eq!(curve[0].0, 0.25);
        assert_eq!(curve[100].0, 0.3);
    }

    #[test]
    fn seeded_start_is_reproducible_and_interior() {
        let m = baseline_box(0.25, 0.3);
        let mut o = DssaOptions::for_market(&m);
        o.grid_resolution = 200;
        o.seed = Some(7);
        let a = dssa(&m, &o).unwrap();
        let b = dssa(&m, &o).unwrap();
        assert_eq!(a, b);
        assert!(a.trace[0].price > 0.25 && a.trace[0].price < 0.3);
        assert!(a.converged);
    }
}
