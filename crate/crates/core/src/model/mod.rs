//! Market parameters, capacity taxonomy and the price-difference thresholds
//! that separate the station-selection equilibrium regimes.

mod parse;
pub mod random;

pub use parse::{format_config, parse_config, ParseError};

use crate::queueing::wait_or_infinite;
use std::fmt;
use thiserror::Error;

/// One of the two charging stations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Station {
    One,
    Two,
}

impl Station {
    pub const BOTH: [Station; 2] = [Station::One, Station::Two];

    pub fn index(self) -> usize {
        match self {
            Station::One => 0,
            Station::Two => 1,
        }
    }

    pub fn other(self) -> Station {
        match self {
            Station::One => Station::Two,
            Station::Two => Station::One,
        }
    }

    /// Station from its 1-based number.
    pub fn from_number(n: u32) -> Option<Station> {
        match n {
            1 => Some(Station::One),
            2 => Some(Station::Two),
            _ => None,
        }
    }

    pub fn number(self) -> u32 {
        self.index() as u32 + 1
    }
}

impl fmt::Display for Station {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "station {}", self.number())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationParams {
    /// Number of identical charging ports.
    pub ports: u32,
    /// Service rate per port.
    pub mu: f64,
    /// Standard deviation of the service time.
    pub sigma: f64,
    /// Unit electricity cost paid by the station.
    pub energy_cost: f64,
    /// Fixed cost per period, independent of demand.
    pub fixed_cost: f64,
}

impl StationParams {
    /// Station with exponential service (`σ = 1/μ`).
    pub fn exponential(ports: u32, mu: f64, energy_cost: f64, fixed_cost: f64) -> Self {
        Self {
            ports,
            mu,
            sigma: 1.0 / mu,
            energy_cost,
            fixed_cost,
        }
    }

    /// Service capacity `kμ`.
    pub fn capacity(&self) -> f64 {
        f64::from(self.ports) * self.mu
    }
}

/// Full parameterization of the line market `[-L, L]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketConfig {
    pub half_length: f64,
    pub x1: f64,
    pub x2: f64,
    /// PEV arrival rate per unit time per unit length.
    pub lambda: f64,
    pub stations: [StationParams; 2],
    /// Travel-cost weight per km.
    pub k_l: f64,
    /// Waiting-cost weight per unit time.
    pub k_q: f64,
    /// Price-cost weight.
    pub k_p: f64,
    /// Energy demanded by each PEV.
    pub demand_per_pev: f64,
    pub p_min: f64,
    pub p_max: f64,
}

impl MarketConfig {
    /// The reference market: `L = 10`, stations at −8 and 5 with two ports
    /// each, `μ = (16, 14)`, exponential service, `d = 60`, `k_p = 4`,
    /// `k_q = 5`, `k_l = 1.5`, `λ = 1`, `c = 0.15`, `č = 1`, prices in
    /// `[0.15, 0.3]`.
    pub fn baseline() -> Self {
        Self::baseline_with_rates(16.0, 14.0)
    }

    /// [`MarketConfig::baseline`] with different per-port service rates.
    pub fn baseline_with_rates(mu1: f64, mu2: f64) -> Self {
        Self {
            half_length: 10.0,
            x1: -8.0,
            x2: 5.0,
            lambda: 1.0,
            stations: [
                StationParams::exponential(2, mu1, 0.15, 1.0),
                StationParams::exponential(2, mu2, 0.15, 1.0),
            ],
            k_l: 1.5,
            k_q: 5.0,
            k_p: 4.0,
            demand_per_pev: 60.0,
            p_min: 0.15,
            p_max: 0.3,
        }
    }

    pub fn with_price_box(mut self, p_min: f64, p_max: f64) -> Self {
        self.p_min = p_min;
        self.p_max = p_max;
        self
    }

    pub fn station(&self, s: Station) -> &StationParams {
        &self.stations[s.index()]
    }

    pub fn position(&self, s: Station) -> f64 {
        match s {
            Station::One => self.x1,
            Station::Two => self.x2,
        }
    }

    pub fn market_length(&self) -> f64 {
        2.0 * self.half_length
    }

    /// Mean wait at `s` when it serves a set of total length `segment_length`,
    /// `+∞` when that overloads it.
    pub fn wait(&self, s: Station, segment_length: f64) -> f64 {
        wait_or_infinite(segment_length, self.lambda, self.station(s))
    }

    /// Mirror image: positions negated and the station labels swapped.
    ///
    /// The result only passes [`validate`] when both stations have equal
    /// capacity, because the labeling requires `k₁μ₁ ≥ k₂μ₂`.
    pub fn mirrored(&self) -> Self {
        let mut m = *self;
        m.x1 = -self.x2;
        m.x2 = -self.x1;
        m.stations = [self.stations[1], self.stations[0]];
        m
    }
}

/// A violated assumption of the market model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("half_length must be positive, got {0}")]
    NonPositiveHalfLength(f64),
    #[error("station positions must satisfy -L < x1 < x2 < L (L = {half_length}, x1 = {x1}, x2 = {x2})")]
    Positions { half_length: f64, x1: f64, x2: f64 },
    #[error("unstable system: k1*mu1 + k2*mu2 = {total_capacity} <= 2*L*lambda = {arrival_mass}")]
    Unstable { total_capacity: f64, arrival_mass: f64 },
    #[error("station labels: k1*mu1 = {cap1} < k2*mu2 = {cap2}")]
    CapacityOrder { cap1: f64, cap2: f64 },
    #[error("price box must satisfy p_min < p_max (got [{p_min}, {p_max}])")]
    PriceBox { p_min: f64, p_max: f64 },
    #[error("{station}: energy cost {cost} exceeds p_min = {p_min}")]
    CostAbovePrice { station: Station, cost: f64, p_min: f64 },
    #[error("{name} must be strictly positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{station}: ports must be at least 1")]
    NoPorts { station: Station },
    #[error("{station}: {name} must be {requirement}, got {value}")]
    StationParam {
        station: Station,
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("{name} is not finite")]
    NotFinite { name: &'static str },
}

/// Every violated model assumption; empty when the config is valid.
pub fn validate(config: &MarketConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let scalars = [
        ("half_length", config.half_length),
        ("x1", config.x1),
        ("x2", config.x2),
        ("lambda", config.lambda),
        ("k_l", config.k_l),
        ("k_q", config.k_q),
        ("k_p", config.k_p),
        ("demand_per_pev", config.demand_per_pev),
        ("p_min", config.p_min),
        ("p_max", config.p_max),
    ];
    for (name, value) in scalars {
        if !value.is_finite() {
            out.push(Violation::NotFinite { name });
        }
    }
    if !out.is_empty() {
        return out;
    }

    let l = config.half_length;
    if l <= 0.0 {
        out.push(Violation::NonPositiveHalfLength(l));
    }
    if !(-l < config.x1 && config.x1 < config.x2 && config.x2 < l) {
        out.push(Violation::Positions {
            half_length: l,
            x1: config.x1,
            x2: config.x2,
        });
    }
    for (name, value) in [
        ("lambda", config.lambda),
        ("k_l", config.k_l),
        ("k_q", config.k_q),
        ("k_p", config.k_p),
        ("demand_per_pev", config.demand_per_pev),
    ] {
        if value <= 0.0 {
            out.push(Violation::NonPositive { name, value });
        }
    }
    if config.p_min >= config.p_max {
        out.push(Violation::PriceBox {
            p_min: config.p_min,
            p_max: config.p_max,
        });
    }

    let mut stations_ok = true;
    for s in Station::BOTH {
        let p = config.station(s);
        if p.ports < 1 {
            out.push(Violation::NoPorts { station: s });
            stations_ok = false;
        }
        if !(p.mu.is_finite() && p.mu > 0.0) {
            out.push(Violation::StationParam {
                station: s,
                name: "mu",
                requirement: "positive",
                value: p.mu,
            });
            stations_ok = false;
        }
        if !(p.sigma.is_finite() && p.sigma >= 0.0) {
            out.push(Violation::StationParam {
                station: s,
                name: "sigma",
                requirement: "non-negative",
                value: p.sigma,
            });
        }
        if !(p.fixed_cost.is_finite() && p.fixed_cost >= 0.0) {
            out.push(Violation::StationParam {
                station: s,
                name: "fixed_cost",
                requirement: "non-negative",
                value: p.fixed_cost,
            });
        }
        if !p.energy_cost.is_finite() || p.energy_cost > config.p_min {
            out.push(Violation::CostAbovePrice {
                station: s,
                cost: p.energy_cost,
                p_min: config.p_min,
            });
        }
    }

    if stations_ok {
        let cap1 = config.stations[0].capacity();
        let cap2 = config.stations[1].capacity();
        let arrival_mass = 2.0 * l * config.lambda;
        if cap1 + cap2 <= arrival_mass {
            out.push(Violation::Unstable {
                total_capacity: cap1 + cap2,
                arrival_mass,
            });
        }
        if cap1 < cap2 {
            out.push(Violation::CapacityOrder { cap1, cap2 });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("invalid market configuration: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// A validated market together with its threshold set.
///
/// Every solver takes a `&Market`, so the model assumptions are checked once
/// at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Market {
    config: MarketConfig,
    thresholds: ThresholdSet,
}

impl Market {
    pub fn new(config: MarketConfig) -> Result<Self, ConfigError> {
        let violations = validate(&config);
        if !violations.is_empty() {
            return Err(ConfigError::Invalid(violations));
        }
        Ok(Self {
            thresholds: thresholds(&config),
            config,
        })
    }

    pub fn config(&self) -> &MarketConfig {
        &self.config
    }

    pub fn thresholds(&self) -> &ThresholdSet {
        &self.thresholds
    }

    /// Same market with a different price box.
    pub fn with_price_box(&self, p_min: f64, p_max: f64) -> Result<Self, ConfigError> {
        Market::new(self.config.with_price_box(p_min, p_max))
    }
}

impl std::ops::Deref for Market {
    type Target = MarketConfig;

    fn deref(&self) -> &MarketConfig {
        &self.config
    }
}

/// Service capacity of a station relative to the arrival mass it could face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CapacityLevel {
    /// Can serve the whole line.
    Full,
    /// Can serve everything up to and past its rival.
    High,
    /// Reaches past itself but not its rival.
    Middle,
    Low,
}

impl CapacityLevel {
    pub fn name(self) -> &'static str {
        match self {
            CapacityLevel::Full => "FULL",
            CapacityLevel::High => "HIGH",
            CapacityLevel::Middle => "MIDDLE",
            CapacityLevel::Low => "LOW",
        }
    }
}

impl fmt::Display for CapacityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Capacity level of one station. Intervals are open below and closed above.
pub fn classify_capacity(station: Station, config: &MarketConfig) -> CapacityLevel {
    let l = config.half_length;
    let lambda = config.lambda;
    let cap = config.station(station).capacity();
    // Lengths reaching the far end, the rival and the station itself.
    let (rival_reach, own_reach) = match station {
        Station::One => (l + config.x2, l + config.x1),
        Station::Two => (l - config.x1, l - config.x2),
    };
    if cap > 2.0 * l * lambda {
        CapacityLevel::Full
    } else if cap > rival_reach * lambda {
        CapacityLevel::High
    } else if cap > own_reach * lambda {
        CapacityLevel::Middle
    } else {
        CapacityLevel::Low
    }
}

/// One of the nine market scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CapacityScenario {
    level1: CapacityLevel,
    level2: CapacityLevel,
}

impl CapacityScenario {
    pub const ALL: [CapacityScenario; 9] = {
        use CapacityLevel::*;
        [
            CapacityScenario::pair(Full, Full),
            CapacityScenario::pair(Full, High),
            CapacityScenario::pair(Full, Middle),
            CapacityScenario::pair(Full, Low),
            CapacityScenario::pair(High, High),
            CapacityScenario::pair(High, Middle),
            CapacityScenario::pair(High, Low),
            CapacityScenario::pair(Middle, High),
            CapacityScenario::pair(Middle, Middle),
        ]
    };

    const fn pair(level1: CapacityLevel, level2: CapacityLevel) -> Self {
        Self { level1, level2 }
    }

    /// The scenario with these levels, if it is one of the nine.
    pub fn from_levels(level1: CapacityLevel, level2: CapacityLevel) -> Option<Self> {
        let s = Self::pair(level1, level2);
        Self::ALL.contains(&s).then_some(s)
    }

    pub fn level1(&self) -> CapacityLevel {
        self.level1
    }

    pub fn level2(&self) -> CapacityLevel {
        self.level2
    }

    pub fn name(&self) -> String {
        format!("{}-{}", self.level1, self.level2)
    }
}

impl fmt::Display for CapacityScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.level1, self.level2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("unservable market: {0}-{1} cannot serve every PEV")]
    Unservable(CapacityLevel, CapacityLevel),
    #[error("{0}-{1} is outside the nine-scenario taxonomy")]
    OutsideTaxonomy(CapacityLevel, CapacityLevel),
}

pub fn classify_scenario(config: &MarketConfig) -> Result<CapacityScenario, ScenarioError> {
    use CapacityLevel::*;
    let level1 = classify_capacity(Station::One, config);
    let level2 = classify_capacity(Station::Two, config);
    if let Some(s) = CapacityScenario::from_levels(level1, level2) {
        return Ok(s);
    }
    match (level1, level2) {
        (Low, Low) | (Middle, Low) | (Low, Middle) => Err(ScenarioError::Unservable(level1, level2)),
        _ => Err(ScenarioError::OutsideTaxonomy(level1, level2)),
    }
}

/// Price-difference breakpoints `θ₂ᴸ ≤ θ₁ᴸ < θ₁ᴿ ≤ θ₂ᴿ`.
///
/// An infinite threshold marks a regime that a capacity limit makes
/// unreachable, e.g. `θ₂ᴿ = +∞` when station 2 cannot serve the whole line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSet {
    pub theta2_l: f64,
    pub theta1_l: f64,
    pub theta1_r: f64,
    pub theta2_r: f64,
}

impl ThresholdSet {
    /// `[θ₂ᴸ, θ₁ᴸ, θ₁ᴿ, θ₂ᴿ]`
    pub fn as_array(&self) -> [f64; 4] {
        [self.theta2_l, self.theta1_l, self.theta1_r, self.theta2_r]
    }

    /// Ordering check. `θ₁ᴸ < θ₁ᴿ` is strict whenever either side is finite.
    pub fn is_ordered(&self) -> bool {
        let inner = if self.theta1_l.is_finite() || self.theta1_r.is_finite() {
            self.theta1_l < self.theta1_r
        } else {
            self.theta1_l <= self.theta1_r
        };
        self.theta2_l <= self.theta1_l && inner && self.theta1_r <= self.theta2_r
    }
}

pub fn thresholds(config: &MarketConfig) -> ThresholdSet {
    let l = config.half_length;
    let (x1, x2) = (config.x1, config.x2);
    let scale = config.k_p * config.demand_per_pev;
    let travel = config.k_l * (x2 - x1);
    let q1 = |len: f64| config.wait(Station::One, len);
    let q2 = |len: f64| config.wait(Station::Two, len);

    ThresholdSet {
        theta2_l: -(config.k_q * q1(2.0 * l) + travel) / scale,
        theta1_l: -(config.k_q * (q1(l + x2) - q2(l - x2)) + travel) / scale,
        theta1_r: (config.k_q * (q2(l - x1) - q1(x1 + l)) + travel) / scale,
        theta2_r: (config.k_q * q2(2.0 * l) + travel) / scale,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_is_valid() {
        assert!(validate(&MarketConfig::baseline()).is_empty());
    }

    #[test]
    fn low_capacity_is_unstable() {
        let v = validate(&MarketConfig::baseline_with_rates(4.0, 4.0));
        assert!(v.iter().any(|v| matches!(
            v,
            Violation::Unstable { total_capacity, arrival_mass }
                if *total_capacity == 16.0 && *arrival_mass == 20.0
        )));
    }

    #[test]
    fn swapped_positions_are_rejected() {
        let mut c = MarketConfig::baseline();
        c.x1 = 5.0;
        c.x2 = -8.0;
        assert!(validate(&c).iter().any(|v| matches!(v, Violation::Positions { .. })));
    }

    #[test]
    fn other_violations_are_collected() {
        let mut c = MarketConfig::baseline();
        c.k_l = 0.0;
        c.stations[1].energy_cost = 0.2;
        c.stations[0].mu = 10.0;
        c.p_max = 0.1;
        let v = validate(&c);
        assert!(v
            .iter()
            .any(|v| matches!(v, Violation::NonPositive { name: "k_l", .. })));
        assert!(v.iter().any(|v| matches!(
            v,
            Violation::CostAbovePrice {
                station: Station::Two,
                ..
            }
        )));
        assert!(v.iter().any(|v| matches!(v, Violation::CapacityOrder { .. })));
        assert!(v.iter().any(|v| matches!(v, Violation::PriceBox { .. })));
        assert!(Market::new(c).is_err());
    }

    #[test]
    fn capacity_levels_at_reference_rates() {
        let c = MarketConfig::baseline();
        assert_eq!(classify_capacity(Station::One, &c), CapacityLevel::Full);
        let c = MarketConfig::baseline_with_rates(9.5, 9.1);
        assert_eq!(classify_capacity(Station::One, &c), CapacityLevel::High);
        let c = MarketConfig::baseline_with_rates(9.0, 2.0);
        assert_eq!(classify_capacity(Station::Two, &c), CapacityLevel::Low);
    }

    #[test]
    fn capacity_boundaries_are_closed_above() {
        // k1μ1 = 2Lλ exactly is HIGH, (L+x2)λ exactly is MIDDLE, (L+x1)λ exactly is LOW
        let c = MarketConfig::baseline_with_rates(10.0, 10.0);
        assert_eq!(classify_capacity(Station::One, &c), CapacityLevel::High);
        let c = MarketConfig::baseline_with_rates(7.5, 7.5);
        assert_eq!(classify_capacity(Station::One, &c), CapacityLevel::Middle);
        let c = MarketConfig::baseline_with_rates(1.0, 1.0);
        assert_eq!(classify_capacity(Station::One, &c), CapacityLevel::Low);
        // station 2: (L-x1)λ = 18 exactly is MIDDLE, (L-x2)λ = 5 exactly is LOW
        let c = MarketConfig::baseline_with_rates(20.0, 9.0);
        assert_eq!(classify_capacity(Station::Two, &c), CapacityLevel::Middle);
        let c = MarketConfig::baseline_with_rates(20.0, 2.5);
        assert_eq!(classify_capacity(Station::Two, &c), CapacityLevel::Low);
    }

    #[test]
    fn scenario_names() {
        let s = classify_scenario(&MarketConfig::baseline()).unwrap();
        assert_eq!(s.name(), "FULL-FULL");
        let s = classify_scenario(&MarketConfig::baseline_with_rates(7.0, 6.0)).unwrap();
        assert_eq!(s.to_string(), "MIDDLE-MIDDLE");
        let s = classify_scenario(&MarketConfig::baseline_with_rates(9.0, 2.0)).unwrap();
        assert_eq!(s.name(), "HIGH-LOW");
    }

    #[test]
    fn tiny_capacities_are_unservable() {
        let mut c = MarketConfig::baseline_with_rates(1.0, 1.0);
        c.stations[0].ports = 1;
        c.stations[1].ports = 1;
        assert_eq!(
            classify_scenario(&c),
            Err(ScenarioError::Unservable(CapacityLevel::Low, CapacityLevel::Low))
        );
    }

    #[test]
    fn low_high_lies_outside_the_taxonomy() {
        // x1 > 0 lets the larger station be LOW while the smaller one is HIGH
        let mut c = MarketConfig::baseline();
        c.x1 = 2.0;
        c.stations[0] = StationParams::exponential(1, 11.5, 0.15, 1.0);
        c.stations[1] = StationParams::exponential(1, 9.0, 0.15, 1.0);
        assert!(validate(&c).is_empty());
        assert_eq!(
            classify_scenario(&c),
            Err(ScenarioError::OutsideTaxonomy(CapacityLevel::Low, CapacityLevel::High))
        );
    }

    #[test]
    fn symmetric_market_has_antisymmetric_thresholds() {
        let mut c = MarketConfig::baseline_with_rates(15.0, 15.0);
        c.x1 = -4.0;
        c.x2 = 4.0;
        let t = thresholds(&c);
        assert_eq!(t.theta1_l, -t.theta1_r);
        assert_eq!(t.theta2_l, -t.theta2_r);
        assert!(t.is_ordered());
    }

    #[test]
    fn high_high_has_no_dominant_regime() {
        let t = thresholds(&MarketConfig::baseline_with_rates(9.5, 9.1));
        assert_eq!(t.theta2_l, f64::NEG_INFINITY);
        assert_eq!(t.theta2_r, f64::INFINITY);
        assert!(t.theta1_l.is_finite() && t.theta1_r.is_finite());
        assert!(t.is_ordered());
    }

    #[test]
    fn low_rival_removes_the_split_regime() {
        let t = thresholds(&MarketConfig::baseline_with_rates(9.0, 2.0));
        assert_eq!(t.theta1_l, f64::INFINITY);
        assert_eq!(t.theta1_r, f64::INFINITY);
        assert!(t.is_ordered());
    }

    #[test]
    fn baseline_thresholds_are_ordered_and_finite() {
        let t = thresholds(&MarketConfig::baseline());
        assert!(t.as_array().iter().all(|v| v.is_finite()));
        assert!(t.is_ordered());
        // travel-only part k_l(x2-x1)/(k_p d) bounds the inner pair
        let travel = 1.5 * 13.0 / 240.0;
        assert!(t.theta2_r > travel && t.theta2_l < -travel);
    }
}
