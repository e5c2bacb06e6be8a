//! M/G/k mean waiting time.
//!
//! Every queueing quantity used by the equilibrium solvers goes through
//! [`mean_wait`]. The kernel is the standard two-moment M/G/k approximation:
//! the Erlang-C waiting time scaled by `(1 + c²)/2`, where `c` is the
//! coefficient of variation of the service time. For exponential service it
//! is exact.

use crate::model::StationParams;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum QueueError {
    #[error("station overloaded: offered load {offered_load} >= {ports} ports")]
    Overload { offered_load: f64, ports: u32 },
    #[error("segment length must be non-negative, got {0}")]
    NegativeSegment(f64),
}

/// Load placed on a station by the PEVs of a set of total length `segment_length`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueLoad {
    pub segment_length: f64,
    pub arrival_rate: f64,
    pub offered_load: f64,
}

impl QueueLoad {
    pub fn new(segment_length: f64, lambda: f64, station: &StationParams) -> Self {
        let arrival_rate = segment_length * lambda;
        Self {
            segment_length,
            arrival_rate,
            offered_load: arrival_rate / station.mu,
        }
    }

    pub fn is_feasible(&self, station: &StationParams) -> bool {
        self.segment_length >= 0.0 && self.offered_load < f64::from(station.ports)
    }

    /// Offered load per port.
    pub fn utilization(&self, station: &StationParams) -> f64 {
        self.offered_load / f64::from(station.ports)
    }
}

/// Mean queueing delay at a station serving a segment of length
/// `segment_length` with arrival density `lambda`.
///
/// With `a = |A|λ` and `ρ = a/μ`:
///
/// ```text
///            a (σ² + 1/μ²) ρ^(k-1)
/// q = ------------------------------------------------------------
///     2 (k-1)! (k-ρ)² [ Σ_{m<k} ρ^m/m!  +  ρ^k / ((k-1)! (k-ρ)) ]
/// ```
///
/// The factorial terms are accumulated as `ρ^m/m!` so nothing overflows for
/// large port counts. Feasibility is the strict `ρ < k`.
pub fn mean_wait(segment_length: f64, lambda: f64, station: &StationParams) -> Result<f64, QueueError> {
    if segment_length < 0.0 || segment_length.is_nan() {
        return Err(QueueError::NegativeSegment(segment_length));
    }
    let load = QueueLoad::new(segment_length, lambda, station);
    let k = station.ports;
    let kf = f64::from(k);
    let rho = load.offered_load;
    if rho >= kf {
        return Err(QueueError::Overload {
            offered_load: rho,
            ports: k,
        });
    }
    if load.arrival_rate == 0.0 {
        return Ok(0.0);
    }

    // term = ρ^m / m!, ending at m = k-1
    let mut term = 1.0;
    let mut partial = 1.0;
    for m in 1..k {
        term *= rho / f64::from(m);
        partial += term;
    }
    let slack = kf - rho;
    let second_moment = station.sigma * station.sigma + 1.0 / (station.mu * station.mu);
    let numerator = load.arrival_rate * second_moment * term;
    let denominator = 2.0 * slack * slack * (partial + term * rho / slack);
    Ok(numerator / denominator)
}

/// [`mean_wait`] with overload mapped to `+∞`.
///
/// Used where the wait enters a cost comparison: an overloaded station is
/// infinitely unattractive, which is what makes threshold and bracket
/// arithmetic come out right at capacity limits.
pub fn wait_or_infinite(segment_length: f64, lambda: f64, station: &StationParams) -> f64 {
    match mean_wait(segment_length, lambda, station) {
        Ok(w) => w,
        Err(QueueError::Overload { .. }) => f64::INFINITY,
        Err(QueueError::NegativeSegment(_)) => f64::NAN,
    }
}

/// Supremum of the segment lengths a station can serve with finite wait: `kμ/λ`.
pub fn max_feasible_segment(lambda: f64, station: &StationParams) -> f64 {
    station.capacity() / lambda
}
