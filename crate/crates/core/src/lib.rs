//! Equilibria of a two-station electric-vehicle charging market on a line.
//!
//! PEVs arrive uniformly on `[-L, L]` and pick one of two charging stations
//! by weighing travel distance, expected queueing delay and price. Given the
//! prices, [`selection`] computes the unique population equilibrium. The
//! stations anticipate it when setting prices; [`pricing`] computes best
//! responses and the pricing equilibrium by a sign-driven fixed-point search.
//! [`oracle`] holds the independent checks: a multi-server queue simulator
//! and a deviation-gain verifier.

pub mod exec;
pub mod model;
pub mod oracle;
pub mod pricing;
pub mod queueing;
pub mod roots;
pub mod selection;

pub use exec::Exec;
pub use model::{Market, MarketConfig, Station, StationParams};
