//! Market files.
//!
//! ```text
//! # reference market
//! half_length = 10
//! x1 = -8
//! s1.ports = 2
//! s1.mu = 16
//! ...
//! ```
//!
//! The format is TOML restricted to the [`MarketConfig`] field names, with
//! station fields under `s1.`/`s2.`. Unknown and duplicate keys are errors;
//! `sN.sigma` may be omitted and then defaults to `1/μ`.

use super::{MarketConfig, StationParams};
use serde::Deserialize;
use std::fmt::{self, Write as _};

/// A malformed market file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    /// 1-based line of the offending text, when known.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ParseError {}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StationFile {
    ports: u32,
    mu: f64,
    sigma: Option<f64>,
    energy_cost: f64,
    fixed_cost: f64,
}

impl From<StationFile> for StationParams {
    fn from(s: StationFile) -> Self {
        StationParams {
            ports: s.ports,
            mu: s.mu,
            sigma: s.sigma.unwrap_or(1.0 / s.mu),
            energy_cost: s.energy_cost,
            fixed_cost: s.fixed_cost,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MarketFile {
    half_length: f64,
    x1: f64,
    x2: f64,
    lambda: f64,
    k_l: f64,
    k_q: f64,
    k_p: f64,
    demand_per_pev: f64,
    p_min: f64,
    p_max: f64,
    s1: StationFile,
    s2: StationFile,
}

/// Parses a market file. The result is not validated; see [`super::validate`].
pub fn parse_config(text: &str) -> Result<MarketConfig, ParseError> {
    let file: MarketFile = toml::from_str(text).map_err(|e| ParseError {
        line: e.span().map(|span| text[..span.start].matches('\n').count() + 1),
        message: e.message().to_string(),
    })?;
    Ok(MarketConfig {
        half_length: file.half_length,
        x1: file.x1,
        x2: file.x2,
        lambda: file.lambda,
        stations: [file.s1.into(), file.s2.into()],
        k_l: file.k_l,
        k_q: file.k_q,
        k_p: file.k_p,
        demand_per_pev: file.demand_per_pev,
        p_min: file.p_min,
        p_max: file.p_max,
    })
}

/// Renders a config in the file format. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn format_config(config: &MarketConfig) -> String {
    let mut out = String::new();
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
    for (key, value) in scalars {
        let _ = writeln!(out, "{key} = {value:?}");
    }
    for (i, s) in config.stations.iter().enumerate() {
        let p = i + 1;
        let _ = writeln!(out, "s{p}.ports = {}", s.ports);
        let _ = writeln!(out, "s{p}.mu = {:?}", s.mu);
        let _ = writeln!(out, "s{p}.sigma = {:?}", s.sigma);
        let _ = writeln!(out, "s{p}.energy_cost = {:?}", s.energy_cost);
        let _ = writeln!(out, "s{p}.fixed_cost = {:?}", s.fixed_cost);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASELINE: &str = "\
# reference market
half_length = 10
x1 = -8
x2 = 5
lambda = 1
k_l = 1.5
k_q = 5
k_p = 4
demand_per_pev = 60
p_min = 0.15
p_max = 0.3

s1.ports = 2
s1.mu = 16
s1.energy_cost = 0.15
s1.fixed_cost = 1
s2.ports = 2
s2.mu = 14     # slower chargers
s2.energy_cost = 0.15
s2.fixed_cost = 1
";

    #[test]
    fn parses_reference_file_with_sigma_default() {
        let c = parse_config(BASELINE).unwrap();
        assert_eq!(c, MarketConfig::baseline());
        assert_eq!(c.stations[1].sigma, 1.0 / 14.0);
    }

    #[test]
    fn explicit_sigma_is_used() {
        let text = format!("{BASELINE}s1.sigma = 0.0\n");
        assert_eq!(parse_config(&text).unwrap().stations[0].sigma, 0.0);
    }

    #[test]
    fn unknown_key_is_named_with_its_line() {
        let text = BASELINE.replace("k_q = 5", "kq = 5");
        let err = parse_config(&text).unwrap_err();
        assert_eq!(err.line, Some(7));
        assert!(err.to_string().starts_with("line 7:"));
        assert!(err.message.contains("`kq`"), "{err}");
        let text = format!("{BASELINE}s3.mu = 1\n");
        assert!(parse_config(&text).unwrap_err().message.contains("`s3`"));
        let text = format!("{BASELINE}s2.speed = 1\n");
        assert!(parse_config(&text).unwrap_err().message.contains("`speed`"));
    }

    #[test]
    fn rejects_bad_values_duplicates_and_syntax() {
        let text = BASELINE.replace("s1.ports = 2", "s1.ports = 2.5");
        assert_eq!(parse_config(&text).unwrap_err().line, Some(13));
        let text = BASELINE.replace("lambda = 1", "lambda = fast");
        assert_eq!(parse_config(&text).unwrap_err().line, Some(5));
        let text = format!("{BASELINE}x1 = -7\n");
        assert!(parse_config(&text).unwrap_err().message.contains("duplicate"));
        let text = format!("{BASELINE}this line has no equals\n");
        assert_eq!(parse_config(&text).unwrap_err().line, Some(21));
        let text = BASELINE.replace("p_max = 0.3\n", "");
        assert!(parse_config(&text).unwrap_err().message.contains("`p_max`"));
    }

    #[test]
    fn formatted_config_parses_back() {
        let mut c = MarketConfig::baseline_with_rates(9.5, 9.1);
        c.stations[0].sigma = 0.123456789;
        c.x2 = 0.1 + 0.2;
        c.k_q = 1e-5;
        assert_eq!(parse_config(&format_config(&c)).unwrap(), c);
    }
}
