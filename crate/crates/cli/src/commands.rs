use crate::table::{Cell, CsvTable};
use crate::{
    Cli, CliError, Command, Output, PricingArgs, PricingMode, ServiceKind, SimulateArgs, SweepArgs, SweepVariable,
};
use pevmarket::model::{classify_capacity, classify_scenario, parse_config, validate, ScenarioError};
use pevmarket::oracle::{simulate_queue, ServiceDistribution, SimError, RNG_NAME};
use pevmarket::pricing::{
    best_response_with, brute_force_equilibrium, check_conditions, dssa, ConditionResult, DssaOptions, PricingError,
    Termination,
};
use pevmarket::queueing::{mean_wait, QueueError};
use pevmarket::selection::{solve_at_difference, solve_selection, SelectionEquilibrium, SelectionError};
use pevmarket::{Exec, Market, Station};
use std::fs;
use std::path::Path;

const DEFAULT_SEED: u64 = 1;

pub fn dispatch(cli: &Cli) -> Result<Output, CliError> {
    let path = cli
        .global
        .config
        .as_deref()
        .ok_or_else(|| CliError::Invalid("--config PATH is required".into()))?;
    let market = load_market(path)?;
    match &cli.command {
        Command::Classify => Ok(classify(&market).into()),
        Command::Sweep(args) => sweep(&market, args).map(Into::into),
        Command::Pricing(args) => pricing(&market, args, cli),
        Command::Simulate(args) => simulate(&market, args, cli.global.seed.unwrap_or(DEFAULT_SEED)).map(Into::into),
    }
}

fn load_market(path: &Path) -> Result<Market, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    let config = parse_config(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    let violations = validate(&config);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(CliError::Invalid(format!("{}: {}", path.display(), list.join("; "))));
    }
    Market::new(config).map_err(|e| CliError::Invalid(e.to_string()))
}

fn invalid(e: impl ToString) -> CliError {
    CliError::Invalid(e.to_string())
}

fn selection_error(e: SelectionError) -> CliError {
    match e {
        SelectionError::Queue(q @ QueueError::Overload { .. }) => CliError::Overload(q.to_string()),
        other => invalid(other),
    }
}

fn pricing_error(e: PricingError) -> CliError {
    match e {
        PricingError::Selection(s) => selection_error(s),
        other => invalid(other),
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

fn classify(market: &Market) -> CsvTable {
    let l1 = classify_capacity(Station::One, market);
    let l2 = classify_capacity(Station::Two, market);
    let in_taxonomy = match classify_scenario(market) {
        Ok(_) => true,
        Err(ScenarioError::OutsideTaxonomy(..) | ScenarioError::Unservable(..)) => false,
    };
    let name = format!("{l1}-{l2}");
    let t = market.thresholds();
    let cap1 = market.station(Station::One).capacity();
    let cap2 = market.station(Station::Two).capacity();
    let mass = 2.0 * market.half_length * market.lambda;
    eprintln!(
        "{name}: k1*mu1 = {cap1}, k2*mu2 = {cap2}, 2L*lambda = {mass}; thresholds {} {} {} {}",
        t.theta2_l, t.theta1_l, t.theta1_r, t.theta2_r
    );
    let mut table = CsvTable::new([
        "scenario",
        "in_taxonomy",
        "level1",
        "level2",
        "capacity1",
        "capacity2",
        "arrival_mass",
        "theta2_l",
        "theta1_l",
        "theta1_r",
        "theta2_r",
    ]);
    table.push(vec![
        Cell::text(name),
        in_taxonomy.into(),
        l1.name().into(),
        l2.name().into(),
        cap1.into(),
        cap2.into(),
        mass.into(),
        t.theta2_l.into(),
        t.theta1_l.into(),
        t.theta1_r.into(),
        t.theta2_r.into(),
    ]);
    table
}

const SWEEP_COLUMNS: [&str; 9] = [
    "delta_p", "ne_type", "x_star", "omega1", "a1_len", "d1", "d2", "wait1", "wait2",
];

fn equilibrium_cells(delta_p: f64, eq: &SelectionEquilibrium) -> Vec<Cell> {
    vec![
        delta_p.into(),
        eq.kind.name().into(),
        Cell::opt(eq.kind.x_star()),
        Cell::opt(eq.kind.omega1()),
        eq.a1_len.into(),
        eq.demand1.into(),
        eq.demand2.into(),
        eq.wait1.into(),
        eq.wait2.into(),
    ]
}

fn sweep(market: &Market, args: &SweepArgs) -> Result<CsvTable, CliError> {
    if args.from.is_nan() || args.to.is_nan() || args.from > args.to {
        return Err(invalid(format!(
            "--from {} must not exceed --to {}",
            args.from, args.to
        )));
    }
    if args.points < 2 {
        return Err(invalid("--points must be at least 2"));
    }
    let values = linspace(args.from, args.to, args.points);
    let fixed = args.fixed.unwrap_or(0.5 * (market.p_min + market.p_max));
    let exec = Exec::default();

    let mut header: Vec<&str> = Vec::new();
    if args.variable != SweepVariable::DeltaP {
        header.extend(["p1", "p2"]);
    }
    header.extend(SWEEP_COLUMNS);
    let mut table = CsvTable::new(header);

    let rows = exec.map_slice(&values, |&v| -> Result<Vec<Cell>, SelectionError> {
        Ok(match args.variable {
            SweepVariable::DeltaP => equilibrium_cells(v, &solve_at_difference(v, market)?),
            SweepVariable::P1 | SweepVariable::P2 => {
                let (p1, p2) = if args.variable == SweepVariable::P1 {
                    (v, fixed)
                } else {
                    (fixed, v)
                };
                let mut row = vec![p1.into(), p2.into()];
                row.extend(equilibrium_cells(p1 - p2, &solve_selection(p1, p2, market)?));
                row
            }
        })
    });
    for row in rows {
        table.push(row.map_err(selection_error)?);
    }
    match &args.columns {
        Some(cols) => table.select(cols).map_err(invalid),
        None => Ok(table),
    }
}

fn pricing(market: &Market, args: &PricingArgs, cli: &Cli) -> Result<Output, CliError> {
    let g = &cli.global;
    let exec = Exec::default();
    match args.mode {
        PricingMode::BestResponseCurve => {
            if args.points < 2 {
                return Err(invalid("--points must be at least 2"));
            }
            let prices = linspace(market.p_min, market.p_max, args.points);
            let rows = exec.map_slice(&prices, |&p| -> Result<Vec<Cell>, PricingError> {
                let b1 = best_response_with(Station::One, p, market, g.grid, false, Exec::Sequential)?;
                let b2 = best_response_with(Station::Two, p, market, g.grid, false, Exec::Sequential)?;
                Ok(vec![p.into(), b1.price.into(), b2.price.into()])
            });
            let mut table = CsvTable::new(["p_j", "b1", "b2"]);
            for row in rows {
                table.push(row.map_err(pricing_error)?);
            }
            Ok(table.into())
        }
        PricingMode::CheckConditions => {
            let a = args.a.unwrap_or(market.p_min);
            let b = args.b.unwrap_or(market.p_max);
            let report = check_conditions(market, a, b, args.samples, g.grid).map_err(pricing_error)?;
            let mut table = CsvTable::new([
                "condition",
                "passed",
                "vacuous",
                "witnesses",
                "station",
                "p_lo",
                "p_hi",
                "value_lo",
                "value_hi",
            ]);
            let conditions: [(&str, &ConditionResult); 3] = [
                ("monotone", &report.monotone),
                ("bracket", &report.bracket),
                ("offset_decreasing", &report.offset_decreasing),
            ];
            for (name, c) in conditions {
                let mut row = vec![
                    name.into(),
                    c.passed.into(),
                    report.vacuous.into(),
                    c.witnesses.len().into(),
                ];
                match c.witnesses.first() {
                    Some(w) => row.extend([
                        w.station.number().into(),
                        w.p_lo.into(),
                        w.p_hi.into(),
                        w.value_lo.into(),
                        w.value_hi.into(),
                    ]),
                    None => row.extend([Cell::Blank, Cell::Blank, Cell::Blank, Cell::Blank, Cell::Blank]),
                }
                table.push(row);
            }
            Ok(table.into())
        }
        PricingMode::Dssa => {
            let defaults = DssaOptions::for_market(market);
            let options = DssaOptions {
                alpha: g.alpha,
                delta0: g.delta0.unwrap_or(defaults.delta0),
                epsilon: g.eps,
                p_init: args.p_init,
                seed: g.seed,
                max_iterations: g.max_iter,
                grid_resolution: g.grid,
                station: Station::from_number(args.station).expect("validated by clap"),
            };
            let o = dssa(market, &options).map_err(pricing_error)?;
            let mut table = CsvTable::new([
                "t",
                "p",
                "theta",
                "delta",
                "direction",
                "p1_star",
                "p2_star",
                "profit1",
                "profit2",
                "termination",
            ]);
            let summary = |table: &mut CsvTable, lead: Vec<Cell>| {
                let mut row = lead;
                row.extend([
                    o.p1_star.into(),
                    o.p2_star.into(),
                    o.profits[0].into(),
                    o.profits[1].into(),
                    termination_name(o.termination).into(),
                ]);
                table.push(row);
            };
            if o.trace.is_empty() {
                let p = o.price(options.station);
                summary(
                    &mut table,
                    vec![0usize.into(), p.into(), Cell::Blank, Cell::Blank, Cell::Blank],
                );
            }
            for (k, s) in o.trace.iter().enumerate() {
                let lead = vec![
                    s.iteration.into(),
                    s.price.into(),
                    s.theta.into(),
                    s.delta.into(),
                    Cell::Int(i64::from(s.direction)),
                ];
                if k + 1 == o.trace.len() {
                    summary(&mut table, lead);
                } else {
                    let mut row = lead;
                    row.extend([Cell::Blank, Cell::Blank, Cell::Blank, Cell::Blank, Cell::Blank]);
                    table.push(row);
                }
            }
            let failure = (!o.converged).then(|| {
                CliError::NotConverged(format!("no convergence within {} iterations", options.max_iterations))
            });
            Ok(Output { table, failure })
        }
        PricingMode::BruteForce => {
            let found = brute_force_equilibrium(market, g.grid).map_err(pricing_error)?;
            let mut table = CsvTable::new([
                "p1_star", "p2_star", "profit1", "profit2", "demand1", "demand2", "grid", "cell",
            ]);
            let cell = (market.p_max - market.p_min) / g.grid as f64;
            let failure = match found {
                Some(o) => {
                    table.push(vec![
                        o.p1_star.into(),
                        o.p2_star.into(),
                        o.profits[0].into(),
                        o.profits[1].into(),
                        o.demands[0].into(),
                        o.demands[1].into(),
                        g.grid.into(),
                        cell.into(),
                    ]);
                    None
                }
                None => Some(CliError::NotConverged("no mutual best responses on the grid".into())),
            };
            Ok(Output { table, failure })
        }
    }
}

fn termination_name(t: Termination) -> &'static str {
    match t {
        Termination::LowerEndpoint => "lower_endpoint",
        Termination::UpperEndpoint => "upper_endpoint",
        Termination::Converged => "converged",
        Termination::MaxIterations => "max_iterations",
        Termination::GridSearch => "grid_search",
    }
}

fn simulate(market: &Market, args: &SimulateArgs, seed: u64) -> Result<CsvTable, CliError> {
    let station = Station::from_number(args.station).expect("validated by clap");
    if !(args.segment >= 0.0 && args.segment.is_finite()) {
        return Err(invalid(format!(
            "--segment must be a non-negative length, got {}",
            args.segment
        )));
    }
    let mut params = *market.station(station);
    let mu = params.mu;
    let service = match args.service {
        ServiceKind::Exponential => ServiceDistribution::Exponential { mu },
        ServiceKind::Deterministic => ServiceDistribution::Deterministic { mu },
        ServiceKind::Lognormal => ServiceDistribution::LogNormal {
            mu,
            sigma: args.sigma.unwrap_or(params.sigma),
        },
    };
    if args.sigma.is_some() && args.service != ServiceKind::Lognormal {
        return Err(invalid("--sigma only applies to lognormal service"));
    }
    params.sigma = service.std_dev();
    let arrival_rate = args.segment * market.lambda;

    let formula = mean_wait(args.segment, market.lambda, &params).map_err(|e| match e {
        QueueError::Overload { .. } => CliError::Overload(e.to_string()),
        other => invalid(other),
    })?;
    let report = simulate_queue(arrival_rate, params.ports, service, args.arrivals, seed).map_err(|e| match e {
        SimError::Overload { .. } => CliError::Overload(e.to_string()),
        other => invalid(other),
    })?;
    let gap = if formula == 0.0 && report.mean_wait == 0.0 {
        0.0
    } else {
        (report.mean_wait - formula) / formula
    };

    let mut table = CsvTable::new([
        "station",
        "segment_length",
        "arrival_rate",
        "ports",
        "mu",
        "service",
        "sigma",
        "n_arrivals",
        "seed",
        "rng",
        "arrivals",
        "mean_wait",
        "wait_ci_halfwidth",
        "utilization",
        "formula_wait",
        "relative_gap",
    ]);
    table.push(vec![
        station.number().into(),
        args.segment.into(),
        arrival_rate.into(),
        params.ports.into(),
        mu.into(),
        service.name().into(),
        params.sigma.into(),
        args.arrivals.into(),
        seed.into(),
        RNG_NAME.into(),
        report.arrivals.into(),
        report.mean_wait.into(),
        report.wait_ci_halfwidth.into(),
        report.utilization.into(),
        formula.into(),
        gap.into(),
    ]);
    Ok(table)
}
