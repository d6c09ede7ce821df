use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use gridcase::case::validate_case;
use gridcase::cpf::{critical_bus, loadability_margin, pv_curve_csv, trace_pv_curve, CpfOptions, GrowthDirections};
use gridcase::opf::{pareto_csv, pareto_sweep, solve_market_vsc_opf, OpfOptions, OpfSolution};
use gridcase::powerflow::{solve_power_flow, PowerFlowSolution, QLimit, SolverOptions};
use gridcase::scenario::{apply_scenario, ScenarioSpec, SourceScaling};
use gridcase::sensitivity::{rank_wind_farms, ranking_table};
use gridcase::{parse_case, serialize_case, PowerCase};

use crate::{Command, LambdaArgs, OutputArgs, ScenarioArgs, SolverArgs, TraceArgs};

/// Machine-readable failure class; each has its own exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Category {
    Validation,
    Io,
    Parse,
    Scenario,
    PowerFlow,
    Cpf,
    Opf,
    Sensitivity,
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::Validation => "validation",
            Category::Io => "io",
            Category::Parse => "parse",
            Category::Scenario => "scenario",
            Category::PowerFlow => "powerflow",
            Category::Cpf => "cpf",
            Category::Opf => "opf",
            Category::Sensitivity => "sensitivity",
        })
    }
}

#[derive(Debug)]
pub struct Failure {
    category: Category,
    pub message: String,
}

impl Failure {
    fn new(category: Category, message: impl fmt::Display) -> Self {
        Self { category, message: message.to_string() }
    }

    pub fn category(&self) -> Category {
        self.category
    }

    /// Exit status; 2 is left to argument errors.
    pub fn code(&self) -> u8 {
        match self.category {
            Category::Validation => 1,
            Category::Io => 3,
            Category::Parse => 4,
            Category::Scenario => 5,
            Category::PowerFlow => 6,
            Category::Cpf => 7,
            Category::Opf => 8,
            Category::Sensitivity => 9,
        }
    }
}

pub fn run(command: Command) -> Result<ExitCode, Failure> {
    match command {
        Command::Validate { case } => validate(&case),
        Command::Lf { case, scenario, solver, output } => {
            let case = scenario_case(&case, &scenario)?;
            let sol =
                solve_power_flow(&case, &solver_options(&solver)).map_err(|e| Failure::new(Category::PowerFlow, e))?;
            emit(&output, &bus_table(&case, &sol))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Cpf { case, scenario, solver, trace, output } => {
            cpf(&scenario_case(&case, &scenario)?, &solver, &trace, &output)
        }
        Command::Opf { case, scenario, omega, bounds, output } => {
            let case = scenario_case(&case, &scenario)?;
            let options = OpfOptions { omega, ..opf_options(&bounds) };
            let sol = solve_market_vsc_opf(&case, &options).map_err(|e| Failure::new(Category::Opf, e))?;
            emit(&output, &dispatch_report(&case, &sol))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Pareto { case, scenario, omega_grid, bounds, output } => {
            let case = scenario_case(&case, &scenario)?;
            let results = pareto_sweep(&case, &omega_grid.0, &opf_options(&bounds));
            emit(&output, &pareto_csv(&case, &omega_grid.0, &results))?;
            let failed: Vec<String> = omega_grid
                .0
                .iter()
                .zip(&results)
                .filter_map(|(w, r)| r.as_ref().err().map(|e| format!("omega {w}: {e}")))
                .collect();
            if failed.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                Err(Failure::new(Category::Opf, failed.join("; ")))
            }
        }
        Command::Rank { case, scenario, solver, trace, pf, output } => {
            let case = scenario_case(&case, &scenario)?;
            let rank = rank_wind_farms(&case, pf, &cpf_options(&solver, &trace))
                .map_err(|e| Failure::new(Category::Sensitivity, e))?;
            emit(&output, &ranking_table(&rank))?;
            let failed = rank.entries.iter().filter(|e| e.outcome.is_err()).count();
            if failed == 0 {
                Ok(ExitCode::SUCCESS)
            } else {
                Err(Failure::new(Category::Sensitivity, format!("{failed} farm(s) could not be evaluated")))
            }
        }
        Command::Scale { case, scenario, output } => {
            emit(&output, &serialize_case(&scenario_case(&case, &scenario)?))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn load(path: &Path) -> Result<PowerCase, Failure> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Failure::new(Category::Io, format!("{}: {e}", path.display())))?;
    parse_case(&text).map_err(|e| Failure::new(Category::Parse, format!("{}: {e}", path.display())))
}

fn scenario_case(path: &Path, args: &ScenarioArgs) -> Result<PowerCase, Failure> {
    let case = load(path)?;
    let spec = ScenarioSpec {
        month: args.month,
        level: args.level,
        source_scaling: if args.capacity_factors { SourceScaling::ALL } else { SourceScaling::NONE },
        growth_rates: args.growth.clone(),
    };
    spec.check().map_err(|e| Failure::new(Category::Scenario, e))?;
    apply_scenario(&case, &spec).map_err(|e| Failure::new(Category::Scenario, e))
}

fn emit(output: &OutputArgs, text: &str) -> Result<(), Failure> {
    write_or_print(output.output.as_ref(), text)
}

fn write_or_print(path: Option<&PathBuf>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::new(Category::Io, format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn solver_options(args: &SolverArgs) -> SolverOptions {
    SolverOptions {
        tolerance: args.tol,
        max_iterations: args.max_iter as usize,
        distributed_slack: args.distributed_slack,
        enforce_q_limits: args.q_limits,
        ..SolverOptions::default()
    }
}

fn cpf_options(solver: &SolverArgs, trace: &TraceArgs) -> CpfOptions {
    CpfOptions { solver: solver_options(solver), initial_step: trace.step, ..CpfOptions::default() }
}

fn opf_options(bounds: &LambdaArgs) -> OpfOptions {
    OpfOptions { lambda_min: bounds.lambda_min, lambda_max: bounds.lambda_max, ..OpfOptions::default() }
}

fn validate(path: &Path) -> Result<ExitCode, Failure> {
    let case = load(path)?;
    let diagnostics = validate_case(&case);
    for d in &diagnostics {
        println!("{d}");
    }
    let errors = diagnostics.iter().filter(|d| d.is_error()).count();
    let warnings = diagnostics.len() - errors;
    if errors > 0 {
        return Err(Failure::new(Category::Validation, format!("{errors} error(s), {warnings} warning(s)")));
    }
    if warnings == 0 {
        println!("clean");
    } else {
        println!("{warnings} warning(s)");
    }
    Ok(ExitCode::SUCCESS)
}

fn bus_table(case: &PowerCase, sol: &PowerFlowSolution) -> String {
    let base = sol.system_base;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>8}  {:<20}  {:>9}  {:>10}  {:>10}  {:>10}",
        "bus", "name", "V [pu]", "theta [deg]", "P [MW]", "Q [Mvar]"
    );
    for (i, bus) in sol.buses.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:>8}  {:<20}  {:>9.6}  {:>11.5}  {:>10.4}  {:>10.4}",
            bus,
            case.bus_name(*bus).unwrap_or(""),
            sol.v[i],
            sol.theta[i].to_degrees(),
            sol.p_injected[i] * base,
            sol.q_injected[i] * base
        );
    }
    if sol.k_g != 0.0 {
        let _ = writeln!(out, "loss share k_G: {:.8}", sol.k_g);
    }
    for (bus, limit) in &sol.pinned {
        let side = match limit {
            QLimit::Max => "upper",
            QLimit::Min => "lower",
        };
        let _ = writeln!(out, "bus {bus} held at its {side} reactive limit");
    }
    if sol.q_limit_oscillation {
        let _ = writeln!(out, "reactive-limit switching cycled; last stable typing kept");
    }
    for c in &sol.converted {
        let _ = writeln!(out, "load at bus {} switched to constant impedance", c.bus);
    }
    let _ = writeln!(out, "iterations: {}", sol.iterations);
    let _ = writeln!(out, "total losses: {:.4} MW", sol.losses_mw);
    out
}

fn cpf(case: &PowerCase, solver: &SolverArgs, args: &TraceArgs, output: &OutputArgs) -> Result<ExitCode, Failure> {
    let fail = |e: gridcase::cpf::CpfError| Failure::new(Category::Cpf, e);
    let trace = trace_pv_curve(case, &GrowthDirections::from_case(case), &cpf_options(solver, args)).map_err(fail)?;
    let monitored: Vec<u32> = if args.monitor_bus.is_empty() { trace.buses.clone() } else { args.monitor_bus.clone() };
    if let Some(bus) = monitored.iter().find(|b| trace.position(**b).is_none()) {
        return Err(Failure::new(Category::Cpf, format!("monitored bus {bus} is not in the case")));
    }
    let columns: Vec<(u32, String)> = monitored.iter().map(|b| (*b, case.bus_label(*b))).collect();
    let margin = loadability_margin(&trace).map_err(fail)?;
    let critical = critical_bus(&trace);
    let summary = format!(
        "delta lambda: {:.6}\nmargin: {:.3} MW\ncritical bus: {} {}\n",
        margin.delta_lambda,
        margin.margin_mw,
        critical,
        case.bus_name(critical).unwrap_or("")
    );
    let csv = pv_curve_csv(&trace, &columns);
    match &output.output {
        Some(path) => {
            write_or_print(Some(path), &csv)?;
            print!("{summary}");
        }
        None => {
            print!("{csv}");
            eprint!("{summary}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn dispatch_report(case: &PowerCase, sol: &OpfSolution) -> String {
    let base = sol.system_base;
    let mut out = String::new();
    let _ = writeln!(out, "weighting: {}", sol.omega);
    let _ = writeln!(out, "{:>8}  {:<20}  {:>10}", "supply", "name", "P [MW]");
    for (bus, p) in sol.supply_buses.iter().zip(&sol.p_s) {
        let _ = writeln!(out, "{:>8}  {:<20}  {:>10.4}", bus, case.bus_name(*bus).unwrap_or(""), p * base);
    }
    let _ = writeln!(out, "{:>8}  {:<20}  {:>10}", "demand", "name", "P [MW]");
    for (bus, p) in sol.demand_buses.iter().zip(&sol.p_d) {
        let _ = writeln!(out, "{:>8}  {:<20}  {:>10.4}", bus, case.bus_name(*bus).unwrap_or(""), p * base);
    }
    let _ = writeln!(out, "loading parameter lambda_c: {:.6}", sol.lambda_c);
    let _ = writeln!(out, "social surplus: {:.4} $/h", sol.surplus);
    let _ = writeln!(out, "objective: {:.6}", sol.objective);
    let _ = writeln!(out, "total losses: {:.4} MW", sol.losses_mw);
    let _ = writeln!(out, "iterations: {}", sol.iterations);
    out
}
