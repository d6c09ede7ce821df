//! `gridcase` command-line front end.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gridcase::scenario::LevelChoice;

#[derive(Parser, Debug)]
#[command(name = "gridcase", version, about = "Static power-system analysis on case files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check every record invariant; exits 0 only when no errors are found.
    Validate { case: PathBuf },
    /// Solve the power flow and print the bus solution and total losses.
    Lf {
        case: PathBuf,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Trace the PV curve, write it as CSV and print the loadability margin.
    Cpf {
        case: PathBuf,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        trace: TraceArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Solve the market and voltage-stability OPF for one weighting factor.
    Opf {
        case: PathBuf,
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Weight of the market surplus; the loading margin gets 1 - omega.
        #[arg(long, default_value_t = 0.5, value_parser = unit_interval)]
        omega: f64,
        #[command(flatten)]
        bounds: LambdaArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Sweep the weighting factor and write the dispatch-versus-weight CSV.
    Pareto {
        case: PathBuf,
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Weights as start:step:end.
        #[arg(long, default_value = "0:0.1:1", value_parser = parse_grid)]
        omega_grid: Grid,
        #[command(flatten)]
        bounds: LambdaArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Rank wind farms by loadability-margin sensitivity to reactive output.
    Rank {
        case: PathBuf,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        trace: TraceArgs,
        /// Power factor every farm is moved to.
        #[arg(long, default_value_t = gridcase::sensitivity::DEFAULT_TARGET_PF, value_parser = power_factor)]
        pf: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Write the case scaled to the chosen scenario.
    Scale {
        case: PathBuf,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Args, Debug)]
struct ScenarioArgs {
    /// Calendar month for load levels and capacity factors.
    #[arg(long, default_value_t = 9, value_parser = clap::value_parser!(u8).range(1..=12))]
    month: u8,
    /// heavy, medium, light or average (loads as written).
    #[arg(long, default_value = "average")]
    level: LevelChoice,
    /// Yearly load growth in percent, comma separated, applied in order.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    growth: Vec<f64>,
    /// Scale generators by their monthly capacity factors.
    #[arg(long)]
    capacity_factors: bool,
}

#[derive(Args, Debug)]
struct SolverArgs {
    /// Largest admissible bus mismatch in p.u.
    #[arg(long, default_value_t = 1e-8, value_parser = tolerance)]
    tol: f64,
    #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u32).range(1..=1000))]
    max_iter: u32,
    /// Share losses among units by their gamma weights.
    #[arg(long)]
    distributed_slack: bool,
    /// Pin voltage-controlling units at their reactive limits.
    #[arg(long)]
    q_limits: bool,
}

#[derive(Args, Debug)]
struct TraceArgs {
    /// Initial continuation step length.
    #[arg(long, default_value_t = 0.1, value_parser = step)]
    step: f64,
    /// Bus whose voltage goes into the CSV; repeat for more. Defaults to all buses.
    #[arg(long)]
    monitor_bus: Vec<u32>,
}

#[derive(Args, Debug)]
struct LambdaArgs {
    #[arg(long, default_value_t = 1.01)]
    lambda_min: f64,
    #[arg(long, default_value_t = 1.99)]
    lambda_max: f64,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Output file; standard output when absent.
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Debug)]
struct Grid(Vec<f64>);

fn parse_number(s: &str) -> Result<f64, String> {
    let x: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn unit_interval(s: &str) -> Result<f64, String> {
    let x = parse_number(s)?;
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(format!("{x} is outside [0, 1]"))
    }
}

fn power_factor(s: &str) -> Result<f64, String> {
    let x = parse_number(s)?;
    if x > 0.0 && x <= 1.0 {
        Ok(x)
    } else {
        Err(format!("{x} is outside (0, 1]"))
    }
}

fn tolerance(s: &str) -> Result<f64, String> {
    let x = parse_number(s)?;
    if x > 0.0 && x < 1.0 {
        Ok(x)
    } else {
        Err(format!("{x} is outside (0, 1)"))
    }
}

fn step(s: &str) -> Result<f64, String> {
    let x = parse_number(s)?;
    if x > 0.0 && x <= 1.0 {
        Ok(x)
    } else {
        Err(format!("{x} is outside (0, 1]"))
    }
}

/// `start:step:end` inclusive of `end` when it falls on the grid.
fn parse_grid(s: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [start, step, end] = parts[..] else {
        return Err("expected start:step:end".into());
    };
    let (start, step, end) = (unit_interval(start)?, parse_number(step)?, unit_interval(end)?);
    if step <= 0.0 || end < start {
        return Err("step must be positive and end at least start".into());
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    // rounding keeps 0.1 * 3 printing as 0.3
    let values = (0..count).map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12).collect();
    Ok(Grid(values))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(status) => status,
        Err(e) => {
            eprintln!("error[{}]: {}", e.category(), e.message);
            ExitCode::from(e.code())
        }
    }
}
