//! The `dalembert` command line.
//!
//! Exit codes: 0 success, 1 error (including failed identity checks), 2 a
//! monitored quantity exceeded its drift threshold.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scenario::{run_scenario, Scenario, SystemSpec};
use crate::stability::{lyapunov_spectrum, small_oscillations, LyapunovConfig};
use crate::state::PhaseState;
use crate::systems::{example_params, list_systems, LagrangianModel, ParamValue, Params};
use crate::verify::{verify_with, NegatedGamma, Prolonged, Thresholds, VerifyReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_THRESHOLD: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "dalembert", version, about = "Jacobi variational equations from prolonged Lagrangians")]
pub struct Cli {
    /// Seed for every randomised step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// More log output; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one or more scenario files.
    Run {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
    },
    /// Check the identities between L, γ and the two linearisations at random states.
    Verify(VerifyArgs),
    /// Lyapunov spectrum of the tangent flow.
    Lyapunov(LyapunovArgs),
    /// Normal modes about an equilibrium.
    Modes(ModesArgs),
    /// The builtin catalog.
    Systems {
        #[command(subcommand)]
        action: SystemsAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum SystemsAction {
    List {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Args)]
pub struct SystemArgs {
    /// Builtin system name.
    #[arg(long, conflicts_with = "lagrangian")]
    pub system: Option<String>,
    /// Lagrangian in the expression language (needs --dim).
    #[arg(long, requires = "dim")]
    pub lagrangian: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// `name=value`; values are numbers, JSON matrices or expressions.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Verify every builtin instead of one system.
    #[arg(long, conflicts_with_all = ["system", "lagrangian"])]
    pub all: bool,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Write the JSON report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Print the JSON report instead of the table.
    #[arg(long)]
    pub json: bool,
    /// Test fixture: flip the sign of γ to exercise the failure path.
    #[arg(long, hide = true)]
    pub negate_gamma: bool,
}

#[derive(Debug, Args)]
pub struct LyapunovArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Take system and initial state from a scenario file.
    #[arg(long, conflicts_with_all = ["system", "lagrangian"])]
    pub scenario: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub q: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub qd: Vec<f64>,
    #[arg(long, default_value_t = 100.0)]
    pub time: f64,
    #[arg(long, default_value_t = 1.0)]
    pub interval: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModesArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Equilibrium configuration (default: the origin).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub q_eq: Vec<f64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Parse `name=value` into a parameter: a number, a JSON matrix, or else an expression.
pub fn parse_param(text: &str) -> Result<(String, ParamValue)> {
    let (name, value) = text
        .split_once('=')
        .ok_or_else(|| Error::InvalidConfig(format!("parameter `{text}` is not NAME=VALUE")))?;
    let value = value.trim();
    let parsed = if let Ok(x) = value.parse::<f64>() {
        ParamValue::Number(x)
    } else if value.starts_with('[') {
        ParamValue::Matrix(serde_json::from_str(value)?)
    } else {
        ParamValue::Expr(value.to_string())
    };
    Ok((name.trim().to_string(), parsed))
}

impl SystemArgs {
    fn spec(&self) -> Result<SystemSpec> {
        let params = self.params.iter().map(|p| parse_param(p)).collect::<Result<Params>>()?;
        Ok(SystemSpec { builtin: self.system.clone(), lagrangian: self.lagrangian.clone(), dim: self.dim, params })
    }

    fn label(&self) -> String {
        self.system.clone().or_else(|| self.lagrangian.clone()).unwrap_or_default()
    }

    fn build(&self) -> Result<LagrangianModel> {
        let spec = self.spec()?;
        if spec.builtin.is_none() && spec.lagrangian.is_none() {
            return Err(Error::InvalidConfig("give --system or --lagrangian".into()));
        }
        spec.build_model()
    }
}

fn emit_json<T: Serialize>(value: &T, path: Option<&PathBuf>, to_stdout: bool) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    if let Some(p) = path {
        std::fs::write(p, &text)?;
    }
    if to_stdout {
        std::io::stdout().write_all(text.as_bytes())?;
    }
    Ok(())
}

fn print_verify(r: &VerifyReport) {
    println!("{} ({} samples, seed {})", r.system, r.n_samples, r.seed);
    for c in &r.checks {
        let verdict = if c.passed { "ok" } else { "FAIL" };
        println!("  {:<18} {:>12.3e}  <= {:<8.0e} {verdict}", c.name, c.max_violation, c.threshold);
    }
}

fn cmd_verify(args: &VerifyArgs, seed: u64) -> Result<i32> {
    let targets: Vec<(String, LagrangianModel)> = if args.all {
        list_systems()
            .iter()
            .map(|info| Ok((info.name.to_string(), crate::systems::make_builtin(info.name, &example_params(info.name))?)))
            .collect::<Result<_>>()?
    } else {
        vec![(args.system.label(), args.system.build()?)]
    };
    let thresholds = Thresholds::default();
    let reports = targets
        .iter()
        .map(|(name, model)| {
            if args.negate_gamma {
                verify_with(model, name, args.samples, seed, &thresholds, &NegatedGamma)
            } else {
                verify_with(model, name, args.samples, seed, &thresholds, &Prolonged)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    if !args.json {
        reports.iter().for_each(print_verify);
    }
    if args.all {
        emit_json(&reports, args.report.as_ref(), args.json)?;
    } else {
        emit_json(&reports[0], args.report.as_ref(), args.json)?;
    }
    for r in reports.iter().filter(|r| !r.all_passed) {
        for c in r.checks.iter().filter(|c| !c.passed) {
            eprintln!("error: {}: {} violated ({:e} > {:e})", r.system, c.name, c.max_violation, c.threshold);
        }
    }
    Ok(if reports.iter().all(|r| r.all_passed) { EXIT_OK } else { EXIT_ERROR })
}

fn cmd_run(paths: &[PathBuf]) -> i32 {
    let codes: Vec<i32> = paths
        .par_iter()
        .map(|path| match run_scenario(path) {
            Ok(report) => {
                println!("{}: {} samples, {} steps", path.display(), report.samples, report.stats.accepted);
                for e in &report.drift.entries {
                    let verdict = if e.passed { "ok" } else { "EXCEEDED" };
                    println!("  {:<10} max drift {:>10.3e} {verdict}", e.name, e.max_abs_drift);
                }
                report.exit_code()
            }
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                EXIT_ERROR
            }
        })
        .collect();
    if codes.contains(&EXIT_ERROR) {
        EXIT_ERROR
    } else {
        codes.into_iter().max().unwrap_or(EXIT_OK)
    }
}

fn cmd_lyapunov(args: &LyapunovArgs) -> Result<i32> {
    let (model, s0) = match &args.scenario {
        Some(path) => {
            let sc = Scenario::load(path)?;
            let s0 = PhaseState::new(sc.initial.q.clone(), sc.initial.qd.clone(), sc.integrator.t_start);
            (sc.build_model()?, s0)
        }
        None => (args.system.build()?, PhaseState::new(args.q.clone(), args.qd.clone(), 0.0)),
    };
    let cfg = LyapunovConfig { total_time: args.time, renorm_interval: args.interval, tol: args.tol };
    let result = lyapunov_spectrum(&model, &s0, &cfg)?;
    let line: Vec<String> = result.exponents.iter().map(|l| format!("{l:.6}")).collect();
    println!("exponents: {}", line.join(" "));
    if !result.plateaued {
        println!("warning: estimates have not plateaued; increase --time");
    }
    emit_json(&result, args.output.as_ref(), false)?;
    Ok(EXIT_OK)
}

fn cmd_modes(args: &ModesArgs) -> Result<i32> {
    let model = args.system.build()?;
    let q_eq = if args.q_eq.is_empty() { vec![0.0; model.dim()] } else { args.q_eq.clone() };
    let modes = small_oscillations(&model, &q_eq)?;
    for m in &modes.modes {
        match (m.frequency, m.growth_rate) {
            (Some(w), _) => println!("omega = {w:.10}  shape {:?}", m.shape),
            (_, Some(g)) => println!("unstable, growth rate {g:.10}  shape {:?}", m.shape),
            _ => {}
        }
    }
    emit_json(&modes, args.output.as_ref(), false)?;
    Ok(EXIT_OK)
}

fn cmd_systems(json: bool) -> Result<i32> {
    if json {
        emit_json(&list_systems(), None, true)?;
        return Ok(EXIT_OK);
    }
    for info in list_systems() {
        let n = info.dim.map_or("n".to_string(), |n| n.to_string());
        println!("{:<22} N={:<2} {:<40} {}", info.name, n, info.params, info.family);
    }
    Ok(EXIT_OK)
}

/// Run a parsed command line and return the exit code.
pub fn run(cli: &Cli) -> i32 {
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already configured: {e}");
        }
    }
    let outcome = match &cli.command {
        Command::Run { scenarios } => Ok(cmd_run(scenarios)),
        Command::Verify(args) => cmd_verify(args, cli.seed),
        Command::Lyapunov(args) => cmd_lyapunov(args),
        Command::Modes(args) => cmd_modes(args),
        Command::Systems { action: SystemsAction::List { json } } => cmd_systems(*json),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        EXIT_ERROR
    })
}

pub fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    std::process::ExitCode::from(run(&cli) as u8)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params() {
        assert!(matches!(parse_param("k=2.5").unwrap().1, ParamValue::Number(x) if x == 2.5));
        assert!(matches!(parse_param("mass=[[1,0],[0,2]]").unwrap().1, ParamValue::Matrix(_)));
        assert!(matches!(parse_param("potential=0.5*q1^2").unwrap().1, ParamValue::Expr(_)));
        assert!(parse_param("oops").is_err());
    }

    #[test]
    fn command_line_shapes() {
        Cli::try_parse_from(["dalembert", "--seed", "3", "verify", "--system", "pendulum", "--samples", "10"]).unwrap();
        Cli::try_parse_from(["dalembert", "systems", "list"]).unwrap();
        Cli::try_parse_from(["dalembert", "lyapunov", "--system", "inverted_oscillator", "--q", "0.1", "--qd", "-0.2"]).unwrap();
        assert!(Cli::try_parse_from(["dalembert", "run"]).is_err());
    }
}
