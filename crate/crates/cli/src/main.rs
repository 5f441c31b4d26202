//! `retro-wpt`: run and validate retrodirective WPT scenarios.

mod config;
mod output;
mod units;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use retro_wpt::experiments::{run_convergence_scenario, run_fairness_sweep, ErLayout, Scenario};

use crate::config::{anchor, parse_measurement, parse_override, Source};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Validation(Vec<String>),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) | CliError::Io(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn report(&self) {
        match self {
            CliError::Usage(m) => eprintln!("error: {m}"),
            CliError::Validation(list) => {
                for m in list {
                    eprintln!("{m}");
                }
            }
            CliError::Numerical(m) => eprintln!("numerical failure: {m}"),
            CliError::Io(m) => eprintln!("i/o error: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "retro-wpt", version, about = "Retrodirective massive-MIMO wireless power transfer scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write trace/sweep CSV plus summary.json.
    Run(RunArgs),
    /// Parse and check a scenario, print its resolved parameters, write nothing.
    Validate(ScenarioArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Preset name (fig2, fig3, fig4) or path to a .toml scenario or a summary.json.
    #[arg(long)]
    scenario: String,
    /// Harvest measurement: asymptotic, exact, or exact_averaged:N.
    #[arg(long, value_parser = parse_measurement)]
    mode: Option<retro_wpt::Measurement>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override any scenario field, e.g. `--set targets.common="0.2 mW"`.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_override)]
    overrides: Vec<(String, String)>,
    /// Monte-Carlo trials (sweeps).
    #[arg(long)]
    trials: Option<usize>,
    /// Iteration budget (blocks for convergence runs, updates for sweeps).
    #[arg(long)]
    iters: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Output directory.
    #[arg(long, env = "RETRO_WPT_OUT", default_value = "out")]
    out: PathBuf,
}

fn resolve(args: &ScenarioArgs) -> Result<(Scenario, Source), CliError> {
    let (mut sc, source) = config::load(&args.scenario, &args.overrides)?;
    if let Some(m) = args.mode {
        sc.measurement = m;
    }
    if let Some(s) = args.seed {
        sc.seed = s;
    }
    if let Some(t) = args.trials {
        sc.trials = t;
    }
    if let Some(n) = args.iters {
        sc.iterations = n;
    }
    let violations = sc.violations();
    if !violations.is_empty() {
        return Err(CliError::Validation(violations.iter().map(|e| anchor(&source, e)).collect()));
    }
    Ok((sc, source))
}

fn numerical(e: retro_wpt::Error) -> CliError {
    match e {
        retro_wpt::Error::DegenerateMeasurement { .. } | retro_wpt::Error::DegenerateEstimate => {
            CliError::Numerical(e.to_string())
        }
        other => CliError::Validation(vec![other.to_string()]),
    }
}

fn run(args: &RunArgs) -> Result<(), CliError> {
    let (sc, _) = resolve(&args.scenario)?;
    let files = if sc.is_sweep() {
        let grid = sc.targets.grid().map_err(numerical)?;
        let res = run_fairness_sweep(&sc, &grid).map_err(numerical)?;
        let summary = serde_json::to_string_pretty(&output::sweep_summary(&sc, &res)).unwrap();
        println!("{}: {} trials x {} targets", sc.name, res.n_trials, grid.len());
        vec![("sweep.csv", output::sweep_csv(&sc, &res)), ("summary.json", summary + "\n")]
    } else {
        let trace = run_convergence_scenario(&sc).map_err(numerical)?;
        let summary = serde_json::to_string_pretty(&output::trace_summary(&sc, &trace)).unwrap();
        println!(
            "{}: {} after {} blocks, p* = {:?} W, capped = {:?}",
            sc.name,
            if trace.converged { "converged" } else { "not converged" },
            trace.iterations.len(),
            trace.p_star.as_slice(),
            trace.capped.iter().map(|k| k + 1).collect::<Vec<_>>()
        );
        vec![("trace.csv", output::trace_csv(&sc, &trace)), ("summary.json", summary + "\n")]
    };
    output::write_all(&args.out, &files).map_err(|e| CliError::Io(format!("{}: {e}", args.out.display())))?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn validate(args: &ScenarioArgs) -> Result<(), CliError> {
    let (sc, _) = resolve(args)?;
    let p = &sc.params;
    println!("scenario            {}", sc.name);
    println!("antennas            {}", p.antennas);
    println!("transmit_power      {:e} W", p.transmit_power);
    println!("max_beacon_power    {:e} W", p.max_beacon_power);
    println!("beacon_duration     {:e} s", p.beacon_duration);
    println!("noise_psd           {:e} W/Hz", p.noise_psd);
    println!("noise_power N0/tau  {:e} W", p.noise_power());
    println!("carrier_frequency   {:e} Hz", p.carrier_frequency);
    println!("path_loss           c0 = {:e}, r0 = {} m, alpha = {}", sc.path_loss.c0, sc.path_loss.r0, sc.path_loss.alpha);
    println!("mode                {}", config::measurement_label(sc.measurement));
    println!("seed                {}", sc.seed);
    println!("iterations          {}", sc.iterations);
    match &sc.layout {
        ErLayout::Explicit { distances } => {
            let betas = sc.betas().map_err(numerical)?;
            let targets = sc.targets.resolve(distances.len()).map_err(numerical)?;
            println!("tolerance           {:e}", sc.tolerance);
            println!("er  distance_m  beta          target_w      beamed_target_w");
            for (k, ((r, b), t)) in distances.iter().zip(&betas).zip(&targets).enumerate() {
                let floor = p.efficiency(k) * p.transmit_power * b;
                println!("{:<3} {:<11} {:<13.4e} {:<13.4e} {:.4e}", k + 1, r, b, t, t - floor);
            }
        }
        ErLayout::Uniform { lo, hi, count } => {
            let grid = sc.targets.grid().map_err(numerical)?;
            println!("receivers           {count} uniform on [{lo}, {hi}] m");
            println!("trials              {}", sc.trials);
            println!(
                "target grid         {} points, {:e} .. {:e} W",
                grid.len(),
                grid.first().copied().unwrap_or(f64::NAN),
                grid.last().copied().unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Validate(args) => validate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            e.report();
            ExitCode::from(e.code())
        }
    }
}
