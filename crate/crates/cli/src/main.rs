//! Command-line front end: run scenarios, sweep fair-vs-baseline
//! comparisons, generate grid maps, and inspect request formulas.
//!
//! Exit codes: 0 success, 1 usage error, 2 scenario/config error.

mod ab;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::error::ErrorKind;
use clap::{ArgAction, Parser, Subcommand};

use fleetfair_core::network::{generate_grid, GridSpec};
use fleetfair_core::scltl::{parse, to_dfa};
use fleetfair_core::sim::{run, Overrides, Scenario};

#[derive(Parser, Debug)]
#[command(name = "fleetfair", version, about = "Fair fleet planning for temporal-logic ride requests")]
struct Cli {
    /// Increase log verbosity (-v debug, -vv trace).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario and write its trace and summary files.
    Run(RunArgs),
    /// Paired sweep: fair planning vs the no-fairness baseline on
    /// identical request streams.
    Ab(ab::AbArgs),
    /// Generate a grid road network file.
    GenNetwork(GenNetworkArgs),
    /// Parse a formula and report its automaton.
    CheckFormula(CheckFormulaArgs),
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory for trace.csv and summary.csv.
    #[arg(long)]
    out: PathBuf,
    /// Master seed override (re-seeds fleet placement and the generator).
    #[arg(long)]
    seed: Option<u64>,
    /// Envy-freeness approximation override, in [0, 1].
    #[arg(long)]
    lambda: Option<f64>,
    /// History-correction strength override.
    #[arg(long)]
    alpha: Option<f64>,
    /// Drop-penalty override.
    #[arg(long)]
    lambda_ko: Option<f64>,
}

#[derive(clap::Args, Debug)]
struct GenNetworkArgs {
    #[arg(long)]
    rows: u32,
    #[arg(long)]
    cols: u32,
    #[arg(long, default_value_t = 1)]
    weight_min: u64,
    #[arg(long, default_value_t = 4)]
    weight_max: u64,
    /// Probability that a state carries a location proposition.
    #[arg(long, default_value_t = 1.0)]
    label_density: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output network file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args, Debug)]
struct CheckFormulaArgs {
    /// Formula text, e.g. "F (shop & F home)".
    formula: String,
    /// Also print the automaton's states and guards.
    #[arg(long)]
    export: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Ab(args) => ab::cmd_ab(args),
        Command::GenNetwork(args) => cmd_gen_network(args),
        Command::CheckFormula(args) => cmd_check_formula(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn cmd_run(args: RunArgs) -> anyhow::Result<()> {
    let scenario = Scenario::from_path(&args.scenario)
        .with_context(|| format!("loading scenario {}", args.scenario.display()))?;
    let overrides = Overrides {
        lambda: args.lambda,
        alpha: args.alpha,
        lambda_ko: args.lambda_ko,
        seed: args.seed,
        ..Default::default()
    };
    let resolved = scenario.resolve(&overrides)?;
    let trace = run(&resolved);

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let trace_path = args.out.join("trace.csv");
    let summary_path = args.out.join("summary.csv");
    std::fs::write(&trace_path, trace.export_ticks())?;
    std::fs::write(&summary_path, trace.export_summary())?;

    let (std_dev, range) = trace.utility_deviation();
    println!(
        "requests: {} arrived, {} completed, {} lost",
        trace.arrived, trace.completed, trace.unassigned_groups
    );
    println!("total cost: {}", trace.total_cost);
    println!("vacancy rate: {:.4}", trace.vacancy_rate());
    println!("utility deviation: stddev {std_dev:.3}, range {range:.3}");
    println!("wrote {} and {}", trace_path.display(), summary_path.display());
    eprintln!(
        "timings: graph build {:.3}s, assignment {:.3}s over {} batches",
        trace.timings.graph_build as f64 / 1e9,
        trace.timings.solve as f64 / 1e9,
        trace.timings.batches
    );
    Ok(())
}

fn cmd_gen_network(args: GenNetworkArgs) -> anyhow::Result<()> {
    let net = generate_grid(&GridSpec {
        rows: args.rows,
        cols: args.cols,
        weight_min: args.weight_min,
        weight_max: args.weight_max,
        label_density: args.label_density,
        seed: args.seed,
    })?;
    std::fs::write(&args.out, net.serialize())
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!("wrote {} ({net})", args.out.display());
    Ok(())
}

fn cmd_check_formula(args: CheckFormulaArgs) -> anyhow::Result<()> {
    let formula = parse(&args.formula)?;
    let dfa = to_dfa(&formula)?;
    println!("formula: {formula}");
    println!("atoms: {}", dfa.atoms().join(", "));
    println!("automaton states: {}", dfa.num_states());
    let accepting = (0..dfa.num_states() as u32)
        .filter(|&q| dfa.is_accepting(q))
        .count();
    println!("accepting states: {accepting}");
    if args.export {
        print!("{}", dfa.export_description());
    }
    Ok(())
}
