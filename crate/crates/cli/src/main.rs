use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use jcpath::scenarios::{
    execute, figure_presets, oracle_check, oracle_suite, preset, preset_source, ResultTable,
    ScenarioConfig, ScenarioError, set_threads,
};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_REGIME: u8 = 3;
const EXIT_ORACLE: u8 = 4;

/// Sweeps over the closed forms and the simulator of an atom passing through
/// two cavities in superposition.
#[derive(Parser)]
#[command(name = "jcpath", version)]
struct Cli {
    /// Worker threads for grid sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Seed for sampled measurements; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config and write its CSV.
    Run {
        config: PathBuf,
        /// Output file; defaults to output.path in the config, then stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Sample this many measurement records instead of evaluating.
        #[arg(long)]
        shots: Option<u64>,
    },
    /// Regenerate the data of a figure.
    Preset {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the preset config instead of running it.
        #[arg(long)]
        print_config: bool,
    },
    /// List the figure presets.
    ListPresets,
    /// Compare the closed forms with the simulator on the built-in grids.
    Check,
}

fn emit(table: &ResultTable, out: Option<&Path>) -> Result<(), ScenarioError> {
    match out {
        Some(path) => {
            table.write_csv(path)?;
            info!("wrote {} rows to {}", table.rows.len(), path.display());
        }
        None => print!("{}", table.to_csv()?),
    }
    Ok(())
}

fn exit_code(e: &ScenarioError) -> u8 {
    match e {
        ScenarioError::Config(_) => EXIT_CONFIG,
        ScenarioError::Regime { .. } => EXIT_REGIME,
        _ => EXIT_FAILURE,
    }
}

fn run(cli: Cli) -> Result<u8, ScenarioError> {
    match cli.command {
        Command::Run { config, out, shots } => {
            let mut cfg = ScenarioConfig::from_path(&config)?;
            if cli.seed.is_some() {
                cfg.seed = cli.seed;
            }
            if shots.is_some() {
                cfg.sampling.shots = shots;
            }
            let table = execute(&cfg)?;
            let out = out.or_else(|| cfg.output.path.as_ref().map(PathBuf::from));
            emit(&table, out.as_deref())?;
            Ok(0)
        }
        Command::Preset {
            name,
            out,
            print_config,
        } => {
            let (Some(mut cfg), Some(src)) = (preset(&name), preset_source(&name)) else {
                eprintln!("unknown preset `{name}`; see `jcpath list-presets`");
                return Ok(EXIT_CONFIG);
            };
            if print_config {
                print!("{src}");
                return Ok(0);
            }
            if cli.seed.is_some() {
                cfg.seed = cli.seed;
            }
            emit(&execute(&cfg)?, out.as_deref())?;
            Ok(0)
        }
        Command::ListPresets => {
            for (name, cfg) in figure_presets() {
                println!("{name}\t{}", cfg.kind.name());
            }
            Ok(0)
        }
        Command::Check => {
            let mut ok = true;
            for (name, cfg) in oracle_suite() {
                let report = oracle_check(&cfg)?;
                let verdict = if report.passes() { "ok" } else { "FAILED" };
                println!(
                    "{name}: {} points, max |analytic - simulated| = {:.3e} {verdict}",
                    report.table.rows.len(),
                    report.max_abs_diff
                );
                ok &= report.passes();
            }
            Ok(if ok { 0 } else { EXIT_ORACLE })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = set_threads(n) {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FAILURE);
        }
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
