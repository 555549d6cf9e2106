//! Command-line front end: scenario runner, catalog browser, and the
//! built-in verification suite.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use confgeo::{acceptance, cli};

#[derive(Parser)]
#[command(name = "confgeo", version, about = "Extrinsic conformal geometry engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file (or a catalog entry by name) and write
    /// report.json plus CSV traces.
    Run {
        /// Path to a scenario TOML file, or a catalog entry name.
        scenario: String,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the scenario tolerance.
        #[arg(long)]
        tol: Option<f64>,
        /// Output directory for report.json and trace_*.csv.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// List the built-in scenarios, or print one as TOML.
    Catalog {
        /// Entry name; omit to list all entries.
        name: Option<String>,
    },
    /// Run the full verification suite (one PASS/FAIL line per
    /// criterion).
    Selftest,
}

fn run(scenario: String, seed: Option<u64>, tol: Option<f64>, out: PathBuf) -> ExitCode {
    let mut scenario = match cli::load_scenario(&scenario) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(cli::exit_code(&e) as u8);
        }
    };
    if let Some(seed) = seed {
        scenario.seed = Some(seed);
    }
    if let Some(tol) = tol {
        scenario.tolerance = tol;
    }
    match cli::run_scenario(&scenario, Some(&out)) {
        Ok(report) => {
            for task in &report.tasks {
                let verdict = task
                    .verdict
                    .as_deref()
                    .map(|v| format!(" [{v}]"))
                    .unwrap_or_default();
                println!(
                    "{}  {}{}",
                    if task.passed { "PASS" } else { "FAIL" },
                    task.task,
                    verdict
                );
                for (key, value) in &task.residuals {
                    println!("        {key}: {value:.3e}");
                }
            }
            println!(
                "report written to {}",
                out.join("report.json").display()
            );
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}

fn catalog(name: Option<String>) -> ExitCode {
    match name {
        None => {
            for entry in cli::catalog_names() {
                println!("{entry}");
            }
            ExitCode::SUCCESS
        }
        Some(name) => match cli::catalog(&name) {
            Ok(scenario) => {
                print!("{}", scenario.canonical_toml());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(cli::exit_code(&e) as u8)
            }
        },
    }
}

fn selftest() -> ExitCode {
    let results = acceptance::run_all();
    let all = acceptance::print_lines(std::io::stdout().lock(), &results);
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            scenario,
            seed,
            tol,
            out,
        } => run(scenario, seed, tol, out),
        Command::Catalog { name } => catalog(name),
        Command::Selftest => selftest(),
    }
}
