use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use almost_soliton::catalog::list_catalog;
use almost_soliton::scenario::{run_scenario, Report, Scenario, ScenarioError};
use clap::{Parser, Subcommand, ValueEnum};

const EXIT_FAIL: u8 = 1;
const EXIT_INVALID: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "soliton-lab", version, about = "Verify Ricci almost soliton identities on catalog hypersurfaces")]
struct Cli {
    /// Override the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the number of sample points.
    #[arg(long, global = true)]
    samples: Option<usize>,

    /// Tolerance override as `suite=value` or `suite.check=value`. Repeatable.
    #[arg(long = "tol", value_name = "NAME=VALUE", global = true, value_parser = parse_tol)]
    tol: Vec<(String, f64)>,

    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the scenario described by a JSON config.
    Verify { config: PathBuf },
    /// List the built-in geometries and their declared constants.
    Catalog,
    /// Run every suite on the canonical field of a catalog entry.
    Demo {
        entry: String,
        /// Hypersurface dimension.
        #[arg(long, default_value_t = 2)]
        dim: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    CsvSummary,
}

fn parse_tol(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    let value: f64 = value.trim().parse().map_err(|e| format!("bad tolerance `{value}`: {e}"))?;
    Ok((name.trim().to_string(), value))
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), u8> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| {
            eprintln!("error: cannot write {}: {e}", path.display());
            EXIT_INVALID
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn report_invalid(err: &ScenarioError) -> u8 {
    eprintln!("error: {}", match err {
        ScenarioError::Parse(_) => "cannot parse scenario",
        ScenarioError::Invalid(_) => "invalid scenario",
    });
    for issue in err.issues() {
        eprintln!("  {issue}");
    }
    EXIT_INVALID
}

fn run(cli: &Cli, mut scenario: Scenario) -> Result<u8, u8> {
    if let Some(seed) = cli.seed {
        scenario.seed = seed;
    }
    if let Some(samples) = cli.samples {
        scenario.samples = samples;
    }
    for (name, value) in &cli.tol {
        scenario.tolerance_overrides.insert(name.clone(), *value);
    }
    let start = Instant::now();
    let report: Report = run_scenario(&scenario).map_err(|e| report_invalid(&e))?;
    let text = match cli.format {
        Format::Json => report.to_json(),
        Format::CsvSummary => report.to_csv_summary(),
    };
    emit(&text, cli.out.as_ref())?;
    for suite in &report.suites {
        eprintln!("{:<13} {:?}", suite.suite.name(), suite.status);
    }
    eprintln!(
        "{} n={} seed={} samples={}: {} in {:.3} s",
        report.run.geometry,
        report.run.n,
        report.run.seed,
        report.run.samples,
        if report.pass { "pass" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );
    Ok(if report.pass { 0 } else { EXIT_FAIL })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Catalog => {
            let text = serde_json::to_string_pretty(&list_catalog()).expect("catalog serializes") + "\n";
            emit(&text, cli.out.as_ref()).map(|_| 0)
        }
        Command::Verify { config } => match std::fs::read_to_string(config) {
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", config.display());
                Err(EXIT_INVALID)
            }
            Ok(text) => match Scenario::from_json(&text) {
                Ok(s) => run(&cli, s),
                Err(e) => Err(report_invalid(&e)),
            },
        },
        Command::Demo { entry, dim } => {
            match Scenario::demo(entry, *dim, cli.seed.unwrap_or(42), cli.samples.unwrap_or(100)) {
                Ok(s) => run(&cli, s),
                Err(e) => Err(report_invalid(&e)),
            }
        }
    };
    ExitCode::from(outcome.unwrap_or_else(|code| code))
}
