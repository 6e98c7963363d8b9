use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use slabnop_bench::case::{run_case, CaseSpec};
use slabnop_bench::jobs::{generate_data, inspect_model, run_train, DataConfig, TrainJob};
use slabnop_bench::output::{table_text, write_case_outputs, write_table_csv};
use slabnop_bench::paths::{default_output_dir, read_json, Paths};
use slabnop_bench::suite::{run_suite, SuiteSpec};
use slabnop_bench::{BenchError, EXIT_NOT_CONVERGED, EXIT_OK, EXIT_USAGE};

/// Slab transport solves with neural-operator preconditioning.
///
/// Exit codes: 0 converged, 1 usage or config error, 2 not converged
/// (partial results written), 3 numerical failure.
#[derive(Parser)]
#[command(name = "slabnop", version)]
struct Cli {
    /// Output directory for relative output paths [default: $SLABNOP_OUTPUT_DIR or .]
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample GRF sources and solve for their fluxes.
    GenerateData { config: PathBuf },
    /// Train a DeepONet or FNO on a dataset.
    Train {
        config: PathBuf,
        /// Continue from the model and optimizer state at the output path.
        #[arg(long)]
        resume: bool,
    },
    /// Run one case file.
    Solve { case: PathBuf },
    /// Run a suite of cases and write a comparison table.
    Benchmark {
        suite: PathBuf,
        /// Run cases concurrently.
        #[arg(long)]
        parallel: bool,
    },
    /// Print a model file's architecture and provenance.
    InspectModel { model: PathBuf },
}

fn run(cli: Cli) -> Result<u8, BenchError> {
    let out_dir = default_output_dir(cli.out_dir.as_deref());
    match cli.command {
        Command::GenerateData { config } => {
            let cfg: DataConfig = read_json(&config)?;
            let summary = generate_data(&cfg, &Paths::new(&config, out_dir))?;
            print!("{}", summary.text());
            Ok(EXIT_OK as u8)
        }
        Command::Train { config, resume } => {
            let job: TrainJob = read_json(&config)?;
            let summary = run_train(&job, &Paths::new(&config, out_dir), resume)?;
            print!("{}", summary.text());
            Ok(EXIT_OK as u8)
        }
        Command::Solve { case } => {
            let spec = CaseSpec::load(&case)?;
            let paths = Paths::new(&case, out_dir.clone());
            let run = run_case(&spec, &paths)?;
            let dir = out_dir.join(&spec.id);
            write_case_outputs(&dir, &run.problem.grid, &run.outcome.flux, &run.report)?;
            print!("{}", slabnop_bench::output::report_text(&run.report));
            println!("results: {}", dir.display());
            Ok(if run.report.converged { EXIT_OK } else { EXIT_NOT_CONVERGED } as u8)
        }
        Command::Benchmark { suite, parallel } => {
            let mut spec = SuiteSpec::load(&suite)?;
            spec.parallel |= parallel;
            let rows = run_suite(&spec, &Paths::new(&suite, out_dir.clone()));
            let stem = suite.file_stem().map_or_else(|| "benchmark".into(), |s| s.to_string_lossy().into_owned());
            let csv = out_dir.join(format!("{stem}.csv"));
            write_table_csv(&csv, &rows)?;
            let text = table_text(&rows);
            std::fs::write(out_dir.join(format!("{stem}.txt")), &text)?;
            print!("{text}");
            println!("table: {}", csv.display());
            Ok(if rows.iter().all(|r| r.is_ok()) { EXIT_OK } else { EXIT_NOT_CONVERGED } as u8)
        }
        Command::InspectModel { model } => {
            print!("{}", inspect_model(Path::new(&model))?);
            Ok(EXIT_OK as u8)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    // clap exits with 2 on bad usage, which is reserved for non-convergence.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { EXIT_OK as u8 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
