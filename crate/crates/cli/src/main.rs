use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lsppair::{figures, runner, CliError, FigureId, FigureOverrides, ResultTable, RunOverrides};

/// Bidirectional LSP pair selection experiments.
#[derive(Parser)]
#[command(name = "lsppair", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Master seed; replication i uses seed + i.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Replications per estimate.
    #[arg(long, global = true)]
    replications: Option<u64>,
    /// Write the result table here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for replications (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every policy of a scenario file.
    Run { scenario: PathBuf },
    /// Reproduce one of the evaluation figures.
    Figure {
        id: FigureId,
        /// Mean inter-arrival time r (fig4: a single load point).
        #[arg(long)]
        interarrival: Option<f64>,
        /// Requests per replication, warm-up included.
        #[arg(long)]
        requests: Option<u64>,
    },
    /// Run a scenario file once per value of one parameter.
    Sweep {
        scenario: PathBuf,
        /// Dotted path into the scenario file, e.g. traffic.mean_interarrival.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Convert a result table to gnuplot data blocks (one per policy).
    Gnuplot { table: PathBuf },
}

fn execute(cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.global.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let run_ov = RunOverrides {
        master_seed: cli.global.seed,
        replications: cli.global.replications,
    };
    let table = match cli.command {
        Command::Run { scenario } => runner::run_scenario(&scenario, &run_ov)?,
        Command::Figure {
            id,
            interarrival,
            requests,
        } => {
            let ov = FigureOverrides {
                mean_interarrival: interarrival,
                total_requests: requests,
                replications: cli.global.replications,
                master_seed: cli.global.seed,
            };
            eprintln!("running {} ...", id.name());
            figures::run_figure(id, &ov)?
        }
        Command::Sweep {
            scenario,
            param,
            values,
        } => runner::sweep(&scenario, &param, &values, &run_ov)?,
        Command::Gnuplot { table } => {
            let file = File::open(&table).map_err(|source| CliError::Io {
                path: table.display().to_string(),
                source,
            })?;
            let text = ResultTable::read_from(file)?.gnuplot();
            return emit(cli.global.out, text.as_bytes());
        }
    };
    match cli.global.out {
        Some(path) => {
            emit(Some(path), table.to_csv_string().as_bytes())?;
            print!("{}", table.summary());
            Ok(())
        }
        None => emit(None, table.to_csv_string().as_bytes()),
    }
}

fn emit(path: Option<PathBuf>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(&p, bytes).map_err(|source| CliError::Io {
            path: p.display().to_string(),
            source,
        }),
        None => io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::Runtime(e.to_string())),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
