use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use tradenet::cli::{self, ConfigFile, Method, Overrides, RunConfig};
use tradenet::error::Result;

#[derive(Parser)]
#[command(
    name = "tradenet",
    about = "GDP-driven maximum-entropy modeling of the international trade network",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse flow and GDP CSVs into yearly snapshot files
    Ingest(CommonArgs),
    /// Fit the per-country field parameters for each ingested year
    Fit(CommonArgs),
    /// Sample the fitted ensemble (exactly and/or with a Metropolis chain)
    Simulate(CommonArgs),
    /// Produce strength fits, flow clouds, volume histograms and
    /// fluctuation-response tables
    Analyze(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Declarative TOML run configuration; flags below override it
    #[arg(long)]
    config: Option<PathBuf>,

    /// Years to process: inclusive range `a..b` or comma list
    #[arg(long)]
    years: Option<String>,

    /// Base seed for all random streams
    #[arg(long)]
    seed: Option<u64>,

    /// Sampling method
    #[arg(long, value_enum)]
    method: Option<Method>,

    /// Output directory holding all stage files
    #[arg(long)]
    output: Option<PathBuf>,

    /// Bilateral flows CSV (year,exporter,importer,export_musd,import_musd)
    #[arg(long)]
    flows: Option<PathBuf>,

    /// GDP CSV (year,country,gdp_pc_usd,population)
    #[arg(long)]
    gdp: Option<PathBuf>,

    /// Number of sample files to write per year
    #[arg(long)]
    samples: Option<usize>,
}

impl CommonArgs {
    fn resolve(self) -> Result<RunConfig> {
        let file = match &self.config {
            Some(path) => Some(ConfigFile::load(path)?),
            None => None,
        };
        RunConfig::resolve(
            file,
            Overrides {
                flows: self.flows,
                gdp: self.gdp,
                years: self.years,
                output: self.output,
                seed: self.seed,
                samples: self.samples,
                method: self.method,
            },
        )
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(args) => cli::cmd_ingest(&args.resolve()?),
        Command::Fit(args) => cli::cmd_fit(&args.resolve()?),
        Command::Simulate(args) => cli::cmd_simulate(&args.resolve()?),
        Command::Analyze(args) => cli::cmd_analyze(&args.resolve()?),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
