use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mixlab_cli::commands::{self, Outcome};
use mixlab_cli::config::{ExperimentConfig, Format};
use mixlab_cli::error::CliError;
use mixlab_cli::output::Output;
use mixlab_cli::suite::{Suite, CRITERIA};

#[derive(Parser)]
#[command(
    name = "mixlab",
    version,
    about = "Experiments on suspension semiflows over expanding Markov maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// `csv` or `csv+svg`.
    #[arg(long, global = true)]
    format: Option<Format>,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Check the axioms of the configured model.
    Validate,
    /// Invariant density and spectral gap of the base map.
    Srb,
    /// Periodic-orbit witness search and coboundary certificate for the roof.
    Cohomology,
    /// First-return inducing and tail statistics.
    Tails,
    /// Correlation decay of the suspension flow.
    Correlate,
    /// Temporal distance on a grid of base points.
    Tdist,
    /// Solenoid geometry, domination and attractor cloud.
    Solenoid,
    /// Run the full reproduction suite.
    Repro,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Srb => "srb",
            Command::Cohomology => "cohomology",
            Command::Tails => "tails",
            Command::Correlate => "correlate",
            Command::Tdist => "tdist",
            Command::Solenoid => "solenoid",
            Command::Repro => "repro",
        }
    }
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::parse("")?,
    };
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if let Some(d) = &cli.out {
        cfg.output.dir = d.clone();
    }
    if let Some(f) = cli.format {
        cfg.output.format = f;
    }
    let prefix = cfg
        .output
        .prefix
        .clone()
        .unwrap_or_else(|| cli.command.name().to_string());
    let out = Output::new(&cfg.output.dir, &prefix, cfg.output.format)?;
    if cli.command == Command::Repro {
        let ids: Vec<u8> = CRITERIA.iter().map(|c| c.0).collect();
        let reports = Suite::new(cfg.run.seed, out).run(&ids)?;
        for r in &reports {
            let verdict = if r.passed() { "PASS" } else { "FAIL" };
            println!("{verdict} criterion {:>2} {}: {}", r.id, r.name, r.headline());
        }
        return Ok(reports.iter().all(|r| r.passed()));
    }
    let Outcome { passed, summary } = match cli.command {
        Command::Validate => commands::validate(&cfg, &out),
        Command::Srb => commands::srb(&cfg, &out),
        Command::Cohomology => commands::cohomology(&cfg, &out),
        Command::Tails => commands::tails(&cfg, &out),
        Command::Correlate => commands::correlate(&cfg, &out),
        Command::Tdist => commands::tdist(&cfg, &out),
        Command::Solenoid | Command::Repro => commands::solenoid(&cfg, &out),
    }?;
    for line in summary {
        println!("{line}");
    }
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build();
    let result = match pool {
        Ok(pool) => pool.install(|| run(&cli)),
        Err(e) => Err(CliError::Config(format!("thread pool: {e}"))),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
