use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use conseq_cli::commands::{cmd_analyze, cmd_recommend, cmd_simulate, cmd_validate_catalog, AnalyzeArgs, RecommendArgs};
use conseq_cli::report::Format;
use conseq_cli::{CliError, Shift, SimulationConfig, EXIT_INVALID};
use conseq_core::catalog::DomainId;
use conseq_core::consequence::ExplanationVariant;
use conseq_core::study::{Outcome, StudyContext};
use conseq_service::ServiceConfig;

#[derive(Parser)]
#[command(name = "conseq", version, about = "Consequence-based explanations and study tooling")]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Recommend the best item for a profile and explain it.
    Recommend {
        #[arg(long, value_parser = parse::<DomainId>)]
        domain: DomainId,
        /// Preference profile JSON.
        #[arg(long)]
        prefs: PathBuf,
        /// JSON object of preference id to weight.
        #[arg(long)]
        weights: Option<PathBuf>,
        /// motivating, avoiding or content.
        #[arg(long, value_parser = parse::<ExplanationVariant>)]
        variant: ExplanationVariant,
    },
    /// Write a seeded, protocol-valid event log of simulated sessions.
    Simulate {
        #[arg(long)]
        sessions: usize,
        #[arg(long)]
        seed: u64,
        /// variant:outcome:delta, repeatable.
        #[arg(long, value_parser = parse::<Shift>)]
        shift: Vec<Shift>,
        /// Share of sessions in the recipe domain.
        #[arg(long, default_value_t = 0.5)]
        recipe_share: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the nonparametric analysis on an event log.
    Analyze {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_parser = parse::<Outcome>)]
        outcome: Outcome,
        /// Comma-separated grouping keys.
        #[arg(long, value_delimiter = ',', required = true)]
        group_by: Vec<String>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// md, csv or json.
        #[arg(long, default_value = "md", value_parser = parse::<Format>)]
        format: Format,
    },
    /// Check a catalog file against a domain schema.
    ValidateCatalog {
        #[arg(long, value_parser = parse::<DomainId>)]
        domain: DomainId,
        #[arg(long)]
        file: PathBuf,
    },
    /// Run the HTTP service. Settings come from CONSEQ_* variables unless given here.
    Serve {
        #[arg(long)]
        listen: Option<SocketAddr>,
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| e.to_string())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = StudyContext::builtin();
    match cli.command {
        Command::Recommend { domain, prefs, weights, variant } => {
            print!("{}", cmd_recommend(&RecommendArgs { domain, prefs, weights, variant }, &ctx)?);
        }
        Command::Simulate { sessions, seed, shift, recipe_share, out } => {
            let mut cfg = SimulationConfig::new(sessions, seed);
            cfg.recipe_share = recipe_share;
            cfg = shift.into_iter().fold(cfg, SimulationConfig::with_shift);
            eprint!("{}", cmd_simulate(&cfg, &out, &ctx)?);
        }
        Command::Analyze { input, outcome, group_by, alpha, format } => {
            let out = cmd_analyze(&AnalyzeArgs { input, outcome, group_by, alpha, format }, &ctx)?;
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", out.text);
        }
        Command::ValidateCatalog { domain, file } => print!("{}", cmd_validate_catalog(domain, &file, &ctx)?),
        Command::Serve { listen, data } => {
            let mut cfg = ServiceConfig::from_env().map_err(|e| CliError::Invalid(e.to_string()))?;
            cfg.listen = listen.unwrap_or(cfg.listen);
            cfg.data_file = data.unwrap_or(cfg.data_file);
            let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Invalid(e.to_string()))?;
            runtime.block_on(conseq_service::serve(cfg))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose || matches!(cli.command, Command::Serve { .. }) {
        tracing::Level::INFO
    } else {
        tracing::Level::WARN
    };
    tracing_subscriber::fmt().with_max_level(level).with_writer(std::io::stderr).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(u8::try_from(e.exit_code()).unwrap_or(EXIT_INVALID as u8))
        }
    }
}
