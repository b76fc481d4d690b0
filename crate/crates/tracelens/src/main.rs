use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use log::{error, info};
use tracelens::analyze::{self, TabulateOptions};
use tracelens::core::analysis::{DEFAULT_LEVEL, DEFAULT_RESAMPLES};
use tracelens::core::domain::{Condition, Task};
use tracelens::core::gen::{generate_politicians, MoviesGenSpec, PoliticsGenSpec};
use tracelens::core::session::Datasets;
use tracelens::format::{self, DatasetDir};
use tracelens::service::Service;
use tracelens::{server, Error};

#[derive(Parser)]
#[command(name = "tracelens", version, about = "Interaction-trace study toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a task dataset (CSV plus schema JSON).
    Gen {
        #[command(subcommand)]
        which: GenCommand,
    },
    /// Replay and tabulate session logs.
    Analyze {
        #[command(subcommand)]
        which: AnalyzeCommand,
    },
    /// Run the WebSocket session service.
    Serve(ServeArgs),
}

#[derive(Subcommand)]
enum GenCommand {
    Politics {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    Movies {
        /// Raw movies CSV to sample from.
        #[arg(long)]
        source: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Rebuild metric snapshots and per-task summaries from one log.
    Replay {
        log: PathBuf,
        #[arg(long, env = "TRACELENS_DATASETS", default_value = "datasets")]
        datasets: PathBuf,
    },
    /// Per-condition means with bootstrap confidence intervals.
    Tabulate {
        /// Glob matching session logs, e.g. 'sessions/*.jsonl'.
        #[arg(long)]
        sessions: String,
        /// `all` or a comma list of measures or measure prefixes.
        #[arg(long, default_value = "all")]
        measure: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, env = "TRACELENS_DATASETS", default_value = "datasets")]
        datasets: PathBuf,
        #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
        resamples: usize,
        #[arg(long, default_value_t = DEFAULT_LEVEL)]
        level: f64,
    },
}

#[derive(clap::Args)]
struct ServeArgs {
    #[arg(long, env = "TRACELENS_PORT", default_value_t = 8080)]
    port: u16,
    #[arg(long, env = "TRACELENS_HOST", default_value = "127.0.0.1")]
    host: String,
    #[arg(long, env = "TRACELENS_DATASETS", default_value = "datasets")]
    datasets: PathBuf,
    #[arg(long, env = "TRACELENS_SESSIONS", default_value = "sessions")]
    sessions: PathBuf,
    /// Assign every new session this condition instead of rotating.
    #[arg(long, env = "TRACELENS_CONDITION")]
    condition: Option<Condition>,
    /// Seed for the politics dataset when the dataset directory has none.
    #[arg(long, env = "TRACELENS_SEED", default_value_t = 42)]
    seed: u64,
    #[arg(long, env = "TRACELENS_POLITICS")]
    politics: Option<String>,
    #[arg(long, env = "TRACELENS_MOVIES")]
    movies: Option<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen { which } => run_gen(which),
        Command::Analyze { which } => run_analyze(which),
        Command::Serve(args) => run_serve(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            error!("{e}");
            exit_for(&e)
        }
    }
}

fn exit_for(e: &Error) -> ExitCode {
    if e.is_parse() || matches!(e, Error::Replay { .. }) {
        ExitCode::from(2)
    } else {
        ExitCode::FAILURE
    }
}

fn run_gen(which: GenCommand) -> tracelens::Result<ExitCode> {
    let (dataset, out) = match which {
        GenCommand::Politics { seed, out } => (generate_politicians(&PoliticsGenSpec::default(), seed)?, out),
        GenCommand::Movies { source, seed, out } => {
            let spec = MoviesGenSpec {
                source_path: source.to_string_lossy().into_owned(),
                ..MoviesGenSpec::default()
            };
            (format::generate_movies(&spec, seed)?, out)
        }
    };
    let (csv, schema) = format::write_dataset(&dataset, &out)?;
    info!("wrote {} and {}", csv.display(), schema.display());
    Ok(ExitCode::SUCCESS)
}

fn run_analyze(which: AnalyzeCommand) -> tracelens::Result<ExitCode> {
    match which {
        AnalyzeCommand::Replay { log, datasets } => {
            let datasets = DatasetDir::load(&datasets)?;
            let (replay, failure) = analyze::replay_log_lenient(&log, &datasets)?;
            println!("{}", analyze::replay_json(&log, &replay));
            match failure {
                None => Ok(ExitCode::SUCCESS),
                Some(e) => {
                    error!("{e}");
                    Ok(exit_for(&e))
                }
            }
        }
        AnalyzeCommand::Tabulate {
            sessions,
            measure,
            seed,
            out,
            datasets,
            resamples,
            level,
        } => {
            let datasets = DatasetDir::load(&datasets)?;
            let opts = TabulateOptions {
                sessions,
                measure,
                seed,
                resamples,
                level,
                out,
            };
            let result = analyze::tabulate(&opts, &datasets)?;
            info!("tabulated {} session logs", result.sessions);
            for f in &result.files {
                println!("{}", f.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn load_or_generate_politics(
    dir: &Path,
    datasets: &mut DatasetDir,
    seed: u64,
    id: Option<&str>,
) -> tracelens::Result<()> {
    if id.is_none() && datasets.for_task(Task::Politics, None).is_err() {
        let d = generate_politicians(&PoliticsGenSpec::default(), seed)?;
        format::write_dataset(&d, dir)?;
        info!("generated politics dataset {} in {}", d.id, dir.display());
        datasets.insert(d);
    }
    Ok(())
}

fn run_serve(args: ServeArgs) -> tracelens::Result<ExitCode> {
    let mut dir = DatasetDir::load(&args.datasets)?;
    load_or_generate_politics(&args.datasets, &mut dir, args.seed, args.politics.as_deref())?;
    let datasets = Datasets {
        politics: dir.for_task(Task::Politics, args.politics.as_deref())?,
        movies: dir
            .for_task(Task::Movies, args.movies.as_deref())
            .map_err(|e| match e {
                Error::Unavailable(m) => Error::Unavailable(format!("{m}; create one with `tracelens gen movies`")),
                e => e,
            })?,
    };
    let service = Service::open(&args.sessions, datasets, args.condition)?;
    let addr = format!("{}:{}", args.host, args.port);
    let listener = TcpListener::bind(&addr).map_err(Error::io(&addr))?;
    server::serve(Arc::new(service), listener).map_err(Error::io(&addr))?;
    Ok(ExitCode::SUCCESS)
}
