use std::error::Error;
use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use labelforge_server::{batch, router, AppState, DEFAULT_DEBOUNCE};

#[derive(Parser)]
#[command(name = "labelforge", version, about = "Labeling-function synthesis server and batch tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Replay an event log and write the metrics report.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        corpus_dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Retrain the end model of a project directory and print its metrics.
    Eval {
        #[arg(long)]
        project: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn emit(json: String, out: Option<PathBuf>) -> Result<(), Box<dyn Error>> {
    match out {
        Some(path) => std::fs::write(path, json + "\n")?,
        None => println!("{json}"),
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Serve { data_dir, port, host } => {
            let state = AppState::open(data_dir, DEFAULT_DEBOUNCE)?;
            let addr: SocketAddr = format!("{host}:{port}").parse()?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                log::info!("listening on http://{addr}");
                axum::serve(listener, router(state)).await
            })?;
        }
        Command::Replay { log, corpus_dir, out } => {
            let (_, report) = batch::replay(&log, &corpus_dir)?;
            emit(serde_json::to_string_pretty(&report)?, out)?;
        }
        Command::Eval { project, seed } => {
            let report = batch::eval(&project, seed)?;
            emit(serde_json::to_string_pretty(&report)?, None)?;
        }
    }
    Ok(())
}
