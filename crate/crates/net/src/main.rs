use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gputel_core::ChallengeKind;
use gputel_net::challenger::run_challenger;
use gputel_net::config::{load_toml, ChallengerConfig, WorkerConfig};
use gputel_net::scenario::{run_scenarios, summary_exit_code, ScenarioFile};
use gputel_net::worker::WorkerServer;
use gputel_net::CliError;

#[derive(Parser)]
#[command(name = "gputel", version, about = "Challenge-response compute telemetry")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Issue challenges to a worker and judge its responses.
    Challenger {
        #[command(subcommand)]
        action: ChallengerCmd,
    },
    /// Serve challenges from a simulated device.
    Worker {
        #[command(subcommand)]
        action: WorkerCmd,
    },
    /// Run named simulation scenarios.
    Scenario {
        #[command(subcommand)]
        action: ScenarioCmd,
    },
}

#[derive(Subcommand)]
enum ChallengerCmd {
    Run {
        #[arg(long, value_parser = parse_kind)]
        mode: ChallengeKind,
        #[arg(long)]
        config: PathBuf,
        /// JSON report path; rows go to the same path with a `.csv` extension.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum WorkerCmd {
    Serve {
        #[arg(long)]
        listen: String,
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum ScenarioCmd {
    Run {
        #[arg(long)]
        file: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_kind(s: &str) -> Result<ChallengeKind, String> {
    s.parse().map_err(|e: gputel_core::Error| e.to_string())
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Challenger {
            action: ChallengerCmd::Run { mode, config, out, seed },
        } => {
            let cfg: ChallengerConfig = load_toml(&config)?;
            let report = run_challenger(&cfg, mode, seed)?;
            report.write(&out)?;
            println!("{}", report.verdict_line());
            if let Some(reason) = &report.aborted {
                eprintln!("session aborted: {reason}");
            }
            Ok(report.exit_code())
        }
        Command::Worker {
            action: WorkerCmd::Serve { listen, profile, seed },
        } => {
            let cfg: WorkerConfig = match profile {
                Some(p) => load_toml(&p)?,
                None => WorkerConfig::default(),
            };
            let server = WorkerServer::bind(&listen, cfg, seed)?;
            println!("listening on {}", server.local_addr()?);
            server.serve()?;
            Ok(0)
        }
        Command::Scenario {
            action: ScenarioCmd::Run { file, out, seed },
        } => {
            let spec: ScenarioFile = load_toml(&file)?;
            let summary = run_scenarios(&spec, &out, seed)?;
            for row in &summary {
                let mark = if row.passed { "pass" } else { "FAIL" };
                println!("{mark} {} {} = {} ({})", row.scenario, row.flag, row.value, row.criterion);
            }
            println!("{} flags, summary in {}", summary.len(), out.join("summary.csv").display());
            Ok(summary_exit_code(&summary))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
