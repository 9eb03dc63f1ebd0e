use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use prism_core::workspace::{self, exit_code, Workspace};
use prism_core::Error;

/// Forced-choice authority-stack audits.
#[derive(Parser)]
#[command(name = "prism", version)]
struct Cli {
    /// Audit workspace directory.
    #[arg(long, global = true, default_value = ".")]
    workspace: PathBuf,
    /// Config file for the subcommand (bank, run or analysis config).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Replace existing artifacts.
    #[arg(long, global = true)]
    force: bool,
    /// Worker threads; 1 runs sequentially.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the scenario bank.
    Bank,
    /// Present the bank to the respondent named in --config.
    Run,
    /// Compute the profile from a completed campaign.
    Metrics {
        #[arg(long)]
        respondent: String,
    },
    /// Score held-out free-form fixtures against a profile.
    Predict {
        #[arg(long)]
        respondent: String,
        #[arg(long)]
        fixtures: PathBuf,
    },
    /// Write report.txt and report.json for a profile.
    Report {
        #[arg(long)]
        respondent: String,
    },
    /// Generate held-out fixtures labelled by a simulated agent.
    Fixtures {
        /// Agent spec, or a run config with an [agent] section.
        #[arg(long)]
        agent: PathBuf,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<String, Error> {
    let ws = Workspace::new(&cli.workspace);
    if let Command::Fixtures { agent, count, seed, out } = &cli.command {
        return workspace::cmd_fixtures(agent, *count, *seed, out);
    }
    let _lock = ws.lock()?;
    let config = cli.config.as_deref();
    match &cli.command {
        Command::Bank => workspace::cmd_bank(&ws, config, cli.force),
        Command::Run => {
            let config = config.ok_or_else(|| Error::Config("run needs --config <run config>".into()))?;
            workspace::cmd_run(&ws, config, cli.threads)
        }
        Command::Metrics { respondent } => workspace::cmd_metrics(&ws, respondent, config, cli.threads),
        Command::Predict { respondent, fixtures } => workspace::cmd_predict(&ws, respondent, fixtures),
        Command::Report { respondent } => workspace::cmd_report(&ws, respondent),
        Command::Fixtures { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Incomplete { missing } = &e {
                for m in missing.iter().take(20) {
                    eprintln!("  {m}");
                }
                if missing.len() > 20 {
                    eprintln!("  ... and {} more", missing.len() - 20);
                }
            }
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
