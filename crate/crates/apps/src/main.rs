use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{ArgAction, Args, Parser, Subcommand};
use stormkit_apps::config::{Config, DEFAULT_MESSAGES, DEFAULT_TICKS};
use stormkit_apps::forks::{run_forks, ForksOptions};
use stormkit_apps::queens::{run_queens, QueensOptions};
use stormkit_apps::RunReport;
use stormkit_core::comms::{router_address, Router, RouterServer};
use stormkit_core::trace::TraceLine;

#[derive(Parser)]
#[command(name = "stormkit", version, about = "Run the sample multi-agent systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Forklifts shelving boxes.
    Forks {
        #[command(subcommand)]
        action: RunOnly,
    },
    /// N-Queens by conversing agents.
    Queens {
        #[command(subcommand)]
        action: QueensAction,
    },
    /// The message router.
    Router {
        #[command(subcommand)]
        action: RouterAction,
    },
    /// Trace files.
    Trace {
        #[command(subcommand)]
        action: TraceAction,
    },
}

#[derive(Subcommand)]
enum RunOnly {
    Run(RunArgs),
}

#[derive(Subcommand)]
enum QueensAction {
    Run {
        /// Board size; overrides the config.
        #[arg(long)]
        n: Option<usize>,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Subcommand)]
enum RouterAction {
    Serve {
        /// Listen address; defaults to $STORMKIT_ROUTER or 127.0.0.1:7040.
        #[arg(long)]
        addr: Option<String>,
    },
}

#[derive(Subcommand)]
enum TraceAction {
    Show {
        path: PathBuf,
        #[arg(long)]
        agent: Option<String>,
        #[arg(long)]
        kind: Option<String>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Maximum scheduler rounds.
    #[arg(long)]
    ticks: Option<u64>,
    /// Maximum routed messages.
    #[arg(long)]
    messages: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the event trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Run under the seeded round-robin scheduler; `false` runs free.
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    deterministic: bool,
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("stormkit: {msg}");
    ExitCode::from(1)
}

fn finish(report: &RunReport, trace: Option<&Path>) -> ExitCode {
    if let Some(path) = trace {
        if let Err(e) = std::fs::write(path, &report.trace) {
            return fail(format!("writing {}: {e}", path.display()));
        }
    }
    println!("{}", report.summary());
    ExitCode::from(report.outcome.exit_code() as u8)
}

fn load(path: Option<&Path>, fallback: impl FnOnce() -> Config) -> Result<Config, String> {
    match path {
        Some(p) => Config::load(p).map_err(|e| e.to_string()),
        None => Ok(fallback()),
    }
}

fn forks(args: RunArgs) -> ExitCode {
    let cfg = match load(args.config.as_deref(), Config::default_forks) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let scenario = match cfg.forks_scenario() {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    if !args.deterministic {
        eprintln!("stormkit: forks always runs under the seeded scheduler");
    }
    let opts = ForksOptions { seed: args.seed.or(cfg.seed).unwrap_or(1), max_ticks: args.ticks.or(cfg.ticks).unwrap_or(DEFAULT_TICKS) };
    match run_forks(&scenario, &opts) {
        Ok(run) => {
            println!("{}", run.world);
            finish(&run.report, args.trace.as_deref())
        }
        Err(e) => fail(e),
    }
}

fn queens(n: Option<usize>, args: RunArgs) -> ExitCode {
    let cfg = match load(args.config.as_deref(), Config::default) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let Some(n) = n.or(cfg.queens.as_ref().map(|q| q.n)) else {
        return fail("board size missing: pass --n or set [queens] n");
    };
    if n == 0 {
        return fail("board size must be at least 1");
    }
    let mut opts = QueensOptions::new(n, args.seed.or(cfg.seed).unwrap_or(1));
    opts.max_messages = args.messages.or(cfg.messages).unwrap_or(DEFAULT_MESSAGES);
    if let Some(t) = args.ticks.or(cfg.ticks) {
        opts.max_ticks = t;
    }
    opts.deterministic = args.deterministic;
    match run_queens(&opts) {
        Ok(run) => finish(&run.report, args.trace.as_deref()),
        Err(e) => fail(e),
    }
}

fn serve(addr: Option<String>) -> ExitCode {
    let addr = addr.unwrap_or_else(router_address);
    match RouterServer::bind(addr.as_str(), Router::new()) {
        Ok(server) => {
            println!("router listening on {}", server.local_addr());
            loop {
                std::thread::sleep(Duration::from_secs(3600));
            }
        }
        Err(e) => fail(e),
    }
}

fn show(path: &Path, agent: Option<&str>, kind: Option<&str>) -> ExitCode {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return fail(format!("reading {}: {e}", path.display())),
    };
    for (i, line) in text.lines().enumerate() {
        let Some(l) = TraceLine::parse(line) else {
            return fail(format!("{}:{}: not a trace line", path.display(), i + 1));
        };
        if agent.is_some_and(|a| a != l.agent) || kind.is_some_and(|k| k != l.kind) {
            continue;
        }
        println!("{l}");
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Forks { action: RunOnly::Run(args) } => forks(args),
        Command::Queens { action: QueensAction::Run { n, run } } => queens(n, run),
        Command::Router { action: RouterAction::Serve { addr } } => serve(addr),
        Command::Trace { action: TraceAction::Show { path, agent, kind } } => show(&path, agent.as_deref(), kind.as_deref()),
    }
}
