//! `zk3col`: batch simulation, attacks, randomness analysis and the live service.

mod analyze;
mod attack;
mod failure;
mod logs;
mod plan;
mod simulate;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use zk3col_core::graph::planted_3colorable;
use zk3col_core::store::{load_sessions, replay, verify_chain};
use zk3col_service::{AppState, ServiceConfig};

use crate::failure::{io, Failure};

#[derive(Debug, Parser)]
#[command(name = "zk3col", version, about = "Graph 3-coloring zero-knowledge proof lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run simulated sessions and report the acceptance rate.
    Simulate(simulate::SimulateArgs),
    /// Attack stored transcripts.
    Attack(attack::AttackArgs),
    /// Randomness tests on symbol sequences.
    Analyze(analyze::AnalyzeArgs),
    /// Generate a planted 3-colorable graph.
    Gen(GenArgs),
    /// Re-check every stored session against its log.
    Replay(ReplayArgs),
    /// Print an experiment plan, or play it with a simulated subject.
    Plan(plan::PlanArgs),
    /// Serve live sessions and experiments over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GraphFormat {
    Dimacs,
    Json,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "dimacs")]
    format: GraphFormat,
    /// Graph file (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the planted coloring, one color per line.
    #[arg(long)]
    coloring_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    /// Log file or directory of logs.
    #[arg(long)]
    logs: PathBuf,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Logs are kept in `<data-dir>/sessions/`; existing ones are resumed.
    #[arg(long, default_value = "zk3col-data")]
    data_dir: PathBuf,
    /// Seconds a human has to act before the session faults.
    #[arg(long, default_value_t = 120)]
    timeout_secs: u64,
}

fn write_json(path: &Path, v: &Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(v).expect("JSON values serialize") + "\n";
    std::fs::write(path, text).map_err(|e| io(path, e))
}

fn gen(args: &GenArgs) -> Result<(), Failure> {
    let (g, c) = planted_3colorable(args.n, args.p, args.seed).map_err(|e| Failure::Usage(e.to_string()))?;
    let text = match args.format {
        GraphFormat::Dimacs => g.to_dimacs(),
        GraphFormat::Json => serde_json::to_string(&g).expect("graph serializes") + "\n",
    };
    match &args.out {
        Some(p) => std::fs::write(p, text).map_err(|e| io(p, e))?,
        None => print!("{text}"),
    }
    if let Some(p) = &args.coloring_out {
        let lines: String = c.colors().iter().map(|x| format!("{x}\n")).collect();
        std::fs::write(p, lines).map_err(|e| io(p, e))?;
    }
    Ok(())
}

/// Every failure of a stored session is a replay failure, including
/// unparsable payloads.
fn replay_logs(args: &ReplayArgs) -> Result<(), Failure> {
    let files = logs::log_files(&args.logs)?;
    if files.is_empty() {
        return Err(Failure::Data(format!("{}: no session logs found", args.logs.display())));
    }
    let (mut ok, mut bad) = (0usize, 0usize);
    for f in &files {
        let records = match load_sessions(f) {
            Ok(r) => r,
            Err(e) => {
                println!("FAIL {}: {e}", f.display());
                bad += 1;
                continue;
            }
        };
        for rec in &records {
            let checked = if rec.created.is_some() { replay(rec).map(|v| v.len()) } else { verify_chain(rec).map(|_| 0) };
            match checked {
                Ok(rounds) => {
                    ok += 1;
                    let verdict = rec.verdict.as_ref().map_or_else(|| "unfinished".to_string(), |v| serde_json::to_value(v).expect("verdict")["verdict"].as_str().unwrap_or("?").to_string());
                    println!("ok   {} rounds={rounds} verdict={verdict}", rec.session_id);
                }
                Err(e) => {
                    bad += 1;
                    println!("FAIL {} ({}): {e}", rec.session_id, f.display());
                }
            }
        }
    }
    println!("{ok} sessions verified, {bad} failed");
    if bad > 0 {
        return Err(Failure::Integrity(format!("{bad} sessions failed replay")));
    }
    Ok(())
}

fn serve(args: &ServeArgs) -> Result<(), Failure> {
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Data(e.to_string()))?;
    rt.block_on(async {
        let cfg = ServiceConfig {
            human_timeout: Duration::from_secs(args.timeout_secs),
            ..ServiceConfig::new(&args.data_dir)
        };
        let state = AppState::open(cfg).map_err(|e| Failure::Integrity(format!("resuming stored logs: {}", e.body.message)))?;
        let listener = tokio::net::TcpListener::bind(args.addr).await.map_err(|e| Failure::Data(format!("{}: {e}", args.addr)))?;
        eprintln!("listening on http://{}", args.addr);
        zk3col_service::serve(listener, state).await.map_err(|e| Failure::Data(e.to_string()))
    })
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Simulate(a) => {
            let s = simulate::run(&a)?;
            simulate::print(&s);
        }
        Command::Attack(a) => {
            let report = attack::run(&a)?;
            if let Some(p) = &a.out {
                write_json(p, &report)?;
            }
        }
        Command::Analyze(a) => {
            let report = analyze::run(&a)?;
            if let Some(p) = &a.out {
                write_json(p, &report)?;
            }
        }
        Command::Gen(a) => gen(&a)?,
        Command::Replay(a) => replay_logs(&a)?,
        Command::Plan(a) => {
            let v = plan::run(&a)?;
            if a.source.is_none() {
                println!("{}", serde_json::to_string_pretty(&v).expect("plan serializes"));
            }
        }
        Command::Serve(a) => serve(&a)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // help and version go to stdout and are not errors
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
