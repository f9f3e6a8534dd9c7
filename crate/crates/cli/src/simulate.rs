use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use zk3col_core::agents::{AliceSpec, BobSpec, ProverStrategy};
use zk3col_core::graph::{is_proper, monochromatic_edges, planted_3colorable, Coloring, Graph};
use zk3col_core::protocol::{cheat_acceptance, soundness_bound, SessionVerdict, SoundnessBound};
use zk3col_core::runner::{find_coloring, log_session, session_seed, simulate, SessionSetup};
use zk3col_core::stats::{binomial_sigma, wilson_interval};
use zk3col_core::store::{session_path, Clock, EventLog};

use crate::failure::{io, Failure};

#[derive(Debug, Args)]
pub struct GraphArgs {
    /// DIMACS file or built-in graph (k3, k4, petersen).
    #[arg(long, conflicts_with = "gen")]
    pub graph: Option<String>,
    /// Planted 3-colorable graph `N:P[:SEED]`.
    #[arg(long)]
    pub gen: Option<String>,
}

impl GraphArgs {
    /// The graph and, for planted graphs, its planted coloring.
    pub fn load(&self) -> Result<(Graph, Option<Coloring>), Failure> {
        match (&self.graph, &self.gen) {
            (Some(name), None) => match Graph::named(name) {
                Some(g) => Ok((g, None)),
                None => {
                    let path = Path::new(name);
                    let text = std::fs::read_to_string(path).map_err(|e| io(path, e))?;
                    Ok((Graph::parse_dimacs(&text).map_err(|e| Failure::from(e).context(path))?, None))
                }
            },
            (None, Some(spec)) => {
                let bad = || Failure::Usage(format!("--gen expects N:P[:SEED], got `{spec}`"));
                let parts: Vec<&str> = spec.split(':').collect();
                if !(2..=3).contains(&parts.len()) {
                    return Err(bad());
                }
                let n = parts[0].parse().map_err(|_| bad())?;
                let p = parts[1].parse().map_err(|_| bad())?;
                let seed = parts.get(2).map_or(Ok(0), |s| s.parse()).map_err(|_| bad())?;
                let (g, c) = planted_3colorable(n, p, seed).map_err(|e| Failure::Usage(e.to_string()))?;
                Ok((g, Some(c)))
            }
            _ => Err(Failure::Usage("give exactly one of --graph or --gen".into())),
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Prover spec, e.g. `uniform`, `sticky:0.9`, `cheat/uniform`.
    #[arg(long, default_value = "uniform")]
    pub alice: String,
    /// Verifier spec, e.g. `uniform`, `weighted:0.5,0.1,...`, `recency:0.3:2`.
    #[arg(long, default_value = "uniform")]
    pub bob: String,
    /// Rounds per session (default m², capped).
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub sessions: u64,
    /// File of vertex colors (1..=3) for an honest prover on a given graph.
    #[arg(long)]
    pub coloring: Option<PathBuf>,
    /// Play every round instead of stopping at the first reject.
    #[arg(long)]
    pub no_abort: bool,
    /// Directory for `sessions/<id>.jsonl` logs and `summary.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub sessions: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub faulted: u64,
    pub acceptance_rate: f64,
    pub ci95: (f64, f64),
    pub n: usize,
    pub m: usize,
    pub rounds: usize,
    pub mean_rounds_played: f64,
    pub alice: String,
    pub bob: String,
    /// `(1 - 1/m)^R` and `exp(-R/m)`.
    pub soundness_bound: SoundnessBound,
    /// Closed-form acceptance of the prover's cheating assignment under
    /// uniform challenges; 1 for an honest prover.
    pub expected_acceptance: Option<f64>,
}

fn read_coloring(path: &Path) -> Result<Coloring, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| io(path, e))?;
    let colors = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<u8>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    Coloring::new(colors).map_err(|e| Failure::from(e).context(path))
}

pub fn session_id(i: u64, total: u64) -> String {
    let width = total.saturating_sub(1).to_string().len().max(6);
    format!("s{i:0width$}")
}

pub fn write_log(out: &Path, id: &str, setup: &SessionSetup, result: &zk3col_core::protocol::SessionResult) -> Result<(), Failure> {
    let path = session_path(out, id);
    let file = File::create(&path).map_err(|e| io(&path, e))?;
    let mut log = EventLog::new(BufWriter::new(file), Clock::Logical);
    log_session(&mut log, id, setup, result)?;
    Ok(())
}

pub fn run(args: &SimulateArgs) -> Result<Summary, Failure> {
    let (graph, planted) = args.graph.load()?;
    let alice: AliceSpec = args.alice.parse()?;
    let bob: BobSpec = args.bob.parse()?;
    if args.sessions == 0 {
        return Err(Failure::Usage("--sessions must be at least 1".into()));
    }
    let secret = match alice.strategy {
        ProverStrategy::Honest => {
            let c = match &args.coloring {
                Some(p) => read_coloring(p)?,
                None => planted.or_else(|| find_coloring(&graph, args.seed)).ok_or_else(|| Failure::Data("no proper 3-coloring found for an honest prover".into()))?,
            };
            if !is_proper(&graph, &c)? {
                return Err(Failure::Data("the honest prover's coloring is not proper".into()));
            }
            Some(c)
        }
        _ => None,
    };
    let mut base = SessionSetup::new(graph, args.rounds, args.seed, alice, bob, secret);
    base.abort_on_reject = !args.no_abort;
    base.validate()?;
    if let Some(out) = &args.out {
        let dir = out.join("sessions");
        std::fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
    }
    let expected_acceptance = match base.alice.strategy {
        ProverStrategy::Honest => Some(1.0),
        ProverStrategy::Cheat => {
            let agents = base.agents()?;
            let bad = monochromatic_edges(&base.graph, agents.alice.assignment())?.len();
            (base.bob == BobSpec::Uniform).then(|| cheat_acceptance(base.graph.m(), bad, base.rounds).exact)
        }
        ProverStrategy::Adaptive => None,
    };

    let outcomes = (0..args.sessions)
        .into_par_iter()
        .map(|i| {
            let setup = SessionSetup {
                seed: session_seed(args.seed, i),
                ..base.clone()
            };
            let result = simulate(&setup)?;
            if let Some(out) = &args.out {
                write_log(out, &session_id(i, args.sessions), &setup, &result)?;
            }
            Ok((result.verdict, result.rounds_played))
        })
        .collect::<Result<Vec<_>, Failure>>()?;

    let count = |f: fn(&SessionVerdict) -> bool| outcomes.iter().filter(|(v, _)| f(v)).count() as u64;
    let accepted = count(|v| *v == SessionVerdict::Accepted);
    let rejected = count(|v| *v == SessionVerdict::Rejected);
    let summary = Summary {
        sessions: args.sessions,
        accepted,
        rejected,
        faulted: args.sessions - accepted - rejected,
        acceptance_rate: accepted as f64 / args.sessions as f64,
        ci95: wilson_interval(accepted, args.sessions, 1.96),
        n: base.graph.n(),
        m: base.graph.m(),
        rounds: base.rounds,
        mean_rounds_played: outcomes.iter().map(|(_, r)| *r as f64).sum::<f64>() / args.sessions as f64,
        alice: base.alice.to_string(),
        bob: base.bob.to_string(),
        soundness_bound: soundness_bound(base.graph.m(), base.rounds)?,
        expected_acceptance,
    };
    if let Some(out) = &args.out {
        let path = out.join("summary.json");
        let text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
        std::fs::write(&path, text).map_err(|e| io(&path, e))?;
    }
    Ok(summary)
}

pub fn print(s: &Summary) {
    println!("graph        n = {}, m = {}, rounds = {}", s.n, s.m, s.rounds);
    println!("agents       alice = {}, bob = {}", s.alice, s.bob);
    println!("sessions     {} (accepted {}, rejected {}, fault {})", s.sessions, s.accepted, s.rejected, s.faulted);
    println!("acceptance   {:.6}  95% CI [{:.6}, {:.6}]", s.acceptance_rate, s.ci95.0, s.ci95.1);
    println!("rounds/sess  {:.2}", s.mean_rounds_played);
    println!("bound        (1-1/m)^R = {:.6e}   exp(-R/m) = {:.6e}", s.soundness_bound.exact, s.soundness_bound.approx);
    if let Some(p) = s.expected_acceptance {
        let sigma = binomial_sigma(s.sessions, p) / s.sessions as f64;
        let z = if sigma > 0.0 { (s.acceptance_rate - p) / sigma } else { 0.0 };
        println!("expected     {p:.6e}  ({z:+.2} sigma)");
    }
}
