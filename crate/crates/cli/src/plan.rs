use std::path::PathBuf;

use clap::Args;
use serde_json::{json, Value};

use zk3col_core::agents::{AliceSpec, BobSpec, PermSpec, ProverStrategy};
use zk3col_core::graph::planted_3colorable;
use zk3col_core::lab::{analyze, make_experiment_plan, to_csv, Stage, SymbolSequence};
use zk3col_core::protocol::stream_rng;
use zk3col_core::runner::{session_seed, simulate, SessionSetup};

use crate::failure::{io, Failure};
use crate::simulate::write_log;

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub subject: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Play the plan with a simulated subject drawing from this source
    /// (`uniform`, `avoider:0.9`, `sticky:0.5`, ...). Without it the plan is
    /// only printed.
    #[arg(long)]
    pub source: Option<String>,
    /// Directory for `plan.json`, `draws.csv`, `reports.json` and session logs.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &PlanArgs) -> Result<Value, Failure> {
    let plan = make_experiment_plan(&args.subject, args.seed);
    let Some(spec) = &args.source else {
        return Ok(json!(plan));
    };
    let source: PermSpec = spec.parse()?;
    if source == PermSpec::Human {
        return Err(Failure::Usage("a human subject needs the live service (`zk3col serve`)".into()));
    }
    if let Some(out) = &args.out {
        let dir = out.join("sessions");
        std::fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
    }
    let mut seqs: Vec<SymbolSequence> = Vec::new();
    let mut verdicts = Vec::new();
    for (index, stage) in plan.stages.iter().enumerate() {
        let seed = session_seed(plan.seed, index as u64);
        let blocks = match stage {
            Stage::Test1 { k, draws } => vec![(*k, *draws)],
            Stage::Test2 { blocks } => blocks.clone(),
            _ => Vec::new(),
        };
        for (b, (k, draws)) in blocks.into_iter().enumerate() {
            let (mut src, _) = source.build(k, stream_rng(seed, b as u64))?;
            let symbols = (0..draws).map(|_| src.sample().map(|p| p.rank())).collect::<Result<Vec<_>, _>>()?;
            let test = match stage {
                Stage::Test2 { .. } => format!("test2-b{b}"),
                s => s.name().to_string(),
            };
            seqs.push(SymbolSequence::labelled(k, symbols, &plan.subject, &test)?);
        }
        if let Some(cfg) = stage.zkp_config() {
            let (graph, secret) = planted_3colorable(cfg.graph_n, cfg.edge_prob, cfg.graph_seed)?;
            let alice = AliceSpec {
                strategy: ProverStrategy::Honest,
                source: source.clone(),
            };
            let setup = SessionSetup::new(graph, Some(cfg.rounds), seed, alice, BobSpec::Uniform, Some(secret));
            let result = simulate(&setup)?;
            let ranks: Vec<usize> = result.permutations.iter().flatten().copied().collect();
            seqs.push(SymbolSequence::labelled(3, ranks, &plan.subject, stage.name())?);
            if let Some(out) = &args.out {
                write_log(out, &format!("plan-s{index}"), &setup, &result)?;
            }
            verdicts.push(json!({ "stage": stage.name(), "verdict": result.verdict, "rounds_played": result.rounds_played }));
        }
    }
    let reports = seqs.iter().map(analyze).collect::<Result<Vec<_>, _>>()?;
    println!("subject {}  history_visible {}", plan.subject, plan.history_visible);
    println!("{:<10} {:>2} {:>6} {:>9} {:>9} {:>7}", "test", "k", "len", "p_unif", "p_trans", "uplift");
    for r in &reports {
        let p = |c: &Option<zk3col_core::stats::ChiSquare>| c.map_or_else(|| "-".into(), |c| format!("{:.4}", c.p));
        println!(
            "{:<10} {:>2} {:>6} {:>9} {:>9} {:>7.4}",
            r.test,
            r.k,
            r.length,
            p(&r.chi2_uniform),
            p(&r.chi2_transition),
            r.uplift()
        );
    }
    let result = json!({ "plan": plan, "sessions": verdicts, "reports": reports });
    if let Some(out) = &args.out {
        let write = |name: &str, text: String| {
            let path = out.join(name);
            std::fs::write(&path, text).map_err(|e| io(&path, e))
        };
        write("plan.json", serde_json::to_string_pretty(&plan).expect("plan serializes") + "\n")?;
        write("draws.csv", to_csv(&seqs))?;
        write("reports.json", serde_json::to_string_pretty(&result).expect("reports serialize") + "\n")?;
    }
    Ok(result)
}
