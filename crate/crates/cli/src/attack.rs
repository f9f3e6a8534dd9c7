use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde_json::{json, Value};

use zk3col_core::attacks::{evaluate_cheat, infer_report, AttackInput, PermModel};
use zk3col_core::graph::{Edge, Graph};
use zk3col_core::runner::SessionSetup;

use crate::failure::Failure;
use crate::logs::load_records;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Reconstruct the secret color classes from the openings.
    Infer,
    /// Cheating-prover success against the recorded challenge pattern.
    CheatEval,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    /// Log file or directory of logs.
    #[arg(long)]
    pub logs: PathBuf,
    #[arg(long, value_enum, default_value = "infer")]
    pub mode: Mode,
    /// Assumed prover permutation model (`uniform`, `identity`, `sticky:0.9`, ...).
    #[arg(long)]
    pub perm_model: Option<String>,
    /// Markov order of the challenge predictor (cheat-eval).
    #[arg(long, default_value_t = 1)]
    pub order: u8,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &AttackArgs) -> Result<Value, Failure> {
    let records = load_records(&args.logs)?;
    match args.mode {
        Mode::Infer => {
            let spec = args.perm_model.clone().unwrap_or_else(|| {
                eprintln!("warning: no --perm-model given, assuming uniform");
                "uniform".into()
            });
            let model: PermModel = spec.parse().map_err(|e| Failure::Usage(format!("--perm-model: {e}")))?;
            let transcripts: Vec<_> = records.iter().map(|r| r.transcripts()).collect();
            let secrets: Vec<_> = records
                .iter()
                .map(|r| r.created.as_ref().and_then(|c| SessionSetup::from_created(c).ok()).and_then(|s| s.secret))
                .collect();
            let inputs: Vec<AttackInput> = records
                .iter()
                .zip(&transcripts)
                .zip(&secrets)
                .map(|((r, t), s)| AttackInput {
                    session: r.session_id.clone(),
                    transcripts: t,
                    truth: s.as_ref(),
                })
                .collect();
            let report = infer_report(&model, &inputs)?;
            println!("sessions        {}", report.sessions);
            println!("rounds          {}", report.rounds);
            println!("perm model      {}", report.perm_model);
            println!("mean coverage   {:.4}", report.mean_coverage);
            match report.mean_accuracy {
                Some(a) => println!("pair accuracy   {a:.4}"),
                None => println!("pair accuracy   n/a (no secret or too few covered vertices)"),
            }
            println!("full recoveries {}", report.full_recoveries);
            Ok(json!(report))
        }
        Mode::CheatEval => {
            let mut rows = Vec::new();
            println!("{:<12} {:>10} {:>12} {:>12}", "session", "challenges", "naive", "adaptive");
            for r in &records {
                let created = r.created.as_ref().expect("loaded records have session_created");
                let graph: Graph = serde_json::from_value(created["graph"].clone()).map_err(|e| Failure::Data(format!("{}: graph: {e}", r.session_id)))?;
                let history: Vec<Edge> = r.rounds.iter().filter_map(|x| x.edge).collect();
                if history.is_empty() {
                    continue;
                }
                let rep = evaluate_cheat(&graph, &history, args.order, 1.0, args.seed)?;
                println!("{:<12} {:>10} {:>12.4} {:>12.4}", r.session_id, rep.challenges, rep.success_naive, rep.success_adaptive);
                rows.push(json!({ "session": r.session_id, "report": rep }));
            }
            if rows.is_empty() {
                return Err(Failure::Data("no recorded challenges to evaluate".into()));
            }
            Ok(json!({ "mode": "cheat-eval", "order": args.order, "sessions": rows }))
        }
    }
}
