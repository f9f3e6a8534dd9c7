use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde_json::{json, Value};

use zk3col_core::lab::{aggregate_reports, analyze, award_ranking, fingerprint, fingerprint_distance, parse_csv, AwardWeights, GroupKey, SymbolSequence, TestReport};
use zk3col_core::store::load_sessions;

use crate::failure::{io, Failure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Group {
    All,
    K,
    Subject,
    Test,
}

impl From<Group> for GroupKey {
    fn from(g: Group) -> Self {
        match g {
            Group::All => GroupKey::All,
            Group::K => GroupKey::K,
            Group::Subject => GroupKey::Subject,
            Group::Test => GroupKey::Test,
        }
    }
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// CSV files (`subject,test,k,symbol` rows) or session logs (`.jsonl`).
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// Only analyze sequences over this many elements.
    #[arg(long)]
    pub k: Option<usize>,
    /// Add pooled statistics per group.
    #[arg(long)]
    pub aggregate: bool,
    #[arg(long, value_enum, default_value = "k")]
    pub group_by: Group,
    /// Rank subjects by how random they looked.
    #[arg(long)]
    pub award: bool,
    /// Pairwise fingerprint distances between sequences with equal k.
    #[arg(long)]
    pub fingerprints: bool,
    /// Write the JSON reports here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Sequences from one input file. Session logs yield the prover's ranks.
pub fn read_sequences(path: &Path) -> Result<Vec<SymbolSequence>, Failure> {
    if path.extension().is_some_and(|x| x == "jsonl") {
        let mut out = Vec::new();
        for rec in load_sessions(path).map_err(|e| Failure::from(e).context(path))? {
            let ranks = rec.permutation_ranks();
            if !ranks.is_empty() {
                out.push(SymbolSequence::labelled(3, ranks, &rec.session_id, "zkp")?);
            }
        }
        return Ok(out);
    }
    let text = std::fs::read_to_string(path).map_err(|e| io(path, e))?;
    parse_csv(&text).map_err(|e| Failure::from(e).context(path))
}

fn p(c: &Option<zk3col_core::stats::ChiSquare>) -> String {
    c.map_or_else(|| "-".into(), |c| format!("{:.4}", c.p))
}

pub fn run(args: &AnalyzeArgs) -> Result<Value, Failure> {
    let mut seqs = Vec::new();
    for path in &args.input {
        seqs.extend(read_sequences(path)?);
    }
    if let Some(k) = args.k {
        seqs.retain(|s| s.k == k);
    }
    let mut reports: Vec<TestReport> = Vec::new();
    let mut kept = Vec::new();
    for s in &seqs {
        match analyze(s) {
            Ok(r) => {
                reports.push(r);
                kept.push(s);
            }
            Err(e) => eprintln!("warning: skipping {}/{}: {e}", s.subject, s.test),
        }
    }
    if reports.is_empty() {
        return Err(Failure::Data("no sequence long enough to analyze".into()));
    }
    println!(
        "{:<16} {:<10} {:>2} {:>6} {:>9} {:>9} {:>8} {:>7} {:>7} {:>7}",
        "subject", "test", "k", "len", "p_unif", "p_trans", "H_rate", "rep", "hit0", "hit1"
    );
    for r in &reports {
        println!(
            "{:<16} {:<10} {:>2} {:>6} {:>9} {:>9} {:>8} {:>7.4} {:>7.4} {:>7.4}",
            r.subject,
            r.test,
            r.k,
            r.length,
            p(&r.chi2_uniform),
            p(&r.chi2_transition),
            r.entropy_rate.map_or_else(|| "-".into(), |h| format!("{h:.4}")),
            r.repetition_rate.observed,
            r.predictor_hit_rate.order0,
            r.predictor_hit_rate.order1
        );
    }
    let weights = AwardWeights::default();
    let mut out = json!({ "reports": reports });
    if args.aggregate {
        let agg = aggregate_reports(&reports, args.group_by.into(), &weights)?;
        println!();
        println!("{:<16} {:>7} {:>8} {:>9} {:>9} {:>8}", "group", "reports", "symbols", "p_unif", "p_trans", "uplift");
        for g in &agg.groups {
            println!(
                "{:<16} {:>7} {:>8} {:>9} {:>9} {:>8.4}",
                g.key,
                g.reports,
                g.symbols,
                p(&g.pooled_uniform),
                p(&g.pooled_transition),
                g.mean_uplift
            );
        }
        if let Some(r) = agg.k_bias_correlation {
            println!("correlation of k with predictor uplift: {r:.4}");
        }
        out["aggregate"] = json!(agg);
    }
    if args.award {
        let award = award_ranking(&reports, &weights);
        println!();
        println!("{:>4} {:<16} {:>8}", "rank", "subject", "score");
        for a in &award {
            println!("{:>4} {:<16} {:>8.4}", a.rank, a.subject, a.score);
        }
        out["award"] = json!(award);
    }
    if args.fingerprints {
        let fps = kept.iter().map(|s| fingerprint(s)).collect::<Result<Vec<_>, _>>()?;
        let mut pairs = Vec::new();
        println!();
        for i in 0..fps.len() {
            for j in i + 1..fps.len() {
                if fps[i].k != fps[j].k {
                    continue;
                }
                let d = fingerprint_distance(&fps[i], &fps[j])?;
                let (a, b) = (format!("{}/{}", kept[i].subject, kept[i].test), format!("{}/{}", kept[j].subject, kept[j].test));
                println!("distance {a} {b} {d:.4}");
                pairs.push(json!({ "a": a, "b": b, "distance": d }));
            }
        }
        out["fingerprint_distances"] = json!(pairs);
    }
    Ok(out)
}
