//! Browser bindings. Each export takes plain numbers or text and returns a
//! JSON string; errors come back as `{"error": "..."}`.

use serde::Serialize;
use wasm_bindgen::prelude::wasm_bindgen;

use zk3col_core::attacks::{infer_report, AttackInput, PermModel};
use zk3col_core::graph::{monochromatic_edges, planted_3colorable, Graph};
use zk3col_core::lab::{analyze, detectability, AwardWeights, SymbolSequence, TestReport};
use zk3col_core::protocol::{cheat_acceptance, SessionVerdict};
use zk3col_core::runner::{session_seed, simulate, SessionSetup};

/// Upper bounds that keep a single call responsive in a browser tab.
pub const MAX_TRIALS: usize = 20_000;
pub const MAX_CURVE_ROUNDS: usize = 2_000;
pub const MAX_LEAK_SESSIONS: usize = 200;
pub const MAX_LEAK_STEPS: usize = 51;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SoundnessCurve {
    pub n: usize,
    pub m: usize,
    pub trials: usize,
    pub rounds: Vec<usize>,
    /// Closed form averaged over each trial's cheating assignment.
    pub exact: Vec<f64>,
    /// `(1 - 1/m)^R`, the best any cheater can do.
    pub bound: Vec<f64>,
    /// Share of simulated sessions still unrejected after `R` rounds.
    pub simulated: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeakCurve {
    pub n: usize,
    pub m: usize,
    pub rounds: usize,
    pub sessions: usize,
    pub stickiness: Vec<f64>,
    pub coverage: Vec<f64>,
    /// Pair accuracy over covered vertices; `None` where nothing was covered.
    pub accuracy: Vec<Option<f64>>,
    pub full_recoveries: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankAnalysis {
    pub report: TestReport,
    pub detectability: f64,
}

/// A built-in graph name or DIMACS text.
pub fn load_graph(source: &str) -> Result<Graph, String> {
    Graph::named(source.trim()).map_or_else(|| Graph::parse_dimacs(source).map_err(|e| e.to_string()), Ok)
}

fn curve_points(max_rounds: usize) -> Vec<usize> {
    let step = max_rounds.div_ceil(100).max(1);
    let mut pts: Vec<usize> = (0..=max_rounds).step_by(step).collect();
    if pts.last() != Some(&max_rounds) {
        pts.push(max_rounds);
    }
    pts
}

/// Cheating prover against a uniform verifier: simulated survival versus
/// the closed form, for `R` from 0 to `max_rounds`.
pub fn soundness_curve(graph: &str, max_rounds: usize, trials: usize, seed: u64) -> Result<SoundnessCurve, String> {
    let g = load_graph(graph)?;
    if trials == 0 || trials > MAX_TRIALS {
        return Err(format!("trials must be in 1..={MAX_TRIALS}"));
    }
    if max_rounds == 0 || max_rounds > MAX_CURVE_ROUNDS {
        return Err(format!("rounds must be in 1..={MAX_CURVE_ROUNDS}"));
    }
    let base = SessionSetup::new(g, Some(max_rounds), seed, "cheat/uniform".parse().map_err(|e| format!("{e}"))?, "uniform".parse().map_err(|e| format!("{e}"))?, None);
    let m = base.graph.m();
    let mut bad = Vec::with_capacity(trials);
    // first rejected round per trial; None if the session was accepted
    let mut caught = Vec::with_capacity(trials);
    for i in 0..trials {
        let setup = SessionSetup {
            seed: session_seed(seed, i as u64),
            ..base.clone()
        };
        let agents = setup.agents().map_err(|e| e.to_string())?;
        bad.push(monochromatic_edges(&setup.graph, agents.alice.assignment()).map_err(|e| e.to_string())?.len());
        let result = simulate(&setup).map_err(|e| e.to_string())?;
        caught.push(match result.verdict {
            SessionVerdict::Accepted => None,
            SessionVerdict::Rejected => Some(result.rounds_played),
            SessionVerdict::Fault(f) => return Err(f),
        });
    }
    let rounds = curve_points(max_rounds);
    let t = trials as f64;
    Ok(SoundnessCurve {
        n: base.graph.n(),
        m,
        trials,
        exact: rounds.iter().map(|&r| bad.iter().map(|&b| cheat_acceptance(m, b, r).exact).sum::<f64>() / t).collect(),
        bound: rounds.iter().map(|&r| cheat_acceptance(m, 1, r).exact).collect(),
        simulated: rounds.iter().map(|&r| caught.iter().filter(|c| c.is_none_or(|at| at > r)).count() as f64 / t).collect(),
        rounds,
    })
}

/// Honest prover with identity-sticky permutations on a planted graph; the
/// attacker knows the stickiness and votes on opened colors.
pub fn leak_curve(n: usize, edge_prob: f64, rounds: usize, sessions: usize, steps: usize, seed: u64) -> Result<LeakCurve, String> {
    if sessions == 0 || sessions > MAX_LEAK_SESSIONS {
        return Err(format!("sessions must be in 1..={MAX_LEAK_SESSIONS}"));
    }
    if !(2..=MAX_LEAK_STEPS).contains(&steps) {
        return Err(format!("steps must be in 2..={MAX_LEAK_STEPS}"));
    }
    let (g, secret) = planted_3colorable(n, edge_prob, seed).map_err(|e| e.to_string())?;
    let mut curve = LeakCurve {
        n: g.n(),
        m: g.m(),
        rounds,
        sessions,
        stickiness: Vec::new(),
        coverage: Vec::new(),
        accuracy: Vec::new(),
        full_recoveries: Vec::new(),
    };
    for step in 0..steps {
        let p = step as f64 / (steps - 1) as f64;
        let spec = format!("sticky:{p}");
        let mut base = SessionSetup::new(g.clone(), Some(rounds), seed, spec.parse().map_err(|e| format!("{e}"))?, "uniform".parse().map_err(|e| format!("{e}"))?, Some(secret.clone()));
        base.validate().map_err(|e| e.to_string())?;
        base.abort_on_reject = true;
        let results = (0..sessions)
            .map(|i| {
                let setup = SessionSetup {
                    seed: session_seed(seed, i as u64),
                    ..base.clone()
                };
                simulate(&setup).map_err(|e| e.to_string())
            })
            .collect::<Result<Vec<_>, _>>()?;
        let inputs: Vec<AttackInput<'_>> = results
            .iter()
            .enumerate()
            .map(|(i, r)| AttackInput {
                session: i.to_string(),
                transcripts: &r.transcripts,
                truth: Some(&secret),
            })
            .collect();
        let model: PermModel = spec.parse().map_err(|e| format!("{e}"))?;
        let report = infer_report(&model, &inputs).map_err(|e| e.to_string())?;
        curve.stickiness.push(p);
        curve.coverage.push(report.mean_coverage);
        curve.accuracy.push(report.mean_accuracy);
        curve.full_recoveries.push(report.full_recoveries);
    }
    Ok(curve)
}

/// Ranks separated by commas or whitespace, each below `k!`.
pub fn analyze_ranks(k: usize, text: &str) -> Result<RankAnalysis, String> {
    let symbols = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|_| format!("not a rank: `{s}`")))
        .collect::<Result<Vec<_>, _>>()?;
    let seq = SymbolSequence::labelled(k, symbols, "demo", "demo").map_err(|e| e.to_string())?;
    let report = analyze(&seq).map_err(|e| e.to_string())?;
    Ok(RankAnalysis {
        detectability: detectability(&report, &AwardWeights::default()),
        report,
    })
}

fn to_json<T: Serialize>(r: Result<T, String>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| serde_json::json!({ "error": e.to_string() }).to_string()),
        Err(e) => serde_json::json!({ "error": e }).to_string(),
    }
}

#[wasm_bindgen(js_name = soundnessCurve)]
pub fn soundness_curve_json(graph: &str, max_rounds: usize, trials: usize, seed: u32) -> String {
    to_json(soundness_curve(graph, max_rounds, trials, seed.into()))
}

#[wasm_bindgen(js_name = leakCurve)]
pub fn leak_curve_json(n: usize, edge_prob: f64, rounds: usize, sessions: usize, steps: usize, seed: u32) -> String {
    to_json(leak_curve(n, edge_prob, rounds, sessions, steps, seed.into()))
}

#[wasm_bindgen(js_name = analyzeRanks)]
pub fn analyze_ranks_json(k: usize, text: &str) -> String {
    to_json(analyze_ranks(k, text))
}
