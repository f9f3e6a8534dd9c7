//! Randomness sources for both roles and the simulated agents built on them.
//!
//! Human bias is modelled as an order-1 Markov chain over permutation ranks
//! ([`TransitionModel`]) with a few named presets. Every source is
//! reproducible from its kind, parameters and seed.

use std::fmt;
use std::str::FromStr;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender, TryRecvError};
use std::time::Duration;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, RngCore};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::attacks::{cheat_coloring, predict_edge_distribution};
use crate::commitment::Opening;
use crate::error::{AgentError, ProtocolError};
use crate::graph::{Coloring, Edge, Graph};
use crate::permutation::{factorial, Permutation, MAX_K, MIN_K};
use crate::protocol::{prover_commit_round, stream_rng, CommitMessage, ProverAgent, ProverRound, VerifierAgent};

pub const DEFAULT_EXTERNAL_TIMEOUT: Duration = Duration::from_secs(120);
pub const DEFAULT_SMOOTHING: f64 = 0.5;

/// RNG streams derived from a session seed.
pub const ALICE_STREAM: u64 = 1;
pub const BOB_STREAM: u64 = 2;
pub const CHEAT_STREAM: u64 = 3;

const ROW_TOLERANCE: f64 = 1e-9;

fn check_distribution(p: &[f64], what: &str) -> Result<(), AgentError> {
    if p.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(AgentError::BadModel(format!("{what} has a negative or non-finite entry")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > ROW_TOLERANCE {
        return Err(AgentError::BadModel(format!("{what} sums to {sum}")));
    }
    Ok(())
}

fn draw<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<usize, AgentError> {
    let dist = WeightedIndex::new(weights).map_err(|e| AgentError::BadWeights(e.to_string()))?;
    Ok(dist.sample(rng))
}

/// Order-0 or order-1 Markov model over the `k!` ranks of `S_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionModel {
    pub k: usize,
    pub order: u8,
    pub initial: Vec<f64>,
    /// Row-stochastic `k! x k!` matrix; ignored for order 0.
    pub rows: Vec<Vec<f64>>,
}

impl TransitionModel {
    pub fn new(k: usize, order: u8, initial: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self, AgentError> {
        let model = TransitionModel { k, order, initial, rows };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if !(MIN_K..=MAX_K).contains(&self.k) {
            return Err(AgentError::BadModel(format!("k = {}", self.k)));
        }
        if self.order > 1 {
            return Err(AgentError::BadModel(format!("order {}", self.order)));
        }
        let s = self.states();
        if self.initial.len() != s || self.rows.len() != s || self.rows.iter().any(|r| r.len() != s) {
            return Err(AgentError::BadModel(format!("expected {s} states")));
        }
        check_distribution(&self.initial, "initial distribution")?;
        for (i, row) in self.rows.iter().enumerate() {
            check_distribution(row, &format!("row {i}"))?;
        }
        Ok(())
    }

    pub fn states(&self) -> usize {
        factorial(self.k)
    }

    fn from_rows(k: usize, row: impl Fn(usize, usize) -> f64) -> Self {
        let s = factorial(k);
        let rows: Vec<Vec<f64>> = (0..s).map(|i| (0..s).map(|j| row(i, j)).collect()).collect();
        let model = TransitionModel {
            k,
            order: 1,
            initial: vec![1.0 / s as f64; s],
            rows,
        };
        TransitionModel {
            initial: model.stationary(),
            ..model
        }
    }

    pub fn uniform(k: usize) -> Self {
        let s = factorial(k);
        TransitionModel {
            k,
            order: 0,
            initial: vec![1.0 / s as f64; s],
            rows: vec![vec![1.0 / s as f64; s]; s],
        }
    }

    /// Repeats the previous rank with probability `(1 - p_avoid) / k!`;
    /// the rest is spread evenly over the other ranks.
    pub fn avoider(k: usize, p_avoid: f64) -> Self {
        let s = factorial(k) as f64;
        let stay = (1.0 - p_avoid) / s;
        Self::from_rows(k, |i, j| if i == j { stay } else { (1.0 - stay) / (s - 1.0) })
    }

    /// With probability `p_stay` plays the identity, otherwise a uniform rank.
    pub fn identity_sticky(k: usize, p_stay: f64) -> Self {
        let s = factorial(k) as f64;
        Self::from_rows(k, |_, j| if j == 0 { p_stay + (1.0 - p_stay) / s } else { (1.0 - p_stay) / s })
    }

    /// With probability `p_next` steps to the next rank (cyclically),
    /// otherwise a uniform rank.
    pub fn cycle(k: usize, p_next: f64) -> Self {
        let n = factorial(k);
        let s = n as f64;
        Self::from_rows(k, |i, j| if j == (i + 1) % n { p_next + (1.0 - p_next) / s } else { (1.0 - p_next) / s })
    }

    /// Stationary distribution by power iteration (the initial distribution
    /// for order-0 models).
    pub fn stationary(&self) -> Vec<f64> {
        if self.order == 0 {
            return self.initial.clone();
        }
        let s = self.states();
        let mut pi = vec![1.0 / s as f64; s];
        for _ in 0..10_000 {
            let mut next = vec![0.0; s];
            for (i, row) in self.rows.iter().enumerate() {
                for (j, p) in row.iter().enumerate() {
                    next[j] += pi[i] * p;
                }
            }
            // lazy step keeps periodic chains converging
            let next: Vec<f64> = next.iter().zip(&pi).map(|(a, b)| 0.5 * (a + b)).collect();
            let diff: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
            pi = next;
            if diff < 1e-15 {
                break;
            }
        }
        let total: f64 = pi.iter().sum();
        pi.iter().map(|x| x / total).collect()
    }

    /// Next-symbol distribution given the previous symbol.
    pub fn next_distribution(&self, prev: Option<usize>) -> &[f64] {
        match (self.order, prev) {
            (1, Some(p)) => &self.rows[p],
            _ => &self.initial,
        }
    }

    /// Hit rate of the best single-symbol guess in steady state.
    pub fn bayes_hit_rate(&self) -> f64 {
        let best = |p: &[f64]| p.iter().copied().fold(0.0, f64::max);
        if self.order == 0 {
            return best(&self.initial);
        }
        self.stationary().iter().zip(&self.rows).map(|(pi, row)| pi * best(row)).sum()
    }
}

/// Fits an order-1 model with additive smoothing to a rank sequence.
pub fn fit_markov(seq: &[usize], k: usize, smoothing: f64) -> Result<TransitionModel, AgentError> {
    if !(MIN_K..=MAX_K).contains(&k) {
        return Err(AgentError::BadModel(format!("k = {k}")));
    }
    if seq.len() < 2 {
        return Err(AgentError::TooShort(seq.len()));
    }
    let s = factorial(k);
    if let Some(&bad) = seq.iter().find(|&&x| x >= s) {
        return Err(AgentError::SymbolOutOfRange { symbol: bad, states: s });
    }
    let mut counts = vec![vec![0u64; s]; s];
    let mut marginal = vec![0u64; s];
    for &x in seq {
        marginal[x] += 1;
    }
    for w in seq.windows(2) {
        counts[w[0]][w[1]] += 1;
    }
    let normalize = |c: &[u64]| -> Vec<f64> {
        let total = c.iter().sum::<u64>() as f64 + smoothing * s as f64;
        if total <= 0.0 {
            vec![1.0 / s as f64; s]
        } else {
            c.iter().map(|&x| (x as f64 + smoothing) / total).collect()
        }
    };
    Ok(TransitionModel {
        k,
        order: 1,
        initial: normalize(&marginal),
        rows: counts.iter().map(|r| normalize(r)).collect(),
    })
}

/// Sender half of an external source; submissions are validated on receipt.
#[derive(Debug, Clone)]
pub struct ExternalHandle<T>(Sender<T>);

impl<T> ExternalHandle<T> {
    pub fn submit(&self, value: T) -> Result<(), AgentError> {
        self.0.send(value).map_err(|_| AgentError::Disconnected)
    }
}

#[derive(Debug)]
struct External<T> {
    rx: Receiver<T>,
    timeout: Duration,
}

impl<T> External<T> {
    fn channel(timeout: Duration) -> (Self, ExternalHandle<T>) {
        let (tx, rx) = mpsc::channel();
        (External { rx, timeout }, ExternalHandle(tx))
    }

    fn recv(&self, blocking: bool) -> Result<T, AgentError> {
        if blocking {
            self.rx.recv_timeout(self.timeout).map_err(|e| match e {
                RecvTimeoutError::Timeout => AgentError::Timeout,
                RecvTimeoutError::Disconnected => AgentError::Disconnected,
            })
        } else {
            self.rx.try_recv().map_err(|e| match e {
                TryRecvError::Empty => AgentError::NoInput,
                TryRecvError::Disconnected => AgentError::Disconnected,
            })
        }
    }
}

#[derive(Debug)]
enum SourceKind {
    Uniform(ChaCha20Rng),
    Markov {
        model: TransitionModel,
        rng: ChaCha20Rng,
    },
    Scripted(Vec<usize>),
    External(External<usize>),
}

#[derive(Debug)]
pub struct PermutationSource {
    k: usize,
    kind: SourceKind,
    history: Vec<usize>,
}

impl PermutationSource {
    pub fn uniform(k: usize, rng: ChaCha20Rng) -> Result<Self, AgentError> {
        Permutation::identity(k)?;
        Ok(PermutationSource {
            k,
            kind: SourceKind::Uniform(rng),
            history: Vec::new(),
        })
    }

    pub fn markov(model: TransitionModel, rng: ChaCha20Rng) -> Result<Self, AgentError> {
        model.validate()?;
        Ok(PermutationSource {
            k: model.k,
            kind: SourceKind::Markov { model, rng },
            history: Vec::new(),
        })
    }

    pub fn scripted(k: usize, ranks: Vec<usize>) -> Result<Self, AgentError> {
        if let Some(&bad) = ranks.iter().find(|&&r| r >= factorial(k)) {
            return Err(crate::error::PermutationError::RankOutOfRange { k, rank: bad }.into());
        }
        Ok(PermutationSource {
            k,
            kind: SourceKind::Scripted(ranks),
            history: Vec::new(),
        })
    }

    pub fn external(k: usize, timeout: Duration) -> (Self, ExternalHandle<usize>) {
        let (ext, handle) = External::channel(timeout);
        (
            PermutationSource {
                k,
                kind: SourceKind::External(ext),
                history: Vec::new(),
            },
            handle,
        )
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn history(&self) -> &[usize] {
        &self.history
    }

    pub fn is_external(&self) -> bool {
        matches!(self.kind, SourceKind::External(_))
    }

    /// Draws the next permutation; external sources block up to their timeout.
    pub fn sample(&mut self) -> Result<Permutation, AgentError> {
        self.next(true)
    }

    /// Like [`sample`](Self::sample) but fails with `NoInput` instead of
    /// blocking on an external source.
    pub fn try_sample(&mut self) -> Result<Permutation, AgentError> {
        self.next(false)
    }

    fn next(&mut self, blocking: bool) -> Result<Permutation, AgentError> {
        let states = factorial(self.k);
        let rank = match &mut self.kind {
            SourceKind::Uniform(rng) => rng.gen_range(0..states),
            SourceKind::Markov { model, rng } => draw(model.next_distribution(self.history.last().copied()), rng)?,
            SourceKind::Scripted(script) => *script
                .get(self.history.len())
                .ok_or(AgentError::ScriptExhausted(script.len()))?,
            SourceKind::External(ext) => {
                let r = ext.recv(blocking)?;
                if r >= states {
                    return Err(crate::error::PermutationError::RankOutOfRange { k: self.k, rank: r }.into());
                }
                r
            }
        };
        self.history.push(rank);
        Ok(Permutation::from_rank(self.k, rank)?)
    }
}

#[derive(Debug)]
enum SelectorKind {
    Uniform(ChaCha20Rng),
    Weighted {
        weights: Vec<f64>,
        rng: ChaCha20Rng,
    },
    Recency {
        decay: f64,
        memory: usize,
        rng: ChaCha20Rng,
    },
    Scripted(Vec<Edge>),
    External(External<Edge>),
}

/// The verifier's edge choice. Weighted and scripted selectors are bound to a
/// graph's canonical edge order.
#[derive(Debug)]
pub struct EdgeSelector {
    kind: SelectorKind,
    history: Vec<Edge>,
}

impl EdgeSelector {
    fn with(kind: SelectorKind) -> Self {
        EdgeSelector {
            kind,
            history: Vec::new(),
        }
    }

    pub fn uniform(rng: ChaCha20Rng) -> Self {
        Self::with(SelectorKind::Uniform(rng))
    }

    pub fn weighted(weights: Vec<f64>, rng: ChaCha20Rng) -> Result<Self, AgentError> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
            return Err(AgentError::BadWeights(format!("{weights:?}")));
        }
        Ok(Self::with(SelectorKind::Weighted { weights, rng }))
    }

    /// Edges chosen within the last `memory` draws get weight `decay`, all
    /// others weight 1. If every edge is excluded the draw is uniform.
    pub fn recency(decay: f64, memory: usize, rng: ChaCha20Rng) -> Result<Self, AgentError> {
        if !(0.0..=1.0).contains(&decay) {
            return Err(AgentError::BadWeights(format!("decay {decay}")));
        }
        Ok(Self::with(SelectorKind::Recency {
            decay,
            memory: memory.max(1),
            rng,
        }))
    }

    pub fn scripted(edges: Vec<Edge>) -> Self {
        Self::with(SelectorKind::Scripted(edges))
    }

    pub fn external(timeout: Duration) -> (Self, ExternalHandle<Edge>) {
        let (ext, handle) = External::channel(timeout);
        (Self::with(SelectorKind::External(ext)), handle)
    }

    pub fn history(&self) -> &[Edge] {
        &self.history
    }

    pub fn is_external(&self) -> bool {
        matches!(self.kind, SelectorKind::External(_))
    }

    pub fn select(&mut self, g: &Graph) -> Result<Edge, AgentError> {
        self.next(g, true)
    }

    pub fn try_select(&mut self, g: &Graph) -> Result<Edge, AgentError> {
        self.next(g, false)
    }

    fn next(&mut self, g: &Graph, blocking: bool) -> Result<Edge, AgentError> {
        let m = g.m();
        let edge = match &mut self.kind {
            SelectorKind::Uniform(rng) => g.edges()[rng.gen_range(0..m)],
            SelectorKind::Weighted { weights, rng } => {
                if weights.len() != m {
                    return Err(AgentError::WeightCount {
                        expected: m,
                        found: weights.len(),
                    });
                }
                g.edges()[draw(weights, rng)?]
            }
            SelectorKind::Recency { decay, memory, rng } => {
                let recent = &self.history[self.history.len().saturating_sub(*memory)..];
                let mut weights: Vec<f64> = g
                    .edges()
                    .iter()
                    .map(|e| if recent.contains(e) { *decay } else { 1.0 })
                    .collect();
                if weights.iter().sum::<f64>() <= 0.0 {
                    weights = vec![1.0; m];
                }
                g.edges()[draw(&weights, rng)?]
            }
            SelectorKind::Scripted(script) => *script
                .get(self.history.len())
                .ok_or(AgentError::ScriptExhausted(script.len()))?,
            SelectorKind::External(ext) => ext.recv(blocking)?,
        };
        let idx = g.edge_index(edge).ok_or(AgentError::NonEdge(edge.0, edge.1))?;
        let edge = g.edges()[idx];
        self.history.push(edge);
        Ok(edge)
    }
}

/// How a simulated prover picks its colour assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProverStrategy {
    /// Knows a proper coloring.
    Honest,
    /// Best assignment against uniform challenges, fixed for the session.
    Cheat,
    /// Recomputes its assignment every round against the challenge
    /// distribution predicted from the verifier's past choices.
    Adaptive,
}

/// Permutation source parameters, expressible as compact strings
/// (`uniform`, `avoider:0.9`, `sticky:0.9`, `cycle:0.5`, `script:0,3,5`,
/// `markov:model.json`, `human`) or as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PermSpec {
    Uniform,
    Avoider { p: f64 },
    Sticky { p: f64 },
    Cycle { p: f64 },
    Markov { model: TransitionModel },
    Script { ranks: Vec<usize> },
    Human,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AliceSpec {
    pub strategy: ProverStrategy,
    pub source: PermSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BobSpec {
    Uniform,
    Weighted { weights: Vec<f64> },
    Recency { decay: f64, memory: usize },
    Script { edges: Vec<Edge> },
    Human,
}

fn parse_prob(s: &str, spec: &str) -> Result<f64, AgentError> {
    match s.parse::<f64>() {
        Ok(p) if (0.0..=1.0).contains(&p) => Ok(p),
        _ => Err(AgentError::BadSpec(spec.to_string())),
    }
}

fn read_file(path: &str) -> Result<String, AgentError> {
    std::fs::read_to_string(path).map_err(|e| AgentError::Io {
        path: path.to_string(),
        message: e.to_string(),
    })
}

/// Inline comma/whitespace list, or the contents of a file of that form.
fn list_or_file(arg: &str) -> Result<String, AgentError> {
    let inline = arg.chars().all(|c| c.is_ascii_digit() || ",-; ".contains(c));
    if inline {
        Ok(arg.to_string())
    } else {
        read_file(arg)
    }
}

impl FromStr for PermSpec {
    type Err = AgentError;

    fn from_str(spec: &str) -> Result<Self, Self::Err> {
        let (kind, arg) = spec.split_once(':').unwrap_or((spec, ""));
        let bad = || AgentError::BadSpec(spec.to_string());
        Ok(match kind {
            "uniform" if arg.is_empty() => PermSpec::Uniform,
            "human" if arg.is_empty() => PermSpec::Human,
            "avoider" => PermSpec::Avoider { p: parse_prob(arg, spec)? },
            "sticky" => PermSpec::Sticky { p: parse_prob(arg, spec)? },
            "cycle" => PermSpec::Cycle { p: parse_prob(arg, spec)? },
            "markov" if !arg.is_empty() => {
                let model: TransitionModel =
                    serde_json::from_str(&read_file(arg)?).map_err(|e| AgentError::BadModel(e.to_string()))?;
                model.validate()?;
                PermSpec::Markov { model }
            }
            "script" if !arg.is_empty() => {
                let ranks = list_or_file(arg)?
                    .split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse().map_err(|_| bad()))
                    .collect::<Result<Vec<usize>, _>>()?;
                PermSpec::Script { ranks }
            }
            _ => return Err(bad()),
        })
    }
}

impl fmt::Display for PermSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PermSpec::Uniform => write!(f, "uniform"),
            PermSpec::Avoider { p } => write!(f, "avoider:{p}"),
            PermSpec::Sticky { p } => write!(f, "sticky:{p}"),
            PermSpec::Cycle { p } => write!(f, "cycle:{p}"),
            PermSpec::Markov { model } => write!(f, "markov:k{}", model.k),
            PermSpec::Script { ranks } => {
                let parts: Vec<String> = ranks.iter().map(usize::to_string).collect();
                write!(f, "script:{}", parts.join(","))
            }
            PermSpec::Human => write!(f, "human"),
        }
    }
}

impl PermSpec {
    pub fn model(&self, k: usize) -> Option<TransitionModel> {
        match self {
            PermSpec::Uniform => Some(TransitionModel::uniform(k)),
            PermSpec::Avoider { p } => Some(TransitionModel::avoider(k, *p)),
            PermSpec::Sticky { p } => Some(TransitionModel::identity_sticky(k, *p)),
            PermSpec::Cycle { p } => Some(TransitionModel::cycle(k, *p)),
            PermSpec::Markov { model } => Some(model.clone()),
            PermSpec::Script { .. } | PermSpec::Human => None,
        }
    }

    /// Builds the source; `human` yields an external source and its handle.
    pub fn build(&self, k: usize, rng: ChaCha20Rng) -> Result<(PermutationSource, Option<ExternalHandle<usize>>), AgentError> {
        Ok(match self {
            PermSpec::Uniform => (PermutationSource::uniform(k, rng)?, None),
            PermSpec::Script { ranks } => (PermutationSource::scripted(k, ranks.clone())?, None),
            PermSpec::Human => {
                let (src, h) = PermutationSource::external(k, DEFAULT_EXTERNAL_TIMEOUT);
                (src, Some(h))
            }
            PermSpec::Markov { model } if model.k != k => {
                return Err(AgentError::BadModel(format!("model has k = {}, need {k}", model.k)))
            }
            other => (PermutationSource::markov(other.model(k).expect("parametric spec"), rng)?, None),
        })
    }
}

impl FromStr for AliceSpec {
    type Err = AgentError;

    /// `[cheat/|adaptive/]<source>`; bare `cheat` and `adaptive` use a uniform source.
    fn from_str(spec: &str) -> Result<Self, Self::Err> {
        let (strategy, rest) = match spec.split_once('/') {
            Some(("cheat", rest)) => (ProverStrategy::Cheat, rest),
            Some(("adaptive", rest)) => (ProverStrategy::Adaptive, rest),
            Some(("honest", rest)) => (ProverStrategy::Honest, rest),
            Some(_) => return Err(AgentError::BadSpec(spec.to_string())),
            None => match spec {
                "cheat" => (ProverStrategy::Cheat, "uniform"),
                "adaptive" => (ProverStrategy::Adaptive, "uniform"),
                "honest" => (ProverStrategy::Honest, "uniform"),
                other => (ProverStrategy::Honest, other),
            },
        };
        Ok(AliceSpec {
            strategy,
            source: rest.parse()?,
        })
    }
}

impl fmt::Display for AliceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.strategy {
            ProverStrategy::Honest => write!(f, "{}", self.source),
            ProverStrategy::Cheat => write!(f, "cheat/{}", self.source),
            ProverStrategy::Adaptive => write!(f, "adaptive/{}", self.source),
        }
    }
}

fn parse_edge(s: &str) -> Option<Edge> {
    let (u, v) = s.split_once('-')?;
    Some((u.trim().parse().ok()?, v.trim().parse().ok()?))
}

impl FromStr for BobSpec {
    type Err = AgentError;

    /// `uniform`, `weighted:w0,w1,...`, `recency:<decay>[:<memory>]`,
    /// `script:u-v,u-v,...` (0-indexed, inline or file), `human`.
    fn from_str(spec: &str) -> Result<Self, Self::Err> {
        let (kind, arg) = spec.split_once(':').unwrap_or((spec, ""));
        let bad = || AgentError::BadSpec(spec.to_string());
        Ok(match kind {
            "uniform" if arg.is_empty() => BobSpec::Uniform,
            "human" if arg.is_empty() => BobSpec::Human,
            "weighted" => BobSpec::Weighted {
                weights: arg
                    .split(',')
                    .map(|w| w.trim().parse().map_err(|_| bad()))
                    .collect::<Result<_, _>>()?,
            },
            "recency" => {
                let (d, mem) = arg.split_once(':').unwrap_or((arg, "1"));
                BobSpec::Recency {
                    decay: parse_prob(d, spec)?,
                    memory: mem.parse().map_err(|_| bad())?,
                }
            }
            "script" if !arg.is_empty() => BobSpec::Script {
                edges: list_or_file(arg)?
                    .split(|c: char| c == ',' || c == ';' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(|s| parse_edge(s).ok_or_else(bad))
                    .collect::<Result<_, _>>()?,
            },
            _ => return Err(bad()),
        })
    }
}

impl fmt::Display for BobSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BobSpec::Uniform => write!(f, "uniform"),
            BobSpec::Human => write!(f, "human"),
            BobSpec::Weighted { weights } => {
                let parts: Vec<String> = weights.iter().map(f64::to_string).collect();
                write!(f, "weighted:{}", parts.join(","))
            }
            BobSpec::Recency { decay, memory } => write!(f, "recency:{decay}:{memory}"),
            BobSpec::Script { edges } => {
                let parts: Vec<String> = edges.iter().map(|(u, v)| format!("{u}-{v}")).collect();
                write!(f, "script:{}", parts.join(","))
            }
        }
    }
}

impl BobSpec {
    pub fn build(&self, rng: ChaCha20Rng) -> Result<(EdgeSelector, Option<ExternalHandle<Edge>>), AgentError> {
        Ok(match self {
            BobSpec::Uniform => (EdgeSelector::uniform(rng), None),
            BobSpec::Weighted { weights } => (EdgeSelector::weighted(weights.clone(), rng)?, None),
            BobSpec::Recency { decay, memory } => (EdgeSelector::recency(*decay, *memory, rng)?, None),
            BobSpec::Script { edges } => (EdgeSelector::scripted(edges.clone()), None),
            BobSpec::Human => {
                let (sel, h) = EdgeSelector::external(DEFAULT_EXTERNAL_TIMEOUT);
                (sel, Some(h))
            }
        })
    }
}

/// Simulated (or human-steered) prover.
#[derive(Debug)]
pub struct SimProver {
    label: String,
    strategy: ProverStrategy,
    assignment: Coloring,
    source: PermutationSource,
    cheat_seed: u64,
    challenges: Vec<Edge>,
    current: Option<ProverRound>,
}

impl SimProver {
    /// `assignment` is the secret for an honest prover or the starting guess
    /// for a cheater (see [`cheater`](Self::cheater)).
    pub fn new(label: impl Into<String>, strategy: ProverStrategy, assignment: Coloring, source: PermutationSource, cheat_seed: u64) -> Self {
        SimProver {
            label: label.into(),
            strategy,
            assignment,
            source,
            cheat_seed,
            challenges: Vec::new(),
            current: None,
        }
    }

    /// A prover that runs the weighted coloring search against uniform
    /// challenges before the session starts.
    pub fn cheater(label: impl Into<String>, g: &Graph, source: PermutationSource, seed: u64) -> Result<Self, AgentError> {
        let q = crate::attacks::EdgeDistribution::uniform(g.m());
        let assignment = cheat_coloring(g, &q, seed)?;
        Ok(Self::new(label, ProverStrategy::Cheat, assignment, source, seed))
    }

    /// Builds the prover for `spec`. Honest provers need `secret`; cheating
    /// ones compute their assignment on `g`.
    pub fn from_spec(spec: &AliceSpec, g: &Graph, secret: Option<&Coloring>, seed: u64) -> Result<(Self, Option<ExternalHandle<usize>>), AgentError> {
        let (source, handle) = spec.source.build(3, stream_rng(seed, ALICE_STREAM))?;
        let label = spec.to_string();
        let cheat_seed = seed ^ CHEAT_STREAM.rotate_left(32);
        let prover = match (spec.strategy, secret) {
            (ProverStrategy::Honest, Some(c)) => Self::new(label, ProverStrategy::Honest, c.clone(), source, cheat_seed),
            (ProverStrategy::Honest, None) => return Err(AgentError::BadSpec(format!("{label}: honest prover needs a coloring"))),
            (ProverStrategy::Cheat, _) => Self::cheater(label, g, source, cheat_seed)?,
            (ProverStrategy::Adaptive, _) => {
                let mut p = Self::cheater(label, g, source, cheat_seed)?;
                p.strategy = ProverStrategy::Adaptive;
                p
            }
        };
        Ok((prover, handle))
    }

    pub fn assignment(&self) -> &Coloring {
        &self.assignment
    }

    pub fn source(&self) -> &PermutationSource {
        &self.source
    }

    pub fn source_mut(&mut self) -> &mut PermutationSource {
        &mut self.source
    }

    /// Commits with an explicit permutation (human input path).
    pub fn commit_with(&mut self, g: &Graph, phi: &Permutation, salt_rng: &mut dyn RngCore) -> Result<CommitMessage, AgentError> {
        if self.strategy == ProverStrategy::Adaptive && !self.challenges.is_empty() {
            let q = predict_edge_distribution(&self.challenges, g, 1, DEFAULT_SMOOTHING).map_err(|e| AgentError::BadSpec(e.to_string()))?;
            self.assignment = cheat_coloring(g, &q, self.cheat_seed.wrapping_add(self.challenges.len() as u64))?;
        }
        let (commitments, round) = prover_commit_round(&self.assignment, phi, salt_rng).map_err(|e| match e {
            ProtocolError::Agent(a) => a,
            other => AgentError::BadSpec(other.to_string()),
        })?;
        self.current = Some(round);
        Ok(CommitMessage {
            commitments,
            phi_rank: Some(phi.rank()),
        })
    }
}

impl ProverAgent for SimProver {
    fn descriptor(&self) -> String {
        self.label.clone()
    }

    fn commit_round(&mut self, g: &Graph, salt_rng: &mut dyn RngCore) -> Result<CommitMessage, AgentError> {
        let phi = self.source.sample()?;
        self.commit_with(g, &phi, salt_rng)
    }

    fn open(&mut self, g: &Graph, edge: Edge) -> Result<(Opening, Opening), ProtocolError> {
        let round = self.current.as_mut().ok_or(ProtocolError::NoChallenge)?;
        round.receive_challenge(g, edge)?;
        let out = round.open(g, edge)?;
        self.challenges.push(edge);
        self.current = None;
        Ok(out)
    }
}

#[derive(Debug)]
pub struct SimVerifier {
    label: String,
    selector: EdgeSelector,
}

impl SimVerifier {
    pub fn new(label: impl Into<String>, selector: EdgeSelector) -> Self {
        SimVerifier {
            label: label.into(),
            selector,
        }
    }

    pub fn from_spec(spec: &BobSpec, seed: u64) -> Result<(Self, Option<ExternalHandle<Edge>>), AgentError> {
        let (sel, handle) = spec.build(stream_rng(seed, BOB_STREAM))?;
        Ok((Self::new(spec.to_string(), sel), handle))
    }

    pub fn selector(&self) -> &EdgeSelector {
        &self.selector
    }

    pub fn selector_mut(&mut self) -> &mut EdgeSelector {
        &mut self.selector
    }
}

impl VerifierAgent for SimVerifier {
    fn descriptor(&self) -> String {
        self.label.clone()
    }

    fn challenge(&mut self, g: &Graph) -> Result<Edge, AgentError> {
        self.selector.select(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> ChaCha20Rng {
        stream_rng(seed, 7)
    }

    fn within_3_sigma(count: u64, trials: u64, p: f64) -> bool {
        let sigma = crate::stats::binomial_sigma(trials, p);
        (count as f64 - trials as f64 * p).abs() <= 3.0 * sigma
    }

    #[test]
    fn uniform_ranks_are_balanced() {
        let mut src = PermutationSource::uniform(3, rng(1)).unwrap();
        let mut counts = [0u64; 6];
        for _ in 0..60_000 {
            counts[src.sample().unwrap().rank()] += 1;
        }
        for c in counts {
            assert!(within_3_sigma(c, 60_000, 1.0 / 6.0), "{counts:?}");
        }
    }

    #[test]
    fn uniform_is_reproducible() {
        let draw = |seed| {
            let mut s = PermutationSource::uniform(3, rng(seed)).unwrap();
            (0..50).map(|_| s.sample().unwrap().rank()).collect::<Vec<_>>()
        };
        assert_eq!(draw(3), draw(3));
        assert_ne!(draw(3), draw(4));
    }

    #[test]
    fn scripted_source() {
        let mut s = PermutationSource::scripted(3, vec![0, 3, 5]).unwrap();
        let got: Vec<usize> = (0..3).map(|_| s.sample().unwrap().rank()).collect();
        assert_eq!(got, vec![0, 3, 5]);
        assert_eq!(s.sample(), Err(AgentError::ScriptExhausted(3)));
        assert!(PermutationSource::scripted(2, vec![2]).is_err());
    }

    #[test]
    fn strict_avoider_never_repeats() {
        let model = TransitionModel::avoider(3, 1.0);
        assert_eq!(model.rows[2][2], 0.0);
        assert!((model.rows[2][3] - 0.2).abs() < 1e-15);
        let mut s = PermutationSource::markov(model, rng(2)).unwrap();
        let seq: Vec<usize> = (0..5_000).map(|_| s.sample().unwrap().rank()).collect();
        assert!(seq.windows(2).all(|w| w[0] != w[1]));
        assert_eq!(s.history(), seq.as_slice());
    }

    #[test]
    fn presets_are_stochastic() {
        for k in 2..=4 {
            for p in [0.0, 0.3, 1.0] {
                for m in [TransitionModel::avoider(k, p), TransitionModel::identity_sticky(k, p), TransitionModel::cycle(k, p)] {
                    m.validate().unwrap();
                }
            }
            TransitionModel::uniform(k).validate().unwrap();
        }
        let bad = TransitionModel {
            rows: vec![vec![0.5; 2], vec![1.0, 0.1]],
            ..TransitionModel::uniform(2)
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn external_source() {
        let (mut src, handle) = PermutationSource::external(3, Duration::from_millis(20));
        assert_eq!(src.try_sample(), Err(AgentError::NoInput));
        assert_eq!(src.sample(), Err(AgentError::Timeout));
        handle.submit(4).unwrap();
        assert_eq!(src.try_sample().unwrap().rank(), 4);
        handle.submit(9).unwrap();
        assert!(src.sample().is_err());
        drop(handle);
        assert_eq!(src.sample(), Err(AgentError::Disconnected));
    }

    #[test]
    fn selectors() {
        let g = Graph::complete(4).unwrap();
        let mut w = EdgeSelector::weighted(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0], rng(1)).unwrap();
        assert!((0..100).all(|_| w.select(&g).unwrap() == (0, 1)));
        let mut short = EdgeSelector::weighted(vec![1.0, 1.0], rng(1)).unwrap();
        assert!(matches!(short.select(&g), Err(AgentError::WeightCount { expected: 6, found: 2 })));

        let mut u = EdgeSelector::uniform(rng(2));
        let mut counts = [0u64; 6];
        for _ in 0..60_000 {
            counts[g.edge_index(u.select(&g).unwrap()).unwrap()] += 1;
        }
        assert!(counts.iter().all(|&c| within_3_sigma(c, 60_000, 1.0 / 6.0)), "{counts:?}");

        let mut r = EdgeSelector::recency(0.0, 1, rng(3)).unwrap();
        let picks: Vec<Edge> = (0..2_000).map(|_| r.select(&g).unwrap()).collect();
        assert!(picks.windows(2).all(|p| p[0] != p[1]));

        let mut s = EdgeSelector::scripted(vec![(0, 1), (2, 3)]);
        assert_eq!(s.select(&g).unwrap(), (0, 1));
        assert_eq!(s.select(&g).unwrap(), (2, 3));
        assert!(s.select(&g).is_err());

        let single = Graph::new(2, [(0, 1)]).unwrap();
        let mut u = EdgeSelector::uniform(rng(4));
        assert!((0..20).all(|_| u.select(&single).unwrap() == (0, 1)));
        let mut r = EdgeSelector::recency(0.0, 1, rng(4)).unwrap();
        assert!((0..5).all(|_| r.select(&single).unwrap() == (0, 1)));

        let mut bad = EdgeSelector::scripted(vec![(0, 9)]);
        assert_eq!(bad.select(&g), Err(AgentError::NonEdge(0, 9)));
    }

    #[test]
    fn fit_markov_cases() {
        let m = fit_markov(&[0, 0, 0, 0], 3, 0.0).unwrap();
        assert_eq!(m.rows[0][0], 1.0);
        assert_eq!(m.initial[0], 1.0);
        let m = fit_markov(&[0, 0, 0, 0], 3, 0.5).unwrap();
        assert!(m.rows[4].iter().all(|&p| (p - 1.0 / 6.0).abs() < 1e-15));
        assert!(fit_markov(&[], 3, 0.5).is_err());
        assert!(fit_markov(&[0], 3, 0.5).is_err());
        assert!(matches!(fit_markov(&[0, 6], 3, 0.5), Err(AgentError::SymbolOutOfRange { .. })));
    }

    #[test]
    fn fit_markov_recovers_uniform_and_models() {
        let mut src = PermutationSource::uniform(3, rng(5)).unwrap();
        let seq: Vec<usize> = (0..100_000).map(|_| src.sample().unwrap().rank()).collect();
        let fit = fit_markov(&seq, 3, DEFAULT_SMOOTHING).unwrap();
        assert!(fit.rows.iter().flatten().all(|&p| (p - 1.0 / 6.0).abs() < 0.02));

        for truth in [TransitionModel::cycle(3, 0.6), TransitionModel::avoider(3, 0.8)] {
            let mut src = PermutationSource::markov(truth.clone(), rng(6)).unwrap();
            let seq: Vec<usize> = (0..100_000).map(|_| src.sample().unwrap().rank()).collect();
            let fit = fit_markov(&seq, 3, DEFAULT_SMOOTHING).unwrap();
            for (a, b) in fit.rows.iter().flatten().zip(truth.rows.iter().flatten()) {
                assert!((a - b).abs() < 0.05);
            }
        }
    }

    #[test]
    fn bayes_rates() {
        assert!((TransitionModel::uniform(3).bayes_hit_rate() - 1.0 / 6.0).abs() < 1e-12);
        assert!((TransitionModel::avoider(3, 1.0).bayes_hit_rate() - 0.2).abs() < 1e-12);
        let pi = TransitionModel::cycle(3, 1.0).stationary();
        assert!(pi.iter().all(|p| (p - 1.0 / 6.0).abs() < 1e-9));
    }

    #[test]
    fn spec_strings() {
        let a: AliceSpec = "cheat".parse().unwrap();
        assert_eq!(a.strategy, ProverStrategy::Cheat);
        assert_eq!(a.source, PermSpec::Uniform);
        let a: AliceSpec = "sticky:0.9".parse().unwrap();
        assert_eq!(a.strategy, ProverStrategy::Honest);
        assert_eq!(a.to_string(), "sticky:0.9");
        let a: AliceSpec = "adaptive/avoider:1".parse().unwrap();
        assert_eq!(a.to_string(), "adaptive/avoider:1");
        assert_eq!("script:0,3,5".parse::<PermSpec>().unwrap(), PermSpec::Script { ranks: vec![0, 3, 5] });
        assert!("avoider:1.5".parse::<PermSpec>().is_err());
        assert!("bogus".parse::<AliceSpec>().is_err());
        assert!("markov:/nonexistent.json".parse::<PermSpec>().is_err());

        let b: BobSpec = "weighted:0.5,0.1".parse().unwrap();
        assert_eq!(b, BobSpec::Weighted { weights: vec![0.5, 0.1] });
        assert_eq!("recency:0".parse::<BobSpec>().unwrap(), BobSpec::Recency { decay: 0.0, memory: 1 });
        assert_eq!("script:0-1,2-3".parse::<BobSpec>().unwrap(), BobSpec::Script { edges: vec![(0, 1), (2, 3)] });
        for s in ["uniform", "human", "recency:0.5:2", "weighted:1,2"] {
            let b: BobSpec = s.parse().unwrap();
            assert_eq!(b.to_string().parse::<BobSpec>().unwrap(), b);
        }
        let json = serde_json::to_string(&AliceSpec { strategy: ProverStrategy::Honest, source: PermSpec::Sticky { p: 0.9 } }).unwrap();
        assert_eq!(json, r#"{"strategy":"honest","source":{"kind":"sticky","p":0.9}}"#);
    }
}
