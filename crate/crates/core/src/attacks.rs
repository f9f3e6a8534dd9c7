//! The two adversaries: a prover that cheats against predictable challenges
//! and a verifier that reconstructs the secret color classes from biased
//! permutations.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agents::TransitionModel;
use crate::error::{AgentError, AttackError};
use crate::graph::{conflict_weight, min_conflict_coloring, Coloring, Edge, Graph, DEFAULT_RESTARTS};
use crate::permutation::Permutation;
use crate::protocol::RoundTranscript;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeDistribution {
    /// Probability per edge, canonical order.
    pub probs: Vec<f64>,
}

impl EdgeDistribution {
    pub fn uniform(m: usize) -> Self {
        EdgeDistribution {
            probs: vec![1.0 / m as f64; m],
        }
    }

    pub fn new(probs: Vec<f64>) -> Result<Self, AttackError> {
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(AttackError::BadDistribution("negative or non-finite entry".into()));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(AttackError::BadDistribution(format!("sums to {sum}")));
        }
        Ok(EdgeDistribution { probs })
    }

    fn from_counts(counts: &[u64], smoothing: f64) -> Self {
        let total = counts.iter().sum::<u64>() as f64 + smoothing * counts.len() as f64;
        if total <= 0.0 {
            return Self::uniform(counts.len());
        }
        EdgeDistribution {
            probs: counts.iter().map(|&c| (c as f64 + smoothing) / total).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &[f64]) -> f64 {
        self.probs.iter().zip(other).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Estimates the verifier's next challenge from its past ones.
///
/// Order 0 is the smoothed frequency of each edge. Order 1 counts what
/// followed earlier occurrences of the most recent challenge, falling back
/// to order 0 when that edge has never been followed.
pub fn predict_edge_distribution(history: &[Edge], g: &Graph, order: u8, smoothing: f64) -> Result<EdgeDistribution, AttackError> {
    let m = g.m();
    let idx: Vec<usize> = history
        .iter()
        .map(|&e| g.edge_index(e).ok_or(AttackError::NonEdge(e.0, e.1)))
        .collect::<Result<_, _>>()?;
    if idx.is_empty() {
        return Ok(EdgeDistribution::uniform(m));
    }
    let mut marginal = vec![0u64; m];
    for &i in &idx {
        marginal[i] += 1;
    }
    let order0 = EdgeDistribution::from_counts(&marginal, smoothing);
    if order == 0 {
        return Ok(order0);
    }
    let last = *idx.last().expect("non-empty");
    let mut following = vec![0u64; m];
    for w in idx.windows(2).filter(|w| w[0] == last) {
        following[w[1]] += 1;
    }
    if following.iter().all(|&c| c == 0) {
        return Ok(order0);
    }
    Ok(EdgeDistribution::from_counts(&following, smoothing))
}

/// Probability that a uniformly drawn challenge from `q` hits a
/// monochromatic edge of `c`.
pub fn expected_catch(g: &Graph, c: &Coloring, q: &EdgeDistribution) -> Result<f64, AttackError> {
    Ok(conflict_weight(g, c, &q.probs)?)
}

/// Assignment minimizing the expected catch probability under `q`.
pub fn cheat_coloring(g: &Graph, q: &EdgeDistribution, seed: u64) -> Result<Coloring, AgentError> {
    Ok(min_conflict_coloring(g, &q.probs, seed, DEFAULT_RESTARTS)?)
}

/// The verifier's prior over the prover's permutations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PermModel {
    Uniform,
    Identity,
    Markov { model: TransitionModel },
}

impl PermModel {
    /// Marginal probability of each rank of `S_3`.
    pub fn weights(&self) -> Result<Vec<f64>, AttackError> {
        Ok(match self {
            PermModel::Uniform => vec![1.0 / 6.0; 6],
            PermModel::Identity => {
                let mut w = vec![0.0; 6];
                w[0] = 1.0;
                w
            }
            PermModel::Markov { model } => {
                if model.k != 3 {
                    return Err(AttackError::Agent(AgentError::BadModel(format!("need k = 3, got {}", model.k))));
                }
                model.stationary()
            }
        })
    }
}

impl FromStr for PermModel {
    type Err = AttackError;

    /// `uniform`, `identity`, or any permutation-source spec with a model
    /// (`sticky:0.9`, `avoider:1`, `markov:file.json`, ...).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(PermModel::Uniform),
            "identity" => Ok(PermModel::Identity),
            other => {
                let spec: crate::agents::PermSpec = other.parse()?;
                let model = spec.model(3).ok_or_else(|| AttackError::Agent(AgentError::BadSpec(other.to_string())))?;
                Ok(PermModel::Markov { model })
            }
        }
    }
}

impl fmt::Display for PermModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PermModel::Uniform => write!(f, "uniform"),
            PermModel::Identity => write!(f, "identity"),
            PermModel::Markov { model } => write!(f, "markov(k={}, order={})", model.k, model.order),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionHypothesis {
    pub n: usize,
    /// Up to three disjoint vertex groups; group `i` collects the vertices
    /// voted into secret class `i + 1`.
    pub classes: Vec<Vec<usize>>,
    /// Vote margin (top minus runner-up, as a share of the vertex's votes)
    /// per vertex; zero for uncovered vertices.
    pub margins: Vec<f64>,
}

impl PartitionHypothesis {
    pub fn empty(n: usize) -> Self {
        PartitionHypothesis {
            n,
            classes: vec![Vec::new(); 3],
            margins: vec![0.0; n],
        }
    }

    pub fn class_of(&self, v: usize) -> Option<usize> {
        self.classes.iter().position(|c| c.contains(&v))
    }

    pub fn covered(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.classes.iter().flatten().copied().collect();
        all.sort_unstable();
        all
    }

    pub fn from_coloring(c: &Coloring) -> Self {
        let mut h = Self::empty(c.len());
        for (v, &color) in c.colors().iter().enumerate() {
            h.classes[color as usize - 1].push(v);
            h.margins[v] = 1.0;
        }
        h
    }
}

const TIE_EPS: f64 = 1e-9;

/// Weighted-vote reconstruction of the secret color classes.
///
/// For every round and every candidate permutation `phi` (weighted by the
/// model), an opened vertex showing color `a` votes for class `phi^-1(a)`.
/// Each vertex takes its majority class; ties leave it uncovered, so a
/// uniform model never commits to anything.
pub fn infer_partition(transcripts: &[RoundTranscript], model: &PermModel) -> Result<PartitionHypothesis, AttackError> {
    let Some(first) = transcripts.first() else {
        return Ok(PartitionHypothesis::empty(0));
    };
    let n = first.commitments.len();
    for w in transcripts.windows(2) {
        if w[1].round <= w[0].round {
            return Err(AttackError::MixedSessions(format!("round {} follows round {}", w[1].round, w[0].round)));
        }
    }
    if let Some(t) = transcripts.iter().find(|t| t.commitments.len() != n) {
        return Err(AttackError::MixedSessions(format!("round {} has {} vertices, expected {n}", t.round, t.commitments.len())));
    }

    let weights = model.weights()?;
    let inverses: Vec<Permutation> = Permutation::all(3)
        .expect("S_3")
        .iter()
        .map(Permutation::inverse)
        .collect();
    let mut votes = vec![[0.0f64; 3]; n];
    for t in transcripts {
        for op in [t.openings.0, t.openings.1] {
            let v = op.vertex as usize;
            if v >= n || !(1..=3).contains(&op.color) {
                continue;
            }
            for (inv, &w) in inverses.iter().zip(&weights) {
                votes[v][inv.apply(op.color) as usize - 1] += w;
            }
        }
    }

    let mut h = PartitionHypothesis::empty(n);
    for (v, tally) in votes.iter().enumerate() {
        let total: f64 = tally.iter().sum();
        if total <= 0.0 {
            continue;
        }
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| tally[b].total_cmp(&tally[a]));
        let margin = (tally[order[0]] - tally[order[1]]) / total;
        if margin > TIE_EPS {
            h.classes[order[0]].push(v);
            h.margins[v] = margin;
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionScore {
    /// Fraction of vertices the hypothesis places in a class.
    pub coverage: f64,
    /// Share of covered vertex pairs classified correctly as same-class or
    /// different-class; `None` with fewer than two covered vertices.
    pub accuracy: Option<f64>,
    pub pairs: usize,
}

pub fn partition_accuracy(h: &PartitionHypothesis, truth: &Coloring) -> PartitionScore {
    let covered = h.covered();
    let class: Vec<Option<usize>> = (0..truth.len()).map(|v| h.class_of(v)).collect();
    let mut pairs = 0;
    let mut correct = 0;
    for (i, &u) in covered.iter().enumerate() {
        for &v in &covered[i + 1..] {
            if u >= truth.len() || v >= truth.len() {
                continue;
            }
            pairs += 1;
            let same_h = class[u] == class[v];
            let same_t = truth.color(u) == truth.color(v);
            if same_h == same_t {
                correct += 1;
            }
        }
    }
    PartitionScore {
        coverage: if truth.is_empty() { 0.0 } else { covered.len() as f64 / truth.len() as f64 },
        accuracy: (pairs > 0).then(|| correct as f64 / pairs as f64),
        pairs,
    }
}

/// JSON report for one attack run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub mode: String,
    pub perm_model: String,
    pub sessions: usize,
    pub rounds: usize,
    pub mean_coverage: f64,
    pub mean_accuracy: Option<f64>,
    pub full_recoveries: usize,
    pub per_session: Vec<SessionAttack>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionAttack {
    pub session: String,
    pub hypothesis: PartitionHypothesis,
    pub score: Option<PartitionScore>,
}

/// One session's transcripts for [`infer_report`], with the secret if known.
pub struct AttackInput<'a> {
    pub session: String,
    pub transcripts: &'a [RoundTranscript],
    pub truth: Option<&'a Coloring>,
}

/// Runs [`infer_partition`] on every session and summarizes coverage and
/// pair accuracy. A full recovery is complete coverage at accuracy 1.
pub fn infer_report(model: &PermModel, inputs: &[AttackInput<'_>]) -> Result<AttackReport, AttackError> {
    let mut per_session = Vec::with_capacity(inputs.len());
    for input in inputs {
        let hypothesis = infer_partition(input.transcripts, model)?;
        let score = input.truth.map(|c| partition_accuracy(&hypothesis, c));
        per_session.push(SessionAttack {
            session: input.session.clone(),
            hypothesis,
            score,
        });
    }
    let coverage = |a: &SessionAttack| {
        a.score
            .map_or_else(|| if a.hypothesis.n == 0 { 0.0 } else { a.hypothesis.covered().len() as f64 / a.hypothesis.n as f64 }, |s| s.coverage)
    };
    let accuracies: Vec<f64> = per_session.iter().filter_map(|a| a.score.and_then(|s| s.accuracy)).collect();
    let n = per_session.len().max(1) as f64;
    Ok(AttackReport {
        mode: "infer".into(),
        perm_model: model.to_string(),
        sessions: per_session.len(),
        rounds: inputs.iter().map(|i| i.transcripts.len()).sum(),
        mean_coverage: per_session.iter().map(coverage).sum::<f64>() / n,
        mean_accuracy: (!accuracies.is_empty()).then(|| accuracies.iter().sum::<f64>() / accuracies.len() as f64),
        full_recoveries: per_session
            .iter()
            .filter(|a| a.score.is_some_and(|s| s.coverage == 1.0 && s.accuracy == Some(1.0)))
            .count(),
        per_session,
    })
}

/// Report of the cheating-prover evaluation against a recorded verifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheatReport {
    pub challenges: usize,
    pub predicted: EdgeDistribution,
    /// Catch probability of the uniform-optimal cheat under the predicted distribution.
    pub catch_naive: f64,
    /// Catch probability of the cheat optimized for the predicted distribution.
    pub catch_adaptive: f64,
    pub success_naive: f64,
    pub success_adaptive: f64,
}

pub fn evaluate_cheat(g: &Graph, history: &[Edge], order: u8, smoothing: f64, seed: u64) -> Result<CheatReport, AttackError> {
    let predicted = predict_edge_distribution(history, g, order, smoothing)?;
    let naive = cheat_coloring(g, &EdgeDistribution::uniform(g.m()), seed)?;
    let adaptive = cheat_coloring(g, &predicted, seed)?;
    let catch_naive = expected_catch(g, &naive, &predicted)?;
    let catch_adaptive = expected_catch(g, &adaptive, &predicted)?;
    Ok(CheatReport {
        challenges: history.len(),
        catch_naive,
        catch_adaptive,
        success_naive: 1.0 - catch_naive,
        success_adaptive: 1.0 - catch_adaptive,
        predicted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::commitment::{Opening, Salt};
    use crate::graph::monochromatic_edges;
    use crate::protocol::RoundVerdict;

    fn k4() -> Graph {
        Graph::complete(4).unwrap()
    }

    #[test]
    fn prediction_basics() {
        let g = k4();
        let d = predict_edge_distribution(&[], &g, 0, 0.5).unwrap();
        assert!(d.probs.iter().all(|&p| (p - 1.0 / 6.0).abs() < 1e-15));
        let hist = vec![(0, 1); 100];
        let d = predict_edge_distribution(&hist, &g, 0, 0.0).unwrap();
        assert_eq!(d.probs[0], 1.0);
        let d = predict_edge_distribution(&hist, &g, 1, 0.0).unwrap();
        assert_eq!(d.probs[0], 1.0);
        assert!(matches!(predict_edge_distribution(&[(0, 7)], &g, 0, 0.0), Err(AttackError::NonEdge(0, 7))));
    }

    #[test]
    fn order1_follows_cycles() {
        let g = k4();
        let cycle = [(0, 1), (0, 2), (0, 3)];
        let hist: Vec<Edge> = cycle.iter().cycle().take(30).copied().collect();
        // last is (0,3), always followed by (0,1)
        let d = predict_edge_distribution(&hist, &g, 1, 0.0).unwrap();
        assert_eq!(d.probs[0], 1.0);
    }

    #[test]
    fn catch_probabilities() {
        let g = Graph::complete(3).unwrap();
        let q = EdgeDistribution::uniform(3);
        assert_eq!(expected_catch(&g, &Coloring::new(vec![1, 2, 3]).unwrap(), &q).unwrap(), 0.0);
        assert!((expected_catch(&g, &Coloring::new(vec![1, 1, 1]).unwrap(), &q).unwrap() - 1.0).abs() < 1e-12);

        let c = cheat_coloring(&k4(), &EdgeDistribution::uniform(6), 1).unwrap();
        assert!((expected_catch(&k4(), &c, &EdgeDistribution::uniform(6)).unwrap() - 1.0 / 6.0).abs() < 1e-12);

        let skew = EdgeDistribution::new(vec![0.5, 0.1, 0.1, 0.1, 0.1, 0.1]).unwrap();
        let c = cheat_coloring(&k4(), &skew, 1).unwrap();
        let bad = monochromatic_edges(&k4(), &c).unwrap();
        assert_eq!(bad.len(), 1);
        assert_ne!(bad[0], (0, 1));
        assert!((1.0 - expected_catch(&k4(), &c, &skew).unwrap() - 0.9).abs() < 1e-12);

        let (pg, _) = crate::graph::planted_3colorable(10, 0.5, 2).unwrap();
        let q = EdgeDistribution::uniform(pg.m());
        assert_eq!(expected_catch(&pg, &cheat_coloring(&pg, &q, 0).unwrap(), &q).unwrap(), 0.0);
        assert!(EdgeDistribution::new(vec![0.5, 0.6]).is_err());
    }

    fn transcript(round: usize, n: usize, opened: [(u32, u8); 2]) -> RoundTranscript {
        let op = |(vertex, color)| Opening { vertex, color, salt: Salt::default() };
        let (a, b) = (op(opened[0]), op(opened[1]));
        let mut commitments = vec![a.commitment(); n];
        commitments[a.vertex as usize] = a.commitment();
        commitments[b.vertex as usize] = b.commitment();
        RoundTranscript {
            round,
            commitments,
            edge: (a.vertex as usize, b.vertex as usize),
            openings: (a, b),
            verdict: RoundVerdict::Accept,
        }
    }

    #[test]
    fn identity_prover_on_triangle() {
        let ts = vec![
            transcript(0, 3, [(0, 1), (1, 2)]),
            transcript(1, 3, [(1, 2), (2, 3)]),
            transcript(2, 3, [(0, 1), (2, 3)]),
        ];
        let h = infer_partition(&ts, &PermModel::Identity).unwrap();
        assert_eq!(h.classes, vec![vec![0], vec![1], vec![2]]);
        let truth = Coloring::new(vec![1, 2, 3]).unwrap();
        let s = partition_accuracy(&h, &truth);
        assert_eq!((s.coverage, s.accuracy, s.pairs), (1.0, Some(1.0), 3));

        let h = infer_partition(&ts, &PermModel::Uniform).unwrap();
        assert!(h.covered().is_empty());
        let s = partition_accuracy(&h, &truth);
        assert_eq!((s.coverage, s.accuracy), (0.0, None));
    }

    #[test]
    fn mixed_sessions_rejected() {
        let ts = vec![transcript(3, 3, [(0, 1), (1, 2)]), transcript(1, 3, [(0, 1), (1, 2)])];
        assert!(matches!(infer_partition(&ts, &PermModel::Identity), Err(AttackError::MixedSessions(_))));
        let ts = vec![transcript(0, 3, [(0, 1), (1, 2)]), transcript(1, 4, [(0, 1), (1, 2)])];
        assert!(matches!(infer_partition(&ts, &PermModel::Identity), Err(AttackError::MixedSessions(_))));
    }

    #[test]
    fn exact_hypothesis_scores_one() {
        let (_, c) = crate::graph::planted_3colorable(12, 0.5, 1).unwrap();
        let h = PartitionHypothesis::from_coloring(&c);
        assert_eq!(partition_accuracy(&h, &c).accuracy, Some(1.0));
        // relabeled classes score the same
        let relabeled = Coloring::new(c.colors().iter().map(|&x| x % 3 + 1).collect()).unwrap();
        assert_eq!(partition_accuracy(&h, &relabeled).accuracy, Some(1.0));
    }

    #[test]
    fn perm_model_strings() {
        assert_eq!("uniform".parse::<PermModel>().unwrap(), PermModel::Uniform);
        assert_eq!("identity".parse::<PermModel>().unwrap(), PermModel::Identity);
        let PermModel::Markov { model } = "sticky:0.9".parse::<PermModel>().unwrap() else {
            panic!("expected markov")
        };
        assert!((model.stationary()[0] - (0.9 + 0.1 / 6.0)).abs() < 1e-9);
        assert!("human".parse::<PermModel>().is_err());
    }
}
