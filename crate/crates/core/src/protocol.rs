//! One round of the 3-coloring proof and the session runner.
//!
//! A round is: the prover permutes its colors and commits to every vertex,
//! the verifier picks an edge, the prover opens the two endpoints, the
//! verifier checks both openings and that the colors are distinct members of
//! `{1,2,3}`. [`Session`] enforces that order and records transcripts;
//! [`run_session`] drives it with two agents.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::commitment::{verify_opening, Commitment, Opening, Salt};
use crate::error::{AgentError, ProtocolError};
use crate::graph::{Coloring, Edge, Graph, COLORS};
use crate::permutation::Permutation;

pub const MAX_ROUNDS: usize = 10_000;

/// RNG stream used for commitment salts; agents derive their own streams.
pub const SALT_STREAM: u64 = 0;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn apply_permutation(phi: &Permutation, c: &Coloring) -> Result<Coloring, ProtocolError> {
    if phi.k() != 3 {
        return Err(ProtocolError::NotS3(phi.k()));
    }
    Ok(Coloring::new(c.colors().iter().map(|&x| phi.apply(x)).collect())?)
}

/// Prover-side state of one round: every opening, released only for the
/// challenged edge.
#[derive(Debug, Clone)]
pub struct ProverRound {
    openings: Vec<Opening>,
    challenge: Option<Edge>,
}

/// Commits to `phi` applied to `secret`, one fresh salt per vertex.
pub fn prover_commit_round<R: RngCore + ?Sized>(
    secret: &Coloring,
    phi: &Permutation,
    rng: &mut R,
) -> Result<(Vec<Commitment>, ProverRound), ProtocolError> {
    let permuted = apply_permutation(phi, secret)?;
    let openings: Vec<Opening> = permuted
        .colors()
        .iter()
        .enumerate()
        .map(|(v, &color)| Opening {
            vertex: v as u32,
            color,
            salt: Salt::random(rng),
        })
        .collect();
    let commitments = openings.iter().map(Opening::commitment).collect();
    Ok((
        commitments,
        ProverRound {
            openings,
            challenge: None,
        },
    ))
}

impl ProverRound {
    /// Builds a round from arbitrary openings, e.g. an assignment that is not
    /// a valid coloring.
    pub fn from_openings(openings: Vec<Opening>) -> (Vec<Commitment>, Self) {
        let commitments = openings.iter().map(Opening::commitment).collect();
        (
            commitments,
            ProverRound {
                openings,
                challenge: None,
            },
        )
    }

    pub fn receive_challenge(&mut self, g: &Graph, edge: Edge) -> Result<(), ProtocolError> {
        let idx = g.edge_index(edge).ok_or(ProtocolError::NonEdge(edge.0, edge.1))?;
        self.challenge = Some(g.edges()[idx]);
        Ok(())
    }

    /// Releases exactly the two openings of the challenged edge.
    pub fn open(&self, g: &Graph, edge: Edge) -> Result<(Opening, Opening), ProtocolError> {
        let idx = g.edge_index(edge).ok_or(ProtocolError::NonEdge(edge.0, edge.1))?;
        let requested = g.edges()[idx];
        let challenged = self.challenge.ok_or(ProtocolError::NoChallenge)?;
        if requested != challenged {
            return Err(ProtocolError::WrongEdge { requested, challenged });
        }
        Ok((self.openings[requested.0], self.openings[requested.1]))
    }

    pub fn openings(&self) -> &[Opening] {
        &self.openings
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    /// An opening does not match its commitment or belongs to the wrong vertex.
    BadOpening,
    OutOfRange,
    Monochromatic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict", content = "reason")]
pub enum RoundVerdict {
    Accept,
    Reject(RejectReason),
}

impl RoundVerdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, RoundVerdict::Accept)
    }
}

pub fn verifier_check_round(commitments: &[Commitment], edge: Edge, openings: &(Opening, Opening)) -> RoundVerdict {
    let (a, b) = openings;
    let matches = |op: &Opening, v: usize| {
        op.vertex as usize == v && commitments.get(v).is_some_and(|cm| verify_opening(cm, op))
    };
    if !(matches(a, edge.0) && matches(b, edge.1)) {
        return RoundVerdict::Reject(RejectReason::BadOpening);
    }
    if !(COLORS.contains(&a.color) && COLORS.contains(&b.color)) {
        return RoundVerdict::Reject(RejectReason::OutOfRange);
    }
    if a.color == b.color {
        return RoundVerdict::Reject(RejectReason::Monochromatic);
    }
    RoundVerdict::Accept
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub graph: Graph,
    pub rounds: usize,
    pub seed: u64,
    pub abort_on_reject: bool,
}

impl SessionConfig {
    /// `m²` rounds, capped at [`MAX_ROUNDS`].
    pub fn new(graph: Graph, seed: u64) -> Self {
        let m = graph.m();
        SessionConfig {
            rounds: m.saturating_mul(m).min(MAX_ROUNDS),
            graph,
            seed,
            abort_on_reject: true,
        }
    }

    pub fn with_rounds(mut self, rounds: usize) -> Self {
        self.rounds = rounds;
        self
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.rounds == 0 || self.rounds > MAX_ROUNDS {
            return Err(ProtocolError::Rounds {
                rounds: self.rounds,
                cap: MAX_ROUNDS,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundTranscript {
    pub round: usize,
    pub commitments: Vec<Commitment>,
    pub edge: Edge,
    pub openings: (Opening, Opening),
    pub verdict: RoundVerdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict", content = "fault")]
pub enum SessionVerdict {
    Accepted,
    Rejected,
    /// An agent broke the protocol API; no soundness conclusion.
    Fault(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    AwaitingPermutation,
    AwaitingChallenge,
    RoundDone,
    Finished,
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::AwaitingPermutation => "awaiting_permutation",
            Phase::AwaitingChallenge => "awaiting_challenge",
            Phase::RoundDone => "round_done",
            Phase::Finished => "finished",
        }
    }
}

/// Public state machine of one session. It sees only what the verifier sees
/// plus, when supplied, the prover's permutation rank for the record.
#[derive(Debug, Clone)]
pub struct Session {
    cfg: SessionConfig,
    salt_rng: ChaCha20Rng,
    phase: Phase,
    round: usize,
    pending: Option<Vec<Commitment>>,
    challenge: Option<Edge>,
    transcripts: Vec<RoundTranscript>,
    permutations: Vec<Option<usize>>,
    verdict: Option<SessionVerdict>,
}

impl Session {
    pub fn new(cfg: SessionConfig) -> Result<Self, ProtocolError> {
        cfg.validate()?;
        Ok(Session {
            salt_rng: stream_rng(cfg.seed, SALT_STREAM),
            cfg,
            phase: Phase::AwaitingPermutation,
            round: 0,
            pending: None,
            challenge: None,
            transcripts: Vec::new(),
            permutations: Vec::new(),
            verdict: None,
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }

    pub fn graph(&self) -> &Graph {
        &self.cfg.graph
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn transcripts(&self) -> &[RoundTranscript] {
        &self.transcripts
    }

    pub fn verdict(&self) -> Option<&SessionVerdict> {
        self.verdict.as_ref()
    }

    pub fn pending_commitments(&self) -> Option<&[Commitment]> {
        self.pending.as_deref()
    }

    pub fn challenge(&self) -> Option<Edge> {
        self.challenge
    }

    /// RNG the prover must draw its salts from.
    pub fn salt_rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.salt_rng
    }

    fn expect_phase(&self, want: Phase, action: &'static str) -> Result<(), ProtocolError> {
        if self.phase != want {
            return Err(ProtocolError::Phase {
                action,
                phase: self.phase.name(),
            });
        }
        Ok(())
    }

    pub fn post_commitments(&mut self, commitments: Vec<Commitment>, phi_rank: Option<usize>) -> Result<(), ProtocolError> {
        self.expect_phase(Phase::AwaitingPermutation, "commit")?;
        if commitments.len() != self.cfg.graph.n() {
            return Err(ProtocolError::CommitmentCount {
                expected: self.cfg.graph.n(),
                found: commitments.len(),
            });
        }
        self.pending = Some(commitments);
        self.permutations.push(phi_rank);
        self.phase = Phase::AwaitingChallenge;
        Ok(())
    }

    pub fn post_challenge(&mut self, edge: Edge) -> Result<Edge, ProtocolError> {
        self.expect_phase(Phase::AwaitingChallenge, "challenge")?;
        if self.challenge.is_some() {
            return Err(ProtocolError::Phase {
                action: "challenge",
                phase: "awaiting_opening",
            });
        }
        let idx = self
            .cfg
            .graph
            .edge_index(edge)
            .ok_or(ProtocolError::NonEdge(edge.0, edge.1))?;
        let edge = self.cfg.graph.edges()[idx];
        self.challenge = Some(edge);
        Ok(edge)
    }

    /// Checks the openings and closes the round.
    pub fn post_openings(&mut self, openings: (Opening, Opening)) -> Result<RoundVerdict, ProtocolError> {
        self.expect_phase(Phase::AwaitingChallenge, "open")?;
        let edge = self.challenge.ok_or(ProtocolError::NoChallenge)?;
        let opened = (openings.0.vertex, openings.1.vertex);
        if opened.0 as usize != edge.0 || opened.1 as usize != edge.1 {
            return Err(ProtocolError::WrongOpenings { opened, challenge: edge });
        }
        let commitments = self.pending.take().expect("commitments posted before challenge");
        let verdict = verifier_check_round(&commitments, edge, &openings);
        self.transcripts.push(RoundTranscript {
            round: self.round,
            commitments,
            edge,
            openings,
            verdict,
        });
        self.challenge = None;
        self.phase = Phase::RoundDone;
        Ok(verdict)
    }

    /// Moves past a finished round; returns the session verdict once the
    /// session is over.
    pub fn finish_round(&mut self) -> Result<Option<SessionVerdict>, ProtocolError> {
        self.expect_phase(Phase::RoundDone, "next_round")?;
        let last = self.transcripts.last().expect("round done implies a transcript");
        self.round += 1;
        let verdict = if !last.verdict.is_accept() && self.cfg.abort_on_reject {
            Some(SessionVerdict::Rejected)
        } else if self.round >= self.cfg.rounds {
            if self.transcripts.iter().all(|t| t.verdict.is_accept()) {
                Some(SessionVerdict::Accepted)
            } else {
                Some(SessionVerdict::Rejected)
            }
        } else {
            None
        };
        match &verdict {
            Some(v) => {
                self.verdict = Some(v.clone());
                self.phase = Phase::Finished;
            }
            None => self.phase = Phase::AwaitingPermutation,
        }
        Ok(verdict)
    }

    /// Ends the session with a fault verdict.
    pub fn fault(&mut self, err: &ProtocolError) -> SessionVerdict {
        let v = SessionVerdict::Fault(err.to_string());
        self.verdict = Some(v.clone());
        self.phase = Phase::Finished;
        self.pending = None;
        self.challenge = None;
        v
    }

    pub fn into_result(self, alice: String, bob: String) -> SessionResult {
        SessionResult {
            verdict: self.verdict.unwrap_or(SessionVerdict::Fault("session not finished".into())),
            rounds_played: self.transcripts.len(),
            transcripts: self.transcripts,
            seed: self.cfg.seed,
            alice,
            bob,
            permutations: self.permutations,
        }
    }
}

/// Message the prover sends in step 1.
#[derive(Debug, Clone)]
pub struct CommitMessage {
    pub commitments: Vec<Commitment>,
    /// Prover-private rank of the permutation used, kept for analysis only.
    pub phi_rank: Option<usize>,
}

pub trait ProverAgent {
    fn descriptor(&self) -> String;
    fn commit_round(&mut self, g: &Graph, salt_rng: &mut dyn RngCore) -> Result<CommitMessage, AgentError>;
    fn open(&mut self, g: &Graph, edge: Edge) -> Result<(Opening, Opening), ProtocolError>;
}

pub trait VerifierAgent {
    fn descriptor(&self) -> String;
    fn challenge(&mut self, g: &Graph) -> Result<Edge, AgentError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub verdict: SessionVerdict,
    pub rounds_played: usize,
    pub transcripts: Vec<RoundTranscript>,
    pub seed: u64,
    pub alice: String,
    pub bob: String,
    /// Prover-private permutation ranks, one per committed round.
    pub permutations: Vec<Option<usize>>,
}

impl SessionResult {
    pub fn verdicts(&self) -> Vec<RoundVerdict> {
        self.transcripts.iter().map(|t| t.verdict).collect()
    }
}

/// Runs one complete session. Protocol rejects end it with `Rejected`
/// (when `abort_on_reject`); agent misbehaviour ends it with `Fault`.
pub fn run_session(cfg: SessionConfig, alice: &mut dyn ProverAgent, bob: &mut dyn VerifierAgent) -> Result<SessionResult, ProtocolError> {
    let mut session = Session::new(cfg)?;
    while session.phase() != Phase::Finished {
        if let Err(err) = step_round(&mut session, alice, bob) {
            session.fault(&err);
        }
    }
    Ok(session.into_result(alice.descriptor(), bob.descriptor()))
}

fn step_round(session: &mut Session, alice: &mut dyn ProverAgent, bob: &mut dyn VerifierAgent) -> Result<(), ProtocolError> {
    let graph = session.graph().clone();
    let msg = alice.commit_round(&graph, session.salt_rng())?;
    session.post_commitments(msg.commitments, msg.phi_rank)?;
    let edge = bob.challenge(&graph)?;
    let edge = session.post_challenge(edge)?;
    let openings = alice.open(&graph, edge)?;
    session.post_openings(openings)?;
    session.finish_round()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoundnessBound {
    /// `(1 - 1/m)^R`.
    pub exact: f64,
    /// `exp(-R/m)`, equal to `e^{-m}` at `R = m²`.
    pub approx: f64,
}

pub fn soundness_bound(m: usize, rounds: usize) -> Result<SoundnessBound, ProtocolError> {
    if m == 0 {
        return Err(ProtocolError::Graph(crate::error::GraphError::NoEdges));
    }
    Ok(cheat_acceptance(m, 1, rounds))
}

/// Acceptance probability for a cheater with `bad` monochromatic edges
/// under uniform challenges: `(1 - bad/m)^R`.
pub fn cheat_acceptance(m: usize, bad: usize, rounds: usize) -> SoundnessBound {
    let q = 1.0 - bad as f64 / m as f64;
    SoundnessBound {
        exact: q.max(0.0).powi(rounds as i32),
        approx: (-(rounds as f64) * bad as f64 / m as f64).exp(),
    }
}
