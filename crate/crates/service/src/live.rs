//! One running session: protocol state, agents, and its event log.

use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use zk3col_core::error::ProtocolError;
use zk3col_core::graph::Edge;
use zk3col_core::permutation::Permutation;
use zk3col_core::protocol::{Phase, ProverAgent, Session, SessionResult, SessionVerdict, VerifierAgent};
use zk3col_core::runner::{Agents, SessionSetup};
use zk3col_core::store::{
    challenge_payload, commitments_payload, openings_payload, redact, round_verdict_payload, session_verdict_payload, Clock, EventKind,
    EventLog, EventRecord, Role, StoreError,
};

use crate::error::ApiError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Driver {
    Human,
    Simulated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roles {
    pub alice: Driver,
    pub bob: Driver,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokens {
    pub alice: String,
    pub bob: String,
}

/// Where a session's events go.
enum Sink {
    File(EventLog<File>),
    /// Recovery re-execution: events are regenerated but not written.
    Memory(EventLog<std::io::Sink>),
}

pub struct LiveSession {
    pub id: String,
    pub setup: SessionSetup,
    pub roles: Roles,
    pub tokens: Tokens,
    /// Owning experiment and stage index, if any.
    pub experiment: Option<(String, usize)>,
    session: Session,
    agents: Agents,
    events: Vec<EventRecord>,
    sink: Sink,
    /// Bumped on every accepted state change; timeouts compare against it.
    pub generation: u64,
}

/// Client-visible session state, already filtered for the caller's role.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PublicState {
    pub id: String,
    pub role: Option<Role>,
    pub roles: Roles,
    pub phase: &'static str,
    pub round: usize,
    pub rounds: usize,
    pub graph: zk3col_core::graph::Graph,
    pub commitments: Option<Vec<zk3col_core::commitment::Commitment>>,
    pub challenge: Option<Edge>,
    pub verdict: Option<SessionVerdict>,
    pub last_seq: u64,
    pub history: Vec<RoundSummary>,
    /// The prover's own earlier permutation ranks (Alice only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub my_permutations: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundSummary {
    pub round: usize,
    pub edge: Edge,
    pub colors: (u8, u8),
    pub verdict: zk3col_core::protocol::RoundVerdict,
}

fn parse<T: serde::de::DeserializeOwned>(v: &Value) -> Result<T, ApiError> {
    serde_json::from_value(v.clone()).map_err(|e| ApiError::internal(e.to_string()))
}

impl LiveSession {
    /// Creates the session, writes `session_created` and runs simulated
    /// roles until a human is needed. `log_path = None` keeps events in
    /// memory only.
    pub fn create(
        id: String,
        setup: SessionSetup,
        roles: Roles,
        tokens: Tokens,
        experiment: Option<(String, usize)>,
        log_path: Option<&Path>,
    ) -> Result<Self, ApiError> {
        setup.validate().map_err(|e| ApiError::bad_request(e.to_string()))?;
        if (roles.alice == Driver::Human) != matches!(setup.alice.source, zk3col_core::agents::PermSpec::Human)
            || (roles.bob == Driver::Human) != matches!(setup.bob, zk3col_core::agents::BobSpec::Human)
        {
            return Err(ApiError::bad_request("role drivers do not match agent specs"));
        }
        let sink = match log_path {
            Some(p) => Sink::File(EventLog::open_file(p, Clock::Wall)?),
            None => Sink::Memory(EventLog::new(std::io::sink(), Clock::Logical)),
        };
        let mut live = Self::build(id, setup, roles, tokens, experiment, sink)?;
        let created = live.created_payload();
        live.emit(EventKind::SessionCreated, created)?;
        live.advance()?;
        Ok(live)
    }

    fn build(
        id: String,
        setup: SessionSetup,
        roles: Roles,
        tokens: Tokens,
        experiment: Option<(String, usize)>,
        sink: Sink,
    ) -> Result<Self, ApiError> {
        let session = Session::new(setup.config()).map_err(|e| ApiError::bad_request(e.to_string()))?;
        let agents = setup.agents().map_err(|e| ApiError::bad_request(e.to_string()))?;
        Ok(LiveSession {
            id,
            setup,
            roles,
            tokens,
            experiment,
            session,
            agents,
            events: Vec::new(),
            sink,
            generation: 0,
        })
    }

    fn created_payload(&self) -> Value {
        let mut public = json!({ "roles": self.roles });
        if let Some((exp, stage)) = &self.experiment {
            public["experiment"] = json!({ "id": exp, "stage": stage });
        }
        self.setup.created_payload(public, json!({ "tokens": self.tokens }))
    }

    /// Rebuilds a session from its stored events by re-running it with the
    /// recorded human inputs, then continues appending to `log_path`.
    pub fn recover(id: &str, stored: Vec<EventRecord>, log_path: &Path) -> Result<Self, ApiError> {
        let created = stored
            .first()
            .filter(|e| e.kind == EventKind::SessionCreated)
            .ok_or_else(|| ApiError::internal(format!("{id}: log does not start with session_created")))?;
        let p = &created.payload;
        let setup = SessionSetup::from_created(p).map_err(|e| ApiError::internal(e.to_string()))?;
        let roles: Roles = parse(&p["roles"])?;
        let tokens: Tokens = parse(&p["sealed"]["tokens"])?;
        let experiment = p.get("experiment").and_then(|e| Some((e["id"].as_str()?.to_string(), e["stage"].as_u64()? as usize)));

        let sink = Sink::Memory(EventLog::new(std::io::sink(), Clock::Logical));
        let mut live = Self::build(id.to_string(), setup, roles, tokens, experiment, sink)?;
        let created = live.created_payload();
        live.emit(EventKind::SessionCreated, created)?;
        live.advance()?;
        for e in &stored[1..] {
            if e.kind != EventKind::HumanInput {
                continue;
            }
            let p = &e.payload;
            match p["role"].as_str() {
                Some("alice") => {
                    let rank = p["prover_only"]["rank"].as_u64().unwrap_or(u64::MAX) as usize;
                    live.submit_permutation(rank)?;
                }
                Some("bob") => {
                    let edge: Edge = parse(&p["edge"])?;
                    live.submit_challenge(edge)?;
                }
                _ => return Err(ApiError::internal(format!("{id}: bad human_input at seq {}", e.seq))),
            }
        }
        // an input timeout is the one ending not re-derivable from the inputs
        if stored.last().is_some_and(|e| e.kind == EventKind::SessionVerdict) && !live.is_finished() {
            live.fault(&ProtocolError::Agent(zk3col_core::error::AgentError::Timeout))?;
        }
        let same = live.events.len() == stored.len()
            && live
                .events
                .iter()
                .zip(&stored)
                .all(|(a, b)| a.seq == b.seq && a.kind == b.kind && a.payload == b.payload);
        if !same {
            return Err(ApiError::internal(format!("{id}: re-execution diverges from the stored log")));
        }
        live.events = stored;
        live.sink = Sink::File(EventLog::open_file(log_path, Clock::Wall)?);
        Ok(live)
    }

    fn emit(&mut self, kind: EventKind, payload: Value) -> Result<(), StoreError> {
        let rec = match &mut self.sink {
            Sink::File(log) => log.emit(&self.id, kind, payload)?,
            Sink::Memory(log) => log.emit(&self.id, kind, payload)?,
        };
        self.events.push(rec);
        self.generation += 1;
        Ok(())
    }

    pub fn phase(&self) -> Phase {
        self.session.phase()
    }

    pub fn is_finished(&self) -> bool {
        self.session.phase() == Phase::Finished
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    pub fn last_seq(&self) -> u64 {
        self.events.last().map_or(0, |e| e.seq)
    }

    /// Which human role the session is waiting on, if any.
    pub fn waiting_on(&self) -> Option<Role> {
        match self.session.phase() {
            Phase::AwaitingPermutation if self.roles.alice == Driver::Human => Some(Role::Alice),
            Phase::AwaitingChallenge if self.roles.bob == Driver::Human => Some(Role::Bob),
            _ => None,
        }
    }

    pub fn role_for_token(&self, token: &str) -> Option<Role> {
        if token == self.tokens.alice {
            Some(Role::Alice)
        } else if token == self.tokens.bob {
            Some(Role::Bob)
        } else {
            None
        }
    }

    /// Prover-side permutation ranks used so far.
    pub fn permutation_ranks(&self) -> Vec<usize> {
        self.agents.alice.source().history().to_vec()
    }

    pub fn result(&self) -> SessionResult {
        self.session.clone().into_result(self.agents.alice.descriptor(), self.agents.bob.descriptor())
    }

    pub fn events_for(&self, role: Role, after: u64) -> Vec<EventRecord> {
        self.events.iter().filter(|e| e.seq > after).map(|e| redact(e, role)).collect()
    }

    pub fn public_state(&self, role: Option<Role>, show_history: bool) -> PublicState {
        let history = self
            .session
            .transcripts()
            .iter()
            .map(|t| RoundSummary {
                round: t.round,
                edge: t.edge,
                colors: (t.openings.0.color, t.openings.1.color),
                verdict: t.verdict,
            })
            .collect();
        PublicState {
            id: self.id.clone(),
            role,
            roles: self.roles.clone(),
            phase: self.session.phase().name(),
            round: self.session.round(),
            rounds: self.setup.rounds,
            graph: self.setup.graph.clone(),
            commitments: self.session.pending_commitments().map(<[_]>::to_vec),
            challenge: self.session.challenge(),
            verdict: self.session.verdict().cloned(),
            last_seq: self.last_seq(),
            history,
            my_permutations: (role == Some(Role::Alice) && show_history).then(|| self.permutation_ranks()),
            experiment: self.experiment.as_ref().map(|(e, _)| e.clone()),
        }
    }

    fn phase_error(&self, action: &str) -> ApiError {
        if self.is_finished() {
            ApiError::conflict("session_finished", format!("session {} is finished", self.id))
        } else {
            ApiError::conflict("wrong_phase", format!("{action} not allowed in phase {}", self.session.phase().name()))
        }
    }

    /// Human prover's permutation for this round.
    pub fn submit_permutation(&mut self, rank: usize) -> Result<(), ApiError> {
        if self.roles.alice != Driver::Human {
            return Err(ApiError::forbidden("the prover is simulated"));
        }
        if self.session.phase() != Phase::AwaitingPermutation {
            return Err(self.phase_error("submit_permutation"));
        }
        Permutation::from_rank(3, rank).map_err(|e| ApiError::bad_request(e.to_string()))?;
        let round = self.session.round();
        self.emit(
            EventKind::HumanInput,
            json!({ "role": "alice", "action": "submit_permutation", "round": round, "prover_only": { "rank": rank } }),
        )?;
        let handle = self.agents.alice_input.as_ref().expect("human prover has an input handle");
        let result = handle
            .submit(rank)
            .map_err(ProtocolError::from)
            .and_then(|_| self.agents.alice.source_mut().try_sample().map_err(ProtocolError::from))
            .and_then(|phi| {
                let graph = self.session.graph().clone();
                let msg = self.agents.alice.commit_with(&graph, &phi, self.session.salt_rng())?;
                self.session.post_commitments(msg.commitments.clone(), msg.phi_rank)?;
                Ok(msg)
            });
        match result {
            Ok(msg) => {
                self.emit(EventKind::CommitmentsPosted, commitments_payload(round, &msg.commitments, msg.phi_rank))?;
                self.advance()
            }
            Err(e) => self.fault(&e),
        }
    }

    /// Human verifier's challenge for this round.
    pub fn submit_challenge(&mut self, edge: Edge) -> Result<(), ApiError> {
        if self.roles.bob != Driver::Human {
            return Err(ApiError::forbidden("the verifier is simulated"));
        }
        if self.session.phase() != Phase::AwaitingChallenge {
            return Err(self.phase_error("submit_challenge"));
        }
        if !self.session.graph().contains_edge(edge) {
            return Err(ApiError::bad_request(format!("({}, {}) is not an edge", edge.0, edge.1)));
        }
        let round = self.session.round();
        self.emit(
            EventKind::HumanInput,
            json!({ "role": "bob", "action": "submit_challenge", "round": round, "edge": edge }),
        )?;
        let handle = self.agents.bob_input.as_ref().expect("human verifier has an input handle");
        let graph = self.session.graph().clone();
        let picked = handle
            .submit(edge)
            .and_then(|_| self.agents.bob.selector_mut().try_select(&graph))
            .map_err(ProtocolError::from);
        match picked {
            Ok(edge) => self.challenge_and_open(edge).and_then(|_| self.advance()),
            Err(e) => self.fault(&e),
        }
    }

    /// Runs simulated roles until a human must act or the session ends.
    fn advance(&mut self) -> Result<(), ApiError> {
        loop {
            match self.session.phase() {
                Phase::Finished => return Ok(()),
                Phase::AwaitingPermutation if self.roles.alice == Driver::Simulated => {
                    let graph = self.session.graph().clone();
                    let round = self.session.round();
                    let msg = self
                        .agents
                        .alice
                        .commit_round(&graph, self.session.salt_rng())
                        .map_err(ProtocolError::from)
                        .and_then(|msg| {
                            self.session.post_commitments(msg.commitments.clone(), msg.phi_rank)?;
                            Ok(msg)
                        });
                    match msg {
                        Ok(msg) => self.emit(EventKind::CommitmentsPosted, commitments_payload(round, &msg.commitments, msg.phi_rank))?,
                        Err(e) => return self.fault(&e),
                    }
                }
                Phase::AwaitingChallenge if self.roles.bob == Driver::Simulated => {
                    let graph = self.session.graph().clone();
                    match self.agents.bob.challenge(&graph) {
                        Ok(edge) => self.challenge_and_open(edge)?,
                        Err(e) => return self.fault(&e.into()),
                    }
                }
                Phase::RoundDone => unreachable!("rounds are closed as soon as they are checked"),
                _ => return Ok(()),
            }
        }
    }

    /// Posts the challenge, collects the prover's openings, checks them and
    /// closes the round.
    fn challenge_and_open(&mut self, edge: Edge) -> Result<(), ApiError> {
        let round = self.session.round();
        let graph = self.session.graph().clone();
        let edge = match self.session.post_challenge(edge) {
            Ok(e) => e,
            Err(e) => return self.fault(&e),
        };
        self.emit(EventKind::ChallengePosted, challenge_payload(round, edge))?;
        let opened = self.agents.alice.open(&graph, edge).and_then(|o| {
            let verdict = self.session.post_openings(o)?;
            Ok((o, verdict))
        });
        let (openings, verdict) = match opened {
            Ok(x) => x,
            Err(e) => return self.fault(&e),
        };
        self.emit(EventKind::OpeningsPosted, openings_payload(round, &openings))?;
        self.emit(EventKind::RoundVerdict, round_verdict_payload(round, verdict))?;
        match self.session.finish_round() {
            Ok(Some(v)) => {
                let played = self.session.transcripts().len();
                self.emit(EventKind::SessionVerdict, session_verdict_payload(&v, played))?;
            }
            Ok(None) => {}
            Err(e) => return self.fault(&e),
        }
        Ok(())
    }

    /// Ends the session with a fault verdict.
    pub fn fault(&mut self, err: &ProtocolError) -> Result<(), ApiError> {
        if self.is_finished() {
            return Ok(());
        }
        let v = self.session.fault(err);
        let played = self.session.transcripts().len();
        self.emit(EventKind::SessionVerdict, session_verdict_payload(&v, played))?;
        Ok(())
    }

    /// Faults the session if it is still waiting on the same human input.
    pub fn expire(&mut self, generation: u64) -> Result<bool, ApiError> {
        if generation != self.generation || self.waiting_on().is_none() {
            return Ok(false);
        }
        self.fault(&ProtocolError::Agent(zk3col_core::error::AgentError::Timeout))?;
        Ok(true)
    }
}
