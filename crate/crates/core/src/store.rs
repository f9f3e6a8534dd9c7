//! Append-only JSONL event log with per-session hash chaining and replay.
//!
//! One event per line:
//!
//! ```text
//! {"v":1,"seq":1,"ts_ms":1,"session":"sim-7-00000","kind":"session_created","payload":{...},"prev":"00..","hash":".."}
//! ```
//!
//! `hash` is SHA-256 over `prev` (32 raw bytes) followed by the compact JSON
//! of the line without `prev`/`hash`; `prev` is the previous line's hash in
//! the same session, zeros for the first. Payload keys `prover_only`,
//! `verifier_only` and `sealed` carry data that only one role (or no
//! streaming client) may see; see [`redact`].

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::commitment::{Commitment, Opening};
use crate::graph::Edge;
use crate::protocol::{verifier_check_round, RoundTranscript, RoundVerdict, SessionResult, SessionVerdict};

pub const SCHEMA_VERSION: u32 = 1;
pub const GENESIS: &str = "0000000000000000000000000000000000000000000000000000000000000000";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("sequence gap in session {session}: expected {expected}, got {got}")]
    Gap { session: String, expected: u64, got: u64 },
    #[error("corrupt log line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("replay verdict mismatch in round {round}: stored {stored:?}, recomputed {recomputed:?}")]
    VerdictMismatch {
        round: usize,
        stored: RoundVerdict,
        recomputed: RoundVerdict,
    },
    #[error("session verdict mismatch: stored {stored:?}, recomputed {recomputed:?}")]
    SessionVerdictMismatch {
        stored: SessionVerdict,
        recomputed: SessionVerdict,
    },
    #[error("hash chain broken at seq {0}")]
    ChainBroken(u64),
    #[error("malformed {kind} event at seq {seq}: {message}")]
    Payload { kind: EventKind, seq: u64, message: String },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl StoreError {
    /// Whether the log parsed but failed an integrity check.
    pub fn is_integrity(&self) -> bool {
        matches!(
            self,
            StoreError::VerdictMismatch { .. } | StoreError::SessionVerdictMismatch { .. } | StoreError::ChainBroken(_) | StoreError::Gap { .. }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    SessionCreated,
    CommitmentsPosted,
    ChallengePosted,
    OpeningsPosted,
    RoundVerdict,
    SessionVerdict,
    ExperimentStage,
    HumanInput,
}

impl std::fmt::Display for EventKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let v = serde_json::to_value(self).expect("unit enum");
        f.write_str(v.as_str().unwrap_or("?"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub v: u32,
    pub seq: u64,
    pub ts_ms: u64,
    pub session: String,
    pub kind: EventKind,
    pub payload: Value,
    pub prev: String,
    pub hash: String,
}

#[derive(Serialize)]
struct HashedBody<'a> {
    v: u32,
    seq: u64,
    ts_ms: u64,
    session: &'a str,
    kind: EventKind,
    payload: &'a Value,
}

fn chain_hash(prev: &str, body: &HashedBody<'_>) -> String {
    let mut h = Sha256::new();
    let mut prev_bytes = [0u8; 32];
    // an undecodable prev hashes as zeros and fails verification downstream
    let _ = hex::decode_to_slice(prev, &mut prev_bytes);
    h.update(prev_bytes);
    h.update(serde_json::to_vec(body).expect("serializable"));
    hex::encode(h.finalize())
}

impl EventRecord {
    pub fn compute_hash(&self) -> String {
        chain_hash(
            &self.prev,
            &HashedBody {
                v: self.v,
                seq: self.seq,
                ts_ms: self.ts_ms,
                session: &self.session,
                kind: self.kind,
                payload: &self.payload,
            },
        )
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }
}

/// Source of `ts_ms`. Logical time makes logs byte-reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clock {
    /// `ts_ms` equals the event's sequence number.
    Logical,
    Wall,
}

impl Clock {
    fn now(&self, seq: u64) -> u64 {
        match self {
            Clock::Logical => seq,
            Clock::Wall => std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_millis() as u64),
        }
    }
}

#[derive(Debug, Clone, Default)]
struct ChainState {
    last_seq: u64,
    last_hash: String,
}

/// Single-writer event log over any `Write` sink.
pub struct EventLog<W: Write> {
    sink: W,
    clock: Clock,
    chains: BTreeMap<String, ChainState>,
    sync: Option<fn(&mut W) -> std::io::Result<()>>,
}

impl<W: Write> EventLog<W> {
    pub fn new(sink: W, clock: Clock) -> Self {
        EventLog {
            sink,
            clock,
            chains: BTreeMap::new(),
            sync: None,
        }
    }

    /// Continues the chains of already-written events.
    pub fn resume(sink: W, clock: Clock, existing: &[EventRecord]) -> Self {
        let mut log = Self::new(sink, clock);
        for e in existing {
            log.chains.insert(
                e.session.clone(),
                ChainState {
                    last_seq: e.seq,
                    last_hash: e.hash.clone(),
                },
            );
        }
        log
    }

    pub fn next_seq(&self, session: &str) -> u64 {
        self.chains.get(session).map_or(1, |c| c.last_seq + 1)
    }

    /// Appends one event with an explicit sequence number, which must be the
    /// session's last + 1. The line is flushed before returning.
    pub fn append_event(&mut self, session: &str, seq: u64, kind: EventKind, payload: Value) -> Result<EventRecord, StoreError> {
        let expected = self.next_seq(session);
        if seq != expected {
            return Err(StoreError::Gap {
                session: session.to_string(),
                expected,
                got: seq,
            });
        }
        let prev = self
            .chains
            .get(session)
            .map_or_else(|| GENESIS.to_string(), |c| c.last_hash.clone());
        let mut rec = EventRecord {
            v: SCHEMA_VERSION,
            seq,
            ts_ms: self.clock.now(seq),
            session: session.to_string(),
            kind,
            payload,
            prev,
            hash: String::new(),
        };
        rec.hash = rec.compute_hash();
        writeln!(self.sink, "{}", rec.to_line())?;
        self.sink.flush()?;
        if let Some(sync) = self.sync {
            sync(&mut self.sink)?;
        }
        self.chains.insert(
            session.to_string(),
            ChainState {
                last_seq: seq,
                last_hash: rec.hash.clone(),
            },
        );
        Ok(rec)
    }

    /// Appends with the next sequence number.
    pub fn emit(&mut self, session: &str, kind: EventKind, payload: Value) -> Result<EventRecord, StoreError> {
        let seq = self.next_seq(session);
        self.append_event(session, seq, kind, payload)
    }

    pub fn into_inner(self) -> W {
        self.sink
    }
}

impl EventLog<File> {
    /// Opens (or creates) a log file for appending, resuming existing chains.
    pub fn open_file(path: &Path, clock: Clock) -> Result<Self, StoreError> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let existing = if path.exists() { load_events(path)? } else { Vec::new() };
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let mut log = Self::resume(file, clock, &existing);
        log.sync = Some(|f: &mut File| f.sync_data());
        Ok(log)
    }
}

pub fn session_path(dir: &Path, session_id: &str) -> PathBuf {
    dir.join("sessions").join(format!("{session_id}.jsonl"))
}

pub fn parse_events(text: &str) -> Result<Vec<EventRecord>, StoreError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let rec: EventRecord = serde_json::from_str(line).map_err(|e| StoreError::Corrupt {
                line: i + 1,
                message: e.to_string(),
            })?;
            if rec.v != SCHEMA_VERSION {
                return Err(StoreError::Corrupt {
                    line: i + 1,
                    message: format!("unsupported schema version {}", rec.v),
                });
            }
            Ok(rec)
        })
        .collect()
}

pub fn load_events(path: &Path) -> Result<Vec<EventRecord>, StoreError> {
    let reader = BufReader::new(File::open(path)?);
    let mut text = String::new();
    for line in reader.lines() {
        text.push_str(&line?);
        text.push('\n');
    }
    parse_events(&text)
}

/// One protocol round as recorded in the log.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordedRound {
    pub round: usize,
    pub commitments: Vec<Commitment>,
    pub edge: Option<Edge>,
    pub openings: Option<(Opening, Opening)>,
    pub verdict: Option<RoundVerdict>,
    pub phi_rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecord {
    pub session_id: String,
    pub events: Vec<EventRecord>,
    pub created: Option<Value>,
    pub rounds: Vec<RecordedRound>,
    pub verdict: Option<SessionVerdict>,
}

fn field<T: serde::de::DeserializeOwned>(e: &EventRecord, key: &str) -> Result<T, StoreError> {
    let v = e.payload.get(key).cloned().unwrap_or(Value::Null);
    serde_json::from_value(v).map_err(|err| StoreError::Payload {
        kind: e.kind,
        seq: e.seq,
        message: format!("`{key}`: {err}"),
    })
}

impl SessionRecord {
    pub fn from_events(session_id: &str, events: Vec<EventRecord>) -> Result<Self, StoreError> {
        let mut rec = SessionRecord {
            session_id: session_id.to_string(),
            events: Vec::new(),
            created: None,
            rounds: Vec::new(),
            verdict: None,
        };
        for e in &events {
            match e.kind {
                EventKind::SessionCreated => rec.created = Some(e.payload.clone()),
                EventKind::CommitmentsPosted => {
                    let phi_rank = e.payload.get("prover_only").and_then(|p| p.get("phi_rank")).and_then(Value::as_u64);
                    rec.rounds.push(RecordedRound {
                        round: field(e, "round")?,
                        commitments: field(e, "commitments")?,
                        edge: None,
                        openings: None,
                        verdict: None,
                        phi_rank: phi_rank.map(|r| r as usize),
                    });
                }
                EventKind::ChallengePosted | EventKind::OpeningsPosted | EventKind::RoundVerdict => {
                    let round: usize = field(e, "round")?;
                    let current = rec.rounds.last_mut().filter(|r| r.round == round).ok_or_else(|| StoreError::Payload {
                        kind: e.kind,
                        seq: e.seq,
                        message: format!("round {round} has no commitments"),
                    })?;
                    match e.kind {
                        EventKind::ChallengePosted => current.edge = Some(field(e, "edge")?),
                        EventKind::OpeningsPosted => current.openings = Some(field(e, "openings")?),
                        _ => current.verdict = Some(field(e, "result")?),
                    }
                }
                EventKind::SessionVerdict => rec.verdict = Some(field(e, "result")?),
                EventKind::ExperimentStage | EventKind::HumanInput => {}
            }
        }
        rec.events = events;
        Ok(rec)
    }

    /// Completed rounds as transcripts (rounds missing a verdict are skipped).
    pub fn transcripts(&self) -> Vec<RoundTranscript> {
        self.rounds
            .iter()
            .filter_map(|r| {
                Some(RoundTranscript {
                    round: r.round,
                    commitments: r.commitments.clone(),
                    edge: r.edge?,
                    openings: r.openings?,
                    verdict: r.verdict?,
                })
            })
            .collect()
    }

    /// Prover permutation ranks recorded in the log, in round order.
    pub fn permutation_ranks(&self) -> Vec<usize> {
        self.rounds.iter().filter_map(|r| r.phi_rank).collect()
    }

    pub fn sealed(&self) -> Option<&Value> {
        self.created.as_ref().and_then(|c| c.get("sealed"))
    }

    pub fn is_finished(&self) -> bool {
        self.verdict.is_some()
    }
}

/// Groups events by session, in order of first appearance.
pub fn sessions_from_events(events: Vec<EventRecord>) -> Result<Vec<SessionRecord>, StoreError> {
    let mut order: Vec<String> = Vec::new();
    let mut by_id: BTreeMap<String, Vec<EventRecord>> = BTreeMap::new();
    for e in events {
        if !by_id.contains_key(&e.session) {
            order.push(e.session.clone());
        }
        by_id.entry(e.session.clone()).or_default().push(e);
    }
    order
        .into_iter()
        .map(|id| {
            let evs = by_id.remove(&id).unwrap_or_default();
            SessionRecord::from_events(&id, evs)
        })
        .collect()
}

pub fn load_sessions(path: &Path) -> Result<Vec<SessionRecord>, StoreError> {
    sessions_from_events(load_events(path)?)
}

pub fn load_session(path: &Path, session_id: &str) -> Result<SessionRecord, StoreError> {
    load_sessions(path)?
        .into_iter()
        .find(|s| s.session_id == session_id)
        .ok_or_else(|| StoreError::UnknownSession(session_id.to_string()))
}

/// Checks sequence contiguity and every line's chained hash.
pub fn verify_chain(record: &SessionRecord) -> Result<(), StoreError> {
    let mut prev = GENESIS.to_string();
    for (i, e) in record.events.iter().enumerate() {
        let expected = i as u64 + 1;
        if e.seq != expected {
            return Err(StoreError::Gap {
                session: record.session_id.clone(),
                expected,
                got: e.seq,
            });
        }
        if e.prev != prev || e.compute_hash() != e.hash {
            return Err(StoreError::ChainBroken(e.seq));
        }
        prev = e.hash.clone();
    }
    Ok(())
}

/// Re-runs the verifier over every recorded round and checks the result
/// against the stored round and session verdicts, then checks the hash
/// chain. Returns the recomputed verdicts.
pub fn replay(record: &SessionRecord) -> Result<Vec<RoundVerdict>, StoreError> {
    let mut verdicts = Vec::new();
    for r in &record.rounds {
        let (Some(edge), Some(openings), Some(stored)) = (r.edge, r.openings, r.verdict) else {
            continue;
        };
        let recomputed = verifier_check_round(&r.commitments, edge, &openings);
        if recomputed != stored {
            return Err(StoreError::VerdictMismatch {
                round: r.round,
                stored,
                recomputed,
            });
        }
        verdicts.push(recomputed);
    }
    if let Some(stored) = &record.verdict {
        if !matches!(stored, SessionVerdict::Fault(_)) {
            let rounds = record.created.as_ref().and_then(|c| c.get("rounds")).and_then(Value::as_u64);
            let all_accept = verdicts.iter().all(RoundVerdict::is_accept);
            let complete = rounds.is_none_or(|r| verdicts.len() as u64 == r);
            let recomputed = if all_accept && complete {
                SessionVerdict::Accepted
            } else {
                SessionVerdict::Rejected
            };
            if *stored != recomputed {
                return Err(StoreError::SessionVerdictMismatch {
                    stored: stored.clone(),
                    recomputed,
                });
            }
        }
    }
    verify_chain(record)?;
    Ok(verdicts)
}

/// Which client an event stream is delivered to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Alice,
    Bob,
}

/// Strips everything the role must not see. `sealed` is removed for every
/// role.
pub fn redact(event: &EventRecord, role: Role) -> EventRecord {
    let mut e = event.clone();
    if let Value::Object(map) = &mut e.payload {
        map.remove("sealed");
        match role {
            Role::Alice => map.remove("verifier_only"),
            Role::Bob => map.remove("prover_only"),
        };
    }
    e
}

pub fn commitments_payload(round: usize, commitments: &[Commitment], phi_rank: Option<usize>) -> Value {
    let mut p = json!({ "round": round, "commitments": commitments });
    if let Some(r) = phi_rank {
        p["prover_only"] = json!({ "phi_rank": r });
    }
    p
}

pub fn challenge_payload(round: usize, edge: Edge) -> Value {
    json!({ "round": round, "edge": edge })
}

pub fn openings_payload(round: usize, openings: &(Opening, Opening)) -> Value {
    json!({ "round": round, "openings": openings })
}

pub fn round_verdict_payload(round: usize, verdict: RoundVerdict) -> Value {
    json!({ "round": round, "result": verdict })
}

pub fn session_verdict_payload(verdict: &SessionVerdict, rounds_played: usize) -> Value {
    json!({ "result": verdict, "rounds_played": rounds_played })
}

/// Writes a complete simulated session to `log`.
pub fn write_session<W: Write>(log: &mut EventLog<W>, session_id: &str, created: Value, result: &SessionResult) -> Result<(), StoreError> {
    log.emit(session_id, EventKind::SessionCreated, created)?;
    let ranks = result.permutations.iter().copied().chain(std::iter::repeat(None));
    for (t, rank) in result.transcripts.iter().zip(ranks) {
        log.emit(session_id, EventKind::CommitmentsPosted, commitments_payload(t.round, &t.commitments, rank))?;
        log.emit(session_id, EventKind::ChallengePosted, challenge_payload(t.round, t.edge))?;
        log.emit(session_id, EventKind::OpeningsPosted, openings_payload(t.round, &t.openings))?;
        log.emit(session_id, EventKind::RoundVerdict, round_verdict_payload(t.round, t.verdict))?;
    }
    log.emit(session_id, EventKind::SessionVerdict, session_verdict_payload(&result.verdict, result.rounds_played))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn append_sequence_rules() {
        let mut log = EventLog::new(Vec::new(), Clock::Logical);
        log.append_event("s", 1, EventKind::HumanInput, json!({"a": 1})).unwrap();
        log.append_event("s", 2, EventKind::HumanInput, json!({"a": 2})).unwrap();
        let err = log.append_event("s", 4, EventKind::HumanInput, json!({})).unwrap_err();
        assert!(matches!(err, StoreError::Gap { expected: 3, got: 4, .. }));
        // sessions are sequenced independently
        log.append_event("t", 1, EventKind::HumanInput, json!({})).unwrap();
        let text = String::from_utf8(log.into_inner()).unwrap();
        let events = parse_events(&text).unwrap();
        assert_eq!(events.len(), 3);
        assert_eq!(events[1].payload, json!({"a": 2}));
        let sessions = sessions_from_events(events).unwrap();
        assert_eq!(sessions.len(), 2);
        verify_chain(&sessions[0]).unwrap();
    }

    #[test]
    fn empty_and_corrupt_logs() {
        assert!(sessions_from_events(parse_events("").unwrap()).unwrap().is_empty());
        let err = parse_events("{\"v\":1}\n").unwrap_err();
        assert!(matches!(err, StoreError::Corrupt { line: 1, .. }));
        let mut log = EventLog::new(Vec::new(), Clock::Logical);
        log.emit("s", EventKind::HumanInput, json!({})).unwrap();
        let good = String::from_utf8(log.into_inner()).unwrap();
        let err = parse_events(&format!("{good}not json\n")).unwrap_err();
        assert!(matches!(err, StoreError::Corrupt { line: 2, .. }));
    }

    #[test]
    fn redaction() {
        let mut log = EventLog::new(Vec::new(), Clock::Logical);
        let e = log
            .emit(
                "s",
                EventKind::CommitmentsPosted,
                json!({"round": 0, "prover_only": {"phi_rank": 3}, "verifier_only": {"x": 1}, "sealed": {"seed": 9}}),
            )
            .unwrap();
        let bob = redact(&e, Role::Bob);
        assert!(bob.payload.get("prover_only").is_none() && bob.payload.get("sealed").is_none());
        assert!(bob.payload.get("verifier_only").is_some());
        let alice = redact(&e, Role::Alice);
        assert!(alice.payload.get("prover_only").is_some() && alice.payload.get("verifier_only").is_none());
    }
}
