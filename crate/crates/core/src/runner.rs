//! Serializable session setups and batch simulation.

use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::agents::{AliceSpec, BobSpec, ExternalHandle, ProverStrategy, SimProver, SimVerifier};
use crate::error::{AgentError, ProtocolError};
use crate::graph::{is_proper, min_conflict_coloring, Coloring, Edge, Graph, DEFAULT_RESTARTS};
use crate::protocol::{run_session, SessionConfig, SessionResult};
use crate::store::{write_session, EventLog, StoreError};

fn default_true() -> bool {
    true
}

/// Everything needed to rebuild a session and its agents bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSetup {
    pub graph: Graph,
    pub rounds: usize,
    pub seed: u64,
    #[serde(default = "default_true")]
    pub abort_on_reject: bool,
    pub alice: AliceSpec,
    pub bob: BobSpec,
    /// The honest prover's coloring.
    #[serde(default)]
    pub secret: Option<Coloring>,
}

pub struct Agents {
    pub alice: SimProver,
    pub bob: SimVerifier,
    pub alice_input: Option<ExternalHandle<usize>>,
    pub bob_input: Option<ExternalHandle<Edge>>,
}

impl SessionSetup {
    /// `rounds = None` means the default of m² (capped).
    pub fn new(graph: Graph, rounds: Option<usize>, seed: u64, alice: AliceSpec, bob: BobSpec, secret: Option<Coloring>) -> Self {
        let cfg = SessionConfig::new(graph, seed);
        SessionSetup {
            rounds: rounds.unwrap_or(cfg.rounds),
            graph: cfg.graph,
            seed,
            abort_on_reject: true,
            alice,
            bob,
            secret,
        }
    }

    pub fn config(&self) -> SessionConfig {
        SessionConfig {
            graph: self.graph.clone(),
            rounds: self.rounds,
            seed: self.seed,
            abort_on_reject: self.abort_on_reject,
        }
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        self.config().validate()?;
        if self.alice.strategy == ProverStrategy::Honest {
            match &self.secret {
                Some(c) if is_proper(&self.graph, c)? => {}
                Some(_) => return Err(AgentError::BadSpec("secret coloring is not proper".into()).into()),
                None => return Err(AgentError::BadSpec("honest prover needs a coloring".into()).into()),
            }
        }
        if let BobSpec::Weighted { weights } = &self.bob {
            if weights.len() != self.graph.m() {
                return Err(AgentError::WeightCount {
                    expected: self.graph.m(),
                    found: weights.len(),
                }
                .into());
            }
        }
        Ok(())
    }

    pub fn agents(&self) -> Result<Agents, AgentError> {
        let (alice, alice_input) = SimProver::from_spec(&self.alice, &self.graph, self.secret.as_ref(), self.seed)?;
        let (bob, bob_input) = SimVerifier::from_spec(&self.bob, self.seed)?;
        Ok(Agents {
            alice,
            bob,
            alice_input,
            bob_input,
        })
    }

    /// Payload of the `session_created` event. Seeds, agent specs and the
    /// secret go under `sealed`; `public` and `sealed_extra` are merged in.
    pub fn created_payload(&self, public: Value, sealed_extra: Value) -> Value {
        let mut p = json!({
            "graph": self.graph,
            "rounds": self.rounds,
            "abort_on_reject": self.abort_on_reject,
            "sealed": { "setup": self },
        });
        merge(&mut p, public);
        merge(&mut p["sealed"], sealed_extra);
        p
    }

    pub fn from_created(payload: &Value) -> Result<Self, serde_json::Error> {
        serde_json::from_value(payload["sealed"]["setup"].clone())
    }
}

fn merge(into: &mut Value, extra: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, extra) {
        a.extend(b);
    }
}

/// A proper coloring for `g` if the local search finds one.
pub fn find_coloring(g: &Graph, seed: u64) -> Option<Coloring> {
    let c = min_conflict_coloring(g, &vec![1.0; g.m()], seed, DEFAULT_RESTARTS).ok()?;
    is_proper(g, &c).ok()?.then_some(c)
}

/// Seed of the `index`-th session in a batch (splitmix64 of the pair).
pub fn session_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn simulate(setup: &SessionSetup) -> Result<SessionResult, ProtocolError> {
    setup.validate()?;
    let mut agents = setup.agents()?;
    if agents.alice_input.is_some() || agents.bob_input.is_some() {
        return Err(AgentError::BadSpec("human agents need the live service".into()).into());
    }
    run_session(setup.config(), &mut agents.alice, &mut agents.bob)
}

pub fn log_session<W: Write>(log: &mut EventLog<W>, session_id: &str, setup: &SessionSetup, result: &SessionResult) -> Result<(), StoreError> {
    let created = setup.created_payload(json!({ "roles": { "alice": "simulated", "bob": "simulated" } }), json!({}));
    write_session(log, session_id, created, result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::planted_3colorable;
    use crate::protocol::SessionVerdict;
    use crate::store::{parse_events, replay, sessions_from_events, Clock};

    #[test]
    fn setup_roundtrip_through_created_event() {
        let (g, c) = planted_3colorable(9, 0.4, 3).unwrap();
        let setup = SessionSetup::new(g, Some(20), 11, "sticky:0.8".parse().unwrap(), "recency:0.2:2".parse().unwrap(), Some(c));
        let r = simulate(&setup).unwrap();
        assert_eq!(r.verdict, SessionVerdict::Accepted);
        let mut log = EventLog::new(Vec::new(), Clock::Logical);
        log_session(&mut log, "s0", &setup, &r).unwrap();
        let sessions = sessions_from_events(parse_events(std::str::from_utf8(&log.into_inner()).unwrap()).unwrap()).unwrap();
        let rec = &sessions[0];
        assert_eq!(SessionSetup::from_created(rec.created.as_ref().unwrap()).unwrap(), setup);
        assert_eq!(replay(rec).unwrap(), r.verdicts());
        assert_eq!(rec.permutation_ranks().len(), 20);
        // re-running the stored setup reproduces the stored transcripts
        assert_eq!(simulate(&setup).unwrap().transcripts, rec.transcripts());
    }

    #[test]
    fn honest_without_coloring_rejected() {
        let g = Graph::complete(3).unwrap();
        let setup = SessionSetup::new(g.clone(), None, 1, "uniform".parse().unwrap(), BobSpec::Uniform, None);
        assert!(setup.validate().is_err());
        let c = find_coloring(&g, 0).unwrap();
        let setup = SessionSetup { secret: Some(c), ..setup };
        assert_eq!(setup.rounds, 9);
        assert!(setup.validate().is_ok());
        assert!(find_coloring(&Graph::complete(4).unwrap(), 0).is_none());
    }

    #[test]
    fn session_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| session_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
    }
}
