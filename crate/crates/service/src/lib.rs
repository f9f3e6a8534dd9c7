//! HTTP service for live sessions and experiment plans. Humans play either
//! protocol role through capability tokens; event streams are long-polled.

pub mod error;
pub mod experiment;
pub mod live;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use rand::rngs::OsRng;
use rand::RngCore;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::{watch, Mutex};
use tokio::time::Instant;

use zk3col_core::agents::{AliceSpec, BobSpec, PermSpec, ProverStrategy};
use zk3col_core::attacks::{infer_report, AttackInput, PermModel};
use zk3col_core::error::LabError;
use zk3col_core::graph::{planted_3colorable, Coloring, Edge, Graph};
use zk3col_core::lab::{analyze, Stage, SymbolSequence, TestReport, ZkpStageConfig};
use zk3col_core::runner::{find_coloring, session_seed, SessionSetup};
use zk3col_core::store::{load_events, session_path, EventKind, EventRecord, Role};

use crate::error::ApiError;
use crate::experiment::{public_plan, Experiment};
use crate::live::{Driver, LiveSession, Roles, Tokens};

pub const DEFAULT_HUMAN_TIMEOUT: Duration = Duration::from_secs(120);
/// Longest a single long-poll request waits for new events.
pub const MAX_WAIT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub human_timeout: Duration,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            data_dir: data_dir.into(),
            human_timeout: DEFAULT_HUMAN_TIMEOUT,
        }
    }
}

/// A session plus the channel long-polls wait on. The mutex is the
/// session's single serializing queue.
pub struct SessionSlot {
    pub live: Mutex<LiveSession>,
    changed: watch::Sender<u64>,
    history_visible: bool,
}

pub struct AppState {
    cfg: ServiceConfig,
    sessions: RwLock<HashMap<String, Arc<SessionSlot>>>,
    experiments: RwLock<HashMap<String, Arc<Mutex<Experiment>>>>,
}

pub type Shared = Arc<AppState>;

fn random_hex(bytes: usize) -> String {
    let mut buf = vec![0u8; bytes];
    OsRng.fill_bytes(&mut buf);
    hex::encode(buf)
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(e.to_string()))
}

fn query_u64(q: &HashMap<String, String>, key: &str) -> Result<Option<u64>, ApiError> {
    q.get(key)
        .map(|v| v.parse().map_err(|_| ApiError::bad_request(format!("`{key}` must be an unsigned integer"))))
        .transpose()
}

impl AppState {
    /// Loads every stored log under `data_dir` and resumes it. Unfinished
    /// sessions waiting on a human get a fresh input timeout.
    pub fn open(cfg: ServiceConfig) -> Result<Shared, ApiError> {
        let st = Arc::new(AppState {
            cfg,
            sessions: RwLock::default(),
            experiments: RwLock::default(),
        });
        let dir = st.cfg.data_dir.join("sessions");
        std::fs::create_dir_all(&dir).map_err(|e| ApiError::internal(format!("{}: {e}", dir.display())))?;
        let mut logs: Vec<(String, PathBuf, Vec<EventRecord>)> = Vec::new();
        for entry in std::fs::read_dir(&dir).map_err(|e| ApiError::internal(e.to_string()))? {
            let path = entry.map_err(|e| ApiError::internal(e.to_string()))?.path();
            if path.extension().is_none_or(|x| x != "jsonl") {
                continue;
            }
            let Some(id) = path.file_stem().and_then(|s| s.to_str()).map(str::to_string) else {
                continue;
            };
            let events = load_events(&path)?;
            if !events.is_empty() {
                logs.push((id, path, events));
            }
        }
        logs.sort_by(|a, b| a.0.cmp(&b.0));
        let (exps, sessions): (Vec<_>, Vec<_>) = logs.into_iter().partition(|(_, _, ev)| ev[0].kind == EventKind::ExperimentStage);
        for (id, path, events) in exps {
            let exp = Experiment::recover(&id, events, &path)?;
            st.experiments.write().unwrap().insert(id, Arc::new(Mutex::new(exp)));
        }
        for (id, path, events) in sessions {
            let live = LiveSession::recover(&id, events, &path)?;
            let history_visible = match &live.experiment {
                Some((eid, _)) => st
                    .experiments
                    .read()
                    .unwrap()
                    .get(eid)
                    .and_then(|e| e.try_lock().ok().map(|e| e.plan.history_visible))
                    .unwrap_or(true),
                None => true,
            };
            let slot = st.insert_session(live, history_visible);
            if tokio::runtime::Handle::try_current().is_ok() {
                let live = slot.live.try_lock().expect("fresh slot");
                st.touched(&slot, &live);
            }
        }
        Ok(st)
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.cfg
    }

    fn log_path(&self, id: &str) -> PathBuf {
        session_path(&self.cfg.data_dir, id)
    }

    fn insert_session(&self, live: LiveSession, history_visible: bool) -> Arc<SessionSlot> {
        let (changed, _) = watch::channel(live.last_seq());
        let id = live.id.clone();
        let slot = Arc::new(SessionSlot {
            live: Mutex::new(live),
            changed,
            history_visible,
        });
        self.sessions.write().unwrap().insert(id, slot.clone());
        slot
    }

    pub fn session(&self, id: &str) -> Result<Arc<SessionSlot>, ApiError> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("unknown_session", format!("no session {id}")))
    }

    fn experiment(&self, id: &str) -> Result<Arc<Mutex<Experiment>>, ApiError> {
        self.experiments
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("unknown_experiment", format!("no experiment {id}")))
    }

    /// Wakes long-polls and, if a human must act next, arms the input timeout.
    fn touched(&self, slot: &Arc<SessionSlot>, live: &LiveSession) {
        slot.changed.send_replace(live.last_seq());
        if live.waiting_on().is_none() {
            return;
        }
        let generation = live.generation;
        let timeout = self.cfg.human_timeout;
        let slot = slot.clone();
        tokio::spawn(async move {
            tokio::time::sleep(timeout).await;
            let mut live = slot.live.lock().await;
            if let Ok(true) = live.expire(generation) {
                slot.changed.send_replace(live.last_seq());
            }
        });
    }

    /// Creates the human-prover session of a ZKP stage, or returns the one
    /// already on disk if an earlier attempt got that far.
    fn experiment_session(&self, exp: &Experiment, stage: usize, cfg: &ZkpStageConfig) -> Result<String, ApiError> {
        let id = format!("{}-s{stage}", exp.id);
        if self.sessions.read().unwrap().contains_key(&id) {
            return Ok(id);
        }
        if cfg.k != 3 {
            return Err(ApiError::internal(format!("protocol stages need k = 3, plan has {}", cfg.k)));
        }
        let (graph, secret) = planted_3colorable(cfg.graph_n, cfg.edge_prob, cfg.graph_seed).map_err(|e| ApiError::internal(e.to_string()))?;
        let alice = AliceSpec {
            strategy: ProverStrategy::Honest,
            source: PermSpec::Human,
        };
        let seed = session_seed(exp.plan.seed, stage as u64);
        let setup = SessionSetup::new(graph, Some(cfg.rounds), seed, alice, BobSpec::Uniform, Some(secret));
        let roles = Roles {
            alice: Driver::Human,
            bob: Driver::Simulated,
        };
        let tokens = Tokens {
            alice: random_hex(16),
            bob: random_hex(16),
        };
        let live = LiveSession::create(id.clone(), setup, roles, tokens, Some((exp.id.clone(), stage)), Some(&self.log_path(&id)))?;
        let slot = self.insert_session(live, exp.plan.history_visible);
        let live = slot.live.try_lock().expect("fresh slot");
        self.touched(&slot, &live);
        Ok(id)
    }

    fn enter_next_stage(&self, exp: &mut Experiment) -> Result<(), ApiError> {
        let next = exp.stage + 1;
        let session = match exp.plan.stages.get(next).and_then(Stage::zkp_config) {
            Some(cfg) => Some(self.experiment_session(exp, next, cfg)?),
            None => None,
        };
        exp.advance(session)
    }

    /// Leaves a ZKP stage whose session has ended (including by timeout).
    async fn sync_experiment(&self, exp: &mut Experiment) -> Result<(), ApiError> {
        if exp.current().and_then(Stage::zkp_config).is_none() {
            return Ok(());
        }
        let Some(sid) = exp.current_session().cloned() else {
            return Ok(());
        };
        let finished = self.session(&sid)?.live.lock().await.is_finished();
        if finished {
            self.enter_next_stage(exp)?;
        }
        Ok(())
    }

    async fn experiment_view(&self, exp: &Experiment) -> Result<Value, ApiError> {
        let mut view = serde_json::to_value(exp.state()).map_err(|e| ApiError::internal(e.to_string()))?;
        if let Some(sid) = exp.current_session() {
            let slot = self.session(sid)?;
            let live = slot.live.lock().await;
            view["session_token"] = json!(live.tokens.alice);
            view["session_state"] = json!(live.public_state(Some(Role::Alice), slot.history_visible));
        }
        Ok(view)
    }
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/actions", post(post_action))
        .route("/sessions/{id}/events", get(session_events))
        .route("/experiments", post(create_experiment))
        .route("/experiments/{id}", get(get_experiment))
        .route("/experiments/{id}/input", post(experiment_input))
        .route("/reports/{id}", get(get_report))
        .with_state(state)
}

/// Serves `state` until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, state: Shared) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum GraphRef {
    Named { named: String },
    Dimacs { dimacs: String },
    Explicit { n: usize, edges: Vec<Edge> },
}

#[derive(Debug, Deserialize)]
struct Generator {
    n: usize,
    p: f64,
    seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    graph: Option<GraphRef>,
    generate: Option<Generator>,
    coloring: Option<Vec<u8>>,
    alice: Option<Value>,
    bob: Option<Value>,
    rounds: Option<usize>,
    seed: Option<u64>,
    abort_on_reject: Option<bool>,
}

/// String agent specs may name files for the CLI; over HTTP only inline
/// arguments are accepted.
fn inline_only(spec: &str) -> Result<(), ApiError> {
    let body = spec.rsplit('/').next().unwrap_or(spec);
    let arg = body.split_once(':').map_or("", |(_, a)| a);
    if arg.chars().all(|c| c.is_ascii_digit() || ".,;:- ".contains(c)) && !body.starts_with("markov:") {
        Ok(())
    } else {
        Err(ApiError::bad_request(format!("agent spec `{spec}` must be inline (give models as JSON objects)")))
    }
}

fn parse_spec<T>(v: Option<Value>) -> Result<T, ApiError>
where
    T: DeserializeOwned + std::str::FromStr,
    T::Err: std::fmt::Display,
{
    match v.unwrap_or_else(|| json!("uniform")) {
        Value::String(s) => {
            inline_only(&s)?;
            s.parse().map_err(|e: T::Err| ApiError::bad_request(e.to_string()))
        }
        other => serde_json::from_value(other).map_err(|e| ApiError::bad_request(e.to_string())),
    }
}

impl CreateSession {
    fn into_setup(self) -> Result<SessionSetup, ApiError> {
        let bad = |e: &dyn std::fmt::Display| ApiError::bad_request(e.to_string());
        let (graph, planted) = match (self.graph, self.generate) {
            (Some(_), Some(_)) => return Err(ApiError::bad_request("give either `graph` or `generate`, not both")),
            (None, None) => return Err(ApiError::bad_request("missing `graph` or `generate`")),
            (None, Some(g)) => {
                let (graph, c) = planted_3colorable(g.n, g.p, g.seed).map_err(|e| bad(&e))?;
                (graph, Some(c))
            }
            (Some(GraphRef::Named { named }), None) => {
                let g = Graph::named(&named).ok_or_else(|| ApiError::not_found("unknown_graph", format!("no graph named `{named}`")))?;
                (g, None)
            }
            (Some(GraphRef::Dimacs { dimacs }), None) => (Graph::parse_dimacs(&dimacs).map_err(|e| bad(&e))?, None),
            (Some(GraphRef::Explicit { n, edges }), None) => (Graph::new(n, edges).map_err(|e| bad(&e))?, None),
        };
        let alice: AliceSpec = parse_spec(self.alice)?;
        let bob: BobSpec = parse_spec(self.bob)?;
        let seed = self.seed.unwrap_or_else(|| OsRng.next_u64());
        let secret = if alice.strategy == ProverStrategy::Honest {
            let given = self.coloring.map(Coloring::new).transpose().map_err(|e| bad(&e))?;
            let secret = given.or(planted).or_else(|| find_coloring(&graph, seed));
            Some(secret.ok_or_else(|| ApiError::bad_request("no proper 3-coloring given or found for an honest prover"))?)
        } else {
            None
        };
        let mut setup = SessionSetup::new(graph, self.rounds, seed, alice, bob, secret);
        if let Some(a) = self.abort_on_reject {
            setup.abort_on_reject = a;
        }
        Ok(setup)
    }
}

async fn create_session(State(st): State<Shared>, body: Bytes) -> Result<(StatusCode, Json<Value>), ApiError> {
    let setup = parse_body::<CreateSession>(&body)?.into_setup()?;
    let driver = |human: bool| if human { Driver::Human } else { Driver::Simulated };
    let roles = Roles {
        alice: driver(setup.alice.source == PermSpec::Human),
        bob: driver(setup.bob == BobSpec::Human),
    };
    let tokens = Tokens {
        alice: random_hex(16),
        bob: random_hex(16),
    };
    let id = random_hex(8);
    let path = st.log_path(&id);
    let live = LiveSession::create(id.clone(), setup, roles, tokens.clone(), None, Some(&path))?;
    let slot = st.insert_session(live, true);
    let live = slot.live.lock().await;
    st.touched(&slot, &live);
    Ok((
        StatusCode::CREATED,
        Json(json!({ "id": id, "tokens": tokens, "state": live.public_state(None, false) })),
    ))
}

fn caller_role(live: &LiveSession, token: Option<&String>) -> Result<Option<Role>, ApiError> {
    match token {
        None => Ok(None),
        Some(t) => live.role_for_token(t).map(Some).ok_or_else(|| ApiError::forbidden("token does not match this session")),
    }
}

async fn get_session(
    State(st): State<Shared>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Json<live::PublicState>, ApiError> {
    let slot = st.session(&id)?;
    let live = slot.live.lock().await;
    let role = caller_role(&live, q.get("token"))?;
    Ok(Json(live.public_state(role, slot.history_visible)))
}

#[derive(Debug, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
enum Action {
    SubmitPermutation { rank: usize },
    SubmitChallenge { edge: Edge },
}

#[derive(Debug, Deserialize)]
struct ActionRequest {
    token: String,
    #[serde(flatten)]
    action: Action,
}

async fn post_action(State(st): State<Shared>, UrlPath(id): UrlPath<String>, body: Bytes) -> Result<Json<live::PublicState>, ApiError> {
    let slot = st.session(&id)?;
    let req: ActionRequest = parse_body(&body)?;
    let mut live = slot.live.lock().await;
    let role = caller_role(&live, Some(&req.token))?.expect("token given");
    let mismatch = || ApiError::forbidden("this action belongs to the other role");
    let result = match (req.action, role) {
        (Action::SubmitPermutation { rank }, Role::Alice) => live.submit_permutation(rank),
        (Action::SubmitChallenge { edge }, Role::Bob) => live.submit_challenge(edge),
        _ => Err(mismatch()),
    };
    result?;
    st.touched(&slot, &live);
    Ok(Json(live.public_state(Some(role), slot.history_visible)))
}

#[derive(Debug, Serialize)]
struct EventBatch {
    events: Vec<EventRecord>,
    finished: bool,
    last_seq: u64,
}

/// Long-poll: returns events with `seq > after` as soon as there are any,
/// or an empty batch after `wait_ms`.
async fn session_events(
    State(st): State<Shared>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Json<EventBatch>, ApiError> {
    let slot = st.session(&id)?;
    let token = q.get("token").ok_or_else(|| ApiError::forbidden("a role token is required"))?;
    let after = query_u64(&q, "after")?.unwrap_or(0);
    let wait = Duration::from_millis(query_u64(&q, "wait_ms")?.unwrap_or(0)).min(MAX_WAIT);
    let deadline = Instant::now() + wait;
    let mut rx = slot.changed.subscribe();
    loop {
        {
            let live = slot.live.lock().await;
            let role = caller_role(&live, Some(token))?.expect("token given");
            let events = live.events_for(role, after);
            if !events.is_empty() || live.is_finished() || Instant::now() >= deadline {
                return Ok(Json(EventBatch {
                    events,
                    finished: live.is_finished(),
                    last_seq: live.last_seq(),
                }));
            }
        }
        let _ = tokio::time::timeout_at(deadline, rx.changed()).await;
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateExperiment {
    subject: String,
    seed: Option<u64>,
}

async fn create_experiment(State(st): State<Shared>, body: Bytes) -> Result<(StatusCode, Json<Value>), ApiError> {
    let req: CreateExperiment = parse_body(&body)?;
    let subject = req.subject.trim();
    if subject.is_empty() || subject.len() > 64 || subject.chars().any(|c| c == ',' || c.is_control()) {
        return Err(ApiError::bad_request("subject must be 1 to 64 characters without commas"));
    }
    let id = random_hex(8);
    let token = random_hex(16);
    let seed = req.seed.unwrap_or_else(|| OsRng.next_u64());
    let exp = Experiment::create(id.clone(), subject, seed, token.clone(), &st.log_path(&id))?;
    let plan = public_plan(&exp.plan);
    let view = st.experiment_view(&exp).await?;
    st.experiments.write().unwrap().insert(id.clone(), Arc::new(Mutex::new(exp)));
    Ok((StatusCode::CREATED, Json(json!({ "id": id, "token": token, "plan": plan, "state": view }))))
}

fn check_experiment_token(exp: &Experiment, token: Option<&String>) -> Result<(), ApiError> {
    match token {
        Some(t) if *t == exp.token => Ok(()),
        _ => Err(ApiError::forbidden("token does not match this experiment")),
    }
}

async fn get_experiment(
    State(st): State<Shared>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Json<Value>, ApiError> {
    let slot = st.experiment(&id)?;
    let mut exp = slot.lock().await;
    check_experiment_token(&exp, q.get("token"))?;
    st.sync_experiment(&mut exp).await?;
    Ok(Json(st.experiment_view(&exp).await?))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentInput {
    token: String,
    rank: Option<usize>,
    action: Option<String>,
}

async fn experiment_input(State(st): State<Shared>, UrlPath(id): UrlPath<String>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let slot = st.experiment(&id)?;
    let req: ExperimentInput = parse_body(&body)?;
    let mut exp = slot.lock().await;
    check_experiment_token(&exp, Some(&req.token))?;
    st.sync_experiment(&mut exp).await?;
    let need_rank = || req.rank.ok_or_else(|| ApiError::bad_request("this stage takes a `rank`"));
    match exp.current().cloned() {
        None => return Err(ApiError::conflict("experiment_finished", "all stages are done")),
        Some(Stage::Test1 { .. } | Stage::Test2 { .. }) => {
            if exp.draw(need_rank()?)? {
                st.enter_next_stage(&mut exp)?;
            }
        }
        Some(Stage::Test3 { .. } | Stage::Test4 { .. }) => {
            let rank = need_rank()?;
            let sid = exp.current_session().cloned().ok_or_else(|| ApiError::internal("stage has no session"))?;
            let session = st.session(&sid)?;
            let mut live = session.live.lock().await;
            let result = live.submit_permutation(rank);
            result?;
            st.touched(&session, &live);
            let done = live.is_finished();
            drop(live);
            if done {
                st.enter_next_stage(&mut exp)?;
            }
        }
        Some(Stage::Debrief) => {
            if req.action.as_deref() != Some("continue") {
                return Err(ApiError::bad_request("the debrief stage takes `\"action\": \"continue\"`"));
            }
            st.enter_next_stage(&mut exp)?;
        }
    }
    Ok(Json(st.experiment_view(&exp).await?))
}

fn lab_error(e: LabError) -> ApiError {
    match e {
        LabError::TooShort { .. } => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "insufficient_data", e.to_string()),
        other => ApiError::bad_request(other.to_string()),
    }
}

fn gated() -> ApiError {
    ApiError::new(StatusCode::LOCKED, "report_gated", "reports are withheld until the debrief stage")
}

fn report_for(k: usize, symbols: Vec<usize>, subject: &str, test: &str) -> Result<TestReport, ApiError> {
    let seq = SymbolSequence::labelled(k, symbols, subject, test).map_err(lab_error)?;
    analyze(&seq).map_err(lab_error)
}

/// `GET /reports/{id}`: a session id (prover token required) or an
/// experiment id (experiment token). `attack=true` adds the partition
/// attack on a session's transcripts.
async fn get_report(
    State(st): State<Shared>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Json<Value>, ApiError> {
    let token = q.get("token");
    let attack = q.get("attack").is_some_and(|a| a == "true" || a == "1");
    if let Ok(slot) = st.experiment(&id) {
        let mut exp = slot.lock().await;
        check_experiment_token(&exp, token)?;
        st.sync_experiment(&mut exp).await?;
        if exp.reports_locked() {
            return Err(gated());
        }
        let subject = exp.plan.subject.clone();
        let mut reports = Vec::new();
        for d in exp.draws.iter().filter(|d| d.symbols.len() >= 10) {
            reports.push(report_for(d.k, d.symbols.clone(), &subject, &d.label)?);
        }
        for (stage, sid) in &exp.sessions {
            let ranks = st.session(sid)?.live.lock().await.permutation_ranks();
            if ranks.len() >= 10 {
                let test = exp.plan.stages.get(*stage).map_or("zkp", Stage::name);
                reports.push(report_for(3, ranks, &subject, test)?);
            }
        }
        if reports.is_empty() {
            return Err(lab_error(LabError::TooShort { len: 0, need: 10 }));
        }
        return Ok(Json(json!({ "id": id, "subject": subject, "reports": reports })));
    }

    let slot = st.session(&id)?;
    let owner = {
        let live = slot.live.lock().await;
        if caller_role(&live, token)? != Some(Role::Alice) {
            return Err(ApiError::forbidden("session reports need the prover token"));
        }
        live.experiment.clone()
    };
    let subject = match owner {
        Some((eid, _)) => {
            let exp = st.experiment(&eid)?;
            let mut exp = exp.lock().await;
            st.sync_experiment(&mut exp).await?;
            if exp.reports_locked() {
                return Err(gated());
            }
            exp.plan.subject.clone()
        }
        None => id.clone(),
    };
    let live = slot.live.lock().await;
    let report = report_for(3, live.permutation_ranks(), &subject, "zkp")?;
    let mut out = json!({ "id": id, "report": report });
    if attack {
        let spec = q.get("model").map_or("uniform", String::as_str);
        inline_only(spec)?;
        let model: PermModel = spec.parse().map_err(|e: zk3col_core::error::AttackError| ApiError::bad_request(e.to_string()))?;
        let result = live.result();
        let input = AttackInput {
            session: id.clone(),
            transcripts: &result.transcripts,
            truth: live.setup.secret.as_ref(),
        };
        let rep = infer_report(&model, &[input]).map_err(|e| ApiError::bad_request(e.to_string()))?;
        out["attack"] = json!(rep);
    }
    Ok(Json(out))
}
