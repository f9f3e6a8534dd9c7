//! Experiment plans walked by one participant.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use zk3col_core::lab::{make_experiment_plan, ExperimentPlan, Instruction, Stage};
use zk3col_core::permutation::factorial;
use zk3col_core::store::{Clock, EventKind, EventLog, EventRecord};

use crate::error::ApiError;

/// Free-draw sequence collected during Test 1 or a Test 2 block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Draws {
    pub label: String,
    pub k: usize,
    pub symbols: Vec<usize>,
}

pub struct Experiment {
    pub id: String,
    pub plan: ExperimentPlan,
    pub token: String,
    /// Index into `plan.stages`; equal to its length once finished.
    pub stage: usize,
    /// Block within a Test 2 stage.
    pub block: usize,
    pub draws: Vec<Draws>,
    /// ZKP stage index to session id.
    pub sessions: BTreeMap<usize, String>,
    log: EventLog<File>,
    events: Vec<EventRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentState {
    pub id: String,
    pub subject: String,
    pub stage_index: usize,
    pub stage: &'static str,
    pub instruction: Option<&'static str>,
    pub history_visible: bool,
    pub reports_locked: bool,
    /// For free-draw stages: symbol-set size, entered so far, required.
    pub k: Option<usize>,
    pub entered: usize,
    pub needed: usize,
    pub session: Option<String>,
    /// Symbols entered in the current free-draw block, when the plan shows history.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub history: Option<Vec<usize>>,
}

/// Plan as shown to clients (the seed stays on the server).
pub fn public_plan(plan: &ExperimentPlan) -> Value {
    json!({
        "subject": plan.subject,
        "history_visible": plan.history_visible,
        "stages": plan.stages,
    })
}

impl Experiment {
    pub fn create(id: String, subject: &str, seed: u64, token: String, log_path: &Path) -> Result<Self, ApiError> {
        let plan = make_experiment_plan(subject, seed);
        let mut exp = Experiment {
            id,
            plan,
            token,
            stage: 0,
            block: 0,
            draws: Vec::new(),
            sessions: BTreeMap::new(),
            log: EventLog::open_file(log_path, Clock::Wall)?,
            events: Vec::new(),
        };
        let payload = json!({
            "index": 0,
            "stage": exp.plan.stages[0].name(),
            "plan": public_plan(&exp.plan),
            "sealed": { "seed": seed, "token": exp.token },
        });
        exp.emit(EventKind::ExperimentStage, payload)?;
        Ok(exp)
    }

    /// Restores state from the stored events.
    pub fn recover(id: &str, stored: Vec<EventRecord>, log_path: &Path) -> Result<Self, ApiError> {
        let first = stored
            .first()
            .filter(|e| e.kind == EventKind::ExperimentStage)
            .ok_or_else(|| ApiError::internal(format!("{id}: not an experiment log")))?;
        let sealed = &first.payload["sealed"];
        let subject = first.payload["plan"]["subject"].as_str().unwrap_or_default().to_string();
        let seed = sealed["seed"].as_u64().ok_or_else(|| ApiError::internal(format!("{id}: missing seed")))?;
        let mut exp = Experiment {
            id: id.to_string(),
            plan: make_experiment_plan(&subject, seed),
            token: sealed["token"].as_str().unwrap_or_default().to_string(),
            stage: 0,
            block: 0,
            draws: Vec::new(),
            sessions: BTreeMap::new(),
            log: EventLog::open_file(log_path, Clock::Wall)?,
            events: Vec::new(),
        };
        for e in &stored[1..] {
            match e.kind {
                EventKind::HumanInput => {
                    let rank = e.payload["rank"].as_u64().unwrap_or(u64::MAX) as usize;
                    exp.apply_draw(rank)?;
                }
                EventKind::ExperimentStage => {
                    exp.stage = e.payload["index"].as_u64().unwrap_or(0) as usize;
                    exp.block = 0;
                    if let Some(s) = e.payload["session"].as_str() {
                        exp.sessions.insert(exp.stage, s.to_string());
                    }
                }
                _ => {}
            }
        }
        exp.events = stored;
        Ok(exp)
    }

    fn emit(&mut self, kind: EventKind, payload: Value) -> Result<(), ApiError> {
        let rec = self.log.emit(&self.id, kind, payload)?;
        self.events.push(rec);
        Ok(())
    }

    pub fn current(&self) -> Option<&Stage> {
        self.plan.stages.get(self.stage)
    }

    pub fn is_finished(&self) -> bool {
        self.stage >= self.plan.stages.len()
    }

    pub fn reports_locked(&self) -> bool {
        self.current().is_some_and(Stage::reports_gated)
    }

    pub fn current_session(&self) -> Option<&String> {
        self.sessions.get(&self.stage)
    }

    /// `(k, needed)` of the free-draw block in progress.
    fn block_spec(&self) -> Option<(usize, usize)> {
        match self.current()? {
            Stage::Test1 { k, draws } => (self.block == 0).then_some((*k, *draws)),
            Stage::Test2 { blocks } => blocks.get(self.block).copied(),
            _ => None,
        }
    }

    fn block_label(&self) -> String {
        match self.current() {
            Some(Stage::Test2 { .. }) => format!("test2-b{}", self.block),
            Some(s) => s.name().to_string(),
            None => "done".into(),
        }
    }

    fn current_draws(&self) -> Option<&Draws> {
        let label = self.block_label();
        self.draws.iter().find(|d| d.label == label)
    }

    /// Records one free draw; returns whether the stage is complete.
    fn apply_draw(&mut self, rank: usize) -> Result<bool, ApiError> {
        let (k, needed) = self
            .block_spec()
            .ok_or_else(|| ApiError::conflict("wrong_phase", "this stage takes no free draws"))?;
        if rank >= factorial(k) {
            return Err(ApiError::bad_request(format!("rank {rank} out of range for k = {k}")));
        }
        let label = self.block_label();
        let idx = match self.draws.iter().position(|d| d.label == label) {
            Some(i) => i,
            None => {
                self.draws.push(Draws {
                    label,
                    k,
                    symbols: Vec::new(),
                });
                self.draws.len() - 1
            }
        };
        self.draws[idx].symbols.push(rank);
        if self.draws[idx].symbols.len() < needed {
            return Ok(false);
        }
        self.block += 1;
        Ok(self.block_spec().is_none())
    }

    /// Free draw from the participant; advances past the stage when full.
    pub fn draw(&mut self, rank: usize) -> Result<bool, ApiError> {
        let (stage, block) = (self.stage, self.block);
        let done = self.apply_draw(rank)?;
        self.emit(EventKind::HumanInput, json!({ "stage": stage, "block": block, "rank": rank }))?;
        Ok(done)
    }

    /// Moves to the next stage, recording the session created for it.
    pub fn advance(&mut self, session: Option<String>) -> Result<(), ApiError> {
        self.stage += 1;
        self.block = 0;
        let name = self.current().map_or("finished", Stage::name);
        let mut payload = json!({ "index": self.stage, "stage": name });
        if let Some(s) = session {
            payload["session"] = json!(s);
            self.sessions.insert(self.stage, s);
        }
        self.emit(EventKind::ExperimentStage, payload)
    }

    pub fn state(&self) -> ExperimentState {
        let spec = self.block_spec();
        let entered = self.current_draws().map_or(0, |d| d.symbols.len());
        let instruction = match self.current() {
            Some(Stage::Test3 { instruction, .. } | Stage::Test4 { instruction, .. }) => Some(instruction.text()),
            Some(Stage::Debrief) => Some(Instruction::Informed.text()),
            _ => None,
        };
        ExperimentState {
            id: self.id.clone(),
            subject: self.plan.subject.clone(),
            stage_index: self.stage,
            stage: self.current().map_or("finished", Stage::name),
            instruction,
            history_visible: self.plan.history_visible,
            reports_locked: self.reports_locked(),
            k: spec.map(|(k, _)| k),
            entered,
            needed: spec.map_or(0, |(_, n)| n),
            session: self.current_session().cloned(),
            history: (self.plan.history_visible && spec.is_some()).then(|| self.current_draws().map_or_else(Vec::new, |d| d.symbols.clone())),
        }
    }
}
