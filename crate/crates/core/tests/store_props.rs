use serde_json::{json, Value};

use zk3col_core::agents::BobSpec;
use zk3col_core::graph::{planted_3colorable, Graph};
use zk3col_core::runner::{log_session, simulate, SessionSetup};
use zk3col_core::store::{
    load_events, load_session, load_sessions, replay, session_path, Clock, EventKind, EventLog, EventRecord, StoreError,
};

fn honest_setup(seed: u64) -> SessionSetup {
    let (g, c) = planted_3colorable(8, 0.5, seed).unwrap();
    SessionSetup::new(g, Some(12), seed, "uniform".parse().unwrap(), BobSpec::Uniform, Some(c))
}

#[test]
fn file_roundtrip_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let path = session_path(dir.path(), "s1");
    let setup = honest_setup(1);
    let result = simulate(&setup).unwrap();
    {
        let mut log = EventLog::open_file(&path, Clock::Wall).unwrap();
        log_session(&mut log, "s1", &setup, &result).unwrap();
    }
    // a reopened log continues the chain
    let mut log = EventLog::open_file(&path, Clock::Wall).unwrap();
    assert!(matches!(
        log.append_event("s1", 1, EventKind::HumanInput, json!({})),
        Err(StoreError::Gap { .. })
    ));
    let n = log.next_seq("s1");
    log.append_event("s1", n, EventKind::HumanInput, json!({"note": "after"})).unwrap();
    drop(log);

    let rec = load_session(&path, "s1").unwrap();
    assert_eq!(rec.events.len() as u64, n);
    assert_eq!(replay(&rec).unwrap(), result.verdicts());
    assert_eq!(rec.transcripts(), result.transcripts);
    assert!(matches!(load_session(&path, "nope"), Err(StoreError::UnknownSession(_))));
}

#[test]
fn records_roundtrip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.jsonl");
    let payloads = [json!({"x": 0.1, "nested": [1, 2, {"y": null}]}), json!({"s": "é\n\"q\""}), json!({"f": 1e-300})];
    let mut written: Vec<EventRecord> = Vec::new();
    {
        let mut log = EventLog::open_file(&path, Clock::Logical).unwrap();
        for p in payloads {
            written.push(log.emit("a", EventKind::ExperimentStage, p).unwrap());
        }
    }
    let loaded = load_events(&path).unwrap();
    assert_eq!(loaded, written);
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<String> = written.iter().map(EventRecord::to_line).collect();
    assert_eq!(text, lines.join("\n") + "\n");
}

#[test]
fn tampered_color_flagged_at_its_round() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.jsonl");
    let setup = honest_setup(2);
    let result = simulate(&setup).unwrap();
    let mut log = EventLog::open_file(&path, Clock::Logical).unwrap();
    log_session(&mut log, "s", &setup, &result).unwrap();
    drop(log);

    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let target = lines
        .iter()
        .position(|e| e["kind"] == "openings_posted" && e["payload"]["round"] == 5)
        .unwrap();
    let color = lines[target]["payload"]["openings"][0]["color"].as_u64().unwrap();
    lines[target]["payload"]["openings"][0]["color"] = json!(color % 3 + 1);
    let tampered: String = lines.iter().map(|l| serde_json::to_string(l).unwrap() + "\n").collect();
    std::fs::write(&path, tampered).unwrap();

    let rec = load_session(&path, "s").unwrap();
    match replay(&rec) {
        Err(StoreError::VerdictMismatch { round, .. }) => assert_eq!(round, 5),
        other => panic!("{other:?}"),
    }
}

#[test]
fn empty_and_corrupt_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.jsonl");
    std::fs::write(&path, "").unwrap();
    assert!(load_sessions(&path).unwrap().is_empty());
    std::fs::write(&path, "\n{}\n").unwrap();
    assert!(matches!(load_sessions(&path), Err(StoreError::Corrupt { line: 2, .. })));
}

#[test]
fn single_writer_keeps_sessions_apart() {
    let mut log = EventLog::new(Vec::new(), Clock::Logical);
    let g = Graph::complete(3).unwrap();
    let mut setups = Vec::new();
    for i in 0..3u64 {
        let setup = SessionSetup::new(g.clone(), Some(4), i, "cheat".parse().unwrap(), BobSpec::Uniform, None);
        let r = simulate(&setup).unwrap();
        log_session(&mut log, &format!("c{i}"), &setup, &r).unwrap();
        setups.push(r);
    }
    let text = String::from_utf8(log.into_inner()).unwrap();
    let sessions = zk3col_core::store::sessions_from_events(zk3col_core::store::parse_events(&text).unwrap()).unwrap();
    for (s, r) in sessions.iter().zip(&setups) {
        assert_eq!(replay(s).unwrap(), r.verdicts());
        assert_eq!(s.verdict.as_ref(), Some(&r.verdict));
    }
}
