//! A session whose process dies mid-write resumes from its log.

use std::fs::OpenOptions;
use std::io::Write;

use cocreate::event::replay;
use cocreate::log::{load_session_log, log_path};
use cocreate::service::ConditionAssignment;
use cocreate::{ClientMessage, Condition, ServiceConfig, SessionHub};

fn config(dir: &std::path::Path) -> ServiceConfig {
    ServiceConfig {
        log_dir: Some(dir.to_path_buf()),
        condition_assignment: ConditionAssignment::Forced(Condition::Local),
        seed: 3,
        ..ServiceConfig::default()
    }
}

fn select(id: &str) -> ClientMessage {
    ClientMessage::CommSelect { comm_id: id.into() }
}

fn reply(text: &str) -> ClientMessage {
    ClientMessage::DialogueReply { text: text.into() }
}

#[test]
fn torn_write_then_resume() {
    let dir = tempfile::tempdir().unwrap();
    let hub = SessionHub::new(config(dir.path())).unwrap();
    let id = hub.create_session("crash", None)[0].session_id.clone();
    hub.handle(&id, select("regenerate"));
    hub.handle(&id, select("user_work"));
    hub.handle(&id, reply("4"));
    let before = hub.state(&id).unwrap();
    drop(hub);

    // The process died while writing the next event.
    let path = log_path(dir.path(), &id);
    let mut f = OpenOptions::new().append(true).open(&path).unwrap();
    f.write_all(br#"{"seq":99,"ts":"2026-"#).unwrap();
    drop(f);

    let hub = SessionHub::new(config(dir.path())).unwrap();
    assert_eq!(hub.state(&id).unwrap(), before, "resumed state is the last durable state");

    // The dialogue that was in flight carries on.
    let out = hub.handle(&id, reply("rewritten by hand"));
    assert!(out.iter().any(|m| m.type_name() == "interrupt.offer"));
    hub.handle(&id, reply("yes"));
    hub.handle(&id, select("regenerate"));

    let events = load_session_log(dir.path(), &id).unwrap();
    assert!(events.windows(2).all(|w| w[1].seq == w[0].seq + 1));
    let live = hub.state(&id).unwrap();
    assert_eq!(replay(&events).unwrap(), live);
    assert_eq!(live.context.story.lines[4].text, "rewritten by hand");
    assert!(live.context.story.lines[4].frozen);
}

#[test]
fn restart_without_crash_resumes_every_session() {
    let dir = tempfile::tempdir().unwrap();
    let hub = SessionHub::new(config(dir.path())).unwrap();
    let ids: Vec<String> = (0..3).map(|i| hub.create_session(&format!("p{i}"), None)[0].session_id.clone()).collect();
    for id in &ids {
        hub.handle(id, select("regenerate"));
    }
    let states: Vec<_> = ids.iter().map(|id| hub.state(id).unwrap()).collect();
    drop(hub);

    let hub = SessionHub::new(config(dir.path())).unwrap();
    for (id, state) in ids.iter().zip(states) {
        assert_eq!(hub.state(id).unwrap(), state);
    }
}

#[test]
fn unknown_session_after_restart() {
    let dir = tempfile::tempdir().unwrap();
    let hub = SessionHub::new(config(dir.path())).unwrap();
    let out = hub.handle("nope", select("regenerate"));
    assert_eq!(out[0].type_name(), "error");
    let out = hub.handle("../etc/passwd", select("regenerate"));
    assert_eq!(out[0].type_name(), "error");
}
