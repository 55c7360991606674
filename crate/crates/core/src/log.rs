//! Event-log persistence: one JSONL file per session.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use crate::event::{decode_event, encode_event, ReplayError, SessionEvent};

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("no log for session {0}")]
    UnknownSession(String),
    #[error("sequence violation: expected seq {expected}, got {got}")]
    SeqViolation { expected: u64, got: u64 },
    #[error("line {line}: {source}")]
    Decode { line: usize, source: ReplayError },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Destination for a session's events. `append` must not return before the
/// event is durable.
pub trait EventSink: Send {
    fn append(&mut self, event: &SessionEvent) -> Result<(), LogError>;
}

fn check_seq(next: &mut u64, event: &SessionEvent) -> Result<(), LogError> {
    if event.seq != *next {
        return Err(LogError::SeqViolation { expected: *next, got: event.seq });
    }
    *next += 1;
    Ok(())
}

/// In-memory sink, for tests and headless runs.
#[derive(Debug, Default, Clone)]
pub struct MemoryLog {
    pub events: Vec<SessionEvent>,
    next: u64,
}

impl MemoryLog {
    pub fn new() -> Self {
        Self::default()
    }
}

impl EventSink for MemoryLog {
    fn append(&mut self, event: &SessionEvent) -> Result<(), LogError> {
        check_seq(&mut self.next, event)?;
        self.events.push(event.clone());
        Ok(())
    }
}

pub fn log_path(dir: &Path, session_id: &str) -> PathBuf {
    dir.join(format!("{session_id}.jsonl"))
}

/// Append-only JSONL file, synced after every line.
#[derive(Debug)]
pub struct JsonlLog {
    file: File,
    path: PathBuf,
    next: u64,
}

impl JsonlLog {
    pub fn create(dir: &Path, session_id: &str) -> Result<Self, LogError> {
        fs::create_dir_all(dir)?;
        let path = log_path(dir, session_id);
        let file = OpenOptions::new().create_new(true).append(true).open(&path)?;
        Ok(Self { file, path, next: 0 })
    }

    /// Reopen an existing log for appending after its last event. A torn
    /// final line is cut off first so the next event starts on a fresh line.
    pub fn reopen(dir: &Path, session_id: &str) -> Result<Self, LogError> {
        let events = load_session_log(dir, session_id)?;
        let path = log_path(dir, session_id);
        let text = fs::read(&path)?;
        let complete = text.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
        let file = OpenOptions::new().append(true).open(&path)?;
        if complete < text.len() {
            file.set_len(complete as u64)?;
            file.sync_data()?;
        }
        Ok(Self { file, path, next: events.last().map_or(0, |e| e.seq + 1) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl EventSink for JsonlLog {
    fn append(&mut self, event: &SessionEvent) -> Result<(), LogError> {
        if event.seq != self.next {
            return Err(LogError::SeqViolation { expected: self.next, got: event.seq });
        }
        let mut line = encode_event(event);
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.sync_data()?;
        self.next += 1;
        Ok(())
    }
}

/// Read a session's events in seq order. A final line without a newline is a
/// torn write from a crash and is dropped.
pub fn load_session_log(dir: &Path, session_id: &str) -> Result<Vec<SessionEvent>, LogError> {
    let path = log_path(dir, session_id);
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(LogError::UnknownSession(session_id.to_string())),
        Err(e) => return Err(e.into()),
    };
    parse_log(&text)
}

pub fn parse_log(text: &str) -> Result<Vec<SessionEvent>, LogError> {
    let complete = match text.rfind('\n') {
        Some(i) => &text[..=i],
        None => "",
    };
    if complete.len() < text.len() {
        tracing::warn!(bytes = text.len() - complete.len(), "dropping torn final log line");
    }
    let mut events: Vec<SessionEvent> = complete
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| decode_event(l).map_err(|source| LogError::Decode { line: i + 1, source }))
        .collect::<Result<_, _>>()?;
    events.sort_by_key(|e| e.seq);
    Ok(events)
}

/// Session ids of every `*.jsonl` file in `dir`, sorted.
pub fn list_sessions(dir: &Path) -> Result<Vec<String>, LogError> {
    let mut ids: Vec<String> = fs::read_dir(dir)?
        .filter_map(|entry| {
            let path = entry.ok()?.path();
            (path.extension()? == "jsonl").then(|| path.file_stem()?.to_str().map(str::to_string))?
        })
        .collect();
    ids.sort();
    Ok(ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{Actor, EventBody};
    use crate::model::Feeling;

    fn ev(seq: u64) -> SessionEvent {
        SessionEvent {
            seq,
            ts: "t".into(),
            session_id: "s".into(),
            actor: Actor::Human,
            body: EventBody::FeelingReported { feeling: Feeling::Neutral },
        }
    }

    #[test]
    fn write_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = JsonlLog::create(dir.path(), "s").unwrap();
        let events: Vec<_> = (0..5).map(ev).collect();
        for e in &events {
            log.append(e).unwrap();
        }
        assert_eq!(load_session_log(dir.path(), "s").unwrap(), events);
        assert_eq!(list_sessions(dir.path()).unwrap(), ["s"]);

        let mut again = JsonlLog::reopen(dir.path(), "s").unwrap();
        again.append(&ev(5)).unwrap();
        assert_eq!(load_session_log(dir.path(), "s").unwrap().len(), 6);
    }

    #[test]
    fn seq_violation() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = JsonlLog::create(dir.path(), "s").unwrap();
        log.append(&ev(0)).unwrap();
        assert!(matches!(log.append(&ev(2)), Err(LogError::SeqViolation { expected: 1, got: 2 })));
        let mut mem = MemoryLog::new();
        assert!(mem.append(&ev(1)).is_err());
    }

    #[test]
    fn missing_file() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_session_log(dir.path(), "nope"), Err(LogError::UnknownSession(_))));
    }

    #[test]
    fn reopen_cuts_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = JsonlLog::create(dir.path(), "s").unwrap();
        log.append(&ev(0)).unwrap();
        drop(log);
        let path = log_path(dir.path(), "s");
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"seq\":1,\"ts").unwrap();
        drop(f);
        let mut log = JsonlLog::reopen(dir.path(), "s").unwrap();
        log.append(&ev(1)).unwrap();
        let events = load_session_log(dir.path(), "s").unwrap();
        assert_eq!(events, vec![ev(0), ev(1)]);
    }

    #[test]
    fn torn_tail_is_dropped() {
        let full = format!("{}\n{}\n", encode_event(&ev(0)), encode_event(&ev(1)));
        let torn = format!("{full}{{\"seq\":2,\"ts");
        assert_eq!(parse_log(&torn).unwrap().len(), 2);
    }
}
