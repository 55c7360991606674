//! Transport-independent session service: owns every live session, assigns
//! conditions, and wires each session to its event log.
//!
//! Messages for one session are serialized by that session's mutex; the map
//! of sessions is only locked long enough to look a session up, so a slow
//! remote generator call in one session never blocks another.

use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::comms::builtin_registry;
use crate::context::{ContextError, Generator, GeneratorConfig};
use crate::event::{replay, Assignment, SessionEvent};
use crate::log::{load_session_log, EventSink, JsonlLog, LogError, MemoryLog};
use crate::manager::ManagerConfig;
use crate::model::{Condition, SessionState, DEFAULT_NUM_LINES};
use crate::protocol::{codes, ClientMessage, ServerBody, ServerMessage};
use crate::session::{Session, SessionParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "condition")]
pub enum ConditionAssignment {
    /// Seeded coin flip per created session.
    Random,
    Forced(Condition),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub listen_address: String,
    /// Where `{session_id}.jsonl` logs go. `None` keeps logs in memory.
    pub log_dir: Option<PathBuf>,
    pub generator: GeneratorConfig,
    pub manager: ManagerConfig,
    pub condition_assignment: ConditionAssignment,
    /// Seed for random assignment and for per-session generator seeds.
    pub seed: u64,
    pub num_lines: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen_address: "127.0.0.1:8080".into(),
            log_dir: Some(PathBuf::from("logs")),
            generator: GeneratorConfig::default(),
            manager: ManagerConfig::default(),
            condition_assignment: ConditionAssignment::Random,
            seed: 0,
            num_lines: DEFAULT_NUM_LINES,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Generator(#[from] ContextError),
    #[error("log directory {path} is not writable: {source}")]
    LogDir { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Log(#[from] LogError),
}

/// Memory sink whose events stay readable through the hub.
#[derive(Clone, Default)]
struct SharedMemoryLog(Arc<Mutex<MemoryLog>>);

impl EventSink for SharedMemoryLog {
    fn append(&mut self, event: &SessionEvent) -> Result<(), LogError> {
        self.0.lock().expect("memory log poisoned").append(event)
    }
}

struct Entry {
    session: Arc<Mutex<Session>>,
    memory: Option<SharedMemoryLog>,
}

pub struct SessionHub {
    config: ServiceConfig,
    generator: Arc<dyn Generator>,
    inner: Mutex<HubInner>,
}

#[derive(Default)]
struct HubInner {
    sessions: HashMap<String, Entry>,
    created: u64,
}

impl SessionHub {
    pub fn new(config: ServiceConfig) -> Result<Self, ServiceError> {
        config.manager.validate().map_err(ServiceError::Config)?;
        if config.num_lines == 0 {
            return Err(ServiceError::Config("num_lines must be positive".into()));
        }
        let generator = config.generator.build()?;
        if let Some(dir) = &config.log_dir {
            let probe = || -> std::io::Result<()> {
                fs::create_dir_all(dir)?;
                let path = dir.join(".write-probe");
                fs::write(&path, b"")?;
                fs::remove_file(path)
            };
            probe().map_err(|source| ServiceError::LogDir { path: dir.clone(), source })?;
        }
        Ok(Self { config, generator, inner: Mutex::new(HubInner::default()) })
    }

    /// Hub with an explicit generator, e.g. a test double.
    pub fn with_generator(config: ServiceConfig, generator: Arc<dyn Generator>) -> Result<Self, ServiceError> {
        let mut hub = Self::new(config)?;
        hub.generator = generator;
        Ok(hub)
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    /// Condition and generator seed for the `ordinal`-th created session.
    pub fn derive_assignment(&self, ordinal: u64) -> (Condition, u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(ordinal);
        let coin = rng.random_bool(0.5);
        let rng_seed = rng.random::<u64>();
        let condition = match self.config.condition_assignment {
            ConditionAssignment::Forced(c) => c,
            ConditionAssignment::Random => {
                if coin {
                    Condition::Global
                } else {
                    Condition::Local
                }
            }
        };
        (condition, rng_seed)
    }

    pub fn create_session(&self, participant_id: &str, condition_override: Option<Condition>) -> Vec<ServerMessage> {
        let session_id = uuid::Uuid::new_v4().simple().to_string();
        if participant_id.trim().is_empty() {
            return vec![ServerMessage::new(session_id, ServerBody::error(codes::BAD_REQUEST, "participant_id must be non-empty"))];
        }
        let mut inner = self.inner.lock().expect("hub poisoned");
        let ordinal = inner.created;
        inner.created += 1;
        let (assigned, rng_seed) = self.derive_assignment(ordinal);
        let (condition, assignment) = match (condition_override, self.config.condition_assignment) {
            (Some(c), _) => (c, Assignment::ClientOverride),
            (None, ConditionAssignment::Forced(_)) => (assigned, Assignment::Forced),
            (None, ConditionAssignment::Random) => (assigned, Assignment::Random),
        };
        let params = SessionParams {
            session_id: session_id.clone(),
            participant_id: participant_id.to_string(),
            condition,
            assignment,
            seed: self.config.seed,
            rng_seed,
            num_lines: self.config.num_lines,
            sigma: self.config.generator.sigma,
            manager: self.config.manager,
        };

        let (sink, memory): (Box<dyn EventSink>, _) = match &self.config.log_dir {
            Some(dir) => match JsonlLog::create(dir, &session_id) {
                Ok(log) => (Box::new(log), None),
                Err(e) => return vec![ServerMessage::new(session_id, ServerBody::error(codes::STORAGE, e.to_string()))],
            },
            None => {
                let mem = SharedMemoryLog::default();
                (Box::new(mem.clone()), Some(mem))
            }
        };
        match Session::create(params, builtin_registry(condition), self.generator.clone(), sink) {
            Ok((session, msgs)) => {
                inner.sessions.insert(session_id, Entry { session: Arc::new(Mutex::new(session)), memory });
                msgs
            }
            Err(e) => vec![ServerMessage::new(session_id, ServerBody::error(codes::STORAGE, e.to_string()))],
        }
    }

    /// Look up a live session, resuming it from its log if it is on disk but
    /// not in memory (for example after a restart).
    fn session(&self, session_id: &str) -> Option<Arc<Mutex<Session>>> {
        let mut inner = self.inner.lock().expect("hub poisoned");
        if let Some(entry) = inner.sessions.get(session_id) {
            return Some(entry.session.clone());
        }
        let dir = self.config.log_dir.as_ref()?;
        if session_id.is_empty() || !session_id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return None;
        }
        let events = load_session_log(dir, session_id).ok()?;
        let state = match replay(&events) {
            Ok(s) => s,
            Err(e) => {
                tracing::warn!(session_id, error = %e, "cannot resume session");
                return None;
            }
        };
        let sink = JsonlLog::reopen(dir, session_id).ok()?;
        let next_seq = events.last().map_or(0, |e| e.seq + 1);
        let registry = builtin_registry(state.condition);
        let session = Session::restore(state, next_seq, registry, self.generator.clone(), self.config.manager, Box::new(sink));
        let session = Arc::new(Mutex::new(session));
        inner.sessions.insert(session_id.to_string(), Entry { session: session.clone(), memory: None });
        Some(session)
    }

    /// Route one client message. `session.create` ignores `session_id`.
    pub fn handle(&self, session_id: &str, msg: ClientMessage) -> Vec<ServerMessage> {
        if let ClientMessage::SessionCreate { participant_id, condition } = msg {
            return self.create_session(&participant_id, condition);
        }
        match self.session(session_id) {
            Some(session) => session.lock().expect("session poisoned").handle(msg),
            None => vec![ServerMessage::new(session_id, ServerBody::error(codes::NO_SESSION, format!("no session `{session_id}`")))],
        }
    }

    pub fn state(&self, session_id: &str) -> Option<SessionState> {
        self.session(session_id).map(|s| s.lock().expect("session poisoned").state().clone())
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<_> = self.inner.lock().expect("hub poisoned").sessions.keys().cloned().collect();
        ids.sort();
        ids
    }

    /// A session's persisted events.
    pub fn events(&self, session_id: &str) -> Result<Vec<SessionEvent>, LogError> {
        {
            let inner = self.inner.lock().expect("hub poisoned");
            if let Some(mem) = inner.sessions.get(session_id).and_then(|e| e.memory.clone()) {
                return Ok(mem.0.lock().expect("memory log poisoned").events.clone());
            }
        }
        match &self.config.log_dir {
            Some(dir) => load_session_log(dir, session_id),
            None => Err(LogError::UnknownSession(session_id.to_string())),
        }
    }

    /// Drop a session from memory; its log stays on disk.
    pub fn evict(&self, session_id: &str) -> bool {
        self.inner.lock().expect("hub poisoned").sessions.remove(session_id).is_some()
    }
}
