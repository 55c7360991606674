//! Scripted end-to-end sessions.
//!
//! A [`Scenario`] is a JSON script of client messages, each followed by checks
//! on the server's replies, plus expectations on the resulting event log. The
//! runner drives any [`Transport`] (the in-process [`HubTransport`] here, HTTP
//! in the CLI crate), then replays the log, compares it with the live state
//! and feeds it through the metrics pipeline.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::context::{Backend, GeneratorConfig};
use crate::event::{encode_event, replay, EventBody, EventKind, SessionEvent};
use crate::metrics::{build_report, AnalysisOptions, SessionSummary};
use crate::model::{Condition, SessionState};
use crate::protocol::{CanvasLine, ClientMessage, ServerBody, ServerMessage};
use crate::service::{ConditionAssignment, ServiceConfig, SessionHub};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub condition: Condition,
    pub seed: u64,
    pub participant_id: String,
    /// Other names the scenario answers to.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aliases: Vec<String>,
    /// Checks on the replies to the implicit `session.create`.
    #[serde(default)]
    pub on_create: Vec<Check>,
    pub steps: Vec<ScriptStep>,
    #[serde(default)]
    pub expect_log: LogExpectations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptStep {
    /// Shown in transcripts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub send: ClientMessage,
    /// Send the same message this many times; checks apply to each reply.
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub repeat: u32,
    #[serde(default)]
    pub expect: Vec<Check>,
}

fn one() -> u32 {
    1
}

fn is_one(n: &u32) -> bool {
    *n == 1
}

/// Predicate over the messages returned for one client message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
pub enum Check {
    Has {
        r#type: String,
    },
    Lacks {
        r#type: String,
    },
    Count {
        r#type: String,
        n: usize,
    },
    Error {
        code: String,
    },
    NoError,
    /// The last menu offers every listed communication.
    MenuIncludes {
        comm_ids: Vec<String>,
    },
    MenuExcludes {
        comm_ids: Vec<String>,
    },
    ChatContains {
        text: String,
    },
    Budget {
        used: u32,
        limit: u32,
    },
    /// Fields of one line in the last canvas; absent fields are not checked.
    CanvasLine {
        index: usize,
        #[serde(default)]
        text: Option<String>,
        #[serde(default)]
        frozen: Option<bool>,
        #[serde(default)]
        dominant_topic: Option<String>,
    },
    /// Dominant topic of every line in the last canvas.
    CanvasTopics {
        topics: Vec<String>,
    },
    /// Line text in the last canvas equals the text before this step.
    LineUnchanged {
        index: usize,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogExpectations {
    /// Exact number of events of each listed kind.
    #[serde(default)]
    pub counts: BTreeMap<EventKind, usize>,
    /// Number of `comm_activated` events that were charged to the budget.
    #[serde(default)]
    pub budgeted_activations: Option<usize>,
    #[serde(default)]
    pub final_state: FinalState,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinalState {
    pub interactions_used: Option<u32>,
    /// Distinct goal indices reported, ascending.
    pub goals_reported: Option<Vec<u8>>,
    pub frozen: Option<Vec<usize>>,
    pub ended: Option<bool>,
    pub survey: Option<bool>,
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct TransportError(pub String);

/// How the runner reaches a session service.
pub trait Transport {
    /// Send one message. `session_id` is `None` only for `session.create`.
    fn send(&mut self, session_id: Option<&str>, msg: &ClientMessage) -> Result<Vec<ServerMessage>, TransportError>;
    fn events(&mut self, session_id: &str) -> Result<Vec<SessionEvent>, TransportError>;
    fn state(&mut self, session_id: &str) -> Result<SessionState, TransportError>;
}

/// Calls a [`SessionHub`] directly.
pub struct HubTransport {
    pub hub: SessionHub,
}

impl HubTransport {
    /// A hub with in-memory logs, the mock generator and the scenario's
    /// condition and seed.
    pub fn for_scenario(scenario: &Scenario) -> Self {
        let config = scenario_config(scenario);
        Self { hub: SessionHub::new(config).expect("scenario config is valid") }
    }
}

/// Service configuration a scenario expects: mock generator, fixed seed,
/// forced condition.
pub fn scenario_config(scenario: &Scenario) -> ServiceConfig {
    ServiceConfig {
        log_dir: None,
        generator: GeneratorConfig { backend: Backend::Mock, ..GeneratorConfig::default() },
        condition_assignment: ConditionAssignment::Forced(scenario.condition),
        seed: scenario.seed,
        ..ServiceConfig::default()
    }
}

impl Transport for HubTransport {
    fn send(&mut self, session_id: Option<&str>, msg: &ClientMessage) -> Result<Vec<ServerMessage>, TransportError> {
        Ok(self.hub.handle(session_id.unwrap_or_default(), msg.clone()))
    }

    fn events(&mut self, session_id: &str) -> Result<Vec<SessionEvent>, TransportError> {
        self.hub.events(session_id).map_err(|e| TransportError(e.to_string()))
    }

    fn state(&mut self, session_id: &str) -> Result<SessionState, TransportError> {
        self.hub.state(session_id).ok_or_else(|| TransportError(format!("no session {session_id}")))
    }
}

/// One message sent and what came back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub step: usize,
    pub note: Option<String>,
    pub sent: ClientMessage,
    pub received: Vec<ServerMessage>,
}

#[derive(Debug, Clone)]
pub struct Run {
    pub session_id: Option<String>,
    pub transcript: Vec<Exchange>,
    pub events: Vec<SessionEvent>,
    pub live_state: Option<SessionState>,
    /// First divergence from the script, if any.
    pub failure: Option<String>,
}

fn last_canvas(msgs: &[ServerMessage]) -> Option<&Vec<CanvasLine>> {
    msgs.iter().rev().find_map(|m| match &m.body {
        ServerBody::CanvasStory { lines, .. } => Some(lines),
        _ => None,
    })
}

fn evaluate(check: &Check, msgs: &[ServerMessage], before: Option<&Vec<CanvasLine>>) -> Result<(), String> {
    let count = |t: &str| msgs.iter().filter(|m| m.type_name() == t).count();
    let errors: Vec<&str> = msgs
        .iter()
        .filter_map(|m| match &m.body {
            ServerBody::Error { code, .. } => Some(code.as_str()),
            _ => None,
        })
        .collect();
    let menu = msgs.iter().rev().find_map(|m| match &m.body {
        ServerBody::CommMenu { items } => Some(items.iter().map(|i| i.comm_id.as_str()).collect::<Vec<_>>()),
        _ => None,
    });
    let canvas = || last_canvas(msgs).ok_or("no canvas.story in reply".to_string());
    let line = |index: usize| -> Result<&CanvasLine, String> { canvas()?.get(index).ok_or(format!("canvas has no line {index}")) };
    match check {
        Check::Has { r#type } if count(r#type) == 0 => Err(format!("expected a {type} message")),
        Check::Lacks { r#type } if count(r#type) > 0 => Err(format!("unexpected {type} message")),
        Check::Count { r#type, n } if count(r#type) != *n => Err(format!("expected {n} {type} messages, got {}", count(r#type))),
        Check::Error { code } if !errors.contains(&code.as_str()) => Err(format!("expected error {code}, got {errors:?}")),
        Check::NoError if !errors.is_empty() => Err(format!("unexpected errors {errors:?}")),
        Check::MenuIncludes { comm_ids } => {
            let menu = menu.ok_or("no comm.menu in reply")?;
            match comm_ids.iter().find(|c| !menu.contains(&c.as_str())) {
                Some(c) => Err(format!("menu {menu:?} lacks {c}")),
                None => Ok(()),
            }
        }
        Check::MenuExcludes { comm_ids } => {
            let menu = menu.ok_or("no comm.menu in reply")?;
            match comm_ids.iter().find(|c| menu.contains(&c.as_str())) {
                Some(c) => Err(format!("menu {menu:?} offers {c}")),
                None => Ok(()),
            }
        }
        Check::ChatContains { text } => {
            let found = msgs.iter().any(|m| matches!(&m.body, ServerBody::ChatAgent { text: t } if t.contains(text)));
            if found {
                Ok(())
            } else {
                Err(format!("no chat.agent message containing {text:?}"))
            }
        }
        Check::Budget { used, limit } => {
            let last = msgs.iter().rev().find_map(|m| match m.body {
                ServerBody::BudgetUpdate { used, limit } => Some((used, limit)),
                _ => None,
            });
            match last {
                Some(got) if got == (*used, *limit) => Ok(()),
                other => Err(format!("expected budget {used}/{limit}, got {other:?}")),
            }
        }
        Check::CanvasLine { index, text, frozen, dominant_topic } => {
            let l = line(*index)?;
            if text.as_ref().is_some_and(|t| *t != l.text) {
                return Err(format!("line {index} text is {:?}, expected {:?}", l.text, text.as_deref().unwrap_or("")));
            }
            if frozen.is_some_and(|f| f != l.frozen) {
                return Err(format!("line {index} frozen is {}", l.frozen));
            }
            if dominant_topic.is_some() && *dominant_topic != l.dominant_topic {
                return Err(format!("line {index} topic is {:?}, expected {:?}", l.dominant_topic, dominant_topic));
            }
            Ok(())
        }
        Check::CanvasTopics { topics } => {
            let got: Vec<String> = canvas()?.iter().map(|l| l.dominant_topic.clone().unwrap_or_default()).collect();
            if got == *topics {
                Ok(())
            } else {
                Err(format!("line topics {got:?}, expected {topics:?}"))
            }
        }
        Check::LineUnchanged { index } => {
            let prev = before.and_then(|c| c.get(*index)).ok_or(format!("no earlier canvas with line {index}"))?;
            let now = line(*index)?;
            if prev.text == now.text {
                Ok(())
            } else {
                Err(format!("line {index} changed from {:?} to {:?}", prev.text, now.text))
            }
        }
        _ => Ok(()),
    }
}

/// Create the session, then drive the script. Stops at the first failing check.
pub fn run_script(scenario: &Scenario, transport: &mut dyn Transport) -> Run {
    let mut run = Run { session_id: None, transcript: Vec::new(), events: Vec::new(), live_state: None, failure: None };
    let create = ScriptStep {
        note: Some("open a session".into()),
        send: ClientMessage::SessionCreate { participant_id: scenario.participant_id.clone(), condition: None },
        repeat: 1,
        expect: scenario.on_create.clone(),
    };
    let mut canvas: Option<Vec<CanvasLine>> = None;
    'steps: for (i, step) in std::iter::once(&create).chain(&scenario.steps).enumerate() {
        for rep in 0..step.repeat {
            let received = match transport.send(run.session_id.as_deref(), &step.send) {
                Ok(r) => r,
                Err(e) => {
                    run.failure = Some(format!("step {i}: transport: {e}"));
                    break 'steps;
                }
            };
            if run.session_id.is_none() {
                match received.first() {
                    Some(m) if m.type_name() == "session.created" => run.session_id = Some(m.session_id.clone()),
                    _ => {
                        run.failure = Some(format!("step {i}: first reply is not session.created"));
                        break 'steps;
                    }
                }
            }
            let failed = step.expect.iter().find_map(|c| evaluate(c, &received, canvas.as_ref()).err());
            if let Some(c) = last_canvas(&received) {
                canvas = Some(c.clone());
            }
            run.transcript.push(Exchange { step: i, note: step.note.clone(), sent: step.send.clone(), received });
            if let Some(msg) = failed {
                let which = if step.repeat > 1 { format!("step {i} (repeat {})", rep + 1) } else { format!("step {i}") };
                run.failure = Some(format!("{which}: {msg}"));
                break 'steps;
            }
        }
    }
    if let Some(id) = run.session_id.clone() {
        match (transport.events(&id), transport.state(&id)) {
            (Ok(events), Ok(state)) => {
                run.events = events;
                run.live_state = Some(state);
            }
            (Err(e), _) | (_, Err(e)) => {
                run.failure.get_or_insert(format!("fetching log: {e}"));
            }
        }
    }
    run
}

/// Log lines with timestamps and session ids blanked, for run-to-run comparison.
pub fn normalized_log(events: &[SessionEvent]) -> Vec<String> {
    events
        .iter()
        .map(|e| {
            let mut e = e.clone();
            e.ts.clear();
            e.session_id.clear();
            encode_event(&e)
        })
        .collect()
}

fn check_log(expect: &LogExpectations, events: &[SessionEvent], state: &SessionState) -> Result<(), String> {
    for (kind, want) in &expect.counts {
        let got = events.iter().filter(|e| e.kind() == *kind).count();
        if got != *want {
            return Err(format!("expected {want} {} events, got {got}", kind.as_str()));
        }
    }
    if let Some(want) = expect.budgeted_activations {
        let got = events.iter().filter(|e| matches!(e.body, EventBody::CommActivated { counts_against_budget: true, .. })).count();
        if got != want {
            return Err(format!("expected {want} budgeted activations, got {got}"));
        }
    }
    let f = &expect.final_state;
    if let Some(want) = f.interactions_used {
        if state.interactions_used != want {
            return Err(format!("interactions_used is {}, expected {want}", state.interactions_used));
        }
    }
    if let Some(want) = &f.goals_reported {
        let mut got: Vec<u8> = state.goal_reports.iter().map(|g| g.goal_index).collect();
        got.sort_unstable();
        got.dedup();
        if got != *want {
            return Err(format!("goals reported {got:?}, expected {want:?}"));
        }
    }
    if let Some(want) = &f.frozen {
        let got = state.story().frozen_indices();
        if got != *want {
            return Err(format!("frozen lines {got:?}, expected {want:?}"));
        }
    }
    if f.ended.is_some_and(|e| e != state.ended) {
        return Err(format!("ended is {}", state.ended));
    }
    if f.survey.is_some_and(|s| s != state.exit_survey.is_some()) {
        return Err(format!("survey present is {}", state.exit_survey.is_some()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub name: String,
    pub passed: bool,
    pub failure: Option<String>,
    pub messages_sent: usize,
    pub event_counts: BTreeMap<EventKind, usize>,
    pub replay_matches: bool,
    /// `None` when only one run was made.
    pub deterministic: Option<bool>,
    pub metrics_warnings: usize,
}

impl fmt::Display for ScenarioReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let events: usize = self.event_counts.values().sum();
        if self.passed {
            write!(f, "PASS {} ({} messages, {} events)", self.name, self.messages_sent, events)
        } else {
            write!(f, "FAIL {}: {}", self.name, self.failure.as_deref().unwrap_or("unknown"))
        }
    }
}

/// Check one run; with `second`, also compare the two logs.
pub fn assess(scenario: &Scenario, run: &Run, second: Option<&Run>) -> ScenarioReport {
    let mut event_counts = BTreeMap::new();
    for e in &run.events {
        *event_counts.entry(e.kind()).or_insert(0) += 1;
    }
    let replayed = replay(&run.events);
    let replay_matches = match (&replayed, &run.live_state) {
        (Ok(r), Some(live)) => r == live,
        _ => false,
    };
    let deterministic = second.map(|b| normalized_log(&run.events) == normalized_log(&b.events));
    let metrics_warnings = match &replayed {
        Ok(state) => {
            let report = build_report(&[SessionSummary::from(state)], Vec::new(), &AnalysisOptions::default());
            report.warnings.len()
        }
        Err(_) => 1,
    };

    let failure = run
        .failure
        .clone()
        .or_else(|| replayed.as_ref().err().map(|e| format!("replay failed: {e}")))
        .or_else(|| (!replay_matches).then(|| "replayed state differs from live state".to_string()))
        .or_else(|| {
            let live = run.live_state.as_ref()?;
            check_log(&scenario.expect_log, &run.events, live).err()
        })
        .or_else(|| second.and_then(|b| b.failure.clone().map(|f| format!("second run: {f}"))))
        .or_else(|| (deterministic == Some(false)).then(|| "two runs produced different logs".to_string()))
        .or_else(|| (metrics_warnings > 0).then(|| "metrics pipeline reported warnings".to_string()));

    ScenarioReport {
        name: scenario.name.clone(),
        passed: failure.is_none(),
        failure,
        messages_sent: run.transcript.len(),
        event_counts,
        replay_matches,
        deterministic,
        metrics_warnings,
    }
}

/// Run a scenario twice against fresh in-process hubs and assess it.
pub fn run_scenario(scenario: &Scenario) -> ScenarioReport {
    let first = run_script(scenario, &mut HubTransport::for_scenario(scenario));
    let second = run_script(scenario, &mut HubTransport::for_scenario(scenario));
    assess(scenario, &first, Some(&second))
}

const BUNDLED: [&str; 5] = [
    include_str!("../../../scenarios/global_two_sketch_goals.json"),
    include_str!("../../../scenarios/local_edit_freeze_interrupt.json"),
    include_str!("../../../scenarios/global_no_interrupt.json"),
    include_str!("../../../scenarios/budget_burn.json"),
    include_str!("../../../scenarios/empty_session.json"),
];

/// The scenarios shipped with the crate.
pub fn bundled() -> Vec<Scenario> {
    BUNDLED.iter().map(|s| serde_json::from_str(s).expect("bundled scenario parses")).collect()
}

pub fn find_bundled(name: &str) -> Option<Scenario> {
    bundled().into_iter().find(|s| s.name == name || s.aliases.iter().any(|a| a == name))
}

/// Markdown transcript of a run, with the session id replaced by `<session>`.
pub fn render_transcript(scenario: &Scenario, run: &Run) -> String {
    use std::fmt::Write as _;
    let sid = run.session_id.clone().unwrap_or_default();
    let json = |v: String| if sid.is_empty() { v } else { v.replace(&sid, "<session>") };
    let mut out =
        format!("# {}\n\n{}\n\nCondition: {}, seed {}.\n", scenario.name, scenario.description, scenario.condition, scenario.seed);
    let mut last_step = usize::MAX;
    for x in &run.transcript {
        if x.step != last_step {
            last_step = x.step;
            let _ = write!(out, "\n## Step {}", x.step);
            if let Some(n) = &x.note {
                let _ = write!(out, ": {n}");
            }
            let _ = writeln!(out);
        }
        let _ = writeln!(out, "\n```text\n> {}", json(serde_json::to_string(&x.sent).expect("serializes")));
        for m in &x.received {
            let _ = writeln!(out, "< {}", json(serde_json::to_string(m).expect("serializes")));
        }
        let _ = writeln!(out, "```");
    }
    if let Some(f) = &run.failure {
        let _ = writeln!(out, "\n**Stopped:** {f}");
    }
    out
}
