//! Append-only session telemetry and log replay.
//!
//! Every state change of a live session is first recorded as a
//! [`SessionEvent`] and then applied with [`apply_event`]; [`replay`] runs the
//! same function over a stored log, so a log always rebuilds the state the
//! live session had.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::context::{ContextQuery, QueryAck};
use crate::model::{
    Condition, ContextState, DialogueState, ExitSurvey, Feeling, FeelingReport, GoalReport, Initiator, Likert, Reply, SessionState,
    SurveyKey,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    Human,
    Agent,
    System,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    SessionCreated,
    CommActivated,
    DialogueStep,
    QueryExecuted,
    StoryUpdated,
    InterruptOffered,
    InterruptAccepted,
    InterruptDeclined,
    GoalReported,
    FeelingReported,
    BudgetExhausted,
    SessionEnded,
    SurveySubmitted,
}

impl EventKind {
    pub const ALL: [EventKind; 13] = [
        EventKind::SessionCreated,
        EventKind::CommActivated,
        EventKind::DialogueStep,
        EventKind::QueryExecuted,
        EventKind::StoryUpdated,
        EventKind::InterruptOffered,
        EventKind::InterruptAccepted,
        EventKind::InterruptDeclined,
        EventKind::GoalReported,
        EventKind::FeelingReported,
        EventKind::BudgetExhausted,
        EventKind::SessionEnded,
        EventKind::SurveySubmitted,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::SessionCreated => "session_created",
            EventKind::CommActivated => "comm_activated",
            EventKind::DialogueStep => "dialogue_step",
            EventKind::QueryExecuted => "query_executed",
            EventKind::StoryUpdated => "story_updated",
            EventKind::InterruptOffered => "interrupt_offered",
            EventKind::InterruptAccepted => "interrupt_accepted",
            EventKind::InterruptDeclined => "interrupt_declined",
            EventKind::GoalReported => "goal_reported",
            EventKind::FeelingReported => "feeling_reported",
            EventKind::BudgetExhausted => "budget_exhausted",
            EventKind::SessionEnded => "session_ended",
            EventKind::SurveySubmitted => "survey_submitted",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| k.as_str() == s)
    }
}

/// How a session's condition was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assignment {
    Random,
    Forced,
    ClientOverride,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub participant_id: String,
    pub condition: Condition,
    pub assignment: Assignment,
    /// Service seed the session seed and any random assignment derive from.
    pub seed: u64,
    pub rng_seed: u64,
    pub num_lines: usize,
    pub sigma: f64,
    pub interaction_budget: u32,
    pub generator: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepOutcome {
    /// Reply accepted, more steps follow.
    Continue,
    /// Reply could not be parsed; the same step is asked again.
    Reprompt,
    Completed,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    SessionCreated(SessionCreated),
    CommActivated {
        comm_id: String,
        counts_against_budget: bool,
        /// Budget usage after this activation.
        interactions_used: u32,
    },
    DialogueStep {
        comm_id: String,
        step: usize,
        reply: Option<String>,
        parsed: Option<Reply>,
        outcome: StepOutcome,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
    QueryExecuted {
        query: ContextQuery,
        ack: QueryAck,
    },
    StoryUpdated {
        context: ContextState,
    },
    InterruptOffered {
        comm_id: String,
        line: Option<usize>,
        prompt: String,
    },
    InterruptAccepted {
        comm_id: String,
    },
    InterruptDeclined {
        comm_id: String,
    },
    GoalReported {
        goal_index: u8,
        interactions_at_report: u32,
    },
    FeelingReported {
        feeling: Feeling,
    },
    BudgetExhausted {
        used: u32,
        limit: u32,
    },
    SessionEnded {
        reason: String,
    },
    SurveySubmitted {
        answers: BTreeMap<SurveyKey, Likert>,
    },
}

impl EventBody {
    pub fn kind(&self) -> EventKind {
        match self {
            EventBody::SessionCreated(_) => EventKind::SessionCreated,
            EventBody::CommActivated { .. } => EventKind::CommActivated,
            EventBody::DialogueStep { .. } => EventKind::DialogueStep,
            EventBody::QueryExecuted { .. } => EventKind::QueryExecuted,
            EventBody::StoryUpdated { .. } => EventKind::StoryUpdated,
            EventBody::InterruptOffered { .. } => EventKind::InterruptOffered,
            EventBody::InterruptAccepted { .. } => EventKind::InterruptAccepted,
            EventBody::InterruptDeclined { .. } => EventKind::InterruptDeclined,
            EventBody::GoalReported { .. } => EventKind::GoalReported,
            EventBody::FeelingReported { .. } => EventKind::FeelingReported,
            EventBody::BudgetExhausted { .. } => EventKind::BudgetExhausted,
            EventBody::SessionEnded { .. } => EventKind::SessionEnded,
            EventBody::SurveySubmitted { .. } => EventKind::SurveySubmitted,
        }
    }
}

/// One telemetry record. Serializes to a flat JSON object with the fields
/// `seq`, `ts`, `session_id`, `actor`, `kind`, `payload`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub seq: u64,
    pub ts: String,
    pub session_id: String,
    pub actor: Actor,
    #[serde(flatten)]
    pub body: EventBody,
}

impl SessionEvent {
    pub fn kind(&self) -> EventKind {
        self.body.kind()
    }
}

pub fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReplayError {
    #[error("malformed log: {0}")]
    MalformedLog(String),
    #[error("unsupported event kind `{0}`")]
    UnsupportedEvent(String),
}

fn malformed(msg: impl Into<String>) -> ReplayError {
    ReplayError::MalformedLog(msg.into())
}

/// Encode as one JSONL line, without the trailing newline.
pub fn encode_event(event: &SessionEvent) -> String {
    serde_json::to_string(event).expect("session events always serialize")
}

/// Decode one JSONL line. Unknown `kind` values are reported as
/// [`ReplayError::UnsupportedEvent`] rather than as generic parse errors.
pub fn decode_event(line: &str) -> Result<SessionEvent, ReplayError> {
    let value: serde_json::Value = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
    match value.get("kind").and_then(|k| k.as_str()) {
        Some(kind) if EventKind::parse(kind).is_none() => {
            return Err(ReplayError::UnsupportedEvent(kind.to_string()));
        }
        None => return Err(malformed("event without a `kind`")),
        Some(_) => {}
    }
    serde_json::from_value(value).map_err(|e| malformed(e.to_string()))
}

/// Build the initial state described by a `SessionCreated` event.
pub fn initial_state(event: &SessionEvent) -> Result<SessionState, ReplayError> {
    let EventBody::SessionCreated(created) = &event.body else {
        return Err(malformed(format!("log starts with {} instead of session_created", event.kind().as_str())));
    };
    Ok(SessionState::new(
        event.session_id.clone(),
        created.participant_id.clone(),
        created.condition,
        created.num_lines,
        created.sigma,
        created.interaction_budget,
        created.rng_seed,
    ))
}

/// Apply one non-initial event to `state`.
pub fn apply_event(state: &mut SessionState, event: &SessionEvent) -> Result<(), ReplayError> {
    if event.session_id != state.session_id {
        return Err(malformed(format!("event for session {} in log of {}", event.session_id, state.session_id)));
    }
    if state.ended && !matches!(event.body, EventBody::SurveySubmitted { .. }) {
        return Err(malformed(format!("{} after session end", event.kind().as_str())));
    }
    match &event.body {
        EventBody::SessionCreated(_) => return Err(malformed("duplicate session_created")),
        EventBody::CommActivated { comm_id, counts_against_budget, interactions_used } => {
            if state.active_dialogue.is_some() {
                return Err(malformed("activation while a dialogue is active"));
            }
            if *counts_against_budget {
                if state.budget_exhausted() {
                    return Err(malformed("budgeted activation past the interaction budget"));
                }
                state.interactions_used += 1;
                state.pending_edit = None;
            }
            if *interactions_used != state.interactions_used {
                return Err(malformed(format!(
                    "activation reports {interactions_used} interactions, replay has {}",
                    state.interactions_used
                )));
            }
            state.active_dialogue = Some(DialogueState {
                comm_id: comm_id.clone(),
                initiator: Initiator::Human,
                step: 0,
                replies: Vec::new(),
                subject_line: None,
            });
        }
        EventBody::DialogueStep { comm_id, parsed, outcome, .. } => {
            let dialogue = match state.active_dialogue.as_mut() {
                Some(d) if &d.comm_id == comm_id => d,
                _ => return Err(malformed(format!("dialogue step for inactive communication {comm_id}"))),
            };
            match outcome {
                StepOutcome::Continue => {
                    dialogue.replies.extend(parsed.clone());
                    dialogue.step += 1;
                }
                StepOutcome::Reprompt => {}
                StepOutcome::Completed | StepOutcome::Aborted => state.active_dialogue = None,
            }
        }
        EventBody::QueryExecuted { query, .. } => {
            if let (Actor::Human, ContextQuery::EditLine { index, .. }) = (event.actor, query) {
                state.pending_edit = Some(*index);
            }
        }
        EventBody::StoryUpdated { context } => {
            if context.story.num_lines() != state.context.story.num_lines() {
                return Err(malformed("story update changes the number of lines"));
            }
            state.context = context.clone();
        }
        EventBody::InterruptOffered { comm_id, line, .. } => {
            if state.active_dialogue.is_some() {
                return Err(malformed("interrupt offered while a dialogue is active"));
            }
            state.pending_edit = None;
            state.active_dialogue = Some(DialogueState {
                comm_id: comm_id.clone(),
                initiator: Initiator::Agent,
                step: 0,
                replies: Vec::new(),
                subject_line: *line,
            });
        }
        EventBody::InterruptAccepted { comm_id } | EventBody::InterruptDeclined { comm_id } => match &state.active_dialogue {
            Some(d) if d.is_interrupt() && &d.comm_id == comm_id => state.active_dialogue = None,
            _ => return Err(malformed(format!("interrupt answer for {comm_id} without an offer"))),
        },
        EventBody::GoalReported { goal_index, interactions_at_report } => {
            if *interactions_at_report != state.interactions_used {
                return Err(malformed("goal report interaction count disagrees with replay"));
            }
            state.goal_reports.push(GoalReport {
                goal_index: *goal_index,
                interactions_at_report: *interactions_at_report,
                timestamp: event.ts.clone(),
            });
        }
        EventBody::FeelingReported { feeling } => {
            state.feeling_reports.push(FeelingReport { feeling: feeling.clone(), timestamp: event.ts.clone() });
        }
        EventBody::BudgetExhausted { .. } => {
            if state.budget_exhausted_announced {
                return Err(malformed("budget exhausted twice"));
            }
            state.budget_exhausted_announced = true;
        }
        EventBody::SessionEnded { .. } => {
            state.ended = true;
            state.active_dialogue = None;
        }
        EventBody::SurveySubmitted { answers } => {
            if state.exit_survey.is_some() {
                return Err(malformed("second exit survey"));
            }
            let survey = ExitSurvey::new(answers.clone()).map_err(|missing| malformed(format!("survey missing {missing:?}")))?;
            state.exit_survey = Some(survey);
        }
    }
    Ok(())
}

/// Rebuild a session's state from its complete, ordered log.
pub fn replay(events: &[SessionEvent]) -> Result<SessionState, ReplayError> {
    let (first, rest) = events.split_first().ok_or_else(|| malformed("empty log"))?;
    let mut state = initial_state(first)?;
    for (expected, event) in (first.seq + 1..).zip(rest) {
        if event.seq != expected {
            return Err(malformed(format!("expected seq {expected}, found {}", event.seq)));
        }
        apply_event(&mut state, event)?;
    }
    Ok(state)
}
