//! JSON messages exchanged between a frontend and the session service.
//!
//! Both directions are tagged by a `type` field. Server messages always carry
//! the `session_id` they belong to.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{CommunicationDescriptor, Condition, ContextState, Initiator, Likert, Mode, Scope, SurveyKey};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum ClientMessage {
    #[serde(rename = "session.create")]
    SessionCreate {
        participant_id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        condition: Option<Condition>,
    },
    #[serde(rename = "comm.select")]
    CommSelect { comm_id: String },
    #[serde(rename = "dialogue.reply")]
    DialogueReply { text: String },
    #[serde(rename = "session.end")]
    SessionEnd {},
    #[serde(rename = "survey.submit")]
    SurveySubmit { answers: BTreeMap<SurveyKey, Likert> },
}

impl ClientMessage {
    pub fn type_name(&self) -> &'static str {
        match self {
            ClientMessage::SessionCreate { .. } => "session.create",
            ClientMessage::CommSelect { .. } => "comm.select",
            ClientMessage::DialogueReply { .. } => "dialogue.reply",
            ClientMessage::SessionEnd {} => "session.end",
            ClientMessage::SurveySubmit { .. } => "survey.submit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MenuItem {
    pub comm_id: String,
    pub label: String,
    pub scope: Scope,
    pub initiator: Initiator,
    pub mode: Mode,
}

impl From<&CommunicationDescriptor> for MenuItem {
    fn from(d: &CommunicationDescriptor) -> Self {
        Self { comm_id: d.comm_id.clone(), label: d.label.clone(), scope: d.tags.scope, initiator: d.tags.initiator, mode: d.tags.mode }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanvasLine {
    pub index: usize,
    pub text: String,
    pub frozen: bool,
    pub dominant_topic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanvasSketchPoint {
    pub topic: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum ServerBody {
    #[serde(rename = "session.created")]
    SessionCreated { condition: Condition, budget: u32 },
    #[serde(rename = "chat.agent")]
    ChatAgent { text: String },
    #[serde(rename = "comm.menu")]
    CommMenu { items: Vec<MenuItem> },
    #[serde(rename = "canvas.story")]
    CanvasStory { lines: Vec<CanvasLine>, sketch: Vec<CanvasSketchPoint> },
    #[serde(rename = "budget.update")]
    BudgetUpdate { used: u32, limit: u32 },
    #[serde(rename = "interrupt.offer")]
    InterruptOffer { comm_id: String, label: String, prompt: String },
    #[serde(rename = "session.ended")]
    SessionEnded {},
    #[serde(rename = "error")]
    Error { code: String, message: String },
}

impl ServerBody {
    pub fn type_name(&self) -> &'static str {
        match self {
            ServerBody::SessionCreated { .. } => "session.created",
            ServerBody::ChatAgent { .. } => "chat.agent",
            ServerBody::CommMenu { .. } => "comm.menu",
            ServerBody::CanvasStory { .. } => "canvas.story",
            ServerBody::BudgetUpdate { .. } => "budget.update",
            ServerBody::InterruptOffer { .. } => "interrupt.offer",
            ServerBody::SessionEnded {} => "session.ended",
            ServerBody::Error { .. } => "error",
        }
    }

    pub fn canvas(ctx: &ContextState) -> Self {
        ServerBody::CanvasStory {
            lines: ctx
                .story
                .lines
                .iter()
                .map(|l| CanvasLine { index: l.index, text: l.text.clone(), frozen: l.frozen, dominant_topic: l.dominant_topic.clone() })
                .collect(),
            sketch: ctx
                .sketch
                .control_points
                .iter()
                .map(|p| CanvasSketchPoint { topic: p.topic.clone(), start: p.start, end: p.end })
                .collect(),
        }
    }

    pub fn error(code: &str, message: impl Into<String>) -> Self {
        ServerBody::Error { code: code.to_string(), message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerMessage {
    pub session_id: String,
    #[serde(flatten)]
    pub body: ServerBody,
}

impl ServerMessage {
    pub fn new(session_id: impl Into<String>, body: ServerBody) -> Self {
        Self { session_id: session_id.into(), body }
    }

    pub fn type_name(&self) -> &'static str {
        self.body.type_name()
    }
}

/// Error codes carried by `error` messages.
pub mod codes {
    pub const NO_SESSION: &str = "no_session";
    pub const ENDED: &str = "ended";
    pub const STORAGE: &str = "storage";
    pub const UNKNOWN_COMM: &str = "unknown_comm";
    pub const UNAVAILABLE: &str = "unavailable";
    pub const BUSY: &str = "busy";
    pub const BUDGET_EXHAUSTED: &str = "budget_exhausted";
    pub const INVALID_SURVEY: &str = "invalid_survey";
    pub const SURVEY_EXISTS: &str = "survey_exists";
    pub const NOT_ENDED: &str = "not_ended";
    pub const BAD_REQUEST: &str = "bad_request";
    pub const GENERATOR: &str = "generator";
}
