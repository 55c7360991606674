//! Shared domain types: the story canvas, the topic sketch, the communication
//! ontology, and per-session state.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Default number of lines on the story canvas.
pub const DEFAULT_NUM_LINES: usize = 10;
/// Default cap on budgeted interactions per session.
pub const DEFAULT_INTERACTION_BUDGET: u32 = 15;
/// Default spread of the Gaussian topic blend.
pub const DEFAULT_SIGMA: f64 = 2.0;

/// Who takes the initiative for a communication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initiator {
    Human,
    Agent,
}

/// Whether a communication is about future changes or about existing content.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Elaboration,
    Reflection,
}

/// How much of the artifact a communication targets. `Regional` sits between
/// the two extremes; no built-in communication uses it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Global,
    Local,
    Regional,
}

/// One value on each of the three ontology dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OntologyTags {
    pub initiator: Initiator,
    pub mode: Mode,
    pub scope: Scope,
}

impl OntologyTags {
    pub const fn new(initiator: Initiator, mode: Mode, scope: Scope) -> Self {
        Self { initiator, mode, scope }
    }
}

/// Experimental condition a session runs under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Global,
    Local,
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Global => "global",
            Condition::Local => "local",
        }
    }

    /// Short label used in survey tables.
    pub fn abbrev(self) -> &'static str {
        match self {
            Condition::Global => "Gbl",
            Condition::Local => "Loc",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "global" => Ok(Condition::Global),
            "local" => Ok(Condition::Local),
            other => Err(format!("unknown condition `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Line {
    pub index: usize,
    pub text: String,
    pub frozen: bool,
    pub dominant_topic: Option<String>,
}

impl Line {
    pub fn empty(index: usize) -> Self {
        Self { index, text: String::new(), frozen: false, dominant_topic: None }
    }
}

/// The creative artifact: a fixed number of numbered lines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoryDocument {
    pub lines: Vec<Line>,
    pub generation_counter: u64,
}

impl StoryDocument {
    pub fn new(num_lines: usize) -> Self {
        Self { lines: (0..num_lines).map(Line::empty).collect(), generation_counter: 0 }
    }

    pub fn num_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn line(&self, index: usize) -> Option<&Line> {
        self.lines.get(index)
    }

    pub fn frozen_indices(&self) -> Vec<usize> {
        self.lines.iter().filter(|l| l.frozen).map(|l| l.index).collect()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.lines.iter().map(|l| l.text.as_str()).collect()
    }
}

impl Default for StoryDocument {
    fn default() -> Self {
        Self::new(DEFAULT_NUM_LINES)
    }
}

/// A topic scheduled over an inclusive range of lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPoint {
    pub topic: String,
    pub start: usize,
    pub end: usize,
}

impl ControlPoint {
    pub fn new(topic: impl Into<String>, start: usize, end: usize) -> Self {
        Self { topic: topic.into(), start, end }
    }

    pub fn center(&self) -> f64 {
        (self.start as f64 + self.end as f64) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SketchError {
    #[error("topic must be non-empty")]
    EmptyTopic,
    #[error("topic `{0}` has surrounding whitespace")]
    UntrimmedTopic(String),
    #[error("line range {start}-{end} is invalid for a {num_lines}-line story")]
    BadRange { start: usize, end: usize, num_lines: usize },
    #[error("blend spread must be positive and finite, got {0}")]
    BadSigma(f64),
}

/// Global control signal: a schedule of topics over story positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchSpec {
    pub control_points: Vec<ControlPoint>,
    pub sigma: f64,
}

impl Default for SketchSpec {
    fn default() -> Self {
        Self { control_points: Vec::new(), sigma: DEFAULT_SIGMA }
    }
}

impl SketchSpec {
    pub fn new(control_points: Vec<ControlPoint>, sigma: f64) -> Self {
        Self { control_points, sigma }
    }

    pub fn is_empty(&self) -> bool {
        self.control_points.is_empty()
    }

    pub fn validate_point(point: &ControlPoint, num_lines: usize) -> Result<(), SketchError> {
        if point.topic.is_empty() {
            return Err(SketchError::EmptyTopic);
        }
        if point.topic.trim() != point.topic {
            return Err(SketchError::UntrimmedTopic(point.topic.clone()));
        }
        if point.start > point.end || point.end >= num_lines {
            return Err(SketchError::BadRange { start: point.start, end: point.end, num_lines });
        }
        Ok(())
    }

    pub fn validate(&self, num_lines: usize) -> Result<(), SketchError> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(SketchError::BadSigma(self.sigma));
        }
        self.control_points.iter().try_for_each(|p| Self::validate_point(p, num_lines))
    }
}

/// Describes one communication type to menus and logs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommunicationDescriptor {
    pub comm_id: String,
    pub label: String,
    pub tags: OntologyTags,
    pub counts_against_budget: bool,
}

/// Everything the creative context owns: the canvas, the sketch and the prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextState {
    pub story: StoryDocument,
    pub sketch: SketchSpec,
    pub prompt: Option<String>,
    /// Whether the prompt still governs line 0 (cleared by a manual edit of line 0).
    pub prompt_active: bool,
}

impl ContextState {
    pub fn new(num_lines: usize, sigma: f64) -> Self {
        Self {
            story: StoryDocument::new(num_lines),
            sketch: SketchSpec { control_points: Vec::new(), sigma },
            prompt: None,
            prompt_active: false,
        }
    }
}

/// A reply value after parsing against a dialogue step's expectation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "value")]
pub enum Reply {
    Text(String),
    Integer(i64),
    Range(usize, usize),
    Topic(String),
    YesNo(bool),
}

/// A dialogue in progress. Pure data so that replay can rebuild it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueState {
    pub comm_id: String,
    pub initiator: Initiator,
    /// Index of the script step awaiting a reply.
    pub step: usize,
    pub replies: Vec<Reply>,
    /// For agent-initiated interrupts: the line the suggestion is about.
    pub subject_line: Option<usize>,
}

impl DialogueState {
    pub fn is_interrupt(&self) -> bool {
        self.initiator == Initiator::Agent
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalReport {
    pub goal_index: u8,
    pub interactions_at_report: u32,
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "text")]
pub enum Feeling {
    Frustrated,
    Satisfied,
    Neutral,
    Other(String),
}

impl Feeling {
    pub fn parse(text: &str) -> Self {
        let t = text.trim();
        match t.to_ascii_lowercase().as_str() {
            "frustrated" | "frustration" => Feeling::Frustrated,
            "satisfied" | "satisfaction" => Feeling::Satisfied,
            "neutral" => Feeling::Neutral,
            _ => Feeling::Other(t.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeelingReport {
    pub feeling: Feeling,
    pub timestamp: String,
}

/// Five-level agreement scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Likert {
    StronglyDisagree,
    Disagree,
    Neutral,
    Agree,
    StronglyAgree,
}

impl Likert {
    pub const ALL: [Likert; 5] = [Likert::StronglyDisagree, Likert::Disagree, Likert::Neutral, Likert::Agree, Likert::StronglyAgree];
}

/// Exit-survey statements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurveyKey {
    Goal1,
    Goal2,
    Goal3,
    Satisfaction,
    Frustration,
}

impl SurveyKey {
    pub const ALL: [SurveyKey; 5] = [SurveyKey::Goal1, SurveyKey::Goal2, SurveyKey::Goal3, SurveyKey::Satisfaction, SurveyKey::Frustration];

    pub fn abbrev(self) -> &'static str {
        match self {
            SurveyKey::Goal1 => "G#1",
            SurveyKey::Goal2 => "G#2",
            SurveyKey::Goal3 => "G#3",
            SurveyKey::Satisfaction => "Sat",
            SurveyKey::Frustration => "Fru",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExitSurvey {
    pub answers: BTreeMap<SurveyKey, Likert>,
}

impl ExitSurvey {
    /// Accepts the answers only when every statement has exactly one answer.
    pub fn new(answers: BTreeMap<SurveyKey, Likert>) -> Result<Self, Vec<SurveyKey>> {
        let missing: Vec<_> = SurveyKey::ALL.iter().copied().filter(|k| !answers.contains_key(k)).collect();
        if missing.is_empty() {
            Ok(Self { answers })
        } else {
            Err(missing)
        }
    }
}

/// One participant session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub participant_id: String,
    pub condition: Condition,
    pub context: ContextState,
    pub interactions_used: u32,
    pub interaction_budget: u32,
    pub budget_exhausted_announced: bool,
    pub active_dialogue: Option<DialogueState>,
    /// Line edited by the most recent budgeted human action, while a freeze
    /// suggestion for it is still pending.
    pub pending_edit: Option<usize>,
    pub goal_reports: Vec<GoalReport>,
    pub feeling_reports: Vec<FeelingReport>,
    pub exit_survey: Option<ExitSurvey>,
    pub rng_seed: u64,
    pub ended: bool,
}

impl SessionState {
    pub fn new(
        session_id: impl Into<String>,
        participant_id: impl Into<String>,
        condition: Condition,
        num_lines: usize,
        sigma: f64,
        interaction_budget: u32,
        rng_seed: u64,
    ) -> Self {
        Self {
            session_id: session_id.into(),
            participant_id: participant_id.into(),
            condition,
            context: ContextState::new(num_lines, sigma),
            interactions_used: 0,
            interaction_budget,
            budget_exhausted_announced: false,
            active_dialogue: None,
            pending_edit: None,
            goal_reports: Vec::new(),
            feeling_reports: Vec::new(),
            exit_survey: None,
            rng_seed,
            ended: false,
        }
    }

    pub fn story(&self) -> &StoryDocument {
        &self.context.story
    }

    pub fn sketch(&self) -> &SketchSpec {
        &self.context.sketch
    }

    pub fn budget_exhausted(&self) -> bool {
        self.interactions_used >= self.interaction_budget
    }
}
