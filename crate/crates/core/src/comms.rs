//! Communications: typed exchanges between the designer and the agent, each a
//! short scripted dialogue with activation confidences.
//!
//! Everything here is a pure function of [`SessionState`]. Recording events
//! and executing effects is the session's job.

use std::sync::Arc;

use crate::context::ContextQuery;
use crate::model::{CommunicationDescriptor, Condition, DialogueState, Feeling, Initiator, Mode, OntologyTags, Reply, Scope, SessionState};

pub const USER_SKETCH: &str = "user_sketch";
pub const USER_WORK: &str = "user_work";
pub const GENERATE_WITH_FREEZE: &str = "generate_with_freeze";
pub const REGENERATE: &str = "regenerate";
pub const GOAL_COMPLETE: &str = "goal_complete";
pub const FEELING: &str = "feeling";
pub const END_SESSION: &str = "end_session";

/// Number of sub-goals participants can report.
pub const NUM_GOALS: i64 = 3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CommError {
    #[error("another dialogue is already active")]
    Busy,
    #[error("the interaction budget is used up")]
    BudgetExhausted,
    #[error("unknown communication `{0}`")]
    UnknownCommunication(String),
    #[error("communication `{0}` is not available right now")]
    Unavailable(String),
    #[error("communication `{0}` is already registered")]
    DuplicateId(String),
    #[error("no dialogue is active")]
    NoActiveDialogue,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExpectedReply {
    FreeText,
    Integer {
        min: i64,
        max: i64,
    },
    /// Inclusive range `a-b` or `a b` with `0 <= a <= b <= max`.
    IntegerRange {
        max: usize,
    },
    TopicString,
    YesNo,
    /// Informational step; no reply is awaited.
    None,
}

impl ExpectedReply {
    pub fn awaits_reply(&self) -> bool {
        !matches!(self, ExpectedReply::None)
    }

    /// Parse a raw reply, or explain what was expected.
    pub fn parse(&self, raw: &str) -> Result<Reply, String> {
        let text = raw.trim();
        match self {
            ExpectedReply::FreeText => {
                if text.is_empty() {
                    Err("Please type some text.".into())
                } else {
                    Ok(Reply::Text(text.to_string()))
                }
            }
            ExpectedReply::TopicString => {
                if text.is_empty() {
                    Err("Please give me a topic, for example \"sports\".".into())
                } else {
                    Ok(Reply::Topic(text.to_string()))
                }
            }
            ExpectedReply::Integer { min, max } => match text.parse::<i64>() {
                Ok(n) if (*min..=*max).contains(&n) => Ok(Reply::Integer(n)),
                _ => Err(format!("Please reply with a number from {min} to {max}.")),
            },
            ExpectedReply::IntegerRange { max } => {
                let bad = || format!("Please reply with a line range such as 2-5, using lines 0 to {max}.");
                let parts: Vec<&str> = text.split(|c: char| c == '-' || c.is_whitespace()).filter(|p| !p.is_empty()).collect();
                let nums: Vec<usize> = parts.iter().map(|p| p.parse::<usize>()).collect::<Result<_, _>>().map_err(|_| bad())?;
                let (a, b) = match nums.as_slice() {
                    [a] => (*a, *a),
                    [a, b] => (*a, *b),
                    _ => return Err(bad()),
                };
                if a <= b && b <= *max {
                    Ok(Reply::Range(a, b))
                } else {
                    Err(bad())
                }
            }
            ExpectedReply::YesNo => match text.to_ascii_lowercase().as_str() {
                "y" | "yes" | "ok" | "sure" => Ok(Reply::YesNo(true)),
                "n" | "no" => Ok(Reply::YesNo(false)),
                _ => Err("Please answer yes or no.".into()),
            },
            ExpectedReply::None => Err("No reply is expected here.".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DialogueStep {
    /// Agent text. `{0}`, `{1}`, ... are replaced by earlier replies.
    pub utterance: String,
    pub expected: ExpectedReply,
}

impl DialogueStep {
    pub fn new(utterance: impl Into<String>, expected: ExpectedReply) -> Self {
        Self { utterance: utterance.into(), expected }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DialogueScript {
    pub steps: Vec<DialogueStep>,
}

impl DialogueScript {
    pub fn new(steps: Vec<DialogueStep>) -> Self {
        Self { steps }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Number of steps that wait for a reply.
    pub fn input_steps(&self) -> usize {
        self.steps.iter().filter(|s| s.expected.awaits_reply()).count()
    }

    fn input_step(&self, n: usize) -> Option<&DialogueStep> {
        self.steps.iter().filter(|s| s.expected.awaits_reply()).nth(n)
    }

    /// Agent text leading up to the `n`-th input step: any informational
    /// steps in front of it followed by the step's own prompt.
    fn prompt_for(&self, n: usize, replies: &[Reply]) -> String {
        let mut seen = 0;
        let mut parts = Vec::new();
        for step in &self.steps {
            if seen == n {
                parts.push(render(&step.utterance, replies));
            }
            if step.expected.awaits_reply() {
                if seen == n {
                    break;
                }
                seen += 1;
            }
        }
        parts.join(" ")
    }

    /// Informational text that follows the last input step.
    fn closing(&self, replies: &[Reply]) -> Option<String> {
        let last_input = self.steps.iter().rposition(|s| s.expected.awaits_reply());
        let tail = &self.steps[last_input.map_or(0, |i| i + 1)..];
        let text: Vec<_> = tail.iter().map(|s| render(&s.utterance, replies)).collect();
        (!text.is_empty()).then(|| text.join(" "))
    }
}

fn reply_text(r: &Reply) -> String {
    match r {
        Reply::Text(t) | Reply::Topic(t) => t.clone(),
        Reply::Integer(n) => n.to_string(),
        Reply::Range(a, b) => format!("{a}-{b}"),
        Reply::YesNo(y) => if *y { "yes" } else { "no" }.to_string(),
    }
}

fn render(template: &str, replies: &[Reply]) -> String {
    replies.iter().enumerate().fold(template.to_string(), |acc, (i, r)| acc.replace(&format!("{{{i}}}"), &reply_text(r)))
}

/// What a completed dialogue asks the session to do.
#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    Query(ContextQuery),
    ReportGoal(u8),
    ReportFeeling(Feeling),
    EndSession,
}

/// An agent-initiated suggestion, presented as a yes/no question.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterruptOffer {
    pub label: String,
    pub prompt: String,
    pub line: Option<usize>,
    pub tags: OntologyTags,
}

/// A pluggable communication type.
pub trait Communication: Send + Sync {
    fn descriptor(&self) -> &CommunicationDescriptor;

    fn script(&self, session: &SessionState) -> DialogueScript;

    /// Confidence in `[0, 1]` that the designer may start this communication.
    fn confidence_to_activate(&self, session: &SessionState) -> f64;

    /// Confidence in `[0, 1]` that the agent should take the initiative.
    fn confidence_to_interrupt(&self, _session: &SessionState) -> f64 {
        0.0
    }

    fn interrupt_offer(&self, _session: &SessionState) -> Option<InterruptOffer> {
        None
    }

    /// Effects of a completed human-initiated dialogue.
    fn effects(&self, replies: &[Reply], session: &SessionState) -> Vec<Effect>;

    /// Effects of an answered interrupt.
    fn interrupt_effects(&self, _accepted: bool, _dialogue: &DialogueState) -> Vec<Effect> {
        Vec::new()
    }

    fn id(&self) -> &str {
        &self.descriptor().comm_id
    }
}

/// Result of starting a human-initiated dialogue.
#[derive(Debug, Clone, PartialEq)]
pub struct Activation {
    pub dialogue: DialogueState,
    /// First prompt, or `None` when the script has no input steps.
    pub utterance: Option<String>,
    /// Present when the dialogue completes on activation.
    pub effects: Option<Vec<Effect>>,
    pub closing: Option<String>,
}

/// Check preconditions and plan the start of a dialogue.
pub fn activate(comm: &dyn Communication, session: &SessionState) -> Result<Activation, CommError> {
    if session.active_dialogue.is_some() {
        return Err(CommError::Busy);
    }
    if comm.descriptor().counts_against_budget && session.budget_exhausted() {
        return Err(CommError::BudgetExhausted);
    }
    if comm.confidence_to_activate(session) <= 0.0 {
        return Err(CommError::Unavailable(comm.id().to_string()));
    }
    let dialogue =
        DialogueState { comm_id: comm.id().to_string(), initiator: Initiator::Human, step: 0, replies: Vec::new(), subject_line: None };
    let script = comm.script(session);
    if script.input_steps() == 0 {
        return Ok(Activation { effects: Some(comm.effects(&[], session)), closing: script.closing(&[]), dialogue, utterance: None });
    }
    Ok(Activation { utterance: Some(script.prompt_for(0, &[])), dialogue, effects: None, closing: None })
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepResult {
    Continue { parsed: Reply, utterance: String },
    Reprompt { utterance: String },
    Completed { parsed: Reply, effects: Vec<Effect>, closing: Option<String> },
    Aborted,
}

pub fn is_cancel(reply: &str) -> bool {
    reply.trim().eq_ignore_ascii_case("cancel")
}

/// Advance the active human-initiated dialogue with one reply.
pub fn step_dialogue(comm: &dyn Communication, session: &SessionState, reply: &str) -> Result<StepResult, CommError> {
    let dialogue = session.active_dialogue.as_ref().ok_or(CommError::NoActiveDialogue)?;
    if is_cancel(reply) {
        return Ok(StepResult::Aborted);
    }
    let script = comm.script(session);
    let step = script.input_step(dialogue.step).ok_or(CommError::NoActiveDialogue)?;
    let parsed = match step.expected.parse(reply) {
        Ok(p) => p,
        Err(hint) => {
            let again = render(&step.utterance, &dialogue.replies);
            return Ok(StepResult::Reprompt { utterance: format!("{hint} {again}") });
        }
    };
    let mut replies = dialogue.replies.clone();
    replies.push(parsed.clone());
    if dialogue.step + 1 < script.input_steps() {
        return Ok(StepResult::Continue { utterance: script.prompt_for(dialogue.step + 1, &replies), parsed });
    }
    Ok(StepResult::Completed { effects: comm.effects(&replies, session), closing: script.closing(&replies), parsed })
}

/// Confidence that the agent should suggest freezing the line just edited:
/// 1.0 when the latest budgeted human action edited a still-unfrozen line and
/// no suggestion has been made for that edit, otherwise 0.0.
pub fn freeze_suggestion_confidence(session: &SessionState) -> f64 {
    if session.condition != Condition::Local || session.active_dialogue.is_some() {
        return 0.0;
    }
    match session.pending_edit.and_then(|i| session.story().line(i)) {
        Some(line) if !line.frozen => 1.0,
        _ => 0.0,
    }
}

fn descriptor(id: &str, label: &str, tags: OntologyTags, budgeted: bool) -> CommunicationDescriptor {
    CommunicationDescriptor { comm_id: id.to_string(), label: label.to_string(), tags, counts_against_budget: budgeted }
}

fn max_line(session: &SessionState) -> usize {
    session.story().num_lines().saturating_sub(1)
}

/// Add a topic over a range of lines, then regenerate.
pub struct UserSketchComm {
    descriptor: CommunicationDescriptor,
}

impl Default for UserSketchComm {
    fn default() -> Self {
        Self {
            descriptor: descriptor(
                USER_SKETCH,
                "Add a topic to the story sketch",
                OntologyTags::new(Initiator::Human, Mode::Elaboration, Scope::Global),
                true,
            ),
        }
    }
}

impl Communication for UserSketchComm {
    fn descriptor(&self) -> &CommunicationDescriptor {
        &self.descriptor
    }

    fn script(&self, session: &SessionState) -> DialogueScript {
        let max = max_line(session);
        DialogueScript::new(vec![
            DialogueStep::new("What topic should part of the story be about?", ExpectedReply::TopicString),
            DialogueStep::new(
                format!("Which lines should be about \"{{0}}\"? Reply with a range such as 5-9 (lines 0-{max})."),
                ExpectedReply::IntegerRange { max },
            ),
            DialogueStep::new("Got it, regenerating the story with the new sketch.", ExpectedReply::None),
        ])
    }

    fn confidence_to_activate(&self, _session: &SessionState) -> f64 {
        1.0
    }

    fn effects(&self, replies: &[Reply], _session: &SessionState) -> Vec<Effect> {
        match replies {
            [Reply::Topic(topic), Reply::Range(start, end)] => vec![
                Effect::Query(ContextQuery::AddSketchPoint { topic: topic.clone(), start: *start, end: *end }),
                Effect::Query(ContextQuery::Regenerate),
            ],
            _ => Vec::new(),
        }
    }
}

/// Manually rewrite one line.
pub struct UserWorkComm {
    descriptor: CommunicationDescriptor,
}

impl Default for UserWorkComm {
    fn default() -> Self {
        Self {
            descriptor: descriptor(
                USER_WORK,
                "Edit a line yourself",
                OntologyTags::new(Initiator::Human, Mode::Elaboration, Scope::Local),
                true,
            ),
        }
    }
}

impl Communication for UserWorkComm {
    fn descriptor(&self) -> &CommunicationDescriptor {
        &self.descriptor
    }

    fn script(&self, session: &SessionState) -> DialogueScript {
        let max = max_line(session);
        DialogueScript::new(vec![
            DialogueStep::new(format!("Which line do you want to edit? (0-{max})"), ExpectedReply::Integer { min: 0, max: max as i64 }),
            DialogueStep::new("Type the new text for line {0}.", ExpectedReply::FreeText),
        ])
    }

    fn confidence_to_activate(&self, _session: &SessionState) -> f64 {
        1.0
    }

    fn effects(&self, replies: &[Reply], _session: &SessionState) -> Vec<Effect> {
        match replies {
            [Reply::Integer(index), Reply::Text(text)] => {
                vec![Effect::Query(ContextQuery::EditLine { index: *index as usize, text: text.clone() })]
            }
            _ => Vec::new(),
        }
    }
}

/// Toggle a line's frozen flag. The agent also offers to freeze a line right
/// after the designer edits it.
pub struct GenerateWithFreezeComm {
    descriptor: CommunicationDescriptor,
}

impl Default for GenerateWithFreezeComm {
    fn default() -> Self {
        Self {
            descriptor: descriptor(
                GENERATE_WITH_FREEZE,
                "Freeze or unfreeze a line",
                OntologyTags::new(Initiator::Human, Mode::Elaboration, Scope::Local),
                true,
            ),
        }
    }
}

impl GenerateWithFreezeComm {
    pub const INTERRUPT_TAGS: OntologyTags = OntologyTags::new(Initiator::Agent, Mode::Elaboration, Scope::Local);
}

impl Communication for GenerateWithFreezeComm {
    fn descriptor(&self) -> &CommunicationDescriptor {
        &self.descriptor
    }

    fn script(&self, session: &SessionState) -> DialogueScript {
        let max = max_line(session);
        DialogueScript::new(vec![DialogueStep::new(
            format!("Which line should I freeze or unfreeze? (0-{max}) Frozen lines are kept when the story is regenerated."),
            ExpectedReply::Integer { min: 0, max: max as i64 },
        )])
    }

    fn confidence_to_activate(&self, _session: &SessionState) -> f64 {
        1.0
    }

    fn confidence_to_interrupt(&self, session: &SessionState) -> f64 {
        freeze_suggestion_confidence(session)
    }

    fn interrupt_offer(&self, session: &SessionState) -> Option<InterruptOffer> {
        let line = session.pending_edit?;
        Some(InterruptOffer {
            label: "Freeze the line you just edited".into(),
            prompt: format!(
                "You just edited line {line}. Should I freeze it so it won't be overwritten when the story is regenerated? (yes/no)"
            ),
            line: Some(line),
            tags: Self::INTERRUPT_TAGS,
        })
    }

    fn effects(&self, replies: &[Reply], session: &SessionState) -> Vec<Effect> {
        let [Reply::Integer(index)] = replies else {
            return Vec::new();
        };
        let index = *index as usize;
        let frozen = session.story().line(index).is_some_and(|l| l.frozen);
        vec![Effect::Query(if frozen { ContextQuery::UnfreezeLine { index } } else { ContextQuery::FreezeLine { index } })]
    }

    fn interrupt_effects(&self, accepted: bool, dialogue: &DialogueState) -> Vec<Effect> {
        match (accepted, dialogue.subject_line) {
            (true, Some(index)) => vec![Effect::Query(ContextQuery::FreezeLine { index })],
            _ => Vec::new(),
        }
    }
}

/// Regenerate every unfrozen line.
pub struct RegenerateComm {
    descriptor: CommunicationDescriptor,
}

impl Default for RegenerateComm {
    fn default() -> Self {
        Self {
            descriptor: descriptor(
                REGENERATE,
                "Regenerate the story",
                OntologyTags::new(Initiator::Human, Mode::Elaboration, Scope::Global),
                true,
            ),
        }
    }
}

impl Communication for RegenerateComm {
    fn descriptor(&self) -> &CommunicationDescriptor {
        &self.descriptor
    }

    fn script(&self, _session: &SessionState) -> DialogueScript {
        DialogueScript::new(vec![DialogueStep::new("Regenerating the story.", ExpectedReply::None)])
    }

    fn confidence_to_activate(&self, _session: &SessionState) -> f64 {
        1.0
    }

    fn effects(&self, _replies: &[Reply], _session: &SessionState) -> Vec<Effect> {
        vec![Effect::Query(ContextQuery::Regenerate)]
    }
}

/// Self-report that a sub-goal is complete. Free of budget.
pub struct GoalCompleteComm {
    descriptor: CommunicationDescriptor,
}

impl Default for GoalCompleteComm {
    fn default() -> Self {
        Self {
            descriptor: descriptor(
                GOAL_COMPLETE,
                "Report a completed sub-goal",
                OntologyTags::new(Initiator::Human, Mode::Reflection, Scope::Global),
                false,
            ),
        }
    }
}

impl Communication for GoalCompleteComm {
    fn descriptor(&self) -> &CommunicationDescriptor {
        &self.descriptor
    }

    fn script(&self, _session: &SessionState) -> DialogueScript {
        DialogueScript::new(vec![
            DialogueStep::new(
                format!("Which sub-goal have you completed? (1-{NUM_GOALS})"),
                ExpectedReply::Integer { min: 1, max: NUM_GOALS },
            ),
            DialogueStep::new("Thanks, noted that sub-goal {0} is done.", ExpectedReply::None),
        ])
    }

    fn confidence_to_activate(&self, _session: &SessionState) -> f64 {
        1.0
    }

    fn effects(&self, replies: &[Reply], _session: &SessionState) -> Vec<Effect> {
        match replies {
            [Reply::Integer(g)] => vec![Effect::ReportGoal(*g as u8)],
            _ => Vec::new(),
        }
    }
}

/// Voluntary report of how the designer feels. Free of budget.
pub struct FeelingComm {
    descriptor: CommunicationDescriptor,
}

impl Default for FeelingComm {
    fn default() -> Self {
        Self {
            descriptor: descriptor(
                FEELING,
                "Tell me how you feel",
                OntologyTags::new(Initiator::Human, Mode::Reflection, Scope::Global),
                false,
            ),
        }
    }
}

impl Communication for FeelingComm {
    fn descriptor(&self) -> &CommunicationDescriptor {
        &self.descriptor
    }

    fn script(&self, _session: &SessionState) -> DialogueScript {
        DialogueScript::new(vec![
            DialogueStep::new("How are you feeling right now? (for example: frustrated, satisfied, neutral)", ExpectedReply::FreeText),
            DialogueStep::new("Thanks for letting me know.", ExpectedReply::None),
        ])
    }

    fn confidence_to_activate(&self, _session: &SessionState) -> f64 {
        1.0
    }

    fn effects(&self, replies: &[Reply], _session: &SessionState) -> Vec<Effect> {
        match replies {
            [Reply::Text(t)] => vec![Effect::ReportFeeling(Feeling::parse(t))],
            _ => Vec::new(),
        }
    }
}

/// End the session early. Free of budget.
pub struct EndSessionComm {
    descriptor: CommunicationDescriptor,
}

impl Default for EndSessionComm {
    fn default() -> Self {
        Self {
            descriptor: descriptor(
                END_SESSION,
                "End the session",
                OntologyTags::new(Initiator::Human, Mode::Reflection, Scope::Global),
                false,
            ),
        }
    }
}

impl Communication for EndSessionComm {
    fn descriptor(&self) -> &CommunicationDescriptor {
        &self.descriptor
    }

    fn script(&self, _session: &SessionState) -> DialogueScript {
        DialogueScript::empty()
    }

    fn confidence_to_activate(&self, _session: &SessionState) -> f64 {
        1.0
    }

    fn effects(&self, _replies: &[Reply], _session: &SessionState) -> Vec<Effect> {
        vec![Effect::EndSession]
    }
}

/// Ordered set of communications available in a session. Order is the
/// registration order and breaks ties between equally confident interrupts.
#[derive(Clone, Default)]
pub struct Registry {
    comms: Vec<Arc<dyn Communication>>,
}

impl std::fmt::Debug for Registry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.comms.iter().map(|c| c.id())).finish()
    }
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, comm: Arc<dyn Communication>) -> Result<(), CommError> {
        if self.get(comm.id()).is_some() {
            return Err(CommError::DuplicateId(comm.id().to_string()));
        }
        self.comms.push(comm);
        Ok(())
    }

    pub fn get(&self, comm_id: &str) -> Option<&Arc<dyn Communication>> {
        self.comms.iter().find(|c| c.id() == comm_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<dyn Communication>> {
        self.comms.iter()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.comms.iter().map(|c| c.id()).collect()
    }

    pub fn len(&self) -> usize {
        self.comms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comms.is_empty()
    }
}

/// Communications for one experimental condition: the condition-specific
/// ones first, then those shared by both conditions.
pub fn builtin_registry(condition: Condition) -> Registry {
    let mut comms: Vec<Arc<dyn Communication>> = match condition {
        Condition::Global => vec![Arc::new(UserSketchComm::default())],
        Condition::Local => vec![Arc::new(UserWorkComm::default()), Arc::new(GenerateWithFreezeComm::default())],
    };
    comms.push(Arc::new(RegenerateComm::default()));
    comms.push(Arc::new(GoalCompleteComm::default()));
    comms.push(Arc::new(FeelingComm::default()));
    comms.push(Arc::new(EndSessionComm::default()));
    Registry { comms }
}
