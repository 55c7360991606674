//! One live session: binds the experience manager and the communications to
//! the wire protocol.
//!
//! Every state change is written to the session's event sink and only then
//! applied to the in-memory state, using the same [`apply_event`] that replay
//! uses. Server messages are produced after the events they describe are
//! durable.

use std::sync::Arc;

use crate::comms::{self, CommError, Communication, Effect, Registry, StepResult};
use crate::context::{execute_query, ContextQuery, Generator};
use crate::event::{apply_event, initial_state, Actor, Assignment, EventBody, SessionCreated, SessionEvent, StepOutcome};
use crate::log::{EventSink, LogError};
use crate::manager::{activate_preferred, interrupt_activate, ManagerConfig, ManagerDecision};
use crate::model::{Condition, ExitSurvey, Reply, SessionState};
use crate::protocol::{codes, ClientMessage, MenuItem, ServerBody, ServerMessage};

/// Everything needed to open a new session.
#[derive(Debug, Clone)]
pub struct SessionParams {
    pub session_id: String,
    pub participant_id: String,
    pub condition: Condition,
    pub assignment: Assignment,
    pub seed: u64,
    pub rng_seed: u64,
    pub num_lines: usize,
    pub sigma: f64,
    pub manager: ManagerConfig,
}

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error("storage failure: {0}")]
    Storage(#[from] LogError),
}

type Step<T = ()> = Result<T, Failure>;

pub struct Session {
    state: SessionState,
    registry: Registry,
    generator: Arc<dyn Generator>,
    manager: ManagerConfig,
    sink: Box<dyn EventSink>,
    next_seq: u64,
    poisoned: bool,
    out: Vec<ServerBody>,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("session_id", &self.state.session_id)
            .field("next_seq", &self.next_seq)
            .field("poisoned", &self.poisoned)
            .finish()
    }
}

impl Session {
    /// Open a session and log its creation. Returns the opening messages.
    pub fn create(
        params: SessionParams,
        registry: Registry,
        generator: Arc<dyn Generator>,
        sink: Box<dyn EventSink>,
    ) -> Result<(Self, Vec<ServerMessage>), LogError> {
        let created = SessionEvent {
            seq: 0,
            ts: crate::event::now_rfc3339(),
            session_id: params.session_id.clone(),
            actor: Actor::System,
            body: EventBody::SessionCreated(SessionCreated {
                participant_id: params.participant_id.clone(),
                condition: params.condition,
                assignment: params.assignment,
                seed: params.seed,
                rng_seed: params.rng_seed,
                num_lines: params.num_lines,
                sigma: params.sigma,
                interaction_budget: params.manager.interaction_budget,
                generator: generator.name().to_string(),
            }),
        };
        let mut sink = sink;
        sink.append(&created)?;
        let state = initial_state(&created).expect("creation event builds a state");
        let mut session = Self { state, registry, generator, manager: params.manager, sink, next_seq: 1, poisoned: false, out: Vec::new() };
        session.out.push(ServerBody::SessionCreated { condition: session.state.condition, budget: session.state.interaction_budget });
        session.push_canvas();
        session.push_budget();
        session.say(match session.state.condition {
            Condition::Global => "Welcome! You can steer the story by giving me topics for parts of it. Pick an option below.",
            Condition::Local => "Welcome! You can edit any line yourself and freeze lines you want to keep. Pick an option below.",
        });
        let settled = session.settle();
        let msgs = session.finish(settled);
        Ok((session, msgs))
    }

    /// Resume a session from a replayed state, e.g. after a restart.
    pub fn restore(
        state: SessionState,
        next_seq: u64,
        registry: Registry,
        generator: Arc<dyn Generator>,
        manager: ManagerConfig,
        sink: Box<dyn EventSink>,
    ) -> Self {
        Self { state, registry, generator, manager, sink, next_seq, poisoned: false, out: Vec::new() }
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn id(&self) -> &str {
        &self.state.session_id
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    /// Process one client message and return the server's replies in order.
    pub fn handle(&mut self, msg: ClientMessage) -> Vec<ServerMessage> {
        if self.poisoned {
            self.error(codes::STORAGE, "this session's log can no longer be written");
            return self.finish(Ok(()));
        }
        let result = match msg {
            ClientMessage::SessionCreate { .. } => {
                self.error(codes::BAD_REQUEST, "session.create must be sent without a session id");
                Ok(())
            }
            ClientMessage::SurveySubmit { answers } => self.on_survey(answers),
            _ if self.state.ended => {
                self.error(codes::ENDED, "the session has ended; only the exit survey is accepted");
                Ok(())
            }
            ClientMessage::CommSelect { comm_id } => self.on_select(&comm_id).and_then(|_| self.settle()),
            ClientMessage::DialogueReply { text } => self.on_reply(&text).and_then(|_| self.settle()),
            ClientMessage::SessionEnd {} => self.on_end("user"),
        };
        self.finish(result)
    }

    fn finish(&mut self, result: Step) -> Vec<ServerMessage> {
        if let Err(e) = result {
            tracing::error!(session = %self.state.session_id, error = %e, "session stopped");
            self.poisoned = true;
            self.out.push(ServerBody::error(codes::STORAGE, e.to_string()));
        }
        let id = self.state.session_id.clone();
        self.out.drain(..).map(|body| ServerMessage::new(id.clone(), body)).collect()
    }

    fn record(&mut self, actor: Actor, body: EventBody) -> Step {
        let event =
            SessionEvent { seq: self.next_seq, ts: crate::event::now_rfc3339(), session_id: self.state.session_id.clone(), actor, body };
        self.sink.append(&event)?;
        self.next_seq += 1;
        // The engine only records events that are valid for the current state.
        if let Err(e) = apply_event(&mut self.state, &event) {
            panic!("session {} recorded an event it cannot apply: {e}", self.state.session_id);
        }
        Ok(())
    }

    fn say(&mut self, text: impl Into<String>) {
        self.out.push(ServerBody::ChatAgent { text: text.into() });
    }

    fn error(&mut self, code: &str, message: impl Into<String>) {
        self.out.push(ServerBody::error(code, message));
    }

    fn push_canvas(&mut self) {
        self.out.push(ServerBody::canvas(&self.state.context));
    }

    fn push_budget(&mut self) {
        self.out.push(ServerBody::BudgetUpdate { used: self.state.interactions_used, limit: self.state.interaction_budget });
    }

    fn comm(&self, comm_id: &str) -> Option<Arc<dyn Communication>> {
        self.registry.get(comm_id).cloned()
    }

    fn on_select(&mut self, comm_id: &str) -> Step {
        let activation = match interrupt_activate(&self.state, &self.registry, comm_id) {
            Ok(a) => a,
            Err(e) => {
                let code = match e {
                    CommError::Busy => codes::BUSY,
                    CommError::BudgetExhausted => codes::BUDGET_EXHAUSTED,
                    CommError::Unavailable(_) => codes::UNAVAILABLE,
                    _ => codes::UNKNOWN_COMM,
                };
                self.error(code, e.to_string());
                if code == codes::BUDGET_EXHAUSTED {
                    self.push_budget();
                }
                return Ok(());
            }
        };
        let comm = self.comm(comm_id).expect("activated communication is registered");
        let budgeted = comm.descriptor().counts_against_budget;
        self.record(
            Actor::Human,
            EventBody::CommActivated {
                comm_id: comm_id.to_string(),
                counts_against_budget: budgeted,
                interactions_used: self.state.interactions_used + u32::from(budgeted),
            },
        )?;
        if budgeted {
            self.push_budget();
        }
        if let Some(text) = activation.utterance {
            self.say(text);
        }
        if let Some(effects) = activation.effects {
            self.complete(comm_id, 0, None, None, effects, activation.closing)?;
        }
        Ok(())
    }

    fn on_reply(&mut self, text: &str) -> Step {
        let Some(dialogue) = self.state.active_dialogue.clone() else {
            self.say("There is nothing to answer right now. Please choose one of the options below.");
            return Ok(());
        };
        let comm = self.comm(&dialogue.comm_id).expect("active dialogue belongs to a registered communication");

        if dialogue.is_interrupt() {
            let answer = if comms::is_cancel(text) { Ok(Reply::YesNo(false)) } else { comms::ExpectedReply::YesNo.parse(text) };
            return match answer {
                Ok(Reply::YesNo(true)) => {
                    self.record(Actor::Human, EventBody::InterruptAccepted { comm_id: dialogue.comm_id.clone() })?;
                    let effects = comm.interrupt_effects(true, &dialogue);
                    if self.apply_effects(Actor::Agent, &effects)?.is_ok() {
                        if let Some(line) = dialogue.subject_line {
                            self.say(format!("Done, line {line} is frozen."));
                        }
                    }
                    Ok(())
                }
                Ok(_) => {
                    self.record(Actor::Human, EventBody::InterruptDeclined { comm_id: dialogue.comm_id.clone() })?;
                    self.say("OK, I'll leave it unfrozen.");
                    Ok(())
                }
                Err(hint) => {
                    self.record(
                        Actor::Human,
                        EventBody::DialogueStep {
                            comm_id: dialogue.comm_id.clone(),
                            step: dialogue.step,
                            reply: Some(text.to_string()),
                            parsed: None,
                            outcome: StepOutcome::Reprompt,
                            error: None,
                        },
                    )?;
                    self.say(hint);
                    Ok(())
                }
            };
        }

        let result = comms::step_dialogue(comm.as_ref(), &self.state, text).expect("an active dialogue can always be stepped");
        let step_event = |parsed: Option<Reply>, outcome| EventBody::DialogueStep {
            comm_id: dialogue.comm_id.clone(),
            step: dialogue.step,
            reply: Some(text.to_string()),
            parsed,
            outcome,
            error: None,
        };
        match result {
            StepResult::Aborted => {
                self.record(Actor::Human, step_event(None, StepOutcome::Aborted))?;
                self.say("Cancelled. Nothing was changed.");
            }
            StepResult::Reprompt { utterance } => {
                self.record(Actor::Human, step_event(None, StepOutcome::Reprompt))?;
                self.say(utterance);
            }
            StepResult::Continue { parsed, utterance } => {
                self.record(Actor::Human, step_event(Some(parsed), StepOutcome::Continue))?;
                self.say(utterance);
            }
            StepResult::Completed { parsed, effects, closing } => {
                self.complete(&dialogue.comm_id, dialogue.step, Some(text), Some(parsed), effects, closing)?;
            }
        }
        Ok(())
    }

    /// Close a dialogue: run its effects atomically, or abort it if any
    /// generator query fails.
    fn complete(
        &mut self,
        comm_id: &str,
        step: usize,
        reply: Option<&str>,
        parsed: Option<Reply>,
        effects: Vec<Effect>,
        closing: Option<String>,
    ) -> Step {
        let planned = self.plan_queries(&effects);
        let error = planned.as_ref().err().cloned();
        self.record(
            Actor::Human,
            EventBody::DialogueStep {
                comm_id: comm_id.to_string(),
                step,
                reply: reply.map(str::to_string),
                parsed,
                outcome: if error.is_some() { StepOutcome::Aborted } else { StepOutcome::Completed },
                error: error.clone(),
            },
        )?;
        match planned {
            Err(message) => {
                self.error(codes::GENERATOR, message.clone());
                self.say(format!("Sorry, that didn't work ({message}). Nothing was changed."));
            }
            Ok(plan) => {
                if let Some(text) = closing {
                    self.say(text);
                }
                self.commit(Actor::Human, plan, &effects)?;
            }
        }
        Ok(())
    }

    /// Run the effects' queries against a scratch copy of the context.
    fn plan_queries(&self, effects: &[Effect]) -> Result<Plan, String> {
        let mut scratch = self.state.context.clone();
        let mut executed = Vec::new();
        for effect in effects {
            if let Effect::Query(q) = effect {
                let ack = execute_query(self.generator.as_ref(), &mut scratch, q, self.state.rng_seed).map_err(|e| e.to_string())?;
                executed.push((q.clone(), ack));
            }
        }
        Ok(Plan { executed, context: scratch })
    }

    fn commit(&mut self, actor: Actor, plan: Plan, effects: &[Effect]) -> Step {
        let changed = plan.context != self.state.context;
        for (query, ack) in plan.executed {
            self.record(actor, EventBody::QueryExecuted { query, ack })?;
        }
        if changed {
            self.record(Actor::System, EventBody::StoryUpdated { context: plan.context })?;
            self.push_canvas();
        }
        for effect in effects {
            match effect {
                Effect::Query(_) => {}
                Effect::ReportGoal(goal_index) => {
                    let interactions_at_report = self.state.interactions_used;
                    self.record(Actor::Human, EventBody::GoalReported { goal_index: *goal_index, interactions_at_report })?;
                }
                Effect::ReportFeeling(feeling) => {
                    self.record(Actor::Human, EventBody::FeelingReported { feeling: feeling.clone() })?;
                }
                Effect::EndSession => self.end("user")?,
            }
        }
        Ok(())
    }

    /// Effects outside a human dialogue (interrupt answers).
    fn apply_effects(&mut self, actor: Actor, effects: &[Effect]) -> Step<Result<(), String>> {
        match self.plan_queries(effects) {
            Ok(plan) => {
                self.commit(actor, plan, effects)?;
                Ok(Ok(()))
            }
            Err(message) => {
                self.error(codes::GENERATOR, message.clone());
                Ok(Err(message))
            }
        }
    }

    fn end(&mut self, reason: &str) -> Step {
        self.record(Actor::Human, EventBody::SessionEnded { reason: reason.to_string() })?;
        self.out.push(ServerBody::SessionEnded {});
        self.say("The session has ended. Please fill in the exit survey.");
        Ok(())
    }

    fn on_end(&mut self, reason: &str) -> Step {
        if let Some(d) = self.state.active_dialogue.clone() {
            let body = if d.is_interrupt() {
                EventBody::InterruptDeclined { comm_id: d.comm_id }
            } else {
                EventBody::DialogueStep {
                    comm_id: d.comm_id,
                    step: d.step,
                    reply: None,
                    parsed: None,
                    outcome: StepOutcome::Aborted,
                    error: None,
                }
            };
            self.record(Actor::Human, body)?;
        }
        self.end(reason)
    }

    fn on_survey(&mut self, answers: std::collections::BTreeMap<crate::model::SurveyKey, crate::model::Likert>) -> Step {
        if !self.state.ended {
            self.error(codes::NOT_ENDED, "the exit survey opens once the session has ended");
            return Ok(());
        }
        if self.state.exit_survey.is_some() {
            self.error(codes::SURVEY_EXISTS, "the exit survey was already submitted");
            return Ok(());
        }
        if let Err(missing) = ExitSurvey::new(answers.clone()) {
            self.error(codes::INVALID_SURVEY, format!("missing answers for {missing:?}"));
            return Ok(());
        }
        self.record(Actor::Human, EventBody::SurveySubmitted { answers })?;
        self.say("Thank you for taking part!");
        Ok(())
    }

    /// Let the manager act until it hands the turn back to the designer.
    fn settle(&mut self) -> Step {
        loop {
            match activate_preferred(&self.state, &self.registry, &self.manager) {
                ManagerDecision::AnnounceSessionEnd | ManagerDecision::RouteToDialogue => return Ok(()),
                ManagerDecision::AnnounceBudgetExhausted => {
                    let (used, limit) = (self.state.interactions_used, self.state.interaction_budget);
                    self.record(Actor::System, EventBody::BudgetExhausted { used, limit })?;
                    self.say(format!(
                        "You have used all {limit} interactions. You can still report sub-goals, tell me how you feel, or end the session."
                    ));
                }
                ManagerDecision::StartInterrupt(comm_id) => {
                    let comm = self.comm(&comm_id).expect("interrupting communication is registered");
                    let Some(offer) = comm.interrupt_offer(&self.state) else {
                        // Confidence without an offer: fall back to the menu.
                        let items = crate::manager::menu(&self.state, &self.registry);
                        self.out.push(ServerBody::CommMenu { items: items.iter().map(MenuItem::from).collect() });
                        return Ok(());
                    };
                    self.record(
                        Actor::Agent,
                        EventBody::InterruptOffered { comm_id: comm_id.clone(), line: offer.line, prompt: offer.prompt.clone() },
                    )?;
                    self.out.push(ServerBody::InterruptOffer { comm_id, label: offer.label, prompt: offer.prompt.clone() });
                    self.say(offer.prompt);
                    return Ok(());
                }
                ManagerDecision::OfferMenu(items) => {
                    self.out.push(ServerBody::CommMenu { items: items.iter().map(MenuItem::from).collect() });
                    return Ok(());
                }
            }
        }
    }
}

struct Plan {
    executed: Vec<(ContextQuery, crate::context::QueryAck)>,
    context: crate::model::ContextState,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comms::{builtin_registry, GOAL_COMPLETE, REGENERATE, USER_SKETCH, USER_WORK};
    use crate::context::{ContextError, MockGenerator};
    use crate::event::{replay, EventKind};
    use crate::log::MemoryLog;
    use crate::model::Line;
    use std::sync::Mutex;

    /// Sink that shares its buffer with the test.
    #[derive(Clone, Default)]
    struct Shared(Arc<Mutex<MemoryLog>>);

    impl EventSink for Shared {
        fn append(&mut self, e: &SessionEvent) -> Result<(), LogError> {
            self.0.lock().unwrap().append(e)
        }
    }

    impl Shared {
        fn events(&self) -> Vec<SessionEvent> {
            self.0.lock().unwrap().events.clone()
        }
        fn count(&self, kind: EventKind) -> usize {
            self.events().iter().filter(|e| e.kind() == kind).count()
        }
    }

    fn open_with(condition: Condition, generator: Arc<dyn Generator>) -> (Session, Shared, Vec<ServerMessage>) {
        let sink = Shared::default();
        let params = SessionParams {
            session_id: "s1".into(),
            participant_id: "p1".into(),
            condition,
            assignment: Assignment::Forced,
            seed: 42,
            rng_seed: 7,
            num_lines: 10,
            sigma: 2.0,
            manager: ManagerConfig::default(),
        };
        let (s, msgs) = Session::create(params, builtin_registry(condition), generator, Box::new(sink.clone())).unwrap();
        (s, sink, msgs)
    }

    fn open(condition: Condition) -> (Session, Shared) {
        let (s, sink, _) = open_with(condition, Arc::new(MockGenerator::new(0)));
        (s, sink)
    }

    fn select(s: &mut Session, id: &str) -> Vec<ServerMessage> {
        s.handle(ClientMessage::CommSelect { comm_id: id.into() })
    }

    fn reply(s: &mut Session, text: &str) -> Vec<ServerMessage> {
        s.handle(ClientMessage::DialogueReply { text: text.into() })
    }

    fn types(msgs: &[ServerMessage]) -> Vec<&'static str> {
        msgs.iter().map(|m| m.type_name()).collect()
    }

    fn error_code(msgs: &[ServerMessage]) -> Option<String> {
        msgs.iter().find_map(|m| match &m.body {
            ServerBody::Error { code, .. } => Some(code.clone()),
            _ => None,
        })
    }

    #[test]
    fn creation_messages() {
        let (_, sink, msgs) = open_with(Condition::Global, Arc::new(MockGenerator::new(0)));
        assert_eq!(types(&msgs), ["session.created", "canvas.story", "budget.update", "chat.agent", "comm.menu"]);
        assert!(msgs.iter().all(|m| m.session_id == "s1"));
        assert_eq!(sink.count(EventKind::SessionCreated), 1);
    }

    #[test]
    fn goal_report_is_free() {
        let (mut s, sink) = open(Condition::Global);
        select(&mut s, REGENERATE);
        let msgs = select(&mut s, GOAL_COMPLETE);
        assert!(!types(&msgs).contains(&"budget.update"));
        let msgs = reply(&mut s, "1");
        assert!(!types(&msgs).contains(&"budget.update"));
        assert_eq!(s.state().interactions_used, 1);
        assert_eq!(s.state().goal_reports.len(), 1);
        assert_eq!(s.state().goal_reports[0].interactions_at_report, 1);
        assert_eq!(sink.count(EventKind::GoalReported), 1);
    }

    #[test]
    fn sketch_flow_regenerates_once() {
        let (mut s, _) = open(Condition::Global);
        select(&mut s, USER_SKETCH);
        reply(&mut s, "business");
        let msgs = reply(&mut s, "0-4");
        assert!(types(&msgs).contains(&"canvas.story"));
        assert_eq!(s.state().interactions_used, 1);
        assert_eq!(s.state().story().generation_counter, 1);
        assert!(s.state().story().lines.iter().all(|l| l.dominant_topic.as_deref() == Some("business")));
    }

    #[test]
    fn idle_reply_reoffers_menu() {
        let (mut s, _) = open(Condition::Global);
        let msgs = reply(&mut s, "hello?");
        assert_eq!(types(&msgs), ["chat.agent", "comm.menu"]);
    }

    #[test]
    fn end_then_survey() {
        let (mut s, sink) = open(Condition::Local);
        let msgs = s.handle(ClientMessage::SessionEnd {});
        assert!(types(&msgs).contains(&"session.ended"));
        assert_eq!(error_code(&select(&mut s, REGENERATE)).as_deref(), Some(codes::ENDED));

        let mut answers: std::collections::BTreeMap<_, _> =
            crate::model::SurveyKey::ALL.iter().map(|k| (*k, crate::model::Likert::Agree)).collect();
        answers.remove(&crate::model::SurveyKey::Goal3);
        let msgs = s.handle(ClientMessage::SurveySubmit { answers: answers.clone() });
        assert_eq!(error_code(&msgs).as_deref(), Some(codes::INVALID_SURVEY));
        answers.insert(crate::model::SurveyKey::Goal3, crate::model::Likert::Disagree);
        let msgs = s.handle(ClientMessage::SurveySubmit { answers: answers.clone() });
        assert_eq!(error_code(&msgs), None);
        let msgs = s.handle(ClientMessage::SurveySubmit { answers });
        assert_eq!(error_code(&msgs).as_deref(), Some(codes::SURVEY_EXISTS));
        assert_eq!(replay(&sink.events()).unwrap(), *s.state());
    }

    #[test]
    fn survey_before_end_is_refused() {
        let (mut s, _) = open(Condition::Local);
        let msgs = s.handle(ClientMessage::SurveySubmit { answers: Default::default() });
        assert_eq!(error_code(&msgs).as_deref(), Some(codes::NOT_ENDED));
    }

    #[test]
    fn busy_and_unknown() {
        let (mut s, _) = open(Condition::Local);
        select(&mut s, USER_WORK);
        assert_eq!(error_code(&select(&mut s, REGENERATE)).as_deref(), Some(codes::BUSY));
        reply(&mut s, "cancel");
        assert_eq!(error_code(&select(&mut s, USER_SKETCH)).as_deref(), Some(codes::UNKNOWN_COMM));
        assert_eq!(error_code(&select(&mut s, "nonsense")).as_deref(), Some(codes::UNKNOWN_COMM));
    }

    #[test]
    fn edit_triggers_one_interrupt() {
        let (mut s, sink) = open(Condition::Local);
        select(&mut s, USER_WORK);
        reply(&mut s, "3");
        let msgs = reply(&mut s, "The match began.");
        assert_eq!(types(&msgs), ["canvas.story", "interrupt.offer", "chat.agent"]);
        let msgs = reply(&mut s, "no");
        assert!(!types(&msgs).contains(&"interrupt.offer"));
        assert!(types(&msgs).contains(&"comm.menu"));
        assert_eq!(sink.count(EventKind::InterruptOffered), 1);
        assert_eq!(sink.count(EventKind::InterruptDeclined), 1);
        assert!(!s.state().story().lines[3].frozen);
    }

    #[test]
    fn accepted_interrupt_freezes_for_free() {
        let (mut s, sink) = open(Condition::Local);
        select(&mut s, USER_WORK);
        reply(&mut s, "3");
        reply(&mut s, "The match began.");
        let msgs = reply(&mut s, "maybe");
        assert!(types(&msgs).contains(&"chat.agent"));
        reply(&mut s, "yes");
        assert!(s.state().story().lines[3].frozen);
        assert_eq!(s.state().interactions_used, 1);
        select(&mut s, REGENERATE);
        assert_eq!(s.state().story().lines[3].text, "The match began.");
        let events = sink.events();
        let freeze =
            events.iter().find(|e| matches!(e.body, EventBody::QueryExecuted { query: ContextQuery::FreezeLine { .. }, .. })).unwrap();
        assert_eq!(freeze.actor, Actor::Agent);
        assert_eq!(replay(&events).unwrap(), *s.state());
    }

    #[test]
    fn budget_exhaustion() {
        let (mut s, sink) = open(Condition::Global);
        for _ in 0..15 {
            assert_eq!(error_code(&select(&mut s, REGENERATE)), None);
        }
        let msgs = select(&mut s, REGENERATE);
        assert_eq!(error_code(&msgs).as_deref(), Some(codes::BUDGET_EXHAUSTED));
        let menu: Vec<_> = msgs
            .iter()
            .find_map(|m| match &m.body {
                ServerBody::CommMenu { items } => Some(items.iter().map(|i| i.comm_id.clone()).collect::<Vec<_>>()),
                _ => None,
            })
            .unwrap();
        assert_eq!(menu, [GOAL_COMPLETE, "feeling", "end_session"]);
        assert_eq!(sink.count(EventKind::BudgetExhausted), 1);
        assert_eq!(s.state().interactions_used, 15);
        select(&mut s, GOAL_COMPLETE);
        reply(&mut s, "2");
        assert_eq!(s.state().goal_reports[0].interactions_at_report, 15);
    }

    struct Down;

    impl Generator for Down {
        fn generate(&self, _: &crate::model::ContextState, _: u64, _: u64) -> Result<Vec<Line>, ContextError> {
            Err(ContextError::GeneratorUnavailable("timeout".into()))
        }
        fn name(&self) -> &'static str {
            "down"
        }
    }

    #[test]
    fn generator_failure_aborts_without_changes() {
        let (mut s, sink, _) = open_with(Condition::Global, Arc::new(Down));
        select(&mut s, USER_SKETCH);
        reply(&mut s, "sports");
        let msgs = reply(&mut s, "5-9");
        assert_eq!(error_code(&msgs).as_deref(), Some(codes::GENERATOR));
        assert!(s.state().sketch().is_empty());
        assert!(s.state().active_dialogue.is_none());
        assert_eq!(replay(&sink.events()).unwrap(), *s.state());
    }

    struct Broken;

    impl EventSink for Broken {
        fn append(&mut self, e: &SessionEvent) -> Result<(), LogError> {
            if e.seq == 0 {
                Ok(())
            } else {
                Err(LogError::Io(std::io::Error::other("disk full")))
            }
        }
    }

    #[test]
    fn storage_failure_stops_the_session() {
        let params = SessionParams {
            session_id: "s".into(),
            participant_id: "p".into(),
            condition: Condition::Global,
            assignment: Assignment::Forced,
            seed: 0,
            rng_seed: 0,
            num_lines: 10,
            sigma: 2.0,
            manager: ManagerConfig::default(),
        };
        let (mut s, _) =
            Session::create(params, builtin_registry(Condition::Global), Arc::new(MockGenerator::new(0)), Box::new(Broken)).unwrap();
        let msgs = select(&mut s, REGENERATE);
        assert_eq!(error_code(&msgs).as_deref(), Some(codes::STORAGE));
        assert_eq!(s.state().interactions_used, 0);
        assert_eq!(error_code(&select(&mut s, GOAL_COMPLETE)).as_deref(), Some(codes::STORAGE));
    }
}
