//! Randomized checks over whole sessions and over the creative context.

use cocreate::context::{execute_query, ContextQuery, MockGenerator};
use cocreate::event::{replay, EventBody};
use cocreate::protocol::ServerBody;
use cocreate::service::ConditionAssignment;
use cocreate::{ClientMessage, Condition, ContextState, ServiceConfig, SessionHub};
use proptest::prelude::*;

#[derive(Debug, Clone)]
enum Op {
    Edit(usize, String),
    Freeze(usize),
    Unfreeze(usize),
    Regenerate,
    Sketch(String, usize, usize),
    Prompt(String),
}

fn arb_op() -> impl Strategy<Value = Op> {
    prop_oneof![
        2 => (0usize..12, "[a-z ]{0,12}").prop_map(|(i, t)| Op::Edit(i, t)),
        2 => (0usize..12).prop_map(Op::Freeze),
        1 => (0usize..12).prop_map(Op::Unfreeze),
        3 => Just(Op::Regenerate),
        1 => ("(business|sports|soccer)", 0usize..10, 0usize..10).prop_map(|(t, a, b)| Op::Sketch(t, a.min(b), a.max(b))),
        1 => "[a-z ]{1,10}".prop_map(Op::Prompt),
    ]
}

fn query(op: &Op) -> ContextQuery {
    match op {
        Op::Edit(index, text) => ContextQuery::EditLine { index: *index, text: text.clone() },
        Op::Freeze(index) => ContextQuery::FreezeLine { index: *index },
        Op::Unfreeze(index) => ContextQuery::UnfreezeLine { index: *index },
        Op::Regenerate => ContextQuery::Regenerate,
        Op::Sketch(topic, start, end) => ContextQuery::AddSketchPoint { topic: topic.clone(), start: *start, end: *end },
        Op::Prompt(text) => ContextQuery::SetPrompt { text: text.clone() },
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn frozen_lines_survive_regeneration(ops in prop::collection::vec(arb_op(), 1..40), seed: u64, salt: u64) {
        let gen = MockGenerator { salt };
        let mut ctx = ContextState::new(10, 2.0);
        for op in &ops {
            let frozen_before: Vec<(usize, String)> =
                ctx.story.lines.iter().filter(|l| l.frozen).map(|l| (l.index, l.text.clone())).collect();
            let before = ctx.clone();
            let result = execute_query(&gen, &mut ctx, &query(op), seed);
            if result.is_err() {
                prop_assert_eq!(&ctx, &before);
            }
            if matches!(op, Op::Regenerate) {
                for (i, text) in frozen_before {
                    prop_assert!(ctx.story.lines[i].frozen);
                    prop_assert_eq!(&ctx.story.lines[i].text, &text);
                }
            }
        }
    }
}

fn arb_message() -> impl Strategy<Value = ClientMessage> {
    let comm = prop::sample::select(vec![
        "user_sketch",
        "user_work",
        "generate_with_freeze",
        "regenerate",
        "goal_complete",
        "feeling",
        "end_session",
        "bogus",
    ]);
    let reply = prop::sample::select(vec![
        "0",
        "3",
        "5",
        "9",
        "11",
        "2",
        "3-5",
        "5-9",
        "business",
        "sports",
        "yes",
        "no",
        "frustrated",
        "cancel",
        "hello",
    ]);
    prop_oneof![
        6 => comm.prop_map(|c| ClientMessage::CommSelect { comm_id: c.to_string() }),
        8 => reply.prop_map(|t| ClientMessage::DialogueReply { text: t.to_string() }),
        1 => Just(ClientMessage::SessionEnd {}),
    ]
}

const FEEDBACK: [&str; 3] = ["goal_complete", "feeling", "end_session"];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn session_invariants(local: bool, seed: u64, msgs in prop::collection::vec(arb_message(), 0..80)) {
        let condition = if local { Condition::Local } else { Condition::Global };
        let hub = SessionHub::new(ServiceConfig {
            log_dir: None,
            condition_assignment: ConditionAssignment::Forced(condition),
            seed,
            ..ServiceConfig::default()
        })
        .unwrap();
        let opening = hub.create_session("prop", None);
        let id = opening[0].session_id.clone();
        for msg in msgs {
            let out = hub.handle(&id, msg);
            let offers = out.iter().filter(|m| matches!(m.body, ServerBody::InterruptOffer { .. })).count();
            prop_assert!(offers <= 1);
            if !local {
                prop_assert_eq!(offers, 0);
            }
            let state = hub.state(&id).unwrap();
            prop_assert!(state.interactions_used <= state.interaction_budget);
        }

        let events = hub.events(&id).unwrap();
        let state = hub.state(&id).unwrap();
        prop_assert_eq!(&replay(&events).unwrap(), &state);

        let mut charged = 0;
        let mut pending_edit = false;
        for e in &events {
            match &e.body {
                EventBody::CommActivated { comm_id, counts_against_budget, interactions_used } => {
                    if FEEDBACK.contains(&comm_id.as_str()) {
                        prop_assert!(!counts_against_budget);
                    }
                    if *counts_against_budget {
                        charged += 1;
                        pending_edit = false;
                    }
                    prop_assert_eq!(*interactions_used, charged);
                }
                EventBody::QueryExecuted { query: ContextQuery::EditLine { .. }, .. }
                    if e.actor == cocreate::event::Actor::Human =>
                {
                    pending_edit = true;
                }
                EventBody::InterruptOffered { .. } => {
                    prop_assert!(pending_edit, "offer without a fresh edit");
                    pending_edit = false;
                }
                _ => {}
            }
        }
        prop_assert_eq!(charged, state.interactions_used);
        let exhausted = events.iter().filter(|e| matches!(e.body, EventBody::BudgetExhausted { .. })).count();
        prop_assert!(exhausted <= 1);
    }
}
