//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if a criterion fails that is not listed in `KNOWN_RED`.
//!
//! Run alone with `cargo test -p cocreate-cli --test acceptance`.

#[path = "../../core/tests/common/oracles.rs"]
mod oracles;

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use cocreate::context::{blend_weights, execute_query, ContextQuery, MockGenerator};
use cocreate::event::{Actor, EventBody};
use cocreate::metrics::{normal_cdf, welch_t_test_less};
use cocreate::protocol::ServerBody;
use cocreate::scenario::{self, run_scenario, run_script, HubTransport, Run};
use cocreate::{Condition, ContextState, ControlPoint, SketchSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria expected to fail, with the reason. See the README.
const KNOWN_RED: &[(&str, &str)] =
    &[("completion", "goal 3 from 3/28 vs 5/32 gives p = 0.2858 under the stated unpooled test; 0.285 is not reachable from these counts")];

struct Outcome {
    id: &'static str,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn completion() -> Outcome {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/study_counts.json");
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_cw-analyze"))
        .args(["--summary", fixture.to_str().unwrap(), "--report", "completion", "--format", "json"])
        .output()
        .expect("run cw-analyze");
    let elapsed = start.elapsed();
    let title = "completion p-values 0.095/0.249/0.285 (+-0.0005), runtime < 1 s";
    if !out.status.success() {
        return Outcome { id: "completion", title, pass: false, detail: String::from_utf8_lossy(&out.stderr).into_owned() };
    }
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let want = [0.095, 0.249, 0.285];
    let got: Vec<f64> = v["completion"]["rows"].as_array().unwrap().iter().map(|r| r["p_value"].as_f64().unwrap()).collect();
    let misses: Vec<String> = want
        .iter()
        .zip(&got)
        .enumerate()
        .filter(|(_, (w, g))| (*g - *w).abs() > 0.0005)
        .map(|(i, (w, g))| format!("goal {} off by {:.4}", i + 1, (g - w).abs()))
        .collect();
    let fast = elapsed.as_secs_f64() < 1.0;
    Outcome {
        id: "completion",
        title,
        pass: got.len() == 3 && misses.is_empty() && fast,
        detail: format!(
            "p = {:.4}, {:.4}, {:.4} in {:.0} ms{}",
            got[0],
            got[1],
            got[2],
            elapsed.as_secs_f64() * 1e3,
            if misses.is_empty() { String::new() } else { format!("; {}", misses.join(", ")) }
        ),
    }
}

fn frustration() -> Outcome {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/study_counts.json");
    let out = Command::new(env!("CARGO_BIN_EXE_cw-analyze"))
        .args(["--summary", fixture.to_str().unwrap(), "--report", "frustration", "--format", "json"])
        .output()
        .expect("run cw-analyze");
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap_or_default();
    let p = v["frustration"]["p_value"].as_f64().unwrap_or(f64::NAN);
    Outcome {
        id: "frustration",
        title: "frustration 8/28 vs 10/32 two-sided p = 0.82 (+-0.005)",
        pass: (p - 0.82).abs() <= 0.005,
        detail: format!("p = {p:.4}"),
    }
}

fn stats_oracle() -> Outcome {
    let mut worst_phi: f64 = 0.0;
    for i in 0..=120_000 {
        let z = -6.0 + i as f64 * 1e-4;
        worst_phi = worst_phi.max((normal_cdf(z) - oracles::phi(z)).abs());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_welch: f64 = 0.0;
    for _ in 0..100 {
        let na = rng.random_range(2..=30);
        let nb = rng.random_range(2..=30);
        let shift = rng.random_range(-3.0..3.0);
        let a: Vec<f64> = (0..na).map(|_| rng.random_range(0.0..10.0)).collect();
        let b: Vec<f64> = (0..nb).map(|_| rng.random_range(0.0..10.0) + shift).collect();
        let got = welch_t_test_less(&a, &b).map(|r| r.p_value).unwrap_or(f64::NAN);
        let (_, _, want) = oracles::welch_less(&a, &b);
        worst_welch = worst_welch.max((got - want).abs()).max(if got.is_nan() { f64::INFINITY } else { 0.0 });
    }
    Outcome {
        id: "stats-oracle",
        title: "Welch p within 1e-6 of quadrature on 100 samples; Phi within 1e-7 on [-6, 6]",
        pass: worst_welch < 1e-6 && worst_phi < 1e-7,
        detail: format!("max Welch error {worst_welch:.1e}, max Phi error {worst_phi:.1e}"),
    }
}

fn random_sketch(rng: &mut ChaCha8Rng) -> SketchSpec {
    let topics = ["business", "sports", "soccer", "travel"];
    let n = rng.random_range(1..=6);
    let points = (0..n)
        .map(|_| {
            let a = rng.random_range(0..10);
            let b = rng.random_range(0..10);
            ControlPoint::new(topics[rng.random_range(0..topics.len())], a.min(b), a.max(b))
        })
        .collect();
    SketchSpec::new(points, rng.random_range(1.0..5.0))
}

fn blend() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let sketch = random_sketch(&mut rng);
        let line = rng.random_range(0..10);
        let got = blend_weights(line, &sketch).unwrap();
        let pts: Vec<_> = sketch.control_points.iter().map(|p| (p.topic.clone(), (p.start + p.end) as f64 / 2.0)).collect();
        let want = oracles::blend(line, &pts, sketch.sigma);
        if got.len() != want.len() {
            worst = f64::INFINITY;
        }
        for (k, v) in &want {
            worst = worst.max(got.get(k).map_or(f64::INFINITY, |g| (g - v).abs()));
        }
    }
    let single = SketchSpec::new(vec![ControlPoint::new("sports", 2, 6)], 2.0);
    let single_exact = (0..10).all(|l| blend_weights(l, &single).unwrap()["sports"] == 1.0);
    let sym = SketchSpec::new(vec![ControlPoint::new("a", 2, 2), ControlPoint::new("b", 6, 6)], 1.5);
    let w = blend_weights(4, &sym).unwrap();
    let sym_exact = w["a"] == 0.5 && w["b"] == 0.5;
    Outcome {
        id: "blend",
        title: "blend weights within 1e-9 of the definition on 1000 sketches; single-topic and symmetric cases exact",
        pass: worst < 1e-9 && single_exact && sym_exact,
        detail: format!("max error {worst:.1e}, single exact {single_exact}, symmetric exact {sym_exact}"),
    }
}

fn freeze_conservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let mut violations = 0;
    let mut regenerations = 0;
    for run in 0..1000u64 {
        let gen = MockGenerator { salt: rng.random() };
        let mut ctx = ContextState::new(10, 2.0);
        for _ in 0..rng.random_range(1..40) {
            let index = rng.random_range(0..10);
            let query = match rng.random_range(0..8) {
                0 | 1 => ContextQuery::EditLine { index, text: format!("edit {run} {index}") },
                2 | 3 => ContextQuery::FreezeLine { index },
                4 => ContextQuery::UnfreezeLine { index },
                _ => ContextQuery::Regenerate,
            };
            let frozen: Vec<(usize, String)> = ctx.story.lines.iter().filter(|l| l.frozen).map(|l| (l.index, l.text.clone())).collect();
            let _ = execute_query(&gen, &mut ctx, &query, run);
            if matches!(query, ContextQuery::Regenerate) {
                regenerations += 1;
                violations += frozen.iter().filter(|(i, t)| !ctx.story.lines[*i].frozen || ctx.story.lines[*i].text != *t).count();
            }
        }
    }
    Outcome {
        id: "freeze",
        title: "frozen lines unchanged by regeneration over 1000 random interleavings",
        pass: violations == 0,
        detail: format!("{violations} violations in {regenerations} regenerations"),
    }
}

fn local_run(name: &str) -> (scenario::Scenario, Run) {
    let s = scenario::find_bundled(name).expect("bundled scenario");
    let run = run_script(&s, &mut HubTransport::for_scenario(&s));
    (s, run)
}

fn budget() -> Outcome {
    let (s, run) = local_run("budget_burn");
    let report = scenario::assess(&s, &run, None);
    let accepted = run.events.iter().filter(|e| matches!(e.body, EventBody::CommActivated { counts_against_budget: true, .. })).count();
    let exhausted = run.events.iter().filter(|e| matches!(e.body, EventBody::BudgetExhausted { .. })).count();
    let refused_at = run.transcript.iter().enumerate().filter(|(_, x)| x.sent.type_name() == "comm.select").find_map(|(i, x)| {
        x.received.iter().any(|m| matches!(&m.body, ServerBody::Error { code, .. } if code == "budget_exhausted")).then_some(i)
    });
    let budgeted_before_refusal =
        refused_at.map(|i| run.transcript[..i].iter().filter(|x| x.received.iter().any(|m| m.type_name() == "budget.update")).count() - 1);
    let menu_after = run.transcript.iter().skip(refused_at.unwrap_or(usize::MAX)).find_map(|x| {
        x.received.iter().find_map(|m| match &m.body {
            ServerBody::CommMenu { items } => Some(items.iter().map(|i| i.comm_id.clone()).collect::<Vec<_>>()),
            _ => None,
        })
    });
    let feedback_ok =
        menu_after.as_ref().is_some_and(|m| ["goal_complete", "feeling", "end_session"].iter().all(|c| m.iter().any(|x| x == c)));
    let feedback_accepted = run.events.iter().any(|e| matches!(e.body, EventBody::FeelingReported { .. }))
        && run.events.iter().any(|e| matches!(e.body, EventBody::GoalReported { .. }));
    Outcome {
        id: "budget",
        title: "budget_burn: 15 budgeted activations, 16th refused, feedback available, one BudgetExhausted",
        pass: report.passed && accepted == 15 && budgeted_before_refusal == Some(15) && exhausted == 1 && feedback_ok && feedback_accepted,
        detail: format!(
            "{accepted} accepted, refused after {budgeted_before_refusal:?}, {exhausted} exhausted event(s), feedback in menu {feedback_ok}, feedback accepted {feedback_accepted}"
        ),
    }
}

fn interrupts() -> Outcome {
    let (s, run) = local_run("local_edit_freeze_interrupt");
    let report = scenario::assess(&s, &run, None);
    let mut edits = 0;
    let mut immediate = 0;
    for (i, e) in run.events.iter().enumerate() {
        let EventBody::QueryExecuted { query: ContextQuery::EditLine { index, .. }, .. } = &e.body else { continue };
        if e.actor != Actor::Human {
            continue;
        }
        edits += 1;
        // The edit's own story snapshot sits between the edit and the offer.
        let next = run.events[i + 1..].iter().find(|n| !matches!(n.body, EventBody::StoryUpdated { .. }));
        if next.is_some_and(|n| matches!(n.body, EventBody::InterruptOffered { line: Some(l), .. } if l == *index)) {
            immediate += 1;
        }
    }
    let offered = run.events.iter().filter(|e| matches!(e.body, EventBody::InterruptOffered { .. })).count();
    // On the wire the offer arrives in the reply that completes the edit.
    let offer_msgs: Vec<(bool, usize)> = run
        .transcript
        .iter()
        .map(|x| {
            let offers = x.received.iter().filter(|m| m.type_name() == "interrupt.offer").count();
            let edit_reply = x.sent.type_name() == "dialogue.reply" && x.received.iter().any(|m| m.type_name() == "canvas.story");
            (edit_reply, offers)
        })
        .filter(|&(_, n)| n > 0)
        .collect();
    let mut global_offers = 0;
    let mut global_runs = 0;
    for g in scenario::bundled().into_iter().filter(|g| g.condition == Condition::Global) {
        let run = run_script(&g, &mut HubTransport::for_scenario(&g));
        global_runs += 1;
        global_offers += run.transcript.iter().flat_map(|x| &x.received).filter(|m| m.type_name() == "interrupt.offer").count();
        global_offers += run.events.iter().filter(|e| matches!(e.body, EventBody::InterruptOffered { .. })).count();
    }
    Outcome {
        id: "interrupt",
        title: "local_edit_freeze_interrupt: one offer right after each manual edit; none in Global",
        pass: report.passed && edits > 0 && immediate == edits && offered == edits && offer_msgs.len() == edits && offer_msgs.iter().all(|&(edit, n)| edit && n == 1) && global_offers == 0,
        detail: format!("{edits} edits, {immediate} followed by an offer, {offered} offers; {global_offers} offers across {global_runs} Global scenarios"),
    }
}

fn log_fidelity() -> Outcome {
    let reports: Vec<_> = scenario::bundled().iter().map(run_scenario).collect();
    let bad: Vec<String> = reports.iter().filter(|r| !r.replay_matches || r.deterministic != Some(true)).map(|r| r.name.clone()).collect();
    Outcome {
        id: "log-fidelity",
        title: "replay(log) equals live state and same-seed logs match, for every bundled scenario",
        pass: bad.is_empty() && !reports.is_empty(),
        detail: if bad.is_empty() { format!("{} scenarios", reports.len()) } else { format!("mismatch in {}", bad.join(", ")) },
    }
}

fn main() -> ExitCode {
    let outcomes = [completion(), frustration(), stats_oracle(), blend(), freeze_conservation(), budget(), interrupts(), log_fidelity()];
    let mut unexpected = 0;
    let mut known_red = 0;
    for o in &outcomes {
        let known = KNOWN_RED.iter().find(|(id, _)| *id == o.id);
        println!("{} [{}] {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.id, o.title, o.detail);
        match (o.pass, known) {
            (false, Some((_, why))) => {
                println!("     known: {why}");
                known_red += 1;
            }
            (false, None) => unexpected += 1,
            (true, Some(_)) => {
                println!("     listed in KNOWN_RED but passes; remove it");
                unexpected += 1;
            }
            (true, None) => {}
        }
    }
    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!("\n{passed} of {} criteria pass, {known_red} known failure(s)", outcomes.len());
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
