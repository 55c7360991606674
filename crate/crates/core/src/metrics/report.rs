//! Assembling and rendering analysis reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::analysis::{
    completion_from_counts, completion_table, filter_and_best, frustration_from_counts, frustration_test, interactions_table,
    survey_summary, AnalysisError, BestRule, CompletionTable, FrustrationResult, InteractionsTable, SessionSummary, SummaryInput,
    SurveySummary, Warning,
};
use crate::model::{Condition, Likert};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    Completion,
    Interactions,
    Frustration,
    Survey,
    #[default]
    All,
}

impl ReportKind {
    fn includes(self, other: ReportKind) -> bool {
        self == ReportKind::All || self == other
    }
}

impl FromStr for ReportKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "completion" => Ok(ReportKind::Completion),
            "interactions" => Ok(ReportKind::Interactions),
            "frustration" => Ok(ReportKind::Frustration),
            "survey" => Ok(ReportKind::Survey),
            "all" => Ok(ReportKind::All),
            _ => Err(format!("unknown report {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AnalysisOptions {
    pub report: ReportKind,
    pub best_rule: BestRule,
    pub pooled: bool,
}

/// A section that could not be computed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Omission {
    pub section: ReportKind,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub best_rule: BestRule,
    pub pooled: bool,
    /// Participants per condition after filtering; absent for summary input.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub participants: Option<BTreeMap<Condition, u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub completion: Option<CompletionTable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interactions: Option<InteractionsTable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frustration: Option<FrustrationResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub survey: Option<SurveySummary>,
    pub omitted: Vec<Omission>,
    pub warnings: Vec<Warning>,
}

impl AnalysisReport {
    fn empty(opts: &AnalysisOptions, warnings: Vec<Warning>) -> Self {
        Self {
            best_rule: opts.best_rule,
            pooled: opts.pooled,
            participants: None,
            completion: None,
            interactions: None,
            frustration: None,
            survey: None,
            omitted: Vec::new(),
            warnings,
        }
    }

    fn take<T>(&mut self, section: ReportKind, r: Result<T, AnalysisError>) -> Option<T> {
        r.map_err(|e| self.omitted.push(Omission { section, reason: e.to_string() })).ok()
    }
}

pub fn build_report(sessions: &[SessionSummary], warnings: Vec<Warning>, opts: &AnalysisOptions) -> AnalysisReport {
    let records = filter_and_best(sessions);
    let mut report = AnalysisReport::empty(opts, warnings);
    let mut participants = BTreeMap::new();
    for c in [Condition::Local, Condition::Global] {
        participants.insert(c, records.iter().filter(|r| r.condition == c).count() as u32);
    }
    report.participants = Some(participants);
    if opts.report.includes(ReportKind::Completion) {
        report.completion = report.take(ReportKind::Completion, completion_table(&records, opts.best_rule, opts.pooled));
    }
    if opts.report.includes(ReportKind::Interactions) {
        report.interactions = Some(interactions_table(&records, opts.best_rule));
    }
    if opts.report.includes(ReportKind::Frustration) {
        report.frustration = report.take(ReportKind::Frustration, frustration_test(&records, opts.best_rule, opts.pooled));
    }
    if opts.report.includes(ReportKind::Survey) {
        report.survey = Some(survey_summary(&records, opts.best_rule));
    }
    report
}

/// Report over pre-aggregated counts. Only completion and frustration can be
/// computed from counts; other requested sections are listed as omitted.
pub fn report_from_summary(input: &SummaryInput, opts: &AnalysisOptions) -> AnalysisReport {
    let mut report = AnalysisReport::empty(opts, Vec::new());
    if opts.report.includes(ReportKind::Completion) {
        report.completion = report.take(ReportKind::Completion, completion_from_counts(&input.goal_counts(), opts.pooled));
    }
    if opts.report.includes(ReportKind::Frustration) {
        let r = match input.frustration() {
            Some(e) => frustration_from_counts(e.local, e.global, opts.pooled),
            None => Err(AnalysisError::BadSummary("no \"frustration\" entry".into())),
        };
        report.frustration = report.take(ReportKind::Frustration, r);
    }
    for section in [ReportKind::Interactions, ReportKind::Survey] {
        if opts.report.includes(section) {
            report.omitted.push(Omission { section, reason: "needs per-participant logs, not summary counts".into() });
        }
    }
    report
}

fn round_to(x: f64, digits: i32) -> f64 {
    let scale = 10f64.powi(digits);
    (x * scale).round() / scale
}

/// Percentage with one decimal, ties rounded away from zero.
pub fn fmt_percent(rate: f64) -> String {
    format!("{:.1}%", round_to(rate * 100.0, 1))
}

pub fn fmt_p(p: f64) -> String {
    format!("{:.3}", round_to(p, 3))
}

fn fmt_mean(m: f64) -> String {
    format!("{:.2}", round_to(m, 2))
}

fn section_name(s: ReportKind) -> &'static str {
    match s {
        ReportKind::Completion => "completion",
        ReportKind::Interactions => "interactions",
        ReportKind::Frustration => "frustration",
        ReportKind::Survey => "survey",
        ReportKind::All => "all",
    }
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let w = &mut out;
        if let Some(p) = &self.participants {
            let _ = writeln!(
                w,
                "Participants: local {}, global {}\n",
                p.get(&Condition::Local).unwrap_or(&0),
                p.get(&Condition::Global).unwrap_or(&0)
            );
        }
        if let Some(t) = &self.completion {
            let _ = writeln!(w, "## Sub-goal completion\n");
            header(w, t.rows.iter().map(|r| r.goal));
            row(w, "Local", t.rows.iter().map(|r| format!("{} ({}/{})", fmt_percent(r.local_rate), r.local.k, r.local.n)));
            row(w, "Global", t.rows.iter().map(|r| format!("{} ({}/{})", fmt_percent(r.global_rate), r.global.k, r.global.n)));
            row(w, "p-value (H0: p_global <= p_local)", t.rows.iter().map(|r| fmt_p(r.p_value)));
            let _ = writeln!(w);
        }
        if let Some(t) = &self.interactions {
            let _ = writeln!(w, "## Interactions at report\n");
            header(w, t.rows.iter().map(|r| r.goal));
            let cell = |m: Option<f64>, n: usize| m.map_or("n/a".to_string(), |m| format!("{} (n={n})", fmt_mean(m)));
            row(w, "Local", t.rows.iter().map(|r| cell(r.local.mean, r.local.values.len())));
            row(w, "Global", t.rows.iter().map(|r| cell(r.global.mean, r.global.values.len())));
            row(w, "p-value (H0: t_global >= t_local)", t.rows.iter().map(|r| r.welch.map_or("n/a".to_string(), |x| fmt_p(x.p_value))));
            let _ = writeln!(w);
            for r in t.rows.iter().filter(|r| r.note.is_some()) {
                let _ = writeln!(w, "- #{}: {}", r.goal, r.note.as_deref().unwrap_or_default());
            }
            if t.rows.iter().any(|r| r.note.is_some()) {
                let _ = writeln!(w);
            }
        }
        if let Some(f) = &self.frustration {
            let _ = writeln!(w, "## Frustration\n");
            let _ = writeln!(
                w,
                "Local {} ({}/{}), global {} ({}/{}), two-sided p = {}\n",
                fmt_percent(f.local.rate()),
                f.local.k,
                f.local.n,
                fmt_percent(f.global.rate()),
                f.global.k,
                f.global.n,
                fmt_p(f.p_value)
            );
        }
        if let Some(s) = &self.survey {
            let _ = writeln!(w, "## Exit survey\n");
            let _ = writeln!(w, "| Statement | {} |", Likert::ALL.iter().map(|l| likert_label(*l)).collect::<Vec<_>>().join(" | "));
            let _ = writeln!(w, "|---|---|---|---|---|---|");
            for r in &s.rows {
                let cells: Vec<String> = r.counts.iter().map(u32::to_string).collect();
                let _ = writeln!(w, "| {} | {} |", r.label, cells.join(" | "));
            }
            let _ = writeln!(w);
        }
        if !self.omitted.is_empty() {
            let _ = writeln!(w, "## Omitted\n");
            for o in &self.omitted {
                let _ = writeln!(w, "- {}: {}", section_name(o.section), o.reason);
            }
            let _ = writeln!(w);
        }
        if !self.warnings.is_empty() {
            let _ = writeln!(w, "## Warnings\n");
            for x in &self.warnings {
                let _ = writeln!(w, "- {}: {}", x.source, x.message);
            }
            let _ = writeln!(w);
        }
        out
    }
}

fn likert_label(l: Likert) -> &'static str {
    match l {
        Likert::StronglyDisagree => "Strongly disagree",
        Likert::Disagree => "Disagree",
        Likert::Neutral => "Neutral",
        Likert::Agree => "Agree",
        Likert::StronglyAgree => "Strongly agree",
    }
}

fn header(w: &mut String, goals: impl Iterator<Item = u8>) {
    let goals: Vec<String> = goals.map(|g| format!("#{g}")).collect();
    let _ = writeln!(w, "| | {} |", goals.join(" | "));
    let _ = writeln!(w, "|---|{}", "---|".repeat(goals.len()));
}

fn row(w: &mut String, label: &str, cells: impl Iterator<Item = String>) {
    let _ = writeln!(w, "| {label} | {} |", cells.collect::<Vec<_>>().join(" | "));
}
