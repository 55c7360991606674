//! Participant filtering and the per-metric tables.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::stats::{two_proportion_z_test, welch_t_test_less, ProportionTestInput, Sided, StatsError, WelchResult};
use crate::comms::NUM_GOALS;
use crate::event::{replay, SessionEvent};
use crate::log::{list_sessions, load_session_log};
use crate::model::{Condition, ExitSurvey, Feeling, FeelingReport, GoalReport, Likert, SessionState, SurveyKey};

const GOALS: u8 = NUM_GOALS as u8;

/// Sessions with fewer budgeted interactions than this are ignored.
pub const MIN_INTERACTIONS: u32 = 2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("no participants in the {0} condition")]
    EmptyCondition(Condition),
    #[error("summary input: {0}")]
    BadSummary(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// What the analysis needs from one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub participant_id: String,
    pub condition: Condition,
    pub interactions_used: u32,
    pub goal_reports: Vec<GoalReport>,
    pub feeling_reports: Vec<FeelingReport>,
    pub exit_survey: Option<ExitSurvey>,
}

impl From<&SessionState> for SessionSummary {
    fn from(s: &SessionState) -> Self {
        Self {
            session_id: s.session_id.clone(),
            participant_id: s.participant_id.clone(),
            condition: s.condition,
            interactions_used: s.interactions_used,
            goal_reports: s.goal_reports.clone(),
            feeling_reports: s.feeling_reports.clone(),
            exit_survey: s.exit_survey.clone(),
        }
    }
}

impl SessionSummary {
    pub fn from_events(events: &[SessionEvent]) -> Result<Self, crate::event::ReplayError> {
        Ok(Self::from(&replay(events)?))
    }

    fn first_report(&self, goal: u8) -> Option<u32> {
        self.goal_reports.iter().filter(|r| r.goal_index == goal).map(|r| r.interactions_at_report).min()
    }

    fn goals_reported(&self) -> usize {
        (1..=GOALS).filter(|g| self.first_report(*g).is_some()).count()
    }

    fn frustrated(&self) -> bool {
        self.feeling_reports.iter().any(|f| f.feeling == Feeling::Frustrated)
    }
}

/// A log that could not be used.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Warning {
    pub source: String,
    pub message: String,
}

/// Replay every log in `dir`. Unreadable or inconsistent logs become warnings.
pub fn load_summaries(dir: &Path) -> std::io::Result<(Vec<SessionSummary>, Vec<Warning>)> {
    let ids = list_sessions(dir).map_err(|e| match e {
        crate::log::LogError::Io(io) => io,
        other => std::io::Error::other(other.to_string()),
    })?;
    let mut sessions = Vec::new();
    let mut warnings = Vec::new();
    for id in ids {
        let result = load_session_log(dir, &id)
            .map_err(|e| e.to_string())
            .and_then(|events| SessionSummary::from_events(&events).map_err(|e| e.to_string()));
        match result {
            Ok(s) => sessions.push(s),
            Err(message) => {
                tracing::warn!(session = %id, %message, "skipping log");
                warnings.push(Warning { source: format!("{id}.jsonl"), message });
            }
        }
    }
    Ok((sessions, warnings))
}

/// How a participant's several sessions are reduced to one value per metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BestRule {
    /// Most favourable value of each metric independently.
    #[default]
    PerMetric,
    /// All metrics from the single session with the most goals reported.
    PerSession,
}

impl FromStr for BestRule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "per-metric" => Ok(BestRule::PerMetric),
            "per-session" => Ok(BestRule::PerSession),
            _ => Err(format!("unknown best rule {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub participant_id: String,
    pub condition: Condition,
    pub qualifying_sessions: Vec<SessionSummary>,
}

impl ParticipantRecord {
    /// Most goals, then fewest summed interactions over them, then smallest id.
    pub fn best_session(&self) -> Option<&SessionSummary> {
        self.qualifying_sessions.iter().min_by(|a, b| {
            let cost = |s: &SessionSummary| -> u64 { (1..=GOALS).filter_map(|g| s.first_report(g)).map(u64::from).sum() };
            b.goals_reported().cmp(&a.goals_reported()).then(cost(a).cmp(&cost(b))).then(a.session_id.cmp(&b.session_id))
        })
    }

    fn sessions(&self, rule: BestRule) -> Vec<&SessionSummary> {
        match rule {
            BestRule::PerMetric => self.qualifying_sessions.iter().collect(),
            BestRule::PerSession => self.best_session().into_iter().collect(),
        }
    }

    pub fn completed(&self, goal: u8, rule: BestRule) -> bool {
        self.interactions_at_report(goal, rule).is_some()
    }

    pub fn interactions_at_report(&self, goal: u8, rule: BestRule) -> Option<u32> {
        self.sessions(rule).into_iter().filter_map(|s| s.first_report(goal)).min()
    }

    pub fn frustrated(&self, rule: BestRule) -> bool {
        self.sessions(rule).into_iter().any(SessionSummary::frustrated)
    }

    /// Survey from the surveyed session with the most interactions (smallest id on ties).
    pub fn survey(&self, rule: BestRule) -> Option<&ExitSurvey> {
        self.sessions(rule)
            .into_iter()
            .filter(|s| s.exit_survey.is_some())
            .min_by(|a, b| b.interactions_used.cmp(&a.interactions_used).then(a.session_id.cmp(&b.session_id)))
            .and_then(|s| s.exit_survey.as_ref())
    }
}

/// Drop sessions under [`MIN_INTERACTIONS`] and group the rest by
/// (participant, condition). Participants left with nothing are excluded.
pub fn filter_and_best(sessions: &[SessionSummary]) -> Vec<ParticipantRecord> {
    let mut groups: BTreeMap<(String, Condition), Vec<SessionSummary>> = BTreeMap::new();
    for s in sessions.iter().filter(|s| s.interactions_used >= MIN_INTERACTIONS) {
        groups.entry((s.participant_id.clone(), s.condition)).or_default().push(s.clone());
    }
    groups
        .into_iter()
        .map(|((participant_id, condition), mut qualifying_sessions)| {
            qualifying_sessions.sort_by(|a, b| a.session_id.cmp(&b.session_id));
            ParticipantRecord { participant_id, condition, qualifying_sessions }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Count {
    pub k: u32,
    pub n: u32,
}

impl Count {
    pub fn rate(self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            f64::from(self.k) / f64::from(self.n)
        }
    }
}

fn count_where(records: &[ParticipantRecord], condition: Condition, pred: impl Fn(&ParticipantRecord) -> bool) -> Count {
    let of_condition: Vec<_> = records.iter().filter(|r| r.condition == condition).collect();
    Count { k: of_condition.iter().filter(|r| pred(r)).count() as u32, n: of_condition.len() as u32 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRow {
    pub goal: u8,
    pub local: Count,
    pub global: Count,
    pub local_rate: f64,
    pub global_rate: f64,
    pub z: f64,
    /// One-sided, H0: p_global <= p_local.
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionTable {
    pub pooled: bool,
    pub rows: Vec<CompletionRow>,
}

pub fn completion_from_counts(counts: &[(u8, Count, Count)], pooled: bool) -> Result<CompletionTable, AnalysisError> {
    let rows = counts
        .iter()
        .map(|&(goal, local, global)| {
            if local.n == 0 {
                return Err(AnalysisError::EmptyCondition(Condition::Local));
            }
            if global.n == 0 {
                return Err(AnalysisError::EmptyCondition(Condition::Global));
            }
            let input = ProportionTestInput::from_counts(local.k, local.n, global.k, global.n, Sided::OneSidedGreater);
            let r = two_proportion_z_test(&input, pooled)?;
            Ok(CompletionRow {
                goal,
                local,
                global,
                local_rate: local.rate(),
                global_rate: global.rate(),
                z: r.statistic,
                p_value: r.p_value,
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(CompletionTable { pooled, rows })
}

pub fn completion_table(records: &[ParticipantRecord], rule: BestRule, pooled: bool) -> Result<CompletionTable, AnalysisError> {
    let counts: Vec<_> = (1..=GOALS)
        .map(|g| {
            (
                g,
                count_where(records, Condition::Local, |r| r.completed(g, rule)),
                count_where(records, Condition::Global, |r| r.completed(g, rule)),
            )
        })
        .collect();
    completion_from_counts(&counts, pooled)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionCell {
    pub values: Vec<u32>,
    pub mean: Option<f64>,
}

impl InteractionCell {
    fn new(mut values: Vec<u32>) -> Self {
        values.sort_unstable();
        let mean = (!values.is_empty()).then(|| values.iter().map(|&v| f64::from(v)).sum::<f64>() / values.len() as f64);
        Self { values, mean }
    }

    fn as_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| f64::from(v)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionsRow {
    pub goal: u8,
    pub local: InteractionCell,
    pub global: InteractionCell,
    /// One-sided, H0: t_global >= t_local.
    pub welch: Option<WelchResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionsTable {
    pub rows: Vec<InteractionsRow>,
}

pub fn interactions_table(records: &[ParticipantRecord], rule: BestRule) -> InteractionsTable {
    let cell = |g: u8, c: Condition| {
        InteractionCell::new(records.iter().filter(|r| r.condition == c).filter_map(|r| r.interactions_at_report(g, rule)).collect())
    };
    let rows = (1..=GOALS)
        .map(|goal| {
            let local = cell(goal, Condition::Local);
            let global = cell(goal, Condition::Global);
            let (welch, note) = match welch_t_test_less(&global.as_f64(), &local.as_f64()) {
                Ok(w) => (Some(w), None),
                Err(_) => (
                    None,
                    Some(format!(
                        "p-value needs at least 2 reporters per condition (local {}, global {})",
                        local.values.len(),
                        global.values.len()
                    )),
                ),
            };
            InteractionsRow { goal, local, global, welch, note }
        })
        .collect();
    InteractionsTable { rows }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrustrationResult {
    pub pooled: bool,
    pub local: Count,
    pub global: Count,
    pub z: f64,
    /// Two-sided.
    pub p_value: f64,
}

pub fn frustration_from_counts(local: Count, global: Count, pooled: bool) -> Result<FrustrationResult, AnalysisError> {
    if local.n == 0 {
        return Err(AnalysisError::EmptyCondition(Condition::Local));
    }
    if global.n == 0 {
        return Err(AnalysisError::EmptyCondition(Condition::Global));
    }
    let input = ProportionTestInput::from_counts(local.k, local.n, global.k, global.n, Sided::TwoSided);
    let r = two_proportion_z_test(&input, pooled)?;
    Ok(FrustrationResult { pooled, local, global, z: r.statistic, p_value: r.p_value })
}

/// Share of participants who reported feeling frustrated at least once.
pub fn frustration_test(records: &[ParticipantRecord], rule: BestRule, pooled: bool) -> Result<FrustrationResult, AnalysisError> {
    frustration_from_counts(
        count_where(records, Condition::Local, |r| r.frustrated(rule)),
        count_where(records, Condition::Global, |r| r.frustrated(rule)),
        pooled,
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyRow {
    /// e.g. `Loc-G#1`.
    pub label: String,
    pub condition: Condition,
    pub key: SurveyKey,
    /// Counts in [`Likert::ALL`] order.
    pub counts: [u32; 5],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveySummary {
    pub responses: BTreeMap<Condition, u32>,
    pub rows: Vec<SurveyRow>,
}

pub fn survey_summary(records: &[ParticipantRecord], rule: BestRule) -> SurveySummary {
    let mut responses = BTreeMap::new();
    let mut rows = Vec::new();
    for condition in [Condition::Local, Condition::Global] {
        let surveys: Vec<&ExitSurvey> = records.iter().filter(|r| r.condition == condition).filter_map(|r| r.survey(rule)).collect();
        responses.insert(condition, surveys.len() as u32);
        for key in SurveyKey::ALL {
            let mut counts = [0u32; 5];
            for s in &surveys {
                if let Some(answer) = s.answers.get(&key) {
                    counts[likert_index(*answer)] += 1;
                }
            }
            rows.push(SurveyRow { label: format!("{}-{}", condition.abbrev(), key.abbrev()), condition, key, counts });
        }
    }
    SurveySummary { responses, rows }
}

fn likert_index(l: Likert) -> usize {
    Likert::ALL.iter().position(|x| *x == l).expect("ALL lists every level")
}

/// Pre-aggregated counts: `{"1": {"local": {"k", "n"}, "global": {...}}, ..., "frustration": {...}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SummaryInput(pub BTreeMap<String, SummaryEntry>);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryEntry {
    pub local: Count,
    pub global: Count,
}

impl SummaryInput {
    pub fn parse(json: &str) -> Result<Self, AnalysisError> {
        let input: Self = serde_json::from_str(json).map_err(|e| AnalysisError::BadSummary(e.to_string()))?;
        for (key, entry) in &input.0 {
            if key != "frustration" && input.goal_number(key).is_none() {
                return Err(AnalysisError::BadSummary(format!("unknown key {key:?}")));
            }
            for c in [entry.local, entry.global] {
                if c.k > c.n {
                    return Err(AnalysisError::BadSummary(format!("{key}: k={} exceeds n={}", c.k, c.n)));
                }
            }
        }
        Ok(input)
    }

    fn goal_number(&self, key: &str) -> Option<u8> {
        key.parse::<u8>().ok().filter(|g| (1..=GOALS).contains(g))
    }

    pub fn goal_counts(&self) -> Vec<(u8, Count, Count)> {
        let mut v: Vec<_> = self.0.iter().filter_map(|(k, e)| Some((self.goal_number(k)?, e.local, e.global))).collect();
        v.sort_by_key(|(g, ..)| *g);
        v
    }

    pub fn frustration(&self) -> Option<SummaryEntry> {
        self.0.get("frustration").copied()
    }
}
