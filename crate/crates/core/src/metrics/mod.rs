//! Experiment statistics over session logs.

pub mod analysis;
pub mod report;
pub mod stats;

pub use analysis::{
    completion_from_counts, completion_table, filter_and_best, frustration_from_counts, frustration_test, interactions_table,
    load_summaries, survey_summary, AnalysisError, BestRule, CompletionTable, Count, FrustrationResult, InteractionsTable,
    ParticipantRecord, SessionSummary, SummaryInput, SurveySummary, Warning,
};
pub use report::{build_report, report_from_summary, AnalysisOptions, AnalysisReport, ReportKind};
pub use stats::{normal_cdf, student_t_cdf, two_proportion_z_test, welch_t_test_less, ProportionTestInput, Sided, TestResult, WelchResult};
