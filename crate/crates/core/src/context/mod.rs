//! The creative context: a generator behind a small query protocol, plus the
//! canvas it writes to.

mod blend;
mod mock;
mod remote;

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::model::{ContextState, ControlPoint, Line, SketchError, SketchSpec, StoryDocument, DEFAULT_SIGMA};

pub use blend::{blend_weights, dominant_topic};
pub use mock::{mock_generate_line, MockGenerator, GENERIC_TOPIC, VOCABULARY};
pub use remote::{GenerateRequest, GenerateResponse, RemoteGenerator, WireControlPoint};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ContextError {
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("generator unavailable: {0}")]
    GeneratorUnavailable(String),
    #[error("generator returned {got} lines, expected {expected}")]
    ProtocolViolation { expected: usize, got: usize },
    #[error("sketch has no control points")]
    NoControlSignal,
    #[error("invalid generator config: {0}")]
    Config(String),
}

impl From<SketchError> for ContextError {
    fn from(e: SketchError) -> Self {
        ContextError::InvalidQuery(e.to_string())
    }
}

/// Instructions the creative context understands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ContextQuery {
    SetPrompt { text: String },
    SetSketch { sketch: SketchSpec },
    AddSketchPoint { topic: String, start: usize, end: usize },
    EditLine { index: usize, text: String },
    FreezeLine { index: usize },
    UnfreezeLine { index: usize },
    Regenerate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryAck {
    /// Lines whose text or flags changed.
    pub changed_lines: Vec<usize>,
    pub generation_counter: u64,
}

/// Something that can propose text for every line of the canvas.
///
/// Implementations return one candidate line per canvas line; the creative
/// context decides which candidates are kept.
pub trait Generator: Send + Sync {
    fn generate(&self, ctx: &ContextState, session_seed: u64, generation: u64) -> Result<Vec<Line>, ContextError>;

    fn name(&self) -> &'static str;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Mock,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub backend: Backend,
    pub remote_url: Option<String>,
    pub sigma: f64,
    pub vocabulary_seed_salt: u64,
    #[serde(with = "duration_secs")]
    pub request_timeout: Duration,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            backend: Backend::Mock,
            remote_url: None,
            sigma: DEFAULT_SIGMA,
            vocabulary_seed_salt: 0,
            request_timeout: Duration::from_secs(30),
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), ContextError> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(ContextError::Config(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.backend == Backend::Remote && self.remote_url.is_none() {
            return Err(ContextError::Config("remote backend requires remote_url".into()));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Arc<dyn Generator>, ContextError> {
        self.validate()?;
        Ok(match self.backend {
            Backend::Mock => Arc::new(MockGenerator::new(self.vocabulary_seed_salt)),
            Backend::Remote => Arc::new(RemoteGenerator::new(self.remote_url.as_deref().unwrap_or_default(), self.request_timeout)),
        })
    }
}

mod duration_secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}

fn check_index(ctx: &ContextState, index: usize) -> Result<(), ContextError> {
    let n = ctx.story.num_lines();
    if index >= n {
        return Err(ContextError::InvalidQuery(format!("line {index} is out of range 0..{n}")));
    }
    Ok(())
}

/// Apply one query. On error `ctx` is left untouched.
pub fn execute_query(
    generator: &dyn Generator,
    ctx: &mut ContextState,
    query: &ContextQuery,
    session_seed: u64,
) -> Result<QueryAck, ContextError> {
    let num_lines = ctx.story.num_lines();
    let changed = match query {
        ContextQuery::SetPrompt { text } => {
            ctx.prompt = Some(text.clone());
            ctx.prompt_active = true;
            Vec::new()
        }
        ContextQuery::SetSketch { sketch } => {
            sketch.validate(num_lines)?;
            ctx.sketch = sketch.clone();
            Vec::new()
        }
        ContextQuery::AddSketchPoint { topic, start, end } => {
            let point = ControlPoint::new(topic.trim(), *start, *end);
            SketchSpec::validate_point(&point, num_lines)?;
            ctx.sketch.control_points.push(point);
            Vec::new()
        }
        ContextQuery::EditLine { index, text } => {
            check_index(ctx, *index)?;
            let line = &mut ctx.story.lines[*index];
            line.text = text.clone();
            line.dominant_topic = None;
            if *index == 0 {
                ctx.prompt_active = false;
            }
            vec![*index]
        }
        ContextQuery::FreezeLine { index } | ContextQuery::UnfreezeLine { index } => {
            check_index(ctx, *index)?;
            let freeze = matches!(query, ContextQuery::FreezeLine { .. });
            let line = &mut ctx.story.lines[*index];
            if line.frozen == freeze {
                Vec::new()
            } else {
                line.frozen = freeze;
                vec![*index]
            }
        }
        ContextQuery::Regenerate => regenerate(generator, ctx, session_seed)?,
    };
    Ok(QueryAck { changed_lines: changed, generation_counter: ctx.story.generation_counter })
}

fn regenerate(generator: &dyn Generator, ctx: &mut ContextState, session_seed: u64) -> Result<Vec<usize>, ContextError> {
    let next = ctx.story.generation_counter + 1;
    let candidates = generator.generate(ctx, session_seed, next)?;
    if candidates.len() != ctx.story.num_lines() {
        return Err(ContextError::ProtocolViolation { expected: ctx.story.num_lines(), got: candidates.len() });
    }
    let prompt = ctx.prompt.clone().filter(|_| ctx.prompt_active);

    let mut changed = Vec::new();
    for (line, candidate) in ctx.story.lines.iter_mut().zip(candidates) {
        if line.frozen {
            continue;
        }
        let (text, topic) = match (&prompt, line.index) {
            (Some(p), 0) => (p.clone(), None),
            _ => (candidate.text, candidate.dominant_topic),
        };
        if line.text != text || line.dominant_topic != topic {
            changed.push(line.index);
        }
        line.text = text;
        line.dominant_topic = topic;
    }
    ctx.story.generation_counter = next;
    Ok(changed)
}

/// Snapshot of the canvas. The returned document is an independent copy.
pub fn get_generated_content(ctx: &ContextState) -> StoryDocument {
    ctx.story.clone()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mock() -> MockGenerator {
        MockGenerator::new(0)
    }

    fn ctx() -> ContextState {
        ContextState::new(10, 2.0)
    }

    struct Failing;

    impl Generator for Failing {
        fn generate(&self, _: &ContextState, _: u64, _: u64) -> Result<Vec<Line>, ContextError> {
            Err(ContextError::GeneratorUnavailable("down".into()))
        }

        fn name(&self) -> &'static str {
            "failing"
        }
    }

    #[test]
    fn freeze_then_regenerate_keeps_line() {
        let g = mock();
        let mut c = ctx();
        execute_query(&g, &mut c, &ContextQuery::Regenerate, 1).unwrap();
        let before = c.story.clone();
        execute_query(&g, &mut c, &ContextQuery::FreezeLine { index: 3 }, 1).unwrap();
        // a new sketch forces every unfrozen line to change topic
        execute_query(&g, &mut c, &ContextQuery::AddSketchPoint { topic: "sports".into(), start: 0, end: 9 }, 1).unwrap();
        execute_query(&g, &mut c, &ContextQuery::Regenerate, 1).unwrap();
        for i in 0..10 {
            if i == 3 {
                assert_eq!(c.story.lines[i].text, before.lines[i].text);
            } else {
                assert_ne!(c.story.lines[i].text, before.lines[i].text, "line {i}");
            }
        }
    }

    #[test]
    fn total_freeze_only_bumps_counter() {
        let g = mock();
        let mut c = ctx();
        execute_query(&g, &mut c, &ContextQuery::Regenerate, 1).unwrap();
        for i in 0..10 {
            execute_query(&g, &mut c, &ContextQuery::FreezeLine { index: i }, 1).unwrap();
        }
        let before = c.story.clone();
        let ack = execute_query(&g, &mut c, &ContextQuery::Regenerate, 1).unwrap();
        assert_eq!(c.story.texts(), before.texts());
        assert_eq!(c.story.generation_counter, before.generation_counter + 1);
        assert!(ack.changed_lines.is_empty());
    }

    #[test]
    fn single_topic_sketch_dominates_everywhere() {
        let g = mock();
        let mut c = ctx();
        let sketch = SketchSpec::new(vec![ControlPoint::new("sports", 0, 9)], 2.0);
        execute_query(&g, &mut c, &ContextQuery::SetSketch { sketch }, 1).unwrap();
        execute_query(&g, &mut c, &ContextQuery::Regenerate, 1).unwrap();
        assert!(c.story.lines.iter().all(|l| l.dominant_topic.as_deref() == Some("sports")));
    }

    #[test]
    fn snapshots() {
        let g = mock();
        let mut c = ctx();
        let fresh = get_generated_content(&c);
        assert_eq!(fresh.num_lines(), 10);
        assert!(fresh.lines.iter().all(|l| l.text.is_empty() && !l.frozen));

        execute_query(&g, &mut c, &ContextQuery::EditLine { index: 2, text: "Hello".into() }, 1).unwrap();
        let mut snap = get_generated_content(&c);
        assert_eq!(snap.lines[2].text, "Hello");
        snap.lines[2].text.push('!');
        assert_eq!(c.story.lines[2].text, "Hello");
        assert_eq!(serde_json::to_vec(&get_generated_content(&c)).unwrap(), serde_json::to_vec(&get_generated_content(&c)).unwrap());
    }

    #[test]
    fn out_of_bounds_is_invalid_and_atomic() {
        let g = mock();
        let mut c = ctx();
        let before = c.clone();
        for q in [
            ContextQuery::EditLine { index: 10, text: "x".into() },
            ContextQuery::FreezeLine { index: 10 },
            ContextQuery::UnfreezeLine { index: 99 },
            ContextQuery::AddSketchPoint { topic: "a".into(), start: 3, end: 10 },
            ContextQuery::AddSketchPoint { topic: "  ".into(), start: 0, end: 1 },
        ] {
            assert!(matches!(execute_query(&g, &mut c, &q, 1), Err(ContextError::InvalidQuery(_))), "{q:?}");
            assert_eq!(c, before);
        }
    }

    #[test]
    fn generator_failure_leaves_state_untouched() {
        let mut c = ctx();
        execute_query(&mock(), &mut c, &ContextQuery::Regenerate, 1).unwrap();
        let before = c.clone();
        let err = execute_query(&Failing, &mut c, &ContextQuery::Regenerate, 1).unwrap_err();
        assert!(matches!(err, ContextError::GeneratorUnavailable(_)));
        assert_eq!(c, before);
    }

    #[test]
    fn prompt_seeds_line_zero_until_edited() {
        let g = mock();
        let mut c = ctx();
        execute_query(&g, &mut c, &ContextQuery::SetPrompt { text: "Once upon a time.".into() }, 1).unwrap();
        execute_query(&g, &mut c, &ContextQuery::Regenerate, 1).unwrap();
        assert_eq!(c.story.lines[0].text, "Once upon a time.");
        assert_eq!(c.story.lines[0].dominant_topic, None);

        execute_query(&g, &mut c, &ContextQuery::EditLine { index: 0, text: "Mine.".into() }, 1).unwrap();
        execute_query(&g, &mut c, &ContextQuery::Regenerate, 1).unwrap();
        assert!(c.story.lines[0].text.starts_with("[generic] "));
    }

    #[test]
    fn frozen_line_zero_ignores_prompt() {
        let g = mock();
        let mut c = ctx();
        execute_query(&g, &mut c, &ContextQuery::EditLine { index: 0, text: "Kept.".into() }, 1).unwrap();
        execute_query(&g, &mut c, &ContextQuery::FreezeLine { index: 0 }, 1).unwrap();
        execute_query(&g, &mut c, &ContextQuery::SetPrompt { text: "P".into() }, 1).unwrap();
        execute_query(&g, &mut c, &ContextQuery::Regenerate, 1).unwrap();
        assert_eq!(c.story.lines[0].text, "Kept.");
    }

    #[test]
    fn edit_clears_topic() {
        let g = mock();
        let mut c = ctx();
        execute_query(&g, &mut c, &ContextQuery::Regenerate, 1).unwrap();
        assert!(c.story.lines[4].dominant_topic.is_some());
        execute_query(&g, &mut c, &ContextQuery::EditLine { index: 4, text: "x".into() }, 1).unwrap();
        assert_eq!(c.story.lines[4].dominant_topic, None);
    }

    #[test]
    fn config_validation() {
        let cfg = GeneratorConfig { backend: Backend::Remote, ..Default::default() };
        assert!(matches!(cfg.validate(), Err(ContextError::Config(_))));
        let cfg = GeneratorConfig { sigma: -1.0, ..Default::default() };
        assert!(cfg.validate().is_err());
        assert_eq!(GeneratorConfig::default().build().unwrap().name(), "mock");
    }

    #[test]
    fn query_wire_shape() {
        let q = ContextQuery::EditLine { index: 3, text: "t".into() };
        assert_eq!(serde_json::to_value(&q).unwrap(), serde_json::json!({"type": "edit_line", "index": 3, "text": "t"}));
        assert_eq!(serde_json::to_value(ContextQuery::Regenerate).unwrap(), serde_json::json!({"type": "regenerate"}));
    }
}
