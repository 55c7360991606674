//! Client for an external generator speaking the `/generate` JSON contract.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::model::{ContextState, Line};

use super::{ContextError, Generator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireControlPoint {
    pub topic: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub prompt: Option<String>,
    pub num_lines: usize,
    pub sketch: Vec<WireControlPoint>,
    pub frozen: Vec<usize>,
}

impl GenerateRequest {
    pub fn from_context(ctx: &ContextState) -> Self {
        Self {
            prompt: ctx.prompt.clone(),
            num_lines: ctx.story.num_lines(),
            sketch: ctx
                .sketch
                .control_points
                .iter()
                .map(|p| WireControlPoint { topic: p.topic.clone(), start: p.start, end: p.end })
                .collect(),
            frozen: ctx.story.frozen_indices(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub lines: Vec<String>,
}

pub struct RemoteGenerator {
    endpoint: String,
    agent: ureq::Agent,
}

impl std::fmt::Debug for RemoteGenerator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteGenerator").field("endpoint", &self.endpoint).finish()
    }
}

impl RemoteGenerator {
    pub fn new(base_url: &str, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().new_agent();
        Self { endpoint: format!("{}/generate", base_url.trim_end_matches('/')), agent }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    /// Issues one POST and returns exactly `num_lines` texts.
    pub fn remote_generate(&self, request: &GenerateRequest) -> Result<Vec<String>, ContextError> {
        let unavailable = |e: ureq::Error| ContextError::GeneratorUnavailable(e.to_string());
        let mut response = self.agent.post(&self.endpoint).send_json(request).map_err(unavailable)?;
        let body: GenerateResponse = response.body_mut().read_json().map_err(unavailable)?;
        if body.lines.len() != request.num_lines {
            return Err(ContextError::ProtocolViolation { expected: request.num_lines, got: body.lines.len() });
        }
        Ok(body.lines)
    }
}

impl Generator for RemoteGenerator {
    fn generate(&self, ctx: &ContextState, _session_seed: u64, _generation: u64) -> Result<Vec<Line>, ContextError> {
        let texts = self.remote_generate(&GenerateRequest::from_context(ctx))?;
        Ok(texts.into_iter().enumerate().map(|(index, text)| Line { index, text, frozen: false, dominant_topic: None }).collect())
    }

    fn name(&self) -> &'static str {
        "remote"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ControlPoint;

    #[test]
    fn request_wire_shape() {
        let mut ctx = ContextState::new(10, 2.0);
        ctx.sketch.control_points.push(ControlPoint::new("sports", 5, 9));
        ctx.story.lines[2].frozen = true;
        let v = serde_json::to_value(GenerateRequest::from_context(&ctx)).unwrap();
        assert_eq!(
            v,
            serde_json::json!({
                "prompt": null,
                "num_lines": 10,
                "sketch": [{"topic": "sports", "start": 5, "end": 9}],
                "frozen": [2]
            })
        );
    }

    #[test]
    fn endpoint_joins_path() {
        let g = RemoteGenerator::new("http://127.0.0.1:9/", Duration::from_secs(1));
        assert_eq!(g.endpoint(), "http://127.0.0.1:9/generate");
    }
}
