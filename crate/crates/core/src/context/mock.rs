//! Deterministic stand-in generator.
//!
//! Every line is labelled with its dominant sketch topic and one word picked
//! from a fixed vocabulary by hashing the session seed, the salt, the
//! generation counter, the line index and the topic.

use crate::model::{ContextState, Line, SketchSpec};

use super::blend::dominant_topic;
use super::{ContextError, Generator};

/// Topic used when the sketch is empty.
pub const GENERIC_TOPIC: &str = "generic";

pub const VOCABULARY: [&str; 64] = [
    "harbor", "ledger", "meadow", "signal", "lantern", "orchard", "engine", "willow", "market", "stadium", "compass", "thunder", "velvet",
    "canyon", "quarry", "beacon", "garden", "pillar", "ribbon", "summit", "tunnel", "anchor", "bridge", "candle", "desert", "ember",
    "falcon", "glacier", "hammer", "island", "jungle", "kettle", "ladder", "mirror", "needle", "ocean", "pencil", "quiver", "rocket",
    "saddle", "ticket", "umbrella", "valley", "wagon", "yonder", "zephyr", "archive", "banner", "cellar", "dragon", "fabric", "goblet",
    "helmet", "insight", "jigsaw", "kernel", "lagoon", "marble", "nectar", "outpost", "parcel", "riddle", "shadow", "trophy",
];

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(mut hash: u64, bytes: &[u8]) -> u64 {
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

fn word_index(session_seed: u64, salt: u64, generation: u64, line_index: usize, topic: &str) -> usize {
    let mut h = FNV_OFFSET;
    h = fnv1a(h, &session_seed.to_le_bytes());
    h = fnv1a(h, &salt.to_le_bytes());
    h = fnv1a(h, &generation.to_le_bytes());
    h = fnv1a(h, &(line_index as u64).to_le_bytes());
    h = fnv1a(h, topic.as_bytes());
    (h % VOCABULARY.len() as u64) as usize
}

/// Generate one line. Pure function of its arguments. The prompt is not an
/// input here: the creative context writes it over line 0 itself.
pub fn mock_generate_line(line_index: usize, sketch: &SketchSpec, session_seed: u64, salt: u64, generation: u64) -> Line {
    let topic = dominant_topic(line_index, sketch).unwrap_or_else(|| GENERIC_TOPIC.to_string());
    let word = VOCABULARY[word_index(session_seed, salt, generation, line_index, &topic)];
    Line { index: line_index, text: format!("[{topic}] {word}"), frozen: false, dominant_topic: Some(topic) }
}

#[derive(Debug, Clone, Default)]
pub struct MockGenerator {
    pub salt: u64,
}

impl MockGenerator {
    pub fn new(salt: u64) -> Self {
        Self { salt }
    }
}

impl Generator for MockGenerator {
    fn generate(&self, ctx: &ContextState, session_seed: u64, generation: u64) -> Result<Vec<Line>, ContextError> {
        Ok((0..ctx.story.num_lines()).map(|i| mock_generate_line(i, &ctx.sketch, session_seed, self.salt, generation)).collect())
    }

    fn name(&self) -> &'static str {
        "mock"
    }
}
