//! Gaussian-kernel topic blending over line positions.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::model::SketchSpec;

use super::ContextError;

/// Per-topic weights for one line. Each control point contributes
/// `exp(-(line - center)^2 / (2 sigma^2))`; contributions are normalized to
/// sum to one and then summed per topic.
pub fn blend_weights(line_index: usize, sketch: &SketchSpec) -> Result<BTreeMap<String, f64>, ContextError> {
    if sketch.control_points.is_empty() {
        return Err(ContextError::NoControlSignal);
    }
    let two_var = 2.0 * sketch.sigma * sketch.sigma;
    let x = line_index as f64;
    let log_raw: Vec<f64> = sketch
        .control_points
        .iter()
        .map(|p| {
            let d = x - p.center();
            -(d * d) / two_var
        })
        .collect();
    // Shift by the max exponent so far-away lines with a narrow spread do not
    // underflow every term to zero.
    let max = log_raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = log_raw.iter().map(|l| (l - max).exp()).collect();
    let mut weights: BTreeMap<String, f64> = BTreeMap::new();
    for (point, r) in sketch.control_points.iter().zip(raw) {
        *weights.entry(point.topic.clone()).or_insert(0.0) += r;
    }
    // Normalize per-topic sums, so a topic's share never exceeds one.
    let total: f64 = weights.values().sum();
    for w in weights.values_mut() {
        *w /= total;
    }
    Ok(weights)
}

/// Topic with the largest blended weight at `line_index`, or `None` for an
/// empty sketch. Ties go to the topic with the lowest control-point center,
/// then to the lexicographically smaller topic.
pub fn dominant_topic(line_index: usize, sketch: &SketchSpec) -> Option<String> {
    let weights = blend_weights(line_index, sketch).ok()?;
    let lowest_center =
        |topic: &str| sketch.control_points.iter().filter(|p| p.topic == topic).map(|p| p.center()).fold(f64::INFINITY, f64::min);
    weights
        .iter()
        .max_by(|(ta, wa), (tb, wb)| {
            wa.partial_cmp(wb)
                .unwrap_or(Ordering::Equal)
                // Reversed: on a max search the "greater" element wins, and we
                // want the lower center and the smaller topic to win.
                .then_with(|| lowest_center(tb).total_cmp(&lowest_center(ta)))
                .then_with(|| tb.cmp(ta))
        })
        .map(|(t, _)| t.clone())
}
