//! The statistics and blend code against independent oracles.

mod common;

use cocreate::context::blend_weights;
use cocreate::metrics::{normal_cdf, student_t_cdf, welch_t_test_less};
use cocreate::{ControlPoint, SketchSpec};
use common::oracles;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn normal_cdf_on_a_fine_grid() {
    let mut worst: f64 = 0.0;
    for i in 0..=120_000 {
        let z = -6.0 + i as f64 * 1e-4;
        worst = worst.max((normal_cdf(z) - oracles::phi(z)).abs());
    }
    assert!(worst < 1e-7, "max error {worst:e}");
}

#[test]
fn t_cdf_against_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..300 {
        let df = rng.random_range(1.0..60.0);
        let t = rng.random_range(-8.0..8.0);
        let got = student_t_cdf(t, df);
        let want = oracles::t_cdf(t, df);
        assert!((got - want).abs() < 1e-9, "t={t} df={df}: {got} vs {want}");
    }
}

#[test]
fn welch_against_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let na = rng.random_range(2..=30);
        let nb = rng.random_range(2..=30);
        let shift = rng.random_range(-3.0..3.0);
        let a: Vec<f64> = (0..na).map(|_| rng.random_range(0.0..10.0)).collect();
        let b: Vec<f64> = (0..nb).map(|_| rng.random_range(0.0..10.0) + shift).collect();
        let got = welch_t_test_less(&a, &b).unwrap();
        let (t, df, p) = oracles::welch_less(&a, &b);
        assert!((got.t - t).abs() < 1e-9);
        assert!((got.df - df).abs() < 1e-9 * df);
        assert!((got.p_value - p).abs() < 1e-6, "{} vs {p}", got.p_value);
    }
}

#[test]
fn welch_worked_example() {
    let r = welch_t_test_less(&[5.0, 6.0, 4.0], &[10.0, 9.0, 8.0]).unwrap();
    let (_, _, p) = oracles::welch_less(&[5.0, 6.0, 4.0], &[10.0, 9.0, 8.0]);
    assert!((r.p_value - p).abs() < 1e-6);
    assert!((r.df - 4.0).abs() < 1e-12);
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

#[test]
fn blend_against_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..1000 {
        let sketch = random_sketch(&mut rng);
        let line = rng.random_range(0..10);
        let got = blend_weights(line, &sketch).unwrap();
        let pts: Vec<_> = sketch.control_points.iter().map(|p| (p.topic.clone(), (p.start + p.end) as f64 / 2.0)).collect();
        let want = oracles::blend(line, &pts, sketch.sigma);
        assert_eq!(got.keys().collect::<Vec<_>>(), want.keys().collect::<Vec<_>>());
        for (k, v) in &want {
            assert!((got[k] - v).abs() < 1e-9, "{k}: {} vs {v}", got[k]);
        }
    }
}

#[test]
fn blend_exact_cases() {
    let single = SketchSpec::new(vec![ControlPoint::new("sports", 2, 6)], 2.0);
    for line in 0..10 {
        assert_eq!(blend_weights(line, &single).unwrap()["sports"], 1.0);
    }
    let sym = SketchSpec::new(vec![ControlPoint::new("a", 2, 2), ControlPoint::new("b", 6, 6)], 1.5);
    let w = blend_weights(4, &sym).unwrap();
    assert_eq!(w["a"], 0.5);
    assert_eq!(w["b"], 0.5);
}
