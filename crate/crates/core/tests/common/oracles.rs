//! Independent reference computations, shared by the core tests and the
//! acceptance target. Nothing here calls into the crate under test.

#![allow(dead_code)]

use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

/// Standard normal CDF from statrs' complementary error function.
pub fn phi(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Student-t density.
pub fn t_density(x: f64, df: f64) -> f64 {
    let log_norm = ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0) - 0.5 * (df * std::f64::consts::PI).ln();
    (log_norm - (df + 1.0) / 2.0 * (1.0 + x * x / df).ln()).exp()
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    adaptive(f, a, b, fa, fm, fb, whole, 1e-13, 50)
}

/// Student-t CDF by integrating the density from 0 (the distribution is symmetric).
pub fn t_cdf(t: f64, df: f64) -> f64 {
    let half = integrate(&|x| t_density(x, df), 0.0, t.abs());
    if t < 0.0 {
        0.5 - half
    } else {
        0.5 + half
    }
}

/// Welch test for H0: mean(a) >= mean(b), written out from the textbook formulas.
pub fn welch_less(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let stats = |s: &[f64]| {
        let n = s.len() as f64;
        let mean = s.iter().sum::<f64>() / n;
        let var = s.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        (n, mean, var)
    };
    let (na, ma, va) = stats(a);
    let (nb, mb, vb) = stats(b);
    let se2 = va / na + vb / nb;
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / ((va / na).powi(2) / (na - 1.0) + (vb / nb).powi(2) / (nb - 1.0));
    (t, df, t_cdf(t, df))
}

/// Blend weights straight from the definition, without any rescaling.
pub fn blend(line: usize, points: &[(String, f64)], sigma: f64) -> std::collections::BTreeMap<String, f64> {
    let x = line as f64;
    let raw: Vec<f64> = points.iter().map(|(_, c)| (-(x - c).powi(2) / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = raw.iter().sum();
    let mut out = std::collections::BTreeMap::new();
    for ((topic, _), r) in points.iter().zip(raw) {
        *out.entry(topic.clone()).or_insert(0.0) += r / total;
    }
    out
}
