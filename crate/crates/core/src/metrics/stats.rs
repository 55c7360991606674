//! Distribution functions and the two hypothesis tests used by the analysis.

use serde::{Deserialize, Serialize};

const SQRT_PI: f64 = 1.772_453_850_905_516;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("sample size must be at least {min}, got {got}")]
    TooFewObservations { min: usize, got: usize },
    #[error("rate {0} is outside [0, 1]")]
    BadRate(f64),
    #[error("sample size must be positive")]
    EmptySample,
}

/// Error function, accurate to about 1e-15 absolute.
///
/// Uses the all-positive series `erf(x) = 2/sqrt(pi) e^{-x^2} sum 2^n x^{2n+1} / (2n+1)!!`
/// for `|x| < 3` and the continued fraction for `erfc` beyond.
pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return -erf(-x);
    }
    if x < 3.0 {
        erf_series(x)
    } else {
        1.0 - erfc_cf(x)
    }
}

/// Complementary error function, keeping relative accuracy in the upper tail.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 3.0 {
        1.0 - erf(x)
    } else {
        erfc_cf(x)
    }
}

fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
    }
    2.0 / SQRT_PI * (-x2).exp() * sum
}

/// Lentz evaluation of `erfc(x) = e^{-x^2}/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))`.
fn erfc_cf(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64 / 2.0;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / SQRT_PI / f
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    if z == f64::INFINITY {
        return 1.0;
    }
    if z == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Upper tail `1 - Phi(z)` without cancellation.
pub fn normal_sf(z: f64) -> f64 {
    normal_cdf(-z)
}

const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Gamma(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let series = LANCZOS[1..].iter().enumerate().fold(LANCZOS[0], |acc, (i, c)| acc + c / (x + i as f64 + 1.0));
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + series.ln()
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let front = (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln()).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(x, a, b) / a
    } else {
        1.0 - front * beta_cf(1.0 - x, b, a) / b
    }
}

fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let clamp = |v: f64| if v.abs() < TINY { TINY } else { v };
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 / clamp(1.0 - qab * x / qap);
    let mut h = d;
    for m in 1..10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 / clamp(1.0 + aa * d);
        c = clamp(1.0 + aa / c);
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 / clamp(1.0 + aa * d);
        c = clamp(1.0 + aa / c);
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-15 {
            break;
        }
    }
    h
}

/// CDF of Student's t with `df` (possibly fractional) degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    if t == f64::INFINITY {
        return 1.0;
    }
    if t == f64::NEG_INFINITY {
        return 0.0;
    }
    let tail = 0.5 * regularized_beta(df / (df + t * t), df / 2.0, 0.5);
    if t < 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sided {
    /// H0: p2 <= p1.
    OneSidedGreater,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProportionTestInput {
    pub p1: f64,
    pub n1: u32,
    pub p2: f64,
    pub n2: u32,
    pub sided: Sided,
}

impl ProportionTestInput {
    pub fn from_counts(k1: u32, n1: u32, k2: u32, n2: u32, sided: Sided) -> Self {
        let rate = |k: u32, n: u32| if n == 0 { 0.0 } else { f64::from(k) / f64::from(n) };
        Self { p1: rate(k1, n1), n1, p2: rate(k2, n2), n2, sided }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-proportion z-test of sample 2 against sample 1.
///
/// The default standard error is unpooled, `sqrt(p1(1-p1)/n1 + p2(1-p2)/n2)`;
/// `pooled` uses the common rate instead. When the standard error is zero and
/// the rates agree the p-value is 1.
pub fn two_proportion_z_test(input: &ProportionTestInput, pooled: bool) -> Result<TestResult, StatsError> {
    let ProportionTestInput { p1, n1, p2, n2, sided } = *input;
    for p in [p1, p2] {
        if !(0.0..=1.0).contains(&p) {
            return Err(StatsError::BadRate(p));
        }
    }
    if n1 == 0 || n2 == 0 {
        return Err(StatsError::EmptySample);
    }
    let (n1, n2) = (f64::from(n1), f64::from(n2));
    let var = if pooled {
        let p = (p1 * n1 + p2 * n2) / (n1 + n2);
        p * (1.0 - p) * (1.0 / n1 + 1.0 / n2)
    } else {
        p1 * (1.0 - p1) / n1 + p2 * (1.0 - p2) / n2
    };
    let diff = p2 - p1;
    if var == 0.0 {
        if diff == 0.0 {
            return Ok(TestResult { statistic: 0.0, p_value: 1.0 });
        }
        let z = diff.signum() * f64::INFINITY;
        return Ok(TestResult { statistic: z, p_value: p_from_z(z, sided) });
    }
    let z = diff / var.sqrt();
    Ok(TestResult { statistic: z, p_value: p_from_z(z, sided) })
}

fn p_from_z(z: f64, sided: Sided) -> f64 {
    match sided {
        Sided::OneSidedGreater => normal_sf(z),
        Sided::TwoSided => (2.0 * normal_sf(z.abs())).min(1.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Welch's unequal-variance t-test with Welch–Satterthwaite degrees of
/// freedom. The p-value is one-sided for H0: mean(a) >= mean(b).
pub fn welch_t_test_less(a: &[f64], b: &[f64]) -> Result<WelchResult, StatsError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(StatsError::TooFewObservations { min: 2, got: s.len() });
        }
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let se2 = sa + sb;
    if se2 == 0.0 {
        let diff = ma - mb;
        let (t, p) = if diff == 0.0 {
            (0.0, 0.5)
        } else if diff < 0.0 {
            (f64::NEG_INFINITY, 0.0)
        } else {
            (f64::INFINITY, 1.0)
        };
        return Ok(WelchResult { t, df: f64::NAN, p_value: p });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    Ok(WelchResult { t, df, p_value: student_t_cdf(t, df) })
}
