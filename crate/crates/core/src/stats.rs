//! Area under learning curves, one-way ANOVA and the regularized incomplete beta function.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const LENTZ_MAX_ITER: usize = 200;
const LENTZ_FLOOR: f64 = 1e-300;
const LENTZ_EPS: f64 = 1e-16;

/// p-values below this are printed as `< 1e-15`.
pub const P_DISPLAY_FLOOR: f64 = 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("x = {0} outside [0, 1]")]
    XOutOfRange(f64),
    #[error("shape parameters must be positive, got a = {a}, b = {b}")]
    Shape { a: f64, b: f64 },
    #[error("continued fraction failed to converge for x = {x}, a = {a}, b = {b}")]
    NoConvergence { x: f64, a: f64, b: f64 },
    #[error("ANOVA needs at least 2 groups, got {0}")]
    TooFewGroups(usize),
    #[error("group {group} has {size} samples; at least 2 are required")]
    GroupTooSmall { group: usize, size: usize },
    #[error("non-finite sample in group {0}")]
    NonFinite(usize),
    #[error("degenerate input: every sample is identical, so F is undefined")]
    Degenerate,
}

/// Total reward of a learning curve (unit episode spacing).
pub fn auc(curve: &[f64]) -> f64 {
    curve.iter().sum()
}

/// Natural log of the gamma function (Lanczos, g = 7, n = 9), for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
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
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let mut sum = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        sum += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + sum.ln()
}

/// Continued fraction for `I_x(a, b)` by the modified Lentz method.
fn beta_cf(x: f64, a: f64, b: f64) -> Result<f64, StatsError> {
    let floor = |v: f64| {
        if v.abs() < LENTZ_FLOOR {
            LENTZ_FLOOR
        } else {
            v
        }
    };
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 / floor(1.0 - qab * x / qap);
    let mut h = d;
    for m in 1..=LENTZ_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let even = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 / floor(1.0 + even * d);
        c = floor(1.0 + even / c);
        h *= d * c;
        let odd = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 / floor(1.0 + odd * d);
        c = floor(1.0 + odd / c);
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < LENTZ_EPS {
            return Ok(h);
        }
    }
    Err(StatsError::NoConvergence { x, a, b })
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> Result<f64, StatsError> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(StatsError::Shape { a, b });
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(StatsError::XOutOfRange(x));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(x);
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x > (a + 1.0) / (a + b + 2.0) {
        Ok(1.0 - front * beta_cf(1.0 - x, b, a)? / b)
    } else {
        Ok(front * beta_cf(x, a, b)? / a)
    }
}

/// Upper tail `P(F > f)` of the F distribution with `(d1, d2)` degrees of freedom.
pub fn f_survival(f: f64, d1: f64, d2: f64) -> Result<f64, StatsError> {
    if f <= 0.0 {
        return Ok(1.0);
    }
    if f.is_infinite() {
        return Ok(0.0);
    }
    reg_inc_beta(d2 / (d2 + d1 * f), d2 / 2.0, d1 / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub f: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p_value: f64,
    /// Set when every group is constant but the groups differ, so `F` is infinite.
    pub separated: bool,
}

impl AnovaResult {
    /// `anova,F,df1,df2,p` with the raw p-value.
    pub fn csv_line(&self) -> String {
        format!(
            "anova,{},{},{},{}",
            self.f, self.df_between, self.df_within, self.p_value
        )
    }
}

/// Formats a p-value, printing `< 1e-15` below the display floor.
pub fn format_p(p: f64) -> String {
    if p < P_DISPLAY_FLOOR {
        "< 1e-15".to_string()
    } else {
        format!("{p:.6e}")
    }
}

impl fmt::Display for AnovaResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "F({}, {}) = {:.4}, p {}",
            self.df_between,
            self.df_within,
            self.f,
            match format_p(self.p_value) {
                s if s.starts_with('<') => s,
                s => format!("= {s}"),
            }
        )?;
        if self.separated {
            write!(f, " (exactly separated groups)")?;
        }
        Ok(())
    }
}

/// One-way ANOVA across `groups`.
pub fn one_way_anova<G: AsRef<[f64]>>(groups: &[G]) -> Result<AnovaResult, StatsError> {
    let k = groups.len();
    if k < 2 {
        return Err(StatsError::TooFewGroups(k));
    }
    for (i, g) in groups.iter().enumerate() {
        let g = g.as_ref();
        if g.len() < 2 {
            return Err(StatsError::GroupTooSmall {
                group: i,
                size: g.len(),
            });
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite(i));
        }
    }
    // centring on one sample makes F exactly invariant to common shifts of integer data
    let origin = groups[0].as_ref()[0];
    let centred: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| g.as_ref().iter().map(|v| v - origin).collect())
        .collect();
    let groups = &centred;
    let n: usize = groups.iter().map(|g| g.len()).sum();
    let means: Vec<f64> = groups.iter().map(|g| mean(g)).collect();
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let ssb: f64 = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.len() as f64 * (m - grand).powi(2))
        .sum();
    let ssw: f64 = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.iter().map(|v| (v - m).powi(2)).sum::<f64>())
        .sum();
    let (df_between, df_within) = (k - 1, n - k);
    if ssw == 0.0 {
        if ssb == 0.0 {
            return Err(StatsError::Degenerate);
        }
        return Ok(AnovaResult {
            f: f64::INFINITY,
            df_between,
            df_within,
            p_value: 0.0,
            separated: true,
        });
    }
    let f = (ssb / df_between as f64) / (ssw / df_within as f64);
    let p_value = f_survival(f, df_between as f64, df_within as f64)?;
    Ok(AnovaResult {
        f,
        df_between,
        df_within,
        p_value,
        separated: false,
    })
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (`n - 1` denominator); 0 for fewer than two samples.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}
