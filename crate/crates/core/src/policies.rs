//! Action selection: greedy, epsilon-greedy, Boltzmann, and the GLIE schedules.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::Action;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("no action values")]
    Empty,
    #[error("non-finite action value at index {0}")]
    NonFinite(usize),
    #[error("epsilon {0} outside [0, 1]")]
    Epsilon(f64),
    #[error("temperature must be positive, got {0}")]
    Temperature(f64),
}

fn check_values(q: &[f64]) -> Result<(), PolicyError> {
    if q.is_empty() {
        return Err(PolicyError::Empty);
    }
    match q.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(PolicyError::NonFinite(i)),
        None => Ok(()),
    }
}

/// Lowest-index maximiser of `q`.
pub fn greedy_action(q: &[f64]) -> Result<Action, PolicyError> {
    check_values(q)?;
    let mut best = 0;
    for (i, v) in q.iter().enumerate().skip(1) {
        if *v > q[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Lowest-index minimiser of `q`.
pub fn worst_action(q: &[f64]) -> Result<Action, PolicyError> {
    check_values(q)?;
    let mut worst = 0;
    for (i, v) in q.iter().enumerate().skip(1) {
        if *v < q[worst] {
            worst = i;
        }
    }
    Ok(worst)
}

/// With probability `epsilon` a uniformly random action, otherwise [`greedy_action`].
///
/// Always consumes exactly one uniform draw, plus one more when exploring.
pub fn epsilon_greedy_action<R: Rng + ?Sized>(
    q: &[f64],
    epsilon: f64,
    rng: &mut R,
) -> Result<Action, PolicyError> {
    check_values(q)?;
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(PolicyError::Epsilon(epsilon));
    }
    let u: f64 = rng.gen();
    if u < epsilon {
        Ok(rng.gen_range(0..q.len()))
    } else {
        greedy_action(q)
    }
}

/// Softmax probabilities `exp(q_a / T) / sum_b exp(q_b / T)`, computed with max subtraction.
pub fn boltzmann_probabilities(q: &[f64], temperature: f64) -> Result<Vec<f64>, PolicyError> {
    check_values(q)?;
    if !(temperature > 0.0) {
        return Err(PolicyError::Temperature(temperature));
    }
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = q.iter().map(|v| ((v - max) / temperature).exp()).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    Ok(p)
}

pub fn boltzmann_action<R: Rng + ?Sized>(
    q: &[f64],
    temperature: f64,
    rng: &mut R,
) -> Result<Action, PolicyError> {
    let p = boltzmann_probabilities(q, temperature)?;
    Ok(sample(&p, rng))
}

/// Draws an index from a probability vector.
pub fn sample<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> Action {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, v) in p.iter().enumerate() {
        acc += v;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the last partial sum
    p.iter().rposition(|v| *v > 0.0).unwrap_or(p.len() - 1)
}

/// `min(1, 1 / sqrt(n + 1))` for a state visited `n` times.
pub fn glie_epsilon(visits: u64) -> f64 {
    glie_epsilon_with(1.0, visits)
}

pub fn glie_epsilon_with(c: f64, visits: u64) -> f64 {
    (c / ((visits as f64) + 1.0).sqrt()).min(1.0)
}

/// Boltzmann cooling schedule `T_k = 1 / ln(k + 2)`.
pub fn boltzmann_temperature(k: u64) -> f64 {
    1.0 / ((k as f64) + 2.0).ln()
}

/// Behaviour policy as configured for an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PolicySpec {
    Greedy,
    EpsilonGreedy {
        epsilon: f64,
    },
    /// Epsilon-greedy with `epsilon = min(1, c / sqrt(n + 1))`, `n` the state's visit count.
    Glie {
        c: f64,
    },
    /// Fixed temperature, or the `1 / ln(n + 2)` cooling schedule when `None`.
    Boltzmann {
        temperature: Option<f64>,
    },
}

impl PolicySpec {
    pub fn select<R: Rng + ?Sized>(
        &self,
        q: &[f64],
        visits: u64,
        rng: &mut R,
    ) -> Result<Action, PolicyError> {
        match *self {
            PolicySpec::Greedy => greedy_action(q),
            PolicySpec::EpsilonGreedy { epsilon } => epsilon_greedy_action(q, epsilon, rng),
            PolicySpec::Glie { c } => epsilon_greedy_action(q, glie_epsilon_with(c, visits), rng),
            PolicySpec::Boltzmann { temperature } => boltzmann_action(
                q,
                temperature.unwrap_or_else(|| boltzmann_temperature(visits)),
                rng,
            ),
        }
    }

    /// Action distribution `pi(s, .)` that [`PolicySpec::select`] samples from.
    pub fn probabilities(&self, q: &[f64], visits: u64) -> Result<Vec<f64>, PolicyError> {
        let eps_greedy = |epsilon: f64| -> Result<Vec<f64>, PolicyError> {
            if !(0.0..=1.0).contains(&epsilon) {
                return Err(PolicyError::Epsilon(epsilon));
            }
            let best = greedy_action(q)?;
            let mut p = vec![epsilon / q.len() as f64; q.len()];
            p[best] += 1.0 - epsilon;
            Ok(p)
        };
        match *self {
            PolicySpec::Greedy => eps_greedy(0.0),
            PolicySpec::EpsilonGreedy { epsilon } => eps_greedy(epsilon),
            PolicySpec::Glie { c } => eps_greedy(glie_epsilon_with(c, visits)),
            PolicySpec::Boltzmann { temperature } => boltzmann_probabilities(
                q,
                temperature.unwrap_or_else(|| boltzmann_temperature(visits)),
            ),
        }
    }
}
