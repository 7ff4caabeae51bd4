//! Empirical check of the linear-FA Q-learning convergence condition
//! `Sigma_pi - gamma^2 * Sigma*_pi(theta) > 0`.

use std::collections::HashMap;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::env::{EnvError, Environment};
use crate::features::FeatureMap;
use crate::policies::{PolicyError, PolicySpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssumptionError {
    #[error("sample count {samples} is below the minimum 10 * d^2 = {minimum}")]
    TooFewSamples { samples: usize, minimum: usize },
    #[error("behaviour policy gives action {action} zero probability in a visited state")]
    ZeroProbabilityAction { action: usize },
    #[error("probe {index} has dimension {found}, expected {expected}")]
    ProbeDimension {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("behaviour weights have dimension {found}, expected {expected}")]
    BehaviourDimension { expected: usize, found: usize },
    #[error("discount {0} outside [0, 1]")]
    Discount(f64),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub theta: Vec<f64>,
    /// Row-major `d x d` estimate of `Sigma*_pi(theta)`.
    pub sigma_star: Vec<Vec<f64>>,
    pub min_eigenvalue: f64,
    /// `min_eigenvalue` exceeds the rank tolerance `d * eps * lambda_max(Sigma_pi)`.
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub dim: usize,
    pub gamma: f64,
    pub samples: usize,
    /// Row-major `d x d` estimate of `Sigma_pi = E[phi phi^T]` under the behaviour policy.
    pub sigma_pi: Vec<Vec<f64>>,
    pub probes: Vec<ProbeReport>,
    /// Total-variation distance between the empirical `(s, a)` feature
    /// distributions of the two halves of the rollout; near 0 for a well-mixed chain.
    pub mixing_tv: f64,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.probes.iter().all(|p| p.pass)
    }
}

fn write_matrix(f: &mut fmt::Formatter<'_>, name: &str, m: &[Vec<f64>]) -> fmt::Result {
    writeln!(f, "{name}:")?;
    for row in m {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
        writeln!(f, "  {}", cells.join(" "))?;
    }
    Ok(())
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dim: {}", self.dim)?;
        writeln!(f, "gamma: {}", self.gamma)?;
        writeln!(f, "samples: {}", self.samples)?;
        writeln!(f, "mixing_tv: {:.6}", self.mixing_tv)?;
        write_matrix(f, "sigma_pi", &self.sigma_pi)?;
        for (i, p) in self.probes.iter().enumerate() {
            let theta: Vec<String> = p.theta.iter().map(|v| format!("{v:.6}")).collect();
            writeln!(f, "probe {i}:")?;
            writeln!(f, "  theta: {}", theta.join(" "))?;
            writeln!(f, "  min_eigenvalue: {:.6e}", p.min_eigenvalue)?;
            writeln!(f, "  verdict: {}", if p.pass { "pass" } else { "fail" })?;
            write_matrix(f, "  sigma_star", &p.sigma_star)?;
        }
        write!(
            f,
            "overall: {}",
            if self.all_pass() { "pass" } else { "fail" }
        )
    }
}

fn add_outer(acc: &mut DMatrix<f64>, phi: &[f64], weight: f64) {
    let d = phi.len();
    for i in 0..d {
        if phi[i] == 0.0 {
            continue;
        }
        for j in 0..d {
            acc[(i, j)] += weight * phi[i] * phi[j];
        }
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// Quantized feature vector used as a histogram key for the mixing estimate.
fn key(phi: &[f64]) -> Vec<i64> {
    phi.iter().map(|v| (v * 1e6).round() as i64).collect()
}

fn total_variation(
    a: &HashMap<Vec<i64>, usize>,
    na: usize,
    b: &HashMap<Vec<i64>, usize>,
    nb: usize,
) -> f64 {
    let mut tv = 0.0;
    for (k, ca) in a {
        let cb = b.get(k).copied().unwrap_or(0);
        tv += (*ca as f64 / na as f64 - cb as f64 / nb as f64).abs();
    }
    for (k, cb) in b {
        if !a.contains_key(k) {
            tv += *cb as f64 / nb as f64;
        }
    }
    tv / 2.0
}

/// Estimates `Sigma_pi` from an on-policy rollout of `sample_count` steps and,
/// for each probe `theta`, `Sigma*_pi(theta)` from the same visited states with
/// actions taken greedily with respect to `theta` (ties averaged). The
/// behaviour policy is `policy` applied to `behaviour_theta^T phi`.
///
/// The environment is reset whenever an episode ends.
#[allow(clippy::too_many_arguments)]
pub fn check_fa_assumptions<E, F, R>(
    env: &mut E,
    policy: &PolicySpec,
    features: &F,
    behaviour_theta: &[f64],
    gamma: f64,
    probes: &[Vec<f64>],
    sample_count: usize,
    rng: &mut R,
) -> Result<AssumptionReport, AssumptionError>
where
    E: Environment,
    F: FeatureMap<E::State>,
    R: Rng,
{
    let d = features.dim();
    let na = features.num_actions();
    let minimum = 10 * d * d;
    if sample_count < minimum {
        return Err(AssumptionError::TooFewSamples {
            samples: sample_count,
            minimum,
        });
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(AssumptionError::Discount(gamma));
    }
    if behaviour_theta.len() != d {
        return Err(AssumptionError::BehaviourDimension {
            expected: d,
            found: behaviour_theta.len(),
        });
    }
    for (index, p) in probes.iter().enumerate() {
        if p.len() != d {
            return Err(AssumptionError::ProbeDimension {
                index,
                expected: d,
                found: p.len(),
            });
        }
    }

    let dot = |theta: &[f64], phi: &[f64]| theta.iter().zip(phi).map(|(t, p)| t * p).sum::<f64>();
    let mut sigma = DMatrix::<f64>::zeros(d, d);
    let mut stars = vec![DMatrix::<f64>::zeros(d, d); probes.len()];
    let mut halves = [HashMap::new(), HashMap::new()];
    let mut phis = vec![vec![0.0; d]; na];
    let mut q = vec![0.0; na];

    let mut state = env.reset(rng);
    let mut visits: u64 = 0;
    for t in 0..sample_count {
        if env.is_terminal(&state) {
            state = env.reset(rng);
        }
        for (a, phi) in phis.iter_mut().enumerate() {
            features.features_into(&state, a, phi);
            q[a] = dot(behaviour_theta, phi);
        }
        let probs = policy.probabilities(&q, visits)?;
        if let Some(action) = probs.iter().position(|p| *p <= 0.0) {
            return Err(AssumptionError::ZeroProbabilityAction { action });
        }
        let action = policy.select(&q, visits, rng)?;
        visits += 1;

        add_outer(&mut sigma, &phis[action], 1.0);
        *halves[usize::from(2 * t >= sample_count)]
            .entry(key(&phis[action]))
            .or_insert(0usize) += 1;

        for (theta, star) in probes.iter().zip(stars.iter_mut()) {
            let values: Vec<f64> = phis.iter().map(|phi| dot(theta, phi)).collect();
            let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let ties: Vec<usize> = (0..na).filter(|a| values[*a] == best).collect();
            let w = 1.0 / ties.len() as f64;
            for a in ties {
                add_outer(star, &phis[a], w);
            }
        }

        state = env.step(action, rng)?.next_state;
    }

    let n = sample_count as f64;
    sigma /= n;
    // rank tolerance: eigenvalues below d * eps * lambda_max are rounding noise
    let sigma_scale = SymmetricEigen::new(sigma.clone())
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let tolerance = d as f64 * f64::EPSILON * sigma_scale;
    let mut reports = Vec::with_capacity(probes.len());
    for (theta, mut star) in probes.iter().zip(stars) {
        star /= n;
        let diff = &sigma - &star * (gamma * gamma);
        // symmetrise away accumulated rounding before the eigen-solve
        let diff = (&diff + diff.transpose()) * 0.5;
        let min_eigenvalue = SymmetricEigen::new(diff)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        reports.push(ProbeReport {
            theta: theta.clone(),
            sigma_star: rows(&star),
            min_eigenvalue,
            pass: min_eigenvalue > tolerance,
        });
    }
    let first = sample_count.div_ceil(2);
    let mixing_tv = total_variation(&halves[0], first, &halves[1], sample_count - first);
    Ok(AssumptionReport {
        dim: d,
        gamma,
        samples: sample_count,
        sigma_pi: rows(&sigma),
        probes: reports,
        mixing_tv,
    })
}
