//! Exact solution of finite MDPs by value iteration.

use thiserror::Error;

use crate::env::{Action, FiniteMdp};
use crate::learners::QTable;
use crate::policies::greedy_action;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_ITERATION_CAP: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("discount {0} outside [0, 1]")]
    Discount(f64),
    #[error("tolerance must be positive and finite, got {0}")]
    Tolerance(f64),
    #[error("MDP contains a non-finite reward or probability")]
    NonFinite,
    #[error("value iteration did not reach tolerance {tol:e} within {iterations} sweeps (residual {residual:e})")]
    NotConverged {
        iterations: u64,
        residual: f64,
        tol: f64,
    },
}

/// Output of [`value_iteration`].
#[derive(Debug, Clone)]
pub struct OptimalQ {
    pub q: QTable,
    pub iterations: u64,
    /// Sup-norm Bellman residual `||TQ - Q||_inf` of the returned table.
    pub residual: f64,
}

fn backup(mdp: &FiniteMdp, gamma: f64, q: &QTable, out: &mut QTable) {
    for s in 0..mdp.num_states() {
        for a in 0..mdp.num_actions() {
            let v = if mdp.is_terminal(s) {
                0.0
            } else {
                mdp.outcomes(s, a)
                    .iter()
                    .map(|o| {
                        let next = if mdp.is_terminal(o.next_state) {
                            0.0
                        } else {
                            q.row(o.next_state)
                                .iter()
                                .copied()
                                .fold(f64::NEG_INFINITY, f64::max)
                        };
                        o.probability * (o.reward + gamma * next)
                    })
                    .sum()
            };
            out.set(s, a, v);
        }
    }
}

fn sup_diff(a: &QTable, b: &QTable) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Value iteration with synchronous sweeps, using the default iteration cap.
pub fn value_iteration(mdp: &FiniteMdp, gamma: f64, tol: f64) -> Result<OptimalQ, OracleError> {
    value_iteration_capped(mdp, gamma, tol, DEFAULT_ITERATION_CAP)
}

/// Value iteration with synchronous sweeps until the Bellman residual of the
/// returned table is at most `tol`.
///
/// Sweeping stops once the change between sweeps is below
/// `tol * min(1, (1 - gamma) / gamma)`, which bounds the next residual by `tol`
/// through the contraction property; the residual is then measured directly.
/// For `gamma = 1` the MDP must be proper and the raw change is used.
pub fn value_iteration_capped(
    mdp: &FiniteMdp,
    gamma: f64,
    tol: f64,
    cap: u64,
) -> Result<OptimalQ, OracleError> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(OracleError::Discount(gamma));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(OracleError::Tolerance(tol));
    }
    for s in 0..mdp.num_states() {
        for a in 0..mdp.num_actions() {
            if mdp
                .outcomes(s, a)
                .iter()
                .any(|o| !o.reward.is_finite() || !o.probability.is_finite())
            {
                return Err(OracleError::NonFinite);
            }
        }
    }
    let threshold = if gamma < 1.0 && gamma > 0.0 {
        tol * ((1.0 - gamma) / gamma).min(1.0)
    } else {
        tol
    };
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let mut q = QTable::new(ns, na);
    let mut next = QTable::new(ns, na);
    let mut iterations = 0;
    loop {
        backup(mdp, gamma, &q, &mut next);
        iterations += 1;
        let delta = sup_diff(&q, &next);
        std::mem::swap(&mut q, &mut next);
        if !delta.is_finite() {
            return Err(OracleError::NonFinite);
        }
        if delta <= threshold {
            backup(mdp, gamma, &q, &mut next);
            let residual = sup_diff(&q, &next);
            if residual <= tol {
                return Ok(OptimalQ {
                    q,
                    iterations,
                    residual,
                });
            }
        }
        if iterations >= cap {
            backup(mdp, gamma, &q, &mut next);
            return Err(OracleError::NotConverged {
                iterations,
                residual: sup_diff(&q, &next),
                tol,
            });
        }
    }
}

/// Lowest-index argmax of every row.
pub fn greedy_policy_of(q: &QTable) -> Vec<Action> {
    (0..q.num_states())
        .map(|s| greedy_action(q.row(s)).expect("Q table rows are finite and non-empty"))
        .collect()
}
