//! Tabular and linear Q-learning / Sarsa updates.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Action, Transition};
use crate::features::FeatureMap;

pub const DEFAULT_DIVERGENCE_BOUND: f64 = 1e6;
pub const DEFAULT_POWER_DECAY_EXPONENT: f64 = 0.8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnerError {
    #[error("step size {0} outside [0, 1]")]
    StepSize(f64),
    #[error("discount {0} outside [0, 1]")]
    Discount(f64),
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("state {state} out of range ({num_states} states)")]
    StateOutOfRange { state: usize, num_states: usize },
    #[error("action {action} out of range ({num_actions} actions)")]
    ActionOutOfRange { action: Action, num_actions: usize },
    #[error("feature dimension {found} does not match weight dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("on-policy update needs the next action for a non-terminal transition")]
    MissingNextAction,
    #[error("weights diverged: max |theta_i| = {norm:e} exceeds bound {bound:e}")]
    Diverged { norm: f64, bound: f64 },
    #[error("malformed snapshot: {0}")]
    Snapshot(String),
}

/// Temporal-difference error of one update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdError(pub f64);

/// Step-size sequence `alpha_t(s, a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepSizeSchedule {
    Constant(f64),
    /// `alpha = 1 / (1 + n)^omega` where `n` counts earlier updates of the pair.
    /// For `omega` in (0.5, 1] this satisfies the Robbins-Monro conditions.
    PowerDecay(f64),
}

impl StepSizeSchedule {
    pub fn alpha(&self, visits: u64) -> f64 {
        match *self {
            StepSizeSchedule::Constant(a) => a,
            StepSizeSchedule::PowerDecay(omega) => (1.0 + visits as f64).powf(-omega),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UpdateRule {
    /// Off-policy: bootstraps on `max_a' Q(s', a')`.
    QLearning,
    /// On-policy: bootstraps on `Q(s', a')` for the action actually executed next.
    Sarsa,
}

fn check_step(alpha: f64, gamma: f64, reward: f64) -> Result<(), LearnerError> {
    if !alpha.is_finite() {
        return Err(LearnerError::NonFinite("step size"));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(LearnerError::StepSize(alpha));
    }
    if !gamma.is_finite() {
        return Err(LearnerError::NonFinite("discount"));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(LearnerError::Discount(gamma));
    }
    if !reward.is_finite() {
        return Err(LearnerError::NonFinite("reward"));
    }
    Ok(())
}

/// Dense `|S| x |A|` table of Q estimates with per-pair visit counters.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
    visits: Vec<u64>,
}

impl QTable {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        Self::filled(num_states, num_actions, 0.0)
    }

    pub fn filled(num_states: usize, num_actions: usize, value: f64) -> Self {
        Self {
            num_states,
            num_actions,
            values: vec![value; num_states * num_actions],
            visits: vec![0; num_states * num_actions],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let num_states = rows.len();
        let num_actions = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == num_actions), "ragged Q rows");
        Self {
            num_states,
            num_actions,
            values: rows.into_iter().flatten().collect(),
            visits: vec![0; num_states * num_actions],
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn get(&self, state: usize, action: Action) -> f64 {
        self.values[state * self.num_actions + action]
    }

    pub fn set(&mut self, state: usize, action: Action, value: f64) {
        self.values[state * self.num_actions + action] = value;
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.values[state * self.num_actions..(state + 1) * self.num_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn visits(&self, state: usize, action: Action) -> u64 {
        self.visits[state * self.num_actions + action]
    }

    pub fn state_visits(&self, state: usize) -> u64 {
        self.visits[state * self.num_actions..(state + 1) * self.num_actions]
            .iter()
            .sum()
    }

    fn max_value(&self, state: usize) -> f64 {
        self.row(state)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn check_pair(&self, state: usize, action: Action) -> Result<(), LearnerError> {
        if state >= self.num_states {
            return Err(LearnerError::StateOutOfRange {
                state,
                num_states: self.num_states,
            });
        }
        if action >= self.num_actions {
            return Err(LearnerError::ActionOutOfRange {
                action,
                num_actions: self.num_actions,
            });
        }
        Ok(())
    }

    fn apply(
        &mut self,
        tr: &Transition<usize>,
        bootstrap: f64,
        alpha: f64,
        gamma: f64,
    ) -> Result<TdError, LearnerError> {
        let idx = tr.state * self.num_actions + tr.action;
        let td = tr.reward + gamma * bootstrap - self.values[idx];
        let updated = self.values[idx] + alpha * td;
        if !updated.is_finite() {
            return Err(LearnerError::NonFinite("Q value"));
        }
        self.values[idx] = updated;
        self.visits[idx] += 1;
        Ok(TdError(td))
    }

    /// `Q(s,a) += alpha * (r + gamma * max_a' Q(s',a') - Q(s,a))`; terminal `s'` bootstraps 0.
    pub fn q_update(
        &mut self,
        tr: &Transition<usize>,
        alpha: f64,
        gamma: f64,
    ) -> Result<TdError, LearnerError> {
        check_step(alpha, gamma, tr.reward)?;
        self.check_pair(tr.state, tr.action)?;
        let bootstrap = if tr.done {
            0.0
        } else {
            self.check_pair(tr.next_state, 0)?;
            self.max_value(tr.next_state)
        };
        self.apply(tr, bootstrap, alpha, gamma)
    }

    /// `Q(s,a) += alpha * (r + gamma * Q(s',a') - Q(s,a))` with `a'` the executed next action.
    pub fn sarsa_update(
        &mut self,
        tr: &Transition<usize>,
        next_action: Option<Action>,
        alpha: f64,
        gamma: f64,
    ) -> Result<TdError, LearnerError> {
        check_step(alpha, gamma, tr.reward)?;
        self.check_pair(tr.state, tr.action)?;
        let bootstrap = if tr.done {
            0.0
        } else {
            let a = next_action.ok_or(LearnerError::MissingNextAction)?;
            self.check_pair(tr.next_state, a)?;
            self.get(tr.next_state, a)
        };
        self.apply(tr, bootstrap, alpha, gamma)
    }

    /// CSV snapshot: header `state,a0,a1,...`, one row per state.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let header: Vec<String> = (0..self.num_actions).map(|a| format!("a{a}")).collect();
        writeln!(out, "state,{}", header.join(","))?;
        for s in 0..self.num_states {
            let row: Vec<String> = self.row(s).iter().map(|v| v.to_string()).collect();
            writeln!(out, "{s},{}", row.join(","))?;
        }
        Ok(())
    }

    /// Reads a snapshot written by [`QTable::write_csv`]; `#` comment lines are skipped.
    pub fn read_csv<R: BufRead>(input: R) -> Result<QTable, LearnerError> {
        let bad = |m: String| LearnerError::Snapshot(m);
        let mut rows = Vec::new();
        let mut header_seen = false;
        for (n, line) in input.lines().enumerate() {
            let line = line.map_err(|e| bad(e.to_string()))?;
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            if !header_seen {
                header_seen = true;
                continue;
            }
            let mut fields = line.split(',');
            let state: usize = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| bad(format!("line {}: bad state index", n + 1)))?;
            if state != rows.len() {
                return Err(bad(format!(
                    "line {}: expected state {}, found {state}",
                    n + 1,
                    rows.len()
                )));
            }
            let row = fields
                .map(|f| f.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| bad(format!("line {}: {e}", n + 1)))?;
            rows.push(row);
        }
        if rows.is_empty()
            || rows
                .iter()
                .any(|r| r.len() != rows[0].len() || r.is_empty())
        {
            return Err(bad("empty or ragged table".into()));
        }
        Ok(QTable::from_rows(rows))
    }
}

/// Parameter vector `theta` of a linear Q approximation.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    theta: Vec<f64>,
}

impl WeightVector {
    pub fn zeros(dim: usize) -> Self {
        Self {
            theta: vec![0.0; dim],
        }
    }

    pub fn from_vec(theta: Vec<f64>) -> Self {
        Self { theta }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }

    pub fn max_abs(&self) -> f64 {
        self.theta.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn dot(&self, phi: &[f64]) -> f64 {
        self.theta.iter().zip(phi).map(|(t, p)| t * p).sum()
    }

    /// CSV snapshot: header `index,weight`, one row per component.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "index,weight")?;
        for (i, w) in self.theta.iter().enumerate() {
            writeln!(out, "{i},{w}")?;
        }
        Ok(())
    }
}

/// `Q(s,a) = theta^T phi(s,a)` with gradient-descent Q-learning and Sarsa updates.
#[derive(Debug, Clone)]
pub struct LinearQ<F> {
    weights: WeightVector,
    features: F,
    divergence_bound: f64,
    phi: Vec<f64>,
    scratch: Vec<f64>,
}

impl<F> LinearQ<F> {
    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn features(&self) -> &F {
        &self.features
    }

    pub fn with_divergence_bound(mut self, bound: f64) -> Self {
        self.divergence_bound = bound;
        self
    }
}

impl<F> LinearQ<F> {
    pub fn new<S>(weights: WeightVector, features: F) -> Result<Self, LearnerError>
    where
        F: FeatureMap<S>,
    {
        let d = features.dim();
        if weights.dim() != d {
            return Err(LearnerError::DimensionMismatch {
                expected: weights.dim(),
                found: d,
            });
        }
        if weights.theta.iter().any(|v| !v.is_finite()) {
            return Err(LearnerError::NonFinite("weights"));
        }
        Ok(Self {
            weights,
            features,
            divergence_bound: DEFAULT_DIVERGENCE_BOUND,
            phi: vec![0.0; d],
            scratch: vec![0.0; d],
        })
    }

    /// `theta^T phi(s, a)`.
    pub fn q_value<S>(&self, state: &S, action: Action) -> f64
    where
        F: FeatureMap<S>,
    {
        let phi = self.features.features(state, action);
        self.weights.dot(&phi)
    }

    fn max_next<S>(&mut self, state: &S) -> f64
    where
        F: FeatureMap<S>,
    {
        let mut best = f64::NEG_INFINITY;
        for a in 0..self.features.num_actions() {
            self.features.features_into(state, a, &mut self.scratch);
            best = best.max(self.weights.dot(&self.scratch));
        }
        best
    }

    fn apply<S>(
        &mut self,
        tr: &Transition<S>,
        bootstrap: f64,
        alpha: f64,
        gamma: f64,
    ) -> Result<TdError, LearnerError>
    where
        F: FeatureMap<S>,
    {
        self.features
            .features_into(&tr.state, tr.action, &mut self.phi);
        let td = tr.reward + gamma * bootstrap - self.weights.dot(&self.phi);
        for (t, p) in self.weights.theta.iter_mut().zip(&self.phi) {
            *t += alpha * td * p;
        }
        let norm = self.weights.max_abs();
        if !norm.is_finite() {
            return Err(LearnerError::NonFinite("weights"));
        }
        if norm > self.divergence_bound {
            return Err(LearnerError::Diverged {
                norm,
                bound: self.divergence_bound,
            });
        }
        Ok(TdError(td))
    }

    fn check_action<S>(&self, action: Action) -> Result<(), LearnerError>
    where
        F: FeatureMap<S>,
    {
        let num_actions = self.features.num_actions();
        if action >= num_actions {
            return Err(LearnerError::ActionOutOfRange {
                action,
                num_actions,
            });
        }
        Ok(())
    }

    /// `theta += alpha * phi(s,a) * (r + gamma * max_a' theta^T phi(s',a') - theta^T phi(s,a))`.
    pub fn q_update<S>(
        &mut self,
        tr: &Transition<S>,
        alpha: f64,
        gamma: f64,
    ) -> Result<TdError, LearnerError>
    where
        F: FeatureMap<S>,
    {
        check_step(alpha, gamma, tr.reward)?;
        self.check_action::<S>(tr.action)?;
        let bootstrap = if tr.done {
            0.0
        } else {
            self.max_next(&tr.next_state)
        };
        self.apply(tr, bootstrap, alpha, gamma)
    }

    /// As [`LinearQ::q_update`] but bootstrapping on `theta^T phi(s', a')` for the executed `a'`.
    pub fn sarsa_update<S>(
        &mut self,
        tr: &Transition<S>,
        next_action: Option<Action>,
        alpha: f64,
        gamma: f64,
    ) -> Result<TdError, LearnerError>
    where
        F: FeatureMap<S>,
    {
        check_step(alpha, gamma, tr.reward)?;
        self.check_action::<S>(tr.action)?;
        let bootstrap = if tr.done {
            0.0
        } else {
            let a = next_action.ok_or(LearnerError::MissingNextAction)?;
            self.check_action::<S>(a)?;
            self.features
                .features_into(&tr.next_state, a, &mut self.scratch);
            self.weights.dot(&self.scratch)
        };
        self.apply(tr, bootstrap, alpha, gamma)
    }
}

/// Read-only access to per-action value estimates, shared by learners and teachers.
pub trait ActionValues<S> {
    fn num_actions(&self) -> usize;
    fn action_values(&self, state: &S, out: &mut [f64]);
}

impl ActionValues<usize> for QTable {
    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn action_values(&self, state: &usize, out: &mut [f64]) {
        out.copy_from_slice(self.row(*state));
    }
}

impl<S, F: FeatureMap<S>> ActionValues<S> for LinearQ<F> {
    fn num_actions(&self) -> usize {
        self.features.num_actions()
    }

    fn action_values(&self, state: &S, out: &mut [f64]) {
        let mut phi = vec![0.0; self.features.dim()];
        for (a, v) in out.iter_mut().enumerate() {
            self.features.features_into(state, a, &mut phi);
            *v = self.weights.dot(&phi);
        }
    }
}

/// A learning agent as seen by the harness.
pub trait Learner<S>: ActionValues<S> {
    fn rule(&self) -> UpdateRule;

    /// Visit count driving visit-indexed exploration schedules.
    fn state_visits(&self, state: &S) -> u64;

    /// Applies one update; `next_action` is the action that will actually be executed at `s'`.
    fn learn(
        &mut self,
        tr: &Transition<S>,
        next_action: Option<Action>,
        gamma: f64,
    ) -> Result<TdError, LearnerError>;

    /// Flat view of the learned parameters (Q table or theta).
    fn parameters(&self) -> &[f64];

    /// Factor `c` with `||Q - Q'||_inf <= c * ||params - params'||_inf`.
    fn convergence_scale(&self) -> f64;
}

#[derive(Debug, Clone)]
pub struct TabularLearner {
    table: QTable,
    rule: UpdateRule,
    schedule: StepSizeSchedule,
}

impl TabularLearner {
    pub fn new(table: QTable, rule: UpdateRule, schedule: StepSizeSchedule) -> Self {
        Self {
            table,
            rule,
            schedule,
        }
    }

    pub fn table(&self) -> &QTable {
        &self.table
    }

    pub fn into_table(self) -> QTable {
        self.table
    }
}

impl ActionValues<usize> for TabularLearner {
    fn num_actions(&self) -> usize {
        self.table.num_actions
    }

    fn action_values(&self, state: &usize, out: &mut [f64]) {
        self.table.action_values(state, out)
    }
}

impl Learner<usize> for TabularLearner {
    fn rule(&self) -> UpdateRule {
        self.rule
    }

    fn state_visits(&self, state: &usize) -> u64 {
        self.table.state_visits(*state)
    }

    fn learn(
        &mut self,
        tr: &Transition<usize>,
        next_action: Option<Action>,
        gamma: f64,
    ) -> Result<TdError, LearnerError> {
        self.table.check_pair(tr.state, tr.action)?;
        let alpha = self.schedule.alpha(self.table.visits(tr.state, tr.action));
        match self.rule {
            UpdateRule::QLearning => self.table.q_update(tr, alpha, gamma),
            UpdateRule::Sarsa => self.table.sarsa_update(tr, next_action, alpha, gamma),
        }
    }

    fn parameters(&self) -> &[f64] {
        &self.table.values
    }

    fn convergence_scale(&self) -> f64 {
        1.0
    }
}

/// Linear learner. A power-decay schedule is indexed by the global update
/// count, since state-action pairs are not enumerable in general.
#[derive(Debug, Clone)]
pub struct LinearLearner<F> {
    q: LinearQ<F>,
    rule: UpdateRule,
    schedule: StepSizeSchedule,
    updates: u64,
}

impl<F> LinearLearner<F> {
    pub fn new(q: LinearQ<F>, rule: UpdateRule, schedule: StepSizeSchedule) -> Self {
        Self {
            q,
            rule,
            schedule,
            updates: 0,
        }
    }

    pub fn q(&self) -> &LinearQ<F> {
        &self.q
    }

    pub fn into_q(self) -> LinearQ<F> {
        self.q
    }
}

impl<S, F: FeatureMap<S>> ActionValues<S> for LinearLearner<F> {
    fn num_actions(&self) -> usize {
        self.q.features.num_actions()
    }

    fn action_values(&self, state: &S, out: &mut [f64]) {
        self.q.action_values(state, out)
    }
}

impl<S, F: FeatureMap<S>> Learner<S> for LinearLearner<F> {
    fn rule(&self) -> UpdateRule {
        self.rule
    }

    fn state_visits(&self, _state: &S) -> u64 {
        self.updates
    }

    fn learn(
        &mut self,
        tr: &Transition<S>,
        next_action: Option<Action>,
        gamma: f64,
    ) -> Result<TdError, LearnerError> {
        let alpha = self.schedule.alpha(self.updates);
        let td = match self.rule {
            UpdateRule::QLearning => self.q.q_update(tr, alpha, gamma),
            UpdateRule::Sarsa => self.q.sarsa_update(tr, next_action, alpha, gamma),
        }?;
        self.updates += 1;
        Ok(td)
    }

    fn parameters(&self) -> &[f64] {
        &self.q.weights.theta
    }

    fn convergence_scale(&self) -> f64 {
        self.q.features.dim() as f64
    }
}
