//! Declarative description of one experiment group.
//!
//! The structure deserializes from any serde format; unknown keys are rejected.
//! Omitted optional keys take the defaults documented on each field.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::advice::{AdviceStrategy, TeacherQuality};
use crate::learners::{
    StepSizeSchedule, UpdateRule, DEFAULT_DIVERGENCE_BOUND, DEFAULT_POWER_DECAY_EXPONENT,
};
use crate::policies::PolicySpec;

/// A config value failed validation; `field` is the dotted key, e.g. `learner.gamma`.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid `{field}`: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    LinearChain,
    GridPursuit,
    /// One state, one action, reward 1, never terminates.
    SingleState,
    /// Two-state stochastic fixture with a known stationary distribution.
    TwoState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub kind: DomainKind,
    /// Chain length (states `0..length`).
    #[serde(default = "defaults::length")]
    pub length: usize,
    /// Maximum steps per episode on domains without a built-in limit.
    #[serde(default = "defaults::step_cap")]
    pub step_cap: u64,
    /// Grid Pursuit step limit.
    #[serde(default = "defaults::step_limit")]
    pub step_limit: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    QTabular,
    SarsaTabular,
    QLinear,
    SarsaLinear,
}

impl LearnerKind {
    pub fn rule(self) -> UpdateRule {
        match self {
            LearnerKind::QTabular | LearnerKind::QLinear => UpdateRule::QLearning,
            LearnerKind::SarsaTabular | LearnerKind::SarsaLinear => UpdateRule::Sarsa,
        }
    }

    pub fn is_linear(self) -> bool {
        matches!(self, LearnerKind::QLinear | LearnerKind::SarsaLinear)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Constant,
    PowerDecay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    pub gamma: f64,
    #[serde(default = "defaults::schedule")]
    pub schedule: ScheduleKind,
    /// Constant step size; required when `schedule = "constant"`.
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Power-decay exponent.
    #[serde(default = "defaults::omega")]
    pub omega: f64,
    /// Initial Q value of every table entry (tabular learners; linear weights start at 0).
    #[serde(default)]
    pub initial_value: f64,
    #[serde(default = "defaults::divergence_bound")]
    pub divergence_bound: f64,
}

impl LearnerConfig {
    pub fn schedule(&self) -> StepSizeSchedule {
        match self.schedule {
            ScheduleKind::Constant => StepSizeSchedule::Constant(self.alpha.unwrap_or(f64::NAN)),
            ScheduleKind::PowerDecay => StepSizeSchedule::PowerDecay(self.omega),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Greedy,
    EpsilonGreedy,
    Glie,
    Boltzmann,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// Exploration rate of `epsilon_greedy`.
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// Scale of the `glie` schedule `min(1, c / sqrt(n + 1))`.
    #[serde(default = "defaults::glie_c")]
    pub c: f64,
    /// Fixed Boltzmann temperature; the cooling schedule is used when absent.
    #[serde(default)]
    pub temperature: Option<f64>,
}

impl PolicyConfig {
    pub fn spec(&self) -> PolicySpec {
        match self.kind {
            PolicyKind::Greedy => PolicySpec::Greedy,
            PolicyKind::EpsilonGreedy => PolicySpec::EpsilonGreedy {
                epsilon: self.epsilon.unwrap_or(f64::NAN),
            },
            PolicyKind::Glie => PolicySpec::Glie { c: self.c },
            PolicyKind::Boltzmann => PolicySpec::Boltzmann {
                temperature: self.temperature,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeacherConfig {
    #[serde(default = "defaults::quality")]
    pub quality: TeacherQuality,
    #[serde(default = "defaults::strategy")]
    pub strategy: AdviceStrategy,
    #[serde(default)]
    pub budget: u64,
    /// Sarsa-linear training episodes for the Grid Pursuit teacher.
    #[serde(default = "defaults::pretrain_episodes")]
    pub pretrain_episodes: usize,
    /// Value-iteration tolerance for finite-domain teachers.
    #[serde(default = "defaults::oracle_tolerance")]
    pub oracle_tolerance: f64,
}

impl Default for TeacherConfig {
    fn default() -> Self {
        Self {
            quality: defaults::quality(),
            strategy: defaults::strategy(),
            budget: 0,
            pretrain_episodes: defaults::pretrain_episodes(),
            oracle_tolerance: defaults::oracle_tolerance(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Group label used in result tables; derived from the teacher when absent.
    #[serde(default)]
    pub name: Option<String>,
    pub trials: usize,
    pub episodes: usize,
    #[serde(default)]
    pub seed: u64,
    /// Training episodes between evaluation checkpoints; 0 disables evaluation.
    #[serde(default = "defaults::eval_every")]
    pub eval_every: usize,
    #[serde(default = "defaults::eval_episodes")]
    pub eval_episodes: usize,
    #[serde(default = "defaults::convergence_epsilon")]
    pub convergence_epsilon: f64,
    #[serde(default = "defaults::convergence_window")]
    pub convergence_window: usize,
    /// Keep every advice event in the trial results.
    #[serde(default)]
    pub log_advice: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssumptionConfig {
    /// Rollout length; must be at least `10 * d^2`.
    #[serde(default = "defaults::assumption_samples")]
    pub samples: usize,
    /// Random weight probes drawn uniformly from `[-probe_scale, probe_scale]^d`, besides `theta = 0`.
    #[serde(default = "defaults::random_probes")]
    pub random_probes: usize,
    #[serde(default = "defaults::probe_scale")]
    pub probe_scale: f64,
    /// Explicit probes, each of length `d`.
    #[serde(default)]
    pub probes: Vec<Vec<f64>>,
}

impl Default for AssumptionConfig {
    fn default() -> Self {
        Self {
            samples: defaults::assumption_samples(),
            random_probes: defaults::random_probes(),
            probe_scale: defaults::probe_scale(),
            probes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainConfig,
    pub learner: LearnerConfig,
    pub policy: PolicyConfig,
    #[serde(default)]
    pub teacher: TeacherConfig,
    pub experiment: RunConfig,
    #[serde(default)]
    pub assumptions: AssumptionConfig,
}

/// Convergence tolerance, in return units, for Grid Pursuit presets. Rewards
/// there reach 500 in magnitude, so the chain's 0.01 is far below the
/// step-to-step noise of a constant step size.
pub const PURSUIT_CONVERGENCE_EPSILON: f64 = 1.0;

mod defaults {
    use super::*;

    pub fn length() -> usize {
        crate::env::DEFAULT_CHAIN_LENGTH
    }
    pub fn step_cap() -> u64 {
        crate::env::DEFAULT_CHAIN_STEP_CAP
    }
    pub fn step_limit() -> u32 {
        crate::env::DEFAULT_STEP_LIMIT
    }
    pub fn schedule() -> ScheduleKind {
        ScheduleKind::Constant
    }
    pub fn omega() -> f64 {
        DEFAULT_POWER_DECAY_EXPONENT
    }
    pub fn divergence_bound() -> f64 {
        DEFAULT_DIVERGENCE_BOUND
    }
    pub fn glie_c() -> f64 {
        1.0
    }
    pub fn quality() -> TeacherQuality {
        TeacherQuality::None
    }
    pub fn strategy() -> AdviceStrategy {
        AdviceStrategy::MistakeCorrecting
    }
    pub fn pretrain_episodes() -> usize {
        5000
    }
    pub fn oracle_tolerance() -> f64 {
        crate::oracle::DEFAULT_TOLERANCE
    }
    pub fn eval_every() -> usize {
        10
    }
    pub fn eval_episodes() -> usize {
        30
    }
    pub fn convergence_epsilon() -> f64 {
        0.01
    }
    pub fn convergence_window() -> usize {
        10
    }
    pub fn assumption_samples() -> usize {
        20_000
    }
    pub fn random_probes() -> usize {
        4
    }
    pub fn probe_scale() -> f64 {
        1.0
    }
}

fn in_unit(field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(invalid(field, format!("{v} is not in [0, 1]")))
    }
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(
            field,
            format!("{v} is not a positive finite number"),
        ))
    }
}

impl ExperimentConfig {
    /// A Linear Chain Q-learning group with the replication settings
    /// (`epsilon = 0.1`, `alpha = 0.9`, `gamma = 0.8`, 300 episodes).
    pub fn chain_replication(quality: TeacherQuality, trials: usize, seed: u64) -> Self {
        ExperimentConfig {
            domain: DomainConfig {
                kind: DomainKind::LinearChain,
                length: defaults::length(),
                step_cap: defaults::step_cap(),
                step_limit: defaults::step_limit(),
            },
            learner: LearnerConfig {
                kind: LearnerKind::QTabular,
                gamma: 0.8,
                schedule: ScheduleKind::Constant,
                alpha: Some(0.9),
                omega: defaults::omega(),
                initial_value: 0.0,
                divergence_bound: defaults::divergence_bound(),
            },
            policy: PolicyConfig {
                kind: PolicyKind::EpsilonGreedy,
                epsilon: Some(0.1),
                c: 1.0,
                temperature: None,
            },
            teacher: TeacherConfig {
                quality,
                budget: 1000,
                ..TeacherConfig::default()
            },
            experiment: RunConfig {
                name: None,
                trials,
                episodes: 300,
                seed,
                eval_every: 0,
                eval_episodes: defaults::eval_episodes(),
                convergence_epsilon: defaults::convergence_epsilon(),
                convergence_window: defaults::convergence_window(),
                log_advice: false,
            },
            assumptions: AssumptionConfig::default(),
        }
    }

    /// A Grid Pursuit Sarsa-linear group (`epsilon = 0.05`, `alpha = 0.001`,
    /// `gamma = 0.999`, 1000 episodes) with convergence tolerance
    /// [`PURSUIT_CONVERGENCE_EPSILON`].
    pub fn pursuit_replication(quality: TeacherQuality, trials: usize, seed: u64) -> Self {
        let mut cfg = Self::chain_replication(quality, trials, seed);
        cfg.domain.kind = DomainKind::GridPursuit;
        cfg.learner.kind = LearnerKind::SarsaLinear;
        cfg.learner.gamma = 0.999;
        cfg.learner.alpha = Some(0.001);
        cfg.policy.epsilon = Some(0.05);
        cfg.experiment.episodes = 1000;
        cfg.experiment.eval_every = defaults::eval_every();
        cfg.experiment.convergence_epsilon = PURSUIT_CONVERGENCE_EPSILON;
        cfg
    }

    /// Label of the group in result tables.
    pub fn group_name(&self) -> String {
        match &self.experiment.name {
            Some(n) => n.clone(),
            None => self.teacher.quality.label().to_string(),
        }
    }

    /// Checks every value range and cross-field constraint.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let d = &self.domain;
        match d.kind {
            DomainKind::LinearChain if d.length < 2 => {
                return Err(invalid("domain.length", "a chain needs at least 2 states"))
            }
            DomainKind::GridPursuit if !self.learner.kind.is_linear() => {
                return Err(invalid(
                    "learner.kind",
                    "Grid Pursuit has no finite state table; use q_linear or sarsa_linear",
                ))
            }
            _ => {}
        }
        if d.step_cap == 0 {
            return Err(invalid("domain.step_cap", "must be at least 1"));
        }
        if d.step_limit == 0 {
            return Err(invalid("domain.step_limit", "must be at least 1"));
        }

        let l = &self.learner;
        in_unit("learner.gamma", l.gamma)?;
        match l.schedule {
            ScheduleKind::Constant => match l.alpha {
                None => {
                    return Err(invalid(
                        "learner.alpha",
                        "required by the constant schedule",
                    ))
                }
                Some(a) if !(a.is_finite() && a > 0.0 && a <= 1.0) => {
                    return Err(invalid("learner.alpha", format!("{a} is not in (0, 1]")))
                }
                Some(_) => {}
            },
            ScheduleKind::PowerDecay => {
                if !(l.omega.is_finite() && l.omega > 0.0 && l.omega <= 1.0) {
                    return Err(invalid(
                        "learner.omega",
                        format!("{} is not in (0, 1]", l.omega),
                    ));
                }
            }
        }
        if !l.initial_value.is_finite() {
            return Err(invalid("learner.initial_value", "must be finite"));
        }
        positive("learner.divergence_bound", l.divergence_bound)?;

        let p = &self.policy;
        match p.kind {
            PolicyKind::EpsilonGreedy => match p.epsilon {
                None => return Err(invalid("policy.epsilon", "required by epsilon_greedy")),
                Some(e) => in_unit("policy.epsilon", e)?,
            },
            PolicyKind::Glie => positive("policy.c", p.c)?,
            PolicyKind::Boltzmann => {
                if let Some(t) = p.temperature {
                    positive("policy.temperature", t)?;
                }
            }
            PolicyKind::Greedy => {}
        }

        let t = &self.teacher;
        positive("teacher.oracle_tolerance", t.oracle_tolerance)?;
        let needs_pretraining = d.kind == DomainKind::GridPursuit
            && matches!(t.quality, TeacherQuality::Correct | TeacherQuality::Poor);
        if needs_pretraining && t.pretrain_episodes == 0 {
            return Err(invalid(
                "teacher.pretrain_episodes",
                "must be at least 1 for an oracle-backed teacher",
            ));
        }

        let r = &self.experiment;
        if r.trials == 0 {
            return Err(invalid("experiment.trials", "must be at least 1"));
        }
        if r.episodes == 0 {
            return Err(invalid("experiment.episodes", "must be at least 1"));
        }
        if r.eval_every > 0 && r.eval_episodes == 0 {
            return Err(invalid(
                "experiment.eval_episodes",
                "must be at least 1 when evaluation is enabled",
            ));
        }
        positive("experiment.convergence_epsilon", r.convergence_epsilon)?;
        if r.convergence_window == 0 {
            return Err(invalid(
                "experiment.convergence_window",
                "must be at least 1",
            ));
        }

        let a = &self.assumptions;
        positive("assumptions.probe_scale", a.probe_scale)?;
        if a.probes.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("assumptions.probes", "entries must be finite"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replication_presets_are_valid() {
        for q in TeacherQuality::ALL {
            ExperimentConfig::chain_replication(q, 3, 1)
                .validate()
                .unwrap();
            ExperimentConfig::pursuit_replication(q, 3, 1)
                .validate()
                .unwrap();
        }
    }

    #[test]
    fn validation_names_the_field() {
        let mut cfg = ExperimentConfig::chain_replication(TeacherQuality::None, 3, 1);
        cfg.learner.gamma = 1.2;
        assert_eq!(cfg.validate().unwrap_err().field, "learner.gamma");

        let mut cfg = ExperimentConfig::chain_replication(TeacherQuality::None, 3, 1);
        cfg.experiment.trials = 0;
        assert_eq!(cfg.validate().unwrap_err().field, "experiment.trials");

        let mut cfg = ExperimentConfig::chain_replication(TeacherQuality::None, 3, 1);
        cfg.policy.epsilon = None;
        assert_eq!(cfg.validate().unwrap_err().field, "policy.epsilon");

        let mut cfg = ExperimentConfig::pursuit_replication(TeacherQuality::None, 3, 1);
        cfg.learner.kind = LearnerKind::QTabular;
        assert_eq!(cfg.validate().unwrap_err().field, "learner.kind");
    }
}
