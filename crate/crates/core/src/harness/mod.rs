//! Trials, experiments, convergence detection and assumption checks.

mod assumptions;
mod config;
mod convergence;
mod experiment;
pub mod seed;
mod trial;

pub use assumptions::{check_fa_assumptions, AssumptionError, AssumptionReport, ProbeReport};
pub use config::{
    AssumptionConfig, ConfigError, DomainConfig, DomainKind, ExperimentConfig, LearnerConfig,
    LearnerKind, PolicyConfig, PolicyKind, RunConfig, ScheduleKind, TeacherConfig,
    PURSUIT_CONVERGENCE_EPSILON,
};
pub use convergence::{detect_convergence, first_quiet_run, sup_norm_diff};
pub use experiment::{
    greedy_policy_of_parameters, pretrain_pursuit_teacher, run_experiment, run_trial,
    AggregateResult, EvalSummary, Experiment,
};
pub use trial::{run_trial_with, EvalCheckpoint, LearningCurve, TrialSettings};

use thiserror::Error;

use crate::advice::AdviceError;
use crate::env::EnvError;
use crate::learners::LearnerError;
use crate::oracle::OracleError;
use crate::policies::PolicyError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("learner failed in episode {episode}: {source}")]
    Learner {
        episode: usize,
        source: LearnerError,
    },
    #[error("learner setup: {0}")]
    Setup(#[from] LearnerError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Advice(#[from] AdviceError),
    #[error("teacher oracle: {0}")]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Assumptions(#[from] AssumptionError),
    #[error("advice spent ({spent}) exceeds the budget ({budget})")]
    BudgetExceeded { spent: u64, budget: u64 },
    #[error("teacher pre-training failed: {0}")]
    Pretraining(Box<HarnessError>),
    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        source: Box<HarnessError>,
    },
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

impl HarnessError {
    /// True when the failure is a learner divergence (non-finite or unbounded parameters).
    pub fn is_divergence(&self) -> bool {
        match self {
            HarnessError::Learner { source, .. } | HarnessError::Setup(source) => {
                matches!(
                    source,
                    LearnerError::Diverged { .. } | LearnerError::NonFinite(_)
                )
            }
            HarnessError::Trial { source, .. } | HarnessError::Pretraining(source) => {
                source.is_divergence()
            }
            _ => false,
        }
    }

    /// The configuration error behind this failure, if any.
    pub fn config_error(&self) -> Option<&ConfigError> {
        match self {
            HarnessError::Config(c) => Some(c),
            HarnessError::Trial { source, .. } | HarnessError::Pretraining(source) => {
                source.config_error()
            }
            _ => None,
        }
    }
}
