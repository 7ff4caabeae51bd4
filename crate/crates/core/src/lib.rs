//! Budgeted teacher-student action advice for reinforcement learning.
//!
//! The crate is organised around the online teaching loop: an [`env::Environment`]
//! produces transitions, a [`learners::Learner`] (tabular or linear, Q-learning or
//! Sarsa) proposes actions through a [`policies::PolicySpec`], and an
//! [`advice::Teacher`] with a finite budget may override the proposal before it is
//! executed. The [`harness`] runs seeded trials and experiments around that loop,
//! [`oracle`] solves finite MDPs exactly, and [`stats`] provides the AUC and
//! one-way ANOVA used to compare teacher groups.

pub mod advice;
pub mod env;
pub mod features;
pub mod harness;
pub mod learners;
pub mod oracle;
pub mod policies;
pub mod stats;

pub use advice::{AdviceEvent, AdviceStrategy, Teacher, TeacherQuality};
pub use env::{Action, Environment, Transition};
pub use features::FeatureMap;
pub use learners::{Learner, QTable, StepSizeSchedule, TdError, UpdateRule, WeightVector};
pub use policies::PolicySpec;
