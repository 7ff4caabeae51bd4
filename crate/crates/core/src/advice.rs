//! The budgeted teacher.
//!
//! A [`Teacher`] watches the action the student is about to take and may replace
//! it with its own suggestion. Every suggestion costs one unit of budget and must
//! be executed by the student. Once the budget is spent the teacher is silent.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::Action;
use crate::learners::ActionValues;
use crate::policies::{greedy_action, worst_action, PolicyError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdviceError {
    #[error("{0:?} teacher needs a value oracle")]
    MissingOracle(TeacherQuality),
    #[error("intended action {action} out of range ({num_actions} actions)")]
    IllegalAction { action: Action, num_actions: usize },
    #[error("oracle has {oracle} actions but the domain has {domain}")]
    ActionCountMismatch { oracle: usize, domain: usize },
    #[error("oracle produced non-finite action values")]
    BadOracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TeacherQuality {
    /// Suggests the oracle's best action.
    #[serde(rename = "optimal", alias = "correct")]
    Correct,
    /// Suggests a uniformly random action.
    Random,
    /// Suggests the oracle's worst action.
    Poor,
    /// Never advises.
    None,
}

impl TeacherQuality {
    pub const ALL: [TeacherQuality; 4] = [
        TeacherQuality::Correct,
        TeacherQuality::Random,
        TeacherQuality::Poor,
        TeacherQuality::None,
    ];

    pub fn label(self) -> &'static str {
        match self {
            TeacherQuality::Correct => "optimal",
            TeacherQuality::Random => "random",
            TeacherQuality::Poor => "poor",
            TeacherQuality::None => "none",
        }
    }
}

impl fmt::Display for TeacherQuality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for TeacherQuality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "optimal" | "correct" => Ok(TeacherQuality::Correct),
            "random" => Ok(TeacherQuality::Random),
            "poor" => Ok(TeacherQuality::Poor),
            "none" => Ok(TeacherQuality::None),
            other => Err(format!(
                "unknown teacher quality {other:?} (expected optimal|random|poor|none)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdviceStrategy {
    /// Advise only when the student's intended action differs from the teacher's choice.
    #[serde(rename = "mistake")]
    MistakeCorrecting,
    /// Advise on every step until the budget runs out.
    #[serde(rename = "early")]
    EarlyAdvising,
}

impl AdviceStrategy {
    pub fn label(self) -> &'static str {
        match self {
            AdviceStrategy::MistakeCorrecting => "mistake",
            AdviceStrategy::EarlyAdvising => "early",
        }
    }
}

impl FromStr for AdviceStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mistake" | "mistake_correcting" => Ok(AdviceStrategy::MistakeCorrecting),
            "early" | "early_advising" => Ok(AdviceStrategy::EarlyAdvising),
            other => Err(format!(
                "unknown advice strategy {other:?} (expected mistake|early)"
            )),
        }
    }
}

/// One issued piece of advice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdviceEvent {
    pub episode: usize,
    pub step: u64,
    pub state_id: u64,
    pub intended: Action,
    pub advised: Action,
}

pub type SharedOracle<S> = Arc<dyn ActionValues<S> + Send + Sync>;

pub struct Teacher<S> {
    quality: TeacherQuality,
    strategy: AdviceStrategy,
    budget: u64,
    remaining: u64,
    num_actions: usize,
    oracle: Option<SharedOracle<S>>,
    rng: ChaCha8Rng,
    values: Vec<f64>,
}

impl<S> fmt::Debug for Teacher<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Teacher")
            .field("quality", &self.quality)
            .field("strategy", &self.strategy)
            .field("budget", &self.budget)
            .field("remaining", &self.remaining)
            .finish_non_exhaustive()
    }
}

/// Builds a teacher. `Correct` and `Poor` teachers require an oracle; `seed`
/// drives the `Random` teacher's suggestions.
pub fn make_teacher<S>(
    quality: TeacherQuality,
    strategy: AdviceStrategy,
    budget: u64,
    num_actions: usize,
    oracle: Option<SharedOracle<S>>,
    seed: u64,
) -> Result<Teacher<S>, AdviceError> {
    if matches!(quality, TeacherQuality::Correct | TeacherQuality::Poor) {
        match &oracle {
            None => return Err(AdviceError::MissingOracle(quality)),
            Some(o) if o.num_actions() != num_actions => {
                return Err(AdviceError::ActionCountMismatch {
                    oracle: o.num_actions(),
                    domain: num_actions,
                })
            }
            Some(_) => {}
        }
    }
    Ok(Teacher {
        quality,
        strategy,
        budget,
        remaining: budget,
        num_actions,
        oracle,
        rng: ChaCha8Rng::seed_from_u64(seed),
        values: vec![0.0; num_actions],
    })
}

impl<S> Teacher<S> {
    /// A teacher that never advises.
    pub fn silent(num_actions: usize) -> Self {
        make_teacher(
            TeacherQuality::None,
            AdviceStrategy::MistakeCorrecting,
            0,
            num_actions,
            None,
            0,
        )
        .expect("silent teacher needs no oracle")
    }

    pub fn quality(&self) -> TeacherQuality {
        self.quality
    }

    pub fn strategy(&self) -> AdviceStrategy {
        self.strategy
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn remaining(&self) -> u64 {
        self.remaining
    }

    pub fn spent(&self) -> u64 {
        self.budget - self.remaining
    }

    fn choice(&mut self, state: &S) -> Result<Action, AdviceError> {
        let mut oracle_pick = |pick: fn(&[f64]) -> Result<Action, PolicyError>| {
            let oracle = self
                .oracle
                .as_ref()
                .ok_or(AdviceError::MissingOracle(self.quality))?;
            oracle.action_values(state, &mut self.values);
            pick(&self.values).map_err(|_| AdviceError::BadOracle)
        };
        match self.quality {
            TeacherQuality::Correct => oracle_pick(greedy_action),
            TeacherQuality::Poor => oracle_pick(worst_action),
            TeacherQuality::Random => Ok(self.rng.gen_range(0..self.num_actions)),
            TeacherQuality::None => unreachable!("silent teachers never choose"),
        }
    }

    /// Returns the action the student must execute instead of `intended`, if any.
    ///
    /// Budget is spent only when advice is returned. A `Random` mistake-correcting
    /// teacher draws its suggestion first and stays quiet when it agrees.
    pub fn advise(&mut self, state: &S, intended: Action) -> Result<Option<Action>, AdviceError> {
        if intended >= self.num_actions {
            return Err(AdviceError::IllegalAction {
                action: intended,
                num_actions: self.num_actions,
            });
        }
        if self.quality == TeacherQuality::None || self.remaining == 0 {
            return Ok(None);
        }
        let suggestion = self.choice(state)?;
        if self.strategy == AdviceStrategy::MistakeCorrecting && suggestion == intended {
            return Ok(None);
        }
        self.remaining -= 1;
        Ok(Some(suggestion))
    }
}
