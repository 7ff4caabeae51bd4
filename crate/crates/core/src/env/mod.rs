//! MDP abstraction and the experimental domains.

mod chain;
mod fixtures;
mod pursuit;

pub use chain::{ChainAction, LinearChain, DEFAULT_CHAIN_LENGTH, DEFAULT_CHAIN_STEP_CAP};
pub use fixtures::{SingleState, TwoState};
pub use pursuit::{
    Direction, GridPursuit, Maze, MazeError, PursuitFeatures, PursuitState, COLLISION_REWARD,
    DEFAULT_MAZE, DEFAULT_STEP_LIMIT, GHOST_CHASE_PROBABILITY, LEVEL_CLEAR_BONUS, PELLET_REWARD,
    PURSUIT_FEATURES, SENTINEL_DISTANCE,
};

use rand::Rng;
use thiserror::Error;

/// Index into the domain's (shared) action set.
pub type Action = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("cannot step a terminated episode")]
    Terminated,
    #[error("action {action} out of range (domain has {num_actions} actions)")]
    InvalidAction { action: Action, num_actions: usize },
}

/// One step of experience `(s, a, r, s', done)`.
///
/// `done` is true exactly when `next_state` is terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<S> {
    pub state: S,
    pub action: Action,
    pub reward: f64,
    pub next_state: S,
    pub done: bool,
}

/// An episodic MDP driven as a state machine.
///
/// The environment owns its current state; all randomness comes from the
/// generator passed to [`Environment::step`] and [`Environment::reset`].
pub trait Environment {
    type State: Clone + std::fmt::Debug;

    fn num_actions(&self) -> usize;

    /// Declared bound `r_max`: every emitted reward satisfies `|r| <= r_max`.
    fn reward_bound(&self) -> f64;

    fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Self::State;

    fn state(&self) -> &Self::State;

    fn is_terminal(&self, state: &Self::State) -> bool;

    fn step<R: Rng + ?Sized>(
        &mut self,
        action: Action,
        rng: &mut R,
    ) -> Result<Transition<Self::State>, EnvError>;

    /// Compact identifier used in advice logs.
    fn state_id(&self, state: &Self::State) -> u64;
}

/// A single outcome of taking an action in a finite MDP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub next_state: usize,
    pub probability: f64,
    pub reward: f64,
}

/// Explicit tabulation of a finite MDP, consumed by the value-iteration oracle.
#[derive(Debug, Clone)]
pub struct FiniteMdp {
    num_states: usize,
    num_actions: usize,
    outcomes: Vec<Vec<Outcome>>,
    terminal: Vec<bool>,
}

impl FiniteMdp {
    /// `outcomes` is indexed by `state * num_actions + action`; terminal rows are ignored.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        outcomes: Vec<Vec<Outcome>>,
        terminal: Vec<bool>,
    ) -> Self {
        assert_eq!(outcomes.len(), num_states * num_actions);
        assert_eq!(terminal.len(), num_states);
        Self {
            num_states,
            num_actions,
            outcomes,
            terminal,
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn outcomes(&self, state: usize, action: Action) -> &[Outcome] {
        &self.outcomes[state * self.num_actions + action]
    }

    pub fn is_terminal(&self, state: usize) -> bool {
        self.terminal[state]
    }

    /// Relabels states with `perm[old] = new`.
    pub fn permuted(&self, perm: &[usize]) -> FiniteMdp {
        assert_eq!(perm.len(), self.num_states);
        let mut outcomes = vec![Vec::new(); self.outcomes.len()];
        let mut terminal = vec![false; self.num_states];
        for s in 0..self.num_states {
            terminal[perm[s]] = self.terminal[s];
            for a in 0..self.num_actions {
                outcomes[perm[s] * self.num_actions + a] = self
                    .outcomes(s, a)
                    .iter()
                    .map(|o| Outcome {
                        next_state: perm[o.next_state],
                        ..*o
                    })
                    .collect();
            }
        }
        FiniteMdp {
            num_states: self.num_states,
            num_actions: self.num_actions,
            outcomes,
            terminal,
        }
    }
}

/// Domains with a finite, enumerable state space.
pub trait TabularDomain: Environment<State = usize> {
    fn num_states(&self) -> usize;
    fn to_finite_mdp(&self) -> FiniteMdp;
}

pub(crate) fn check_action(action: Action, num_actions: usize) -> Result<(), EnvError> {
    if action < num_actions {
        Ok(())
    } else {
        Err(EnvError::InvalidAction {
            action,
            num_actions,
        })
    }
}
