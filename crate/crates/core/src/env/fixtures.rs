//! Tiny continuing MDPs with analytically known behaviour, used to exercise the
//! oracle, the linear learners and the assumption checker.

use rand::Rng;

use super::{
    check_action, Action, EnvError, Environment, FiniteMdp, Outcome, TabularDomain, Transition,
};

/// One state, one action, reward 1 forever. `Q* = 1 / (1 - gamma)`.
#[derive(Debug, Clone, Default)]
pub struct SingleState {
    state: usize,
}

impl Environment for SingleState {
    type State = usize;

    fn num_actions(&self) -> usize {
        1
    }

    fn reward_bound(&self) -> f64 {
        1.0
    }

    fn reset<R: Rng + ?Sized>(&mut self, _rng: &mut R) -> usize {
        0
    }

    fn state(&self) -> &usize {
        &self.state
    }

    fn is_terminal(&self, _state: &usize) -> bool {
        false
    }

    fn step<R: Rng + ?Sized>(
        &mut self,
        action: Action,
        _rng: &mut R,
    ) -> Result<Transition<usize>, EnvError> {
        check_action(action, 1)?;
        Ok(Transition {
            state: 0,
            action,
            reward: 1.0,
            next_state: 0,
            done: false,
        })
    }

    fn state_id(&self, _state: &usize) -> u64 {
        0
    }
}

impl TabularDomain for SingleState {
    fn num_states(&self) -> usize {
        1
    }

    fn to_finite_mdp(&self) -> FiniteMdp {
        FiniteMdp::new(
            1,
            1,
            vec![vec![Outcome {
                next_state: 0,
                probability: 1.0,
                reward: 1.0,
            }]],
            vec![false],
        )
    }
}

/// Two states, two actions (0 = "go to 0", 1 = "go to 1"), continuing.
///
/// From state 0 both actions are deterministic. From state 1, action 0 moves to 0
/// and action 1 moves to 0 or stays with probability 1/2 each. Reward is 1 on
/// arriving in state 1, else 0. Under the uniform policy the stationary state
/// distribution is (0.6, 0.4).
#[derive(Debug, Clone, Default)]
pub struct TwoState {
    state: usize,
}

impl TwoState {
    fn outcomes(state: usize, action: Action) -> Vec<Outcome> {
        let arrive = |s: usize, p: f64| Outcome {
            next_state: s,
            probability: p,
            reward: s as f64,
        };
        match (state, action) {
            (0, 0) => vec![arrive(0, 1.0)],
            (0, _) => vec![arrive(1, 1.0)],
            (_, 0) => vec![arrive(0, 1.0)],
            (_, _) => vec![arrive(0, 0.5), arrive(1, 0.5)],
        }
    }
}

impl Environment for TwoState {
    type State = usize;

    fn num_actions(&self) -> usize {
        2
    }

    fn reward_bound(&self) -> f64 {
        1.0
    }

    fn reset<R: Rng + ?Sized>(&mut self, _rng: &mut R) -> usize {
        self.state = 0;
        0
    }

    fn state(&self) -> &usize {
        &self.state
    }

    fn is_terminal(&self, _state: &usize) -> bool {
        false
    }

    fn step<R: Rng + ?Sized>(
        &mut self,
        action: Action,
        rng: &mut R,
    ) -> Result<Transition<usize>, EnvError> {
        check_action(action, 2)?;
        let outcomes = Self::outcomes(self.state, action);
        let chosen = if outcomes.len() == 1 {
            outcomes[0]
        } else {
            let u: f64 = rng.gen();
            if u < outcomes[0].probability {
                outcomes[0]
            } else {
                outcomes[1]
            }
        };
        let tr = Transition {
            state: self.state,
            action,
            reward: chosen.reward,
            next_state: chosen.next_state,
            done: false,
        };
        self.state = chosen.next_state;
        Ok(tr)
    }

    fn state_id(&self, state: &usize) -> u64 {
        *state as u64
    }
}

impl TabularDomain for TwoState {
    fn num_states(&self) -> usize {
        2
    }

    fn to_finite_mdp(&self) -> FiniteMdp {
        let outcomes = (0..2)
            .flat_map(|s| (0..2).map(move |a| Self::outcomes(s, a)))
            .collect();
        FiniteMdp::new(2, 2, outcomes, vec![false, false])
    }
}
