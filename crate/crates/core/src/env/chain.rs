use rand::Rng;

use super::{
    check_action, Action, EnvError, Environment, FiniteMdp, Outcome, TabularDomain, Transition,
};

pub const DEFAULT_CHAIN_LENGTH: usize = 50;

/// Step cap applied by the harness; early random-walk episodes are otherwise unbounded.
pub const DEFAULT_CHAIN_STEP_CAP: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainAction {
    Left = 0,
    Right = 1,
}

/// Deterministic chain `0 - 1 - ... - (N-1)`: start at 0, goal at `N-1`, reward -1 per step.
///
/// `Left` at state 0 stays at 0.
#[derive(Debug, Clone)]
pub struct LinearChain {
    length: usize,
    state: usize,
}

impl LinearChain {
    pub fn new(length: usize) -> Self {
        assert!(length >= 2, "chain needs at least a start and a goal state");
        Self { length, state: 0 }
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn goal(&self) -> usize {
        self.length - 1
    }

    /// Pure transition function; does not touch the current state.
    pub fn transition(&self, state: usize, action: Action) -> Result<Transition<usize>, EnvError> {
        check_action(action, 2)?;
        if state >= self.goal() {
            return Err(EnvError::Terminated);
        }
        let next_state = if action == ChainAction::Right as usize {
            state + 1
        } else {
            state.saturating_sub(1)
        };
        Ok(Transition {
            state,
            action,
            reward: -1.0,
            next_state,
            done: next_state == self.goal(),
        })
    }
}

impl Default for LinearChain {
    fn default() -> Self {
        Self::new(DEFAULT_CHAIN_LENGTH)
    }
}

impl Environment for LinearChain {
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

    fn is_terminal(&self, state: &usize) -> bool {
        *state >= self.goal()
    }

    fn step<R: Rng + ?Sized>(
        &mut self,
        action: Action,
        _rng: &mut R,
    ) -> Result<Transition<usize>, EnvError> {
        let tr = self.transition(self.state, action)?;
        self.state = tr.next_state;
        Ok(tr)
    }

    fn state_id(&self, state: &usize) -> u64 {
        *state as u64
    }
}

impl TabularDomain for LinearChain {
    fn num_states(&self) -> usize {
        self.length
    }

    fn to_finite_mdp(&self) -> FiniteMdp {
        let mut outcomes = Vec::with_capacity(self.length * 2);
        let mut terminal = vec![false; self.length];
        terminal[self.goal()] = true;
        for s in 0..self.length {
            for a in 0..2 {
                match self.transition(s, a) {
                    Ok(tr) => outcomes.push(vec![Outcome {
                        next_state: tr.next_state,
                        probability: 1.0,
                        reward: tr.reward,
                    }]),
                    Err(_) => outcomes.push(Vec::new()),
                }
            }
        }
        FiniteMdp::new(self.length, 2, outcomes, terminal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const L: Action = ChainAction::Left as Action;
    const R: Action = ChainAction::Right as Action;

    #[test]
    fn step_examples() {
        let chain = LinearChain::default();
        let tr = chain.transition(0, R).unwrap();
        assert_eq!((tr.next_state, tr.reward, tr.done), (1, -1.0, false));
        let tr = chain.transition(48, R).unwrap();
        assert_eq!((tr.next_state, tr.reward, tr.done), (49, -1.0, true));
        let tr = chain.transition(0, L).unwrap();
        assert_eq!((tr.next_state, tr.reward, tr.done), (0, -1.0, false));
    }

    #[test]
    fn terminal_state_rejects_steps() {
        let chain = LinearChain::default();
        assert_eq!(chain.transition(49, R), Err(EnvError::Terminated));
        assert!(matches!(
            chain.transition(3, 2),
            Err(EnvError::InvalidAction { .. })
        ));
    }

    proptest! {
        #[test]
        fn episode_return_is_minus_steps(actions in proptest::collection::vec(0usize..2, 1..400)) {
            let mut chain = LinearChain::new(10);
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            chain.reset(&mut rng);
            let (mut ret, mut steps) = (0.0, 0);
            for a in actions {
                let tr = chain.step(a, &mut rng).unwrap();
                ret += tr.reward;
                steps += 1;
                prop_assert_eq!(tr.done, chain.is_terminal(&tr.next_state));
                if tr.done {
                    break;
                }
            }
            prop_assert_eq!(ret, -(steps as f64));
        }
    }
}
